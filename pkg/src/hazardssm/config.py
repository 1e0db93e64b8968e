"""Run configuration: defaults, JSON config files, flag overrides, manifests.

Precedence is flags > config file > defaults. A manifest written by any
command embeds the fully resolved configuration, so passing a manifest back
as ``--config`` replays the run byte-for-byte.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .data import SliceSpec, TransformSpec
from .errors import ConfigError
from .forecast import CrpsConfig
from .gibbs import GibbsConfig, PriorSpec
from .simulate import DgpSpec
from .util import atomic_write_text, sha256_file

VARIANTS = ("ssm", "mssm", "ols")


def default_config() -> dict:
    return {
        "seed": 0,
        "out": "out",
        "state": "ZZ",
        "variant": "mssm",
        "k": 3,
        "workers": 1,
        "plots": False,
        "inputs": {"counts": None, "losses": None, "panel": None, "chain": None},
        "transform": {
            "mu_x": 12.927,
            "sigma_x": math.sqrt(7.755),
            "response_link": "logit",
            "zero_loss_policy": "floor_at_one_dollar",
            "estimate_moments": False,
        },
        "slice": {"lags": [3, 4, 5], "threshold": 1.0e10, "threshold_scale": "raw_dollars"},
        "prior": {"tau2": 1.0, "rho": 0.5, "a": 0.01, "b": 0.01},
        "gibbs": {"n_iter": 5000, "burn_in": 2000, "alpha0": [0.0, 0.0]},
        "t0_range": None,
        "crps_nodes": 512,
        "dgp": {
            "beta_u": [1.0],
            "beta_l": [0.1],
            "sigma_y2": 0.25,
            "sigma_mu2": 1e-2,
            "sigma_nu2": 1e-2,
            "alpha0": [-4.0, 0.0],
            "T": 200,
            "threshold": 2.0,
            "lags": [0],
        },
    }


def load_config_file(path) -> dict:
    """Read a JSON config; a manifest (with an embedded "config") unwraps."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    if "config" in payload and "artifacts" in payload:
        payload = payload["config"]
    return payload


def merge_config(base: dict, override: dict, _path: str = "") -> dict:
    """Deep merge; unknown keys are rejected so typos fail loudly."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{_path}.{key}" if _path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = merge_config(base[key], value, where)
        else:
            out[key] = value
    return out


@dataclass
class RunConfig:
    """Fully resolved settings plus the constructed spec objects."""

    raw: dict
    seed: int
    out: Path
    state: str
    variant: str
    k: int
    workers: int
    plots: bool
    inputs: dict
    transform: TransformSpec
    estimate_moments: bool
    slice_spec: SliceSpec
    prior: PriorSpec
    gibbs: GibbsConfig
    alpha0: tuple[float, float]
    t0_range: tuple[int, int] | None
    crps: CrpsConfig
    dgp: DgpSpec


def build_run_config(d: dict) -> RunConfig:
    d = merge_config(default_config(), d)  # validates keys, fills defaults
    if d["variant"] not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS}, got {d['variant']!r}")
    if not isinstance(d["seed"], int):
        raise ConfigError(f"seed must be an integer, got {d['seed']!r}")
    if d["k"] < 0:
        raise ConfigError(f"k must be nonnegative, got {d['k']}")
    if d["workers"] < 1:
        raise ConfigError(f"workers must be >= 1, got {d['workers']}")

    t = d["transform"]
    transform = TransformSpec(
        mu_x=float(t["mu_x"]),
        sigma_x=float(t["sigma_x"]),
        response_link=t["response_link"],
        zero_loss_policy=t["zero_loss_policy"],
    )
    s = d["slice"]
    slice_spec = SliceSpec(
        lags=tuple(s["lags"]), threshold=float(s["threshold"]),
        threshold_scale=s["threshold_scale"],
    )
    p = d["prior"]
    prior = PriorSpec(tau2=float(p["tau2"]), rho=float(p["rho"]),
                      a=float(p["a"]), b=float(p["b"]))
    g = d["gibbs"]
    gibbs = GibbsConfig(n_iter=int(g["n_iter"]), burn_in=int(g["burn_in"]),
                        seed=int(d["seed"]))
    alpha0 = tuple(float(v) for v in g["alpha0"])
    if len(alpha0) != 2:
        raise ConfigError(f"gibbs.alpha0 must have 2 entries, got {g['alpha0']}")

    t0_range = d["t0_range"]
    if t0_range is not None:
        if (not isinstance(t0_range, (list, tuple)) or len(t0_range) != 2
                or t0_range[0] > t0_range[1]):
            raise ConfigError(f"t0_range must be [start, end] with start <= end, got {t0_range}")
        t0_range = (int(t0_range[0]), int(t0_range[1]))

    dg = d["dgp"]
    dgp = DgpSpec(
        beta_u=tuple(dg["beta_u"]), beta_l=tuple(dg["beta_l"]),
        sigma_y2=float(dg["sigma_y2"]), sigma_mu2=float(dg["sigma_mu2"]),
        sigma_nu2=float(dg["sigma_nu2"]),
        alpha0=tuple(float(v) for v in dg["alpha0"]),
        T=int(dg["T"]), threshold=float(dg["threshold"]),
        lags=tuple(dg["lags"]), seed=int(d["seed"]),
    )

    return RunConfig(
        raw=d,
        seed=int(d["seed"]),
        out=Path(d["out"]),
        state=str(d["state"]),
        variant=d["variant"],
        k=int(d["k"]),
        workers=int(d["workers"]),
        plots=bool(d["plots"]),
        inputs=d["inputs"],
        transform=transform,
        estimate_moments=bool(t["estimate_moments"]),
        slice_spec=slice_spec,
        prior=prior,
        gibbs=gibbs,
        alpha0=alpha0,
        t0_range=t0_range,
        crps=CrpsConfig.trapezoid(int(d["crps_nodes"])),
        dgp=dgp,
    )


def require_file(path_value, what: str) -> Path:
    if path_value is None:
        raise ConfigError(f"no {what} file configured (set inputs.{what})")
    path = Path(path_value)
    if not path.exists():
        raise ConfigError(f"{what} file not found: {path}")
    return path


def write_manifest(command: str, cfg: RunConfig, artifacts: list[Path], out_dir: Path) -> Path:
    """Record the resolved config and artifact hashes for exact replay."""
    manifest = {
        "command": command,
        "config": cfg.raw,
        "artifacts": {p.name: sha256_file(p) for p in sorted(artifacts)},
    }
    path = out_dir / "manifest.json"
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
