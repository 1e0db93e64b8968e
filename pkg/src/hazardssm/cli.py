"""Command-line interface.

Subcommands: simulate, fit, predict, score, summarize. Configuration comes
from defaults, an optional JSON config file (--config), and flag overrides,
in increasing precedence. Every command writes a manifest.json with the
resolved config and artifact hashes; passing that manifest back as --config
replays the run byte-identically.

Exit codes: 0 success, 1 config error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import functools
import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np
import pandas as pd

from . import report
from .config import (
    RunConfig,
    build_run_config,
    load_config_file,
    require_file,
    write_manifest,
)
from .data import (
    aligned_response,
    build_design,
    build_panel,
    panel_frame,
    read_counts_csv,
    read_losses_csv,
    read_panel_csv,
)
from .diagnostics import summarize
from .errors import ConfigError, DataError, NumericalError
from .forecast import ols_baseline, rolling_forecast
from .gibbs import read_chain_csv, run_gibbs, write_chain_csv, write_latent_csv, _chain_frame
from .simulate import simulate_dgp
from .ssm import ModelParams
from .util import atomic_write_text

FORECAST_COLUMNS = ["t0", "year", "month", "y_obs", "pred_mean",
                    "pred_q025", "pred_q975", "crps"]


def _fail(code: int, stage: str, exc: Exception) -> None:
    click.echo(f"[{stage}] {exc}", err=True)
    sys.exit(code)


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(1, "config", exc)
        except DataError as exc:
            _fail(2, "data", exc)
        except NumericalError as exc:
            _fail(3, "numerics", exc)

    return wrapper


def _resolve(config_path, overrides: dict) -> RunConfig:
    base = load_config_file(config_path) if config_path else {}
    merged = dict(base)
    # flag overrides are a sparse nested dict; merge_config inside
    # build_run_config validates everything against the defaults
    for key, value in overrides.items():
        if value is None:
            continue
        parts = key.split(".")
        node = merged
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return build_run_config(merged)


def _write_frame(df: pd.DataFrame, path: Path) -> Path:
    atomic_write_text(path, df.to_csv(index=False))
    return path


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(), default=None,
                      help="JSON config file (or a manifest to replay).")(fn)
    fn = click.option("--out", default=None, help="Output directory.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Top-level RNG seed.")(fn)
    fn = click.option("--state", default=None, help="Two-letter state code.")(fn)
    fn = click.option("--variant", type=click.Choice(["ssm", "mssm", "ols"]),
                      default=None, help="Model variant.")(fn)
    fn = click.option("--plots/--no-plots", "plots", default=None,
                      help="Also render figures next to the CSV outputs.")(fn)
    return fn


@click.group()
def main():
    """Sliced state-space modeling of default rates under hazard losses."""


def _load_panel(cfg: RunConfig):
    inputs = cfg.inputs
    if inputs.get("panel"):
        path = require_file(inputs["panel"], "panel")
        return read_panel_csv(path, k=cfg.k, transform=cfg.transform)
    counts_path = require_file(inputs.get("counts"), "counts")
    losses_path = require_file(inputs.get("losses"), "losses")
    counts = read_counts_csv(counts_path)
    losses = read_losses_csv(losses_path)
    return build_panel(counts, losses, cfg.state, k=cfg.k, transform=cfg.transform,
                       estimate_moments=cfg.estimate_moments)


def _gibbs_config(cfg: RunConfig, n_cols: int):
    init = ModelParams(beta=np.zeros(n_cols), sigma_y2=1.0, sigma_mu2=1.0,
                       sigma_nu2=1.0, alpha0=cfg.alpha0)
    return replace(cfg.gibbs, init=init)


@main.command()
@_common_options
@click.option("--horizon", type=int, default=None, help="Number of months to simulate.")
@_guarded
def simulate(config_path, out, seed, state, variant, plots, horizon):
    """Generate a synthetic panel (and its latent truth) in pipeline format."""
    cfg = _resolve(config_path, {
        "out": out, "seed": seed, "state": state, "variant": variant,
        "plots": plots, "dgp.T": horizon,
    })
    sim = simulate_dgp(cfg.dgp)
    panel = sim.panel(state=cfg.state, transform=cfg.transform)
    out_dir = cfg.out
    out_dir.mkdir(parents=True, exist_ok=True)

    panel_path = out_dir / "panel.csv"
    atomic_write_text(panel_path, panel_frame(panel).to_csv(index=False))
    truth = pd.DataFrame({
        "t": np.arange(1, cfg.dgp.T + 1),
        "year": panel.year,
        "month": panel.month,
        "mu": sim.latent[:, 0],
        "nu": sim.latent[:, 1],
    })
    for j, lag in enumerate(cfg.dgp.lags):
        truth[f"x_lag{lag}"] = sim.X[:, j]
    truth_path = _write_frame(truth, out_dir / "truth.csv")

    fit_cfg = dict(cfg.raw)
    fit_cfg["inputs"] = dict(cfg.raw["inputs"], panel=str(panel_path))
    fit_cfg["k"] = 0
    fit_cfg["slice"] = {"lags": list(cfg.dgp.lags), "threshold": cfg.dgp.threshold,
                        "threshold_scale": "transformed"}
    fit_cfg["gibbs"] = dict(cfg.raw["gibbs"], alpha0=list(cfg.dgp.alpha0))
    fit_config_path = out_dir / "fit_config.json"
    atomic_write_text(fit_config_path, json.dumps(fit_cfg, indent=2, sort_keys=True) + "\n")

    artifacts = [panel_path, truth_path, fit_config_path]
    if cfg.plots:
        artifacts.append(report.simulation_figure(sim, out_dir / "fig_simulation.png"))
    manifest = write_manifest("simulate", cfg, artifacts, out_dir)
    click.echo(f"wrote {panel_path} (T={cfg.dgp.T}), {truth_path}, "
               f"{fit_config_path}, {manifest}")


@main.command()
@_common_options
@click.option("--n-iter", type=int, default=None, help="Total Gibbs iterations.")
@click.option("--burn-in", type=int, default=None, help="Burn-in iterations.")
@_guarded
def fit(config_path, out, seed, state, variant, plots, n_iter, burn_in):
    """Fit the configured variant and export chain, latent paths, and summary."""
    cfg = _resolve(config_path, {
        "out": out, "seed": seed, "state": state, "variant": variant, "plots": plots,
        "gibbs.n_iter": n_iter, "gibbs.burn_in": burn_in,
    })
    if cfg.variant == "ols":
        raise ConfigError("variant 'ols' has no Gibbs fit; use predict/score")
    panel = _load_panel(cfg)
    design = build_design(panel, cfg.slice_spec, sliced=(cfg.variant == "mssm"))
    y = aligned_response(panel, design)
    chain = run_gibbs(y, design, cfg.prior, _gibbs_config(cfg, design.n_cols))

    out_dir = cfg.out
    out_dir.mkdir(parents=True, exist_ok=True)
    chain_path = out_dir / "chain.csv"
    atomic_write_text(chain_path, _chain_frame(chain).to_csv(index=False))
    latent_path = out_dir / "latent.csv"
    write_latent_csv(chain, latent_path)
    summary = summarize(chain)
    summary_path = _write_frame(summary, out_dir / "summary.csv")

    artifacts = [chain_path, latent_path, summary_path]
    if cfg.plots:
        artifacts.append(report.trace_figure(chain, out_dir / "fig_traces.png"))
        artifacts.append(report.latent_figure(panel, chain, design,
                                              out_dir / "fig_latent.png"))
    manifest = write_manifest("fit", cfg, artifacts, out_dir)
    click.echo(f"kept {len(chain)} of {cfg.gibbs.n_iter} iterations "
               f"({cfg.variant}, {design.n_cols} columns) -> {chain_path}")
    click.echo(f"wrote {latent_path}, {summary_path}, {manifest}")


def _forecast_frame(cfg: RunConfig, panel, variant: str) -> tuple[pd.DataFrame, float, str]:
    design = build_design(panel, cfg.slice_spec, sliced=(variant == "mssm"))
    if cfg.t0_range is None:
        raise ConfigError("predict/score needs t0_range = [start, end]")
    t0s = range(cfg.t0_range[0], cfg.t0_range[1] + 1)
    if variant == "ols":
        df = ols_baseline(panel, design, t0s)
        frame = df[["t0", "year", "month", "y_obs", "pred_mean"]].copy()
        frame["pred_q025"] = np.nan
        frame["pred_q975"] = np.nan
        frame["crps"] = df["abs_error"]
        return frame[FORECAST_COLUMNS], float(df["abs_error"].mean()), "mean absolute error"
    result = rolling_forecast(panel, design, cfg.prior,
                              _gibbs_config(cfg, design.n_cols), t0s,
                              crps_cfg=cfg.crps, workers=cfg.workers)
    return result.records[FORECAST_COLUMNS], result.mean_crps, "mean CRPS"


def _write_forecast(frame: pd.DataFrame, mean_value: float, path: Path) -> Path:
    footer = pd.DataFrame([{"t0": "mean", "crps": mean_value}],
                          columns=FORECAST_COLUMNS)
    atomic_write_text(path, pd.concat([frame, footer]).to_csv(index=False))
    return path


@main.command()
@_common_options
@click.option("--t0-start", type=int, default=None)
@click.option("--t0-end", type=int, default=None)
@click.option("--n-iter", type=int, default=None)
@click.option("--burn-in", type=int, default=None)
@_guarded
def predict(config_path, out, seed, state, variant, plots, t0_start, t0_end,
            n_iter, burn_in):
    """Rolling one-step-ahead forecasts for one variant, with CRPS scores."""
    overrides = {
        "out": out, "seed": seed, "state": state, "variant": variant, "plots": plots,
        "gibbs.n_iter": n_iter, "gibbs.burn_in": burn_in,
    }
    if t0_start is not None or t0_end is not None:
        if t0_start is None or t0_end is None:
            raise ConfigError("provide both --t0-start and --t0-end")
        overrides["t0_range"] = [t0_start, t0_end]
    cfg = _resolve(config_path, overrides)
    panel = _load_panel(cfg)
    frame, mean_value, label = _forecast_frame(cfg, panel, cfg.variant)
    out_dir = cfg.out
    out_dir.mkdir(parents=True, exist_ok=True)
    path = _write_forecast(frame, mean_value, out_dir / f"forecast_{cfg.variant}.csv")
    artifacts = [path]
    if cfg.plots:
        artifacts.append(report.forecast_figure(frame, out_dir / f"fig_forecast_{cfg.variant}.png"))
    manifest = write_manifest("predict", cfg, artifacts, out_dir)
    click.echo(f"{label} ({cfg.variant}) = {mean_value:.6g}")
    click.echo(f"wrote {path}, {manifest}")


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--state", default=None)
@click.option("--variant", "variants", type=click.Choice(["ssm", "mssm", "ols"]),
              multiple=True, help="Variant(s) to score; repeat for a comparison.")
@click.option("--plots/--no-plots", "plots", default=None)
@click.option("--t0-start", type=int, default=None)
@click.option("--t0-end", type=int, default=None)
@click.option("--n-iter", type=int, default=None)
@click.option("--burn-in", type=int, default=None)
@_guarded
def score(config_path, out, seed, state, variants, plots, t0_start, t0_end,
          n_iter, burn_in):
    """Score one or more variants over the evaluation window and compare."""
    overrides = {
        "out": out, "seed": seed, "state": state, "plots": plots,
        "gibbs.n_iter": n_iter, "gibbs.burn_in": burn_in,
    }
    if t0_start is not None or t0_end is not None:
        if t0_start is None or t0_end is None:
            raise ConfigError("provide both --t0-start and --t0-end")
        overrides["t0_range"] = [t0_start, t0_end]
    cfg = _resolve(config_path, overrides)
    variants = list(variants) or [cfg.variant]
    panel = _load_panel(cfg)
    out_dir = cfg.out
    out_dir.mkdir(parents=True, exist_ok=True)

    artifacts = []
    means: dict[str, float] = {}
    for variant in variants:
        frame, mean_value, label = _forecast_frame(cfg, panel, variant)
        path = _write_forecast(frame, mean_value, out_dir / f"forecast_{variant}.csv")
        artifacts.append(path)
        means[variant] = mean_value
        click.echo(f"{label} ({variant}) = {mean_value:.6g}")
        if cfg.plots:
            artifacts.append(report.forecast_figure(
                frame, out_dir / f"fig_forecast_{variant}.png"))
    if len(means) > 1:
        order = sorted(means, key=means.get)
        click.echo("ordering: " + " < ".join(f"{v} ({means[v]:.6g})" for v in order))
    manifest = write_manifest("score", cfg, artifacts, out_dir)
    click.echo(f"wrote {manifest}")


@main.command(name="summarize")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--chain", "chain_path", type=click.Path(), default=None,
              help="Chain CSV produced by fit.")
@click.option("--out", default=None)
@_guarded
def summarize_cmd(config_path, chain_path, out):
    """Posterior summary table from a stored chain CSV."""
    cfg = _resolve(config_path, {"out": out, "inputs.chain": chain_path})
    path = require_file(cfg.inputs.get("chain"), "chain")
    chain = read_chain_csv(path)
    table = summarize(chain)
    out_dir = cfg.out
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_path = _write_frame(table, out_dir / "summary.csv")
    write_manifest("summarize", cfg, [summary_path], out_dir)
    click.echo(table.to_string(index=False))
    click.echo(f"wrote {summary_path}")


if __name__ == "__main__":
    main()
