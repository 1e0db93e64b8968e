"""Posterior prediction, rolling one-step backtests, CRPS scoring, OLS baseline.

Forecasts are scored on the original rate scale in (0,1): the CRPS integral
is approximated by fixed quadrature against the empirical CDF of the
posterior predictive samples.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .data import DesignMatrix, SeriesPanel, aligned_response, inverse_transform_response
from .errors import ConfigError, DataError
from .gibbs import ChainOutput, GibbsConfig, PriorSpec, run_gibbs
from .util import derive_seed

__all__ = [
    "PredictiveDistribution",
    "CrpsConfig",
    "RollingForecastResult",
    "posterior_predictive",
    "crps",
    "rolling_forecast",
    "ols_baseline",
]


@dataclass(frozen=True)
class PredictiveDistribution:
    """Posterior predictive samples of the next observation, on both scales."""

    samples_y: np.ndarray
    samples_rate: np.ndarray
    t0: int | None = None

    def __post_init__(self):
        if len(self.samples_y) < 1 or len(self.samples_y) != len(self.samples_rate):
            raise DataError("predictive distribution needs matched, non-empty samples")
        if np.any(self.samples_rate <= 0) or np.any(self.samples_rate >= 1):
            raise DataError("rate-scale predictive samples must lie in (0,1)")

    @property
    def n(self) -> int:
        return len(self.samples_y)

    def cdf(self, v) -> np.ndarray:
        """Empirical CDF of the rate-scale samples."""
        s = np.sort(self.samples_rate)
        return np.searchsorted(s, np.asarray(v, dtype=float), side="right") / len(s)

    def mean_rate(self) -> float:
        return float(np.mean(self.samples_rate))

    def quantile_rate(self, q) -> float:
        return float(np.quantile(self.samples_rate, q))


def _trapezoid_nodes(m: int) -> tuple[np.ndarray, np.ndarray]:
    nodes = np.linspace(0.0, 1.0, m)
    h = 1.0 / (m - 1)
    weights = np.full(m, h)
    weights[0] = weights[-1] = h / 2
    return nodes, weights


@dataclass(frozen=True)
class CrpsConfig:
    """Quadrature rule on [0,1]; composite trapezoid with 512 nodes by default."""

    nodes: np.ndarray = field(default_factory=lambda: _trapezoid_nodes(512)[0])
    weights: np.ndarray = field(default_factory=lambda: _trapezoid_nodes(512)[1])

    @classmethod
    def trapezoid(cls, m: int = 512) -> "CrpsConfig":
        if m < 2:
            raise ConfigError("need at least 2 quadrature nodes")
        nodes, weights = _trapezoid_nodes(m)
        return cls(nodes=nodes, weights=weights)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if len(nodes) != len(weights) or len(nodes) < 2:
            raise ConfigError("quadrature nodes/weights must be matched and >= 2")
        if np.any(np.diff(nodes) <= 0) or nodes[0] < 0 or nodes[-1] > 1:
            raise ConfigError("quadrature nodes must increase strictly within [0,1]")
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ConfigError("quadrature weights must be positive and sum to 1")


def posterior_predictive(chain: ChainOutput, X_next, rng=None,
                         transform=None, t0: int | None = None) -> PredictiveDistribution:
    """One-step posterior predictive: for each kept draw, propagate the last
    latent state through the transition with fresh state noise, then draw the
    observation. ``transform`` controls the inverse link (logit default)."""
    if chain.latent is None or len(chain) == 0:
        raise DataError("need a non-empty chain with stored latent paths")
    rng = np.random.default_rng(rng)
    X_next = np.asarray(X_next, dtype=float).ravel()
    if len(X_next) != chain.n_coef:
        raise DataError(
            f"next-period covariate row has {len(X_next)} entries for "
            f"{chain.n_coef} coefficients"
        )
    n = len(chain)
    last = chain.latent[:, -1, :]
    mu_next = (last[:, 0] + last[:, 1]
               + rng.standard_normal(n) * np.sqrt(chain.sigma_mu2))
    y = chain.beta @ X_next + mu_next + rng.standard_normal(n) * np.sqrt(chain.sigma_y2)
    if transform is None:
        from .data import TransformSpec
        transform = TransformSpec()
    rate = inverse_transform_response(y, transform)
    tiny = np.nextafter(0.0, 1.0)
    rate = np.clip(rate, tiny, np.nextafter(1.0, 0.0))
    return PredictiveDistribution(samples_y=y, samples_rate=np.atleast_1d(rate), t0=t0)


def crps(pred, y_obs: float, cfg: CrpsConfig | None = None) -> float:
    """Quadrature CRPS of a predictive distribution against one observation.

    Accepts a PredictiveDistribution or a raw array of rate-scale samples.
    """
    cfg = cfg or CrpsConfig()
    if not (0 <= y_obs <= 1):
        raise DataError(f"observed rate must lie in [0,1], got {y_obs}")
    samples = pred.samples_rate if isinstance(pred, PredictiveDistribution) else np.asarray(pred, dtype=float)
    if samples.size == 0:
        raise DataError("empty forecast sample")
    s = np.sort(samples)
    F = np.searchsorted(s, cfg.nodes, side="right") / len(s)
    indicator = (cfg.nodes >= y_obs).astype(float)
    return float(np.sum(cfg.weights * (F - indicator) ** 2))


@dataclass
class RollingForecastResult:
    records: pd.DataFrame
    mean_crps: float


def _window_tasks(panel: SeriesPanel, design: DesignMatrix, t0_range) -> list[int]:
    t0s = [int(t) for t in t0_range]
    if not t0s:
        raise ConfigError("empty t0 range")
    lo, hi = int(design.t_index[0]), int(design.t_index[-1])
    for t0 in t0s:
        if t0 < lo or t0 + 1 > hi:
            raise ConfigError(
                f"t0={t0} out of range: design rows cover t={lo}..{hi} and the "
                f"forecast needs a row at t0+1"
            )
    return t0s


def _fit_one_window(args):
    panel, design, prior, config, t0 = args
    y = aligned_response(panel, design)
    train = design.t_index <= t0
    cfg = replace(config, seed=derive_seed(config.seed, t0))
    chain = run_gibbs(y[train], design.values[train], prior, cfg, columns=design.columns)
    pred = posterior_predictive(
        chain, design.row_at(t0 + 1), rng=derive_seed(config.seed, t0, 1),
        transform=panel.transform, t0=t0,
    )
    year, month = panel.calendar(t0 + 1)
    pos = int(t0 + 1 - panel.t_index[0])
    return {
        "t0": t0,
        "year": year,
        "month": month,
        "y_obs": float(panel.rate[pos]),
        "pred_mean": pred.mean_rate(),
        "pred_q025": pred.quantile_rate(0.025),
        "pred_q975": pred.quantile_rate(0.975),
        "_pred": pred,
    }


def rolling_forecast(
    panel: SeriesPanel,
    design: DesignMatrix,
    prior: PriorSpec,
    config: GibbsConfig,
    t0_range,
    crps_cfg: CrpsConfig | None = None,
    workers: int = 1,
) -> RollingForecastResult:
    """Refit on 1..t0, predict t0+1, and score, for every t0 in the range.

    Window seeds derive from (config.seed, t0), so results are identical
    whether windows run serially or across workers.
    """
    crps_cfg = crps_cfg or CrpsConfig()
    t0s = _window_tasks(panel, design, t0_range)
    tasks = [(panel, design, prior, config, t0) for t0 in t0s]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_fit_one_window, tasks))
    else:
        raw = [_fit_one_window(t) for t in tasks]
    for row in raw:
        pred = row.pop("_pred")
        row["crps"] = crps(pred, row["y_obs"], crps_cfg)
    frame = pd.DataFrame(raw)
    return RollingForecastResult(records=frame, mean_crps=float(frame["crps"].mean()))


def ols_baseline(panel: SeriesPanel, design: DesignMatrix, t0_range) -> pd.DataFrame:
    """No-latent-state benchmark: least squares of y on the design plus an
    intercept over each training window, one-step point prediction, absolute
    error on the rate scale (the CRPS of a point forecast).

    Rank-deficient windows fall back to a tiny ridge penalty on the slopes
    (the intercept stays unpenalized) with a warning.
    """
    t0s = _window_tasks(panel, design, t0_range)
    y = aligned_response(panel, design)
    rows = []
    for t0 in t0s:
        train = design.t_index <= t0
        n = int(train.sum())
        if n < 2:
            raise DataError(f"OLS window ending at t0={t0} has {n} observation(s)")
        G = np.column_stack([np.ones(n), design.values[train]])
        yw = y[train]
        coef, _, rank, _ = np.linalg.lstsq(G, yw, rcond=None)
        if rank < G.shape[1]:
            warnings.warn(
                f"rank-deficient OLS window at t0={t0}; using ridge fallback",
                stacklevel=2,
            )
            pen = np.eye(G.shape[1]) * 1e-8
            pen[0, 0] = 0.0
            coef = np.linalg.solve(G.T @ G + pen, G.T @ yw)
        x_next = np.concatenate([[1.0], design.row_at(t0 + 1)])
        pred_y = float(x_next @ coef)
        pred_rate = float(inverse_transform_response(pred_y, panel.transform))
        year, month = panel.calendar(t0 + 1)
        pos = int(t0 + 1 - panel.t_index[0])
        obs_rate = float(panel.rate[pos])
        rows.append(
            {
                "t0": t0,
                "year": year,
                "month": month,
                "y_obs": obs_rate,
                "pred_mean": pred_rate,
                "pred_y": pred_y,
                "abs_error": abs(pred_rate - obs_rate),
            }
        )
    return pd.DataFrame(rows)
