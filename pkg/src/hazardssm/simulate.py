"""Synthetic data generation for testing and calibration.

The generator draws an iid standard-normal covariate series, slices it at a
threshold, and emits observations through the local-linear-trend model with
regime-specific coefficients. Default parameter values reproduce the
reference study configuration (strong above-threshold effect 1.0, weak
below-threshold effect 0.1, threshold 2, initial level -4). With lags the
covariate series behaves like a transformed monthly loss series, so the
generated panel flows through the same CSV pipeline as real data.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy.special import expit

from .data import DesignMatrix, SeriesPanel, SliceSpec, TransformSpec
from .errors import ConfigError
from .forecast import posterior_predictive
from .gibbs import GibbsConfig, PriorSpec, run_gibbs
from .ssm import ModelParams
from .util import derive_seed

__all__ = ["DgpSpec", "SimulationOutput", "simulate_dgp", "rolling_reestimation_study"]


@dataclass(frozen=True)
class DgpSpec:
    """Data-generating process for the sliced model.

    One coefficient pair per lag; ``lags=(0,)`` means a single contemporaneous
    covariate. ``covariates`` optionally supplies the underlying series
    (length T + max(lags)) instead of iid N(0,1) draws.
    """

    beta_u: tuple[float, ...] = (1.0,)
    beta_l: tuple[float, ...] = (0.1,)
    sigma_y2: float = 0.25
    sigma_mu2: float = 1e-2
    sigma_nu2: float = 1e-2
    alpha0: tuple[float, float] = (-4.0, 0.0)
    T: int = 200
    threshold: float = 2.0
    lags: tuple[int, ...] = (0,)
    covariates: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "beta_u", tuple(float(b) for b in self.beta_u))
        object.__setattr__(self, "beta_l", tuple(float(b) for b in self.beta_l))
        object.__setattr__(self, "lags", tuple(int(l) for l in self.lags))
        if self.T < 1:
            raise ConfigError(f"T must be >= 1, got {self.T}")
        if not np.isfinite(self.threshold):
            raise ConfigError("threshold must be finite")
        if not (len(self.beta_u) == len(self.beta_l) == len(self.lags)):
            raise ConfigError("beta_u, beta_l and lags must have matching lengths")
        if any(l < 0 for l in self.lags):
            raise ConfigError(f"lags must be nonnegative, got {self.lags}")
        if self.sigma_y2 <= 0 or self.sigma_mu2 < 0 or self.sigma_nu2 < 0:
            raise ConfigError("variances must be positive (observation) / nonnegative (state)")
        if self.covariates is not None:
            z = np.asarray(self.covariates, dtype=float)
            if len(z) != self.T + max(self.lags):
                raise ConfigError(
                    f"supplied covariates must have length T + max(lags) = "
                    f"{self.T + max(self.lags)}, got {len(z)}"
                )
            object.__setattr__(self, "covariates", z)


@dataclass(frozen=True)
class SimulationOutput:
    """One realization: observations, sliced covariates, and the true states."""

    spec: DgpSpec
    z: np.ndarray          # underlying covariate series, length T + max(lags)
    X: np.ndarray          # (T, d) lagged covariate rows
    lower: np.ndarray      # (T, d) at-or-below-threshold block
    upper: np.ndarray      # (T, d) above-threshold block
    latent: np.ndarray     # (T, 2) true (mu_t, nu_t)
    y: np.ndarray          # (T,)
    rate: np.ndarray       # logistic(y), the observation on the rate scale
    trend_rate: np.ndarray  # logistic(mu_t)

    def design(self, sliced: bool = True) -> DesignMatrix:
        spec = SliceSpec(lags=self.spec.lags, threshold=self.spec.threshold,
                         threshold_scale="transformed")
        t_index = np.arange(1, self.spec.T + 1)
        if sliced:
            cols = tuple(f"l_lag{l}" for l in self.spec.lags) + tuple(
                f"u_lag{l}" for l in self.spec.lags
            )
            return DesignMatrix(np.hstack([self.lower, self.upper]), t_index, cols,
                                spec, sliced=True)
        cols = tuple(f"x_lag{l}" for l in self.spec.lags)
        return DesignMatrix(self.X.copy(), t_index, cols, spec, sliced=False)

    def panel(self, state: str = "ZZ", start: tuple[int, int] = (2001, 1),
              transform: TransformSpec | None = None) -> SeriesPanel:
        """Panel in the same shape the data module produces from real files.

        Losses are the covariate mapped back to dollars through the loss
        transform, so re-deriving g from the panel recovers the covariate.
        """
        transform = transform or TransformSpec()
        T = self.spec.T
        g = self.z[max(self.spec.lags):]
        months = np.arange(T) + (start[1] - 1)
        return SeriesPanel(
            state=state,
            t_index=np.arange(1, T + 1),
            year=start[0] + months // 12,
            month=months % 12 + 1,
            rate=self.rate,
            y=self.y,
            loss_usd=np.exp(transform.mu_x + transform.sigma_x * g),
            g=g,
            k=0,
            transform=transform,
        )


def simulate_dgp(spec: DgpSpec) -> SimulationOutput:
    """Draw one realization of the process. Bit-reproducible given spec.seed."""
    rng = np.random.default_rng(spec.seed)
    T, d = spec.T, len(spec.lags)
    max_lag = max(spec.lags)
    if spec.covariates is not None:
        z = spec.covariates.copy()
    else:
        z = rng.standard_normal(T + max_lag)

    X = np.empty((T, d))
    for j, lag in enumerate(spec.lags):
        X[:, j] = z[max_lag - lag: max_lag - lag + T]
    over = X > spec.threshold
    upper = np.where(over, X, 0.0)
    lower = np.where(over, 0.0, X)

    eta = rng.standard_normal((T, 2))
    eta[:, 0] *= np.sqrt(spec.sigma_mu2)
    eta[:, 1] *= np.sqrt(spec.sigma_nu2)
    latent = np.empty((T, 2))
    mu_prev, nu_prev = spec.alpha0
    for t in range(T):
        mu = mu_prev + nu_prev + eta[t, 0]
        nu = nu_prev + eta[t, 1]
        latent[t, 0] = mu
        latent[t, 1] = nu
        mu_prev, nu_prev = mu, nu

    eps = rng.standard_normal(T) * np.sqrt(spec.sigma_y2)
    y = lower @ np.array(spec.beta_l) + upper @ np.array(spec.beta_u) + latent[:, 0] + eps

    return SimulationOutput(
        spec=spec, z=z, X=X, lower=lower, upper=upper, latent=latent, y=y,
        rate=expit(y), trend_rate=expit(latent[:, 0]),
    )


def rolling_reestimation_study(
    spec: DgpSpec,
    prior: PriorSpec,
    config: GibbsConfig,
    t_start: int,
    sliced: bool = True,
) -> pd.DataFrame:
    """Re-fit on 1..t0 for each t0 = t_start..T-1 and track coefficient
    estimates plus the one-step predictive summary.

    Each window gets a seed derived from (config.seed, t0), so single windows
    can be reproduced in isolation.
    """
    if not (1 <= t_start < spec.T):
        raise ConfigError(f"t_start must lie in [1, T), got {t_start}")
    sim = simulate_dgp(spec)
    design = sim.design(sliced=sliced)
    d = len(spec.lags)
    init = ModelParams(beta=np.zeros(design.n_cols), sigma_y2=1.0, sigma_mu2=1.0,
                       sigma_nu2=1.0, alpha0=spec.alpha0)
    rows = []
    for t0 in range(t_start, spec.T):
        cfg = replace(config, seed=derive_seed(config.seed, t0), init=init)
        chain = run_gibbs(sim.y[:t0], design.values[:t0], prior, cfg,
                          columns=design.columns)
        pred = posterior_predictive(chain, design.values[t0],
                                    rng=derive_seed(config.seed, t0, 1))
        row = {"t0": t0,
               "y_next": sim.y[t0],
               "rate_next": sim.rate[t0],
               "pred_mean_y": float(np.mean(pred.samples_y)),
               "pred_q025_y": float(np.quantile(pred.samples_y, 0.025)),
               "pred_q975_y": float(np.quantile(pred.samples_y, 0.975)),
               "pred_mean_rate": float(np.mean(pred.samples_rate))}
        if sliced:
            for j, lag in enumerate(spec.lags):
                row[f"beta_l_mean_lag{lag}"] = float(np.mean(chain.beta[:, j]))
                row[f"beta_u_mean_lag{lag}"] = float(np.mean(chain.beta[:, d + j]))
                row[f"incl_l_lag{lag}"] = float(np.mean(chain.gamma[:, j]))
                row[f"incl_u_lag{lag}"] = float(np.mean(chain.gamma[:, d + j]))
        else:
            for j, lag in enumerate(spec.lags):
                row[f"beta_mean_lag{lag}"] = float(np.mean(chain.beta[:, j]))
                row[f"incl_lag{lag}"] = float(np.mean(chain.gamma[:, j]))
        rows.append(row)
    return pd.DataFrame(rows)
