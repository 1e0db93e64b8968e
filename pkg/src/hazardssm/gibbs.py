"""Gibbs sampler: spike-and-slab regression on top of the latent trend.

Each sweep draws, in order: the latent path (exact simulation smoothing),
the inclusion indicators (slab coefficients integrated out analytically),
the active coefficients from their conjugate Gaussian conditional, and the
three variances from conjugate Inverse-Gamma conditionals. The observed-data
log-likelihood is recorded at the end of every sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import ConfigError, DataError, NumericalError
from .ssm import ModelParams, ffbs_sample, kalman_filter

__all__ = [
    "PriorSpec",
    "GibbsConfig",
    "ChainOutput",
    "slab_log_marginal",
    "sample_beta",
    "sample_variance",
    "sample_gamma",
    "run_gibbs",
    "write_chain_csv",
    "read_chain_csv",
    "write_latent_csv",
]


@dataclass(frozen=True)
class PriorSpec:
    """Spike-and-slab prior on coefficients plus shared Inverse-Gamma(a, b)
    priors on the three variances."""

    tau2: float = 1.0
    rho: float = 0.5
    a: float = 0.01
    b: float = 0.01

    def __post_init__(self):
        if not self.tau2 > 0:
            raise ConfigError(f"tau2 must be positive, got {self.tau2}")
        if not (0 < self.rho < 1):
            raise ConfigError(f"rho must lie in (0,1), got {self.rho}")
        if not (self.a > 0 and self.b > 0):
            raise ConfigError("Inverse-Gamma hyperparameters must be positive")


@dataclass(frozen=True)
class GibbsConfig:
    n_iter: int = 5000
    burn_in: int = 2000
    seed: int = 0
    init: ModelParams | None = None

    def __post_init__(self):
        if self.n_iter < 1:
            raise ConfigError(f"n_iter must be >= 1, got {self.n_iter}")
        if not (0 <= self.burn_in < self.n_iter):
            raise ConfigError(
                f"burn_in must lie in [0, n_iter), got {self.burn_in} of {self.n_iter}"
            )


@dataclass
class ChainOutput:
    """Post-burn-in draws. ``beta`` carries exact zeros wherever ``gamma`` is 0."""

    beta: np.ndarray         # (n_kept, p)
    gamma: np.ndarray        # (n_kept, p), 0/1
    sigma_y2: np.ndarray     # (n_kept,)
    sigma_mu2: np.ndarray
    sigma_nu2: np.ndarray
    loglik: np.ndarray
    iterations: np.ndarray   # absolute 1-based sweep numbers of kept draws
    columns: tuple[str, ...]
    latent: np.ndarray | None = None   # (n_kept, T, 2)
    alpha0: tuple[float, float] = (0.0, 0.0)
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.loglik)

    @property
    def n_coef(self) -> int:
        return self.beta.shape[1]


def _log_marginal_core(gram_sub, xr_sub, rr, T, sigma_y2, tau2):
    """Log evidence of resid = X b + eps with b ~ N(0, tau2 I) integrated out,
    from precomputed X'X, X'resid and resid'resid."""
    k = gram_sub.shape[0]
    base = -0.5 * T * np.log(2 * np.pi * sigma_y2) - 0.5 * rr / sigma_y2
    if k == 0:
        return base
    lam = gram_sub / sigma_y2 + np.eye(k) / tau2
    L = np.linalg.cholesky(lam)
    w = solve_triangular(L, xr_sub / sigma_y2, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return base - 0.5 * k * np.log(tau2) - 0.5 * logdet + 0.5 * float(w @ w)


def slab_log_marginal(resid, X_active, sigma_y2: float, tau2: float) -> float:
    """Marginal log-likelihood of the residual regression on the active columns."""
    resid = np.asarray(resid, dtype=float)
    X_active = np.asarray(X_active, dtype=float)
    if X_active.ndim == 1:
        X_active = X_active[:, None]
    return _log_marginal_core(
        X_active.T @ X_active,
        X_active.T @ resid,
        float(resid @ resid),
        len(resid),
        sigma_y2,
        tau2,
    )


def sample_beta(resid, X, gamma, sigma_y2: float, prior: PriorSpec, rng) -> np.ndarray:
    """Draw the coefficient vector; inactive coordinates are exactly zero.

    Conditional on the active set, b ~ N(Omega X' resid / sigma_y2, Omega)
    with Omega = (X'X / sigma_y2 + I / tau2)^{-1}.
    """
    rng = np.random.default_rng(rng)
    X = np.asarray(X, dtype=float)
    gamma = np.asarray(gamma)
    p = X.shape[1]
    beta = np.zeros(p)
    active = np.flatnonzero(gamma)
    if len(active) == 0:
        return beta
    Xa = X[:, active]
    lam = Xa.T @ Xa / sigma_y2 + np.eye(len(active)) / prior.tau2
    L = np.linalg.cholesky(lam)
    mean = cho_solve((L, True), Xa.T @ np.asarray(resid, dtype=float) / sigma_y2)
    z = rng.standard_normal(len(active))
    beta[active] = mean + solve_triangular(L.T, z, lower=False)
    return beta


def sample_variance(residuals, prior: PriorSpec, rng) -> float:
    """Conjugate Inverse-Gamma(T/2 + a, b + sum(residuals^2)/2) draw."""
    rng = np.random.default_rng(rng)
    residuals = np.asarray(residuals, dtype=float)
    if residuals.size == 0:
        raise DataError("cannot update a variance from an empty residual vector")
    shape = 0.5 * residuals.size + prior.a
    scale = prior.b + 0.5 * float(residuals @ residuals)
    g = rng.gamma(shape, 1.0 / scale)
    if not g > 0:
        raise NumericalError("variance draw degenerated to zero precision")
    return 1.0 / g


def sample_gamma(y, mu_path, X, gamma, sigma_y2: float, prior: PriorSpec, rng) -> np.ndarray:
    """One systematic sweep over the inclusion indicators.

    For each j the slab coefficients are integrated out analytically and
    gamma_j is drawn from the Bernoulli with log-odds
    log rho - log(1 - rho) + log m(resid | gamma_j = 1) - log m(resid | gamma_j = 0).
    """
    rng = np.random.default_rng(rng)
    X = np.asarray(X, dtype=float)
    resid = np.asarray(y, dtype=float) - np.asarray(mu_path, dtype=float)
    gram = X.T @ X
    xr = X.T @ resid
    rr = float(resid @ resid)
    T = len(resid)
    gamma = np.asarray(gamma).astype(np.uint8).copy()
    log_prior_odds = np.log(prior.rho) - np.log1p(-prior.rho)
    for j in range(X.shape[1]):
        on = gamma.copy()
        on[j] = 1
        off = gamma.copy()
        off[j] = 0
        idx_on = np.flatnonzero(on)
        idx_off = np.flatnonzero(off)
        lm_on = _log_marginal_core(
            gram[np.ix_(idx_on, idx_on)], xr[idx_on], rr, T, sigma_y2, prior.tau2
        )
        lm_off = _log_marginal_core(
            gram[np.ix_(idx_off, idx_off)], xr[idx_off], rr, T, sigma_y2, prior.tau2
        )
        logit_p = log_prior_odds + lm_on - lm_off
        if not np.isfinite(logit_p):
            raise NumericalError(f"non-finite inclusion log-odds for column {j}")
        # stable Bernoulli(expit(logit_p))
        u = rng.random()
        gamma[j] = 1 if np.log(u) - np.log1p(-u) < logit_p else 0
    return gamma


def run_gibbs(y, X, prior: PriorSpec, config: GibbsConfig, columns=None) -> ChainOutput:
    """Full sampler. ``X`` may be a DesignMatrix or a (T, p) array aligned with y.

    Deterministic given ``config.seed``: a single generator drives every draw
    in sweep order. ``config.init`` supplies starting parameter values and the
    (fixed) initial state alpha0.
    """
    if hasattr(X, "values") and hasattr(X, "columns"):
        columns = columns or tuple(X.columns)
        X = X.values
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    T, p = X.shape
    if len(y) != T:
        raise DataError(f"y has {len(y)} rows but the design has {T}")
    columns = tuple(columns) if columns is not None else tuple(f"x{j}" for j in range(p))
    if len(columns) != p:
        raise DataError("column labels do not match the design width")

    rng = np.random.default_rng(config.seed)
    init = config.init or ModelParams(beta=np.zeros(p), sigma_y2=1.0,
                                      sigma_mu2=1.0, sigma_nu2=1.0)
    if len(init.beta) != p:
        init = ModelParams(beta=np.zeros(p), sigma_y2=init.sigma_y2,
                           sigma_mu2=init.sigma_mu2, sigma_nu2=init.sigma_nu2,
                           alpha0=init.alpha0)
    alpha0 = init.alpha0
    beta = init.beta.copy()
    gamma = np.ones(p, dtype=np.uint8)
    sy2, smu2, snu2 = init.sigma_y2, init.sigma_mu2, init.sigma_nu2

    n_kept = config.n_iter - config.burn_in
    out_beta = np.empty((n_kept, p))
    out_gamma = np.empty((n_kept, p), dtype=np.uint8)
    out_sy2 = np.empty(n_kept)
    out_smu2 = np.empty(n_kept)
    out_snu2 = np.empty(n_kept)
    out_ll = np.empty(n_kept)
    out_latent = np.empty((n_kept, T, 2))
    out_iter = np.empty(n_kept, dtype=int)

    mu0, nu0 = alpha0
    kept = 0
    for it in range(1, config.n_iter + 1):
        params = ModelParams(beta=beta, sigma_y2=sy2, sigma_mu2=smu2,
                             sigma_nu2=snu2, alpha0=alpha0)
        try:
            path = ffbs_sample(params, y, X, rng)
            mu = path[:, 0]
            nu = path[:, 1]

            gamma = sample_gamma(y, mu, X, gamma, sy2, prior, rng)
            resid = y - mu
            beta = sample_beta(resid, X, gamma, sy2, prior, rng)

            obs_resid = resid - X @ beta
            level_resid = mu - np.concatenate(([mu0], mu[:-1])) - np.concatenate(([nu0], nu[:-1]))
            slope_resid = nu - np.concatenate(([nu0], nu[:-1]))
            sy2 = sample_variance(obs_resid, prior, rng)
            smu2 = sample_variance(level_resid, prior, rng)
            snu2 = sample_variance(slope_resid, prior, rng)

            ll = kalman_filter(
                ModelParams(beta=beta, sigma_y2=sy2, sigma_mu2=smu2,
                            sigma_nu2=snu2, alpha0=alpha0),
                y, X,
            ).loglik
        except (NumericalError, np.linalg.LinAlgError) as exc:
            raise NumericalError(f"sweep {it} failed: {exc}") from exc

        if it > config.burn_in:
            out_beta[kept] = beta
            out_gamma[kept] = gamma
            out_sy2[kept] = sy2
            out_smu2[kept] = smu2
            out_snu2[kept] = snu2
            out_ll[kept] = ll
            out_latent[kept] = path
            out_iter[kept] = it
            kept += 1

    return ChainOutput(
        beta=out_beta, gamma=out_gamma, sigma_y2=out_sy2, sigma_mu2=out_smu2,
        sigma_nu2=out_snu2, loglik=out_ll, iterations=out_iter, columns=columns,
        latent=out_latent, alpha0=alpha0, seed=config.seed,
    )


# ---------------------------------------------------------------------------
# Chain serialization (one row per kept iteration; full float precision)

def _chain_frame(chain: ChainOutput) -> pd.DataFrame:
    data: dict = {"iteration": chain.iterations}
    for j, col in enumerate(chain.columns):
        data[f"beta_{col}"] = chain.beta[:, j]
    for j, col in enumerate(chain.columns):
        data[f"gamma_{col}"] = chain.gamma[:, j].astype(int)
    data["sigma_y2"] = chain.sigma_y2
    data["sigma_mu2"] = chain.sigma_mu2
    data["sigma_nu2"] = chain.sigma_nu2
    data["loglik"] = chain.loglik
    return pd.DataFrame(data)


def write_chain_csv(chain: ChainOutput, path) -> None:
    _chain_frame(chain).to_csv(path, index=False)


def read_chain_csv(path) -> ChainOutput:
    """Rebuild a ChainOutput (without latent paths) from an exported chain CSV."""
    df = pd.read_csv(path)
    beta_cols = [c for c in df.columns if c.startswith("beta_")]
    columns = tuple(c[len("beta_"):] for c in beta_cols)
    gamma_cols = [f"gamma_{c}" for c in columns]
    missing = [c for c in gamma_cols + ["sigma_y2", "sigma_mu2", "sigma_nu2", "loglik"]
               if c not in df.columns]
    if missing:
        raise DataError(f"chain file {path} missing columns {missing}")
    return ChainOutput(
        beta=df[beta_cols].to_numpy(dtype=float),
        gamma=df[gamma_cols].to_numpy().astype(np.uint8),
        sigma_y2=df["sigma_y2"].to_numpy(dtype=float),
        sigma_mu2=df["sigma_mu2"].to_numpy(dtype=float),
        sigma_nu2=df["sigma_nu2"].to_numpy(dtype=float),
        loglik=df["loglik"].to_numpy(dtype=float),
        iterations=df["iteration"].to_numpy(dtype=int),
        columns=columns,
        latent=None,
    )


def write_latent_csv(chain: ChainOutput, path) -> None:
    """Long-format latent paths: one row per (kept iteration, t)."""
    if chain.latent is None:
        raise DataError("chain has no stored latent paths")
    n, T, _ = chain.latent.shape
    df = pd.DataFrame(
        {
            "iteration": np.repeat(chain.iterations, T),
            "t": np.tile(np.arange(1, T + 1), n),
            "mu": chain.latent[:, :, 0].ravel(),
            "nu": chain.latent[:, :, 1].ravel(),
        }
    )
    df.to_csv(path, index=False)
