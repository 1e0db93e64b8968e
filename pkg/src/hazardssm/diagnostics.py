"""Chain quality metrics and posterior summary tables.

Summaries follow the reporting conventions of the analysis: inclusion
probability is the fraction of nonzero draws, means and standard deviations
are taken over all kept draws (zeros included), the sd uses the population
(1/N) normalization, and intervals are empirical 2.5/97.5% quantiles.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from .errors import DataError, UndefinedEssError
from .gibbs import ChainOutput

__all__ = ["ess", "summarize", "export_traces"]


def ess(chain_values, max_lag: int = 30) -> float:
    """Effective sample size: N / (1 + 2 sum_{k=1..max_lag} r_k).

    r_k is the lag-k sample autocorrelation. The raw ratio is clamped into
    (0, N]: truncated autocorrelation sums can make the denominator dip
    below 1 (or below 0), which would otherwise report more-than-independent
    or negative sample counts.
    """
    x = np.asarray(chain_values, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise DataError("ess needs a 1-d chain with at least 2 draws")
    n = len(x)
    xc = x - x.mean()
    var = float(xc @ xc) / n
    if var == 0:
        raise UndefinedEssError("chain has zero variance; ESS undefined")
    max_lag = min(max_lag, n - 1)
    acf_sum = 0.0
    for k in range(1, max_lag + 1):
        acf_sum += float(xc[:-k] @ xc[k:]) / n / var
    denom = 1.0 + 2.0 * acf_sum
    if denom <= 0:
        return 1.0
    return float(min(n, n / denom))


def summarize(chain: ChainOutput) -> pd.DataFrame:
    """Posterior summary table: one row per coefficient and variance parameter.

    Columns: parameter, rho_hat (inclusion probability), mean, sd (1/N
    normalization), ci_low, ci_high (95% interval), ess.
    """
    if len(chain) == 0:
        raise DataError("empty chain")

    def _ess_or_nan(v):
        try:
            return ess(v)
        except UndefinedEssError:
            return float("nan")

    rows = []
    for j, col in enumerate(chain.columns):
        draws = chain.beta[:, j]
        rows.append(
            {
                "parameter": f"beta_{col}",
                "rho_hat": float(np.mean(draws != 0)),
                "mean": float(np.mean(draws)),
                "sd": float(np.std(draws)),
                "ci_low": float(np.quantile(draws, 0.025)),
                "ci_high": float(np.quantile(draws, 0.975)),
                "ess": _ess_or_nan(draws),
            }
        )
    for name, draws in (
        ("sigma_y2", chain.sigma_y2),
        ("sigma_mu2", chain.sigma_mu2),
        ("sigma_nu2", chain.sigma_nu2),
    ):
        rows.append(
            {
                "parameter": name,
                "rho_hat": 1.0,
                "mean": float(np.mean(draws)),
                "sd": float(np.std(draws)),
                "ci_low": float(np.quantile(draws, 0.025)),
                "ci_high": float(np.quantile(draws, 0.975)),
                "ess": _ess_or_nan(draws),
            }
        )
    return pd.DataFrame(rows)


def export_traces(chain: ChainOutput, path=None) -> pd.DataFrame:
    """Long-format traces (iteration, parameter, value) for external plotting.

    Covers every coefficient, the three variances, and the observed-data
    log-likelihood. Values serialize at full precision, so a CSV round trip
    reproduces them exactly.
    """
    if len(chain) == 0:
        raise DataError("empty chain")
    names = [f"beta_{c}" for c in chain.columns] + [
        "sigma_y2", "sigma_mu2", "sigma_nu2", "loglik",
    ]
    series = [chain.beta[:, j] for j in range(chain.n_coef)] + [
        chain.sigma_y2, chain.sigma_mu2, chain.sigma_nu2, chain.loglik,
    ]
    frames = [
        pd.DataFrame({"iteration": chain.iterations, "parameter": name, "value": vals})
        for name, vals in zip(names, series)
    ]
    df = pd.concat(frames, ignore_index=True)
    if path is not None:
        df.to_csv(path, index=False)
    return df
