"""Figure rendering for run outputs.

Each function draws one figure from in-memory results and saves it next to
the delimited outputs. Uses the Agg backend; nothing here opens a window.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
import pandas as pd

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .data import SeriesPanel  # noqa: E402
from .gibbs import ChainOutput  # noqa: E402

__all__ = [
    "panel_figure",
    "trace_figure",
    "latent_figure",
    "forecast_figure",
    "rolling_coefficients_figure",
    "simulation_figure",
]

_RC = {
    "figure.figsize": (9, 5),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.titlesize": "medium",
}


def _dates(panel_or_df) -> np.ndarray:
    year = np.asarray(panel_or_df.year if hasattr(panel_or_df, "year") else panel_or_df["year"])
    month = np.asarray(panel_or_df.month if hasattr(panel_or_df, "month") else panel_or_df["month"])
    return year + (month - 0.5) / 12.0


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def panel_figure(panel: SeriesPanel, path) -> Path:
    """Monthly losses (top) and default rates (bottom) for one state."""
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True)
        x = _dates(panel)
        ax1.plot(x, panel.loss_usd, color="tab:red", lw=0.9)
        ax1.set_ylabel("monthly loss ($)")
        ax1.set_title(f"{panel.state}: hazard losses and default rates")
        ax2.plot(x, panel.rate, color="tab:blue", lw=0.9)
        ax2.set_ylabel("default rate")
        ax2.set_xlabel("year")
        return _save(fig, path)


def trace_figure(chain: ChainOutput, path) -> Path:
    """Traceplots of the first coefficient, the observation variance, and
    the observed-data log-likelihood."""
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(3, 1, sharex=True, figsize=(9, 7))
        series = [
            (f"beta_{chain.columns[0]}", chain.beta[:, 0]),
            ("sigma_y2", chain.sigma_y2),
            ("loglik", chain.loglik),
        ]
        for ax, (name, vals) in zip(axes, series):
            ax.plot(chain.iterations, vals, lw=0.6)
            ax.set_ylabel(name)
        axes[-1].set_xlabel("iteration")
        axes[0].set_title("MCMC traces")
        return _save(fig, path)


def latent_figure(panel: SeriesPanel, chain: ChainOutput, design, path) -> Path:
    """Observed transformed response with the posterior mean latent level,
    and the posterior mean regression component X'beta."""
    if chain.latent is None:
        raise ValueError("chain has no stored latent paths")
    pos = (np.asarray(design.t_index) - panel.t_index[0]).astype(int)
    mu_mean = chain.latent[:, :, 0].mean(axis=0)
    reg = design.values @ chain.beta.mean(axis=0)
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.2))
        x = _dates(panel)[pos]
        ax1.plot(x, panel.y[pos], color="black", lw=0.9, label="observed")
        ax1.plot(x, mu_mean, "--", color="tab:blue", lw=1.2, label="posterior mean level")
        ax1.set_xlabel("year")
        ax1.set_ylabel("transformed rate")
        ax1.legend()
        ax1.set_title("latent level vs observations")
        ax2.plot(x, reg, color="tab:red", lw=0.9)
        ax2.set_xlabel("year")
        ax2.set_ylabel("regression component")
        ax2.set_title("covariate effect")
        return _save(fig, path)


def forecast_figure(records: pd.DataFrame, path, observed_label: str = "observed") -> Path:
    """Fan chart of rolling one-step predictions on the rate scale."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        x = _dates(records)
        if {"pred_q025", "pred_q975"}.issubset(records.columns) and records["pred_q025"].notna().any():
            ax.fill_between(x, records["pred_q025"], records["pred_q975"],
                            color="0.8", label="95% predictive interval")
        ax.plot(x, records["y_obs"], color="black", lw=1.0, label=observed_label)
        ax.plot(x, records["pred_mean"], "--", color="tab:red", lw=1.1,
                label="predictive mean")
        ax.set_xlabel("year")
        ax.set_ylabel("default rate")
        ax.set_title("rolling one-step-ahead predictions")
        ax.legend()
        return _save(fig, path)


def rolling_coefficients_figure(study: pd.DataFrame, path) -> Path:
    """Rolling posterior means of the regime coefficients."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for col in study.columns:
            if col.startswith("beta_u_mean"):
                ax.plot(study["t0"], study[col], lw=1.2,
                        label=col.replace("beta_u_mean_", "upper "))
            elif col.startswith("beta_l_mean"):
                ax.plot(study["t0"], study[col], "--", lw=1.2,
                        label=col.replace("beta_l_mean_", "lower "))
        ax.set_xlabel("window end t0")
        ax.set_ylabel("posterior mean coefficient")
        ax.set_title("rolling coefficient estimates")
        ax.legend()
        return _save(fig, path)


def simulation_figure(sim, path) -> Path:
    """A realization: rate-scale observation and trend (top), covariate (bottom)."""
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True)
        t = np.arange(1, sim.spec.T + 1)
        ax1.plot(t, sim.rate, color="tab:blue", lw=0.9, label="logistic(y)")
        ax1.plot(t, sim.trend_rate, color="black", lw=1.1, label="logistic(mu)")
        ax1.set_ylabel("rate scale")
        ax1.legend()
        ax1.set_title("simulated realization")
        ax2.plot(t, sim.X[:, 0], color="tab:red", lw=0.8)
        ax2.axhline(sim.spec.threshold, color="0.4", ls=":")
        ax2.set_ylabel("covariate")
        ax2.set_xlabel("t")
        return _save(fig, path)
