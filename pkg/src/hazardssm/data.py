"""Data preparation: delinquency rates, loss aggregation, transforms, design matrices.

Raw inputs are pre-aggregated monthly counts (loans below the k- and
(k+1)-month delinquency horizons) and monthly dollar losses per state.
This module turns them into an aligned monthly panel and a lagged,
threshold-sliced covariate matrix for the samplers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy.special import expit, logit, ndtr, ndtri

from .errors import ConfigError, DataError

__all__ = [
    "CountRecord",
    "LossRecord",
    "TransformSpec",
    "SliceSpec",
    "SeriesPanel",
    "DesignMatrix",
    "compute_rate",
    "aggregate_losses",
    "transform_loss",
    "transform_response",
    "inverse_transform_response",
    "estimate_loss_moments",
    "build_panel",
    "build_design",
    "aligned_response",
    "read_counts_csv",
    "read_losses_csv",
    "read_panel_csv",
    "panel_frame",
    "write_panel_csv",
]

# State-level monthly hazard losses are approximately lognormal; these are the
# reference location/scale of log-dollar losses used to standardize covariates
# when no data-driven estimate is requested.
REFERENCE_LOG_LOSS_MEAN = 12.927
REFERENCE_LOG_LOSS_VAR = 7.755


@dataclass(frozen=True)
class CountRecord:
    """Monthly loan counts below two adjacent delinquency horizons."""

    state: str
    year: int
    month: int
    c_k: int
    c_k1: int

    def __post_init__(self):
        if not (1 <= self.month <= 12):
            raise DataError(f"month out of range: {self.month}")
        if self.c_k < 0 or self.c_k1 < self.c_k:
            raise DataError(
                f"count invariant violated for {self.state} {self.year}-{self.month:02d}: "
                f"need c_k1 >= c_k >= 0, got c_k={self.c_k}, c_k1={self.c_k1}"
            )


@dataclass(frozen=True)
class LossRecord:
    """One hazard-loss amount (inflation-adjusted dollars) for a state-month."""

    state: str
    year: int
    month: int
    loss_usd: float
    county: str | None = None

    def __post_init__(self):
        if self.loss_usd < 0:
            raise DataError(
                f"negative loss for {self.state} {self.year}-{self.month:02d}: {self.loss_usd}"
            )


@dataclass(frozen=True)
class TransformSpec:
    """How raw losses and rates are mapped onto the model scale.

    Losses are standardized log-dollars: g(x) = (log x - mu_x) / sigma_x.
    The response link is logit by default (probit available). ``zero_loss_policy``
    says what to do at x = 0, where g is undefined: floor the loss at $1
    (g(1) = -mu_x / sigma_x) or zero out the covariate entirely.
    """

    mu_x: float = REFERENCE_LOG_LOSS_MEAN
    sigma_x: float = math.sqrt(REFERENCE_LOG_LOSS_VAR)
    response_link: str = "logit"
    zero_loss_policy: str = "floor_at_one_dollar"

    def __post_init__(self):
        if not self.sigma_x > 0:
            raise ConfigError(f"sigma_x must be positive, got {self.sigma_x}")
        if self.response_link not in ("logit", "probit"):
            raise ConfigError(f"unknown response_link: {self.response_link!r}")
        if self.zero_loss_policy not in ("floor_at_one_dollar", "covariate_zero"):
            raise ConfigError(f"unknown zero_loss_policy: {self.zero_loss_policy!r}")


@dataclass(frozen=True)
class SliceSpec:
    """Which monthly lags enter the design, and where the covariate is split.

    ``threshold_scale`` selects the quantity compared against ``threshold``:
    raw dollars or the transformed covariate g(L). Lag 0 is allowed for
    synthetic contemporaneous-covariate panels (k = 0); for real data the
    delinquency horizon k excludes lags shorter than k, enforced when the
    design is built against a panel.
    """

    lags: tuple[int, ...] = (3, 4, 5)
    threshold: float = 1e10
    threshold_scale: str = "raw_dollars"

    def __post_init__(self):
        lags = tuple(int(l) for l in self.lags)
        object.__setattr__(self, "lags", lags)
        if len(lags) == 0:
            raise ConfigError("lags must be non-empty")
        if any(l < 0 for l in lags):
            raise ConfigError(f"lags must be nonnegative integers, got {lags}")
        if len(set(lags)) != len(lags):
            raise ConfigError(f"duplicate lags: {lags}")
        if not self.threshold > 0:
            raise ConfigError(f"threshold must be positive, got {self.threshold}")
        if self.threshold_scale not in ("raw_dollars", "transformed"):
            raise ConfigError(f"unknown threshold_scale: {self.threshold_scale!r}")


@dataclass(frozen=True)
class SeriesPanel:
    """Aligned monthly observations for one state.

    ``t_index`` is 1..T and gapless; ``year``/``month`` give the calendar
    labels for each t. ``k`` is the delinquency horizon the rates were
    computed at (0 for synthetic panels with contemporaneous covariates).
    """

    state: str
    t_index: np.ndarray
    year: np.ndarray
    month: np.ndarray
    rate: np.ndarray
    y: np.ndarray
    loss_usd: np.ndarray
    g: np.ndarray
    k: int = 3
    transform: TransformSpec = field(default_factory=TransformSpec)

    def __post_init__(self):
        n = len(self.t_index)
        for name in ("year", "month", "rate", "y", "loss_usd", "g"):
            if len(getattr(self, name)) != n:
                raise DataError(f"panel column {name} has wrong length")
        t = np.asarray(self.t_index)
        if n == 0:
            raise DataError("empty panel")
        if not np.array_equal(t, np.arange(t[0], t[0] + n)):
            raise DataError("t_index must be contiguous")
        if not (np.all(self.rate > 0) and np.all(self.rate < 1)):
            bad = int(np.argmin((self.rate > 0) & (self.rate < 1)))
            raise DataError(
                f"rate outside (0,1) at {self.year[bad]}-{self.month[bad]:02d}: "
                f"{self.rate[bad]}"
            )
        if not np.all(np.isfinite(self.y)):
            raise DataError("non-finite transformed response in panel")

    def __len__(self) -> int:
        return len(self.t_index)

    def calendar(self, t: int) -> tuple[int, int]:
        """(year, month) for a panel time index t."""
        pos = int(t - self.t_index[0])
        if pos < 0 or pos >= len(self):
            raise DataError(f"t={t} outside panel range")
        return int(self.year[pos]), int(self.month[pos])


@dataclass(frozen=True)
class DesignMatrix:
    """Lagged covariate rows, optionally split into below/above-threshold blocks.

    For sliced designs the columns are the lower block followed by the upper
    block, one column per lag in each; exactly one of the paired cells can be
    nonzero in any row. ``t_index`` marks which panel times have full lag
    history (leading rows are truncated, not imputed).
    """

    values: np.ndarray
    t_index: np.ndarray
    columns: tuple[str, ...]
    slice_spec: SliceSpec
    sliced: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 2 or v.shape[0] != len(self.t_index):
            raise DataError("design values misaligned with t_index")
        if v.shape[1] != len(self.columns):
            raise DataError("design columns mislabeled")
        if self.sliced:
            p = len(self.slice_spec.lags)
            lower, upper = v[:, :p], v[:, p:]
            if upper.shape[1] != p:
                raise DataError("sliced design must have paired lower/upper blocks")
            if np.any((lower != 0) & (upper != 0)):
                raise DataError("slice blocks overlap: a cell is nonzero in both")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def row_at(self, t: int) -> np.ndarray:
        """Covariate row for panel time t."""
        pos = np.searchsorted(self.t_index, t)
        if pos >= len(self.t_index) or self.t_index[pos] != t:
            raise DataError(f"no design row for t={t}")
        return self.values[pos]

    def rows_through(self, t0: int) -> np.ndarray:
        """All rows with t <= t0 (a training window)."""
        return self.values[self.t_index <= t0]


def compute_rate(rec: CountRecord) -> float:
    """Fraction of eligible loans newly reaching the k-month delinquency horizon."""
    if rec.c_k1 == 0:
        raise DataError(
            f"rate undefined for {rec.state} {rec.year}-{rec.month:02d}: zero denominator"
        )
    return (rec.c_k1 - rec.c_k) / rec.c_k1


def aggregate_losses(records) -> dict[tuple[str, int, int], float]:
    """Sum losses per (state, year, month). Missing groups are simply absent;
    callers requesting a full month range treat absent keys as 0."""
    totals: dict[tuple[str, int, int], float] = {}
    for i, rec in enumerate(records):
        if rec.loss_usd < 0:
            raise DataError(f"negative loss in record {i}: {rec}")
        key = (rec.state, rec.year, rec.month)
        totals[key] = totals.get(key, 0.0) + float(rec.loss_usd)
    return totals


def transform_loss(x, spec: TransformSpec):
    """Standardized log-loss g(x) = (log x - mu_x) / sigma_x; zero losses per policy."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DataError("loss must be nonnegative")
    if spec.zero_loss_policy == "floor_at_one_dollar":
        floored = np.maximum(x, 1.0)
        out = (np.log(floored) - spec.mu_x) / spec.sigma_x
    else:
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = (np.log(x[pos]) - spec.mu_x) / spec.sigma_x
    return float(out) if out.ndim == 0 else out


def transform_response(r, spec: TransformSpec):
    """Map a rate in (0,1) onto the real line via the configured link."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or np.any(r >= 1):
        raise DataError("rate must lie strictly inside (0, 1)")
    out = logit(r) if spec.response_link == "logit" else ndtri(r)
    return float(out) if out.ndim == 0 else out


def inverse_transform_response(y, spec: TransformSpec):
    """Inverse link: back from the real line to a rate in (0,1)."""
    y = np.asarray(y, dtype=float)
    out = expit(y) if spec.response_link == "logit" else ndtr(y)
    return float(out) if out.ndim == 0 else out


def estimate_loss_moments(totals, state: str | None = None) -> tuple[float, float]:
    """Location/scale of log losses from aggregated monthly totals.

    Pools across states by default; pass ``state`` for a per-state estimate.
    Zero-loss months carry no information about the lognormal body and are
    excluded.
    """
    values = np.array(
        [v for (s, _, _), v in totals.items() if v > 0 and (state is None or s == state)]
    )
    if len(values) < 2:
        raise DataError("need at least two positive loss months to estimate moments")
    logs = np.log(values)
    mu = float(np.mean(logs))
    sigma = float(np.std(logs))
    if sigma == 0:
        raise DataError("log losses are constant; cannot estimate a scale")
    return mu, sigma


def _month_range(year: np.ndarray, month: np.ndarray) -> None:
    code = year * 12 + (month - 1)
    gaps = np.flatnonzero(np.diff(code) != 1)
    if len(gaps):
        i = gaps[0]
        raise DataError(
            f"month gap between {year[i]}-{month[i]:02d} and {year[i+1]}-{month[i+1]:02d}"
        )


def build_panel(
    counts: list[CountRecord],
    losses: list[LossRecord],
    state: str,
    k: int = 3,
    transform: TransformSpec | None = None,
    estimate_moments: bool = False,
) -> SeriesPanel:
    """Align counts and losses for one state into a gapless monthly panel.

    The panel covers exactly the months present in the counts file (which must
    be contiguous); loss months absent from the loss file within that range
    contribute 0. With ``estimate_moments`` the loss transform's mu_x/sigma_x
    are re-estimated from the pooled loss totals.
    """
    transform = transform or TransformSpec()
    recs = sorted(
        (r for r in counts if r.state == state), key=lambda r: (r.year, r.month)
    )
    if not recs:
        raise DataError(f"no count records for state {state!r}")
    seen = set()
    for r in recs:
        key = (r.year, r.month)
        if key in seen:
            raise DataError(f"duplicate count month {r.year}-{r.month:02d} for {state}")
        seen.add(key)
    year = np.array([r.year for r in recs])
    month = np.array([r.month for r in recs])
    _month_range(year, month)

    rate = np.array([compute_rate(r) for r in recs])
    bad = np.flatnonzero((rate <= 0) | (rate >= 1))
    if len(bad):
        i = bad[0]
        raise DataError(
            f"rate {rate[i]} at {year[i]}-{month[i]:02d} cannot be transformed; "
            "the response link needs rates strictly inside (0,1)"
        )

    totals = aggregate_losses(losses)
    if estimate_moments:
        mu, sigma = estimate_loss_moments(totals)
        transform = replace(transform, mu_x=mu, sigma_x=sigma)
    loss = np.array(
        [totals.get((state, int(yy), int(mm)), 0.0) for yy, mm in zip(year, month)]
    )

    return SeriesPanel(
        state=state,
        t_index=np.arange(1, len(recs) + 1),
        year=year,
        month=month,
        rate=rate,
        y=transform_response(rate, transform),
        loss_usd=loss,
        g=transform_loss(loss, transform),
        k=k,
        transform=transform,
    )


def build_design(
    panel: SeriesPanel,
    spec: SliceSpec,
    transform: TransformSpec | None = None,
    sliced: bool = True,
) -> DesignMatrix:
    """Lagged (and optionally sliced) covariate matrix from a panel.

    Row t carries g(L_{t-j}) for each lag j. When sliced, the value lands in
    the upper block iff the thresholding quantity (raw dollars or the
    transformed value, per the spec) strictly exceeds the threshold, else in
    the lower block; the paired cell is exactly 0. Rows without full lag
    history are truncated from the front.

    The panel's stored covariate column is used as-is; pass ``transform`` to
    re-derive the covariate from raw losses under a different transform.
    """
    if min(spec.lags) < panel.k:
        raise ConfigError(
            f"lags {spec.lags} include lags shorter than the delinquency horizon "
            f"k={panel.k}; those months' losses cannot influence the rate yet"
        )
    max_lag = max(spec.lags)
    t0 = int(panel.t_index[0])
    first_row = t0 + max_lag
    if first_row > int(panel.t_index[-1]):
        raise DataError(
            f"panel too short: need at least {max_lag + 1} months for lags {spec.lags}"
        )
    t_index = np.arange(first_row, int(panel.t_index[-1]) + 1)

    g_all = panel.g if transform is None else transform_loss(panel.loss_usd, transform)
    n = len(t_index)
    p = len(spec.lags)
    lagged_g = np.empty((n, p))
    lagged_raw = np.empty((n, p))
    for j, lag in enumerate(spec.lags):
        pos = (t_index - lag) - t0
        lagged_g[:, j] = g_all[pos]
        lagged_raw[:, j] = panel.loss_usd[pos]

    if not sliced:
        cols = tuple(f"x_lag{l}" for l in spec.lags)
        return DesignMatrix(lagged_g, t_index, cols, spec, sliced=False)

    gate = lagged_raw if spec.threshold_scale == "raw_dollars" else lagged_g
    over = gate > spec.threshold
    lower = np.where(over, 0.0, lagged_g)
    upper = np.where(over, lagged_g, 0.0)
    cols = tuple(f"l_lag{l}" for l in spec.lags) + tuple(f"u_lag{l}" for l in spec.lags)
    return DesignMatrix(np.hstack([lower, upper]), t_index, cols, spec, sliced=True)


def aligned_response(panel: SeriesPanel, design: DesignMatrix) -> np.ndarray:
    """Transformed response y restricted to the design's time range."""
    start = int(design.t_index[0] - panel.t_index[0])
    stop = int(design.t_index[-1] - panel.t_index[0]) + 1
    return panel.y[start:stop]


# ---------------------------------------------------------------------------
# CSV interfaces

COUNTS_HEADER = ["state", "year", "month", "c_k", "c_k1"]
LOSSES_HEADER = ["state", "year", "month", "loss_usd"]
PANEL_HEADER = ["state", "year", "month", "rate", "y", "loss_usd", "g"]


def read_counts_csv(path) -> list[CountRecord]:
    df = pd.read_csv(path)
    missing = [c for c in COUNTS_HEADER if c not in df.columns]
    if missing:
        raise DataError(f"counts file {path} missing columns {missing}")
    return [
        CountRecord(str(r.state), int(r.year), int(r.month), int(r.c_k), int(r.c_k1))
        for r in df.itertuples()
    ]


def read_losses_csv(path) -> list[LossRecord]:
    df = pd.read_csv(path)
    missing = [c for c in LOSSES_HEADER if c not in df.columns]
    if missing:
        raise DataError(f"losses file {path} missing columns {missing}")
    has_county = "county" in df.columns
    out = []
    for i, r in enumerate(df.itertuples()):
        loss = float(r.loss_usd)
        if loss < 0:
            raise DataError(f"negative loss at {path} row {i + 2}")
        out.append(
            LossRecord(
                str(r.state),
                int(r.year),
                int(r.month),
                loss,
                str(r.county) if has_county and not pd.isna(r.county) else None,
            )
        )
    return out


def panel_frame(panel: SeriesPanel) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "state": panel.state,
            "year": panel.year,
            "month": panel.month,
            "rate": panel.rate,
            "y": panel.y,
            "loss_usd": panel.loss_usd,
            "g": panel.g,
        }
    )


def write_panel_csv(panel: SeriesPanel, path) -> None:
    panel_frame(panel).to_csv(path, index=False)


def read_panel_csv(path, k: int = 3, transform: TransformSpec | None = None) -> SeriesPanel:
    """Load a previously exported panel. Stored rate/y/loss/g values are taken
    as-is (so replays are bit-exact); months must be contiguous and one state."""
    df = pd.read_csv(path)
    missing = [c for c in PANEL_HEADER if c not in df.columns]
    if missing:
        raise DataError(f"panel file {path} missing columns {missing}")
    states = df["state"].unique()
    if len(states) != 1:
        raise DataError(f"panel file {path} mixes states {sorted(states)}")
    year = df["year"].to_numpy(dtype=int)
    month = df["month"].to_numpy(dtype=int)
    _month_range(year, month)
    return SeriesPanel(
        state=str(states[0]),
        t_index=np.arange(1, len(df) + 1),
        year=year,
        month=month,
        rate=df["rate"].to_numpy(dtype=float),
        y=df["y"].to_numpy(dtype=float),
        loss_usd=df["loss_usd"].to_numpy(dtype=float),
        g=df["g"].to_numpy(dtype=float),
        k=k,
        transform=transform or TransformSpec(),
    )
