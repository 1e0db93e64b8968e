import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hazardssm import (
    ConfigError,
    CountRecord,
    DataError,
    LossRecord,
    SeriesPanel,
    SliceSpec,
    TransformSpec,
    aggregate_losses,
    build_design,
    build_panel,
    compute_rate,
    inverse_transform_response,
    transform_loss,
    transform_response,
)
from hazardssm.data import aligned_response, estimate_loss_moments

REF_SIGMA = math.sqrt(7.755)


def make_panel(loss, rate=None, k=3, state="TX", transform=None):
    """Panel straight from arrays (months synthetic, starting 2010-01)."""
    loss = np.asarray(loss, dtype=float)
    T = len(loss)
    transform = transform or TransformSpec()
    rate = np.full(T, 0.01) if rate is None else np.asarray(rate, dtype=float)
    months = np.arange(T)
    return SeriesPanel(
        state=state,
        t_index=np.arange(1, T + 1),
        year=2010 + months // 12,
        month=months % 12 + 1,
        rate=rate,
        y=transform_response(rate, transform),
        loss_usd=loss,
        g=transform_loss(loss, transform),
        k=k,
        transform=transform,
    )


class TestComputeRate:
    def test_basic(self):
        assert compute_rate(CountRecord("TX", 2017, 8, 90, 100)) == pytest.approx(0.1)

    def test_no_new_delinquencies(self):
        assert compute_rate(CountRecord("TX", 2017, 8, 100, 100)) == 0.0

    def test_zero_denominator(self):
        with pytest.raises(DataError):
            compute_rate(CountRecord("TX", 2017, 8, 0, 0))

    def test_count_invariant(self):
        with pytest.raises(DataError):
            CountRecord("TX", 2017, 8, 101, 100)


class TestAggregateLosses:
    def test_additivity(self):
        recs = [LossRecord("TX", 2017, 8, 1e9), LossRecord("TX", 2017, 8, 2e9)]
        assert aggregate_losses(recs) == {("TX", 2017, 8): pytest.approx(3e9)}

    def test_empty(self):
        assert aggregate_losses([]) == {}

    def test_states_do_not_mix(self):
        recs = [LossRecord("TX", 2017, 8, 1e9), LossRecord("LA", 2017, 8, 5e8)]
        totals = aggregate_losses(recs)
        assert totals[("TX", 2017, 8)] == pytest.approx(1e9)
        assert totals[("LA", 2017, 8)] == pytest.approx(5e8)

    def test_negative_rejected(self):
        with pytest.raises(DataError):
            LossRecord("TX", 2017, 8, -1.0)

    @given(st.permutations(list(range(8))))
    def test_permutation_invariant(self, order):
        recs = [LossRecord("TX", 2017, 1 + i % 3, float(10 ** i)) for i in range(8)]
        base = aggregate_losses(recs)
        assert aggregate_losses([recs[i] for i in order]) == base


class TestTransforms:
    def test_loss_at_location(self):
        spec = TransformSpec()
        assert transform_loss(math.exp(12.927), spec) == pytest.approx(0.0, abs=1e-12)

    def test_loss_one_sd_above(self):
        spec = TransformSpec()
        assert transform_loss(math.exp(12.927 + REF_SIGMA), spec) == pytest.approx(1.0)

    def test_zero_loss_floor(self):
        spec = TransformSpec(zero_loss_policy="floor_at_one_dollar")
        assert transform_loss(0.0, spec) == pytest.approx(-4.642018294786180, abs=1e-12)

    def test_zero_loss_covariate_zero(self):
        spec = TransformSpec(zero_loss_policy="covariate_zero")
        assert transform_loss(0.0, spec) == 0.0

    def test_negative_loss(self):
        with pytest.raises(DataError):
            transform_loss(-1.0, TransformSpec())

    def test_logit_values(self):
        spec = TransformSpec()
        assert transform_response(0.5, spec) == pytest.approx(0.0)
        assert transform_response(0.9, spec) == pytest.approx(math.log(9), abs=1e-12)

    def test_probit_center(self):
        spec = TransformSpec(response_link="probit")
        assert transform_response(0.5, spec) == pytest.approx(0.0)

    def test_rate_domain(self):
        for bad in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(DataError):
                transform_response(bad, TransformSpec())

    @pytest.mark.parametrize("link", ["logit", "probit"])
    def test_round_trip(self, link):
        spec = TransformSpec(response_link=link)
        r = np.concatenate([[1e-6], np.linspace(0.01, 0.99, 25), [1 - 1e-6]])
        back = inverse_transform_response(transform_response(r, spec), spec)
        assert np.max(np.abs(back - r)) < 1e-12

    def test_bad_specs(self):
        with pytest.raises(ConfigError):
            TransformSpec(sigma_x=0.0)
        with pytest.raises(ConfigError):
            TransformSpec(response_link="loglog")
        with pytest.raises(ConfigError):
            SliceSpec(lags=(3, 3))
        with pytest.raises(ConfigError):
            SliceSpec(threshold=-1.0)


class TestEstimateMoments:
    def test_pooled_and_per_state(self):
        rng = np.random.default_rng(0)
        totals = {}
        for i in range(300):
            totals[("TX", 2000 + i // 12, i % 12 + 1)] = float(np.exp(rng.normal(12.0, 2.0)))
            totals[("LA", 2000 + i // 12, i % 12 + 1)] = float(np.exp(rng.normal(14.0, 1.0)))
        mu, sigma = estimate_loss_moments(totals)
        assert 12.5 < mu < 13.5
        mu_tx, _ = estimate_loss_moments(totals, state="TX")
        assert 11.5 < mu_tx < 12.5

    def test_needs_positive_months(self):
        with pytest.raises(DataError):
            estimate_loss_moments({("TX", 2000, 1): 0.0})


class TestBuildPanel:
    def counts(self, months=8, state="TX"):
        return [
            CountRecord(state, 2010 + (m - 1) // 12, (m - 1) % 12 + 1, 990, 1000)
            for m in range(1, months + 1)
        ]

    def test_alignment_and_missing_loss_months(self):
        losses = [LossRecord("TX", 2010, 3, 2e9)]
        panel = build_panel(self.counts(), losses, "TX")
        assert len(panel) == 8
        assert panel.loss_usd[2] == pytest.approx(2e9)
        assert panel.loss_usd[0] == 0.0
        assert np.all(panel.rate == pytest.approx(0.01))

    def test_month_gap_fails(self):
        counts = self.counts()
        del counts[3]
        with pytest.raises(DataError, match="gap"):
            build_panel(counts, [], "TX")

    def test_duplicate_month_fails(self):
        counts = self.counts() + [CountRecord("TX", 2010, 2, 990, 1000)]
        with pytest.raises(DataError, match="duplicate"):
            build_panel(counts, [], "TX")

    def test_boundary_rate_fails(self):
        counts = self.counts()
        counts[4] = CountRecord("TX", 2010, 5, 1000, 1000)  # rate exactly 0
        with pytest.raises(DataError):
            build_panel(counts, [], "TX")

    def test_unknown_state(self):
        with pytest.raises(DataError):
            build_panel(self.counts(), [], "CA")

    def test_estimate_moments_flag(self):
        losses = [
            LossRecord("TX", 2010, m, float(np.exp(10 + 0.3 * m))) for m in range(1, 9)
        ]
        panel = build_panel(self.counts(), losses, "TX", estimate_moments=True)
        assert panel.transform.mu_x == pytest.approx(10 + 0.3 * 4.5)


class TestBuildDesign:
    def test_threshold_placement(self):
        # lag-3 loss above the $10B threshold lands in the upper block
        loss = np.zeros(10)
        loss[4] = 2e10   # t=5; appears at row t=8, lag 3
        loss[5] = 5e9    # t=6; appears at row t=9, lag 3
        panel = make_panel(loss)
        design = build_design(panel, SliceSpec())
        assert list(design.t_index) == [6, 7, 8, 9, 10]
        spec = TransformSpec()
        row8 = design.row_at(8)
        cols = design.columns
        assert row8[cols.index("u_lag3")] == pytest.approx(transform_loss(2e10, spec))
        assert row8[cols.index("l_lag3")] == 0.0
        row9 = design.row_at(9)
        assert row9[cols.index("l_lag3")] == pytest.approx(transform_loss(5e9, spec))
        assert row9[cols.index("u_lag3")] == 0.0

    def test_all_below_threshold(self):
        panel = make_panel(np.full(12, 1e8))
        design = build_design(panel, SliceSpec())
        p = len(design.slice_spec.lags)
        assert np.all(design.values[:, p:] == 0.0)

    def test_truncation_reported(self):
        panel = make_panel(np.zeros(9))
        design = build_design(panel, SliceSpec(lags=(3, 4, 5)))
        assert design.t_index[0] == 6 and design.n_rows == 4
        y = aligned_response(panel, design)
        assert len(y) == 4

    def test_panel_too_short(self):
        panel = make_panel(np.zeros(4))
        with pytest.raises(DataError, match="too short"):
            build_design(panel, SliceSpec(lags=(3, 4, 5)))

    def test_lags_shorter_than_horizon(self):
        panel = make_panel(np.zeros(10), k=3)
        with pytest.raises(ConfigError, match="delinquency horizon"):
            build_design(panel, SliceSpec(lags=(2, 3)))

    def test_unsliced_width(self):
        panel = make_panel(np.zeros(12))
        sliced = build_design(panel, SliceSpec())
        plain = build_design(panel, SliceSpec(), sliced=False)
        assert sliced.n_cols == 2 * plain.n_cols == 6

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_slicing_partition_and_reconstruction(self, seed):
        rng = np.random.default_rng(seed)
        loss = np.exp(rng.normal(12.927, REF_SIGMA, size=14))
        loss[rng.integers(0, 14, size=3)] = 0.0  # zero-loss months exercise the policy
        panel = make_panel(loss)
        design = build_design(panel, SliceSpec(threshold=1e10))
        p = len(design.slice_spec.lags)
        lower, upper = design.values[:, :p], design.values[:, p:]
        assert np.all(lower * upper == 0.0)
        g = panel.g
        for i, t in enumerate(design.t_index):
            for j, lag in enumerate(design.slice_spec.lags):
                assert lower[i, j] + upper[i, j] == pytest.approx(g[t - lag - 1])
