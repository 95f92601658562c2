from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_dataset, make_stream
from pvrise.analysis import (
    GaussianKDE,
    analyze_dataset,
    daily_beta_series,
    entropy_bits,
    fd_bin_width,
    fit_site_beta,
    hourly_beta_series,
    kde,
    map_estimate,
    silverman_bandwidth,
    summarize_betas,
)
from pvrise.errors import DegenerateDataError, InsufficientDataError
from pvrise.feeder import noise_free, simulate, single_site_config
from pvrise.model import BetaFit, BetaSeries, CloudModel, Density

CLOSED_FORM_BETA = -0.077 * 1000 / 240**2


def series(values, kind="daily"):
    return BetaSeries(kind, tuple((k, BetaFit(v, 1.0, 50, 0.0, 1.0)) for k, v in enumerate(values)))


class TestFitSiteBeta:
    def test_noise_free_recovery(self, noise_free_single_day):
        fit = fit_site_beta(noise_free_single_day, "site1")
        assert fit.beta_pu_per_kw == pytest.approx(CLOSED_FORM_BETA, abs=1e-6)
        assert fit.beta_pu_per_kw == pytest.approx(-0.0013368, abs=1e-6)

    def test_constant_voltage(self):
        net = -np.linspace(0.1, 2.0, 200)
        ds = make_dataset([make_stream("a", net, np.full(200, 1.02))])
        assert fit_site_beta(ds, "a").beta_pu_per_kw == pytest.approx(0.0, abs=1e-20)

    def test_threshold(self):
        net = -np.linspace(0.1, 2.0, 50)
        ds = make_dataset([make_stream("a", net, 1.0 - 0.001 * net)])
        with pytest.raises(InsufficientDataError, match="site a"):
            fit_site_beta(ds, "a")

    def test_ordering_follows_impedance(self, default_sim_20):
        ds = default_sim_20
        ids = sorted(ds.site_ids, key=lambda s: ds.spec(s).impedance_ohm)
        mags = [abs(fit_site_beta(ds, s).beta_pu_per_kw) for s in ids]
        assert all(a < b for a, b in zip(mags, mags[1:]))

    def test_overall_fit_within_daily_range(self, default_sim_20):
        for sid in default_sim_20.site_ids:
            b = fit_site_beta(default_sim_20, sid).beta_pu_per_kw
            daily = daily_beta_series(default_sim_20, sid).betas
            assert daily.min() <= b <= daily.max()


class TestSeries:
    def test_clear_days_all_present(self):
        cfg = replace(single_site_config(n_days=4, seed=3), cloud_model=CloudModel(volatility=0.0))
        ds = simulate(cfg)
        daily = daily_beta_series(ds, "site1")
        assert list(daily.labels) == [0, 1, 2, 3]

    def test_overcast_day_is_absent(self):
        ds = simulate(noise_free(single_site_config(n_days=3)))
        st = ds["site1"]
        # black out day 1: no PV, so no injection
        net = st.net_power_kw.copy()
        net[st.day == 1] = np.abs(net[st.day == 1]) + 0.5
        st = replace(st, net_power_kw=net)
        ds = replace(ds, streams={"site1": st})
        assert list(daily_beta_series(ds, "site1").labels) == [0, 2]

    def test_identical_noise_free_days(self):
        ds = simulate(noise_free(single_site_config(n_days=3)))
        betas = daily_beta_series(ds, "site1").betas
        assert len(betas) == 3
        assert np.ptp(betas) <= 1e-9

    def test_hourly_skips_night_and_counts_days(self):
        cfg = replace(single_site_config(n_days=40, seed=2), cloud_model=CloudModel(volatility=0.0))
        ds = simulate(cfg)
        hourly = hourly_beta_series(ds, "site1")
        labels = set(hourly.labels.tolist())
        assert not labels & set(range(0, 360))
        assert 720 in labels
        fit = dict(hourly.entries)[720]
        assert fit.n_samples == 40


class TestKde:
    def test_standard_normal_peak(self):
        draws = np.random.default_rng(0).standard_normal(10_000)
        d = kde(draws)
        peak = d.values.max()
        assert abs(peak - 0.3989) <= 0.05 * 0.3989
        at_zero = np.interp(0.0, d.grid, d.values)
        assert abs(at_zero - 0.3989) <= 0.05 * 0.3989

    def test_normalised_and_spans_data(self):
        v = np.random.default_rng(1).gamma(2.0, size=300)
        d = kde(v)
        assert abs(np.trapezoid(d.values, d.grid) - 1.0) <= 1e-3
        assert d.grid[0] == pytest.approx(v.min() - 3 * d.bandwidth)
        assert d.grid[-1] == pytest.approx(v.max() + 3 * d.bandwidth)
        assert len(d.grid) == 512 and np.all(np.diff(d.grid) > 0) and np.all(d.values >= 0)

    def test_silverman_default(self):
        v = np.random.default_rng(2).normal(size=50)
        assert kde(v).bandwidth == pytest.approx(1.06 * v.std(ddof=1) * 50 ** -0.2)
        assert silverman_bandwidth(v) == kde(v).bandwidth

    def test_two_point_bimodal(self):
        d = kde([0.0, 1.0], bandwidth=0.1)
        # direct kernel sum on the same grid
        g = d.grid
        raw = (np.exp(-0.5 * (g / 0.1) ** 2) + np.exp(-0.5 * ((g - 1) / 0.1) ** 2)) / (2 * 0.1 * np.sqrt(2 * np.pi))
        np.testing.assert_allclose(d.values, raw / np.trapezoid(raw, g), rtol=1e-12)
        interior = (d.values[1:-1] > d.values[:-2]) & (d.values[1:-1] > d.values[2:])
        modes = g[1:-1][interior]
        assert len(modes) == 2
        np.testing.assert_allclose(modes, [0.0, 1.0], atol=2 * (g[1] - g[0]))

    def test_degenerate(self):
        with pytest.raises(DegenerateDataError):
            kde([0.3, 0.3, 0.3])

    def test_estimator_api(self):
        est = GaussianKDE(bandwidth=0.5).fit(np.array([0.0, 1.0, 2.0]))
        assert est.get_params() == {"bandwidth": 0.5, "n_grid": 512}
        assert est.score_samples(np.array([1.0]))[0] > est.score_samples(np.array([5.0]))[0]
        assert est.mode_ == map_estimate(est.density_)


class TestMap:
    def test_symmetric_density(self):
        grid = np.linspace(-1, 1, 201)
        d = Density(grid, np.exp(-grid**2 / 0.1), 0.1)
        assert map_estimate(d) == pytest.approx(0.0, abs=1e-12)

    def test_sampling_oracle(self):
        draws = np.random.default_rng(3).normal(-0.01, 0.003, 10_000)
        assert map_estimate(kde(draws)) == pytest.approx(-0.01, abs=0.001)

    def test_flat_tie_goes_left(self):
        grid = np.linspace(2.0, 3.0, 11)
        assert map_estimate(Density(grid, np.ones(11), 0.1)) == 2.0

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-1, 1), st.floats(0.01, 2), st.integers(0, 2**32))
    def test_unimodal_mode_within_two_bandwidths(self, mu, sigma, seed):
        draws = np.random.default_rng(seed).normal(mu, sigma, 2000)
        d = kde(draws)
        assert abs(map_estimate(d) - mu) <= 2 * d.bandwidth


class TestEntropy:
    def test_single_bin(self):
        assert entropy_bits(np.full(20, 0.004)) == 0.0

    def test_eight_equal_bins(self):
        v = np.linspace(0, 1, 512)
        # FD: IQR 0.5 -> width 512^(-1/3) = 1/8, so 8 bins of 64 points each
        assert fd_bin_width(v) == pytest.approx(0.125)
        counts = [int(np.sum((v >= k / 8) & ((v < (k + 1) / 8) | (k == 7)))) for k in range(8)]
        assert counts == [64] * 8
        assert entropy_bits(v) == pytest.approx(3.0, abs=1e-12)

    def test_scale_invariant_with_own_bins(self):
        v = np.random.default_rng(4).normal(size=200)
        assert entropy_bits(v) == pytest.approx(entropy_bits(v / 10), abs=1e-12)

    def test_wider_spread_has_more_entropy_on_shared_bins(self):
        wide = np.random.default_rng(5).normal(-0.01, 0.003, 160)
        narrow = -0.01 + (wide + 0.01) / 10
        width = fd_bin_width(narrow)
        assert entropy_bits(wide, width) > entropy_bits(narrow, width)

    def test_needs_eight_values(self):
        with pytest.raises(InsufficientDataError):
            entropy_bits(np.arange(7.0))

    @given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=8, max_size=100))
    def test_bounded_by_log_count(self, values):
        h = entropy_bits(values)
        assert 0.0 <= h <= np.log2(len(values)) + 1e-9


class TestSummary:
    def test_hand_stats(self):
        s = summarize_betas(series([-2.0, -1.0, 0.0]))
        assert (s.minimum, s.average, s.std) == (-2.0, -1.0, 1.0)
        assert -2.0 <= s.map <= 0.0

    def test_all_equal(self):
        s = summarize_betas(series([-0.003] * 5))
        assert s.std == 0.0 and s.map == -0.003

    def test_uses_given_density(self):
        grid = np.linspace(-3, 1, 9)
        vals = np.zeros(9)
        vals[2] = 1.0
        s = summarize_betas(series([-2.0, -1.0, 0.0]), Density(grid, vals, 0.5))
        assert s.map == -2.0

    def test_needs_two_values(self):
        with pytest.raises(InsufficientDataError):
            summarize_betas(series([-1.0]))

    @given(st.lists(st.floats(-0.05, 0.0, allow_nan=False, allow_subnormal=False), min_size=2, max_size=50))
    def test_invariants(self, values):
        s = summarize_betas(np.array(values))
        assert s.minimum <= s.average + 1e-15
        assert s.minimum <= s.map <= max(values)
        assert s.std >= 0


def test_analyze_dataset_fills_everything(default_sim_20):
    results = analyze_dataset(default_sim_20, min_samples=10)
    assert [r.site_id for r in results] == default_sim_20.site_ids
    for r in results:
        assert r.daily_summary is not None and r.hourly_summary is not None
        assert r.daily_entropy is not None and r.hourly_entropy is not None
        assert 3.9 <= r.energy_per_capacity <= 5.2
