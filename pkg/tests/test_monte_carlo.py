import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate

from v2v_sf.errors import ParameterError
from v2v_sf.hardcore_process import HardCoreConfig, PointSet1D, Window1D, realization_rng
from v2v_sf.lane_geometry import AntennaCase, Geometry, LaneLayout, VehicleField, deploy_field
from v2v_sf.link_analysis import RadioConfig, mh_transform
from v2v_sf.monte_carlo import (
    SF_ONE_MINUS,
    PoissonDistanceModel,
    SimConfig,
    baseline_interference,
    baseline_ppp_ccdf,
    default_sigma_grid,
    empirical_ccdf,
    run_campaign,
    run_campaigns,
    sample_serving_offsets,
    simulate_outcomes,
    simulate_trial,
)

from oracles import lam

C1, C2 = AntennaCase.C1, AntennaCase.C2
RADIO = RadioConfig.from_dbm(30, -90)
GEOM = Geometry.symmetric(HardCoreConfig(0.1, 5.0, 145.0), 5.0)


def manual_field(x1, x2, w=5.0):
    cfg = HardCoreConfig(0.1, 5.0, 145.0)
    win = Window1D(-1000, 1000)
    return VehicleField(
        PointSet1D(np.asarray(x1, float), None, win), PointSet1D(np.asarray(x2, float), None, win), LaneLayout(w), (cfg, cfg)
    )


class TestSigmaGrid:
    def test_log(self):
        g = default_sigma_grid()
        assert g.size == 199 and g[0] == 0.0
        assert np.all(np.diff(g) > 0) and g[-1] < 1
        assert mh_transform(g[1]) == pytest.approx(1e-4)
        assert mh_transform(g[-1]) == pytest.approx(1e4)

    def test_uniform(self):
        g = default_sigma_grid(5, mh_max=100, spacing="uniform")
        np.testing.assert_allclose(mh_transform(g), [0, 25, 50, 75, 100])
        with pytest.raises(ParameterError):
            default_sigma_grid(spacing="cubic")


class TestSimulateTrial:
    def test_no_interferers(self):
        out = simulate_trial(manual_field([0.0], [30.0]), replace(RADIO, N=0.0), C1, fading=(np.ones(1), np.ones(1)))
        assert math.isinf(out.sinr)
        assert out.sf == SF_ONE_MINUS and out.sf_clamped

    def test_symmetric_interferer(self):
        f = manual_field([0.0], [-30.0, 30.0])
        out = simulate_trial(f, replace(RADIO, N=0.0), C2, fading=(np.ones(1), np.ones(2)))
        assert out.sinr == pytest.approx(1.0)
        assert out.sf == pytest.approx(0.5)

    def test_case_restriction(self):
        # behind-the-receiver vehicles are invisible to the semicircle antenna
        f = manual_field([-200.0, 0.0, 300.0], [-10.0, 40.0])
        h = (np.array([1.0, 1.0, 1.0]), np.array([1.0, 1.0]))
        out1 = simulate_trial(f, replace(RADIO, N=0.0), C1, fading=h)
        assert out1.S == pytest.approx((40**2 + 25) ** -2)
        assert out1.I == pytest.approx(300.0**-4)
        out2 = simulate_trial(f, replace(RADIO, N=0.0), C2, fading=h)
        assert out2.S == pytest.approx((10**2 + 25) ** -2)
        assert out2.I == pytest.approx(200.0**-4 + 300.0**-4 + (40**2 + 25) ** -2)

    def test_no_server(self):
        assert simulate_trial(manual_field([0.0], [-5.0]), RADIO, C1, fading=(np.ones(1), np.ones(1))) is None

    def test_needs_randomness(self):
        with pytest.raises(ParameterError):
            simulate_trial(manual_field([0.0], [5.0]), RADIO, C1)

    def test_identity_on_random_fields(self):
        for i in range(200):
            rng = realization_rng(2, i)
            out = simulate_trial(deploy_field(GEOM, rng=rng), RADIO, C2, rng=rng)
            assert 0 <= out.sf < 1
            assert out.sf == out.sinr / (out.sinr + 1)


class TestBatchedCampaign:
    def test_matches_trial_by_trial(self):
        cfg = SimConfig(GEOM, RADIO, C1, trials=120, half_length=2000, seed=17)
        batch = simulate_outcomes(cfg, cases=(C1, C2), chunk=50)
        for i in range(cfg.trials):
            for case in (C1, C2):
                rng = realization_rng(17, i)
                field = deploy_field(GEOM, rng=rng, half_length=2000)
                ref = simulate_trial(field, RADIO, case, rng=rng)
                got = batch[(case, 4.0)]
                if ref is None:
                    assert not got.valid[i]
                else:
                    assert got.S[i] == pytest.approx(ref.S, rel=1e-12)
                    assert got.I[i] == pytest.approx(ref.I, rel=1e-12)
                    assert got.sf[i] == pytest.approx(ref.sf, rel=1e-12)

    def test_sf_identity_exact(self):
        cfg = SimConfig(GEOM, RADIO, C2, trials=1000, seed=3)
        out = simulate_outcomes(cfg)[(C2, 4.0)]
        assert np.array_equal(out.sf, out.sinr / (out.sinr + 1))

    def test_worker_and_chunk_invariance(self):
        cfg = SimConfig(GEOM, RADIO, C1, trials=1500, seed=9)
        a = run_campaign(cfg, workers=1)
        b = run_campaign(cfg, workers=3)
        np.testing.assert_array_equal(a.values, b.values)
        c = simulate_outcomes(cfg, chunk=137)[(C1, 4.0)]
        d = simulate_outcomes(cfg)[(C1, 4.0)]
        np.testing.assert_array_equal(c.sf, d.sf)

    def test_curve_shape_and_metadata(self):
        cfg = SimConfig(GEOM, RADIO, C1, trials=2000, seed=1)
        curve = run_campaign(cfg)
        assert curve.values[0] == 1.0
        assert np.all(np.diff(curve.values) <= 0)
        assert curve.values[-1] < 0.05
        for key in ("seed", "trials", "discarded", "discard_rate", "half_length"):
            assert key in curve.metadata
        assert curve.metadata["discard_rate"] == 0.0

    def test_discard_warning(self):
        # a tiny lane-2 density leaves most semicircle receivers without a server
        geom = Geometry(HardCoreConfig(0.1, 5, 145), HardCoreConfig(1e-4, 5, 5, warn_light_traffic=False), LaneLayout(5))
        cfg = SimConfig(geom, RADIO, C1, trials=200, half_length=1500, seed=0)
        curve = run_campaign(cfg)
        assert curve.metadata["discard_rate"] > 0.2
        assert "warning" in curve.metadata

    def test_omni_not_worse(self):
        cfg = SimConfig(GEOM, RADIO, C1, trials=20_000, seed=5)
        curves = run_campaigns(cfg, (C1, C2), (4.0,))
        c1, c2 = curves[(C1, 4.0)].values, curves[(C2, 4.0)].values
        half = 2.6 * np.sqrt(0.25 / cfg.trials)
        assert np.all(c2 >= c1 - half)

    @pytest.mark.slow
    def test_truncation_invariance(self):
        cfg = SimConfig(GEOM, RADIO, C1, trials=100_000, half_length=8000, seed=21)
        out = simulate_outcomes(cfg, cases=(C1, C2), radii=(None, 4000.0))
        grid = np.asarray(cfg.sigma_grid)
        for case in (C1, C2):
            wide = empirical_ccdf(out[(case, 4.0, None)].sf, grid)
            cut = empirical_ccdf(out[(case, 4.0, 4000.0)].sf, grid)
            half = 1.96 * np.sqrt(wide * (1 - wide) / cfg.trials)
            assert np.all(np.abs(wide - cut) <= np.maximum(half, 1e-12))


class TestSimConfig:
    def test_window_guard(self):
        with pytest.raises(ParameterError):
            SimConfig(GEOM, RADIO, trials=10, half_length=1000)

    def test_trials_and_grid(self):
        with pytest.raises(ParameterError):
            SimConfig(GEOM, RADIO, trials=0)
        with pytest.raises(ParameterError):
            SimConfig(GEOM, RADIO, sigma_grid=(0.0, 0.5, 0.4))


def test_empirical_ccdf():
    s = np.array([0.1, 0.2, 0.2, 0.9])
    np.testing.assert_allclose(empirical_ccdf(s, [0.0, 0.1, 0.2, 0.5, 0.95]), [1.0, 0.75, 0.25, 0.25, 0.0])
    assert np.isnan(empirical_ccdf(np.array([]), [0.5])).all()


def test_serving_offsets_signs():
    geom = Geometry.symmetric(HardCoreConfig(0.2, 5.0, 45.0), 5.0)
    x1, x2 = sample_serving_offsets(geom, 4000, seed=2)
    assert np.all(x1 > 0)
    assert np.all(np.abs(x2) <= x1)
    # nearest positive vehicle is at most one hard-core gap past the nearest one overall
    assert 0.4 < np.mean(x2 > 0) < 0.6


class TestBaseline:
    @pytest.mark.parametrize("case", [C1, C2])
    def test_offset_pdf_mass(self, case):
        m = PoissonDistanceModel(0.01, 5.0, case)
        assert integrate.quad(m.pdf_x, 0, np.inf)[0] == pytest.approx(1.0, abs=1e-10)

    def test_I1_closed_form(self):
        li = lam(0.1, 150)
        I1, I2 = baseline_interference(li, 150.0, li, 150.0, 5.0, 4.0)
        assert I1 == pytest.approx(li * 150.0**-3 / 3, rel=1e-14)
        assert I2 > 0

    def test_curve(self):
        cfg = SimConfig(GEOM, RADIO, C2, trials=10)
        curve = baseline_ppp_ccdf(cfg)
        assert curve.kind == "baseline-ppp"
        assert curve.values[0] == pytest.approx(1.0, abs=1e-9)
        assert np.all(np.diff(curve.values) <= 1e-12)
