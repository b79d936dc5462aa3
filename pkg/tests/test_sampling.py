import math

import numpy as np
import pytest
from scipy.integrate import quad

import lpsphere as lp
from lpsphere.sampling import RngStream, sample_cone_batch, systematic_resample

from conftest import ACCEPT_SEED

P_GRID = [1.0, 1.5, 2.0, 3.0, math.inf]


class TestRngStream:
    def test_bitwise_reproducible(self):
        a = lp.sample_gen_gaussian(2.0, 1000, RngStream(9, 3))
        b = lp.sample_gen_gaussian(2.0, 1000, RngStream(9, 3))
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = lp.sample_gen_gaussian(2.0, 1000, RngStream(9, 0))
        b = lp.sample_gen_gaussian(2.0, 1000, RngStream(9, 1))
        assert not np.array_equal(a, b)

    def test_cone_reproducible(self):
        a = lp.sample_cone(1.5, 20, RngStream(5, 1))
        b = lp.sample_cone(1.5, 20, RngStream(5, 1))
        assert np.array_equal(a.coords, b.coords)

    def test_key_bounds(self):
        with pytest.raises(ValueError):
            RngStream(-1)


class TestGenGaussian:
    def test_ks_normal_case(self):
        draws = lp.sample_gen_gaussian(2.0, 10 ** 5, RngStream(ACCEPT_SEED, 2))
        ks = lp.ks_distance(lp.EmpiricalMeasure.from_samples(draws), lp.mu_p(2.0))
        assert ks < 0.006  # 1% critical value is about 1.63/sqrt(N)

    def test_mean_abs_laplace_case(self):
        draws = lp.sample_gen_gaussian(1.0, 10 ** 5, RngStream(ACCEPT_SEED, 0))
        assert np.mean(np.abs(draws)) == pytest.approx(1.0, abs=0.02)

    def test_uniform_support(self):
        draws = lp.sample_gen_gaussian(math.inf, 10 ** 4, RngStream(1))
        assert np.all(np.abs(draws) <= 1.0)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            lp.sample_gen_gaussian(2.0, 0, RngStream(1))


class TestCone:
    @pytest.mark.parametrize("p", P_GRID)
    @pytest.mark.parametrize("n", [2, 10, 100])
    def test_unit_norm_and_moment_identity(self, p, n):
        pts = sample_cone_batch(p, n, 200, RngStream(11, n))
        if math.isinf(p):
            norms = np.max(np.abs(pts), axis=1)
            stats = norms  # m_inf of the scaled empirical measure
        else:
            norms = np.sum(np.abs(pts) ** p, axis=1) ** (1.0 / p)
            stats = np.sum(np.abs(pts * n ** (1.0 / p)) ** p, axis=1) / n
        assert np.max(np.abs(norms - 1.0)) < 1e-12
        assert np.max(np.abs(stats - 1.0)) < 1e-12

    def test_weight_defaults_to_one(self):
        pt = lp.sample_cone(2.0, 5, RngStream(0))
        assert pt.weight == 1.0
        pt.validate()

    def test_low_dimensional_marginal_close_to_base(self):
        # at n = 3 the scaled first coordinate is uniform on [-sqrt(3), sqrt(3)]
        # whose exact KS distance to the standard normal is 0.05721; the
        # distance must sit at that value and then shrink as n grows
        pts = sample_cone_batch(2.0, 3, 10 ** 5, RngStream(ACCEPT_SEED, 5))
        first = math.sqrt(3.0) * pts[:, 0]
        ks3 = lp.ks_distance(lp.EmpiricalMeasure.from_samples(first), lp.mu_p(2.0))
        assert abs(ks3 - 0.057207) < 0.01
        pts = sample_cone_batch(2.0, 30, 10 ** 5, RngStream(ACCEPT_SEED, 6))
        first = math.sqrt(30.0) * pts[:, 0]
        ks30 = lp.ks_distance(lp.EmpiricalMeasure.from_samples(first), lp.mu_p(2.0))
        assert ks30 < 0.02 < ks3


def _arc_length_surface_average(p: float, f) -> float:
    """Oracle: E_sigma[f] on the planar l^p circle by arc-length quadrature.

    Parameterize the first quadrant as (cos t^{2/p}, sin t^{2/p}); the
    surface measure weights by the speed |dx/dt|. f must be invariant
    under sign flips and coordinate swaps.
    """

    def point(t):
        return np.array([math.cos(t) ** (2.0 / p), math.sin(t) ** (2.0 / p)])

    def speed(t):
        e = 2.0 / p
        dx = -e * math.cos(t) ** (e - 1.0) * math.sin(t)
        dy = e * math.sin(t) ** (e - 1.0) * math.cos(t)
        return math.hypot(dx, dy)

    eps = 1e-9
    num, _ = quad(lambda t: f(point(t)) * speed(t), eps, math.pi / 2 - eps, limit=400)
    den, _ = quad(speed, eps, math.pi / 2 - eps, limit=400)
    return num / den


class TestSurface:
    def test_p2_weights_all_equal(self):
        pts, _ = lp.sample_surface(2.0, 20, 500, RngStream(3))
        w = np.array([pt.weight for pt in pts])
        assert np.max(np.abs(w - 1.0)) < 1e-12

    def test_log_weight_span_bound_p3(self):
        _, stats = lp.sample_surface(3.0, 100, 2000, RngStream(4))
        assert stats.span() <= 2.0 * (0.5 - 1.0 / 3.0) * math.log(100.0) + 1e-9
        stats.validate()

    def test_moment_bounds_both_sides(self):
        # p > 2: 1 <= m_{2p-2} <= n^{1-2/p}; 1 < p < 2: reversed
        for p, n in ((3.0, 100), (1.5, 50)):
            pts, _ = lp.sample_surface(p, n, 2000, RngStream(6))
            scale = n ** (1.0 / p)
            m = np.array(
                [np.sum(np.abs(pt.coords * scale) ** (2.0 * p - 2.0)) / n for pt in pts]
            )
            lo = min(1.0, n ** (1.0 - 2.0 / p))
            hi = max(1.0, n ** (1.0 - 2.0 / p))
            assert m.min() >= lo - 1e-9
            assert m.max() <= hi + 1e-9

    def test_rejects_infinite_p(self):
        with pytest.raises(ValueError):
            lp.sample_surface(math.inf, 10, 10, RngStream(0))

    def test_rejects_empty_batch(self):
        with pytest.raises(ValueError):
            lp.sample_surface(2.0, 10, 0, RngStream(0))

    @pytest.mark.parametrize("p", [1.5, 3.0])
    def test_snis_matches_arc_length_oracle(self, p):
        # estimator of E_sigma[m_{2p-2}(L)] in the plane against quadrature
        n = 2

        def f(x):
            return float(np.sum(np.abs(x * n ** (1.0 / p)) ** (2.0 * p - 2.0)) / n)

        oracle = _arc_length_surface_average(p, f)
        pts, _ = lp.sample_surface(p, n, 40_000, RngStream(ACCEPT_SEED, 8))
        w = np.array([pt.weight for pt in pts])
        vals = np.array([f(pt.coords) for pt in pts])
        est = float(np.sum(w * vals) / np.sum(w))
        se = float(np.std(vals) / math.sqrt(len(vals)))
        assert abs(est - oracle) < 3.0 * max(se, 1e-4)


class TestSystematicResample:
    def test_preserves_weighted_mean(self):
        rng = RngStream(12).generator()
        vals = rng.standard_normal(2000)
        w = np.exp(rng.standard_normal(2000) * 0.3)
        idx = systematic_resample(w, rng)
        target = float(np.sum(w * vals) / np.sum(w))
        got = float(np.mean(vals[idx]))
        assert abs(got - target) < 0.1

    def test_uniform_weights_identity_permutation(self):
        idx = systematic_resample(np.ones(100), RngStream(1))
        assert sorted(idx.tolist()) == list(range(100))
