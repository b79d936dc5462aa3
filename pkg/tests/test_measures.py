import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

import lpsphere as lp
from lpsphere.measures import EmpiricalMeasure

from conftest import ACCEPT_SEED


def lp_transport_cost(mu: EmpiricalMeasure, nu: EmpiricalMeasure, q: float) -> float:
    """Brute-force optimal transport between small empiricals via linprog."""
    na, nb = mu.size, nu.size
    cost = np.abs(mu.atoms[:, None] - nu.atoms[None, :]) ** q
    a_eq = []
    for i in range(na):
        row = np.zeros((na, nb))
        row[i, :] = 1.0
        a_eq.append(row.ravel())
    for j in range(nb):
        row = np.zeros((na, nb))
        row[:, j] = 1.0
        a_eq.append(row.ravel())
    b_eq = np.concatenate([mu.weights, nu.weights])
    res = linprog(cost.ravel(), A_eq=np.array(a_eq), b_eq=b_eq, method="highs")
    assert res.success
    return float(res.fun ** (1.0 / q))


small_measures = st.builds(
    lambda atoms: EmpiricalMeasure(np.array(atoms)),
    st.lists(
        st.floats(min_value=-5.0, max_value=5.0, allow_nan=False),
        min_size=1,
        max_size=8,
    ),
)


class TestEmpiricalMeasure:
    def test_sorted_and_normalized(self):
        m = EmpiricalMeasure(np.array([3.0, -1.0, 2.0]))
        assert np.all(np.diff(m.atoms) >= 0.0)
        assert m.weights.sum() == pytest.approx(1.0, abs=1e-15)

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            EmpiricalMeasure(np.array([1.0, 2.0]), np.array([0.7, 0.7]))
        with pytest.raises(ValueError):
            EmpiricalMeasure(np.array([1.0, 2.0]), np.array([1.0, 0.0]))

    def test_csv_round_trip(self, tmp_path):
        m = EmpiricalMeasure(np.array([0.25, -1.5, 3.0]), np.array([0.2, 0.5, 0.3]))
        path = tmp_path / "m.csv"
        m.to_csv(path)
        back = EmpiricalMeasure.from_csv(path)
        assert np.array_equal(back.atoms, m.atoms)
        assert np.array_equal(back.weights, m.weights)

    def test_resample_uniformizes(self):
        rng = lp.RngStream(4).generator()
        atoms = rng.standard_normal(1000)
        w = np.exp(0.5 * rng.standard_normal(1000))
        m = EmpiricalMeasure(atoms, w / w.sum())
        r = m.resampled()
        assert np.allclose(r.weights, 1.0 / r.size)
        target = float(np.sum(m.weights * m.atoms))
        assert float(np.mean(r.atoms)) == pytest.approx(target, abs=0.05)


class TestEmpiricalFromSphere:
    def test_uniform_l1_point(self):
        pt = lp.SpherePoint(np.array([1 / 3, 1 / 3, 1 / 3]), p=1.0)
        em = lp.empirical_from_sphere(pt)
        assert np.allclose(em.atoms, 1.0)
        assert em.moment(1.0) == pytest.approx(1.0, abs=1e-15)

    def test_axis_point(self):
        pt = lp.SpherePoint(np.array([1.0, 0.0]), p=2.0)
        em = lp.empirical_from_sphere(pt)
        assert np.allclose(np.sort(em.atoms), [0.0, math.sqrt(2.0)])
        assert em.moment(2.0) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, math.inf])
    def test_cone_draws_satisfy_moment_identity(self, p):
        for k in range(5):
            pt = lp.sample_cone(p, 25, lp.RngStream(77, k))
            em = lp.empirical_from_sphere(pt)
            order = p if not math.isinf(p) else math.inf
            assert em.moment(order) == pytest.approx(1.0, abs=1e-12)


class TestMoment:
    def test_point_mass_at_zero(self):
        m = EmpiricalMeasure(np.array([0.0]))
        for q in (1.0, 2.0, 3.5):
            assert lp.moment(m, q) == 0.0

    def test_against_analytic(self):
        assert lp.moment(lp.mu_p(2.0), 1.0) == pytest.approx(
            math.sqrt(2.0 / math.pi), abs=1e-10
        )

    def test_infinite_order(self):
        assert lp.moment(lp.mu_q_beta(1.0, 0.5), math.inf) == math.inf
        assert lp.moment(lp.mu_p(3.0), math.inf) == math.inf
        assert lp.moment(lp.UniformSymmetric(0.8), math.inf) == pytest.approx(0.8)
        m = EmpiricalMeasure(np.array([-3.0, 1.0]))
        assert lp.moment(m, math.inf) == 3.0

    @pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 1.0])
    def test_linearity_in_mixtures(self, alpha):
        a = EmpiricalMeasure(np.array([-1.0, 2.0]))
        b = EmpiricalMeasure(np.array([0.5, 3.0, -2.0]))
        if alpha in (0.0, 1.0):
            mix = a if alpha == 1.0 else b
        else:
            atoms = np.concatenate([a.atoms, b.atoms])
            weights = np.concatenate([alpha * a.weights, (1 - alpha) * b.weights])
            mix = EmpiricalMeasure(atoms, weights)
        for q in (1.0, 2.0):
            expect = alpha * a.moment(q) + (1 - alpha) * b.moment(q)
            assert mix.moment(q) == pytest.approx(expect, rel=1e-12)


class TestScaleMap:
    def test_identity_at_one(self):
        m = EmpiricalMeasure(np.array([1.0, -2.0]))
        out = lp.scale_map_G(m, 1.0, 2.0)
        assert np.array_equal(out.atoms, m.atoms)

    def test_normalizes_raw_draws(self):
        draws = lp.sample_gen_gaussian(2.0, 500, lp.RngStream(8))
        m = EmpiricalMeasure.from_samples(draws)
        out = lp.scale_map_G(m, m.moment(2.0), 2.0)
        assert out.moment(2.0) == pytest.approx(1.0, rel=1e-12)

    def test_infinite_p_is_identity(self):
        m = EmpiricalMeasure(np.array([0.3, -0.7]))
        assert lp.scale_map_G(m, 5.0, math.inf) is m

    def test_rejects_nonpositive_scale(self):
        m = EmpiricalMeasure(np.array([0.0]))
        with pytest.raises(ValueError):
            lp.scale_map_G(m, 0.0, 2.0)

    @given(
        small_measures,
        st.floats(min_value=0.1, max_value=10.0, allow_nan=False),
        st.sampled_from([1.0, 1.5, 2.0, 3.0]),
    )
    @settings(max_examples=40, deadline=None)
    def test_moment_scaling_identity(self, m, c, p):
        out = lp.scale_map_G(m, c, p)
        assert out.moment(p) == pytest.approx(m.moment(p) / c, rel=1e-9, abs=1e-12)


class TestWasserstein:
    def test_point_masses(self):
        d0 = EmpiricalMeasure(np.array([0.0]))
        d1 = EmpiricalMeasure(np.array([1.0]))
        assert lp.wasserstein_q(d0, d1, 1.0) == pytest.approx(1.0, abs=1e-14)

    def test_self_distance_zero(self):
        m = EmpiricalMeasure(np.array([0.3, -1.0, 2.0]))
        for q in (1.0, 2.0):
            assert lp.wasserstein_q(m, m, q) == pytest.approx(0.0, abs=1e-14)

    def test_hand_transport_plan(self):
        # move mass 1/2 from 0 and 1/2 from 2, each a distance 1
        a = EmpiricalMeasure(np.array([0.0, 2.0]))
        b = EmpiricalMeasure(np.array([1.0]))
        assert lp.wasserstein_q(a, b, 1.0) == pytest.approx(1.0, abs=1e-14)

    @given(small_measures, small_measures, st.sampled_from([1.0, 2.0]))
    @settings(max_examples=25, deadline=None)
    def test_matches_lp_oracle(self, a, b, q):
        # compare transport costs, not their q-th roots: near zero the root
        # amplifies the LP solver's own feasibility tolerance unboundedly
        ours = lp.wasserstein_q(a, b, q) ** q
        oracle = lp_transport_cost(a, b, q) ** q
        assert ours == pytest.approx(oracle, rel=1e-6, abs=1e-7)

    @given(small_measures, small_measures, small_measures)
    @settings(max_examples=25, deadline=None)
    def test_metric_properties(self, a, b, c):
        q = 2.0
        dab = lp.wasserstein_q(a, b, q)
        dba = lp.wasserstein_q(b, a, q)
        assert dab == pytest.approx(dba, rel=1e-10, abs=1e-12)
        assert dab >= 0.0
        dac = lp.wasserstein_q(a, c, q)
        dcb = lp.wasserstein_q(c, b, q)
        assert dab <= dac + dcb + 1e-9

    def test_weighted_vs_unweighted_consistency(self):
        a = EmpiricalMeasure(np.array([0.0, 1.0]), np.array([0.75, 0.25]))
        a_flat = EmpiricalMeasure(np.array([0.0, 0.0, 0.0, 1.0]))
        b = EmpiricalMeasure(np.array([0.5]))
        assert lp.wasserstein_q(a, b, 1.0) == pytest.approx(
            lp.wasserstein_q(a_flat, b, 1.0), abs=1e-12
        )

    def test_against_analytic_target(self):
        draws = lp.sample_gen_gaussian(2.0, 50_000, lp.RngStream(ACCEPT_SEED, 9))
        m = EmpiricalMeasure.from_samples(draws)
        assert lp.wasserstein_q(m, lp.mu_p(2.0), 1.0) < 0.02

    def test_infinite_moment_rejected(self):
        m = EmpiricalMeasure(np.array([0.0]))

        class FatTail(lp.UniformSymmetric):
            def moment(self, q):
                return math.inf

        with pytest.raises((ValueError, RuntimeError)):
            lp.wasserstein_q(m, FatTail(1.0), 2.0)

    def test_paper_continuity_counterexample(self):
        # nu_n = (1-1/n) d_0 + (1/n) d_{n^{1/p}} drifts to d_0 in W_q for
        # q < p while its p-th moment stays exactly one
        p, q, n = 2.0, 1.0, 400
        nu_n = EmpiricalMeasure(
            np.array([0.0, n ** (1.0 / p)]), np.array([1.0 - 1.0 / n, 1.0 / n])
        )
        d0 = EmpiricalMeasure(np.array([0.0]))
        assert nu_n.moment(p) == pytest.approx(1.0, abs=1e-14)
        w = lp.wasserstein_q(nu_n, d0, q)
        assert w == pytest.approx(n ** (1.0 / p) / n, rel=1e-12)
        assert w < 0.1


class TestKsDistance:
    def test_exact_draws_small(self):
        draws = lp.sample_gen_gaussian(1.5, 10 ** 5, lp.RngStream(ACCEPT_SEED, 3))
        ks = lp.ks_distance(EmpiricalMeasure.from_samples(draws), lp.mu_p(1.5))
        assert ks < 0.006

    def test_point_mass_against_gaussian(self):
        assert lp.ks_distance(EmpiricalMeasure(np.array([0.0])), lp.mu_p(2.0)) == pytest.approx(
            0.5, abs=1e-12
        )

    def test_two_atoms_against_uniform(self):
        m = EmpiricalMeasure(np.array([-1.0, 1.0]))
        assert lp.ks_distance(m, lp.UniformSymmetric(1.0)) == pytest.approx(0.5, abs=1e-12)


class TestInterval:
    def test_validation(self):
        with pytest.raises(ValueError):
            lp.Interval(-0.1, 1.0)
        with pytest.raises(ValueError):
            lp.Interval(1.0, 0.5)

    def test_contains_and_widen(self):
        c = lp.Interval(0.2, 0.4)
        assert c.contains(0.3) and not c.contains(0.5)
        w = c.widened(0.1)
        assert w.lo == pytest.approx(0.1) and w.hi == pytest.approx(0.5)
        assert lp.Interval(0.0, 1.0).widened(0.5).lo == 0.0
