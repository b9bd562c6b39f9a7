import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import polynomial as P

from jacobi_ldp.core import FiniteParams, LimitParams, ScalingFamily, potential_V, potential_VN
from jacobi_ldp.equilibrium import GridMeasure, effective_potential, log_potential
from jacobi_ldp.ldp import (
    GammaEstimate,
    InsufficientStatistics,
    OutlierEstimate,
    QuadratureWarning,
    Region,
    _log_field_integrals,
    estimate_gamma,
    estimate_outlier_probabilities,
    estimate_outlier_probability,
    fit_rate,
    kolmogorov_distance,
    region_inf_veff,
    sandwich_check,
    truncated_field_functional,
)
from jacobi_ldp.sampler import ChainSettings
from oracles import beta2_no_particle_prob, log_gamma_full_exact


def single(kN=1.0, lN=1.0, N=1):
    return ScalingFamily(((N, 1, kN, lN),), LimitParams(1, kN / N, lN / N))


def interval_pairs():
    return st.tuples(st.floats(0, 1), st.floats(0, 1)).map(lambda t: (min(t), max(t)))


class TestRegion:
    def test_normalizes_order(self):
        assert Region(((0.6, 0.7), (0.1, 0.2))).intervals == ((0.1, 0.2), (0.6, 0.7))

    @pytest.mark.parametrize("iv", [((-0.1, 0.2),), ((0.5, 0.4),), ((0.1, 0.5), (0.5, 0.6)), ((0.2, 1.2),)])
    def test_rejects(self, iv):
        with pytest.raises(ValueError):
            Region(iv)

    def test_closed_endpoints(self):
        X = Region(((0.2, 0.4),))
        assert list(X.contains([0.2, 0.4, 0.41])) == [True, True, False]

    @given(interval_pairs(), st.floats(0, 0.5), st.lists(st.floats(0, 1), min_size=1, max_size=30))
    def test_monotone_under_inclusion(self, iv, grow, xs):
        a, b = iv
        small = Region(((a, b),))
        big = Region(((max(0.0, a - grow), min(1.0, b + grow)),))
        rows = np.array(xs)[None, :]
        assert not small.hits(rows)[0] or big.hits(rows)[0]


class TestOutlierEstimate:
    def test_validation(self):
        with pytest.raises(ValueError):
            OutlierEstimate(8, 10, 3, 0.4, 0.1)
        with pytest.raises(ValueError):
            OutlierEstimate(8, 10, 11, 1.1, 0.0)
        with pytest.raises(ValueError):
            OutlierEstimate(8, 0, 0, 0.0, 0.0)

    def test_full_region(self):
        fam = ScalingFamily.exact(LimitParams(1, 1, 1), [8])
        e = estimate_outlier_probability(fam, 8, Region.full(), 500, ChainSettings(seed=1))
        assert e.p_hat == 1.0 and e.hits == 500

    def test_empty_region_does_not_sample(self):
        fam = ScalingFamily.exact(LimitParams(1, 1, 1), [8])
        e = estimate_outlier_probability(fam, 8, Region(), 10 ** 12)
        assert e.p_hat == 0.0 and e.trials == 10 ** 12

    def test_beta_tail(self):
        e = estimate_outlier_probability(single(), 1, Region(((0.9, 1.0),)), 40000, ChainSettings(thinning=3, seed=2))
        assert abs(e.p_hat - 0.028) < 3 * e.std_err

    def test_shared_chain_is_monotone(self):
        fam = ScalingFamily.exact(LimitParams(1, 1, 1), [12])
        regions = [Region(((0.9, 1.0),)), Region(((0.85, 1.0),)), Region(((0.05, 0.1), (0.85, 1.0)))]
        a, b, c = estimate_outlier_probabilities(fam, 12, regions, 3000, ChainSettings(seed=3))
        assert a.hits <= b.hits <= c.hits

    @pytest.mark.parametrize("N, a", [(6, 0.9), (10, 0.93)])
    def test_matches_determinantal_oracle(self, N, a):
        # at beta = 2 the outlier probability is an exact Fredholm determinant
        fam = ScalingFamily.exact(LimitParams(1, 1, 1), [N])
        exact = 1.0 - beta2_no_particle_prob(N, N, N, a, 1.0)
        e = estimate_outlier_probability(fam, N, Region(((a, 1.0),)), 60000, ChainSettings(seed=N, thinning=2))
        assert abs(e.p_hat - exact) < 3.5 * e.std_err


class TestGamma:
    def test_field_integral_is_exact_for_polynomials(self):
        atoms = np.array([0.13, 0.5, 0.71])
        p = FiniteParams(4, 3.0, 2.0)
        poly = P.polymul(P.polypow([0, 1], 3), P.polypow([1, -1], 2))
        for t in atoms:
            poly = P.polymul(poly, P.polypow([-t, 1], 2))
        anti = P.polyint(poly)
        for a, b in [(0.0, 1.0), (0.2, 0.6), (0.9, 1.0)]:
            exact = P.polyval(b, anti) - P.polyval(a, anti)
            (got,) = _log_field_integrals(atoms, p, [Region(((a, b),))], 16)
            # the monomial-basis oracle itself loses ~1e-10 to cancellation
            assert got == pytest.approx(math.log(exact), abs=1e-9)

    def test_full_region_gives_identical_values(self):
        fam = ScalingFamily.exact(LimitParams(1, 1, 1), [8])
        g = estimate_gamma(fam, 8, Region.full(), 50, s=ChainSettings(seed=4))
        assert g.gamma_X == g.gamma_full and g.ratio == 1.0

    @pytest.mark.parametrize("N", [8, 16])
    def test_against_selberg(self, N):
        fam = ScalingFamily.exact(LimitParams(1, 1, 1), [N])
        g = estimate_gamma(fam, N, Region(((0.95, 1.0),)), 4000, s=ChainSettings(seed=5))
        exact = log_gamma_full_exact(N, N, N)
        assert math.isfinite(g.log_gamma_full) and g.gamma_full > 0
        assert abs(g.log_gamma_full - exact) < 4 * g.log_gamma_full_std_err + 1e-9

    def test_coarse_quadrature_warns(self):
        fam = ScalingFamily.exact(LimitParams(1, 1, 1), [32])
        with pytest.warns(QuadratureWarning):
            estimate_gamma(fam, 32, Region(((0.95, 1.0),)), 5, quad_cells=8, s=ChainSettings(burn_in=10))

    def test_needs_two_particles(self):
        with pytest.raises(ValueError):
            estimate_gamma(single(), 1, Region.full(), 5)


class TestSandwich:
    def _gam(self, ratio, se=0.0, n=4):
        return GammaEstimate(8, n, 100, 0.0, 0.0, ratio, se, 0.0)

    def test_pass_and_fail(self):
        est = OutlierEstimate(8, 100, 10, 0.1, 0.0)
        assert sandwich_check(est, self._gam(0.05)).passed
        assert not sandwich_check(est, self._gam(0.2)).lower_ok
        assert not sandwich_check(est, self._gam(0.02)).upper_ok

    def test_bands_absorb_noise(self):
        est = OutlierEstimate(8, 100, 10, 0.1, 0.01)
        assert sandwich_check(est, self._gam(0.12, 0.01)).passed
        assert not sandwich_check(est, self._gam(0.2, 0.01)).passed

    def test_jacobi_run(self):
        fam = ScalingFamily.exact(LimitParams(1, 1, 1), [8])
        X = Region(((0.95, 1.0),))
        e = estimate_outlier_probability(fam, 8, X, 20000, ChainSettings(seed=6))
        g = estimate_gamma(fam, 8, X, 2000, s=ChainSettings(seed=7))
        assert sandwich_check(e, g).passed


class TestTruncatedFieldFunctional:
    @given(st.floats(0, 1), st.floats(1.01, 1e3), st.integers(1, 50), st.floats(0, 20), st.floats(0, 20))
    def test_bound(self, xi, L, n, k, l):
        p = FiniteParams(n, k, l)
        mu = GridMeasure.from_cdf(64, lambda x: x ** 2)
        val = truncated_field_functional(xi, mu, L, p)
        vn = potential_VN(xi, p)
        assert math.isfinite(val)
        assert -val <= -min(vn, L) + 1e-12
        assert -min(vn, L) <= max(0.0, -min(potential_VN(t, p) for t in np.linspace(0, 1, 101))) + 1e-12

    def test_large_L_limit(self):
        p = FiniteParams(10, 3, 5)
        mu = GridMeasure.from_cdf(256, lambda x: x ** 2 * (3 - 2 * x))
        xi = 0.37
        want = potential_VN(xi, p) - 0.9 * log_potential(mu, xi)
        errs = [abs(truncated_field_functional(xi, mu, L, p) - want) for L in (10, 1e2, 1e4, 1e6)]
        assert errs[-1] < 1e-5
        assert all(b <= a for a, b in zip(errs, errs[1:]))

    def test_atoms_match_grid_measure_far_away(self):
        p = FiniteParams(3, 1, 1)
        atoms = np.array([0.1, 0.3])
        # truncation inactive: |xi - eta| > 1/L everywhere
        direct = potential_VN(0.8, p) - (2 / 3) * np.mean(np.log(np.abs(0.8 - atoms)))
        assert truncated_field_functional(0.8, atoms, 5.0, p) == pytest.approx(direct, abs=1e-14)

    def test_uniform_convergence_in_N(self):
        lp = LimitParams(1 / 3, 1.0, 2.0)
        fam = ScalingFamily.exact(lp, [10, 100, 1000, 10000])
        mu = GridMeasure.uniform(128)
        grid = np.linspace(0, 1, 201)
        L = 20.0
        V = np.array([potential_V(t, lp) for t in grid])
        limit = np.minimum(V, L) - _trunc_kernel(grid, mu, L)
        errs = [np.max(np.abs(truncated_field_functional(grid, mu, L, fam.params(N)) - limit)) for N in fam.Ns]
        assert all(b < a for a, b in zip(errs, errs[1:]))
        assert errs[-1] < errs[0] / 100

    def test_rejects_small_L(self):
        with pytest.raises(ValueError):
            truncated_field_functional(0.5, np.array([0.2]), 1.0, FiniteParams(2, 0, 0))


def _trunc_kernel(x, mu, L):
    # with n = 2 and no field the functional is -(1/2) int log(max(|x - y|, 1/L)) dmu
    return -2.0 * truncated_field_functional(x, mu, L, FiniteParams(2, 0, 0))


class TestFitRate:
    def test_synthetic_exact(self, sol111):
        # p_hat = 2^(-N/8) is exactly representable as hits / 2^20
        Ns = [16, 24, 32, 48]
        T = 2 ** 20
        ests = [OutlierEstimate(N, T, 2 ** (20 - N // 8), 2.0 ** (-N // 8), 1e-6) for N in Ns]
        r = fit_rate(ests, Region(((0.99, 1.0),)), sol111)
        assert r.fitted_slope == pytest.approx(-math.log(2) / 8, abs=1e-12)
        assert r.used_N == tuple(Ns)

    def test_insufficient(self, sol111):
        ests = [OutlierEstimate(N, 100, h, h / 100, 0.01) for N, h in [(8, 50), (16, 4), (24, 20), (32, 0)]]
        with pytest.raises(InsufficientStatistics) as info:
            fit_rate(ests, Region(((0.99, 1.0),)), sol111)
        assert info.value.needs_trials == [16, 32]

    def test_region_in_support_has_zero_rate(self, sol111):
        X = Region(((0.4, 0.6),))
        assert region_inf_veff(X, sol111) == 0.0
        ests = [OutlierEstimate(N, 10, 10, 1.0, 0.0) for N in (8, 16, 24)]
        r = fit_rate(ests, X, sol111)
        assert r.theoretical_rate == 0.0

    def test_theoretical_rate_outside_support(self, sol111):
        X = Region(((0.96, 1.0),))
        v = region_inf_veff(X, sol111)
        assert v > 0
        nodes = sol111.nodes[X.contains(sol111.nodes)]
        assert v <= sol111.veff[X.contains(sol111.nodes)].min() + 1e-15
        assert v == pytest.approx(min(sol111.veff[X.contains(sol111.nodes)].min(), effective_potential(0.96, sol111)), abs=1e-15)
        assert nodes.size > 0


class TestKolmogorov:
    def test_uniform_atoms(self):
        mu = GridMeasure.uniform(100)
        assert kolmogorov_distance([0.5], mu) == pytest.approx(0.5)
        x = (np.arange(10) + 0.5) / 10
        assert kolmogorov_distance(x, mu) == pytest.approx(0.05)
