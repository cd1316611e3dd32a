import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from lbmreg import core, lbm, postprocess
from lbmreg.exceptions import BoundaryError, ConditioningError, DimensionError, DomainError, WindowError

KERNEL_NAMES = sorted(postprocess.KERNELS)


def _fit(z, d=1):
    z = np.asarray(z, dtype=float)
    m = int(round(z.size ** (1 / d)))
    return lbm.LbmFit(lbm.BinningSpec(m, d, 1), z, np.ones(z.size, dtype=int))


def _fit_from(f, m, d):
    anchors = (np.indices((m,) * d).reshape(d, -1).T + 1) / m
    return _fit(f(anchors), d)


class TestKernels:
    @pytest.mark.parametrize("name", KERNEL_NAMES)
    def test_support_and_mass(self, name):
        k = postprocess.get_kernel(name)
        assert k.antideriv(np.array(-1.0)) == 0 and k.antideriv(np.array(1.0)) == 1
        assert k.eval(np.array([-1.5, 1.5])).tolist() == [0, 0]
        mass, _ = integrate.quad(lambda u: float(k.eval(np.array(u))), -1, 1)
        assert mass == pytest.approx(1, abs=1e-8)

    @pytest.mark.parametrize("name,energy", [("box", 0.5), ("triangular", 2 / 3), ("epanechnikov", 0.6)])
    def test_moments_and_energy(self, name, energy):
        k = postprocess.get_kernel(name)
        first, _ = integrate.quad(lambda u: float(k.eval(np.array(u))) * u, -1, 1)
        sq, _ = integrate.quad(lambda u: float(k.eval(np.array(u))) ** 2, -1, 1)
        assert abs(first) <= 1e-8
        assert sq == pytest.approx(energy, abs=1e-8) and k.energy == pytest.approx(energy)
        assert k.moment_order == 1

    @pytest.mark.parametrize("name", KERNEL_NAMES)
    def test_antiderivative_matches_quadrature(self, name):
        k = postprocess.get_kernel(name)
        for u in np.linspace(-1, 1, 9):
            val, _ = integrate.quad(lambda t: float(k.eval(np.array(t))), -1, u)
            assert float(k.antideriv(np.array(u))) == pytest.approx(val, abs=1e-10)

    def test_custom_kernel_measured(self):
        # biweight: order 1, energy 5/7
        ev = lambda u: np.clip(15 / 16 * (1 - u**2) ** 2, 0, None) * (np.abs(u) <= 1)  # noqa: E731
        k = postprocess.custom_kernel(ev, lambda u: u)
        assert k.moment_order == 1
        assert k.energy == pytest.approx(5 / 7)

    def test_custom_kernel_unnormalised(self):
        with pytest.raises(DomainError):
            postprocess.custom_kernel(lambda u: np.ones_like(u), lambda u: u)

    def test_unknown(self):
        with pytest.raises(DomainError):
            postprocess.get_kernel("gaussian")


class TestWeights:
    def test_box_example(self):
        assert postprocess.kernel_weight(5, 10, 0.3, 0.5, postprocess.box_kernel()) == pytest.approx(1 / 6)

    def test_outside_window_is_zero(self):
        assert postprocess.kernel_weight(1, 10, 0.1, 0.6, postprocess.triangular_kernel()) == 0

    @pytest.mark.parametrize("x", [0.1, 0.9, 0.05])
    def test_boundary(self, x):
        with pytest.raises(BoundaryError):
            postprocess.kernel_weight(3, 10, 0.1, x, postprocess.box_kernel())

    def test_bad_bin_or_bandwidth(self):
        with pytest.raises(DomainError):
            postprocess.kernel_weight(0, 10, 0.1, 0.5, postprocess.box_kernel())
        with pytest.raises(DomainError):
            postprocess.kernel_weights(10, 0.5, 0.5, postprocess.box_kernel())

    @pytest.mark.parametrize("name", KERNEL_NAMES)
    @settings(max_examples=50)
    @given(m=st.integers(1, 300), h=st.floats(0.01, 0.49), u=st.floats(0.001, 0.999))
    def test_sum_to_one(self, name, m, h, u):
        x = h + u * (1 - 2 * h)
        w = postprocess.kernel_weights(m, h, x, postprocess.get_kernel(name))
        assert abs(w.sum() - 1) <= 1e-10

    @pytest.mark.parametrize("name", KERNEL_NAMES)
    def test_window_weights_match_dense(self, name):
        k = postprocess.get_kernel(name)
        m, h = 57, 0.1
        xs = np.linspace(0.11, 0.89, 41)
        cells, w = postprocess.window_weights(m, h, xs, k)
        for row, x in enumerate(xs):
            dense = np.zeros(m)
            np.add.at(dense, cells[row], w[row])
            np.testing.assert_allclose(dense, postprocess.kernel_weights(m, h, x, k), atol=1e-15)

    def test_single_weight_matches_vector(self):
        k = postprocess.epanechnikov_kernel()
        w = postprocess.kernel_weights(20, 0.2, 0.37, k)
        for j in range(1, 21):
            assert postprocess.kernel_weight(j, 20, 0.2, 0.37, k) == pytest.approx(w[j - 1], abs=1e-15)


class TestKernelSmoothing:
    def _plan(self, m, h, c=None):
        return postprocess.BandwidthPlan(h=h, m=m, interior_margin=h if c is None else c)

    def test_constant_medians(self):
        fit = _fit(np.full(50, 7.0))
        xs = np.linspace(0.2, 0.8, 13)
        out = postprocess.ks_predict_many(fit, self._plan(50, 0.2), postprocess.box_kernel(), xs)
        np.testing.assert_allclose(out, 7.0, rtol=1e-14)

    def test_linear_medians(self):
        m, h = 200, 0.1
        fit = _fit(np.arange(1, m + 1) / m)
        for x0 in np.linspace(0.1, 0.9, 33):
            val = postprocess.ks_predict(fit, self._plan(m, h), postprocess.triangular_kernel(), x0)
            assert abs(val - x0) <= 1 / m + h**2

    def test_far_perturbation_is_invisible(self):
        m, h, x0 = 100, 0.05, 0.5
        z = np.random.default_rng(0).normal(size=m)
        before = postprocess.ks_predict(_fit(z), self._plan(m, h), postprocess.triangular_kernel(), x0)
        z[80] += 100
        after = postprocess.ks_predict(_fit(z), self._plan(m, h), postprocess.triangular_kernel(), x0)
        assert before == after

    def test_interior_enforced(self):
        with pytest.raises(BoundaryError):
            postprocess.ks_predict(_fit(np.zeros(10)), self._plan(10, 0.1, 0.2), postprocess.box_kernel(), 0.15)

    def test_two_dimensional_refused(self):
        with pytest.raises(DimensionError):
            postprocess.ks_predict(_fit(np.zeros(16), 2), self._plan(4, 0.3), postprocess.box_kernel(), 0.5)

    def test_plan_mismatch(self):
        with pytest.raises(DomainError):
            postprocess.ks_predict(_fit(np.zeros(10)), self._plan(20, 0.3), postprocess.box_kernel(), 0.5)

    def test_plan_validation(self):
        with pytest.raises(DomainError):
            postprocess.BandwidthPlan(h=0.2, m=10, interior_margin=0.1)
        with pytest.raises(DomainError):
            postprocess.BandwidthPlan(h=0.6, m=10, interior_margin=0.6)

    def test_bias_transfer(self):
        rng = np.random.default_rng(1)
        m, h, b = 80, 0.1, 0.3
        z = rng.normal(size=m)
        shift = rng.uniform(-b, b, m)
        k = postprocess.triangular_kernel()
        xs = np.linspace(0.1, 0.9, 50)
        a0 = postprocess.ks_predict_many(_fit(z), self._plan(m, h), k, xs)
        a1 = postprocess.ks_predict_many(_fit(z + shift), self._plan(m, h), k, xs)
        _, w = postprocess.window_weights(m, h, xs, k)
        assert np.all(np.abs(a1 - a0) <= np.abs(w).sum(axis=1) * b + 1e-12)


class TestFeatures:
    def test_at_centre(self):
        basis = postprocess.PolyBasis(3, 2)
        psi = postprocess.poly_features(basis, [0.3, 0.6], 0.1, [0.3, 0.6])
        assert psi[0] == 1 and np.all(psi[1:] == 0) and psi.size == basis.D

    def test_powers(self):
        psi = postprocess.poly_features(postprocess.PolyBasis(2, 1), [0.0], 1.0, [0.5])
        np.testing.assert_array_equal(psi, [1.0, 0.5, 0.25])

    @pytest.mark.parametrize("ell,d,D", [(2, 2, 7), (0, 3, 1), (3, 1, 4), (2, 3, 13)])
    def test_dimension(self, ell, d, D):
        basis = postprocess.PolyBasis(ell, d)
        assert basis.D == D == len(basis.index_tuples())

    def test_lexicographic_tensor_block(self):
        psi = postprocess.poly_features(postprocess.PolyBasis(2, 2), [0, 0], 1.0, [2.0, 3.0])
        np.testing.assert_array_equal(psi, [1, 2, 3, 4, 6, 6, 9])

    def test_batch(self):
        basis = postprocess.PolyBasis(2, 2)
        z = np.random.default_rng(0).random((5, 2))
        batch = postprocess.poly_features(basis, [0.5, 0.5], 0.2, z)
        for i in range(5):
            np.testing.assert_array_equal(batch[i], postprocess.poly_features(basis, [0.5, 0.5], 0.2, z[i]))

    def test_invalid_basis(self):
        with pytest.raises(DomainError):
            postprocess.PolyBasis(-1, 1)


class TestLocalPolynomial:
    def test_linear_example(self):
        fit = _fit_from(lambda x: 2 * x[:, 0] + 1, 10, 1)
        assert postprocess.lpr_predict(fit, 0.35, postprocess.PolyBasis(1, 1), [0.5]) == pytest.approx(2.0, abs=1e-12)

    def test_degree_zero_is_window_mean(self):
        z = np.random.default_rng(2).normal(size=50)
        fit = _fit(z)
        labels, _ = postprocess.lattice_window(50, 1, np.array([0.4]), 0.1)
        val = postprocess.lpr_predict(fit, 0.1, postprocess.PolyBasis(0, 1), [0.4])
        assert val == pytest.approx(z[labels].mean(), abs=1e-12)

    @pytest.mark.parametrize("d,ell", [(1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2)])
    def test_reproduces_polynomials(self, d, ell):
        rng = np.random.default_rng(10 * d + ell)
        m = 50 if d == 1 else 20
        terms = {e: rng.normal() for e in np.ndindex(*(ell + 1,) * d) if sum(e) <= ell}
        f = core.polynomial(terms, dim=d)
        fit = _fit_from(f, m, d)
        basis = postprocess.PolyBasis(ell, d)
        for x0 in rng.uniform(0.2, 0.8, (20, d)):
            assert abs(postprocess.lpr_predict(fit, 0.15, basis, x0) - f(x0[None, :])[0]) <= 1e-8

    def test_boundary_windows_truncate(self):
        f = core.polynomial([1.0, -2.0, 0.5])
        fit = _fit_from(f, 40, 1)
        for x0 in (0.0, 0.01, 1.0):
            val = postprocess.lpr_predict(fit, 0.1, postprocess.PolyBasis(2, 1), [x0])
            assert val == pytest.approx(f(np.array([[x0]]))[0], abs=1e-8)

    def test_too_few_bins(self):
        with pytest.raises(WindowError):
            postprocess.lpr_predict(_fit(np.zeros(10)), 0.05, postprocess.PolyBasis(1, 1), [0.52])

    def test_degenerate_window(self):
        # a 3 x 1 slab of anchors cannot pin down a plane
        with pytest.raises(ConditioningError):
            postprocess.lpr_predict(_fit(np.zeros(100), 2), 0.15, postprocess.PolyBasis(1, 2), [0.5, 0.0])

    def test_far_perturbation_is_invisible(self):
        z = np.random.default_rng(3).normal(size=400)
        basis = postprocess.PolyBasis(1, 2)
        before = postprocess.lpr_predict(_fit(z, 2), 0.12, basis, [0.5, 0.5])
        z[0] += 1e6
        assert postprocess.lpr_predict(_fit(z, 2), 0.12, basis, [0.5, 0.5]) == before

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            postprocess.lpr_predict(_fit(np.zeros(10)), 0.2, postprocess.PolyBasis(1, 2), [0.5, 0.5])

    def test_many_matches_single(self):
        fit = _fit(np.random.default_rng(4).normal(size=30))
        basis = postprocess.PolyBasis(2, 1)
        xs = np.linspace(0.1, 0.9, 7)
        many = postprocess.lpr_predict_many(fit, 0.2, basis, xs)
        np.testing.assert_array_equal(many, [postprocess.lpr_predict(fit, 0.2, basis, [x]) for x in xs])


class TestWeightNorm:
    def test_degree_zero_is_one(self):
        spec = lbm.BinningSpec(30, 1, 1)
        assert postprocess.lpr_weight_l1_norm(spec, 0.1, postprocess.PolyBasis(0, 1), [0.5]) == pytest.approx(1.0)

    def test_linear_bounded(self):
        spec = lbm.BinningSpec(100, 1, 1)
        norms = [postprocess.lpr_weight_l1_norm(spec, 0.1, postprocess.PolyBasis(1, 1), [x])
                 for x in np.linspace(0.2, 0.8, 61)]
        assert max(norms) <= 4

    @pytest.mark.parametrize("d,ell", [(1, 1), (1, 2), (2, 1), (2, 2)])
    def test_weights_sum_to_one(self, d, ell):
        spec = lbm.BinningSpec(30 if d == 1 else 15, d, 1)
        _, w = postprocess.lpr_weights(spec, 0.2, postprocess.PolyBasis(ell, d), np.full(d, 0.37))
        assert abs(w.sum() - 1) <= 1e-10

    def test_bias_transfer(self):
        rng = np.random.default_rng(5)
        z = rng.normal(size=225)
        shift = rng.uniform(-0.5, 0.5, 225)
        basis = postprocess.PolyBasis(2, 2)
        for x0 in rng.uniform(0.1, 0.9, (10, 2)):
            a0 = postprocess.lpr_predict(_fit(z, 2), 0.2, basis, x0)
            a1 = postprocess.lpr_predict(_fit(z + shift, 2), 0.2, basis, x0)
            bound = postprocess.lpr_weight_l1_norm(_fit(z, 2), 0.2, basis, x0) * 0.5
            assert abs(a1 - a0) <= bound + 1e-12


class TestTuning:
    def test_examples(self):
        assert postprocess.choose_postprocess_params(10**4, 1.5, 1.0, 1) == (57, pytest.approx(0.1))

    def test_h_above_one_over_m(self):
        m, h = postprocess.choose_postprocess_params(10**4, 1.5, 1000.0, 1)
        assert h > 1 / m and h < 0.5

    def test_h_below_half(self):
        _, h = postprocess.choose_postprocess_params(16, 1.5, 0.01, 1)
        assert h < 0.5

    def test_m_clamped_to_p(self):
        m, _ = postprocess.choose_postprocess_params(4096, 2.0, 1.0, 2)
        assert m <= 64

    def test_occupancy(self):
        m, _ = postprocess.choose_postprocess_params(4096, 2.0, 1.0, 2, occupancy=8)
        assert m == lbm.occupancy_cap(4096, 2)
