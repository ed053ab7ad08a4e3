import numpy as np
import pytest

import gthermo as gt
from gthermo.errors import ConfigError
from gthermo.geometry import ConstantField, UnitTangent
from gthermo.ergodic import (EnsembleConfig, lyapunov_spectrum, entropy_production,
                             birkhoff_average, agreement, merge_mean_m2)
from gthermo import presets

S0 = UnitTangent(0.1, 0.05, 0.3)


class TestLyapunovSpectrum:
    def test_flat_geodesic_all_zero(self, flat, warm_kernels):
        res = lyapunov_spectrum(flat, gt.geodesic_spec(), S0, T=20000, dt=2e-3,
                                burn_in=0.0)
        assert np.max(np.abs(res.exponents)) < 1e-3

    def test_octagon_geodesic_short(self, octa, warm_kernels):
        res = lyapunov_spectrum(octa, gt.geodesic_spec(), S0, T=500)
        assert np.max(np.abs(res.exponents - np.array([1.0, 0.0, -1.0]))) < 0.05
        assert abs(res.exponent_sum) < 0.02
        assert res.middle_ok
        assert np.all(res.convergence_error < 0.05)

    def test_magnetic_constant_exponents(self, octa, warm_kernels):
        spec = gt.magnetic_spec(ConstantField(0.5))
        res = lyapunov_spectrum(octa, spec, S0, T=500)
        lam = np.sqrt(1 - 0.25)
        assert np.max(np.abs(res.exponents - np.array([lam, 0.0, -lam]))) < 0.05
        assert abs(res.exponent_sum) < 0.02

    def test_history_shape(self, octa, warm_kernels):
        res = lyapunov_spectrum(octa, gt.geodesic_spec(), S0, T=100)
        assert res.history.shape == (100, 3)
        assert res.history_t[-1] == pytest.approx(100.0)


class TestEntropyProduction:
    CFG = EnsembleConfig(n_traj=30, T=200.0, dt=1e-3, burn_in=30.0, seed=5)

    def test_geodesic_zero(self, octa, warm_kernels):
        lya, birk, agree = entropy_production(octa, gt.geodesic_spec(), self.CFG)
        assert birk.mean == 0.0                      # lambda identically zero
        assert abs(lya.mean) <= max(3 * lya.standard_error, 1e-6)
        assert agree.passed

    def test_exact_field_zero_product_positive(self, octa, warm_kernels):
        ex = presets.make_spec(octa, "exact_bump", epsilon=0.3)
        lya, birk, agr = entropy_production(octa, ex, self.CFG)
        assert abs(birk.mean) <= 3 * birk.standard_error
        assert agr.passed
        pr = presets.make_spec(octa, "product_bumps", epsilon=0.3)
        lya2, birk2, agr2 = entropy_production(octa, pr, self.CFG)
        assert birk2.mean > 0
        assert agr2.passed

    def test_ruelle_sign_convention(self, octa, warm_kernels):
        # e = -sum of exponents must come out nonnegative for the dissipative run
        pr = presets.make_spec(octa, "product_bumps", epsilon=0.3)
        lya, _, _ = entropy_production(octa, pr, self.CFG)
        assert lya.mean > -3 * lya.standard_error

    def test_flip_symmetry_gaussian(self, octa, warm_kernels):
        pr = presets.make_spec(octa, "product_bumps", epsilon=0.3)
        _, fwd, _ = entropy_production(octa, pr, self.CFG)
        _, rev, _ = entropy_production(octa, pr, self.CFG, flipped=True)
        sig = np.hypot(fwd.standard_error, rev.standard_error)
        assert abs(fwd.mean - rev.mean) <= 3 * sig

    def test_min_ensemble_enforced(self, octa):
        with pytest.raises(ConfigError):
            entropy_production(octa, gt.geodesic_spec(),
                               EnsembleConfig(n_traj=4, T=10.0))

    def test_exponents_attached(self, octa, warm_kernels):
        lya, _, _ = entropy_production(octa, gt.geodesic_spec(), self.CFG)
        assert lya.exponents.shape == (3,)
        assert abs(lya.exponents[0] - 1.0) < 0.1


class TestBirkhoffAverage:
    CFG = EnsembleConfig(n_traj=30, T=100.0, dt=1e-3, burn_in=20.0, seed=7)

    def test_constant_observable(self, octa):
        est = birkhoff_average(octa, gt.geodesic_spec(), "const1", self.CFG)
        assert est.mean == 1.0 and est.standard_error == 0.0

    def test_cos_phi_equidistributes(self, octa, warm_kernels):
        est = birkhoff_average(octa, gt.geodesic_spec(), "cos_phi", self.CFG)
        assert abs(est.mean) <= 3 * est.standard_error

    def test_theta_v_equals_minus_vlam(self, octa, warm_kernels):
        spec = presets.make_spec(octa, "exact_bump", epsilon=0.3)
        a = birkhoff_average(octa, spec, "theta_v", self.CFG)
        b = birkhoff_average(octa, spec, "vlam", self.CFG)
        assert np.array_equal(a.values, -b.values)   # exact algebraic identity


class TestStatistics:
    def test_agreement_report(self):
        from gthermo.ergodic import EstimatorResult
        a = EstimatorResult(1.0, 0.1, 10, "a")
        b = EstimatorResult(1.2, 0.1, 10, "b")
        rep = agreement(a, b)
        assert rep.z == pytest.approx(np.sqrt(2.0), rel=1e-12)
        assert rep.passed

    def test_merge_mean_m2(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=1000)
        parts = np.split(x, [100, 400, 750])

        def acc(v):
            return (v.size, v.mean(), ((v - v.mean()) ** 2).sum())

        merged_lr = acc(parts[0])
        for p in parts[1:]:
            merged_lr = merge_mean_m2(merged_lr, acc(p))
        merged_tree = merge_mean_m2(merge_mean_m2(acc(parts[0]), acc(parts[1])),
                                    merge_mean_m2(acc(parts[2]), acc(parts[3])))
        for merged in (merged_lr, merged_tree):
            assert merged[0] == 1000
            assert merged[1] == pytest.approx(x.mean(), abs=1e-12)
            assert merged[2] == pytest.approx(((x - x.mean()) ** 2).sum(), rel=1e-12)

    def test_worker_count_independence(self, octa, warm_kernels):
        import numba
        from gthermo import _compile, _kernels
        spec = presets.make_spec(octa, "product_bumps", epsilon=0.3)
        prob = _compile.compile_problem(octa, spec)
        states = gt.sample_liouville(octa, 3, 8)
        old = numba.get_num_threads()
        try:
            numba.set_num_threads(1)
            e1, o1, s1 = _kernels.ensemble_lyap(prob, states, 100, 20, 1000, 1e-3)
            numba.set_num_threads(2)
            e2, o2, s2 = _kernels.ensemble_lyap(prob, states, 100, 20, 1000, 1e-3)
        finally:
            numba.set_num_threads(old)
        assert np.array_equal(e1, e2)
        assert np.array_equal(o1, o2)
