import numpy as np
import pytest

import gthermo as gt
from gthermo.errors import ConfigError, DomainError
from gthermo.geometry import ConstantField, UnitTangent, frame_components

from conftest import random_states


def g_norm(surface, x, y, vec2):
    f = surface.f.value(x, y)
    return np.exp(f) * np.hypot(vec2[0], vec2[1])


class TestFrame:
    def test_flat_torus_axis_examples(self, flat):
        fr = gt.frame_at(flat, UnitTangent(0, 0, 0))
        assert np.allclose(fr.X, [1, 0, 0])
        assert np.allclose(fr.H, [0, 1, 0])
        assert np.allclose(fr.V, [0, 0, 1])
        fr = gt.frame_at(flat, UnitTangent(0, 0, np.pi / 2))
        assert np.allclose(fr.X, [0, 1, 0], atol=1e-15)
        assert np.allclose(fr.H, [-1, 0, 0], atol=1e-15)

    def test_disk_origin(self, octa):
        for phi in (0.0, 1.0, 2.5):
            fr = gt.frame_at(octa, UnitTangent(0, 0, phi))
            assert np.allclose(fr.X, [np.cos(phi) / 2, np.sin(phi) / 2, 0], atol=1e-14)

    def test_orthonormality_analytic(self, trig, octa):
        for surf in (trig, octa):
            states = random_states(surf, 200, seed=3)
            for x, y, phi in states:
                fr = gt.frame_at(surf, UnitTangent(x, y, phi))
                assert abs(g_norm(surf, x, y, fr.X) - 1) < 1e-12
                assert abs(g_norm(surf, x, y, fr.H) - 1) < 1e-12
                # orientation (v, iv) positive
                cross = fr.X[0] * fr.H[1] - fr.X[1] * fr.H[0]
                assert cross > 0

    def test_vertical_field(self, trig):
        X, H, V = frame_components(trig, 0.3, 0.4, 1.0)
        assert np.allclose(V, [0, 0, 1])

    def test_domain_error(self, octa):
        with pytest.raises(DomainError):
            gt.frame_at(octa, UnitTangent(0.8, 0.7, 0.0))


class TestCurvature:
    def test_flat(self, flat):
        assert gt.curvature(flat, 1.0, 2.0) == 0.0

    def test_constant_conformal(self):
        surf = gt.ConformalSurface("torus", ConstantField(0.7), Lx=2 * np.pi,
                                   Ly=2 * np.pi, sup_e2f=float(np.exp(1.4)))
        assert abs(gt.curvature(surf, 0.3, 0.8)) < 1e-15

    def test_disk_minus_one(self, octa):
        rng = np.random.default_rng(5)
        for _ in range(50):
            r, th = rng.uniform(0, 0.95), rng.uniform(0, 2 * np.pi)
            K = gt.curvature(octa, r * np.cos(th), r * np.sin(th))
            assert abs(K + 1.0) < 1e-11

    def test_consistency_with_bracket(self, octa, trig):
        # V-component of FD [X,H] over K equals 1 where |K| > 0.1
        from gthermo.geometry import _fd_bracket
        for surf in (octa, trig):
            states = random_states(surf, 100, seed=11)
            for x, y, phi in states:
                K = gt.curvature(surf, x, y)
                if abs(K) <= 0.1:
                    continue
                br = _fd_bracket(surf, "X", "H", np.float64(x), np.float64(y),
                                 np.float64(phi), 1e-4)
                assert abs(br[2] / K - 1.0) < 1e-4


class TestBrackets:
    def test_flat_tight(self, flat):
        # central-difference truncation of the trig frame components floors
        # the flat-chart residual at h^2/6 ~ 1.7e-9
        r = gt.bracket_residuals(flat, UnitTangent(1.0, 2.0, 0.7), h=1e-4)
        assert max(r) < 1e-8

    def test_disk_point(self, octa):
        r = gt.bracket_residuals(octa, UnitTangent(0.3, 0.1, 1.0), h=1e-4)
        assert max(r) < 1e-6

    @pytest.mark.parametrize("which", ["flat", "trig", "octagon"])
    def test_property_1000_states(self, which, flat, trig, octa):
        surf = {"flat": flat, "trig": trig, "octagon": octa}[which]
        states = random_states(surf, 1000, seed=42)
        worst = 0.0
        for x, y, phi in states:
            worst = max(worst, max(gt.bracket_residuals(surf, UnitTangent(x, y, phi))))
        assert worst < 1e-5

    def test_interior_precondition(self, octa):
        with pytest.raises(DomainError):
            gt.bracket_residuals(octa, UnitTangent(0.9999, 0.0, 0.0))


class TestSurfaceInvariants:
    def test_periodicity_at_identified_points(self, trig):
        rng = np.random.default_rng(8)
        xs = rng.uniform(0, trig.Lx, 64)
        ys = rng.uniform(0, trig.Ly, 64)
        for shift in ((trig.Lx, 0.0), (0.0, trig.Ly), (trig.Lx, trig.Ly)):
            a = trig.f.value(xs, ys)
            b = trig.f.value(xs + shift[0], ys + shift[1])
            assert np.max(np.abs(a - b)) < 1e-12 * (1 + np.max(np.abs(a)))
            ga = np.stack(trig.f.grad(xs, ys))
            gb = np.stack(trig.f.grad(xs + shift[0], ys + shift[1]))
            assert np.max(np.abs(ga - gb)) < 1e-12

    def test_disk_conformal_exact(self, octa):
        x, y = 0.3, -0.2
        assert abs(octa.f.value(x, y) - np.log(2 / (1 - x * x - y * y))) < 1e-15

    @pytest.mark.parametrize("which", ["trig", "octagon"])
    def test_partials_match_fd(self, which, trig, octa):
        surf = {"trig": trig, "octagon": octa}[which]
        rng = np.random.default_rng(17)
        if surf.is_torus:
            xs = rng.uniform(0, surf.Lx, 200)
            ys = rng.uniform(0, surf.Ly, 200)
        else:
            r = rng.uniform(0, 0.8, 200)
            th = rng.uniform(0, 2 * np.pi, 200)
            xs, ys = r * np.cos(th), r * np.sin(th)
        h = 1e-5
        fx, fy = surf.f.grad(xs, ys)
        fdx = (surf.f.value(xs + h, ys) - surf.f.value(xs - h, ys)) / (2 * h)
        fdy = (surf.f.value(xs, ys + h) - surf.f.value(xs, ys - h)) / (2 * h)
        scale = 1 + np.abs(fx) + np.abs(fy)
        assert np.max(np.abs(fx - fdx) / scale) < 1e-6
        assert np.max(np.abs(fy - fdy) / scale) < 1e-6
        fxx, fxy, fyy = surf.f.hess(xs, ys)
        fdxx = (surf.f.grad(xs + h, ys)[0] - surf.f.grad(xs - h, ys)[0]) / (2 * h)
        fdxy = (surf.f.grad(xs, ys + h)[0] - surf.f.grad(xs, ys - h)[0]) / (2 * h)
        fdyy = (surf.f.grad(xs, ys + h)[1] - surf.f.grad(xs, ys - h)[1]) / (2 * h)
        scale2 = 1 + np.abs(fxx) + np.abs(fyy)
        assert np.max(np.abs(fxx - fdxx) / scale2) < 1e-5
        assert np.max(np.abs(fxy - fdxy) / scale2) < 1e-5
        assert np.max(np.abs(fyy - fdyy) / scale2) < 1e-5


class TestLiouvilleSampler:
    def test_flat_angle_and_base_means(self, flat):
        pts = gt.sample_liouville(flat, 123, 1_000_000)
        m = np.cos(pts[:, 2]).mean()
        assert abs(m) < 3.0 / np.sqrt(1e6)
        se_x = flat.Lx / np.sqrt(12.0) / np.sqrt(1e6)
        assert abs(pts[:, 0].mean() - flat.Lx / 2) < 3 * se_x

    def test_deterministic_per_seed(self, octa):
        a = gt.sample_liouville(octa, 7, 1000)
        b = gt.sample_liouville(octa, 7, 1000)
        assert np.array_equal(a, b)
        c = gt.sample_liouville(octa, 8, 1000)
        assert not np.array_equal(a, c)

    def test_octagon_support(self, octa):
        pts = gt.sample_liouville(octa, 3, 20000)
        assert np.all(octa.group.contains(pts[:, 0], pts[:, 1], slack=-1e-12))

    def test_trig_quadrature_oracle(self, trig):
        # MC mean of a test function vs midpoint quadrature against e^{2f}
        n = 400_000
        pts = gt.sample_liouville(trig, 99, n)
        gvals = np.sin(pts[:, 0]) * np.cos(pts[:, 1]) + 0.3 * np.cos(pts[:, 2]) ** 2
        mc = gvals.mean()
        se = gvals.std(ddof=1) / np.sqrt(n)
        k = 64
        xs = (np.arange(k) + 0.5) * trig.Lx / k
        ys = (np.arange(k) + 0.5) * trig.Ly / k
        ph = (np.arange(k) + 0.5) * 2 * np.pi / k
        X, Y, P = np.meshgrid(xs, ys, ph, indexing="ij")
        w = np.exp(2 * trig.f.value(X, Y))
        g = np.sin(X) * np.cos(Y) + 0.3 * np.cos(P) ** 2
        quad = (g * w).sum() / w.sum()
        assert abs(mc - quad) < 3 * se

    def test_chi_square_gof(self, flat):
        from scipy.stats import chi2
        pts = gt.sample_liouville(flat, 2718, 1_000_000)
        H, _ = np.histogramdd(pts, bins=(8, 8, 8),
                              range=((0, flat.Lx), (0, flat.Ly), (0, 2 * np.pi)))
        exp = 1e6 / 512
        stat = ((H - exp) ** 2 / exp).sum()
        assert stat < chi2.ppf(0.999, 511)

    def test_n_validation(self, flat):
        with pytest.raises(ConfigError):
            gt.sample_liouville(flat, 1, 0)


class TestUnitTangent:
    def test_phi_wrap(self):
        s = UnitTangent(0.0, 0.0, 7.0)
        assert 0.0 <= s.phi < 2 * np.pi
        assert abs(s.phi - (7.0 - 2 * np.pi)) < 1e-15

    def test_flip(self):
        s = UnitTangent(0.1, 0.2, 0.5)
        assert abs(s.flipped().phi - (0.5 + np.pi)) < 1e-15
