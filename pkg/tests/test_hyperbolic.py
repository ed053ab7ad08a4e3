import numpy as np
import pytest

import gthermo as gt
from gthermo.errors import DomainError, PreconditionError
from gthermo.geometry import UnitTangent
from gthermo.hyperbolic import MobiusMap, apply_to_state, transport_tangent


def random_disk_states(rng, n, dmax=2.0):
    d = rng.uniform(0, dmax, n)
    th = rng.uniform(0, 2 * np.pi, n)
    r = np.tanh(d / 2)
    return np.stack([r * np.cos(th), r * np.sin(th), rng.uniform(0, 2 * np.pi, n)],
                    axis=1)


class TestOctagonGroup:
    def test_vertex_radius(self, group):
        assert abs(group.vertex_radius - 2 ** -0.25) < 1e-12

    def test_generators_normalized(self, group):
        for g in group.generators:
            assert abs(abs(g.a) ** 2 - abs(g.b) ** 2 - 1.0) < 1e-12

    def test_opposite_pairings_are_inverse(self, group):
        for k in range(8):
            comp = group.generators[k].compose(group.generators[(k + 4) % 8])
            assert comp.is_identity(1e-12)

    def test_side_pairing_endpoints(self, group):
        V = group.vertices
        for k in range(8):
            g = group.generators[k]
            assert abs(g(V[(k - 1) % 8]) - V[(k + 4) % 8]) < 1e-10
            assert abs(g(V[k]) - V[(k + 3) % 8]) < 1e-10

    def test_relation_composes_to_identity(self, group):
        m = group.word_map(group.relation_word)
        assert m.is_identity(1e-8)

    def test_interior_angles(self, group):
        for k in range(8):
            p = group.vertices[k]
            t1 = 1j * (p - group.side_centers[k])
            t2 = 1j * (p - group.side_centers[(k + 1) % 8])
            c = abs((t1 * np.conj(t2)).real) / (abs(t1) * abs(t2))
            assert abs(np.arccos(np.clip(c, -1, 1)) - np.pi / 4) < 1e-10

    def test_maps_disk_to_disk(self, group):
        rng = np.random.default_rng(1)
        z = rng.uniform(-0.7, 0.7, 50) + 1j * rng.uniform(-0.7, 0.7, 50)
        for g in group.generators:
            assert np.all(np.abs(g(z)) < 1.0)


class TestReduce:
    def test_already_inside(self, group):
        s = UnitTangent(0.1, 0.05, 1.0)
        red, word = group.reduce(s)
        assert word == []
        assert red == s

    def test_single_generator_roundtrip(self, group):
        s = UnitTangent(0.2, 0.1, 0.7)
        moved = apply_to_state(group.generators[1], s)
        red, word = group.reduce(moved)
        assert word == [5]  # g_1^{-1} = g_5
        assert np.allclose(red.as_array(), s.as_array(), atol=1e-12)

    def test_roundtrip_within_distance_6(self, group):
        rng = np.random.default_rng(9)
        for row in random_disk_states(rng, 300, dmax=6.0):
            s = UnitTangent(*row)
            red, word = group.reduce(s)
            back = group.unreduce(red, word)
            err = np.hypot(back.x - s.x, back.y - s.y)
            dphi = abs((back.phi - s.phi + np.pi) % (2 * np.pi) - np.pi)
            assert err + dphi < 1e-9

    def test_idempotent(self, group):
        rng = np.random.default_rng(10)
        for row in random_disk_states(rng, 100, dmax=4.0):
            red, _ = group.reduce(UnitTangent(*row))
            red2, word2 = group.reduce(red)
            assert word2 == []

    def test_outside_disk(self, group):
        with pytest.raises(DomainError):
            group.reduce(UnitTangent(1.2, 0.0, 0.0))


class TestTransport:
    def test_identity_map(self, group):
        s = UnitTangent(0.2, -0.1, 0.4)
        xi = np.array([0.3, -0.7, 1.1])
        out = transport_tangent(MobiusMap.identity(), s, xi)
        assert np.allclose(out, xi, atol=1e-15)

    def test_rotation_about_origin(self):
        alpha = 0.8
        m = MobiusMap.rotation(alpha)
        s = UnitTangent(0.0, 0.0, 0.3)
        xi = np.array([0.5, 0.2, 0.9])
        out = transport_tangent(m, s, xi)
        R = np.array([[np.cos(alpha), -np.sin(alpha)], [np.sin(alpha), np.cos(alpha)]])
        assert np.allclose(out[:2], R @ xi[:2], atol=1e-14)
        assert abs(out[2] - xi[2]) < 1e-14

    def test_linear(self, group):
        m = group.generators[2]
        s = UnitTangent(0.1, 0.2, 0.5)
        a = transport_tangent(m, s, [1.0, 0.0, 0.0])
        b = transport_tangent(m, s, [0.0, 2.0, -1.0])
        ab = transport_tangent(m, s, [1.0, 2.0, -1.0])
        assert np.allclose(a + b, ab, atol=1e-14)

    def test_functorial(self, group):
        rng = np.random.default_rng(2)
        m1, m2 = group.generators[1], group.generators[6]
        for row in random_disk_states(rng, 100):
            s = UnitTangent(*row)
            xi = rng.normal(size=3)
            via = transport_tangent(m2, apply_to_state(m1, s),
                                    transport_tangent(m1, s, xi))
            direct = transport_tangent(m2.compose(m1), s, xi)
            assert np.max(np.abs(via - direct)) < 1e-10

    def test_sasaki_norm_preserved(self, group, octa):
        rng = np.random.default_rng(3)
        for row in random_disk_states(rng, 100, dmax=2.5):
            s = UnitTangent(*row)
            xi = rng.normal(size=3)
            m = group.generators[rng.integers(0, 8)]
            B0 = gt.frame_at(octa, s).basis()
            s1 = apply_to_state(m, s)
            B1 = gt.frame_at(octa, s1).basis()
            c0 = np.linalg.solve(B0, xi)
            c1 = np.linalg.solve(B1, transport_tangent(m, s, xi))
            assert abs(np.linalg.norm(c0) - np.linalg.norm(c1)) < 1e-8


class TestInvariantBump:
    def test_center_value_is_amplitude(self, group):
        W = gt.invariant_bump(group, 0.18 + 0.1j, 1.1, 0.7)
        assert abs(W.value(0.18, 0.1) - 0.7) < 1e-14

    def test_invariance_under_generators(self, group):
        W = gt.invariant_bump(group, 0.18 + 0.1j, 1.1, 1.0)
        rng = np.random.default_rng(4)
        pts = random_disk_states(rng, 1000, dmax=2.0)
        zx, zy = pts[:, 0], pts[:, 1]
        for g in group.generators:
            zz = g(zx + 1j * zy)
            diff = W.value(zz.real, zz.imag) - W.value(zx, zy)
            assert np.max(np.abs(diff)) < 1e-10

    def test_zero_outside_orbit_balls(self, group):
        W = gt.invariant_bump(group, 0.0 + 0.0j, 0.8, 1.0)
        # side midpoint direction, hyperbolic distance 1.3 from center: outside
        z = np.tanh(1.3 / 2)
        assert W.value(z, 0.0) == 0.0

    def test_partials_match_fd(self, group):
        # h balances trig truncation (grows like the conformal factor cubed
        # near the boundary) against roundoff
        W = gt.invariant_bump(group, 0.15 + 0.1j, 1.3, 0.5)
        rng = np.random.default_rng(6)
        pts = random_disk_states(rng, 300, dmax=2.2)
        x, y = pts[:, 0], pts[:, 1]
        h = 5e-6
        gx, gy = W.grad(x, y)
        fdx = (W.value(x + h, y) - W.value(x - h, y)) / (2 * h)
        fdy = (W.value(x, y + h) - W.value(x, y - h)) / (2 * h)
        assert np.max(np.abs(gx - fdx)) < 1e-6
        assert np.max(np.abs(gy - fdy)) < 1e-6
        hxx, hxy, hyy = W.hess(x, y)
        fdxx = (W.grad(x + h, y)[0] - W.grad(x - h, y)[0]) / (2 * h)
        fdxy = (W.grad(x, y + h)[0] - W.grad(x, y - h)[0]) / (2 * h)
        fdyy = (W.grad(x, y + h)[1] - W.grad(x, y - h)[1]) / (2 * h)
        assert np.max(np.abs(hxx - fdxx) / (1 + np.abs(hxx))) < 1e-6
        assert np.max(np.abs(hxy - fdxy) / (1 + np.abs(hxy))) < 1e-6
        assert np.max(np.abs(hyy - fdyy) / (1 + np.abs(hyy))) < 1e-6

    def test_overlap_precondition(self, group):
        with pytest.raises(PreconditionError):
            gt.invariant_bump(group, 0.1 + 0.0j, 1.6, 1.0)

    def test_truncation_precondition(self, group):
        with pytest.raises(PreconditionError):
            gt.invariant_bump(group, 0.1 + 0.0j, 1.3, 1.0, truncation=0)


class TestGeodesicCompatibility:
    def test_chord_after_unreduce(self, octa, group, warm_kernels):
        # geodesic of hyperbolic length 3 from the origin, with reductions;
        # pulled back by the inverse word it must sit on the diameter
        from gthermo.dynamics import FlowState, step
        phi0 = 0.7
        st = FlowState(s=UnitTangent(0.0, 0.0, phi0))
        spec = gt.geodesic_spec()
        dt = 1e-3
        for _ in range(3000):
            st = step(octa, spec, st, dt)
        back = group.unreduce(st.s, st.word_log)
        z = complex(back.x, back.y)
        transverse = abs((z * np.exp(-1j * phi0)).imag)
        assert transverse < 1e-6
        assert abs(2 * np.arctanh(abs(z)) - 3.0) < 1e-6
