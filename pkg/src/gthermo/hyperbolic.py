"""Genus-2 hyperbolic surface as the regular-octagon quotient of the disk.

Disk isometries are the SU(1,1) maps z -> (a z + b)/(conj(b) z + conj(a)),
|a|^2 - |b|^2 = 1.  The fundamental domain is the regular hyperbolic octagon
centered at the origin with interior angles pi/4; opposite sides are paired by
hyperbolic translations along the axes through the side midpoints
(translation length 2*arccosh(1+sqrt(2))).  Group-invariant scalar fields are
finite Poincare series of compactly supported bumps.
"""

import numpy as np

from .errors import PreconditionError, ReductionDivergenceError, DomainError
from .geometry import ScalarField, UnitTangent, bump_profile, DiskLogFactor, ConformalSurface

SQRT2 = np.sqrt(2.0)
# center-to-side and center-to-vertex data of the regular octagon
COSH_SIDE_DIST = 1.0 + SQRT2                  # cosh d, d = distance to side midpoints
COSH_VERTEX_DIST = 3.0 + 2.0 * SQRT2          # cosh R, R = distance to vertices
VERTEX_RADIUS = 2.0 ** -0.25                  # Euclidean |z| of the vertices
SIDE_MID_RADIUS = np.sqrt(SQRT2 - 1.0)        # Euclidean |z| of side midpoints
OCT_HYP_RADIUS = float(np.arccosh(COSH_VERTEX_DIST))


class MobiusMap:
    """Disk isometry z -> (a z + b)/(conj(b) z + conj(a)), |a|^2-|b|^2 = 1."""

    __slots__ = ("a", "b")

    def __init__(self, a=1.0 + 0.0j, b=0.0 + 0.0j, renorm=True):
        a = complex(a)
        b = complex(b)
        if renorm:
            det = abs(a) ** 2 - abs(b) ** 2
            if det <= 0.0:
                raise ValueError("not a disk automorphism: |a|^2 - |b|^2 <= 0")
            r = np.sqrt(det)
            a, b = a / r, b / r
        self.a, self.b = a, b

    def __call__(self, z):
        return (self.a * z + self.b) / (np.conj(self.b) * z + np.conj(self.a))

    def deriv(self, z):
        """Complex derivative m'(z) = (conj(b) z + conj(a))^-2."""
        den = np.conj(self.b) * z + np.conj(self.a)
        return 1.0 / (den * den)

    def compose(self, other):
        """self after other."""
        a = self.a * other.a + self.b * np.conj(other.b)
        b = self.a * other.b + self.b * np.conj(other.a)
        return MobiusMap(a, b)

    def inverse(self):
        return MobiusMap(np.conj(self.a), -self.b)

    def is_identity(self, tol=1e-12):
        # (a, b) and (-a, -b) represent the same map
        return (abs(self.a - 1) + abs(self.b) < tol) or (abs(self.a + 1) + abs(self.b) < tol)

    def dist(self, other, tol_sign=True):
        d1 = abs(self.a - other.a) + abs(self.b - other.b)
        d2 = abs(self.a + other.a) + abs(self.b + other.b)
        return min(d1, d2) if tol_sign else d1

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, renorm=False)

    @classmethod
    def rotation(cls, alpha):
        return cls(np.exp(0.5j * alpha), 0.0, renorm=False)

    @classmethod
    def translation(cls, length, direction):
        """Hyperbolic translation by `length` along the axis through 0 with
        the given direction angle (positive length moves 0 toward the
        direction)."""
        a = np.cosh(0.5 * length)
        b = np.exp(1j * direction) * np.sinh(0.5 * length)
        return cls(a, b, renorm=False)

    def __repr__(self):
        return f"MobiusMap(a={self.a:.6g}, b={self.b:.6g})"


def apply_to_state(m: MobiusMap, s: UnitTangent) -> UnitTangent:
    """Induced action on SM: base by m, heading shifted by arg m'(z)."""
    z = complex(s.x, s.y)
    w = m(z)
    dphi = np.angle(m.deriv(z))
    return UnitTangent(w.real, w.imag, s.phi + dphi)


def transport_tangent(m: MobiusMap, s: UnitTangent, xi):
    """Pushforward of an SM tangent vector (chart components) under m.

    The base block is multiplication by m'(z); the heading component picks up
    the differential of arg m'(z) along the base displacement.  Linear in xi
    and functorial under composition.
    """
    xi = np.asarray(xi, dtype=float)
    z = complex(s.x, s.y)
    den = np.conj(m.b) * z + np.conj(m.a)
    mp = 1.0 / (den * den)
    dz = complex(xi[0], xi[1])
    base = mp * dz
    dphi = xi[2] + (-2.0 * np.conj(m.b) / den * dz).imag
    return np.array([base.real, base.imag, dphi])


def transport_matrix(m: MobiusMap, s: UnitTangent, M):
    """Column-wise transport_tangent for a 3xk matrix of tangent vectors."""
    out = np.empty_like(np.asarray(M, dtype=float))
    for k in range(out.shape[1]):
        out[:, k] = transport_tangent(m, s, M[:, k])
    return out


class FuchsianOctagon:
    """Regular-octagon side-pairing group (g_{k+4} = g_k^{-1})."""

    def __init__(self):
        d = float(np.arccosh(COSH_SIDE_DIST))
        self.side_dist = d
        self.vertex_radius = VERTEX_RADIUS
        self.directions = np.exp(1j * np.arange(8) * np.pi / 4.0)
        # g_k translates by -2d along direction k*pi/4: side k -> side k+4
        self.generators = [MobiusMap.translation(-2.0 * d, k * np.pi / 4.0) for k in range(8)]
        self.vertices = VERTEX_RADIUS * np.exp(1j * (np.pi / 8.0 + np.arange(8) * np.pi / 4.0))
        # side k = arc of the circle orthogonal to the boundary, nearest point
        # at Euclidean radius m in direction k*pi/4
        mrad = SIDE_MID_RADIUS
        self.circle_center_dist = 0.5 * (mrad + 1.0 / mrad)
        self.circle_radius = 0.5 * (1.0 / mrad - mrad)
        self.side_centers = self.circle_center_dist * self.directions
        self.relation_word = self._vertex_cycle()
        self._self_check()

    # -- construction self-checks -----------------------------------------
    def _vertex_cycle(self):
        """Corner walk around the single identified vertex; the sequence of
        pairings applied is the surface-group relation."""
        word = []
        vertex = 0
        for _ in range(8):
            leave = (vertex + 1) % 8
            word.append(leave)
            vertex = (leave + 4) % 8
        if vertex != 0:
            raise AssertionError("vertex cycle did not close combinatorially")
        return word

    def word_map(self, word):
        m = MobiusMap.identity()
        for k in word:
            m = self.generators[k].compose(m)
        return m

    def _self_check(self):
        for k in range(8):
            gk = self.generators[k]
            # opposite pairings are inverse
            if not gk.compose(self.generators[(k + 4) % 8]).is_identity(1e-12):
                raise AssertionError("g_k * g_{k+4} != identity")
            # side k endpoints map to side k+4 endpoints
            va, vb = self.vertices[(k - 1) % 8], self.vertices[k % 8]
            ia, ib = self.vertices[(k + 4) % 8], self.vertices[(k + 3) % 8]
            if abs(gk(va) - ia) > 1e-10 or abs(gk(vb) - ib) > 1e-10:
                raise AssertionError("side pairing is not endpoint-to-endpoint")
        rel = self.word_map(self.relation_word)
        if not rel.is_identity(1e-8):
            raise AssertionError("octagon relation does not compose to the identity")
        # interior angles pi/4 (angle between side-circle tangents at a vertex)
        for k in range(8):
            p = self.vertices[k]
            t1 = 1j * (p - self.side_centers[k])
            t2 = 1j * (p - self.side_centers[(k + 1) % 8])
            c = abs((t1 * np.conj(t2)).real) / (abs(t1) * abs(t2))
            if abs(np.arccos(np.clip(c, -1, 1)) - np.pi / 4.0) > 1e-10:
                raise AssertionError("octagon interior angle is not pi/4")

    # -- membership and reduction ------------------------------------------
    def contains(self, x, y, slack=0.0):
        """Indicator of the closed fundamental octagon (vectorized)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = x * x + y * y < 1.0
        rho2 = (self.circle_radius + slack) ** 2
        for c in self.side_centers:
            ok &= (x - c.real) ** 2 + (y - c.imag) ** 2 >= rho2
        return ok

    def reduce(self, s: UnitTangent, max_steps=64):
        """Map s into the fundamental octagon; returns (state, word).

        The word lists the generator indices applied, in order; applying the
        inverse word (indices +4 mod 8, reversed) reproduces the input.
        Greedy Dirichlet descent: while some generator strictly reduces |z|,
        apply the one that reduces it most.
        """
        z = complex(s.x, s.y)
        if abs(z) >= 1.0:
            raise DomainError("point outside the unit disk")
        phi = float(s.phi)
        word = []
        for _ in range(max_steps):
            r = abs(z)
            best_k, best_w, best_r = -1, 0.0j, r * (1.0 - 1e-15)
            for k, g in enumerate(self.generators):
                w = g(z)
                if abs(w) < best_r:
                    best_k, best_w, best_r = k, w, abs(w)
            if best_k < 0:
                return UnitTangent(z.real, z.imag, phi), word
            g = self.generators[best_k]
            phi += np.angle(g.deriv(z))
            z = best_w
            word.append(best_k)
        raise ReductionDivergenceError("fundamental-domain reduction exceeded 64 steps")

    def unreduce(self, s: UnitTangent, word):
        """Apply the inverse word, recovering the pre-reduction state."""
        out = s
        for k in reversed(word):
            out = apply_to_state(self.generators[(k + 4) % 8], out)
        return out

    # -- orbits -------------------------------------------------------------
    def words_up_to(self, length):
        """Non-backtracking words (generator index lists) of length <= length."""
        words = [[]]
        frontier = [[k] for k in range(8)]
        for _ in range(length):
            words.extend(frontier)
            nxt = []
            for w in frontier:
                last = w[-1]
                for k in range(8):
                    if k != (last + 4) % 8:
                        nxt.append(w + [k])
            frontier = nxt
        return words, frontier  # frontier = first omitted shell

    def orbit_points(self, center, truncation):
        """Deduplicated orbit of a point under words up to the truncation
        length; also the minimum distance of the first omitted shell to 0 and
        the minimum displacement of the center over all computed nontrivial
        words (including the shell)."""
        z0 = complex(center)
        words, shell = self.words_up_to(truncation)
        pts = []
        for w in words:
            pts.append(self.word_map(w)(z0))
        pts = np.asarray(pts, dtype=complex)
        keep = []
        seen = set()
        for p in pts:
            key = (round(p.real, 9), round(p.imag, 9))
            if key not in seen:
                seen.add(key)
                keep.append(p)
        pts = np.asarray(keep, dtype=complex)
        shell_min = np.inf
        min_disp = np.inf
        for w in shell:
            q = self.word_map(w)(z0)
            shell_min = min(shell_min, hyp_dist(0.0j, q))
            min_disp = min(min_disp, hyp_dist(z0, q))
        d0 = hyp_dist(np.full(pts.shape, z0), pts)
        nz = d0 > 1e-9
        if np.any(nz):
            min_disp = min(min_disp, float(d0[nz].min()))
        return pts, float(shell_min), float(min_disp)


def hyp_dist(z, w):
    """Hyperbolic distance in the disk model."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    num = 2.0 * np.abs(z - w) ** 2
    den = (1.0 - np.abs(z) ** 2) * (1.0 - np.abs(w) ** 2)
    return np.arccosh(1.0 + num / den)


_OCTAGON = None


def build_octagon_group() -> FuchsianOctagon:
    """The regular-octagon group (cached; it is immutable)."""
    global _OCTAGON
    if _OCTAGON is None:
        _OCTAGON = FuchsianOctagon()
    return _OCTAGON


def octagon_surface() -> ConformalSurface:
    """Genus-2 hyperbolic surface: unit disk chart + octagon identification."""
    group = build_octagon_group()
    sup = 4.0 / (1.0 - VERTEX_RADIUS ** 2) ** 2
    return ConformalSurface("disk", DiskLogFactor(), group=group,
                            sup_e2f=float(sup), name="octagon")


# ---------------------------------------------------------------------------
# Group-invariant bump fields (finite Poincare series)
# ---------------------------------------------------------------------------

def _arccosh2(Q):
    """S = arccosh(1+Q)^2 and dS/dQ, d2S/dQ2; series near Q = 0."""
    Q = np.asarray(Q, dtype=float)
    S = np.empty_like(Q)
    S1 = np.empty_like(Q)
    S2 = np.empty_like(Q)
    small = Q < 1e-4
    Qs = Q[small]
    S[small] = 2.0 * Qs - Qs ** 2 / 3.0 + 4.0 * Qs ** 3 / 45.0
    S1[small] = 2.0 - 2.0 * Qs / 3.0 + 4.0 * Qs ** 2 / 15.0
    S2[small] = -2.0 / 3.0 + 8.0 * Qs / 15.0
    big = ~small
    Qb = Q[big]
    d = np.arccosh(1.0 + Qb)
    sh = np.sqrt(Qb * Qb + 2.0 * Qb)
    S[big] = d * d
    S1[big] = 2.0 * d / sh
    S2[big] = 2.0 / (sh * sh) - 2.0 * d * (Qb + 1.0) / sh ** 3
    return S, S1, S2


class ScalarFieldInvariant(ScalarField):
    """Group-invariant scalar field: sum of one hyperbolic bump per orbit point.

    The summand supports are pairwise disjoint by the precondition on
    bump_radius, so the field is exactly the bump profile in the hyperbolic
    distance to the nearest orbit point of the center.
    """

    def __init__(self, group, center, bump_radius, amplitude, truncation=3):
        center = complex(center)
        if abs(center) >= 1.0:
            raise DomainError("bump center outside the disk")
        pts, shell_min, min_disp = group.orbit_points(center, truncation)
        self.group = group
        self.center = center
        self.rho = float(bump_radius)
        self.amp = float(amplitude)
        self.truncation = int(truncation)
        self.centers = pts
        self.min_displacement = min_disp
        if not self.rho < 0.5 * self.min_displacement:
            raise PreconditionError(
                f"bump_radius {self.rho} >= half the minimal center displacement "
                f"{0.5 * self.min_displacement:.6f}: orbit supports overlap")
        if shell_min <= OCT_HYP_RADIUS + self.rho:
            raise PreconditionError(
                "truncation too small: omitted orbit terms reach the octagon")
        self.shell_min = shell_min
        # squared-chord reach per center for cheap support rejection:
        # Q = 2|z-c|^2 / ((1-|z|^2)(1-|c|^2)) must be < cosh(rho) - 1
        self._qmax = float(np.cosh(self.rho) - 1.0)
        self._wc = 1.0 - np.abs(self.centers) ** 2

    def _prune(self, rmax):
        """Centers that can contribute for |z| <= rmax (triangle inequality)."""
        reach = 2.0 * np.arctanh(min(rmax, 1.0 - 1e-12)) + self.rho
        d_to_zero = 2.0 * np.arctanh(np.abs(self.centers))
        return d_to_zero <= reach + 1e-9

    def _accumulate(self, x, y, order):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        shape = x.shape
        x = x.ravel()
        y = y.ravel()
        w = 1.0 - x * x - y * y
        if np.any(w <= 0.0):
            raise DomainError("point outside the unit disk")
        keep = self._prune(float(np.sqrt(np.max(x * x + y * y))))
        cs = self.centers[keep]
        wc = self._wc[keep]
        val = np.zeros(x.size)
        gx = np.zeros(x.size)
        gy = np.zeros(x.size)
        hxx = np.zeros(x.size)
        hxy = np.zeros(x.size)
        hyy = np.zeros(x.size)
        # chunk over samples to bound the (samples x centers) workspace
        step = max(1, (1 << 22) // max(1, cs.size))
        for lo in range(0, x.size, step):
            sl = slice(lo, min(lo + step, x.size))
            xs, ys, ws = x[sl], y[sl], w[sl]
            dx = xs[:, None] - cs.real[None, :]
            dy = ys[:, None] - cs.imag[None, :]
            u = dx * dx + dy * dy
            Q = (2.0 / wc)[None, :] * u / ws[:, None]
            act = Q < self._qmax
            if not np.any(act):
                continue
            i, j = np.nonzero(act)
            Qa = Q[i, j]
            S, S1, S2 = _arccosh2(Qa)
            G, G1, G2 = bump_profile(S, self.rho, self.amp)
            np.add.at(val, sl.start + i, G)
            if order == 0:
                continue
            k0 = (2.0 / wc)[j]
            ua, dxa, dya = u[i, j], dx[i, j], dy[i, j]
            wa = ws[i]
            ux, uy = 2.0 * dxa, 2.0 * dya
            wx, wy = -2.0 * x[sl.start + i], -2.0 * y[sl.start + i]
            Qx = k0 * (ux / wa - ua * wx / wa ** 2)
            Qy = k0 * (uy / wa - ua * wy / wa ** 2)
            dGdQ = G1 * S1
            np.add.at(gx, sl.start + i, dGdQ * Qx)
            np.add.at(gy, sl.start + i, dGdQ * Qy)
            if order < 2:
                continue
            Qxx = k0 * (2.0 / wa - 2.0 * ux * wx / wa ** 2 + 2.0 * ua * wx ** 2 / wa ** 3 + 2.0 * ua / wa ** 2)
            Qyy = k0 * (2.0 / wa - 2.0 * uy * wy / wa ** 2 + 2.0 * ua * wy ** 2 / wa ** 3 + 2.0 * ua / wa ** 2)
            Qxy = k0 * (-(ux * wy + uy * wx) / wa ** 2 + 2.0 * ua * wx * wy / wa ** 3)
            d2GdQ2 = G2 * S1 * S1 + G1 * S2
            np.add.at(hxx, sl.start + i, d2GdQ2 * Qx * Qx + dGdQ * Qxx)
            np.add.at(hxy, sl.start + i, d2GdQ2 * Qx * Qy + dGdQ * Qxy)
            np.add.at(hyy, sl.start + i, d2GdQ2 * Qy * Qy + dGdQ * Qyy)
        out = (val.reshape(shape), gx.reshape(shape), gy.reshape(shape),
               hxx.reshape(shape), hxy.reshape(shape), hyy.reshape(shape))
        return out

    def value(self, x, y):
        v = self._accumulate(x, y, 0)[0]
        return v if np.ndim(x) else float(v[0])

    def grad(self, x, y):
        _, gx, gy = self._accumulate(x, y, 1)[:3]
        if np.ndim(x):
            return gx, gy
        return float(gx[0]), float(gy[0])

    def hess(self, x, y):
        _, _, _, hxx, hxy, hyy = self._accumulate(x, y, 2)
        if np.ndim(x):
            return hxx, hxy, hyy
        return float(hxx[0]), float(hxy[0]), float(hyy[0])


def invariant_bump(group, center, bump_radius, amplitude, truncation=3):
    """Poincare-series bump; value at the center equals the amplitude."""
    return ScalarFieldInvariant(group, center, bump_radius, amplitude, truncation)
