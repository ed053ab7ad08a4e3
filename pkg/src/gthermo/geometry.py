"""Conformal-chart surfaces, the moving frame on the unit tangent bundle,
Gaussian curvature, and Liouville-measure sampling.

A surface is a chart with metric e^{2f}(dx^2 + dy^2); the chart is either a
periodic box (torus) or the open unit disk (quotients handled in
``gthermo.hyperbolic``).  States of the unit tangent bundle are (x, y, phi)
with the unit velocity e^{-f}(cos phi, sin phi); the rotated vector iv is the
heading phi + pi/2 (counterclockwise convention, locked by the bracket tests).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

TWO_PI = 2.0 * np.pi


def wrap_angle(phi):
    """Reduce heading(s) to [0, 2*pi)."""
    return np.mod(phi, TWO_PI)


# ---------------------------------------------------------------------------
# Scalar fields on the chart, with closed-form partials up to order 2.
# Finite differences are used only in tests; the numerical core is analytic.
# ---------------------------------------------------------------------------

class ScalarField:
    """Chart scalar field supplying value, gradient and Hessian."""

    def value(self, x, y):
        raise NotImplementedError

    def grad(self, x, y):
        raise NotImplementedError

    def hess(self, x, y):
        """Return (fxx, fxy, fyy)."""
        raise NotImplementedError


class ConstantField(ScalarField):
    def __init__(self, c=0.0):
        self.c = float(c)

    def value(self, x, y):
        return np.full_like(np.asarray(x, dtype=float), self.c)

    def grad(self, x, y):
        z = np.zeros_like(np.asarray(x, dtype=float))
        return z, z.copy()

    def hess(self, x, y):
        z = np.zeros_like(np.asarray(x, dtype=float))
        return z, z.copy(), z.copy()


class TrigField(ScalarField):
    """amp * sin(ax*x + px) * sin(by*y + py) + offset."""

    def __init__(self, amp, ax, px, by, py, offset=0.0):
        self.amp, self.ax, self.px = float(amp), float(ax), float(px)
        self.by, self.py, self.offset = float(by), float(py), float(offset)

    def _parts(self, x, y):
        u = self.ax * np.asarray(x, dtype=float) + self.px
        v = self.by * np.asarray(y, dtype=float) + self.py
        return np.sin(u), np.cos(u), np.sin(v), np.cos(v)

    def value(self, x, y):
        su, cu, sv, cv = self._parts(x, y)
        return self.amp * su * sv + self.offset

    def grad(self, x, y):
        su, cu, sv, cv = self._parts(x, y)
        return self.amp * self.ax * cu * sv, self.amp * self.by * su * cv

    def hess(self, x, y):
        su, cu, sv, cv = self._parts(x, y)
        a = self.amp
        return (-a * self.ax ** 2 * su * sv,
                a * self.ax * self.by * cu * cv,
                -a * self.by ** 2 * su * sv)


def bump_profile(d2, rho, amp):
    """C^infty compactly supported profile and derivatives in D = d^2.

    g(d) = amp * exp(1 - 1/(1 - (d/rho)^2)) for d < rho, 0 outside.
    Returns (G, dG/dD, d2G/dD2) evaluated at D = d2.
    """
    d2 = np.asarray(d2, dtype=float)
    rho2 = rho * rho
    G = np.zeros_like(d2)
    G1 = np.zeros_like(d2)
    G2 = np.zeros_like(d2)
    inside = d2 < rho2 * (1.0 - 1e-12)
    if np.any(inside):
        D = d2[inside]
        w = rho2 - D
        g = amp * np.exp(1.0 - rho2 / w)
        G[inside] = g
        G1[inside] = -g * rho2 / w ** 2
        G2[inside] = g * (rho2 ** 2 / w ** 4 - 2.0 * rho2 / w ** 3)
    return G, G1, G2


class EuclidBumpField(ScalarField):
    """Compact bump on a periodic box, profile in the Euclidean distance.

    Support must fit inside the box (rho < min(Lx, Ly)/2) so the periodic
    extension stays smooth.
    """

    def __init__(self, cx, cy, rho, amp, Lx, Ly, offset=0.0):
        if not rho < 0.5 * min(Lx, Ly):
            raise ConfigError("bump support does not fit inside the periodic box")
        self.cx, self.cy, self.rho, self.amp = float(cx), float(cy), float(rho), float(amp)
        self.Lx, self.Ly, self.offset = float(Lx), float(Ly), float(offset)

    def _disp(self, x, y):
        dx = np.asarray(x, dtype=float) - self.cx
        dy = np.asarray(y, dtype=float) - self.cy
        dx -= self.Lx * np.round(dx / self.Lx)
        dy -= self.Ly * np.round(dy / self.Ly)
        return dx, dy

    def value(self, x, y):
        dx, dy = self._disp(x, y)
        G, _, _ = bump_profile(dx * dx + dy * dy, self.rho, self.amp)
        return G + self.offset

    def grad(self, x, y):
        dx, dy = self._disp(x, y)
        _, G1, _ = bump_profile(dx * dx + dy * dy, self.rho, self.amp)
        return 2.0 * dx * G1, 2.0 * dy * G1

    def hess(self, x, y):
        dx, dy = self._disp(x, y)
        _, G1, G2 = bump_profile(dx * dx + dy * dy, self.rho, self.amp)
        return (4.0 * dx * dx * G2 + 2.0 * G1,
                4.0 * dx * dy * G2,
                4.0 * dy * dy * G2 + 2.0 * G1)


class DiskLogFactor(ScalarField):
    """f = log(2/(1 - x^2 - y^2)), the hyperbolic conformal exponent (K = -1)."""

    def value(self, x, y):
        s = np.asarray(x, dtype=float) ** 2 + np.asarray(y, dtype=float) ** 2
        return np.log(2.0) - np.log1p(-s)

    def grad(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        w = 1.0 - x * x - y * y
        return 2.0 * x / w, 2.0 * y / w

    def hess(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        w = 1.0 - x * x - y * y
        w2 = w * w
        return (2.0 / w + 4.0 * x * x / w2,
                4.0 * x * y / w2,
                2.0 / w + 4.0 * y * y / w2)


class SumField(ScalarField):
    def __init__(self, *fields):
        self.fields = fields

    def value(self, x, y):
        return sum(f.value(x, y) for f in self.fields)

    def grad(self, x, y):
        gx, gy = 0.0, 0.0
        for f in self.fields:
            a, b = f.grad(x, y)
            gx, gy = gx + a, gy + b
        return gx, gy

    def hess(self, x, y):
        xx, xy, yy = 0.0, 0.0, 0.0
        for f in self.fields:
            a, b, c = f.hess(x, y)
            xx, xy, yy = xx + a, xy + b, yy + c
        return xx, xy, yy


class ScaledField(ScalarField):
    def __init__(self, base, c):
        self.base, self.c = base, float(c)

    def value(self, x, y):
        return self.c * self.base.value(x, y)

    def grad(self, x, y):
        a, b = self.base.grad(x, y)
        return self.c * a, self.c * b

    def hess(self, x, y):
        a, b, c = self.base.hess(x, y)
        return self.c * a, self.c * b, self.c * c


# ---------------------------------------------------------------------------
# Surface and unit tangent bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnitTangent:
    """A point of SM: chart base point plus heading angle in [0, 2*pi)."""

    x: float
    y: float
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "phi", float(wrap_angle(self.phi)))

    def as_array(self):
        return np.array([self.x, self.y, self.phi], dtype=float)

    def flipped(self):
        """The same base point with reversed velocity, (x, -v)."""
        return UnitTangent(self.x, self.y, self.phi + np.pi)


@dataclass(frozen=True)
class FrameAtPoint:
    """Chart components of the frame fields at a state (columns X, H, V)."""

    X: np.ndarray
    H: np.ndarray
    V: np.ndarray

    def basis(self):
        return np.column_stack([self.X, self.H, self.V])


@dataclass(frozen=True)
class ConformalSurface:
    """Closed oriented surface in a conformal chart.

    kind "torus": periodic box [0,Lx) x [0,Ly); kind "disk": open unit disk,
    with the octagon quotient data attached by gthermo.hyperbolic.
    """

    kind: str
    f: ScalarField
    Lx: float = 0.0
    Ly: float = 0.0
    group: object = None
    sup_e2f: float = 1.0   # over one fundamental domain, for rejection sampling
    name: str = ""

    @property
    def is_torus(self):
        return self.kind == "torus"

    def wrap(self, x, y):
        if self.is_torus:
            return np.mod(x, self.Lx), np.mod(y, self.Ly)
        return x, y

    def contains(self, x, y):
        if self.is_torus:
            return np.ones_like(np.asarray(x, dtype=float), dtype=bool)
        return np.asarray(x, dtype=float) ** 2 + np.asarray(y, dtype=float) ** 2 < 1.0

    def require_inside(self, x, y):
        if not np.all(self.contains(x, y)):
            raise DomainError("point outside the chart domain")

    def fdata(self, x, y):
        f = self.f.value(x, y)
        fx, fy = self.f.grad(x, y)
        return f, fx, fy

    def fdata2(self, x, y):
        f = self.f.value(x, y)
        fx, fy = self.f.grad(x, y)
        fxx, fxy, fyy = self.f.hess(x, y)
        return f, fx, fy, fxx, fxy, fyy

    def area(self, n_grid=256):
        """Riemannian area of one fundamental domain."""
        if self.is_torus:
            # midpoint rule; spectrally accurate for the smooth periodic density
            xs = (np.arange(n_grid) + 0.5) * self.Lx / n_grid
            ys = (np.arange(n_grid) + 0.5) * self.Ly / n_grid
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            w = np.exp(2.0 * self.f.value(X, Y))
            return float(w.mean() * self.Lx * self.Ly)
        return 4.0 * np.pi  # genus-2 octagon, Gauss-Bonnet

    def liouville_volume(self, n_grid=256):
        return self.area(n_grid) * TWO_PI


def flat_torus(Lx=TWO_PI, Ly=TWO_PI):
    return ConformalSurface("torus", ConstantField(0.0), Lx=float(Lx), Ly=float(Ly),
                            sup_e2f=1.0, name="flat_torus")


def trig_torus(amp=0.3, nx=1, ny=1, Lx=TWO_PI, Ly=TWO_PI, px=0.0, py=0.0):
    ax = TWO_PI * nx / Lx
    by = TWO_PI * ny / Ly
    f = TrigField(amp, ax, px, by, py)
    return ConformalSurface("torus", f, Lx=float(Lx), Ly=float(Ly),
                            sup_e2f=float(np.exp(2.0 * abs(amp))), name="trig_torus")


# ---------------------------------------------------------------------------
# Frame fields and curvature
# ---------------------------------------------------------------------------

def frame_components(surface, x, y, phi):
    """Chart components of X, H, V at states given as arrays.

    Returns a dict of arrays: the three 3-component frame vectors stacked as
    (..., 3) plus the conformal data used to build them.
    """
    f, fx, fy = surface.fdata(x, y)
    E = np.exp(-f)
    c, s = np.cos(phi), np.sin(phi)
    X = np.stack([E * c, E * s, E * (-fx * s + fy * c)], axis=-1)
    H = np.stack([-E * s, E * c, E * (-fx * c - fy * s)], axis=-1)
    V = np.zeros_like(X)
    V[..., 2] = 1.0
    return X, H, V


def frame_at(surface, s: UnitTangent) -> FrameAtPoint:
    """Moving frame at a single state; raises DomainError outside the chart."""
    surface.require_inside(s.x, s.y)
    X, H, V = frame_components(surface, np.float64(s.x), np.float64(s.y), np.float64(s.phi))
    return FrameAtPoint(X=np.asarray(X, dtype=float),
                        H=np.asarray(H, dtype=float),
                        V=np.asarray(V, dtype=float))


def curvature(surface, x, y):
    """Gaussian curvature K = -e^{-2f} (f_xx + f_yy)."""
    surface.require_inside(x, y)
    f = surface.f.value(x, y)
    fxx, _, fyy = surface.f.hess(x, y)
    return -np.exp(-2.0 * f) * (fxx + fyy)


def _field_by_name(surface, which):
    if which == "X":
        return lambda x, y, p: frame_components(surface, x, y, p)[0]
    if which == "H":
        return lambda x, y, p: frame_components(surface, x, y, p)[1]
    return lambda x, y, p: frame_components(surface, x, y, p)[2]


def _fd_bracket(surface, a, b, x, y, phi, h):
    """Central-difference Lie bracket [A, B] of two frame fields at states."""
    A = _field_by_name(surface, a)
    B = _field_by_name(surface, b)
    Av = A(x, y, phi)
    Bv = B(x, y, phi)
    out = np.zeros_like(Av)
    for j, dv in enumerate([(h, 0.0, 0.0), (0.0, h, 0.0), (0.0, 0.0, h)]):
        dBj = (B(x + dv[0], y + dv[1], phi + dv[2]) - B(x - dv[0], y - dv[1], phi - dv[2])) / (2 * h)
        dAj = (A(x + dv[0], y + dv[1], phi + dv[2]) - A(x - dv[0], y - dv[1], phi - dv[2])) / (2 * h)
        out += Av[..., j:j + 1] * dBj - Bv[..., j:j + 1] * dAj
    return out


def bracket_residuals(surface, s: UnitTangent, h=1e-4):
    """Sup-norm residuals of [V,X]-H, [V,H]+X, [X,H]-K V by central differences.

    This is the oracle that locks the chart formulas of the frame (and the
    sign conventions): the analytic components are trusted only because these
    residuals vanish to FD accuracy.
    """
    surface.require_inside(s.x, s.y)
    if not surface.is_torus and s.x ** 2 + s.y ** 2 > (1.0 - 2.0 * h) ** 2:
        raise DomainError("state not interior to the disk by 2h")
    x = np.float64(s.x)
    y = np.float64(s.y)
    phi = np.float64(s.phi)
    X, H, V = frame_components(surface, x, y, phi)
    K = curvature(surface, x, y)
    r1 = np.max(np.abs(_fd_bracket(surface, "V", "X", x, y, phi, h) - H), axis=-1)
    r2 = np.max(np.abs(_fd_bracket(surface, "V", "H", x, y, phi, h) + X), axis=-1)
    r3 = np.max(np.abs(_fd_bracket(surface, "X", "H", x, y, phi, h) - K[..., None] * V), axis=-1)
    return float(r1), float(r2), float(r3)


# ---------------------------------------------------------------------------
# Liouville sampling (density e^{2f} dx dy dphi over one fundamental domain)
# ---------------------------------------------------------------------------

def sample_liouville(surface, rng_seed, n, max_batches=10000):
    """Draw n i.i.d. Liouville-distributed states, deterministic per seed.

    Returns an (n, 3) array whose rows are UnitTangent triples (x, y, phi).
    Rejection sampling against sup e^{2f} (and the fundamental octagon
    indicator on the disk).
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = np.random.default_rng(rng_seed)
    out = np.empty((n, 3), dtype=float)
    got = 0
    proposed = 0
    batch = max(4096, min(4 * n, 1 << 20))
    for _ in range(max_batches):
        if surface.is_torus:
            x = rng.uniform(0.0, surface.Lx, batch)
            y = rng.uniform(0.0, surface.Ly, batch)
            keep = np.ones(batch, dtype=bool)
        else:
            R = surface.group.vertex_radius
            x = rng.uniform(-R, R, batch)
            y = rng.uniform(-R, R, batch)
            keep = surface.group.contains(x, y)
        u = rng.uniform(0.0, 1.0, batch)
        dens = np.zeros(batch)
        dens[keep] = np.exp(2.0 * surface.f.value(x[keep], y[keep])) / surface.sup_e2f
        if np.any(dens > 1.0 + 1e-12):
            raise ConfigError("sup_e2f underestimates the Liouville density")
        keep &= u < dens
        phi = rng.uniform(0.0, TWO_PI, batch)
        xs, ys, ps = x[keep], y[keep], phi[keep]
        take = min(n - got, xs.size)
        out[got:got + take, 0] = xs[:take]
        out[got:got + take, 1] = ys[:take]
        out[got:got + take, 2] = ps[:take]
        got += take
        proposed += batch
        if got >= n:
            return out
        if proposed >= 1_000_000 and got / proposed < 1e-4:
            raise ConfigError("rejection efficiency below 1e-4; pathological conformal factor")
    raise ConfigError("sampler failed to converge")
