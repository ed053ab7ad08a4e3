"""External-field 1-forms, the thermostat forcing and its derivatives, the
effective curvature, divergence data, and the isoenergetic reduction.

The forcing lambda(x, v) enters the motion through phi_dot; everything the
identities need from it is the 7-tuple (value; d/dx, d/dy, d/dphi; and the
phi-mixed second partials).  The same 7-tuple abstraction carries the smooth
test functions on SM used by the identity checks.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EnergyLevelError, DegenerateFieldWarning, ConfigError
from .geometry import ScalarField, ConstantField, UnitTangent, curvature

# ---------------------------------------------------------------------------
# 1-forms theta = a dx + b dy with first partials of the components
# ---------------------------------------------------------------------------


class OneForm:
    """Chart 1-form; subclasses supply components and their first partials."""

    provenance = "general"

    def ab(self, x, y):
        raise NotImplementedError

    def ab_jac(self, x, y):
        """Return (a, b, ax, ay, bx, by)."""
        raise NotImplementedError

    def scaled(self, c):
        return ScaledForm(self, c) if c != 1.0 else self

    def d_coefficient(self, x, y):
        """Coefficient of dx^dy in d(theta) = (b_x - a_y) dx^dy."""
        _, _, _, ay, bx, _ = self.ab_jac(x, y)
        return bx - ay


class ConstantForm(OneForm):
    """a0 dx + b0 dy on a torus chart (closed, generally non-exact)."""

    provenance = "constant"

    def __init__(self, a0, b0):
        self.a0, self.b0 = float(a0), float(b0)

    def ab(self, x, y):
        shape = np.shape(x)
        return np.full(shape, self.a0), np.full(shape, self.b0)

    def ab_jac(self, x, y):
        z = np.zeros(np.shape(x))
        a, b = self.ab(x, y)
        return a, b, z, z.copy(), z.copy(), z.copy()


class ExactForm(OneForm):
    """theta = dW for a C^2 scalar potential W."""

    provenance = "exact"

    def __init__(self, W: ScalarField):
        self.W = W

    def ab(self, x, y):
        return self.W.grad(x, y)

    def ab_jac(self, x, y):
        a, b = self.W.grad(x, y)
        wxx, wxy, wyy = self.W.hess(x, y)
        return a, b, wxx, wxy, wxy, wyy


class ProductForm(OneForm):
    """theta = W1 dW2; not closed whenever dW1 ^ dW2 != 0."""

    provenance = "product"

    def __init__(self, W1: ScalarField, W2: ScalarField):
        self.W1, self.W2 = W1, W2

    def ab(self, x, y):
        w1 = self.W1.value(x, y)
        g2x, g2y = self.W2.grad(x, y)
        return w1 * g2x, w1 * g2y

    def ab_jac(self, x, y):
        w1 = self.W1.value(x, y)
        g1x, g1y = self.W1.grad(x, y)
        g2x, g2y = self.W2.grad(x, y)
        h2xx, h2xy, h2yy = self.W2.hess(x, y)
        a = w1 * g2x
        b = w1 * g2y
        ax = g1x * g2x + w1 * h2xx
        ay = g1y * g2x + w1 * h2xy
        bx = g1x * g2y + w1 * h2xy
        by = g1y * g2y + w1 * h2yy
        return a, b, ax, ay, bx, by

    def d_coefficient(self, x, y):
        g1x, g1y = self.W1.grad(x, y)
        g2x, g2y = self.W2.grad(x, y)
        return g1x * g2y - g1y * g2x


class ScaledForm(OneForm):
    def __init__(self, base: OneForm, c):
        self.base, self.c = base, float(c)
        self.provenance = base.provenance

    def ab(self, x, y):
        a, b = self.base.ab(x, y)
        return self.c * a, self.c * b

    def ab_jac(self, x, y):
        return tuple(self.c * t for t in self.base.ab_jac(x, y))

    def d_coefficient(self, x, y):
        return self.c * self.base.d_coefficient(x, y)


class IsoenergeticForm(OneForm):
    """The reduced external 1-form (E_form - dW)/(2(k - W)).

    Remark-1 reduction: the isoenergetic thermostat at energy k, reparametrized
    by arc length, is the isokinetic thermostat with this field.
    """

    def __init__(self, W: ScalarField, E_form: OneForm, k: float):
        self.W, self.E, self.k = W, E_form, float(k)
        if isinstance(E_form, ZeroForm) or (
                isinstance(E_form, ConstantForm) and E_form.a0 == E_form.b0 == 0.0):
            self.provenance = "exact"       # dU with U = log(k - W)/2
        elif E_form.provenance == "exact" and isinstance(W, ConstantField):
            self.provenance = "exact"       # dU/(2(k - c)) is exact
        else:
            self.provenance = "general"

    def ab(self, x, y):
        wv = self.W.value(x, y)
        wx, wy = self.W.grad(x, y)
        ae, be = self.E.ab(x, y)
        den = 2.0 * (self.k - wv)
        return (ae - wx) / den, (be - wy) / den

    def ab_jac(self, x, y):
        wv = self.W.value(x, y)
        wx, wy = self.W.grad(x, y)
        wxx, wxy, wyy = self.W.hess(x, y)
        ae, be, aex, aey, bex, bey = self.E.ab_jac(x, y)
        g = self.k - wv
        den = 2.0 * g
        a = (ae - wx) / den
        b = (be - wy) / den
        ax = (aex - wxx) / den + (ae - wx) * wx / (den * g)
        ay = (aey - wxy) / den + (ae - wx) * wy / (den * g)
        bx = (bex - wxy) / den + (be - wy) * wx / (den * g)
        by = (bey - wyy) / den + (be - wy) * wy / (den * g)
        return a, b, ax, ay, bx, by


class ZeroForm(ConstantForm):
    provenance = "exact"

    def __init__(self):
        super().__init__(0.0, 0.0)


def make_exact_form(W: ScalarField) -> OneForm:
    return ExactForm(W)


def make_product_form(W1: ScalarField, W2: ScalarField, surface=None, n_grid=2048,
                      seed=0) -> OneForm:
    """W1 dW2, certifying non-exactness by max |d(theta)| over a sample grid."""
    form = ProductForm(W1, W2)
    if surface is not None:
        if surface.is_torus:
            xs = np.random.default_rng(seed).uniform(0.0, surface.Lx, n_grid)
            ys = np.random.default_rng(seed + 1).uniform(0.0, surface.Ly, n_grid)
        else:
            from .geometry import sample_liouville
            pts = sample_liouville(surface, seed, n_grid)
            xs, ys = pts[:, 0], pts[:, 1]
        cert = float(np.max(np.abs(form.d_coefficient(xs, ys))))
        form.nonexactness = cert
        if cert < 1e-6:
            warnings.warn("product form is numerically closed (max |d theta| "
                          f"= {cert:.3e})", DegenerateFieldWarning)
    return form


def make_constant_form(a0, b0, surface=None) -> OneForm:
    if surface is not None and not surface.is_torus:
        raise ConfigError("constant forms are only defined on torus charts")
    return ConstantForm(a0, b0)


def isoenergetic_reduce(W: ScalarField, E_form: OneForm, k: float, surface=None,
                        n_grid=64) -> OneForm:
    """1-form of the isokinetic system equivalent to the isoenergetic one.

    Requires k - W > 0; the margin is checked on a sampling grid of the
    surface (torus box by default).
    """
    form = IsoenergeticForm(W, E_form, k)
    if surface is not None:
        if surface.is_torus:
            xs = np.linspace(0.0, surface.Lx, n_grid, endpoint=False)
            ys = np.linspace(0.0, surface.Ly, n_grid, endpoint=False)
            X, Y = np.meshgrid(xs, ys, indexing="ij")
        else:
            from .geometry import sample_liouville
            pts = sample_liouville(surface, 0, n_grid * n_grid)
            X, Y = pts[:, 0], pts[:, 1]
        margin = float(np.min(k - W.value(X, Y)))
        if margin <= 0.0:
            raise EnergyLevelError(f"k - W <= 0 on the level set (margin {margin:.3e})")
        form.energy_margin = margin
    return form


# ---------------------------------------------------------------------------
# Smooth functions on SM with the 7-tuple of chart partials
# ---------------------------------------------------------------------------

#: order of the tuple entries
SM7 = ("u", "ux", "uy", "up", "uxp", "uyp", "upp")


class SMField:
    """Function on SM supplying (u, u_x, u_y, u_phi, u_xphi, u_yphi, u_phiphi)."""

    def eval7(self, surface, x, y, phi):
        raise NotImplementedError

    def __add__(self, other):
        return SMSum(self, other)

    def __mul__(self, c):
        if isinstance(c, SMField):
            return SMProduct(self, c)
        return SMScale(self, c)

    __rmul__ = __mul__


class SMConst(SMField):
    def __init__(self, c):
        self.c = float(c)

    def eval7(self, surface, x, y, phi):
        u = np.full(np.shape(x), self.c)
        z = np.zeros(np.shape(x))
        return u, z, z.copy(), z.copy(), z.copy(), z.copy(), z.copy()


class SMPullback(SMField):
    """Pullback of a base scalar field (no fiber dependence)."""

    def __init__(self, W: ScalarField):
        self.W = W

    def eval7(self, surface, x, y, phi):
        u = self.W.value(x, y)
        ux, uy = self.W.grad(x, y)
        z = np.zeros(np.shape(x))
        return u, ux, uy, z, z.copy(), z.copy(), z.copy()


class SMFiberTrig(SMField):
    """cos(k*phi + delta); deck-invariant on torus charts only."""

    def __init__(self, k, delta=0.0):
        self.k, self.delta = int(k), float(delta)

    def eval7(self, surface, x, y, phi):
        t = self.k * np.asarray(phi, dtype=float) + self.delta
        u = np.cos(t)
        up = -self.k * np.sin(t)
        upp = -self.k ** 2 * u
        z = np.zeros(np.shape(x))
        return u, z, z.copy(), up, z.copy(), z.copy(), upp


class SMFormAlong(SMField):
    """theta(v) for along="v", theta(iv) for along="iv"; deck-invariant when
    theta is."""

    def __init__(self, form: OneForm, along="v"):
        if along not in ("v", "iv"):
            raise ValueError("along must be 'v' or 'iv'")
        self.form, self.along = form, along

    def eval7(self, surface, x, y, phi):
        f, fx, fy = surface.fdata(x, y)
        E = np.exp(-f)
        c, s = np.cos(phi), np.sin(phi)
        a, b, ax, ay, bx, by = self.form.ab_jac(x, y)
        if self.along == "v":
            p, q = c, s                  # u = E (a c + b s)
            pp, qp = -s, c               # d(p,q)/dphi
        else:
            p, q = -s, c                 # u = E (-a s + b c)
            pp, qp = -c, -s
        u = E * (a * p + b * q)
        ux = E * (-fx * (a * p + b * q) + ax * p + bx * q)
        uy = E * (-fy * (a * p + b * q) + ay * p + by * q)
        up = E * (a * pp + b * qp)
        uxp = E * (-fx * (a * pp + b * qp) + ax * pp + bx * qp)
        uyp = E * (-fy * (a * pp + b * qp) + ay * pp + by * qp)
        upp = -u
        return u, ux, uy, up, uxp, uyp, upp


class SMSum(SMField):
    def __init__(self, *terms):
        self.terms = terms

    def eval7(self, surface, x, y, phi):
        acc = None
        for t in self.terms:
            e = t.eval7(surface, x, y, phi)
            acc = e if acc is None else tuple(a + b for a, b in zip(acc, e))
        return acc


class SMScale(SMField):
    def __init__(self, base, c):
        self.base, self.c = base, float(c)

    def eval7(self, surface, x, y, phi):
        return tuple(self.c * t for t in self.base.eval7(surface, x, y, phi))


class SMProduct(SMField):
    def __init__(self, u, v):
        self.u, self.v = u, v

    def eval7(self, surface, x, y, phi):
        u, ux, uy, up, uxp, uyp, upp = self.u.eval7(surface, x, y, phi)
        v, vx, vy, vp, vxp, vyp, vpp = self.v.eval7(surface, x, y, phi)
        return (u * v,
                ux * v + u * vx,
                uy * v + u * vy,
                up * v + u * vp,
                uxp * v + ux * vp + up * vx + u * vxp,
                uyp * v + uy * vp + up * vy + u * vyp,
                upp * v + 2.0 * up * vp + u * vpp)


# ---------------------------------------------------------------------------
# Thermostat specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThermostatSpec:
    """Fiberwise forcing lambda(x, v) in one of the four variants."""

    variant: str                 # geodesic | magnetic | gaussian | general
    lam: SMField                 # forcing as an SM function
    m_field: ScalarField = None  # magnetic only
    form: OneForm = None         # gaussian only
    name: str = ""

    def lambda7(self, surface, x, y, phi):
        return self.lam.eval7(surface, x, y, phi)


def geodesic_spec() -> ThermostatSpec:
    return ThermostatSpec("geodesic", SMConst(0.0), name="geodesic")


def magnetic_spec(m_field: ScalarField, name="magnetic") -> ThermostatSpec:
    return ThermostatSpec("magnetic", SMPullback(m_field), m_field=m_field, name=name)


def gaussian_spec(form: OneForm, name="gaussian") -> ThermostatSpec:
    """lambda = theta(iv); the isokinetic thermostat of the external field."""
    return ThermostatSpec("gaussian", SMFormAlong(form, "iv"), form=form, name=name)


def general_spec(lam: SMField, name="general") -> ThermostatSpec:
    return ThermostatSpec("general", lam, name=name)


# ---------------------------------------------------------------------------
# Frame derivatives of lambda and the effective curvature
# ---------------------------------------------------------------------------

def lambda_frame_data(surface, spec, x, y, phi):
    """Arrays of lambda, V(lam), H(lam), X(lam), F(V(lam)), K and the
    effective curvature KK = K - H(lam) + lam^2 + F(V(lam))."""
    f, fx, fy = surface.fdata(x, y)
    fxx, _, fyy = surface.f.hess(x, y)
    E = np.exp(-f)
    c, s = np.cos(phi), np.sin(phi)
    lam, lx, ly, lp, lxp, lyp, lpp = spec.lambda7(surface, x, y, phi)
    gphi = -fx * s + fy * c
    Xlam = E * (c * lx + s * ly + gphi * lp)
    Hlam = E * (-s * lx + c * ly - (fx * c + fy * s) * lp)
    Vlam = lp
    XVlam = E * (c * lxp + s * lyp + gphi * lpp)
    FVlam = XVlam + lam * lpp
    K = -np.exp(-2.0 * f) * (fxx + fyy)
    KK = K - Hlam + lam * lam + FVlam
    return {"lam": lam, "Vlam": Vlam, "Hlam": Hlam, "Xlam": Xlam,
            "FVlam": FVlam, "K": K, "KK": KK}


def lambda_eval(spec, surface, s: UnitTangent):
    """(lambda, V(lambda), H(lambda), X(lambda), F(V(lambda))) at a state."""
    surface.require_inside(s.x, s.y)
    d = lambda_frame_data(surface, spec, np.float64(s.x), np.float64(s.y), np.float64(s.phi))
    return (float(d["lam"]), float(d["Vlam"]), float(d["Hlam"]),
            float(d["Xlam"]), float(d["FVlam"]))


def effective_curvature(spec, surface, s: UnitTangent, terms=False):
    """KK = K - H(lambda) + lambda^2 + F(V(lambda))."""
    surface.require_inside(s.x, s.y)
    d = lambda_frame_data(surface, spec, np.float64(s.x), np.float64(s.y), np.float64(s.phi))
    if terms:
        return (float(d["KK"]), {"K": float(d["K"]), "Hlam": float(d["Hlam"]),
                                 "lam2": float(d["lam"]) ** 2, "FVlam": float(d["FVlam"])})
    return float(d["KK"])


def divergence_F(spec, surface, s: UnitTangent):
    """Divergence of F w.r.t. the contact volume: V(lambda).

    For gaussian specs this equals -theta(v); the identity is asserted to
    machine accuracy.
    """
    surface.require_inside(s.x, s.y)
    d = lambda_frame_data(surface, spec, np.float64(s.x), np.float64(s.y), np.float64(s.phi))
    div = float(d["Vlam"])
    if spec.variant == "gaussian":
        tv = SMFormAlong(spec.form, "v").eval7(surface, np.float64(s.x), np.float64(s.y),
                                               np.float64(s.phi))[0]
        if abs(div + float(tv)) > 1e-12 * max(1.0, abs(div)):
            raise AssertionError("gaussian identity V(lambda) = -theta(v) violated")
    return div
