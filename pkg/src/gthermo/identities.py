"""Verification engines for the exact identities of the thermostat flow.

Pointwise Pestov identity, the Monte Carlo integral identity, the Riccati
equation with its stable/unstable bundle functions, the positivity identity,
and the Liouville symmetry facts.  First-order frame derivatives come from
the analytic 7-tuples; the outer derivatives of product terms in the Pestov
check are central differences along the frame integral curves (step 1e-4),
which is what makes the check an independent oracle for the whole
differential-geometry stack.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConjugatePointError, ConfigError
from .geometry import UnitTangent, sample_liouville
from .fields import (SMField, SMPullback, SMFiberTrig, SMFormAlong,
                     SMSum, SMProduct, SMScale, ExactForm, lambda_frame_data)
from .dynamics import check_status
from . import _compile, _kernels


class TestFunctionSM(SMField):
    """Named smooth test function on SM (wraps an SMField expression)."""

    def __init__(self, sm: SMField, name):
        self.sm = sm
        self.name = name

    def eval7(self, surface, x, y, phi):
        return self.sm.eval7(surface, x, y, phi)

    def __repr__(self):
        return f"TestFunctionSM({self.name})"


def torus_test_functions():
    """Three presets mixing fiber harmonics 0, 1, 2 with smooth base factors."""
    from .geometry import TrigField
    u1 = TestFunctionSM(SMPullback(TrigField(1.0, 1.0, 0.0, 1.0, 0.0)), "t_base")
    u2 = TestFunctionSM(
        SMProduct(SMFiberTrig(1, 0.2),
                  SMPullback(TrigField(0.8, 1.0, 0.4, 0.0, np.pi / 2, offset=0.3))),
        "t_harm1")
    u3 = TestFunctionSM(
        SMSum(SMProduct(SMFiberTrig(2, 0.5), SMPullback(TrigField(0.6, 1.0, 0.0, 1.0, 0.3))),
              SMScale(SMFiberTrig(1, 1.1), 0.4)),
        "t_harm2")
    return [u1, u2, u3]


def octagon_test_functions(group):
    """Deck-invariant presets: invariant bumps contracted with v and iv.

    Amplitudes/radii are chosen so third derivatives along the frame flows
    keep the FD term of the Pestov check an order below its 1e-5 bound.
    """
    from .hyperbolic import invariant_bump
    S0 = invariant_bump(group, 0.15 + 0.10j, 1.35, 0.40)
    S1 = invariant_bump(group, -0.12 + 0.18j, 1.40, 0.36)
    S2 = invariant_bump(group, 0.02 - 0.20j, 1.30, 0.40)
    u1 = TestFunctionSM(SMPullback(S0), "o_base")
    u2 = TestFunctionSM(SMFormAlong(ExactForm(S1), "v"), "o_harm1")
    u3 = TestFunctionSM(
        SMSum(SMProduct(SMFormAlong(ExactForm(S1), "v"), SMFormAlong(ExactForm(S2), "iv")),
              SMScale(SMPullback(S0), 0.5)),
        "o_harm2")
    return [u1, u2, u3]


# ---------------------------------------------------------------------------
# frame derivatives of a test function
# ---------------------------------------------------------------------------

def _first_order(surface, spec, u, x, y, phi):
    """Fu, Hu, Vu from analytic partials (plus the lambda value)."""
    f, fx, fy = surface.fdata(x, y)
    E = np.exp(-f)
    c, s = np.cos(phi), np.sin(phi)
    lam = spec.lambda7(surface, x, y, phi)[0]
    uv, ux, uy, up, _, _, _ = u.eval7(surface, x, y, phi)
    gphi = -fx * s + fy * c
    Xu = E * (c * ux + s * uy + gphi * up)
    Hu = E * (-s * ux + c * uy - (fx * c + fy * s) * up)
    return Xu + lam * up, Hu, up, uv


def _second_order(surface, spec, u, x, y, phi):
    """(Fu, Hu, Vu, VFu, FVu): the phi-mixed second partials enter here."""
    f, fx, fy = surface.fdata(x, y)
    E = np.exp(-f)
    c, s = np.cos(phi), np.sin(phi)
    lam, _, _, lp = spec.lambda7(surface, x, y, phi)[:4]
    uv, ux, uy, up, uxp, uyp, upp = u.eval7(surface, x, y, phi)
    gphi = -fx * s + fy * c
    Xu = E * (c * ux + s * uy + gphi * up)
    Hu = E * (-s * ux + c * uy - (fx * c + fy * s) * up)
    Fu = Xu + lam * up
    FVu = E * (c * uxp + s * uyp + gphi * upp) + lam * upp
    # direct d/dphi of Fu (the commutator [V,F] = H + V(lam)V is *not* baked in)
    VFu = (E * (-s * ux + c * uy - (fx * c + fy * s) * up
                + c * uxp + s * uyp + gphi * upp) + lp * up + lam * upp)
    return Fu, Hu, up, VFu, FVu, uv


def _frame_flow_step(surface, spec, states, which, h):
    """One RK4 step along the integral curves of F, H or V."""
    if which == "V":
        out = states.copy()
        out[:, 2] += h
        return out

    def vf(sts):
        x, y, phi = sts[:, 0], sts[:, 1], sts[:, 2]
        f, fx, fy = surface.fdata(x, y)
        E = np.exp(-f)
        c, s = np.cos(phi), np.sin(phi)
        if which == "F":
            lam = spec.lambda7(surface, x, y, phi)[0]
            return np.stack([E * c, E * s, E * (-fx * s + fy * c) + lam], axis=-1)
        return np.stack([-E * s, E * c, E * (-fx * c - fy * s)], axis=-1)

    k1 = vf(states)
    k2 = vf(states + 0.5 * h * k1)
    k3 = vf(states + 0.5 * h * k2)
    k4 = vf(states + h * k3)
    return states + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


def pestov_residual_states(surface, spec, u, states, h=1e-4):
    """|LHS - RHS| of the pointwise Pestov identity at an (n, 3) state array."""
    x, y, phi = states[:, 0], states[:, 1], states[:, 2]
    d = lambda_frame_data(surface, spec, x, y, phi)
    Fu, Hu, Vu, VFu, _, _ = _second_order(surface, spec, u, x, y, phi)
    lhs = 2.0 * Hu * VFu

    def products(sts):
        Fu_, Hu_, Vu_, _ = _first_order(surface, spec, u, sts[:, 0], sts[:, 1], sts[:, 2])
        return Fu_, Hu_, Vu_

    terms = {}
    for which, pick in (("F", lambda F_, H_, V_: H_ * V_),
                        ("H", lambda F_, H_, V_: F_ * V_),
                        ("V", lambda F_, H_, V_: F_ * H_)):
        gp = pick(*products(_frame_flow_step(surface, spec, states, which, h)))
        gm = pick(*products(_frame_flow_step(surface, spec, states, which, -h)))
        terms[which] = (gp - gm) / (2.0 * h)

    K0 = d["K"] - d["Hlam"] + d["lam"] ** 2
    rhs = (Fu ** 2 + Hu ** 2 - K0 * Vu ** 2 + terms["F"]
           + d["Vlam"] * Hu * Vu - terms["H"] + terms["V"])
    return np.abs(lhs - rhs)


def pestov_residual(surface, spec, u, s: UnitTangent, h=1e-4):
    surface.require_inside(s.x, s.y)
    return float(pestov_residual_states(surface, spec, u, s.as_array()[None, :], h)[0])


# ---------------------------------------------------------------------------
# integral identity
# ---------------------------------------------------------------------------

@dataclass
class IdentityCheck:
    lhs: float
    rhs: float
    sigma_lhs: float
    sigma_rhs: float
    n_samples: int
    name: str = ""

    @property
    def z(self):
        sig = np.hypot(self.sigma_lhs, self.sigma_rhs)
        return abs(self.lhs - self.rhs) / sig if sig > 0 else 0.0

    @property
    def passed(self):
        # atol floor: identities that hold pointwise have machine-zero sigma
        atol = 1e-12 * (1.0 + abs(self.lhs) + abs(self.rhs))
        sig = np.hypot(self.sigma_lhs, self.sigma_rhs)
        return bool(abs(self.lhs - self.rhs) <= max(3.0 * sig, atol))


def integral_identity_check(surface, spec, u, n_samples, seed=0):
    """Monte Carlo check of  int (FVu)^2 - int KK (Vu)^2 = int (VFu)^2 - int (Fu)^2.

    Means over Liouville samples estimate integrals up to the common volume
    factor; the identity needs no assumption on the dynamics.
    """
    states = sample_liouville(surface, seed, n_samples)
    x, y, phi = states[:, 0], states[:, 1], states[:, 2]
    d = lambda_frame_data(surface, spec, x, y, phi)
    Fu, _, Vu, VFu, FVu, _ = _second_order(surface, spec, u, x, y, phi)
    lhs_i = FVu ** 2 - d["KK"] * Vu ** 2
    rhs_i = VFu ** 2 - Fu ** 2
    n = n_samples
    return IdentityCheck(lhs=float(lhs_i.mean()), rhs=float(rhs_i.mean()),
                         sigma_lhs=float(lhs_i.std(ddof=1) / np.sqrt(n)),
                         sigma_rhs=float(rhs_i.std(ddof=1) / np.sqrt(n)),
                         n_samples=n, name=getattr(u, "name", "u"))


# ---------------------------------------------------------------------------
# Riccati bundle functions
# ---------------------------------------------------------------------------

@dataclass
class RiccatiValue:
    r_unstable: float        # r^-:  H + r^- V spans with F the weak-unstable E^-
    r_stable: float          # r^+
    burn_in: float
    self_consistency: float

    @property
    def gap(self):
        return self.r_unstable - self.r_stable


def riccati_at(surface, spec, s: UnitTangent, burn_in=20.0, dt=1e-3,
               self_tol=1e-6) -> RiccatiValue:
    """Relax the invariant-line cocycle along the orbit through s.

    Forward relaxation from a backward-precomputed orbit segment gives r^-;
    the mirror construction gives r^+.  Disagreement between the sigma0 = +2
    and -2 initializations (or a relaxation that keeps rotating) signals a
    conjugate point / non-Anosov regime.
    """
    if burn_in < 20.0:
        raise ConfigError("riccati relaxation needs burn_in >= 20")
    prob = _compile.compile_problem(surface, spec)
    n = int(round(burn_in / dt))
    rm, rp, sc, flips, status = _kernels.relax_pair(
        prob, np.float64(s.x), np.float64(s.y), np.float64(s.phi), n, dt)
    if status == _kernels.STATUS_CONJ_POINT or flips > 0:
        raise ConjugatePointError("Riccati relaxation blow-up (conjugate point)")
    check_status(status, stage="riccati")
    if not sc < self_tol:
        raise ConjugatePointError(
            f"Riccati self-consistency {sc:.3e} exceeds {self_tol:.1e}: "
            "degenerate/non-Anosov regime")
    return RiccatiValue(r_unstable=float(rm), r_stable=float(rp),
                        burn_in=burn_in, self_consistency=float(sc))


@dataclass
class RiccatiOrbitReport:
    max_residual: float
    gap_min: float
    t: np.ndarray
    r_unstable: np.ndarray
    r_stable: np.ndarray


def riccati_residual(surface, spec, s0: UnitTangent, T, dt=1e-3, burn_in=20.0,
                     stride=1) -> RiccatiOrbitReport:
    """Along-orbit residual of F(sigma) + (sigma + V(lam)) sigma + KK = 0.

    sigma is the forward-relaxed cocycle slope; the residual uses central
    differences of the recorded sigma(t); r^+ from the mirrored backward
    relaxation gives the bundle gap along the same orbit.
    """
    prob = _compile.compile_problem(surface, spec)
    n_burn = int(round(burn_in / dt))
    n_main = int(round(T / dt))
    n_main -= n_main % stride
    ts, sm, sp, vl, kk, status = _kernels.riccati_orbit(
        prob, np.float64(s0.x), np.float64(s0.y), np.float64(s0.phi),
        n_burn, n_main, dt, stride)
    if status == _kernels.STATUS_CONJ_POINT:
        raise ConjugatePointError("Riccati relaxation blow-up along the orbit")
    check_status(status, stage="riccati")
    hh = stride * dt
    # 5-point stencil: the effective curvature along gaussian-field orbits has
    # strong high-order content and a 2nd-order stencil cannot reach the bound
    dsig = (-sm[4:] + 8.0 * sm[3:-1] - 8.0 * sm[1:-3] + sm[:-4]) / (12.0 * hh)
    mid = slice(2, -2)
    res = np.abs(dsig + (sm[mid] + vl[mid]) * sm[mid] + kk[mid])
    return RiccatiOrbitReport(max_residual=float(res.max()),
                              gap_min=float(np.min(sm - sp)),
                              t=ts, r_unstable=sm + vl, r_stable=sp + vl)


# ---------------------------------------------------------------------------
# positivity identity
# ---------------------------------------------------------------------------

@dataclass
class PositivityCheck:
    lhs: float
    rhs: float
    sigma_lhs: float
    sigma_rhs: float
    n_samples: int
    gap_min: float
    which: str
    name: str = ""

    @property
    def z(self):
        sig = np.hypot(self.sigma_lhs, self.sigma_rhs)
        return abs(self.lhs - self.rhs) / sig if sig > 0 else 0.0

    @property
    def passed(self):
        atol = 1e-12 * (1.0 + abs(self.lhs) + abs(self.rhs))
        sig = np.hypot(self.sigma_lhs, self.sigma_rhs)
        return bool(abs(self.lhs - self.rhs) <= max(3.0 * sig, atol))

    @property
    def rhs_nonnegative(self):
        return bool(self.rhs >= -3.0 * self.sigma_rhs)

    @property
    def rhs_positive_z(self):
        return self.rhs / self.sigma_rhs if self.sigma_rhs > 0 else float("inf")


def positivity_identity_check(surface, spec, psi, n_samples, which="unstable",
                              seed=0, burn_in=20.0, dt=2e-3, self_tol=1e-6):
    """Monte Carlo check of
    int (F psi)^2 - int KK psi^2 = int [F(psi) - r psi + psi V(lam)]^2 >= 0,
    with r evaluated by the Riccati relaxation at every sample."""
    if which not in ("stable", "unstable"):
        raise ConfigError("which must be 'stable' or 'unstable'")
    states = sample_liouville(surface, seed, n_samples)
    prob = _compile.compile_problem(surface, spec)
    n = int(round(burn_in / dt))
    rm, rp, sc, flips, status = _kernels.ensemble_relax(prob, states, n, dt)
    if np.any(status == _kernels.STATUS_CONJ_POINT) or np.any(flips > 0):
        raise ConjugatePointError("conjugate point at a Monte Carlo sample")
    bad = status != _kernels.STATUS_OK
    if np.any(bad):
        check_status(int(status[bad][0]), stage="positivity")
    if not np.all(sc < self_tol):
        raise ConjugatePointError("Riccati self-consistency failure at a sample")
    r = rm if which == "unstable" else rp
    x, y, phi = states[:, 0], states[:, 1], states[:, 2]
    d = lambda_frame_data(surface, spec, x, y, phi)
    Fp, _, _, pv = _first_order(surface, spec, psi, x, y, phi)
    lhs_i = Fp ** 2 - d["KK"] * pv ** 2
    rhs_i = (Fp - r * pv + pv * d["Vlam"]) ** 2
    return PositivityCheck(lhs=float(lhs_i.mean()), rhs=float(rhs_i.mean()),
                           sigma_lhs=float(lhs_i.std(ddof=1) / np.sqrt(n_samples)),
                           sigma_rhs=float(rhs_i.std(ddof=1) / np.sqrt(n_samples)),
                           n_samples=n_samples, gap_min=float(np.min(rm - rp)),
                           which=which, name=getattr(psi, "name", "psi"))


# ---------------------------------------------------------------------------
# Liouville symmetry facts
# ---------------------------------------------------------------------------

@dataclass
class LiouvilleSymmetryReport:
    antithetic_mean_residual: float     # exact cancellation of theta(v)+theta(-v)
    antithetic_square_residual: float   # exact equality of the squared integrals
    mean_theta_v: float
    mean_theta_v_sigma: float
    sq_v: float
    sq_v_sigma: float
    sq_iv: float
    sq_iv_sigma: float
    n_samples: int

    @property
    def mean_ok(self):
        return abs(self.mean_theta_v) <= 3.0 * self.mean_theta_v_sigma

    @property
    def squares_ok(self):
        sig = np.hypot(self.sq_v_sigma, self.sq_iv_sigma)
        return abs(self.sq_v - self.sq_iv) <= 3.0 * sig


def liouville_symmetry_check(surface, theta, n_samples, seed=0):
    """mu-symmetry facts: int theta(v) dmu = 0 and
    int theta(v)^2 dmu = int theta(iv)^2 dmu.

    Antithetic pairing over the quarter-turn cycle cancels both statements
    exactly per sample; independent sampling re-checks them at 3 sigma.
    Reported moments are per unit Liouville volume (Monte Carlo means).
    """
    def theta_along(states, rot):
        x, y = states[:, 0], states[:, 1]
        phi = states[:, 2] + rot
        f, _, _ = surface.fdata(x, y)
        a, b = theta.ab(x, y)
        return np.exp(-f) * (a * np.cos(phi) + b * np.sin(phi))

    base = sample_liouville(surface, seed, n_samples)
    tv = theta_along(base, 0.0)
    tiv = theta_along(base, 0.5 * np.pi)
    tmv = theta_along(base, np.pi)
    tmiv = theta_along(base, 1.5 * np.pi)
    anti_mean = float(np.max(np.abs(tv + tmv)))
    cyc_v = 0.25 * (tv ** 2 + tiv ** 2 + tmv ** 2 + tmiv ** 2)
    cyc_iv = 0.25 * (tiv ** 2 + tmv ** 2 + tmiv ** 2 + tv ** 2)
    anti_sq = float(np.max(np.abs(cyc_v - cyc_iv)))

    ind1 = sample_liouville(surface, seed + 101, n_samples)
    ind2 = sample_liouville(surface, seed + 202, n_samples)
    v1 = theta_along(ind1, 0.0)
    v2 = theta_along(ind2, 0.0)
    iv2 = theta_along(ind2, 0.5 * np.pi)
    rn = np.sqrt(n_samples)
    return LiouvilleSymmetryReport(
        antithetic_mean_residual=anti_mean,
        antithetic_square_residual=anti_sq,
        mean_theta_v=float(v1.mean()), mean_theta_v_sigma=float(v1.std(ddof=1) / rn),
        sq_v=float((v2 ** 2).mean()), sq_v_sigma=float((v2 ** 2).std(ddof=1) / rn),
        sq_iv=float((iv2 ** 2).mean()), sq_iv_sigma=float((iv2 ** 2).std(ddof=1) / rn),
        n_samples=n_samples)
