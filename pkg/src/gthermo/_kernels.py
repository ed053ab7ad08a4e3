"""Numba kernels for the long deterministic loops.

Every kernel takes the flattened problem tuple from gthermo._compile.  No
fastmath: results must be bit-reproducible and independent of thread count
(prange iterations write disjoint output slots; reductions happen outside,
in a fixed order).

Problem tuple layout (indices):
  0 surf_kind  1 spec_kind  2 form_kind  3 sp  4 fp  5 sf_kind  6 sf_off
  7 centers    8 sf_cs      9 sf_cc     10 ga 11 gb 12 scale   13 reduce_flag
"""

import math

import numpy as np
from numba import njit, prange

TWO_PI = 2.0 * math.pi
R_IN2 = 0.41421356237309515            # squared Euclidean inradius of the octagon

STATUS_OK = 0
STATUS_REDUCE_DIV = 1
STATUS_LEFT_DOMAIN = 2
STATUS_NONFINITE = 3
STATUS_RENORM_OVERFLOW = 4
STATUS_CONJ_POINT = 5

# observable slots accumulated by the flow drivers
OBS_LAM, OBS_VLAM, OBS_KK, OBS_COSPHI = 0, 1, 2, 3
NOBS = 4


# ---------------------------------------------------------------------------
# surface and scalar fields (scalar math only)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _surf1(sk, sp, x, y):
    if sk == 0:
        return 0.0, 0.0, 0.0
    if sk == 1:
        su = math.sin(sp[3] * x + sp[4])
        cu = math.cos(sp[3] * x + sp[4])
        sv = math.sin(sp[5] * y + sp[6])
        cv = math.cos(sp[5] * y + sp[6])
        return sp[2] * su * sv, sp[2] * sp[3] * cu * sv, sp[2] * sp[5] * su * cv
    w = 1.0 - x * x - y * y
    return math.log(2.0 / w), 2.0 * x / w, 2.0 * y / w


@njit(cache=True)
def _surf2(sk, sp, x, y):
    if sk == 0:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    if sk == 1:
        amp, ax, px, by, py = sp[2], sp[3], sp[4], sp[5], sp[6]
        su = math.sin(ax * x + px)
        cu = math.cos(ax * x + px)
        sv = math.sin(by * y + py)
        cv = math.cos(by * y + py)
        return (amp * su * sv, amp * ax * cu * sv, amp * by * su * cv,
                -amp * ax * ax * su * sv, amp * ax * by * cu * cv,
                -amp * by * by * su * sv)
    w = 1.0 - x * x - y * y
    w2 = w * w
    return (math.log(2.0 / w), 2.0 * x / w, 2.0 * y / w,
            2.0 / w + 4.0 * x * x / w2, 4.0 * x * y / w2,
            2.0 / w + 4.0 * y * y / w2)


@njit(cache=True)
def _S_of_Q(Q):
    """arccosh(1+Q)^2 with first and second Q-derivatives."""
    if Q < 1e-4:
        return (2.0 * Q - Q * Q / 3.0 + 4.0 * Q ** 3 / 45.0,
                2.0 - 2.0 * Q / 3.0 + 4.0 * Q * Q / 15.0,
                -2.0 / 3.0 + 8.0 * Q / 15.0)
    d = math.acosh(1.0 + Q)
    sh = math.sqrt(Q * Q + 2.0 * Q)
    return d * d, 2.0 * d / sh, 2.0 / (sh * sh) - 2.0 * d * (Q + 1.0) / (sh ** 3)


@njit(cache=True)
def _bump_GD(D, rho2, amp):
    """Bump profile in D = d^2 with dG/dD, d2G/dD2."""
    if D >= rho2 * (1.0 - 1e-12):
        return 0.0, 0.0, 0.0
    w = rho2 - D
    g = amp * math.exp(1.0 - rho2 / w)
    return g, -g * rho2 / (w * w), g * (rho2 * rho2 / w ** 4 - 2.0 * rho2 / w ** 3)


@njit(cache=True)
def _sf1(kind, o, fp, cen, cs, cc, x, y):
    """Scalar field value and gradient."""
    if kind == 0:
        return fp[o], 0.0, 0.0
    if kind == 1:
        amp, ax, px, by, py, off = fp[o], fp[o + 1], fp[o + 2], fp[o + 3], fp[o + 4], fp[o + 5]
        su = math.sin(ax * x + px)
        cu = math.cos(ax * x + px)
        sv = math.sin(by * y + py)
        cv = math.cos(by * y + py)
        return amp * su * sv + off, amp * ax * cu * sv, amp * by * su * cv
    if kind == 2:
        cx, cy, rho, amp, off, Lx, Ly = fp[o], fp[o + 1], fp[o + 2], fp[o + 3], fp[o + 4], fp[o + 5], fp[o + 6]
        dx = x - cx
        dy = y - cy
        dx -= Lx * math.floor(dx / Lx + 0.5)
        dy -= Ly * math.floor(dy / Ly + 0.5)
        G, G1, _ = _bump_GD(dx * dx + dy * dy, rho * rho, amp)
        return G + off, 2.0 * dx * G1, 2.0 * dy * G1
    # invariant hyperbolic bump sum
    rho, amp, off, qmax = fp[o], fp[o + 1], fp[o + 2], fp[o + 3]
    rho2 = rho * rho
    w = 1.0 - x * x - y * y
    val = off
    gx = 0.0
    gy = 0.0
    for i in range(cs, cs + cc):
        dx = x - cen[i, 0]
        dy = y - cen[i, 1]
        u = dx * dx + dy * dy
        k0 = 2.0 / cen[i, 2]
        Q = k0 * u / w
        if Q >= qmax:
            continue
        S, S1, _ = _S_of_Q(Q)
        G, G1, _ = _bump_GD(S, rho2, amp)
        Qx = k0 * (2.0 * dx / w + 2.0 * u * x / (w * w))
        Qy = k0 * (2.0 * dy / w + 2.0 * u * y / (w * w))
        dG = G1 * S1
        val += G
        gx += dG * Qx
        gy += dG * Qy
    return val, gx, gy


@njit(cache=True)
def _sf2(kind, o, fp, cen, cs, cc, x, y):
    """Scalar field value, gradient, Hessian."""
    if kind == 0:
        return fp[o], 0.0, 0.0, 0.0, 0.0, 0.0
    if kind == 1:
        amp, ax, px, by, py, off = fp[o], fp[o + 1], fp[o + 2], fp[o + 3], fp[o + 4], fp[o + 5]
        su = math.sin(ax * x + px)
        cu = math.cos(ax * x + px)
        sv = math.sin(by * y + py)
        cv = math.cos(by * y + py)
        return (amp * su * sv + off, amp * ax * cu * sv, amp * by * su * cv,
                -amp * ax * ax * su * sv, amp * ax * by * cu * cv, -amp * by * by * su * sv)
    if kind == 2:
        cx, cy, rho, amp, off, Lx, Ly = fp[o], fp[o + 1], fp[o + 2], fp[o + 3], fp[o + 4], fp[o + 5], fp[o + 6]
        dx = x - cx
        dy = y - cy
        dx -= Lx * math.floor(dx / Lx + 0.5)
        dy -= Ly * math.floor(dy / Ly + 0.5)
        G, G1, G2 = _bump_GD(dx * dx + dy * dy, rho * rho, amp)
        return (G + off, 2.0 * dx * G1, 2.0 * dy * G1,
                4.0 * dx * dx * G2 + 2.0 * G1, 4.0 * dx * dy * G2,
                4.0 * dy * dy * G2 + 2.0 * G1)
    rho, amp, off, qmax = fp[o], fp[o + 1], fp[o + 2], fp[o + 3]
    rho2 = rho * rho
    w = 1.0 - x * x - y * y
    val = off
    gx = 0.0
    gy = 0.0
    hxx = 0.0
    hxy = 0.0
    hyy = 0.0
    for i in range(cs, cs + cc):
        dx = x - cen[i, 0]
        dy = y - cen[i, 1]
        u = dx * dx + dy * dy
        k0 = 2.0 / cen[i, 2]
        Q = k0 * u / w
        if Q >= qmax:
            continue
        S, S1, S2 = _S_of_Q(Q)
        G, G1, G2 = _bump_GD(S, rho2, amp)
        wx = -2.0 * x
        wy = -2.0 * y
        ux = 2.0 * dx
        uy = 2.0 * dy
        w2 = w * w
        Qx = k0 * (ux / w - u * wx / w2)
        Qy = k0 * (uy / w - u * wy / w2)
        Qxx = k0 * (2.0 / w - 2.0 * ux * wx / w2 + 2.0 * u * wx * wx / (w2 * w) + 2.0 * u / w2)
        Qyy = k0 * (2.0 / w - 2.0 * uy * wy / w2 + 2.0 * u * wy * wy / (w2 * w) + 2.0 * u / w2)
        Qxy = k0 * (-(ux * wy + uy * wx) / w2 + 2.0 * u * wx * wy / (w2 * w))
        dG = G1 * S1
        d2G = G2 * S1 * S1 + G1 * S2
        val += G
        gx += dG * Qx
        gy += dG * Qy
        hxx += d2G * Qx * Qx + dG * Qxx
        hxy += d2G * Qx * Qy + dG * Qxy
        hyy += d2G * Qy * Qy + dG * Qyy
    return val, gx, gy, hxx, hxy, hyy


# ---------------------------------------------------------------------------
# forms and the forcing lambda
# ---------------------------------------------------------------------------

@njit(cache=True)
def _form_ab(prob, x, y):
    fk = prob[2]
    fp = prob[4]
    sfk = prob[5]
    sfo = prob[6]
    cen = prob[7]
    scs = prob[8]
    scc = prob[9]
    sc = prob[12]
    if fk == 0:
        return sc * fp[sfo[0]], sc * fp[sfo[0] + 1]
    if fk == 1:
        _, gx, gy = _sf1(sfk[0], sfo[0], fp, cen, scs[0], scc[0], x, y)
        return sc * gx, sc * gy
    v1, _, _ = _sf1(sfk[0], sfo[0], fp, cen, scs[0], scc[0], x, y)
    _, g2x, g2y = _sf1(sfk[1], sfo[1], fp, cen, scs[1], scc[1], x, y)
    return sc * v1 * g2x, sc * v1 * g2y


@njit(cache=True)
def _form_ab_jac(prob, x, y):
    fk = prob[2]
    fp = prob[4]
    sfk = prob[5]
    sfo = prob[6]
    cen = prob[7]
    scs = prob[8]
    scc = prob[9]
    sc = prob[12]
    if fk == 0:
        return sc * fp[sfo[0]], sc * fp[sfo[0] + 1], 0.0, 0.0, 0.0, 0.0
    if fk == 1:
        _, gx, gy, hxx, hxy, hyy = _sf2(sfk[0], sfo[0], fp, cen, scs[0], scc[0], x, y)
        return sc * gx, sc * gy, sc * hxx, sc * hxy, sc * hxy, sc * hyy
    v1, g1x, g1y = _sf1(sfk[0], sfo[0], fp, cen, scs[0], scc[0], x, y)
    _, g2x, g2y, h2xx, h2xy, h2yy = _sf2(sfk[1], sfo[1], fp, cen, scs[1], scc[1], x, y)
    return (sc * v1 * g2x, sc * v1 * g2y,
            sc * (g1x * g2x + v1 * h2xx), sc * (g1y * g2x + v1 * h2xy),
            sc * (g1x * g2y + v1 * h2xy), sc * (g1y * g2y + v1 * h2yy))


@njit(cache=True)
def _lam_val(prob, x, y, cph, sph, E):
    spk = prob[1]
    if spk == 0:
        return 0.0
    if spk == 1:
        v, _, _ = _sf1(prob[5][0], prob[6][0], prob[4], prob[7], prob[8][0], prob[9][0], x, y)
        return prob[12] * v
    a, b = _form_ab(prob, x, y)
    return E * (-a * sph + b * cph)


@njit(cache=True)
def _lam_jac(prob, x, y, cph, sph, E, fx, fy):
    """(lam, dlam/dx, dlam/dy, dlam/dphi) as chart partials."""
    spk = prob[1]
    if spk == 0:
        return 0.0, 0.0, 0.0, 0.0
    if spk == 1:
        v, gx, gy = _sf1(prob[5][0], prob[6][0], prob[4], prob[7], prob[8][0], prob[9][0], x, y)
        sc = prob[12]
        return sc * v, sc * gx, sc * gy, 0.0
    a, b, ax, ay, bx, by = _form_ab_jac(prob, x, y)
    base = -a * sph + b * cph
    lam = E * base
    lx = E * (-fx * base + (-ax * sph + bx * cph))
    ly = E * (-fy * base + (-ay * sph + by * cph))
    lp = E * (-a * cph - b * sph)
    return lam, lx, ly, lp


@njit(cache=True)
def _vlam_kk(prob, x, y, phi):
    """(lam, V(lam), effective curvature KK) at a state."""
    sk = prob[0]
    f, fx, fy, fxx, fxy, fyy = _surf2(sk, prob[3], x, y)
    E = math.exp(-f)
    K = -E * E * (fxx + fyy)
    cph = math.cos(phi)
    sph = math.sin(phi)
    spk = prob[1]
    if spk == 0:
        return 0.0, 0.0, K
    if spk == 1:
        v, gx, gy = _sf1(prob[5][0], prob[6][0], prob[4], prob[7], prob[8][0], prob[9][0], x, y)
        sc = prob[12]
        lam = sc * v
        Hlam = E * (-sph * sc * gx + cph * sc * gy)
        return lam, 0.0, K - Hlam + lam * lam
    a, b, ax, ay, bx, by = _form_ab_jac(prob, x, y)
    base = -a * sph + b * cph
    lam = E * base
    lp = E * (-a * cph - b * sph)
    lx = E * (-fx * base + (-ax * sph + bx * cph))
    ly = E * (-fy * base + (-ay * sph + by * cph))
    lpx = E * (-fx * (-a * cph - b * sph) + (-ax * cph - bx * sph))
    lpy = E * (-fy * (-a * cph - b * sph) + (-ay * cph - by * sph))
    lpp = -lam
    gphi = -fx * sph + fy * cph
    Hlam = E * (-sph * lx + cph * ly - (fx * cph + fy * sph) * lp)
    XVlam = E * (cph * lpx + sph * lpy + gphi * lpp)
    FVlam = XVlam + lam * lpp
    return lam, lp, K - Hlam + lam * lam + FVlam


# ---------------------------------------------------------------------------
# right-hand sides and one-step integrators
# ---------------------------------------------------------------------------

@njit(cache=True)
def _rhs(prob, x, y, phi):
    f, fx, fy = _surf1(prob[0], prob[3], x, y)
    E = math.exp(-f)
    cph = math.cos(phi)
    sph = math.sin(phi)
    lam = _lam_val(prob, x, y, cph, sph, E)
    return E * cph, E * sph, E * (-fx * sph + fy * cph) + lam


@njit(cache=True)
def _rk4(prob, x, y, phi, dt):
    k1x, k1y, k1p = _rhs(prob, x, y, phi)
    k2x, k2y, k2p = _rhs(prob, x + 0.5 * dt * k1x, y + 0.5 * dt * k1y, phi + 0.5 * dt * k1p)
    k3x, k3y, k3p = _rhs(prob, x + 0.5 * dt * k2x, y + 0.5 * dt * k2y, phi + 0.5 * dt * k2p)
    k4x, k4y, k4p = _rhs(prob, x + dt * k3x, y + dt * k3y, phi + dt * k3p)
    return (x + dt * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0,
            y + dt * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0,
            phi + dt * (k1p + 2.0 * k2p + 2.0 * k3p + k4p) / 6.0)


@njit(cache=True)
def _jac(prob, x, y, phi, J):
    """Jacobian of the chart ODE into the 3x3 array J."""
    f, fx, fy, fxx, fxy, fyy = _surf2(prob[0], prob[3], x, y)
    E = math.exp(-f)
    cph = math.cos(phi)
    sph = math.sin(phi)
    lam, lx, ly, lp = _lam_jac(prob, x, y, cph, sph, E, fx, fy)
    gphi = -fx * sph + fy * cph
    J[0, 0] = -fx * E * cph
    J[0, 1] = -fy * E * cph
    J[0, 2] = -E * sph
    J[1, 0] = -fx * E * sph
    J[1, 1] = -fy * E * sph
    J[1, 2] = E * cph
    J[2, 0] = -fx * E * gphi + E * (-fxx * sph + fxy * cph) + lx
    J[2, 1] = -fy * E * gphi + E * (-fxy * sph + fyy * cph) + ly
    J[2, 2] = E * (-fx * cph - fy * sph) + lp


@njit(cache=True)
def _rk4_tan(prob, x, y, phi, M, dt, Jw, K1, K2, K3, K4, Mw):
    """RK4 step of state plus 3x3 tangent matrix (workspaces supplied)."""
    k1x, k1y, k1p = _rhs(prob, x, y, phi)
    _jac(prob, x, y, phi, Jw)
    for i in range(3):
        for j in range(3):
            K1[i, j] = Jw[i, 0] * M[0, j] + Jw[i, 1] * M[1, j] + Jw[i, 2] * M[2, j]
    x2, y2, p2 = x + 0.5 * dt * k1x, y + 0.5 * dt * k1y, phi + 0.5 * dt * k1p
    k2x, k2y, k2p = _rhs(prob, x2, y2, p2)
    _jac(prob, x2, y2, p2, Jw)
    for i in range(3):
        for j in range(3):
            Mw[i, j] = M[i, j] + 0.5 * dt * K1[i, j]
    for i in range(3):
        for j in range(3):
            K2[i, j] = Jw[i, 0] * Mw[0, j] + Jw[i, 1] * Mw[1, j] + Jw[i, 2] * Mw[2, j]
    x3, y3, p3 = x + 0.5 * dt * k2x, y + 0.5 * dt * k2y, phi + 0.5 * dt * k2p
    k3x, k3y, k3p = _rhs(prob, x3, y3, p3)
    _jac(prob, x3, y3, p3, Jw)
    for i in range(3):
        for j in range(3):
            Mw[i, j] = M[i, j] + 0.5 * dt * K2[i, j]
    for i in range(3):
        for j in range(3):
            K3[i, j] = Jw[i, 0] * Mw[0, j] + Jw[i, 1] * Mw[1, j] + Jw[i, 2] * Mw[2, j]
    x4, y4, p4 = x + dt * k3x, y + dt * k3y, phi + dt * k3p
    k4x, k4y, k4p = _rhs(prob, x4, y4, p4)
    _jac(prob, x4, y4, p4, Jw)
    for i in range(3):
        for j in range(3):
            Mw[i, j] = M[i, j] + dt * K3[i, j]
    for i in range(3):
        for j in range(3):
            K4[i, j] = Jw[i, 0] * Mw[0, j] + Jw[i, 1] * Mw[1, j] + Jw[i, 2] * Mw[2, j]
    for i in range(3):
        for j in range(3):
            M[i, j] += dt * (K1[i, j] + 2.0 * K2[i, j] + 2.0 * K3[i, j] + K4[i, j]) / 6.0
    return (x + dt * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0,
            y + dt * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0,
            phi + dt * (k1p + 2.0 * k2p + 2.0 * k3p + k4p) / 6.0)


@njit(cache=True)
def _rk4_coc(prob, x, y, phi, uu, ww, dt):
    """RK4 step of state plus linear cocycles u'' + V(lam) u' + KK u = 0.

    uu, ww are arrays of (u, u') pairs sharing the base trajectory.
    """
    n = uu.shape[0]
    k1x, k1y, k1p = _rhs(prob, x, y, phi)
    _, vl1, kk1 = _vlam_kk(prob, x, y, phi)
    x2, y2, p2 = x + 0.5 * dt * k1x, y + 0.5 * dt * k1y, phi + 0.5 * dt * k1p
    k2x, k2y, k2p = _rhs(prob, x2, y2, p2)
    _, vl2, kk2 = _vlam_kk(prob, x2, y2, p2)
    x3, y3, p3 = x + 0.5 * dt * k2x, y + 0.5 * dt * k2y, phi + 0.5 * dt * k2p
    k3x, k3y, k3p = _rhs(prob, x3, y3, p3)
    _, vl3, kk3 = _vlam_kk(prob, x3, y3, p3)
    x4, y4, p4 = x + dt * k3x, y + dt * k3y, phi + dt * k3p
    k4x, k4y, k4p = _rhs(prob, x4, y4, p4)
    _, vl4, kk4 = _vlam_kk(prob, x4, y4, p4)
    for i in range(n):
        u, w = uu[i], ww[i]
        ku1 = w
        kw1 = -vl1 * w - kk1 * u
        u2, w2 = u + 0.5 * dt * ku1, w + 0.5 * dt * kw1
        ku2 = w2
        kw2 = -vl2 * w2 - kk2 * u2
        u3, w3 = u + 0.5 * dt * ku2, w + 0.5 * dt * kw2
        ku3 = w3
        kw3 = -vl3 * w3 - kk3 * u3
        u4, w4 = u + dt * ku3, w + dt * kw3
        ku4 = w4
        kw4 = -vl4 * w4 - kk4 * u4
        uu[i] = u + dt * (ku1 + 2.0 * ku2 + 2.0 * ku3 + ku4) / 6.0
        ww[i] = w + dt * (kw1 + 2.0 * kw2 + 2.0 * kw3 + kw4) / 6.0
    return (x + dt * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0,
            y + dt * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0,
            phi + dt * (k1p + 2.0 * k2p + 2.0 * k3p + k4p) / 6.0)


# ---------------------------------------------------------------------------
# fundamental-domain reduction
# ---------------------------------------------------------------------------

@njit(cache=True)
def _reduce(prob, x, y, phi, M, with_matrix):
    """Return (x, y, phi, status).  Torus wrap or Dirichlet descent on the
    disk; with_matrix also transports the tangent matrix columns."""
    sk = prob[0]
    if not prob[13]:
        return x, y, phi, STATUS_OK
    if sk != 2:
        return x % prob[3][0], y % prob[3][1], phi % TWO_PI, STATUS_OK
    r2 = x * x + y * y
    if r2 >= 1.0:
        return x, y, phi, STATUS_LEFT_DOMAIN
    if r2 < R_IN2:
        return x, y, phi % TWO_PI, STATUS_OK
    ga = prob[10]
    gb = prob[11]
    z = complex(x, y)
    for _ in range(64):
        best_k = -1
        best_r = abs(z) * (1.0 - 1e-15)
        best_w = z
        for k in range(8):
            w = (ga[k] * z + gb[k]) / (gb[k].conjugate() * z + ga[k].conjugate())
            if abs(w) < best_r:
                best_k = k
                best_r = abs(w)
                best_w = w
        if best_k < 0:
            return z.real, z.imag, phi % TWO_PI, STATUS_OK
        den = gb[best_k].conjugate() * z + ga[best_k].conjugate()
        mp = 1.0 / (den * den)
        phi += math.atan2(mp.imag, mp.real)
        if with_matrix:
            cfac = -2.0 * gb[best_k].conjugate() / den
            for j in range(3):
                dz = complex(M[0, j], M[1, j])
                nz = mp * dz
                M[2, j] += (cfac * dz).imag
                M[0, j] = nz.real
                M[1, j] = nz.imag
        z = best_w
    return z.real, z.imag, phi, STATUS_REDUCE_DIV


# ---------------------------------------------------------------------------
# flow drivers
# ---------------------------------------------------------------------------

@njit(cache=True)
def flow_obs(prob, x, y, phi, n_burn, n_acc, dt, ckpt):
    """Integrate, accumulate observable means after burn-in.

    Returns (final_state[3], means[NOBS], hist[n_ckpt, NOBS], status).
    ckpt: ascending accumulation-step counts at which running means snapshot.
    """
    Mdummy = np.zeros((1, 1))
    status = STATUS_OK
    for _ in range(n_burn):
        x, y, phi = _rk4(prob, x, y, phi, dt)
        x, y, phi, status = _reduce(prob, x, y, phi, Mdummy, False)
        if status != STATUS_OK:
            break
    sums = np.zeros(NOBS)
    means = np.zeros(NOBS)
    hist = np.zeros((ckpt.shape[0], NOBS))
    kc = 0
    final = np.zeros(3)
    if status == STATUS_OK:
        for i in range(n_acc):
            x, y, phi = _rk4(prob, x, y, phi, dt)
            x, y, phi, status = _reduce(prob, x, y, phi, Mdummy, False)
            if status != STATUS_OK:
                break
            if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(phi)):
                status = STATUS_NONFINITE
                break
            lam, vlam, kk = _vlam_kk(prob, x, y, phi)
            sums[OBS_LAM] += lam
            sums[OBS_VLAM] += vlam
            sums[OBS_KK] += kk
            sums[OBS_COSPHI] += math.cos(phi)
            if kc < ckpt.shape[0] and i + 1 == ckpt[kc]:
                for q in range(NOBS):
                    hist[kc, q] = sums[q] / (i + 1.0)
                kc += 1
        if status == STATUS_OK and n_acc > 0:
            for q in range(NOBS):
                means[q] = sums[q] / n_acc
    final[0] = x
    final[1] = y
    final[2] = phi
    return final, means, hist, status


@njit(cache=True)
def _frame_cols(prob, x, y, phi, B):
    f, fx, fy = _surf1(prob[0], prob[3], x, y)
    E = math.exp(-f)
    cph = math.cos(phi)
    sph = math.sin(phi)
    B[0, 0] = E * cph
    B[1, 0] = E * sph
    B[2, 0] = E * (-fx * sph + fy * cph)
    B[0, 1] = -E * sph
    B[1, 1] = E * cph
    B[2, 1] = E * (-fx * cph - fy * sph)
    B[0, 2] = 0.0
    B[1, 2] = 0.0
    B[2, 2] = 1.0


@njit(cache=True)
def _qr_renorm(prob, x, y, phi, M, C, logr):
    """Express M in the orthonormal frame, QR it, rebuild M = B Q.

    Accumulates log of the R diagonal into logr; returns max |log r|.
    """
    f, fx, fy = _surf1(prob[0], prob[3], x, y)
    E = math.exp(-f)
    ef = math.exp(f)
    cph = math.cos(phi)
    sph = math.sin(phi)
    Xp = E * (-fx * sph + fy * cph)
    Hp = E * (-fx * cph - fy * sph)
    for j in range(3):
        mx, my, mp = M[0, j], M[1, j], M[2, j]
        c1 = ef * (cph * mx + sph * my)
        c2 = ef * (-sph * mx + cph * my)
        C[0, j] = c1
        C[1, j] = c2
        C[2, j] = mp - (Xp * c1 + Hp * c2)
    # modified Gram-Schmidt with positive diagonal
    mx_abs = 0.0
    for j in range(3):
        for i in range(j):
            r = C[0, i] * C[0, j] + C[1, i] * C[1, j] + C[2, i] * C[2, j]
            C[0, j] -= r * C[0, i]
            C[1, j] -= r * C[1, i]
            C[2, j] -= r * C[2, i]
        rjj = math.sqrt(C[0, j] ** 2 + C[1, j] ** 2 + C[2, j] ** 2)
        if rjj <= 0.0 or not math.isfinite(rjj):
            return -1.0
        C[0, j] /= rjj
        C[1, j] /= rjj
        C[2, j] /= rjj
        lg = math.log(rjj)
        logr[j] += lg
        if abs(lg) > mx_abs:
            mx_abs = abs(lg)
    for j in range(3):
        q1, q2, q3 = C[0, j], C[1, j], C[2, j]
        M[0, j] = q1 * E * cph + q2 * (-E * sph)
        M[1, j] = q1 * E * sph + q2 * (E * cph)
        M[2, j] = q1 * Xp + q2 * Hp + q3
    return mx_abs


@njit(cache=True)
def flow_lyap(prob, x, y, phi, n_burn, n_renorm, steps_per, dt):
    """Benettin QR run: burn-in, then n_renorm blocks of steps_per steps.

    Returns (exponents[3] desc, history[n_renorm, 4] (t, running exps),
    obs_means[NOBS], final[3], status).  Observables accumulate over the
    whole renormalized span; the Sasaki-type frame norm is used for QR.
    """
    Mdummy = np.zeros((1, 1))
    status = STATUS_OK
    for _ in range(n_burn):
        x, y, phi = _rk4(prob, x, y, phi, dt)
        x, y, phi, status = _reduce(prob, x, y, phi, Mdummy, False)
        if status != STATUS_OK:
            break
    M = np.zeros((3, 3))
    C = np.zeros((3, 3))
    Jw = np.zeros((3, 3))
    K1 = np.zeros((3, 3))
    K2 = np.zeros((3, 3))
    K3 = np.zeros((3, 3))
    K4 = np.zeros((3, 3))
    Mw = np.zeros((3, 3))
    logr = np.zeros(3)
    hist = np.zeros((n_renorm, 4))
    sums = np.zeros(NOBS)
    means = np.zeros(NOBS)
    exps = np.zeros(3)
    final = np.zeros(3)
    if status == STATUS_OK:
        # seed = frame basis times a generic orthonormal mix: no column may
        # start exactly on the (neutral) flow direction or the QR directions
        # take exp(t)*eps time to rotate onto the expanding subspace
        _frame_cols(prob, x, y, phi, C)
        s3 = 1.0 / math.sqrt(3.0)
        s2 = 1.0 / math.sqrt(2.0)
        s6 = 1.0 / math.sqrt(6.0)
        for i in range(3):
            M[i, 0] = s3 * (C[i, 0] + C[i, 1] + C[i, 2])
            M[i, 1] = s2 * (C[i, 0] - C[i, 1])
            M[i, 2] = s6 * (C[i, 0] + C[i, 1] - 2.0 * C[i, 2])
        nsteps = 0
        for r in range(n_renorm):
            for _ in range(steps_per):
                x, y, phi = _rk4_tan(prob, x, y, phi, M, dt, Jw, K1, K2, K3, K4, Mw)
                x, y, phi, status = _reduce(prob, x, y, phi, M, True)
                if status != STATUS_OK:
                    break
                nsteps += 1
                lam, vlam, kk = _vlam_kk(prob, x, y, phi)
                sums[OBS_LAM] += lam
                sums[OBS_VLAM] += vlam
                sums[OBS_KK] += kk
                sums[OBS_COSPHI] += math.cos(phi)
                mmax = 0.0
                for ii in range(3):
                    for jj in range(3):
                        if abs(M[ii, jj]) > mmax:
                            mmax = abs(M[ii, jj])
                if not math.isfinite(mmax):
                    status = STATUS_NONFINITE
                    break
                if mmax > 1e200:
                    status = STATUS_RENORM_OVERFLOW
                    break
            if status != STATUS_OK:
                break
            ok = _qr_renorm(prob, x, y, phi, M, C, logr)
            if ok < 0.0:
                status = STATUS_RENORM_OVERFLOW
                break
            t = (r + 1.0) * steps_per * abs(dt)
            hist[r, 0] = t
            hist[r, 1] = logr[0] / t
            hist[r, 2] = logr[1] / t
            hist[r, 3] = logr[2] / t
        if status == STATUS_OK and nsteps > 0:
            T = n_renorm * steps_per * abs(dt)
            for q in range(NOBS):
                means[q] = sums[q] / nsteps
            exps[0] = logr[0] / T
            exps[1] = logr[1] / T
            exps[2] = logr[2] / T
            # sort descending (3 elements)
            for a in range(3):
                for bidx in range(a + 1, 3):
                    if exps[bidx] > exps[a]:
                        tmp = exps[a]
                        exps[a] = exps[bidx]
                        exps[bidx] = tmp
    final[0] = x
    final[1] = y
    final[2] = phi
    return exps, hist, means, final, status


@njit(cache=True, parallel=True)
def ensemble_lyap(prob, states, n_burn, n_renorm, steps_per, dt):
    """Independent Lyapunov+Birkhoff runs; slot-wise outputs (deterministic
    for any thread count)."""
    n = states.shape[0]
    exps = np.zeros((n, 3))
    obs = np.zeros((n, NOBS))
    stat = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        e, _, m, _, st = flow_lyap(prob, states[i, 0], states[i, 1], states[i, 2],
                                   n_burn, n_renorm, steps_per, dt)
        exps[i, 0] = e[0]
        exps[i, 1] = e[1]
        exps[i, 2] = e[2]
        for q in range(NOBS):
            obs[i, q] = m[q]
        stat[i] = st
    return exps, obs, stat


@njit(cache=True, parallel=True)
def ensemble_obs(prob, states, n_burn, n_acc, dt):
    n = states.shape[0]
    obs = np.zeros((n, NOBS))
    stat = np.zeros(n, dtype=np.int64)
    ckpt = np.zeros(0, dtype=np.int64)
    for i in prange(n):
        _, m, _, st = flow_obs(prob, states[i, 0], states[i, 1], states[i, 2],
                               n_burn, n_acc, dt, ckpt)
        for q in range(NOBS):
            obs[i, q] = m[q]
        stat[i] = st
    return obs, stat


# ---------------------------------------------------------------------------
# Riccati relaxation
# ---------------------------------------------------------------------------

@njit(cache=True)
def _relax_dir(prob, x, y, phi, n_steps, dt, unstable):
    """Relax the invariant-line cocycle toward the state (x, y, phi).

    unstable=True: pre-pass backward, relaxation forward (r^-).
    unstable=False: pre-pass forward, relaxation backward (r^+).
    Three initial slopes (0, +2, -2); returns (r_nominal, self_consistency,
    late_flips, status).
    """
    Mdummy = np.zeros((1, 1))
    h_pre = -dt if unstable else dt
    status = STATUS_OK
    for _ in range(n_steps):
        x, y, phi = _rk4(prob, x, y, phi, h_pre)
        x, y, phi, status = _reduce(prob, x, y, phi, Mdummy, False)
        if status != STATUS_OK:
            return 0.0, np.inf, 0, status
    uu = np.ones(3)
    ww = np.zeros(3)
    ww[1] = 2.0
    ww[2] = -2.0
    h = -h_pre
    late_flips = 0
    q3 = (3 * n_steps) // 4
    for i in range(n_steps):
        s_before = uu[0] > 0.0
        x, y, phi = _rk4_coc(prob, x, y, phi, uu, ww, h)
        x, y, phi, status = _reduce(prob, x, y, phi, Mdummy, False)
        if status != STATUS_OK:
            return 0.0, np.inf, 0, status
        for j in range(3):
            m = max(abs(uu[j]), abs(ww[j]))
            if m > 0.0:
                uu[j] /= m
                ww[j] /= m
            if not (math.isfinite(uu[j]) and math.isfinite(ww[j])):
                return 0.0, np.inf, 0, STATUS_NONFINITE
        if i >= q3 and (uu[0] > 0.0) != s_before:
            late_flips += 1
    _, vlam, _ = _vlam_kk(prob, x, y, phi)
    rr = np.zeros(3)
    for j in range(3):
        if abs(uu[j]) < 1e-300:
            return 0.0, np.inf, late_flips, STATUS_CONJ_POINT
        rr[j] = ww[j] / uu[j] + vlam
    sc = abs(rr[1] - rr[2])
    return rr[0], sc, late_flips, status


@njit(cache=True)
def relax_pair(prob, x, y, phi, n_steps, dt):
    """(r_unstable, r_stable, self_consistency, late_flips, status)."""
    rm, scm, fm, stm = _relax_dir(prob, x, y, phi, n_steps, dt, True)
    rp, scp, fp_, stp = _relax_dir(prob, x, y, phi, n_steps, dt, False)
    st = stm if stm != STATUS_OK else stp
    return rm, rp, max(scm, scp), fm + fp_, st


@njit(cache=True, parallel=True)
def ensemble_relax(prob, states, n_steps, dt):
    n = states.shape[0]
    rm = np.zeros(n)
    rp = np.zeros(n)
    sc = np.zeros(n)
    fl = np.zeros(n, dtype=np.int64)
    stat = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        a, b, c, d, e = relax_pair(prob, states[i, 0], states[i, 1], states[i, 2],
                                   n_steps, dt)
        rm[i] = a
        rp[i] = b
        sc[i] = c
        fl[i] = d
        stat[i] = e
    return rm, rp, sc, fl, stat


@njit(cache=True)
def riccati_orbit(prob, x, y, phi, n_burn, n_main, dt, stride):
    """sigma^- (forward-relaxed) and sigma^+ (backward-relaxed) along one
    orbit, sampled every `stride` steps on the central window.

    Forward pass covers n_burn + n_main + n_burn steps; the recorded window
    is [n_burn, n_burn + n_main], where both relaxations are settled.
    Returns (ts, sig_minus, sig_plus, vlam, kk, status).
    """
    Mdummy = np.zeros((1, 1))
    n_samp = n_main // stride + 1
    ts = np.zeros(n_samp)
    sm = np.zeros(n_samp)
    sp_ = np.zeros(n_samp)
    vl = np.zeros(n_samp)
    kks = np.zeros(n_samp)
    status = STATUS_OK
    uu = np.ones(1)
    ww = np.zeros(1)
    n_total = n_burn + n_main + n_burn
    for i in range(n_total):
        x, y, phi = _rk4_coc(prob, x, y, phi, uu, ww, dt)
        x, y, phi, status = _reduce(prob, x, y, phi, Mdummy, False)
        if status != STATUS_OK:
            return ts, sm, sp_, vl, kks, status
        m = max(abs(uu[0]), abs(ww[0]))
        if m > 0.0:
            uu[0] /= m
            ww[0] /= m
        if i >= n_burn and (i - n_burn) % stride == 0 and (i - n_burn) // stride < n_samp:
            k = (i - n_burn) // stride
            if abs(uu[0]) < 1e-300:
                return ts, sm, sp_, vl, kks, STATUS_CONJ_POINT
            lam, vlam, kk = _vlam_kk(prob, x, y, phi)
            ts[k] = (i + 1.0) * dt
            sm[k] = ww[0] / uu[0]
            vl[k] = vlam
            kks[k] = kk
    # backward pass from the final state
    uu[0] = 1.0
    ww[0] = 0.0
    for i in range(n_total):
        x, y, phi = _rk4_coc(prob, x, y, phi, uu, ww, -dt)
        x, y, phi, status = _reduce(prob, x, y, phi, Mdummy, False)
        if status != STATUS_OK:
            return ts, sm, sp_, vl, kks, status
        m = max(abs(uu[0]), abs(ww[0]))
        if m > 0.0:
            uu[0] /= m
            ww[0] /= m
        ifwd = n_total - (i + 1)      # forward state index the backward pass sits at
        j = ifwd - n_burn - 1         # forward sample k sits at index n_burn + k*stride + 1
        if 0 <= j <= n_main and j % stride == 0 and j // stride < n_samp:
            if abs(uu[0]) < 1e-300:
                return ts, sm, sp_, vl, kks, STATUS_CONJ_POINT
            sp_[j // stride] = ww[0] / uu[0]
    return ts, sm, sp_, vl, kks, status


@njit(cache=True)
def flow_traj(prob, x, y, phi, n_steps, dt, stride):
    """Strided trajectory record: states[(n_steps//stride)+1, 3], status."""
    Mdummy = np.zeros((1, 1))
    m = n_steps // stride + 1
    out = np.zeros((m, 3))
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = phi
    status = STATUS_OK
    k = 1
    for i in range(n_steps):
        x, y, phi = _rk4(prob, x, y, phi, dt)
        x, y, phi, status = _reduce(prob, x, y, phi, Mdummy, False)
        if status != STATUS_OK:
            break
        if (i + 1) % stride == 0 and k < m:
            out[k, 0] = x
            out[k, 1] = y
            out[k, 2] = phi
            k += 1
    return out[:k], status
