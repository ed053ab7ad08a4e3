"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Tolerances are pinned here exactly as stated; the heavy ensemble runs use the
numba kernels (warmed by the session fixture so runtime bounds measure
compute, not JIT).
"""

import time

import numpy as np

import gthermo as gt
from gthermo.geometry import ConstantField, EuclidBumpField, UnitTangent
from gthermo.ergodic import EnsembleConfig, lyapunov_spectrum
from gthermo import identities as idn
from gthermo import presets, suites, _compile, _kernels


def report(num, name, ok, detail=""):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num} ({name}): {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


S0 = UnitTangent(0.1, 0.05, 0.3)


def test_criterion_01_bracket_suite(warm_kernels):
    t0 = time.perf_counter()
    rows = suites.bracket_suite(n_states=1000, seed=2024, h=1e-4, bound=1e-5)
    wall = time.perf_counter() - t0
    worst = max(r["lhs"] for r in rows)
    ok = all(r["passed"] for r in rows) and wall < 10.0
    report(1, "frame/bracket", ok,
           f"max residual {worst:.2e} over {len(rows)} surfaces x 1000 states, "
           f"{wall:.1f}s (< 10 s)")


def test_criterion_02_pestov_suite(warm_kernels):
    t0 = time.perf_counter()
    rows = suites.pestov_suite(n_states=1000, seed=2024, h=1e-4, bound=1e-5)
    wall = time.perf_counter() - t0
    worst = max(r["lhs"] for r in rows)
    ok = all(r["passed"] for r in rows) and wall < 60.0
    report(2, "Pestov identity", ok,
           f"{len(rows)} configs, max residual {worst:.2e}, {wall:.1f}s (< 60 s)")


def test_criterion_03_integral_identity(warm_kernels):
    t0 = time.perf_counter()
    rows = suites.integral_suite(n_samples=1_000_000, seed=2024, epsilon=0.3)
    wall = time.perf_counter() - t0
    has_product = any("octagon/gaussian" in r["config_id"] for r in rows)
    worst_z = max(r["z"] for r in rows)
    ok = (len(rows) >= 6 and has_product and all(r["passed"] for r in rows)
          and wall < 300.0)
    report(3, "integral identity", ok,
           f"{len(rows)} configs at n=1e6, worst z={worst_z:.2f}, "
           f"{wall:.0f}s (< 300 s)")


def test_criterion_04_geodesic_baseline(warm_kernels):
    t0 = time.perf_counter()
    res = lyapunov_spectrum(presets.make_surface("octagon"), gt.geodesic_spec(),
                            S0, T=2000.0, dt=1e-3, burn_in=50.0)
    wall = time.perf_counter() - t0
    dev = np.max(np.abs(res.exponents - np.array([1.0, 0.0, -1.0])))
    ok = dev < 0.05 and abs(res.exponent_sum) < 0.02 and wall < 120.0
    report(4, "geodesic baseline", ok,
           f"exponents {np.array2string(res.exponents, precision=4)} "
           f"(dev {dev:.3f} < 0.05), sum {res.exponent_sum:+.2e} (< 0.02), "
           f"{wall:.0f}s (< 120 s)")


def test_criterion_05_magnetic_volume_preservation(warm_kernels):
    octa = presets.make_surface("octagon")
    spec = gt.magnetic_spec(ConstantField(0.5))
    res = lyapunov_spectrum(octa, spec, S0, T=2000.0, dt=1e-3, burn_in=50.0)
    rv = idn.riccati_at(octa, spec, S0, burn_in=20.0)
    r_ref = np.sqrt(1.0 - 0.25)
    ok = abs(res.exponent_sum) < 0.02 and abs(rv.r_unstable - r_ref) < 1e-4
    report(5, "magnetic volume preservation", ok,
           f"exponent sum {res.exponent_sum:+.2e} (< 0.02), "
           f"r_unstable {rv.r_unstable:.6f} vs sqrt(1-m^2) {r_ref:.6f} "
           f"(|diff| {abs(rv.r_unstable - r_ref):.1e} < 1e-4)")


def test_criterion_06_riccati_suite(warm_kernels):
    rows = suites.riccati_suite(T=60.0, dt=1e-3, burn_in=20.0, seed=2024,
                                bound=1e-5, gap_bound=0.5, self_tol=1e-6,
                                epsilon=0.3)
    res_ok = all(r["passed"] for r in rows if r["identity"] == "riccati_residual")
    sc_ok = all(r["passed"] for r in rows if r["identity"] == "riccati_self_consistency")
    gap_ok = all(r["passed"] for r in rows if r["identity"] == "riccati_gap")
    # gap bound also at Liouville-sampled states across the Anosov configs
    octa = presets.make_surface("octagon")
    gaps = []
    for preset, eps in (("none", 0.0), ("magnetic_constant", 1.0),
                        ("exact_bump", 0.3), ("product_bumps", 0.3)):
        spec = presets.make_spec(octa, preset, epsilon=eps)
        prob = _compile.compile_problem(octa, spec)
        states = gt.sample_liouville(octa, 4242, 128)
        rm, rp, sc, fl, st = _kernels.ensemble_relax(prob, states, 10000, 2e-3)
        assert np.all(st == 0) and np.all(fl == 0)
        gaps.append(float(np.min(rm - rp)))
    ok = res_ok and sc_ok and gap_ok and min(gaps) > 0.5
    report(6, "Riccati suite", ok,
           f"residuals/self-consistency/gaps pass={res_ok}/{sc_ok}/{gap_ok}, "
           f"min sampled gap {min(gaps):.3f} (> 0.5)")


def test_criterion_07_positivity_identity(warm_kernels):
    rows = suites.positivity_suite(n_samples=512, seed=2024, epsilon=0.3)
    id_rows = [r for r in rows if r["identity"] == "positivity"]
    nn_rows = [r for r in rows if r["identity"] == "positivity_rhs_nonneg"]
    eq_ok = all(r["passed"] for r in id_rows)
    nn_ok = all(r["passed"] for r in nn_rows)
    nonzero = [r for r in nn_rows if r["test_fn"] != "one"]
    distinct_cfgs = {r["config_id"].rsplit("/", 1)[0] for r in nonzero if r["z"] > 3.0}
    ok = eq_ok and nn_ok and len(distinct_cfgs) >= 3
    report(7, "positivity identity", ok,
           f"{len(id_rows)} checks pass={eq_ok}, RHS nonneg={nn_ok}, "
           f"RHS>3sigma for nonzero psi on {len(distinct_cfgs)} configs (>= 3)")


def test_criterion_08_dichotomy(warm_kernels):
    t0 = time.perf_counter()
    cfg = EnsembleConfig(n_traj=100, T=1000.0, dt=1e-3, burn_in=50.0, seed=12345)
    rows = suites.dichotomy_experiment(cfg, epsilon=0.3)
    wall = time.perf_counter() - t0
    by = {r["config_id"]: r for r in rows}
    ex, pr = by["exact"], by["product"]
    ok = (ex["status"] == "ok" and pr["status"] == "ok"
          and abs(ex["e_birk"]) <= 3 * ex["e_birk_se"]
          and ex["e_birk_se"] <= 5e-3
          and pr["e_birk"] > 3 * pr["e_birk_se"]
          and ex["agree_z"] <= 3.0 and pr["agree_z"] <= 3.0
          and wall < 3600.0)
    report(8, "entropy-production dichotomy", ok,
           f"e_exact={ex['e_birk']:+.2e}±{ex['e_birk_se']:.1e} (|e|<=3σ, σ<=5e-3), "
           f"e_product={pr['e_birk']:+.2e}±{pr['e_birk_se']:.1e} "
           f"(z={pr['e_birk']/pr['e_birk_se']:.1f} >= 3), "
           f"agree z=({ex['agree_z']:.2f},{pr['agree_z']:.2f}), "
           f"{wall:.0f}s (< 3600 s)")


def test_criterion_09_ruelle_positivity_scan(warm_kernels):
    cfg = EnsembleConfig(n_traj=40, T=800.0, dt=1e-3, burn_in=50.0, seed=2025)
    rows = suites.scan_experiment(cfg, [0.0, 0.1, 0.2, 0.3],
                                  preset="product_bumps")
    ok = all(r["status"] == "ok" for r in rows)
    detail = []
    for r in rows:
        se = r["e_birk_se"] if r["e_birk_se"] > 0 else 0.0
        ok = ok and (r["e_birk"] >= -3.0 * se - 1e-12)
        detail.append(f"eps={r['epsilon']:g}: e={r['e_birk']:+.2e}±{se:.1e}")
    report(9, "Ruelle positivity scan", ok, "; ".join(detail))


def _direct_isoenergetic_endpoint(W, U, k, s0, arc_target, dtau=2e-4):
    """Independent fixed-energy integrator of the isoenergetic equation in
    (x, y, vx, vy), flat chart; returns the state at the given arc length."""
    def rhs(s):
        x, y, vx, vy = s
        wx, wy = W.grad(x, y)
        ax, ay = U.grad(x, y)
        v2 = vx * vx + vy * vy
        dot = (ax * vx + ay * vy) / v2
        return np.array([vx, vy, -wx + ax - dot * vx, -wy + ay - dot * vy])

    def rk4(s, h):
        k1 = rhs(s)
        k2 = rhs(s + 0.5 * h * k1)
        k3 = rhs(s + 0.5 * h * k2)
        k4 = rhs(s + h * k3)
        return s + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    sp0 = np.sqrt(2.0 * (k - W.value(s0.x, s0.y)))
    s = np.array([s0.x, s0.y, sp0 * np.cos(s0.phi), sp0 * np.sin(s0.phi)])
    arc = 0.0
    while True:
        speed = np.hypot(s[2], s[3])
        h = dtau
        if arc + speed * dtau >= arc_target:
            # bisect the final step so the trapezoid arc length lands exactly
            lo, hi = 0.0, dtau
            for _ in range(60):
                h = 0.5 * (lo + hi)
                s_trial = rk4(s, h)
                darc = 0.5 * (speed + np.hypot(s_trial[2], s_trial[3])) * h
                if arc + darc < arc_target:
                    lo = h
                else:
                    hi = h
            return rk4(s, 0.5 * (lo + hi))
        s_new = rk4(s, h)
        arc += 0.5 * (speed + np.hypot(s_new[2], s_new[3])) * h
        s = s_new


def test_criterion_10_isoenergetic_reduction():
    flat = presets.make_surface("flat_torus")
    W = EuclidBumpField(np.pi, np.pi, 1.5, 0.2, flat.Lx, flat.Ly)
    U = EuclidBumpField(np.pi - 1.0, np.pi + 0.5, 1.8, 0.3, flat.Lx, flat.Ly)
    k = 1.0
    red = gt.isoenergetic_reduce(W, gt.make_exact_form(U), k, surface=flat)
    spec = gt.gaussian_spec(red)
    s0 = UnitTangent(np.pi + 0.3, np.pi - 0.2, 0.9)
    direct = _direct_isoenergetic_endpoint(W, U, k, s0, 1.0)
    from gthermo.dynamics import FlowState, step
    st = FlowState(s=s0)
    for _ in range(1000):
        st = step(flat, spec, st, 1e-3)
    err = np.hypot(st.s.x - direct[0], st.s.y - direct[1])
    phi_dir = np.arctan2(direct[3], direct[2]) % (2 * np.pi)
    dphi = abs((st.s.phi - phi_dir + np.pi) % (2 * np.pi) - np.pi)
    ok = err < 1e-6 and dphi < 1e-6
    report(10, "isoenergetic reduction", ok,
           f"position mismatch {err:.2e} (< 1e-6), heading mismatch {dphi:.2e} "
           "over unit arc length")


def test_criterion_11_liouville_symmetry():
    rows = suites.liouville_suite(n_samples=200_000, seed=2024)
    anti = [r for r in rows if r["identity"] == "liouville_antithetic"]
    ind = [r for r in rows if r["identity"] in ("liouville_squares", "liouville_mean")]
    closed = [r for r in rows if r["identity"] == "liouville_closed_form"]
    ok = (all(r["passed"] for r in rows) and len(closed) == 1
          and closed[0]["z"] <= 3.0)
    report(11, "Liouville symmetry", ok,
           f"antithetic residual {max(r['lhs'] for r in anti):.1e} (exact), "
           f"{len(ind)} independent checks all within 3 sigma, closed form "
           f"{closed[0]['lhs']:.3f} vs {closed[0]['rhs']:.3f} "
           f"(z={closed[0]['z']:.2f})")
