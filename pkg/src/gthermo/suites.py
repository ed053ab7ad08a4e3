"""Built-in verification suites and experiments.

Each function returns a list of row dicts with the documented results-CSV
columns; the CLI serializes them and the acceptance tests assert on them.
Deterministic-bound checks (bracket, Pestov, Riccati residuals) are mapped
onto the common (lhs, rhs, sigma, z) row shape with rhs = 0 and
sigma = bound/3, so pass <=> z <= 3 <=> residual <= bound.
"""

import numpy as np

from .errors import NumericalError, ConjugatePointError
from .geometry import UnitTangent, sample_liouville, bracket_residuals
from .fields import (SMProduct, SMPullback, SMFiberTrig, SMFormAlong, SMSum,
                     SMScale, SMConst, make_exact_form, general_spec)
from .geometry import TrigField
from . import presets, identities, ergodic

VERIFY_COLUMNS = ("schema_version", "identity", "config_id", "surface", "field",
                  "variant", "test_fn", "lhs", "rhs", "sigma", "z", "passed")
RUN_COLUMNS = ("schema_version", "config_id", "field_preset", "epsilon",
               "lam1", "lam2", "lam3", "lam_sum", "e_lyap", "e_lyap_se",
               "e_birk", "e_birk_se", "agree_z", "gap_min", "status")
SCHEMA_VERSION = 1


def _vrow(identity, config_id, surface, fieldp, variant, test_fn, lhs, rhs,
          sigma, z, passed):
    return {"schema_version": SCHEMA_VERSION, "identity": identity,
            "config_id": config_id, "surface": surface, "field": fieldp,
            "variant": variant, "test_fn": test_fn, "lhs": lhs, "rhs": rhs,
            "sigma": sigma, "z": z, "passed": bool(passed)}


def _bound_row(identity, config_id, surface, fieldp, variant, test_fn,
               residual, bound):
    sigma = bound / 3.0
    z = residual / sigma
    return _vrow(identity, config_id, surface, fieldp, variant, test_fn,
                 residual, 0.0, sigma, z, residual <= bound)


def _surfaces():
    return {"flat_torus": presets.make_surface("flat_torus"),
            "trig_torus": presets.make_surface("trig_torus"),
            "octagon": presets.make_surface("octagon")}


def general_test_spec(surface):
    """A genuinely fiber-nonlinear forcing for the 'general' variant."""
    if surface.is_torus:
        lam = SMSum(SMProduct(SMFiberTrig(2, 0.4),
                              SMPullback(TrigField(0.3, 1.0, 0.0, 1.0, 0.0))),
                    SMScale(SMFiberTrig(1, 0.0), 0.2), SMConst(0.1))
    else:
        from .hyperbolic import invariant_bump
        g = surface.group
        W1 = invariant_bump(g, 0.20 + 0.05j, 1.35, 0.5)
        W2 = invariant_bump(g, -0.10 + 0.15j, 1.30, 0.5)
        Wm = invariant_bump(g, 0.05 - 0.12j, 1.25, 0.4)
        lam = SMSum(SMProduct(SMFormAlong(make_exact_form(W1), "v"),
                              SMFormAlong(make_exact_form(W2), "iv")),
                    SMScale(SMPullback(Wm), 0.3))
    return general_spec(lam, name="general_preset")


def _variant_specs(surface, epsilon=0.3):
    """The four spec variants used by the identity matrices."""
    return [("geodesic", presets.make_spec(surface, "none")),
            ("magnetic", presets.make_spec(surface, "magnetic_bump")),
            ("gaussian", presets.make_spec(surface, "product_bumps", epsilon=epsilon)),
            ("general", general_test_spec(surface))]


def _test_functions(surface):
    if surface.is_torus:
        return identities.torus_test_functions()
    return identities.octagon_test_functions(surface.group)


def _sample_states(surface, seed, n):
    return sample_liouville(surface, seed, n)


# ---------------------------------------------------------------------------

def bracket_suite(n_states=1000, seed=2024, h=1e-4, bound=1e-5):
    """Commutation relations at seeded Liouville-random states, per surface."""
    rows = []
    for sname, surf in _surfaces().items():
        states = _sample_states(surf, seed, n_states)
        worst = 0.0
        for row in states:
            worst = max(worst, max(bracket_residuals(surf, UnitTangent(*row), h)))
        rows.append(_bound_row("bracket", f"bracket/{sname}", sname, "-", "-",
                               "-", worst, bound))
    return rows


def pestov_suite(n_states=1000, seed=2024, h=1e-4, bound=1e-5, epsilon=0.3):
    """Pointwise Pestov identity across surfaces x variants x test functions."""
    rows = []
    for sname in ("trig_torus", "octagon"):
        surf = presets.make_surface(sname)
        states = _sample_states(surf, seed, n_states)
        for vname, spec in _variant_specs(surf, epsilon):
            for u in _test_functions(surf):
                res = identities.pestov_residual_states(surf, spec, u, states, h)
                rows.append(_bound_row(
                    "pestov", f"pestov/{sname}/{vname}/{u.name}", sname,
                    spec.name or vname, vname, u.name, float(res.max()), bound))
    return rows


def integral_suite(n_samples=1_000_000, seed=2024, epsilon=0.3):
    """Integral identity on >= 6 configs including the octagon product field."""
    rows = []
    configs = []
    for sname in ("trig_torus", "octagon"):
        surf = presets.make_surface(sname)
        us = _test_functions(surf)
        configs.append((sname, surf, "geodesic", presets.make_spec(surf, "none"), us[1]))
        configs.append((sname, surf, "gaussian",
                        presets.make_spec(surf, "product_bumps", epsilon=epsilon), us[1]))
        configs.append((sname, surf, "gaussian",
                        presets.make_spec(surf, "product_bumps", epsilon=epsilon), us[2]))
        configs.append((sname, surf, "general", general_test_spec(surf), us[2]))
    for i, (sname, surf, vname, spec, u) in enumerate(configs):
        c = identities.integral_identity_check(surf, spec, u, n_samples, seed=seed + i)
        rows.append(_vrow("integral", f"integral/{sname}/{vname}/{u.name}", sname,
                          spec.name or vname, vname, u.name, c.lhs, c.rhs,
                          float(np.hypot(c.sigma_lhs, c.sigma_rhs)), c.z, c.passed))
    return rows


def riccati_suite(T=60.0, dt=1e-3, burn_in=20.0, seed=2024, bound=1e-5,
                  gap_bound=0.5, self_tol=1e-6, epsilon=0.3):
    """Along-orbit Riccati residual, self-consistency, and bundle gap for the
    Anosov-regime configs."""
    surf = presets.make_surface("octagon")
    specs = [("geodesic", presets.make_spec(surf, "none")),
             ("magnetic", presets.make_spec(surf, "magnetic_constant")),
             ("gaussian_exact", presets.make_spec(surf, "exact_bump", epsilon=epsilon)),
             ("gaussian_product", presets.make_spec(surf, "product_bumps", epsilon=epsilon))]
    rows = []
    states = _sample_states(surf, seed, len(specs))
    for (vname, spec), srow in zip(specs, states):
        s0 = UnitTangent(*srow)
        rep = identities.riccati_residual(surf, spec, s0, T, dt=dt, burn_in=burn_in)
        rows.append(_bound_row("riccati_residual", f"riccati/{vname}/residual",
                               "octagon", spec.name or vname, vname, "-",
                               rep.max_residual, bound))
        rv = identities.riccati_at(surf, spec, s0, burn_in=burn_in, dt=dt,
                                   self_tol=self_tol)
        rows.append(_bound_row("riccati_self_consistency",
                               f"riccati/{vname}/self_consistency", "octagon",
                               spec.name or vname, vname, "-",
                               rv.self_consistency, self_tol))
        rows.append(_vrow("riccati_gap", f"riccati/{vname}/gap", "octagon",
                          spec.name or vname, vname, "-", rep.gap_min, gap_bound,
                          0.0, 0.0, rep.gap_min > gap_bound))
    return rows


def positivity_suite(n_samples=512, seed=2024, burn_in=20.0, dt=2e-3,
                     epsilon=0.3):
    """Positivity identity for psi in {1, presets} on >= 3 Anosov configs."""
    surf = presets.make_surface("octagon")
    psi1 = identities.TestFunctionSM(SMConst(1.0), "one")
    presets_u = _test_functions(surf)
    configs = [("geodesic", presets.make_spec(surf, "none"), psi1),
               ("geodesic", presets.make_spec(surf, "none"), presets_u[0]),
               ("magnetic", presets.make_spec(surf, "magnetic_constant"), presets_u[1]),
               ("gaussian_exact", presets.make_spec(surf, "exact_bump", epsilon=epsilon), psi1),
               ("gaussian_product", presets.make_spec(surf, "product_bumps", epsilon=epsilon), presets_u[2]),
               ("gaussian_product", presets.make_spec(surf, "product_bumps", epsilon=epsilon), psi1)]
    rows = []
    for i, (vname, spec, psi) in enumerate(configs):
        for which in ("unstable", "stable"):
            c = identities.positivity_identity_check(
                surf, spec, psi, n_samples, which=which, seed=seed + i,
                burn_in=burn_in, dt=dt)
            rows.append(_vrow("positivity", f"positivity/{vname}/{psi.name}/{which}",
                              "octagon", spec.name or vname, vname, psi.name,
                              c.lhs, c.rhs,
                              float(np.hypot(c.sigma_lhs, c.sigma_rhs)), c.z,
                              c.passed and c.rhs_nonnegative))
            rows.append(_vrow("positivity_rhs_nonneg",
                              f"positivity/{vname}/{psi.name}/{which}/rhs",
                              "octagon", spec.name or vname, vname, psi.name,
                              c.rhs, 0.0, c.sigma_rhs, c.rhs_positive_z,
                              c.rhs >= -3.0 * c.sigma_rhs))
    return rows


def liouville_suite(n_samples=200_000, seed=2024):
    """Liouville symmetry facts; includes the constant-form closed-form value."""
    rows = []
    ft = presets.make_surface("flat_torus")
    a0 = 0.7
    from .fields import make_constant_form
    theta_c = make_constant_form(a0, 0.0, surface=ft)
    configs = [("flat_torus", ft, "constant_form", theta_c)]
    tt = presets.make_surface("trig_torus")
    configs.append(("trig_torus", tt, "exact_bump",
                    presets.make_spec(tt, "exact_bump", epsilon=1.0).form))
    oc = presets.make_surface("octagon")
    configs.append(("octagon", oc, "product_bumps",
                    presets.make_spec(oc, "product_bumps", epsilon=1.0).form))
    for sname, surf, fname, theta in configs:
        rep = identities.liouville_symmetry_check(surf, theta, n_samples, seed=seed)
        rows.append(_bound_row("liouville_antithetic", f"liouville/{sname}/{fname}/antithetic",
                               sname, fname, "-", "-",
                               max(rep.antithetic_mean_residual,
                                   rep.antithetic_square_residual), 1e-12))
        sig = float(np.hypot(rep.sq_v_sigma, rep.sq_iv_sigma))
        z = abs(rep.sq_v - rep.sq_iv) / sig
        rows.append(_vrow("liouville_squares", f"liouville/{sname}/{fname}/squares",
                          sname, fname, "-", "-", rep.sq_v, rep.sq_iv, sig, z,
                          rep.squares_ok))
        z0 = abs(rep.mean_theta_v) / rep.mean_theta_v_sigma
        rows.append(_vrow("liouville_mean", f"liouville/{sname}/{fname}/mean",
                          sname, fname, "-", "-", rep.mean_theta_v, 0.0,
                          rep.mean_theta_v_sigma, z0, rep.mean_ok))
        if sname == "flat_torus":
            vol = surf.liouville_volume()
            closed = a0 ** 2 * surf.Lx * surf.Ly * np.pi
            z1 = abs(rep.sq_v * vol - closed) / (rep.sq_v_sigma * vol)
            rows.append(_vrow("liouville_closed_form",
                              f"liouville/{sname}/{fname}/closed_form", sname,
                              fname, "-", "-", rep.sq_v * vol, closed,
                              rep.sq_v_sigma * vol, z1, z1 <= 3.0))
    return rows


def verify_all(n_states=1000, n_samples=1_000_000, seed=2024, epsilon=0.3,
               positivity_samples=1024, which=None):
    """The full identity suite; `which` optionally restricts by name."""
    parts = {"bracket": lambda: bracket_suite(n_states, seed),
             "pestov": lambda: pestov_suite(n_states, seed, epsilon=epsilon),
             "integral": lambda: integral_suite(n_samples, seed, epsilon=epsilon),
             "riccati": lambda: riccati_suite(seed=seed, epsilon=epsilon),
             "positivity": lambda: positivity_suite(positivity_samples, seed,
                                                    epsilon=epsilon),
             "liouville": lambda: liouville_suite(min(n_samples, 200_000), seed)}
    rows = []
    for name, fn in parts.items():
        if which is None or name in which:
            rows.extend(fn())
    return rows


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _run_row(config_id, fieldp, epsilon, surface, spec, cfg, gap_seed=7):
    row = {"schema_version": SCHEMA_VERSION, "config_id": config_id,
           "field_preset": fieldp, "epsilon": epsilon}
    try:
        lya, birk, agree = ergodic.entropy_production(surface, spec, cfg)
        lam = lya.exponents
        row.update(e_lyap=lya.mean, e_lyap_se=lya.standard_error,
                   e_birk=birk.mean, e_birk_se=birk.standard_error,
                   agree_z=agree.z, lam1=lam[0], lam2=lam[1], lam3=lam[2],
                   lam_sum=float(np.sum(lam)))
        try:
            s0 = UnitTangent(*sample_liouville(surface, gap_seed, 1)[0])
            rep = identities.riccati_residual(surface, spec, s0, T=40.0,
                                              dt=cfg.dt, burn_in=20.0)
            row["gap_min"] = rep.gap_min
        except ConjugatePointError:
            row["gap_min"] = float("nan")
        row["status"] = "ok"
    except NumericalError as e:
        for c in RUN_COLUMNS:
            row.setdefault(c, float("nan"))
        row["status"] = f"failed:{getattr(e, 'stage', 'numerics')}"
    return row


def dichotomy_experiment(cfg: ergodic.EnsembleConfig, epsilon=0.3,
                         exact_preset="exact_bump", product_preset="product_bumps"):
    """Potential-vs-non-potential dichotomy: exact and product fields at the
    same strength."""
    surf = presets.make_surface("octagon")
    rows = []
    for cid, preset in (("exact", exact_preset), ("product", product_preset)):
        spec = presets.make_spec(surf, preset, epsilon=epsilon)
        rows.append(_run_row(cid, preset, epsilon, surf, spec, cfg))
    return rows


def scan_experiment(cfg: ergodic.EnsembleConfig, epsilons, preset="product_bumps",
                    done=()):
    """Entropy production vs field strength; rows independent and resumable."""
    surf = presets.make_surface("octagon")
    rows = []
    for eps in epsilons:
        if any(abs(eps - d) < 1e-12 for d in done):
            continue
        spec = presets.make_spec(surf, preset, epsilon=eps)
        rows.append(_run_row(f"eps={eps:g}", preset, eps, surf, spec, cfg))
    return rows


def lyapunov_experiment(surface_kind, preset, epsilon, s0, T, dt=1e-3,
                        burn_in=50.0, renorm_interval=1.0):
    surf = presets.make_surface(surface_kind)
    spec = presets.make_spec(surf, preset, epsilon=epsilon)
    res = ergodic.lyapunov_spectrum(surf, spec, s0, T, dt=dt,
                                    renorm_interval=renorm_interval,
                                    burn_in=burn_in)
    row = {"schema_version": SCHEMA_VERSION, "config_id": "lyapunov",
           "field_preset": preset, "epsilon": epsilon,
           "lam1": res.exponents[0], "lam2": res.exponents[1],
           "lam3": res.exponents[2], "lam_sum": res.exponent_sum,
           "e_lyap": -res.exponent_sum, "e_lyap_se": float(np.max(res.convergence_error)),
           "e_birk": float("nan"), "e_birk_se": float("nan"),
           "agree_z": float("nan"), "gap_min": float("nan"), "status": "ok"}
    return row, res
