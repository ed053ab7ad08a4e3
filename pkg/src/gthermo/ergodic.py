"""Lyapunov spectra, Birkhoff averages, and the two entropy-production
estimators with ensemble uncertainty quantification.

Entropy production e = -<div F>_SRB = -(sum of Lyapunov exponents).  Both
routes are estimated from Liouville-random seeds after a burn-in (the SRB
measure is the forward push of smooth measures); the chart-coordinate
volume differs from the contact volume by a coboundary, which is why the
two estimators agree only asymptotically and are compared at 3 sigma.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, RenormIntervalError
from .geometry import UnitTangent, sample_liouville
from .dynamics import check_status, flow, builtin_observable
from . import _compile, _kernels


@dataclass
class EnsembleConfig:
    n_traj: int = 100
    T: float = 1000.0
    dt: float = 1e-3
    burn_in: float = 50.0
    seed: int = 12345
    renorm_interval: float = 1.0


@dataclass
class LyapunovResult:
    exponents: np.ndarray          # sorted descending; middle is the flow direction
    history_t: np.ndarray
    history: np.ndarray            # (n_renorm, 3) running estimates
    renorm_interval: float
    convergence_error: np.ndarray  # std of the last decade of history, per exponent
    flow_zero_tol: float = 5e-3

    @property
    def middle_ok(self):
        return bool(abs(self.exponents[1]) <= self.flow_zero_tol)

    @property
    def exponent_sum(self):
        return float(np.sum(self.exponents))


@dataclass
class EstimatorResult:
    mean: float
    standard_error: float
    n_samples: int
    method: str                    # lyapunov_sum | birkhoff_divergence
    converged: bool = True
    drift: float = 0.0
    values: np.ndarray = field(default=None, repr=False)
    exponents: np.ndarray = field(default=None, repr=False)  # ensemble mean, lyapunov_sum only


@dataclass
class AgreementReport:
    difference: float
    combined_sigma: float
    z: float
    passed: bool


def _grid(T, dt, renorm_interval, burn_in):
    steps_per = max(1, int(round(renorm_interval / abs(dt))))
    n_renorm = max(1, int(round(T / (steps_per * abs(dt)))))
    n_burn = int(round(burn_in / abs(dt)))
    return n_burn, n_renorm, steps_per


def lyapunov_spectrum(surface, spec, s0: UnitTangent, T, dt=1e-3,
                      renorm_interval=1.0, burn_in=50.0, flow_zero_tol=5e-3):
    """Benettin QR spectrum along one trajectory (Sasaki-type frame norm)."""
    prob = _compile.compile_problem(surface, spec)
    n_burn, n_renorm, steps_per = _grid(T, dt, renorm_interval, burn_in)
    exps, hist, _, _, status = _kernels.flow_lyap(
        prob, np.float64(s0.x), np.float64(s0.y), np.float64(s0.phi),
        n_burn, n_renorm, steps_per, dt)
    if status == _kernels.STATUS_RENORM_OVERFLOW:
        raise RenormIntervalError("stretch per renorm interval overflowed; "
                                  "reduce renorm_interval")
    check_status(status, stage="lyapunov")
    ts = hist[:, 0]
    last = ts >= ts[-1] / 10.0
    conv = np.std(hist[last, 1:4], axis=0)
    return LyapunovResult(exponents=exps.copy(), history_t=ts.copy(),
                          history=hist[:, 1:4].copy(),
                          renorm_interval=steps_per * abs(dt),
                          convergence_error=conv, flow_zero_tol=flow_zero_tol)


def _estimator(values, method, converged=True, drift=0.0):
    values = np.asarray(values, dtype=float)
    n = values.size
    se = float(np.std(values, ddof=1) / np.sqrt(n)) if n > 1 else float("inf")
    return EstimatorResult(mean=float(values.mean()), standard_error=se,
                           n_samples=n, method=method, converged=converged,
                           drift=drift, values=values)


def agreement(a: EstimatorResult, b: EstimatorResult) -> AgreementReport:
    sig = float(np.hypot(a.standard_error, b.standard_error))
    diff = a.mean - b.mean
    z = abs(diff) / sig if sig > 0 else (0.0 if diff == 0 else float("inf"))
    atol = 1e-12 * (1.0 + abs(a.mean) + abs(b.mean))   # zero-variance floor
    return AgreementReport(difference=diff, combined_sigma=sig, z=z,
                           passed=abs(diff) <= max(3.0 * sig, atol))


def entropy_production(surface, spec, cfg: EnsembleConfig, flipped=False,
                       min_ensemble=30):
    """Both estimators over a Liouville-seeded trajectory ensemble.

    flipped=True estimates the time-reversed system: seeds flipped by pi and
    integration backward; for reversible (gaussian) thermostats the result
    must match the forward value.
    Returns (lyapunov_sum EstimatorResult, birkhoff EstimatorResult,
    AgreementReport).
    """
    if cfg.n_traj < min_ensemble:
        raise ConfigError(f"ensemble of {cfg.n_traj} trajectories is below the "
                          f"minimum of {min_ensemble}")
    prob = _compile.compile_problem(surface, spec)
    states = sample_liouville(surface, cfg.seed, cfg.n_traj).copy()
    dt = cfg.dt
    sign = 1.0
    if flipped:
        states[:, 2] = np.mod(states[:, 2] + np.pi, 2 * np.pi)
        dt = -cfg.dt
        sign = -1.0
    n_burn, n_renorm, steps_per = _grid(cfg.T, dt, cfg.renorm_interval, cfg.burn_in)
    exps, obs, stat = _kernels.ensemble_lyap(prob, states, n_burn, n_renorm,
                                             steps_per, dt)
    bad = stat != _kernels.STATUS_OK
    if np.any(bad):
        check_status(int(stat[bad][0]), stage="entropy_production")
    e_lyap = -np.sum(exps, axis=1)
    e_birk = -sign * obs[:, _kernels.OBS_VLAM]
    # convergence: running-mean drift of the divergence observable on the
    # first seed, last decade vs 5 combined sigma
    ck = np.unique(np.round(np.geomspace(
        10, n_renorm * steps_per, 32)).astype(np.int64))
    _, _, hist, st0 = _kernels.flow_obs(prob, states[0, 0], states[0, 1],
                                        states[0, 2], n_burn,
                                        n_renorm * steps_per, dt, ck)
    birk = _estimator(e_birk, "birkhoff_divergence")
    lya = _estimator(e_lyap, "lyapunov_sum")
    lya.exponents = exps.mean(axis=0)
    if st0 == _kernels.STATUS_OK:
        h = -sign * hist[:, _kernels.OBS_VLAM]
        last = ck >= ck[-1] / 10.0
        drift = float(np.max(np.abs(h[last] - h[-1]))) if np.any(last) else 0.0
        birk.drift = drift
        birk.converged = drift <= 5.0 * max(birk.standard_error, 1e-300)
    return lya, birk, agreement(lya, birk)


_KERNEL_OBS = {"lambda": (_kernels.OBS_LAM, 1.0), "vlam": (_kernels.OBS_VLAM, 1.0),
               "minus_vlam": (_kernels.OBS_VLAM, -1.0),
               "kappa_eff": (_kernels.OBS_KK, 1.0),
               "cos_phi": (_kernels.OBS_COSPHI, 1.0)}


def birkhoff_average(surface, spec, observable, cfg: EnsembleConfig,
                     min_ensemble=30):
    """Ensemble Birkhoff average of an observable (name or callable)."""
    if cfg.n_traj < min_ensemble:
        raise ConfigError(f"ensemble of {cfg.n_traj} trajectories is below the "
                          f"minimum of {min_ensemble}")
    name = observable if isinstance(observable, str) else None
    if name == "theta_v" and spec.variant == "gaussian":
        name = "minus_vlam"          # theta(v) = -V(lambda), exact identity
    if name in _KERNEL_OBS:
        try:
            prob = _compile.compile_problem(surface, spec)
            states = sample_liouville(surface, cfg.seed, cfg.n_traj)
            n_burn = int(round(cfg.burn_in / cfg.dt))
            n_acc = int(round(cfg.T / cfg.dt))
            obs, stat = _kernels.ensemble_obs(prob, states, n_burn, n_acc, cfg.dt)
            bad = stat != _kernels.STATUS_OK
            if np.any(bad):
                check_status(int(stat[bad][0]), stage="birkhoff_average")
            idx, sgn = _KERNEL_OBS[name]
            return _estimator(sgn * obs[:, idx], f"birkhoff:{observable}")
        except _compile.NotCompilable:
            pass
    if name == "const1":
        vals = np.ones(cfg.n_traj)
        return _estimator(vals, "birkhoff:const1")
    # reference path: one flow() per trajectory
    fn = builtin_observable(observable) if isinstance(observable, str) else observable
    states = sample_liouville(surface, cfg.seed, cfg.n_traj)
    vals = np.empty(cfg.n_traj)
    label = observable if isinstance(observable, str) else "custom"
    for i in range(cfg.n_traj):
        summ = flow(surface, spec, UnitTangent(*states[i]), cfg.T, cfg.dt,
                    observers=[(label, fn)], burn_in=cfg.burn_in)
        vals[i] = summ.averages[label]
    return _estimator(vals, f"birkhoff:{label}")


def merge_mean_m2(a, b):
    """Combine (n, mean, M2) accumulators; associative and order-independent
    up to floating-point roundoff (pairwise merging)."""
    na, ma, m2a = a
    nb, mb, m2b = b
    if na == 0:
        return b
    if nb == 0:
        return a
    n = na + nb
    delta = mb - ma
    mean = ma + delta * nb / n
    m2 = m2a + m2b + delta * delta * na * nb / n
    return (n, mean, m2)
