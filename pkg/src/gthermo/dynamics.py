"""Time integration of the thermostat flow on SM and of its tangent flow.

Chart ODE (unit speed by construction, heading parametrization):
    x'   = e^{-f} cos(phi)
    y'   = e^{-f} sin(phi)
    phi' = e^{-f} (-f_x sin(phi) + f_y cos(phi)) + lambda(x, y, phi)

Fixed-step classical RK4; fundamental-domain reduction between steps with
exact Mobius transport of tangent data.  Compilable configurations run
through the numba kernels; anything else uses the pure-python reference
integrator below (the two are cross-checked in the tests).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError, ReductionDivergenceError
from .geometry import UnitTangent, frame_components
from .fields import lambda_frame_data
from . import _compile
from . import _kernels

DT_MAX_DEFAULT = 1e-3

_STATUS_MSG = {
    _kernels.STATUS_REDUCE_DIV: "fundamental-domain reduction exceeded 64 steps",
    _kernels.STATUS_LEFT_DOMAIN: "trajectory left the chart domain",
    _kernels.STATUS_NONFINITE: "non-finite state during integration",
    _kernels.STATUS_RENORM_OVERFLOW: "tangent frame overflow before renormalization",
    _kernels.STATUS_CONJ_POINT: "Riccati relaxation degenerate (conjugate point)",
}


def check_status(status, stage="integration"):
    if status == _kernels.STATUS_OK:
        return
    msg = _STATUS_MSG.get(int(status), f"kernel status {status}")
    if status == _kernels.STATUS_REDUCE_DIV:
        raise ReductionDivergenceError(msg)
    err = NumericalError(f"{stage}: {msg}")
    err.stage = stage
    raise err


@dataclass
class FlowState:
    s: UnitTangent
    t: float = 0.0
    word_log: list = field(default_factory=list)


@dataclass
class TangentFrameState:
    """3x3 matrix of tangent vectors in chart coordinates (columns)."""

    M: np.ndarray

    @classmethod
    def frame_basis(cls, surface, s: UnitTangent):
        X, H, V = frame_components(surface, np.float64(s.x), np.float64(s.y),
                                   np.float64(s.phi))
        return cls(np.column_stack([X, H, V]).astype(float))


# ---------------------------------------------------------------------------
# pure-python reference engine (vectorized over states where useful)
# ---------------------------------------------------------------------------

def rhs(surface, spec, states):
    """Chart ODE right-hand side for an (n, 3) state array."""
    x, y, phi = states[..., 0], states[..., 1], states[..., 2]
    f, fx, fy = surface.fdata(x, y)
    E = np.exp(-f)
    c, s = np.cos(phi), np.sin(phi)
    lam = spec.lambda7(surface, x, y, phi)[0]
    return np.stack([E * c, E * s, E * (-fx * s + fy * c) + lam], axis=-1)


def rhs_jacobian(surface, spec, states):
    """Jacobian of the chart ODE, shape (n, 3, 3)."""
    x, y, phi = states[..., 0], states[..., 1], states[..., 2]
    f, fx, fy, fxx, fxy, fyy = surface.fdata2(x, y)
    E = np.exp(-f)
    c, s = np.cos(phi), np.sin(phi)
    lam, lx, ly, lp = spec.lambda7(surface, x, y, phi)[:4]
    gphi = -fx * s + fy * c
    J = np.empty(states.shape[:-1] + (3, 3))
    J[..., 0, 0] = -fx * E * c
    J[..., 0, 1] = -fy * E * c
    J[..., 0, 2] = -E * s
    J[..., 1, 0] = -fx * E * s
    J[..., 1, 1] = -fy * E * s
    J[..., 1, 2] = E * c
    J[..., 2, 0] = -fx * E * gphi + E * (-fxx * s + fxy * c) + lx
    J[..., 2, 1] = -fy * E * gphi + E * (-fxy * s + fyy * c) + ly
    J[..., 2, 2] = E * (-fx * c - fy * s) + lp
    return J


def rk4_state(surface, spec, states, dt):
    k1 = rhs(surface, spec, states)
    k2 = rhs(surface, spec, states + 0.5 * dt * k1)
    k3 = rhs(surface, spec, states + 0.5 * dt * k2)
    k4 = rhs(surface, spec, states + dt * k3)
    return states + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


def rk4_state_tangent(surface, spec, states, M, dt):
    """Joint RK4 of state and tangent matrix (M shape (..., 3, 3))."""
    def jmul(sts, mats):
        return np.einsum("...ij,...jk->...ik", rhs_jacobian(surface, spec, sts), mats)

    k1 = rhs(surface, spec, states)
    K1 = jmul(states, M)
    s2 = states + 0.5 * dt * k1
    k2 = rhs(surface, spec, s2)
    K2 = jmul(s2, M + 0.5 * dt * K1)
    s3 = states + 0.5 * dt * k2
    k3 = rhs(surface, spec, s3)
    K3 = jmul(s3, M + 0.5 * dt * K2)
    s4 = states + dt * k3
    k4 = rhs(surface, spec, s4)
    K4 = jmul(s4, M + dt * K3)
    return (states + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0,
            M + dt * (K1 + 2 * K2 + 2 * K3 + K4) / 6.0)


def _reduce_py(surface, s: UnitTangent, M=None):
    """Wrap/reduce a state; returns (state, word, M)."""
    if surface.is_torus:
        x, y = surface.wrap(s.x, s.y)
        return UnitTangent(float(x), float(y), s.phi), [], M
    group = surface.group
    red, word = group.reduce(s)
    if M is not None and word:
        from .hyperbolic import transport_matrix, apply_to_state
        cur = s
        for k in word:
            M = transport_matrix(group.generators[k], cur, M)
            cur = apply_to_state(group.generators[k], cur)
    return red, word, M


def step(surface, spec, state: FlowState, dt, dt_max=DT_MAX_DEFAULT) -> FlowState:
    """One RK4 step with reduction; local truncation error O(dt^5)."""
    if abs(dt) > dt_max:
        raise ConfigError(f"dt {dt} exceeds dt_max {dt_max}")
    arr = rk4_state(surface, spec, state.s.as_array(), dt)
    if not np.all(np.isfinite(arr)):
        raise NumericalError("non-finite state during integration")
    s_new = UnitTangent(float(arr[0]), float(arr[1]), float(arr[2]))
    s_new, word, _ = _reduce_py(surface, s_new)
    return FlowState(s=s_new, t=state.t + dt, word_log=state.word_log + word)


def variational_step(surface, spec, state: FlowState, tangent: TangentFrameState,
                     dt, dt_max=DT_MAX_DEFAULT):
    """Joint step of state and tangent matrix; returns (FlowState, TangentFrameState)."""
    if abs(dt) > dt_max:
        raise ConfigError(f"dt {dt} exceeds dt_max {dt_max}")
    arr, M = rk4_state_tangent(surface, spec, state.s.as_array(), tangent.M.copy(), dt)
    s_new = UnitTangent(float(arr[0]), float(arr[1]), float(arr[2]))
    s_new, word, M = _reduce_py(surface, s_new, M)
    return (FlowState(s=s_new, t=state.t + dt, word_log=state.word_log + word),
            TangentFrameState(M=M))


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

def builtin_observable(name):
    """Vectorized observable over (surface, spec, states)."""
    def from_data(key, sign=1.0):
        def fn(surface, spec, states):
            d = lambda_frame_data(surface, spec, states[:, 0], states[:, 1], states[:, 2])
            return sign * d[key]
        return fn

    table = {
        "const1": lambda surface, spec, states: np.ones(states.shape[0]),
        "cos_phi": lambda surface, spec, states: np.cos(states[:, 2]),
        "lambda": from_data("lam"),
        "vlam": from_data("Vlam"),
        "minus_vlam": from_data("Vlam", -1.0),
        "kappa_eff": from_data("KK"),
    }
    if name == "theta_v":
        def theta_v(surface, spec, states):
            if spec.variant != "gaussian":
                raise ConfigError("theta_v observable needs a gaussian spec")
            from .fields import SMFormAlong
            return SMFormAlong(spec.form, "v").eval7(
                surface, states[:, 0], states[:, 1], states[:, 2])[0]
        return theta_v
    if name not in table:
        raise ConfigError(f"unknown observable {name!r}")
    return table[name]


@dataclass
class TrajectorySummary:
    final: FlowState
    averages: dict
    history_t: np.ndarray
    history: dict            # name -> running means at history_t
    n_steps: int


def _log_checkpoints(n_steps, n_hist=64):
    if n_steps < 2:
        return np.array([n_steps], dtype=np.int64)
    pts = np.unique(np.round(np.geomspace(1, n_steps, n_hist)).astype(np.int64))
    return pts


def flow(surface, spec, s0: UnitTangent, T, dt, observers=("lambda", "vlam"),
         burn_in=0.0, dump_path=None, dump_stride=100, dt_max=DT_MAX_DEFAULT):
    """Integrate for time T (after burn_in), accumulating Birkhoff averages.

    observers: names of built-in observables or (name, callable) pairs; the
    running convergence history is sampled logarithmically in time.
    """
    if T <= 0:
        raise ConfigError("T must be positive")
    if abs(dt) > dt_max:
        raise ConfigError(f"dt {dt} exceeds dt_max {dt_max}")
    n_burn = int(round(burn_in / abs(dt)))
    n_acc = int(round(T / abs(dt)))
    sgn = 1.0 if dt > 0 else -1.0

    obs = []
    for o in observers:
        if isinstance(o, str):
            obs.append((o, builtin_observable(o)))
        else:
            obs.append(o)

    try:
        prob = _compile.compile_problem(surface, spec)
        states, status = _kernels.flow_traj(prob, np.float64(s0.x), np.float64(s0.y),
                                            np.float64(s0.phi), n_burn + n_acc,
                                            sgn * abs(dt), 1)
        check_status(status)
        samples = states[n_burn + 1:]
        final_s = UnitTangent(*states[-1])
        word_log = None   # kernel path does not keep the deck word
    except _compile.NotCompilable:
        st = FlowState(s=s0)
        samples = np.empty((n_acc, 3))
        for i in range(n_burn):
            st = step(surface, spec, st, sgn * abs(dt), dt_max=dt_max)
        for i in range(n_acc):
            st = step(surface, spec, st, sgn * abs(dt), dt_max=dt_max)
            samples[i] = st.s.as_array()
        final_s = st.s
        word_log = st.word_log

    ckpt = _log_checkpoints(samples.shape[0])
    averages = {}
    history = {}
    for name, fn in obs:
        vals = np.asarray(fn(surface, spec, samples), dtype=float)
        csum = np.cumsum(vals)
        averages[name] = float(csum[-1] / vals.size)
        history[name] = csum[ckpt - 1] / ckpt
    history_t = ckpt * abs(dt)

    if dump_path is not None:
        idx = np.arange(0, samples.shape[0], dump_stride)
        cols = [("t", (idx + 1) * abs(dt))]
        cols += [(c, samples[idx, j]) for j, c in enumerate(("x", "y", "phi"))]
        partial = {name: np.cumsum(np.asarray(fn(surface, spec, samples)))
                   for name, fn in obs}
        with open(dump_path, "w") as fh:
            header = [c for c, _ in cols] + [f"mean_{name}" for name, _ in obs]
            fh.write(",".join(header) + "\n")
            for row, i in enumerate(idx):
                line = [repr(float(v[row])) for _, v in cols]
                line += [repr(float(partial[name][i] / (i + 1))) for name, _ in obs]
                fh.write(",".join(line) + "\n")

    final = FlowState(s=final_s, t=sgn * (burn_in + T),
                      word_log=word_log if word_log is not None else [])
    return TrajectorySummary(final=final, averages=averages,
                             history_t=history_t, history=history,
                             n_steps=n_burn + n_acc)
