import numpy as np
import pytest

import gthermo as gt


@pytest.fixture(scope="session")
def flat():
    return gt.flat_torus()


@pytest.fixture(scope="session")
def trig():
    return gt.trig_torus()


@pytest.fixture(scope="session")
def octa():
    return gt.octagon_surface()


@pytest.fixture(scope="session")
def group(octa):
    return octa.group


def random_states(surface, n, seed=0):
    """Seeded Liouville-random states as an (n, 3) array."""
    return gt.sample_liouville(surface, seed, n)


@pytest.fixture(scope="session")
def warm_kernels(octa, flat):
    """Trigger JIT once so runtime-bounded tests measure compute, not compile."""
    from gthermo import _compile, _kernels
    from gthermo import presets
    for surf, spec in [(octa, gt.geodesic_spec()),
                       (octa, presets.make_spec(octa, "product_bumps", epsilon=0.3)),
                       (octa, presets.make_spec(octa, "exact_bump", epsilon=0.3)),
                       (flat, gt.magnetic_spec(gt.geometry.ConstantField(0.5)))]:
        prob = _compile.compile_problem(surf, spec)
        _kernels.flow_traj(prob, 0.1, 0.05, 0.3, 10, 1e-3, 5)
        _kernels.flow_obs(prob, 0.1, 0.05, 0.3, 2, 10, 1e-3,
                          np.array([5], dtype=np.int64))
        _kernels.flow_lyap(prob, 0.1, 0.05, 0.3, 2, 2, 5, 1e-3)
        _kernels.relax_pair(prob, 0.1, 0.05, 0.3, 50, 1e-3)
        _kernels.riccati_orbit(prob, 0.1, 0.05, 0.3, 10, 20, 1e-3, 1)
        states = np.array([[0.1, 0.05, 0.3], [0.0, 0.1, 1.0]])
        _kernels.ensemble_lyap(prob, states, 2, 2, 5, 1e-3)
        _kernels.ensemble_obs(prob, states, 2, 10, 1e-3)
        _kernels.ensemble_relax(prob, states, 50, 1e-3)
    return True
