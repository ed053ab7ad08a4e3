"""Flatten a (surface, spec) pair into plain arrays for the numba kernels.

Only the configurations the long-running experiments use are compilable:
torus/disk surfaces, geodesic/magnetic/gaussian specs, and const/exact/
product forms over const/trig/euclid-bump/invariant-bump scalar fields.
Everything else runs through the pure-python reference engine in
gthermo.dynamics.
"""

import numpy as np

from .geometry import ConstantField, TrigField, EuclidBumpField
from .hyperbolic import ScalarFieldInvariant, OCT_HYP_RADIUS
from .fields import (ConstantForm, ExactForm, ProductForm, ScaledForm, ZeroForm)

SURF_FLAT, SURF_TRIG, SURF_DISK = 0, 1, 2
SPEC_GEO, SPEC_MAG, SPEC_GAU = 0, 1, 2
FORM_CONST, FORM_EXACT, FORM_PRODUCT = 0, 1, 2
SF_CONST, SF_TRIG, SF_EBUMP, SF_HBUMP = 0, 1, 2, 3

# extra reach beyond the octagon for kernel-side bump pruning; reduction keeps
# trajectories within a step of the fundamental domain
_PRUNE_MARGIN = 0.5


class NotCompilable(Exception):
    pass


def _pack_sf(field, fp, centers, sf_kind, sf_off, sf_cs, sf_cc, slot):
    sf_off[slot] = len(fp)
    if isinstance(field, ConstantField):
        sf_kind[slot] = SF_CONST
        fp.append(field.c)
    elif isinstance(field, TrigField):
        sf_kind[slot] = SF_TRIG
        fp.extend([field.amp, field.ax, field.px, field.by, field.py, field.offset])
    elif isinstance(field, EuclidBumpField):
        sf_kind[slot] = SF_EBUMP
        fp.extend([field.cx, field.cy, field.rho, field.amp, field.offset,
                   field.Lx, field.Ly])
    elif isinstance(field, ScalarFieldInvariant):
        sf_kind[slot] = SF_HBUMP
        qmax = np.cosh(field.rho) - 1.0
        fp.extend([field.rho, field.amp, 0.0, qmax])
        keep = field._prune(np.tanh(0.5 * (OCT_HYP_RADIUS + _PRUNE_MARGIN)))
        pts = field.centers[keep]
        sf_cs[slot] = len(centers)
        sf_cc[slot] = pts.size
        for p in pts:
            centers.append((p.real, p.imag, 1.0 - abs(p) ** 2))
    else:
        raise NotCompilable(type(field).__name__)


def compile_problem(surface, spec, reduce_domain=True):
    """Return the kernel argument tuple, or raise NotCompilable."""
    sp = np.zeros(7)
    if surface.is_torus:
        sp[0], sp[1] = surface.Lx, surface.Ly
        if isinstance(surface.f, ConstantField) and surface.f.c == 0.0:
            surf_kind = SURF_FLAT
        elif isinstance(surface.f, TrigField):
            surf_kind = SURF_TRIG
            sp[2:7] = [surface.f.amp, surface.f.ax, surface.f.px,
                       surface.f.by, surface.f.py]
            if surface.f.offset != 0.0:
                raise NotCompilable("trig conformal exponent with offset")
        else:
            raise NotCompilable(type(surface.f).__name__)
    else:
        surf_kind = SURF_DISK

    fp = []
    centers = []
    sf_kind = np.zeros(2, dtype=np.int64)
    sf_off = np.zeros(2, dtype=np.int64)
    sf_cs = np.zeros(2, dtype=np.int64)
    sf_cc = np.zeros(2, dtype=np.int64)
    form_kind = -1
    scale = 1.0

    if spec.variant == "geodesic":
        spec_kind = SPEC_GEO
    elif spec.variant == "magnetic":
        spec_kind = SPEC_MAG
        _pack_sf(spec.m_field, fp, centers, sf_kind, sf_off, sf_cs, sf_cc, 0)
    elif spec.variant == "gaussian":
        spec_kind = SPEC_GAU
        form = spec.form
        while isinstance(form, ScaledForm):
            scale *= form.c
            form = form.base
        if isinstance(form, (ConstantForm, ZeroForm)):
            form_kind = FORM_CONST
            sf_off[0] = len(fp)
            fp.extend([form.a0, form.b0])
        elif isinstance(form, ExactForm):
            form_kind = FORM_EXACT
            _pack_sf(form.W, fp, centers, sf_kind, sf_off, sf_cs, sf_cc, 0)
        elif isinstance(form, ProductForm):
            form_kind = FORM_PRODUCT
            _pack_sf(form.W1, fp, centers, sf_kind, sf_off, sf_cs, sf_cc, 0)
            _pack_sf(form.W2, fp, centers, sf_kind, sf_off, sf_cs, sf_cc, 1)
        else:
            raise NotCompilable(type(form).__name__)
    else:
        raise NotCompilable(f"spec variant {spec.variant}")

    if surface.is_torus or surface.group is None:
        ga = np.zeros(8, dtype=np.complex128)
        gb = np.zeros(8, dtype=np.complex128)
    else:
        ga = np.array([g.a for g in surface.group.generators], dtype=np.complex128)
        gb = np.array([g.b for g in surface.group.generators], dtype=np.complex128)

    cen = np.asarray(centers, dtype=float).reshape(-1, 3)
    return (np.int64(surf_kind), np.int64(spec_kind), np.int64(form_kind),
            sp, np.asarray(fp, dtype=float), sf_kind, sf_off, cen, sf_cs, sf_cc,
            ga, gb, np.float64(scale), np.bool_(reduce_domain))


def is_compilable(surface, spec):
    try:
        compile_problem(surface, spec)
        return True
    except NotCompilable:
        return False
