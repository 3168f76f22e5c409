"""Deterministic smooth test profiles.

``compact_gaussian`` is the standard source shape of the experiment
suites: a Gaussian multiplied by a polynomial cutoff that reaches an
exact zero at radius 5w, where the Gaussian has already decayed to
1.4e-11.  The product is exactly compactly supported while keeping the
effective smoothness of the Gaussian, so support preconditions hold
bit-exactly and convergence orders stay clean.
"""

from __future__ import annotations

import numpy as np

from .fields import FormField

CUTOFF_RADIUS = 5.0


def compact_gaussian(x, center, width):
    u = (np.asarray(x) - center) / width
    cut = np.clip(1.0 - (u / CUTOFF_RADIUS) ** 2, 0.0, None) ** 3
    return np.exp(-u * u) * cut


def wrapped_gaussian(x, center, width, period):
    """Periodic image sum of compact_gaussian (exactly periodic)."""
    out = np.zeros_like(np.asarray(x, dtype=float))
    images = int(np.ceil(CUTOFF_RADIUS * width / period)) + 1
    for k in range(-images, images + 1):
        out += compact_gaussian(x, center + k * period, width)
    return out


def separable_bump(lattice, centers, widths, amplitude=1.0, wrap_space=True):
    """Product of per-axis compact Gaussians on the lattice nodes."""
    grids = lattice.coordinate_grids()
    prof = np.full(lattice.shape, amplitude)
    for axis, (c, w) in enumerate(zip(centers, widths)):
        if axis > 0 and wrap_space and lattice.boundary_mode == "periodic":
            period = lattice.shape[axis] * lattice.spacings[axis]
            prof = prof * wrapped_gaussian(grids[axis], c, w, period)
        else:
            prof = prof * compact_gaussian(grids[axis], c, w)
    return prof


def perturbation_bump(lattice, components, centers, widths, amplitude=1.0):
    """Compactly supported symmetric perturbation B with the declared box
    computed from the actual support mask.

    ``components`` lists (i, j) index pairs receiving the shared bump
    profile (symmetrized automatically).
    """
    from .fields import PerturbationField

    prof = separable_bump(lattice, centers, widths, amplitude, wrap_space=False)
    d = lattice.dim
    vals = np.zeros(lattice.shape + (d, d))
    for (i, j) in components:
        vals[..., i, j] += prof
        if i != j:
            vals[..., j, i] += prof
    box = support_box(lattice, prof)
    return PerturbationField(lattice, vals, box)


def support_box(lattice, values):
    comp = np.abs(np.asarray(values)).reshape(lattice.shape + (-1,))
    mask = np.any(comp > 0.0, axis=-1)
    box = []
    for axis in range(lattice.dim):
        other = tuple(a for a in range(lattice.dim) if a != axis)
        hits = np.nonzero(mask.any(axis=other))[0]
        if hits.size == 0:
            box.append((lattice.shape[axis] // 2, lattice.shape[axis] // 2 + 1))
        else:
            box.append((int(hits[0]), int(hits[-1]) + 1))
    return tuple(box)


def bump_form(lattice, degree, centers, widths, weights=None, amplitude=1.0):
    """FormField whose components share one bump profile with per-component
    weights."""
    from .fields import form_components

    prof = separable_bump(lattice, centers, widths, amplitude)
    ncomp = len(form_components(lattice.dim, degree))
    if weights is None:
        weights = [1.0] * ncomp
    vals = np.stack([w * prof for w in weights], axis=-1)
    return FormField(lattice, degree, vals, validate_halo=False)
