"""Pointwise tensor algebra of the metric: inverse, Christoffel symbols,
curvature, volume density and the musical isomorphisms.

Conventions (fixed for the whole package):
  * signature (-, +, ..., +), coordinate order (t, x, y);
  * Gamma^k_ij = (1/2) g^kl (d_i g_lj + d_j g_il - d_l g_ij);
  * C_ijk^l = d_j Gamma^l_ik - d_i Gamma^l_jk
              + Gamma^m_ik Gamma^l_jm - Gamma^m_jk Gamma^l_im;
  * R_ik = C_ijk^j, S = g^ik R_ik.  With these signs the 1+1 metric
    diag(-1, a(t)^2) has S = +2*a''/a.
"""

from __future__ import annotations

import numpy as np

from .util import einsum

from .fields import FieldError, MetricField, TensorField
from .grid import LatticeSpacetime


def inverse_metric(g: MetricField) -> TensorField:
    """Pointwise matrix inverse g^ij (contravariant metric)."""
    try:
        inv = np.linalg.inv(g.values)
    except np.linalg.LinAlgError as exc:
        raise FieldError(f"singular metric: {exc}") from exc
    return TensorField(g.lattice, inv, ("u", "u"))


def metric_partials(g: MetricField):
    """d_l g_ij as an array indexed [..., l, i, j] (geometry stencils)."""
    lat = g.lattice
    parts = [lat.partial_geometry(g.values, axis) for axis in range(lat.dim)]
    return np.stack(parts, axis=-3)


def christoffel(g: MetricField, g_inv=None) -> TensorField:
    """Levi-Civita Christoffel symbols Gamma^k_ij, exactly symmetric in ij."""
    if g_inv is None:
        g_inv = inverse_metric(g).values
    dg = metric_partials(g)
    # sym[i, j, l] = d_i g_lj + d_j g_il - d_l g_ij (built symmetric in ij)
    d_i_g_lj = einsum("...ilj->...ijl", dg)
    sym = d_i_g_lj + np.swapaxes(d_i_g_lj, -3, -2) - einsum("...lij->...ijl", dg)
    gamma = 0.5 * einsum("...kl,...ijl->...kij", g_inv, sym)
    return TensorField(g.lattice, einsum("...kij->...ijk", gamma), ("l", "l", "u"))


def curvature_ricci_scalar(g: MetricField):
    """Curvature C_ijk^l, Ricci tensor R_ij = C_ijk^j and scalar S.

    Returns (C, R, S) as TensorFields / plain array (for S).
    """
    lat = g.lattice
    g_inv = inverse_metric(g).values
    gamma = christoffel(g, g_inv).values  # [..., i, j, k] meaning Gamma^k_ij
    dgamma = np.stack([lat.partial_geometry(gamma, axis) for axis in range(lat.dim)],
                      axis=-4)  # [..., m, i, j, k] = d_m Gamma^k_ij
    # C_ijk^l = d_j Gamma^l_ik - d_i Gamma^l_jk + Gamma^m_ik Gamma^l_jm
    #           - Gamma^m_jk Gamma^l_im
    c = (einsum("...jikl->...ijkl", dgamma)
         - einsum("...ijkl->...ijkl", dgamma)
         + einsum("...ikm,...jml->...ijkl", gamma, gamma)
         - einsum("...jkm,...iml->...ijkl", gamma, gamma))
    ricci = einsum("...ijkj->...ik", c)
    scalar = einsum("...ik,...ik->...", g_inv, ricci)
    return (TensorField(lat, c, ("l", "l", "l", "u")),
            TensorField(lat, ricci, ("l", "l")),
            scalar)


def volume_density(g: MetricField):
    """sqrt(|det g|) per node."""
    return np.sqrt(np.abs(g.determinant()))


def raise_lower(omega: TensorField, slot, direction, g: MetricField) -> TensorField:
    """Contract one index slot with g (flat) or g^{-1} (sharp)."""
    if not 0 <= slot < omega.rank:
        raise FieldError(f"slot {slot} out of range for rank {omega.rank}")
    val = omega.valences[slot]
    if direction == "sharp":
        if val != "l":
            raise FieldError("sharp needs a lower index")
        matrix = inverse_metric(g).values
        new_val = "u"
    elif direction == "flat":
        if val != "u":
            raise FieldError("flat needs an upper index")
        matrix = g.values
        new_val = "l"
    else:
        raise FieldError("direction must be 'sharp' or 'flat'")
    moved = np.moveaxis(omega.values, omega.lattice.dim + slot, -1)
    contracted = einsum("...a,...ab->...b", moved, matrix)
    out = np.moveaxis(contracted, -1, omega.lattice.dim + slot)
    valences = list(omega.valences)
    valences[slot] = new_val
    return TensorField(omega.lattice, out, valences)


# -- covariant derivative helpers --------------------------------------

def covariant_derivative_covector(lattice, gamma, omega):
    """nabla_i omega_j for a covector field, [..., i, j]."""
    douter = np.stack([lattice.partial(omega, axis) for axis in range(lattice.dim)],
                      axis=-2)
    return douter - einsum("...ijk,...k->...ij", gamma, omega)


def covariant_derivative_sym2(lattice, gamma, b):
    """nabla_l B_ij for a symmetric (0,2) tensor, [..., l, i, j]."""
    db = np.stack([lattice.partial(b, axis) for axis in range(lattice.dim)], axis=-3)
    corr = einsum("...lim,...mj->...lij", gamma, b)
    return db - corr - np.swapaxes(corr, -1, -2)


def covariant_derivative_antisym2(lattice, gamma, pi):
    """nabla_l Pi_ij for an antisymmetric (0,2) tensor, [..., l, i, j]."""
    dpi = np.stack([lattice.partial(pi, axis) for axis in range(lattice.dim)], axis=-3)
    c1 = einsum("...lim,...mj->...lij", gamma, pi)
    c2 = einsum("...ljm,...im->...lij", gamma, pi)
    return dpi - c1 - c2


# -- presets ------------------------------------------------------------

def minkowski_metric(lattice: LatticeSpacetime) -> MetricField:
    d = lattice.dim
    eta = np.diag([-1.0] + [1.0] * (d - 1))
    vals = np.broadcast_to(eta, lattice.shape + (d, d)).copy()
    return MetricField(lattice, vals)


def frw_metric(lattice: LatticeSpacetime, eps) -> MetricField:
    """diag(-1, a(t)^2, ...) with a(t) = 1 + eps*t."""
    d = lattice.dim
    t = lattice.axis_coordinates(0)
    a = 1.0 + float(eps) * t
    if np.any(a <= 0):
        raise FieldError("frw scale factor crosses zero inside the window")
    vals = np.zeros(lattice.shape + (d, d))
    shape_t = (-1,) + (1,) * (d - 1)
    vals[..., 0, 0] = -1.0
    for axis in range(1, d):
        vals[..., axis, axis] = (a ** 2).reshape(shape_t)
    return MetricField(lattice, vals)


def bump_window(lattice, center, width):
    """Smooth compactly supported profile (1 - r^2)^4 around ``center``.

    ``center`` and ``width`` are in physical coordinates, one entry per
    axis; the profile is an exact zero outside the box |x - c| < w.
    """
    grids = lattice.coordinate_grids()
    prof = np.ones(lattice.shape)
    for axis, (c, w) in enumerate(zip(center, width)):
        u = (grids[axis] - c) / w
        prof = prof * np.clip(1.0 - u * u, 0.0, None) ** 4
    return prof


def bump_metric(lattice, amp, center, width, component=(1, 1)) -> MetricField:
    """Minkowski plus a localized diagonal perturbation of one component."""
    base = minkowski_metric(lattice).values
    i, j = component
    prof = amp * bump_window(lattice, center, width)
    base[..., i, j] += prof
    if i != j:
        base[..., j, i] += prof
    return MetricField(lattice, base)


def metric_preset(lattice, name, **params) -> MetricField:
    if name == "minkowski":
        return minkowski_metric(lattice)
    if name == "frw":
        return frw_metric(lattice, params.get("eps", 0.1))
    if name == "bump":
        return bump_metric(lattice,
                           params.get("amp", 0.1),
                           params["center"],
                           params["width"],
                           tuple(params.get("component", (1, 1))))
    raise FieldError(f"unknown metric preset {name!r}")
