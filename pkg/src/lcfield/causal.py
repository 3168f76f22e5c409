"""Lattice causal structure: cone masks J_+/J_-, the complements
M_+/M_- used by the relative Cauchy evolution, time-slab partitions of
unity and the admissibility (signature + CFL) gate for evolution.

Cones are one-cell OUTER approximations: a max-plus wavefront sweep
carries a per-node reach credit, seeded with one extra cell, so that all
support-containment statements can be asserted against the computed
masks with a fixed halo.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .util import einsum

from .cache import geo
from .fields import FieldError, MetricField, PerturbationField
from .grid import PERIODIC, LatticeSpacetime

@dataclass(frozen=True)
class Region:
    lattice: LatticeSpacetime
    mask: np.ndarray

    def __post_init__(self):
        if self.mask.shape != self.lattice.shape:
            raise FieldError("region mask shape does not match lattice")

    def __contains__(self, node):
        return bool(self.mask[tuple(node)])

    def complement(self):
        return Region(self.lattice, ~self.mask)

    def full_time_slices(self):
        """Indices of time slices entirely inside the region."""
        axes = tuple(range(1, self.lattice.dim))
        return np.nonzero(self.mask.all(axis=axes))[0]


def cone_speeds(g: MetricField):
    """Per-axis maximal coordinate light speeds c_i(node).

    For g = -(alpha^2 - beta.beta) dt^2 + 2 beta_i dt dx^i + gamma_ij
    dx^i dx^j the null coordinate velocities fill an ellipsoid; the
    extremal speed along axis i is |(gamma^{-1} beta)_i| +
    alpha sqrt((gamma^{-1})_{ii}).
    """
    vals = g.values
    d = g.lattice.dim
    gamma = vals[..., 1:, 1:]
    beta = vals[..., 0, 1:]
    gamma_inv = np.linalg.inv(gamma)
    shift = einsum("...ab,...b->...a", gamma_inv, beta)
    alpha2 = -vals[..., 0, 0] + einsum("...a,...a->...", beta, shift)
    if np.any(alpha2 <= 0):
        raise FieldError("metric slices are not spacelike (alpha^2 <= 0)")
    alpha = np.sqrt(alpha2)
    diag = np.stack([gamma_inv[..., a, a] for a in range(d - 1)], axis=-1)
    return np.abs(shift) + alpha[..., None] * np.sqrt(diag)


def _dilate_axis(mask, axis, radius, periodic):
    """Boolean dilation by ``radius`` cells along one spatial axis."""
    if radius <= 0:
        return mask
    out = mask.copy()
    for j in range(1, radius + 1):
        for sgn in (1, -1):
            if periodic:
                out |= np.roll(mask, sgn * j, axis=axis)
            else:
                shifted = np.zeros_like(mask)
                src = [slice(None)] * mask.ndim
                dst = [slice(None)] * mask.ndim
                if sgn > 0:
                    src[axis] = slice(0, -j)
                    dst[axis] = slice(j, None)
                else:
                    src[axis] = slice(j, None)
                    dst[axis] = slice(0, -j)
                shifted[tuple(dst)] = mask[tuple(src)]
                out |= shifted
    return out


def causal_cone(region: Region, direction, g: MetricField) -> Region:
    """Outer causal future/past J_+/J_- of a node set.

    Slice-by-slice wavefront: nodes entering the cone are dilated by one
    cell (the outer halo); per time step the front spreads by the
    slice-maximal cone slope, with fractional cell reaches accumulated
    across steps so that after n steps the spread is within one cell of
    n * c * dt / dx.  Spatially varying speeds are outer-approximated by
    their slice maximum.
    """
    if direction not in ("future", "past"):
        raise FieldError("direction must be 'future' or 'past'")
    lat = region.lattice
    if g.lattice is not lat:
        raise FieldError("metric and region live on different lattices")
    speeds = cone_speeds(g)
    dt = lat.spacings[0]
    periodic = lat.boundary_mode == PERIODIC
    n_t = lat.shape[0]
    order = range(n_t) if direction == "future" else range(n_t - 1, -1, -1)
    n_space = lat.dim - 1

    out = np.zeros(lat.shape, dtype=bool)
    front = np.zeros(lat.shape[1:], dtype=bool)
    acc = np.zeros(n_space)
    for n in order:
        seeds = region.mask[n]
        if seeds.any():
            grown = seeds
            for axis in range(n_space):
                grown = _dilate_axis(grown, axis, 1, periodic)
            front = front | grown
        out[n] = front
        # spread to the next slice in the sweep direction
        if front.any():
            for axis in range(n_space):
                cells = float(np.max(speeds[n][..., axis])) * dt / lat.spacings[axis + 1]
                acc[axis] += cells
                radius = int(np.floor(acc[axis] + 1e-12))
                acc[axis] -= radius
                front = _dilate_axis(front, axis, radius, periodic)
        else:
            acc[:] = 0.0
    return Region(lat, out)


def causal_hull(region: Region, g: MetricField) -> Region:
    """J(K) = J_+(K) union J_-(K)."""
    fut = causal_cone(region, "future", g)
    past = causal_cone(region, "past", g)
    return Region(region.lattice, fut.mask | past.mask)


def region_from_support(lattice, values, rel_tol=0.0) -> Region:
    """Support mask of a component array; ``rel_tol`` > 0 discards mass
    below rel_tol * max (numerically compact fields)."""
    comp = np.abs(np.asarray(values).reshape(lattice.shape + (-1,)))
    cut = rel_tol * comp.max() if rel_tol else 0.0
    return Region(lattice, np.any(comp > cut, axis=-1))


def rce_regions(h: PerturbationField, g: MetricField):
    """M_+ = M \\ J_-(supp h) and M_- = M \\ J_+(supp h).

    Errors out unless each region still contains a full time slice (a
    Cauchy surface of the lattice window).
    """
    lat = h.lattice
    supp = region_from_support(lat, h.values)
    if not supp.mask.any():
        full = Region(lat, np.ones(lat.shape, dtype=bool))
        return full, full
    past = causal_cone(supp, "past", g)
    future = causal_cone(supp, "future", g)
    m_plus = past.complement()
    m_minus = future.complement()
    if len(m_plus.full_time_slices()) == 0 or len(m_minus.full_time_slices()) == 0:
        raise FieldError("perturbation too close to time boundary: "
                         "no full slice survives in M_+ or M_-")
    return m_plus, m_minus


def smoothstep(u):
    """C^2 quintic smoothstep 6u^5 - 15u^4 + 10u^3 clamped to [0, 1]."""
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0)


@dataclass(frozen=True)
class PartitionOfUnity:
    """Pair (chi_a, chi_r) with chi_a + chi_r = 1 exactly.

    chi_r = 1 for t <= t1, chi_a = 1 for t >= t2; the transition uses
    the quintic smoothstep and depends on t only.
    """

    lattice: LatticeSpacetime
    t1: float
    t2: float

    @property
    def chi_a_profile(self):
        t = self.lattice.axis_coordinates(0)
        return smoothstep((t - self.t1) / (self.t2 - self.t1))

    def chi_a(self):
        return self._broadcast(self.chi_a_profile)

    def chi_r(self):
        return self._broadcast(1.0 - self.chi_a_profile)

    def _broadcast(self, profile):
        shape = (-1,) + (1,) * (self.lattice.dim - 1)
        return np.broadcast_to(profile.reshape(shape), self.lattice.shape).copy()


def partition_of_unity(t1, t2, lattice) -> PartitionOfUnity:
    dt = lattice.dt
    t_end = lattice.time_window[1]
    if not (0.0 < t1 < t2 < t_end):
        raise FieldError("band must satisfy 0 < t1 < t2 < T")
    if t1 < 2 * dt or t_end - t2 < 2 * dt:
        raise FieldError("band must stay >= 2 dt away from the window ends")
    if t2 - t1 < 4 * dt:
        raise FieldError("band too narrow (< 4 dt)")
    return PartitionOfUnity(lattice, float(t1), float(t2))


@dataclass(frozen=True)
class AdmissibilityReport:
    ok: bool
    reason: str = ""
    node: tuple = ()
    max_speed: float = 0.0
    cfl_limit: float = 0.0

    def __bool__(self):
        return self.ok


def admissibility_check(g: MetricField, h, dt=None, spacings=None, cfl=0.5):
    """Accept iff g+h is Lorentzian everywhere and the cone speeds obey
    dt <= cfl * dx_i / c_i on every axis.  Returns a structured report,
    never raises for a rejection.
    """
    lat = g.lattice
    dt = lat.dt if dt is None else dt
    spacings = lat.spacings if spacings is None else spacings
    values = g.values if h is None else g.values + h.values
    try:
        perturbed = MetricField(lat, values)
    except FieldError as exc:
        return AdmissibilityReport(False, f"signature failure: {exc}")
    try:
        speeds = cone_speeds(perturbed)
    except FieldError as exc:
        return AdmissibilityReport(False, f"cone failure: {exc}")
    worst = 0.0
    for axis in range(1, lat.dim):
        c_max = float(np.max(speeds[..., axis - 1]))
        limit = cfl * spacings[axis] / c_max if c_max > 0 else np.inf
        if dt > limit * (1.0 + 1e-12):
            node = np.unravel_index(int(np.argmax(speeds[..., axis - 1])),
                                    lat.shape)
            return AdmissibilityReport(False,
                                       f"CFL violation on axis {axis}: "
                                       f"dt={dt:g} > {limit:g}",
                                       node, c_max, limit)
        worst = max(worst, c_max)
    return AdmissibilityReport(True, "", (), worst, dt)
