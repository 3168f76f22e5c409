"""Discretized spacetime charts and the finite-difference stencils on them.

A lattice covers the chart R_t x (box or torus)^n with coordinate maps
t_n = n*dt, x_i = i*dx.  All derivative operators here are centered
second-order stencils; at the two time-end slices (and, for metrics in
``support_contained`` mode, at spatial edges) one-sided second-order
stencils are substituted so that geometric quantities remain defined on
the full window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PERIODIC = "periodic"
SUPPORT_CONTAINED = "support_contained"

_MIN_SIZE = 8
HALO_CELLS = 2


@dataclass(frozen=True)
class LatticeSpacetime:
    """Uniform lattice on a finite time window with flat spatial topology.

    dim: spacetime dimension (1 time + n space, n in {1, 2}).
    shape: grid sizes (N_t, N_x[, N_y]).
    spacings: (dt, dx[, dy]) in geometric units.
    boundary_mode: ``periodic`` (spatial torus) or ``support_contained``
        (spatial box with a reserved 2-cell zero halo for fields).
    """

    shape: tuple
    spacings: tuple
    boundary_mode: str = PERIODIC

    def __post_init__(self):
        if len(self.shape) != len(self.spacings):
            raise ValueError("shape and spacings must have equal length")
        if len(self.shape) not in (2, 3):
            raise ValueError("spacetime dimension must be 2 or 3 (1+1 or 2+1)")
        if self.boundary_mode not in (PERIODIC, SUPPORT_CONTAINED):
            raise ValueError(f"unknown boundary mode {self.boundary_mode!r}")
        for n in self.shape:
            if n < _MIN_SIZE:
                raise ValueError(f"size too small: {n} < {_MIN_SIZE}")
        for h in self.spacings:
            if h <= 0:
                raise ValueError("spacings must be positive")

    @property
    def dim(self):
        return len(self.shape)

    @property
    def n_time(self):
        return self.shape[0]

    @property
    def dt(self):
        return self.spacings[0]

    @property
    def time_window(self):
        return 0.0, (self.shape[0] - 1) * self.spacings[0]

    @property
    def cell_volume(self):
        return float(np.prod(self.spacings))

    def axis_coordinates(self, axis):
        return np.arange(self.shape[axis]) * self.spacings[axis]

    def coordinate_grids(self):
        """Coordinate arrays (t, x[, y]) broadcast to the full grid shape."""
        axes = [self.axis_coordinates(a) for a in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")

    def halo_mask(self):
        """Boolean mask of the reserved spatial halo (empty when periodic)."""
        mask = np.zeros(self.shape, dtype=bool)
        if self.boundary_mode == SUPPORT_CONTAINED:
            for axis in range(1, self.dim):
                sl = [slice(None)] * self.dim
                sl[axis] = slice(0, HALO_CELLS)
                mask[tuple(sl)] = True
                sl[axis] = slice(-HALO_CELLS, None)
                mask[tuple(sl)] = True
        return mask

    # -- stencils -----------------------------------------------------

    def partial(self, values, axis):
        """Centered second-order partial derivative along a lattice axis.

        ``values`` may carry trailing component axes; the stencil acts on
        the leading grid axes only.  Spatial axes wrap in periodic mode
        and use zero extension in support_contained mode (exact for
        halo-respecting fields).  The time axis uses one-sided
        second-order stencils on the first and last slice.
        """
        h = self.spacings[axis]
        if axis == 0:
            return _partial_onesided_ends(values, 0, h)
        if self.boundary_mode == PERIODIC:
            return (np.roll(values, -1, axis) - np.roll(values, 1, axis)) / (2.0 * h)
        return _partial_zero_extension(values, axis, h)

    def partial_geometry(self, values, axis):
        """Partial derivative for geometric data (metric, Christoffels).

        Identical to :meth:`partial` except that spatial edges in
        support_contained mode fall back to one-sided stencils; geometric
        fields are nowhere zero, so zero extension would be wrong there.
        """
        h = self.spacings[axis]
        if axis == 0:
            return _partial_onesided_ends(values, 0, h)
        if self.boundary_mode == PERIODIC:
            return (np.roll(values, -1, axis) - np.roll(values, 1, axis)) / (2.0 * h)
        return _partial_onesided_ends(values, axis, h)

    def slice_partial(self, values, axis):
        """Spatial partial derivative of a single-slice array (axis >= 1)."""
        h = self.spacings[axis]
        ax = axis - 1
        if self.boundary_mode == PERIODIC:
            return (np.roll(values, -1, ax) - np.roll(values, 1, ax)) / (2.0 * h)
        return _partial_zero_extension(values, ax, h)


def _partial_zero_extension(values, axis, h):
    out = np.zeros_like(values)
    fwd = [slice(None)] * values.ndim
    bwd = [slice(None)] * values.ndim
    mid = [slice(None)] * values.ndim
    fwd[axis] = slice(2, None)
    bwd[axis] = slice(0, -2)
    mid[axis] = slice(1, -1)
    out[tuple(mid)] = (values[tuple(fwd)] - values[tuple(bwd)]) / (2.0 * h)
    first = [slice(None)] * values.ndim
    second = [slice(None)] * values.ndim
    first[axis] = 0
    second[axis] = 1
    out[tuple(first)] = values[tuple(second)] / (2.0 * h)
    first[axis] = -1
    second[axis] = -2
    out[tuple(first)] = -values[tuple(second)] / (2.0 * h)
    return out


def _partial_onesided_ends(values, axis, h):
    out = np.empty_like(values)

    def sl(i):
        s = [slice(None)] * values.ndim
        s[axis] = i
        return tuple(s)

    mid = sl(slice(1, -1))
    out[mid] = (values[sl(slice(2, None))] - values[sl(slice(0, -2))]) / (2.0 * h)
    out[sl(0)] = (-1.5 * values[sl(0)] + 2.0 * values[sl(1)] - 0.5 * values[sl(2)]) / h
    out[sl(-1)] = (1.5 * values[sl(-1)] - 2.0 * values[sl(-2)] + 0.5 * values[sl(-3)]) / h
    return out


def build_lattice(shape, spacings, boundary_mode=PERIODIC):
    """Validate parameters and construct a :class:`LatticeSpacetime`."""
    return LatticeSpacetime(tuple(int(n) for n in shape),
                            tuple(float(h) for h in spacings),
                            boundary_mode)
