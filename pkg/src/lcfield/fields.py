"""Field containers: generic tensors, metrics, perturbations and k-forms.

All values are plain numpy arrays with the grid axes leading and the
component axes trailing.  Fields are immutable by convention: operations
return new instances and never write into an existing ``values`` array.
"""

from __future__ import annotations

import itertools

import numpy as np

from .grid import HALO_CELLS, SUPPORT_CONTAINED, LatticeSpacetime


class FieldError(ValueError):
    pass


def _check_halo(lattice, values, what):
    if lattice.boundary_mode != SUPPORT_CONTAINED:
        return
    mask = lattice.halo_mask()
    comp = values.reshape(lattice.shape + (-1,))
    if np.any(comp[mask] != 0.0):
        raise FieldError(f"{what} must vanish in the {HALO_CELLS}-cell spatial halo")


class TensorField:
    """Component array with declared index valences ('l' lower, 'u' upper)."""

    def __init__(self, lattice, values, valences):
        valences = tuple(valences)
        if any(v not in ("l", "u") for v in valences):
            raise FieldError("valences must be 'l' or 'u'")
        values = np.asarray(values, dtype=float)
        expected = lattice.shape + (lattice.dim,) * len(valences)
        if values.shape != expected:
            raise FieldError(f"component shape {values.shape} != {expected}")
        self.lattice = lattice
        self.values = values
        self._valences = valences

    @property
    def valences(self):
        return self._valences

    @property
    def rank(self):
        return len(self._valences)


class MetricField:
    """Lorentzian metric g_ij, signature (-, +, ..., +), stored symmetric."""

    def __init__(self, lattice, values):
        values = np.asarray(values, dtype=float)
        d = lattice.dim
        if values.shape != lattice.shape + (d, d):
            raise FieldError(f"metric shape {values.shape} != {lattice.shape + (d, d)}")
        values = 0.5 * (values + np.swapaxes(values, -1, -2))
        _check_lorentzian(values, d)
        self.lattice = lattice
        self.values = values

    def determinant(self):
        return np.linalg.det(self.values)


def _check_lorentzian(values, d, det_floor=1e-10):
    g00 = values[..., 0, 0]
    if np.any(g00 >= 0.0):
        node = np.unravel_index(int(np.argmax(g00)), g00.shape)
        raise FieldError(f"metric not Lorentzian: g_00 >= 0 at node {node}")
    # leading principal minors of the spatial block
    spatial = values[..., 1:, 1:]
    for k in range(1, d):
        minor = np.linalg.det(spatial[..., :k, :k])
        if np.any(minor <= 0.0):
            node = np.unravel_index(int(np.argmin(minor)), minor.shape)
            raise FieldError(f"spatial block not positive definite at node {node}")
    det = np.linalg.det(values)
    if np.any(np.abs(det) < det_floor):
        node = np.unravel_index(int(np.argmin(np.abs(det))), det.shape)
        raise FieldError(f"metric near singular (|det| < {det_floor}) at node {node}")


class PerturbationField:
    """Compactly supported symmetric (0,2)-tensor h_ij with a declared box.

    The support box is stored as index ranges ((lo, hi), ...) per axis,
    half open, and must sit >= 3 cells inside every boundary (time ends
    included).  Components must vanish identically outside the box.
    """

    MARGIN = 3

    def __init__(self, lattice, values, support_box):
        values = np.asarray(values, dtype=float)
        d = lattice.dim
        if values.shape != lattice.shape + (d, d):
            raise FieldError("perturbation components have wrong shape")
        values = 0.5 * (values + np.swapaxes(values, -1, -2))
        box = tuple((int(lo), int(hi)) for lo, hi in support_box)
        if len(box) != d:
            raise FieldError("support box must give one range per axis")
        for axis, (lo, hi) in enumerate(box):
            n = lattice.shape[axis]
            # the interior margin is meaningful at real boundaries: the two
            # time ends always, spatial edges only when walls exist; on a
            # spatial torus every node is interior
            enforce = axis == 0 or lattice.boundary_mode == SUPPORT_CONTAINED
            if not (0 <= lo < hi <= n):
                raise FieldError(f"invalid support box {box[axis]} on axis {axis}")
            if enforce and not (self.MARGIN <= lo < hi <= n - self.MARGIN):
                raise FieldError(
                    f"support box {box[axis]} on axis {axis} not >= {self.MARGIN} "
                    f"cells inside [0, {n})")
        outside = np.ones(lattice.shape, dtype=bool)
        inner = tuple(slice(lo, hi) for lo, hi in box)
        outside[inner] = False
        if np.any(values[outside] != 0.0):
            raise FieldError("perturbation components nonzero outside declared box")
        self.lattice = lattice
        self.values = values
        self.support_box = box

    def is_zero(self):
        return not np.any(self.values)

    def scaled(self, s):
        return PerturbationField(self.lattice, s * self.values, self.support_box)


def form_components(dim, degree):
    """Strictly increasing index tuples of a degree-k form, lexicographic."""
    return list(itertools.combinations(range(dim), degree))


class FormField:
    """Degree-k differential form with C(d, k) components per node."""

    def __init__(self, lattice, degree, values, validate_halo=True):
        degree = int(degree)
        if not 0 <= degree <= lattice.dim:
            raise FieldError(f"degree {degree} out of range for dim {lattice.dim}")
        ncomp = len(form_components(lattice.dim, degree))
        values = np.asarray(values, dtype=float)
        if degree == 0 and values.shape == lattice.shape:
            values = values[..., np.newaxis]
        if values.shape != lattice.shape + (ncomp,):
            raise FieldError(
                f"degree-{degree} form needs shape {lattice.shape + (ncomp,)}, "
                f"got {values.shape}")
        if validate_halo:
            _check_halo(lattice, values, "form field")
        self.lattice = lattice
        self.degree = degree
        self.values = values

    @classmethod
    def zero(cls, lattice, degree):
        ncomp = len(form_components(lattice.dim, degree))
        return cls(lattice, degree, np.zeros(lattice.shape + (ncomp,)),
                   validate_halo=False)

    def scalar(self):
        if self.degree != 0:
            raise FieldError("scalar() is only defined for 0-forms")
        return self.values[..., 0]

    def copy(self):
        return FormField(self.lattice, self.degree, self.values.copy(),
                         validate_halo=False)

    def __add__(self, other):
        self._check_compatible(other)
        return FormField(self.lattice, self.degree, self.values + other.values,
                         validate_halo=False)

    def __sub__(self, other):
        self._check_compatible(other)
        return FormField(self.lattice, self.degree, self.values - other.values,
                         validate_halo=False)

    def __mul__(self, c):
        return FormField(self.lattice, self.degree, self.values * float(c),
                         validate_halo=False)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def _check_compatible(self, other):
        if not isinstance(other, FormField):
            raise FieldError("expected a FormField")
        if other.degree != self.degree or other.lattice is not self.lattice:
            raise FieldError("form fields live on different spaces")

    def norm_inf(self):
        return float(np.max(np.abs(self.values)))


# -- CSV serialization ------------------------------------------------

_AXIS_NAMES = ("t", "x", "y")


def field_to_csv(lattice, values, path):
    """Write one row per node: coordinates then components, row-major."""
    comp = np.asarray(values, dtype=float).reshape(lattice.shape + (-1,))
    ncomp = comp.shape[-1]
    coords = lattice.coordinate_grids()
    header = ",".join(_AXIS_NAMES[: lattice.dim])
    header += "," + ",".join(f"comp_{i}" for i in range(ncomp))
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        flat_coords = [c.ravel() for c in coords]
        flat_comp = comp.reshape(-1, ncomp)
        for row in range(flat_comp.shape[0]):
            cells = [format(c[row], ".17g") for c in flat_coords]
            cells += [format(v, ".17g") for v in flat_comp[row]]
            fh.write(",".join(cells) + "\n")


def symmetric_to_triangle(values, dim):
    """Upper-triangle components (i <= j, lexicographic) of a (0,2) tensor."""
    pairs = [(i, j) for i in range(dim) for j in range(i, dim)]
    return np.stack([values[..., i, j] for i, j in pairs], axis=-1)
