"""Lazily computed per-metric geometry (inverse, Christoffels, frames,
Hodge star matrices).  Everything here is derived data: metrics are
immutable, so each entry is computed once and reused by the calculus and
solver layers.
"""

from __future__ import annotations

import itertools
import weakref

import numpy as np

from .util import einsum

from . import geometry
from .fields import FieldError, MetricField, form_components

_REGISTRY = weakref.WeakKeyDictionary()


def geo(g: MetricField) -> "GeometryData":
    data = _REGISTRY.get(g)
    if data is None:
        data = GeometryData(g)
        _REGISTRY[g] = data
    return data


def permutation_sign(perm):
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def compound_matrix(a, k, dim):
    """Induced action of the 1-form basis change ``a`` on k-form components.

    For v' = a v on covector components, returns M with w'_J = M[J, I] w_I
    over strictly increasing tuples: M[J, I] = det(a[J, I]).
    """
    combos = form_components(dim, k)
    if k == 0:
        return np.ones(a.shape[:-2] + (1, 1))
    n = len(combos)
    out = np.empty(a.shape[:-2] + (n, n))
    for r, J in enumerate(combos):
        for c, I in enumerate(combos):
            sub = a[..., J, :][..., :, I]
            if k == 1:
                out[..., r, c] = sub[..., 0, 0]
            elif k == 2:
                out[..., r, c] = (sub[..., 0, 0] * sub[..., 1, 1]
                                  - sub[..., 0, 1] * sub[..., 1, 0])
            else:
                out[..., r, c] = np.linalg.det(sub)
    return out


def orthonormal_coframe(g_inv):
    """Gram-Schmidt coframe rows E[i, :] (timelike leg first, oriented).

    E is built so that <e^i, e^j>_{g^{-1}} = diag(-1, +1, ...) and
    det(E) > 0, i.e. the frame is positively oriented with respect to
    dt ^ dx (^ dy).
    """
    d = g_inv.shape[-1]
    grid = g_inv.shape[:-2]
    e = np.zeros(grid + (d, d))
    signs = [-1.0] + [1.0] * (d - 1)
    for i in range(d):
        v = np.zeros(grid + (d,))
        v[..., i] = 1.0
        for j in range(i):
            # indefinite projection: proj_u(v) = (<v,u>/<u,u>) u
            inner = einsum("...a,...ab,...b->...", v, g_inv, e[..., j, :])
            v = v - (inner / signs[j])[..., None] * e[..., j, :]
        norm2 = einsum("...a,...ab,...b->...", v, g_inv, v)
        if i == 0:
            if np.any(norm2 >= 0):
                raise FieldError("dt is not timelike: g^00 >= 0 somewhere")
            scale = np.sqrt(-norm2)
        else:
            if np.any(norm2 <= 0):
                raise FieldError("spatial coframe leg degenerate")
            scale = np.sqrt(norm2)
        e[..., i, :] = v / scale[..., None]
    return e


def frame_star_table(dim, k):
    """Sign table of the star in an oriented orthonormal frame.

    Maps frame components of degree k to degree d-k: for each increasing
    tuple J the image lands on the complement J^c with coefficient
    sign(J, J^c) * <e^J, e^J> where <e^J, e^J> = -1 iff 0 in J.
    The convention is fixed by eta ^ *theta = <eta, theta> dmu, which
    yields *1 = dmu and ** = s(-1)^{k(d-k)}.
    """
    src = form_components(dim, k)
    dst = form_components(dim, dim - k)
    table = np.zeros((len(dst), len(src)))
    for c, J in enumerate(src):
        comp = tuple(i for i in range(dim) if i not in J)
        r = dst.index(comp)
        sign = permutation_sign(list(J) + list(comp))
        eta = -1.0 if 0 in J else 1.0
        table[r, c] = sign * eta
    return table


class GeometryData:
    def __init__(self, g: MetricField):
        self.metric = g
        self.lattice = g.lattice
        self._star = {}
        self._gram = {}
        self._curvature = None
        self._gamma = None
        self._g_inv = None
        self._sqrt_det = None
        self._frame = None
        self.extras = {}  # derived-data cache for other layers (solver)

    @property
    def g(self):
        return self.metric.values

    @property
    def g_inv(self):
        if self._g_inv is None:
            self._g_inv = geometry.inverse_metric(self.metric).values
        return self._g_inv

    @property
    def sqrt_det(self):
        if self._sqrt_det is None:
            self._sqrt_det = geometry.volume_density(self.metric)
        return self._sqrt_det

    @property
    def gamma(self):
        """Christoffel symbols Gamma^k_ij as [..., i, j, k]."""
        if self._gamma is None:
            self._gamma = geometry.christoffel(self.metric, self.g_inv).values
        return self._gamma

    @property
    def curvature(self):
        """(C_ijk^l, R_ij, S) arrays."""
        if self._curvature is None:
            c, r, s = geometry.curvature_ricci_scalar(self.metric)
            self._curvature = (c.values, r.values, s)
        return self._curvature

    @property
    def frame(self):
        if self._frame is None:
            self._frame = orthonormal_coframe(self.g_inv)
        return self._frame

    def star_matrix(self, k):
        """Per-node matrix of the Hodge star on degree-k components."""
        if k not in self._star:
            d = self.lattice.dim
            e = self.frame
            to_frame = compound_matrix(np.linalg.inv(np.swapaxes(e, -1, -2)), k, d)
            back = compound_matrix(np.swapaxes(e, -1, -2), d - k, d)
            table = frame_star_table(d, k)
            self._star[k] = einsum("...rc,cs,...st->...rt", back, table, to_frame)
        return self._star[k]

    def gram_matrix(self, k):
        """Fiber inner product <.,.>_{g,k} on increasing-tuple components."""
        if k not in self._gram:
            self._gram[k] = compound_matrix(self.g_inv, k, self.lattice.dim)
        return self._gram[k]
