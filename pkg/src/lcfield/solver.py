"""Cauchy marching for the normally hyperbolic operators, Green
operators, causal propagators, the Proca Green construction and
fundamental solutions.

Marching uses the explicit central-time scheme

    u^{n+1} = 2 u^n - u^{n-1} + (dt^2 / (-g^00)) (f - Ptilde u)^n

where Ptilde is the operator minus its (-g^00) d_t^2 principal part,
written in index notation (Lichnerowicz form for 1-forms).  First time
derivatives inside Ptilde are predicted with a lagged difference and
corrected once with a centered difference, which keeps the scheme
second order.  Evolution metrics must satisfy g_{0a} = 0; general
perturbations remain available to all pointwise operations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .util import einsum

from . import calculus
from .cache import geo
from .causal import admissibility_check
from .fields import FieldError, FormField
from .grid import LatticeSpacetime

KG = "kg"
BOX_ONE = "box1"
PROCA = "proca"
MAXWELL = "maxwell"

_DEGREES = {KG: 0, BOX_ONE: 1, PROCA: 1, MAXWELL: 1}
_NORMALLY_HYPERBOLIC = (KG, BOX_ONE)


@dataclass(frozen=True)
class FieldOperator:
    """Wave operator acting on forms over a fixed metric.

    kind: 'kg' (Box_0 + m^2), 'box1' (Box_1 + m^2), 'proca'
        (delta d + m^2, m > 0) or 'maxwell' (delta d).
    """

    kind: str
    metric: object
    mass: float = 0.0
    cfl: float = 0.5

    def __post_init__(self):
        if self.kind not in _DEGREES:
            raise FieldError(f"unknown operator kind {self.kind!r}")
        if self.mass < 0:
            raise FieldError("mass must be nonnegative")
        if self.kind == PROCA and self.mass == 0.0:
            raise FieldError("Proca operator requires m > 0")
        if self.kind == MAXWELL and self.mass != 0.0:
            raise FieldError("Maxwell operator carries no mass term")

    @property
    def degree(self):
        return _DEGREES[self.kind]

    @property
    def lattice(self):
        return self.metric.lattice


@dataclass(frozen=True)
class CauchyData:
    """Initial values on a time slice: u0 and the normal derivative u1."""

    slice_index: int
    u0: np.ndarray
    u1: np.ndarray


def apply_operator(op: FieldOperator, u: FormField) -> FormField:
    """Discrete P u assembled from the exterior-calculus operators."""
    if u.degree != op.degree:
        raise FieldError(
            f"operator {op.kind} acts on degree {op.degree}, got {u.degree}")
    g = op.metric
    if op.kind in (KG, BOX_ONE):
        out = calculus.box_k(u, g)
    else:
        out = calculus.codifferential(calculus.exterior_derivative(u), g)
    if op.mass:
        out = out + (op.mass ** 2) * u
    return out


# -- slice-operator coefficients ---------------------------------------

class _MarchCoefficients:
    """Frozen per-slice coefficient arrays of Ptilde for one operator.

    For a scalar:  Ptilde u = -g^{ab} d_a d_b u + t_coef * v
                             + s_coef[a] * d_a u + m^2 u
    For a 1-form:  Ptilde w_j = -g^{ab} d_a d_b w_j + V[j,k] v_k
                             + W[a][j,k] d_a w_k + Z[j,k] w_k
    with v the estimate of d_t u.
    """

    def __init__(self, op: FieldOperator):
        data = geo(op.metric)
        lat = op.lattice
        d = lat.dim
        g_inv = data.g_inv
        gamma = data.gamma
        self.lattice = lat
        self.degree = op.degree
        self.weight = -g_inv[..., 0, 0]
        if np.any(self.weight <= 0):
            raise FieldError("evolution requires g^00 < 0 everywhere")
        if np.any(np.abs(g_inv[..., 0, 1:]) > 1e-13):
            raise FieldError("evolution requires g_{0a} = 0 "
                             "(time-space cross terms are not marched)")
        self.g_spatial = g_inv[..., 1:, 1:]
        contr = einsum("...ij,...ijk->...k", g_inv, gamma)  # g^{ij} Gamma^k_ij
        m2 = op.mass ** 2
        if op.degree == 0:
            self.t_coef = contr[..., 0]
            self.s_coef = contr[..., 1:]
            self.m2 = m2
            self.has_tderiv = bool(np.max(np.abs(self.t_coef)) > 1e-14)
        else:
            ricci = data.curvature[1]
            dgamma = np.stack(
                [lat.partial_geometry(gamma, axis) for axis in range(d)], axis=-4)
            eye = np.eye(d)
            g00 = g_inv[..., 0, 0]
            # d_t w_k coefficient: 2 g^00 Gamma^k_0j + delta_jk g^{lm} Gamma^0_lm
            self.v_mat = (2.0 * g00[..., None, None] * gamma[..., 0, :, :]
                          + contr[..., 0][..., None, None] * eye)
            # d_a w_k coefficient: 2 g^{ab} Gamma^k_bj + delta_jk g^{lm} Gamma^a_lm
            self.w_mat = (2.0 * einsum("...ab,...bjk->...ajk",
                                          self.g_spatial, gamma[..., 1:, :, :])
                          + einsum("...a,jk->...ajk", contr[..., 1:], eye))
            # zeroth order: g^{lm} d_l Gamma^k_mj - g^{lm} Gamma^n_lm Gamma^k_nj
            #               - g^{lm} Gamma^n_lj Gamma^k_mn + R_j^k + m^2
            self.z_mat = (einsum("...lm,...lmjk->...jk", g_inv, dgamma)
                          - einsum("...lm,...lmn,...njk->...jk",
                                      g_inv, gamma, gamma)
                          - einsum("...lm,...ljn,...mnk->...jk",
                                      g_inv, gamma, gamma)
                          + einsum("...jl,...lk->...jk", ricci, g_inv)
                          + m2 * eye)
            self.has_tderiv = bool(np.max(np.abs(self.v_mat)) > 1e-14)

    def _spatial_hessian(self, n, u):
        """-g^{ab} d_a d_b u with compact diagonal second differences.

        Compact stencils keep the leapfrog free of the zero-speed
        checkerboard mode that wide (composed) stencils would admit.
        """
        lat = self.lattice
        out = np.zeros_like(u)
        periodic = lat.boundary_mode == "periodic"
        for a in range(1, lat.dim):
            ha = lat.spacings[a]
            ax = a - 1
            if periodic:
                second = (np.roll(u, -1, ax) - 2.0 * u + np.roll(u, 1, ax)) / ha ** 2
            else:
                second = np.zeros_like(u)
                second[_mid(ax, u.ndim)] = np.diff(u, 2, axis=ax) / ha ** 2
                second[_edge(ax, u.ndim, 0)] = \
                    (u[_edge(ax, u.ndim, 1)] - 2.0 * u[_edge(ax, u.ndim, 0)]) / ha ** 2
                second[_edge(ax, u.ndim, -1)] = \
                    (u[_edge(ax, u.ndim, -2)] - 2.0 * u[_edge(ax, u.ndim, -1)]) / ha ** 2
            out -= self.g_spatial[n][..., a - 1, a - 1][..., None] * second
            for b in range(a + 1, lat.dim):
                cross = lat.slice_partial(lat.slice_partial(u, a), b)
                out -= 2.0 * self.g_spatial[n][..., a - 1, b - 1][..., None] * cross
        return out

    def apply(self, n, u, v):
        """Evaluate Ptilde at slice n given slice values u and d_t estimate v."""
        lat = self.lattice
        out = self._spatial_hessian(n, u)
        if self.degree == 0:
            out += self.t_coef[n][..., None] * v
            for a in range(1, lat.dim):
                out += self.s_coef[n][..., a - 1][..., None] * lat.slice_partial(u, a)
            out += self.m2 * u
        else:
            out += einsum("...jk,...k->...j", self.v_mat[n], v)
            for a in range(1, lat.dim):
                out += einsum("...jk,...k->...j",
                                 self.w_mat[n][..., a - 1, :, :],
                                 lat.slice_partial(u, a))
            out += einsum("...jk,...k->...j", self.z_mat[n], u)
        return out


def _mid(axis, ndim):
    s = [slice(None)] * ndim
    s[axis] = slice(1, -1)
    return tuple(s)


def _edge(axis, ndim, idx):
    s = [slice(None)] * ndim
    s[axis] = idx
    return tuple(s)


def _normal_to_time_derivative(coeff, n, u0, u1, degree):
    """Convert the unit-normal derivative into d_t u on the data slice."""
    data = geo(coeff)
    beta = -1.0 / data.g_inv[n][..., 0, 0]
    root = np.sqrt(beta)[..., None]
    if degree == 0:
        return root * u1
    gamma0 = data.gamma[n][..., 0, :, :]
    return root * u1 + einsum("...jk,...k->...j", gamma0, u0)


def solve_cauchy(op: FieldOperator, source, data: CauchyData,
                 direction="forward") -> FormField:
    """March the Cauchy problem across the window; returns the full
    spacetime solution.

    ``source`` may be None (homogeneous) or a FormField of matching
    degree.  ``direction`` 'backward' runs the time-mirrored scheme.
    """
    lat = op.lattice
    report = admissibility_check(op.metric, None, cfl=op.cfl)
    if not report.ok:
        raise FieldError(f"admissibility rejected: {report.reason}")
    if direction not in ("forward", "backward"):
        raise FieldError("direction must be 'forward' or 'backward'")
    ncomp = 1 if op.degree == 0 else lat.dim
    f = None
    if source is not None:
        if source.degree != op.degree:
            raise FieldError("source degree mismatch")
        f = source.values
    key = ("march", op.kind, op.degree, op.mass)
    extras = geo(op.metric).extras
    coeff = extras.get(key)
    if coeff is None:
        coeff = _MarchCoefficients(op)
        extras[key] = coeff
    dt = lat.dt
    step = 1 if direction == "forward" else -1
    n0 = data.slice_index
    n_t = lat.shape[0]
    last = n_t - 1 if direction == "forward" else 0
    if not 0 <= n0 < n_t:
        raise FieldError("data slice outside the window")

    u = np.zeros(lat.shape + (ncomp,))
    u0 = np.asarray(data.u0, dtype=float).reshape(lat.shape[1:] + (ncomp,))
    u1 = np.asarray(data.u1, dtype=float).reshape(lat.shape[1:] + (ncomp,))
    u[n0] = u0
    if n0 == last:
        return FormField(lat, op.degree, u, validate_halo=False)

    v0 = _normal_to_time_derivative(op.metric, n0, u0, u1, op.degree)
    w = coeff.weight[n0][..., None]
    f_n = f[n0] if f is not None else 0.0
    acc = (f_n - coeff.apply(n0, u0, v0)) / w
    u[n0 + step] = u0 + step * dt * v0 + 0.5 * dt * dt * acc

    n = n0 + step
    while n != last:
        prev, cur = u[n - step], u[n]
        f_n = f[n] if f is not None else 0.0
        w = coeff.weight[n][..., None]
        v = (cur - prev) / (step * dt)
        nxt = 2.0 * cur - prev + dt * dt * (f_n - coeff.apply(n, cur, v)) / w
        if coeff.has_tderiv:
            v = (nxt - prev) / (2.0 * step * dt)
            nxt = 2.0 * cur - prev + dt * dt * (f_n - coeff.apply(n, cur, v)) / w
        if not np.all(np.isfinite(nxt)):
            raise FieldError(f"solution blew up at slice {n + step}")
        u[n + step] = nxt
        n += step
    return FormField(lat, op.degree, u, validate_halo=False)


def _zero_data(lat, degree, slice_index):
    ncomp = 1 if degree == 0 else lat.dim
    z = np.zeros(lat.shape[1:] + (ncomp,))
    return CauchyData(slice_index, z, z.copy())


def _time_support(values, rel_tol=1e-12):
    """First/last slice carrying mass above rel_tol * max (numerically
    compact sources, e.g. Gaussians, count as supported where they are
    above roundoff)."""
    comp = np.abs(values.reshape(values.shape[0], -1))
    peak = comp.max()
    if peak == 0.0:
        return None
    hits = np.nonzero(np.any(comp > rel_tol * peak, axis=1))[0]
    return int(hits[0]), int(hits[-1])


GREEN_TOL = 1e-8
GREEN_MAX_PASSES = 5


def green(op: FieldOperator, source: FormField, kind,
          tol=GREEN_TOL, max_passes=GREEN_MAX_PASSES) -> FormField:
    """Advanced/retarded Green operator applied to a compactly supported
    source: e^a f has support toward the future of supp f, e^r toward
    the past.

    After the causal march, deferred-correction passes re-march the
    composition-operator defect f - P u, so that P e^{a/r} f = f holds
    against the exterior-calculus realization of P (up to ``tol``,
    measured away from the two one-sided-stencil slices at each window
    end).  Each pass adds mass only inside the causal future/past of
    the running support, preserving the support property.
    """
    if op.kind not in _NORMALLY_HYPERBOLIC:
        raise FieldError(
            f"green operators march only normally hyperbolic kinds, not {op.kind}")
    if kind not in ("advanced", "retarded"):
        raise FieldError("kind must be 'advanced' or 'retarded'")
    lat = op.lattice
    span = _time_support(source.values)
    if span is None:
        return FormField.zero(lat, op.degree)
    lo, hi = span
    if lo < 2 or hi > lat.shape[0] - 3:
        raise FieldError("source support must stay within [2 dt, T - 2 dt]")
    if kind == "advanced":
        start, direction = 0, "forward"
    else:
        start, direction = lat.shape[0] - 1, "backward"
    return corrected_solve(op, source, start, direction, tol, max_passes)


def corrected_solve(op, source, start, direction, tol=GREEN_TOL,
                    max_passes=GREEN_MAX_PASSES):
    """Causal zero-data solve plus deferred-correction passes against the
    composition operator.

    Correction sources are clipped to the outer causal cone of the
    original support: the continuum defect lives there, and clipping
    keeps the scheme's sub-roundoff exterior precursors from being
    re-amplified by the extra marches.
    """
    from .causal import causal_cone, region_from_support

    lat = op.lattice
    data = _zero_data(lat, op.degree, start)
    u = solve_cauchy(op, source, data, direction)
    scale = max(source.norm_inf(), 1e-300)
    best, best_res = u, _interior_residual(op, u, source) / scale
    cone_mask = None
    for _ in range(max_passes):
        if best_res <= tol:
            break
        if cone_mask is None:
            # same support threshold as the exterior-mass contract, so
            # corrections never move mass past the contracted cone
            region = region_from_support(lat, source.values, 1e-10)
            way = "future" if direction == "forward" else "past"
            cone_mask = causal_cone(region, way, op.metric).mask
        defect = source - apply_operator(op, best)
        _zero_end_slices(defect.values)
        defect.values[~cone_mask] = 0.0
        update = solve_cauchy(op, defect, data, direction)
        update.values[~cone_mask] = 0.0
        corrected = best + update
        res = _interior_residual(op, corrected, source) / scale
        if not res < best_res:
            break
        best, best_res = corrected, res
    return best


def _zero_end_slices(values, margin=2):
    """Drop the rows where one-sided time stencils make the composition
    operator first-order only."""
    values[:margin] = 0.0
    values[-margin:] = 0.0


def _interior_residual(op, u, source, margin=2):
    r = (apply_operator(op, u) - source).values
    return float(np.max(np.abs(r[margin:-margin])))


def causal_propagator(op: FieldOperator, source: FormField) -> FormField:
    """e f = e^a f - e^r f."""
    return green(op, source, "advanced") - green(op, source, "retarded")


def proca_green(source: FormField, op: FieldOperator, kind,
                tol=GREEN_TOL, max_passes=GREEN_MAX_PASSES) -> FormField:
    """Green operator for A = delta d + m^2 via the normally hyperbolic
    companion: f^{a/r} = e^{a/r}_{Box_1 + m^2} o (id + m^{-2} d delta).

    The d delta correction amplifies rough sources by ~(m w)^-2, so the
    defining identity A f^{a/r} theta = theta is tightened by deferred
    correction against the Proca operator itself.
    """
    if op.kind != PROCA:
        raise FieldError("proca_green needs a Proca operator")

    def one_shot(theta):
        correction = calculus.exterior_derivative(
            calculus.codifferential(theta, g)) * (1.0 / op.mass ** 2)
        src = theta + correction
        # the d delta stencil smears defect supports into the one-sided
        # end slices; trim them like the defect itself
        _zero_end_slices(src.values)
        return green(companion, src, kind, tol=tol, max_passes=max_passes)

    g = op.metric
    companion = FieldOperator(BOX_ONE, g, op.mass, op.cfl)
    u = one_shot(source)
    scale = max(source.norm_inf(), 1e-300)
    best, best_res = u, _interior_residual(op, u, source) / scale
    for _ in range(max_passes):
        if best_res <= tol:
            break
        defect = source - apply_operator(op, best)
        _zero_end_slices(defect.values)
        corrected = best + one_shot(defect)
        res = _interior_residual(op, corrected, source) / scale
        if not res < best_res:
            break
        best, best_res = corrected, res
    return best


def proca_propagator(source: FormField, op: FieldOperator) -> FormField:
    return proca_green(source, op, "advanced") - proca_green(source, op, "retarded")


def discrete_delta(lat: LatticeSpacetime, g, node, degree=0, component=0) -> FormField:
    """Single-node indicator scaled by 1 / (cell volume * sqrt|det g|)."""
    for axis, idx in enumerate(node):
        if not 3 <= idx < lat.shape[axis] - 3:
            raise FieldError("delta node too close to the boundary")
    f = FormField.zero(lat, degree)
    weight = geo(g).sqrt_det[tuple(node)]
    f.values[tuple(node) + (component,)] = 1.0 / (lat.cell_volume * weight)
    return f


def fundamental_solution(op: FieldOperator, node, kind, component=0) -> FormField:
    """green(P, delta_p, kind) with the discrete delta at lattice node p.

    The delta is a bare single-node indicator, so deferred correction is
    skipped: the composition-operator defect of a distributional kernel
    is not a smooth source, and re-marching it would only smear the
    kernel.  PU = delta_p is checked weakly, against test functions.
    """
    delta = discrete_delta(op.lattice, op.metric, node, op.degree, component)
    return green(op, delta, kind, max_passes=0)


def residual(op: FieldOperator, u: FormField, source=None):
    """||P u - f|| / ||f or u|| with the composition operator."""
    pu = apply_operator(op, u)
    if source is not None:
        num = (pu - source).norm_inf()
        den = max(source.norm_inf(), 1e-300)
    else:
        num = pu.norm_inf()
        den = max(u.norm_inf(), 1e-300)
    return num / den
