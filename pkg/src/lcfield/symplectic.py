"""Symplectic structure on the solution spaces: sigma, the kernel
characterization of the causal propagator, EM gauge machinery and
lattice-translation covariance checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .util import einsum

from . import calculus, solver
from .fields import FieldError, FormField
from .grid import PERIODIC, SUPPORT_CONTAINED


@dataclass(frozen=True)
class SolutionVector:
    """Generator f plus the cached propagated solution (e f, f_A f or a
    Lorenz representative for EM)."""

    operator: solver.FieldOperator
    generator: FormField
    solution: FormField

    @property
    def kind(self):
        return self.operator.kind

    def __add__(self, other):
        _check_same_space(self, other)
        return SolutionVector(self.operator, self.generator + other.generator,
                              self.solution + other.solution)

    def __sub__(self, other):
        _check_same_space(self, other)
        return SolutionVector(self.operator, self.generator - other.generator,
                              self.solution - other.solution)

    def __mul__(self, c):
        return SolutionVector(self.operator, self.generator * c, self.solution * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)


def _check_same_space(a, b):
    if a.operator is not b.operator:
        raise FieldError("solution vectors belong to different operators")


def propagate(op: solver.FieldOperator, generator: FormField) -> SolutionVector:
    """Cache the causal solution generated by a compactly supported source."""
    if generator.degree != op.degree:
        raise FieldError("generator degree does not match the operator")
    if op.kind == solver.PROCA:
        sol = solver.proca_propagator(generator, op)
    elif op.kind == solver.MAXWELL:
        sol = _em_solution(op, generator)
    else:
        sol = solver.causal_propagator(op, generator)
    return SolutionVector(op, generator, sol)


def _em_box(op):
    return solver.FieldOperator(solver.BOX_ONE, op.metric, 0.0, op.cfl)


def _em_solution(op, generator, coclosed_tol=1e-8):
    if op.lattice.boundary_mode != SUPPORT_CONTAINED:
        raise FieldError("EM symplectic machinery requires support_contained "
                         "spatial topology (trivial first cohomology)")
    dl = calculus.codifferential(generator, op.metric)
    if dl.norm_inf() > coclosed_tol * max(generator.norm_inf(), 1e-300):
        raise FieldError("EM generators must be coclosed (Lorenz sources)")
    return solver.causal_propagator(_em_box(op), generator)


def symplectic_form(u, v, op: solver.FieldOperator = None):
    """sigma(u, v) = integral (e f_u) . f_v dmu_g.

    ``u`` and ``v`` are SolutionVectors; ``u`` may instead be a plain
    FormField (a spacetime solution without a known generator), as
    happens for outputs of the relative Cauchy evolution.
    """
    if isinstance(u, SolutionVector):
        if isinstance(v, SolutionVector) and v.operator is not u.operator:
            raise FieldError("kind mismatch in sigma")
        op = u.operator
        field = u.solution
    else:
        if op is None:
            op = v.operator
        field = u
    gen = v.generator if isinstance(v, SolutionVector) else v
    return calculus.global_pairing(field, gen, op.metric)


def kernel_witness(f: FormField, op: solver.FieldOperator, kernel_tol=1e-3):
    """If e f vanishes (within tolerance), return v with P v = f.

    The witness is v = e^a f, which the kernel characterization
    guarantees to be compactly supported; raises when ||e f|| exceeds
    kernel_tol * ||f|| (scaled by the window volume factor).
    """
    ef = solver.causal_propagator(op, f)
    scale = max(f.norm_inf(), 1e-300)
    ratio = ef.norm_inf() / scale
    if ratio > kernel_tol:
        raise FieldError(f"not in kernel: ||e f||/||f|| = {ratio:.3e}")
    return solver.green(op, f, "advanced")


def lorenz_gauge_fix(a: FormField, op: solver.FieldOperator,
                     equation_tol=0.5) -> FormField:
    """Gauge transform A' = A + d f with Box_0 f = -delta A and zero
    Cauchy data on the initial slice; A' satisfies the Lorenz condition
    up to the discretization defect while d A' = d A exactly.
    """
    if a.degree != 1:
        raise FieldError("gauge fixing acts on 1-form potentials")
    g = op.metric
    res = calculus.codifferential(calculus.exterior_derivative(a), g)
    da = calculus.exterior_derivative(a)
    # one factor of the grid spacing compensates the derivative taken by
    # delta, so the gate is resolution-independent for on-shell inputs
    scale = max(da.norm_inf(), 1e-300) / min(op.lattice.spacings)
    if res.norm_inf() > equation_tol * scale:
        raise FieldError("field-equation residual too large for gauge fixing")
    rhs = -1.0 * calculus.codifferential(a, g)
    solver._zero_end_slices(rhs.values)
    kg = solver.FieldOperator(solver.KG, g, 0.0, op.cfl)
    f = solver.corrected_solve(kg, rhs, 0, "forward")
    return a + calculus.exterior_derivative(f)


def em_symplectic_form(theta1, theta2, op: solver.FieldOperator,
                       coclosed_tol=1e-8):
    """sigma([e theta1], [e theta2]) = (e theta1, theta2)_{g,1} for
    coclosed generators on a support_contained lattice."""
    if op.lattice.boundary_mode != SUPPORT_CONTAINED:
        raise FieldError("EM symplectic form requires support_contained mode")
    g = op.metric
    for th in (theta1, theta2):
        gen = th.generator if isinstance(th, SolutionVector) else th
        dl = calculus.codifferential(gen, g)
        if dl.norm_inf() > coclosed_tol * max(gen.norm_inf(), 1e-300):
            raise FieldError("non-coclosed generator in EM sigma")
    if not isinstance(theta1, SolutionVector):
        theta1 = propagate(op, theta1)
    gen2 = theta2.generator if isinstance(theta2, SolutionVector) else theta2
    return calculus.global_pairing(theta1.solution, gen2, g)


def translation_pushforward(f: FormField, shift, metric) -> FormField:
    """Cyclic component-wise lattice shift; valid when the metric is
    invariant under it (lattice isometry)."""
    lat = f.lattice
    shift = tuple(int(s) for s in shift)
    if len(shift) != lat.dim:
        raise FieldError("shift needs one entry per axis")
    if lat.boundary_mode != PERIODIC and any(s != 0 for s in shift[1:]):
        rolled = f.values
        for axis, s in enumerate(shift):
            rolled = np.roll(rolled, s, axis=axis)
        mask = lat.halo_mask()
        if np.any(np.abs(rolled.reshape(lat.shape + (-1,))[mask]) > 0):
            raise FieldError("shift pushes support into the boundary halo")
    moved_metric = metric.values
    out = f.values
    for axis, s in enumerate(shift):
        if s:
            moved_metric = np.roll(moved_metric, s, axis=axis)
            out = np.roll(out, s, axis=axis)
    if not np.allclose(moved_metric, metric.values, atol=1e-13, rtol=0.0):
        raise FieldError("shift is not an isometry of this metric")
    return FormField(lat, f.degree, out, validate_halo=False)
