"""Relative Cauchy evolution and the stress-energy balance identity.

Implements metric perturbation families h^s = s B, the first variations
of Christoffel symbols and of the field operators, the classical RCE

    r_h phi = e_A A[h] ( chi_-  e_{A[h]} A ( chi_+ phi ) )

with time-slab partitions of unity around the perturbation support, its
analytic s-derivative e_A (d_s A[h^s]|_0) phi, polarized stress-energy
tensors for the three field kinds and the balance check

    L = (zeta, d_s A[h^s]|_0 phi)   vs   R = - integral B_ij T^ij(phi, zeta).

The variation formulas are covariantized: delta Gamma^k_ij =
(1/2) g^{kl} (nabla_i B_lj + nabla_j B_il - nabla_l B_ij), which reduces
to the normal-coordinate partial-derivative display on constant metrics
and is arbitrated by the finite-difference-in-s oracle in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .util import einsum

from . import calculus, solver, symplectic
from .cache import geo
from .causal import partition_of_unity, rce_regions
from .fields import (FieldError, FormField, MetricField, PerturbationField,
                     form_components)
from .geometry import (covariant_derivative_antisym2, covariant_derivative_covector,
                       covariant_derivative_sym2)


# -- perturbation families ---------------------------------------------

@dataclass(frozen=True)
class PerturbationFamily:
    """Smooth family h^s = s * B with h^0 = 0.

    kind 'generic_bump' stores only the direction B; 'lie_derivative'
    additionally keeps the compactly supported vector field X with
    B_ij = nabla_i X_j + nabla_j X_i (so the family is tangent to a
    diffeomorphism orbit and all sigma-observables of the RCE must be
    insensitive to it).
    """

    base: MetricField
    direction: PerturbationField
    s_max: float
    kind: str = "generic_bump"
    vector_field: np.ndarray = None

    def __post_init__(self):
        if self.kind not in ("generic_bump", "lie_derivative"):
            raise FieldError(f"unknown family kind {self.kind!r}")
        if self.s_max <= 0:
            raise FieldError("s_max must be positive")

    def at(self, s) -> PerturbationField:
        if abs(s) > self.s_max * (1 + 1e-12):
            raise FieldError(f"|s| = {abs(s)} exceeds s_max = {self.s_max}")
        return self.direction.scaled(s)


def lie_derivative_direction(g: MetricField, x_vector, support_box):
    """B_ij = nabla_i X_j + nabla_j X_i for a compactly supported vector
    field X^a (components with upper index).  The declared box is the
    given one dilated by the one-cell stencil radius of the derivative.
    """
    data = geo(g)
    lat = g.lattice
    x_lower = einsum("...ij,...j->...i", g.values, x_vector)
    grad = covariant_derivative_covector(lat, data.gamma, x_lower)  # [..., i, j]
    b = grad + np.swapaxes(grad, -1, -2)
    box = tuple((max(0, lo - 1), min(lat.shape[axis], hi + 1))
                for axis, (lo, hi) in enumerate(support_box))
    return PerturbationField(lat, b, box)


def lie_family(g: MetricField, x_vector, support_box, s_max) -> PerturbationFamily:
    b = lie_derivative_direction(g, x_vector, support_box)
    return PerturbationFamily(g, b, s_max, "lie_derivative", x_vector)


# -- variations ---------------------------------------------------------

def delta_christoffel(b: PerturbationField, g: MetricField):
    """(delta Gamma^k_ij, g^{ij} delta Gamma^k_ij) for the direction B.

    Returned as arrays indexed [..., i, j, k] and [..., k].
    """
    data = geo(g)
    lat = g.lattice
    nabla_b = covariant_derivative_sym2(lat, data.gamma, b.values)  # [..., l, i, j]
    d_i_b_lj = einsum("...ilj->...ijl", nabla_b)
    sym = (d_i_b_lj + np.swapaxes(d_i_b_lj, -3, -2)
           - einsum("...lij->...ijl", nabla_b))
    dgamma = 0.5 * einsum("...kl,...ijl->...ijk", data.g_inv, sym)
    contracted = einsum("...ij,...ijk->...k", data.g_inv, dgamma)
    return dgamma, contracted


def _full_antisym(two_form: FormField):
    """Expand increasing-tuple 2-form components into the full Pi_ij."""
    lat = two_form.lattice
    d = lat.dim
    comps = form_components(d, 2)
    full = np.zeros(lat.shape + (d, d))
    for c, (i, j) in enumerate(comps):
        full[..., i, j] = two_form.values[..., c]
        full[..., j, i] = -two_form.values[..., c]
    return full


def field_strength(phi: FormField) -> np.ndarray:
    """Pi_ij = d phi as a full antisymmetric component array (1-forms)."""
    if phi.degree != 1:
        raise FieldError("field strength needs a 1-form potential")
    return _full_antisym(calculus.exterior_derivative(phi))


def scalar_hessian(lat, gamma, phi_scalar):
    """nabla_i nabla_j phi for a scalar, [..., i, j]."""
    grad = np.stack([lat.partial(phi_scalar, axis) for axis in range(lat.dim)],
                    axis=-1)
    dgrad = np.stack([lat.partial(grad, axis) for axis in range(lat.dim)], axis=-2)
    return dgrad - einsum("...ijm,...m->...ij", gamma, grad)


def delta_operator(kind, phi: FormField, b: PerturbationField, g: MetricField,
                   mass=0.0, onshell_tol=None) -> FormField:
    """(d/ds A[h^s] phi)|_0 for the direction B = d_s h^s|_0.

    KG:    B_ij nabla^i nabla^j phi + (g^{ij} delta Gamma^k_ij) d_k phi
    Proca/EM (on the 1-form):
           B_ij nabla^i Pi^j_k + g^{ij} delta Gamma^l_ij Pi_lk
           + g^{ij} delta Gamma^l_ik Pi_jl
    with Pi = d phi; all applied on-shell.
    """
    lat = g.lattice
    data = geo(g)
    if onshell_tol is not None:
        op = solver.FieldOperator(kind, g, mass)
        res = solver.residual(op, phi)
        if res > onshell_tol:
            raise FieldError(f"off-shell input: residual {res:.3e} > {onshell_tol}")
    dgamma, contracted = delta_christoffel(b, g)
    if kind == solver.KG:
        hess = scalar_hessian(lat, data.gamma, phi.scalar())
        b_up = einsum("...ik,...jl,...kl->...ij", data.g_inv, data.g_inv, b.values)
        grad = np.stack([lat.partial(phi.scalar(), axis) for axis in range(lat.dim)],
                        axis=-1)
        out = (einsum("...ij,...ij->...", b_up, hess)
               + einsum("...k,...k->...", contracted, grad))
        return FormField(lat, 0, out[..., None], validate_halo=False)
    if kind not in (solver.PROCA, solver.MAXWELL):
        raise FieldError(f"no operator variation for kind {kind!r}")
    pi = field_strength(phi)
    napi = covariant_derivative_antisym2(lat, data.gamma, pi)  # [..., a, b, k]
    term1 = einsum("...ia,...jb,...ij,...abk->...k",
                      data.g_inv, data.g_inv, b.values, napi)
    term2 = einsum("...l,...lk->...k", contracted, pi)
    term3 = einsum("...ij,...ikl,...jl->...k", data.g_inv, dgamma, pi)
    return FormField(lat, 1, term1 + term2 + term3, validate_halo=False)


def geometric_identity_check(b: PerturbationField, g: MetricField, probe=None):
    """Max-norm defects of the Christoffel-variation identities.

    (i)  g^{ij} delta Gamma^k_ij - g^{jk} nabla^i B_ij
         + (1/2) g^{ij} g^{kl} nabla_l B_ij  = 0
    (ii) Pi_jl g^{ij} delta Gamma^l_ik + Pi^{jb} nabla_b B_kj = 0
         for an antisymmetric test tensor Pi.

    The delta Gamma side uses the covariant variation formula; the
    nabla B sides are assembled through density-weighted divergences and
    the gradient of the trace, an independently discretized route that
    cancels exactly on constant metrics and to O(dx^2) otherwise.
    """
    lat = g.lattice
    data = geo(g)
    g_inv = data.g_inv
    gamma = data.gamma
    dgamma, contracted = delta_christoffel(b, g)

    # independent route for nabla_b B_kj: covariant derivative of the
    # mixed tensor B^m_j, lowered afterwards; the partial derivative then
    # acts on g^{mn} B_nj, so the two routes differ only by stencil
    # product rules on smooth metric factors (exact on constant metrics)
    b_mixed = einsum("...mn,...nj->...mj", g_inv, b.values)     # B^m_j
    db_mixed = np.stack([lat.partial(b_mixed, axis) for axis in range(lat.dim)],
                        axis=-3)                                   # [..., b, m, j]
    nb_mixed = (db_mixed
                + einsum("...bnm,...nj->...bmj", gamma, b_mixed)
                - einsum("...bjn,...mn->...bmj", gamma, b_mixed))
    nabla_b_alt = einsum("...km,...bmj->...bkj", g.values, nb_mixed)

    div_alt = einsum("...bi,...bij->...j", g_inv, nabla_b_alt)  # nabla^i B_ij
    trace = einsum("...ij,...ij->...", g_inv, b.values)
    dtrace = np.stack([lat.partial(trace, axis) for axis in range(lat.dim)], axis=-1)
    defect1 = (contracted
               - einsum("...jk,...j->...k", g_inv, div_alt)
               + 0.5 * einsum("...kl,...l->...k", g_inv, dtrace))
    report = {"kg_identity": float(np.max(np.abs(defect1)))}

    if probe is None:
        rng = np.random.default_rng(2024)
        comps = form_components(lat.dim, 2)
        vals = rng.standard_normal(lat.shape + (len(comps),))
        probe = FormField(lat, 2, vals, validate_halo=False)
    pi = _full_antisym(probe)
    pi_up = einsum("...ja,...bc,...ac->...jb", g_inv, g_inv, pi)
    lhs = einsum("...jl,...ij,...ikl->...k", pi, g_inv, dgamma)
    rhs = einsum("...jb,...bkj->...k", pi_up, nabla_b_alt)
    report["proca_identity"] = float(np.max(np.abs(lhs + rhs)))
    return report


# -- stress tensors ------------------------------------------------------

@dataclass(frozen=True)
class PolarizedStressTensor:
    """Symmetric bilinear T^{ij}(phi, zeta) as a (2,0) component array."""

    lattice: object
    values: np.ndarray
    kind: str


def stress_energy_polarized(kind, phi: FormField, zeta: FormField,
                            g: MetricField, mass=0.0) -> PolarizedStressTensor:
    data = geo(g)
    lat = g.lattice
    g_inv = data.g_inv
    if kind == solver.KG:
        dphi = np.stack([lat.partial(phi.scalar(), a) for a in range(lat.dim)], -1)
        dzeta = np.stack([lat.partial(zeta.scalar(), a) for a in range(lat.dim)], -1)
        up_phi = einsum("...ij,...j->...i", g_inv, dphi)
        up_zeta = einsum("...ij,...j->...i", g_inv, dzeta)
        cross = einsum("...i,...i->...", up_phi, dzeta)
        quad = cross + mass ** 2 * phi.scalar() * zeta.scalar()
        t = (0.5 * (einsum("...i,...j->...ij", up_phi, up_zeta)
                    + einsum("...i,...j->...ij", up_zeta, up_phi))
             - 0.5 * g_inv * quad[..., None, None])
        return PolarizedStressTensor(lat, t, kind)
    if kind not in (solver.PROCA, solver.MAXWELL):
        raise FieldError(f"no stress tensor for kind {kind!r}")
    pi = field_strength(phi)
    zi = field_strength(zeta)
    pi_ud = einsum("...ia,...ab->...ib", g_inv, pi)               # Pi^i_b
    zi_ud = einsum("...ia,...ab->...ib", g_inv, zi)
    pi_uu = einsum("...ia,...jb,...ab->...ij", g_inv, g_inv, pi)  # Pi^{ij}
    zi_uu = einsum("...ia,...jb,...ab->...ij", g_inv, g_inv, zi)
    t = 0.5 * (einsum("...ib,...jb->...ij", pi_uu, zi_ud)
               + einsum("...ib,...jb->...ij", zi_uu, pi_ud))
    full = einsum("...ab,...ab->...", pi, zi_uu)
    t -= 0.25 * g_inv * full[..., None, None]
    if kind == solver.PROCA:
        up_phi = einsum("...ij,...j->...i", g_inv, phi.values)
        up_zeta = einsum("...ij,...j->...i", g_inv, zeta.values)
        t += 0.5 * mass ** 2 * (einsum("...i,...j->...ij", up_phi, up_zeta)
                                + einsum("...i,...j->...ij", up_zeta, up_phi))
        t -= 0.5 * mass ** 2 * g_inv * einsum(
            "...i,...i->...", up_phi, zeta.values)[..., None, None]
    return PolarizedStressTensor(lat, t, kind)


def stress_divergence(t: PolarizedStressTensor, g: MetricField):
    """nabla_i T^{ij} as a vector array (on-shell conservation check)."""
    data = geo(g)
    lat = g.lattice
    dt = np.stack([lat.partial(t.values, axis) for axis in range(lat.dim)], axis=-3)
    div = einsum("...iij->...j", dt)
    div += einsum("...imi,...mj->...j", data.gamma, t.values)
    div += einsum("...imj,...im->...j", data.gamma, t.values)
    return div


def action(kind, phi: FormField, g: MetricField, mass=0.0):
    """S = (1/2)(d phi, d phi) + (m^2/2)(phi, phi) with the metric g."""
    dphi = calculus.exterior_derivative(phi)
    s = 0.5 * calculus.global_pairing(dphi, dphi, g)
    if mass:
        s += 0.5 * mass ** 2 * calculus.global_pairing(phi, phi, g)
    return s


DEFECT_FLOOR_DENSITY = 1e-14


def balance_check(kind, phi: FormField, zeta: FormField, b: PerturbationField,
                  g: MetricField, mass=0.0, onshell_tol=None):
    """L = (zeta, d_s A[h^s] phi)|_0 and R = -int B_ij T^ij(phi, zeta).

    Returns (L, R, relative defect) with the floor 1e-14 * lattice
    volume protecting trivial cases.
    """
    lat = g.lattice
    var = delta_operator(kind, phi, b, g, mass, onshell_tol=onshell_tol)
    left = calculus.global_pairing(zeta, var, g)
    t = stress_energy_polarized(kind, phi, zeta, g, mass)
    data = geo(g)
    integrand = einsum("...ij,...ij->...", b.values, t.values)
    right = -float(np.sum(integrand * data.sqrt_det) * lat.cell_volume)
    volume = float(np.sum(data.sqrt_det) * lat.cell_volume)
    floor = DEFECT_FLOOR_DENSITY * volume
    defect = abs(left - right) / max(abs(left), abs(right), floor)
    return left, right, defect


# -- classical relative Cauchy evolution --------------------------------

def _scale_form(chi, form):
    return FormField(form.lattice, form.degree, chi[..., None] * form.values,
                     validate_halo=False)


def _commutator(op, chi, phi):
    """[A, chi] phi = A(chi phi) - chi (A phi): band-supported by stencil
    locality since chi depends on t only."""
    return (solver.apply_operator(op, _scale_form(chi, phi))
            - _scale_form(chi, solver.apply_operator(op, phi)))


def _propagator(op):
    if op.kind == solver.PROCA:
        return lambda f: solver.proca_propagator(f, op)
    if op.kind == solver.MAXWELL:
        box = solver.FieldOperator(solver.BOX_ONE, op.metric, 0.0, op.cfl)
        return lambda f: solver.causal_propagator(box, f)
    return lambda f: solver.causal_propagator(op, f)


def rce_bands(h: PerturbationField, lattice, fraction=0.25):
    """Time slabs for the partitions of unity: centered in the gaps
    between the perturbation support and the window ends, of width
    ``fraction`` times the gap."""
    lo, hi = h.support_box[0]
    t_lo, t_hi = lo * lattice.dt, hi * lattice.dt
    t_end = lattice.time_window[1]
    gap_before = t_lo
    gap_after = t_end - t_hi
    half = 0.5 * fraction
    band_minus = ((0.5 - half) * gap_before, (0.5 + half) * gap_before)
    band_plus = (t_hi + (0.5 - half) * gap_after, t_hi + (0.5 + half) * gap_after)
    return band_minus, band_plus


def perturbed_metric(g: MetricField, h: PerturbationField) -> MetricField:
    return MetricField(g.lattice, g.values + h.values)


def classical_rce(sv: symplectic.SolutionVector, h: PerturbationField,
                  bands=None, gauge_fix_em=True) -> symplectic.SolutionVector:
    """r_h phi = e_A A[h] ( chi_-^r e_{A[h]} A ( chi_+^r phi ) ).

    Assembled with operator/cutoff commutators so every marched source
    is supported in its time slab; on-shell inputs make the commutator
    form equal to the displayed one.  For EM the output is returned as
    a Lorenz-fixed gauge representative.
    """
    op = sv.operator
    g = op.metric
    lat = op.lattice
    if np.any(np.abs(h.values[..., 0, 1:]) > 0):
        raise FieldError("evolution perturbations must not carry time-space "
                         "cross terms h_{0a}")
    g_h = perturbed_metric(g, h)
    op_h = solver.FieldOperator(op.kind, g_h, op.mass, op.cfl)
    rce_regions(h, g)  # validates that full slices survive on both sides
    if bands is None:
        bands = rce_bands(h, lat)
    (b_minus, b_plus) = bands
    chi_minus = partition_of_unity(b_minus[0], b_minus[1], lat).chi_r()
    chi_plus = partition_of_unity(b_plus[0], b_plus[1], lat).chi_r()

    w1 = _commutator(op, chi_plus, sv.solution)
    psi = _propagator(op_h)(w1)
    w2 = _commutator(op_h, chi_minus, psi)
    out = _propagator(op)(w2)
    if op.kind == solver.MAXWELL and gauge_fix_em:
        out = symplectic.lorenz_gauge_fix(out, op)
    return symplectic.SolutionVector(op, w2, out)


def rce_derivative_analytic(sv: symplectic.SolutionVector,
                            b: PerturbationField,
                            onshell_tol=None) -> symplectic.SolutionVector:
    """e_A (d_s A[h^s]|_0) phi: the analytic direction of the RCE."""
    op = sv.operator
    var = delta_operator(op.kind, sv.solution, b, op.metric, op.mass,
                         onshell_tol=onshell_tol)
    out = _propagator(op)(var)
    return symplectic.SolutionVector(op, var, out)


def rce_derivative_fd(sv: symplectic.SolutionVector, family: PerturbationFamily,
                      s, bands=None) -> symplectic.SolutionVector:
    """(r_{sB} phi - r_0 phi) / s; the r_0 baseline cancels the
    s-independent part of the lattice composition error."""
    if bands is None:
        bands = rce_bands(family.direction, sv.operator.lattice)
    plus = classical_rce(sv, family.at(s), bands)
    zero = classical_rce(sv, family.at(0.0), bands)
    return (plus - zero) * (1.0 / s)
