"""Exterior calculus: d, the Hodge star, codifferential, Box_k, the
Lichnerowicz form and the global pairing.

Star conventions are pinned by the *1 = volume form test and the hand
value *(dt) = -dx on oriented Minkowski 1+1 (derived from
eta ^ *theta = <eta, theta> dmu together with ** = s(-1)^{k(d-k)}).
The epsilon-symbol component formula provides an independent oracle for
the frame-based construction.
"""

import itertools
import math

import numpy as np
import pytest

from conftest import assert_order, fit_order, square_lattice

from lcfield import calculus as calc, geometry as geo
from lcfield.cache import geo as geod, permutation_sign
from lcfield.fields import FieldError, FormField, MetricField, form_components
from lcfield.grid import build_lattice
from lcfield.profiles import bump_form


def curved_metric(lat, amp=0.25):
    return geo.bump_metric(lat, amp, (0.25, 0.5), (0.2, 0.25), (1, 1))


def random_form(lat, k, rng, unit=True):
    ncomp = len(form_components(lat.dim, k))
    vals = rng.standard_normal(lat.shape + (ncomp,))
    if unit:
        vals /= np.max(np.abs(vals))
    return FormField(lat, k, vals, validate_halo=False)


def epsilon_star(omega, g):
    """Independent oracle: the totally antisymmetric symbol formula
    (*w)_J = (1/k!) w_I g^{II'} eps_{I'J} sqrt|det g| expanded over all
    index tuples."""
    lat = omega.lattice
    d = lat.dim
    k = omega.degree
    data = geod(g)
    g_inv = data.g_inv
    sqrt_det = data.sqrt_det
    src = form_components(d, k)
    dst = form_components(d, d - k)
    full = np.zeros(lat.shape + (d,) * k)
    for c, I in enumerate(src):
        for perm in itertools.permutations(range(k)):
            sign = permutation_sign(perm)
            idx = tuple(I[p] for p in perm)
            full[(...,) + idx] = sign * omega.values[..., c]
    out = np.zeros(lat.shape + (len(dst),))
    for r, J in enumerate(dst):
        acc = np.zeros(lat.shape)
        for I_raised in itertools.product(range(d), repeat=k):
            eps_idx = I_raised + J
            if len(set(eps_idx)) != d:
                continue
            eps = permutation_sign(eps_idx)
            term = np.ones(lat.shape) * eps
            lowered = np.zeros(lat.shape + (d,) * k) if k else None
            # contract w_{i...} g^{i i'} ... for this raised tuple
            comp = np.zeros(lat.shape)
            for I_low in itertools.product(range(d), repeat=k):
                factor = np.ones(lat.shape)
                for a in range(k):
                    factor = factor * g_inv[..., I_low[a], I_raised[a]]
                comp += full[(...,) + I_low] * factor
            acc += comp * eps
        out[..., r] = acc * sqrt_det / max(1, math.factorial(k))
    return FormField(lat, d - k, out, validate_halo=False)


class TestExteriorDerivative:
    def test_constant_scalar(self):
        lat = square_lattice(32)
        f = FormField(lat, 0, np.ones(lat.shape))
        assert calc.exterior_derivative(f).norm_inf() == 0.0

    def test_dd_zero_random(self, rng):
        # the two end slices compose one-sided stencils whose roundoff
        # amplification is twice the centered one; the window interior
        # carries pure-centered roundoff
        lat = build_lattice((64, 64), (1 / 64, 1 / 64))
        f = random_form(lat, 0, rng)
        ddf = calc.exterior_derivative(calc.exterior_derivative(f))
        assert np.max(np.abs(ddf.values[2:-2])) < 1e-12
        assert ddf.norm_inf() < 4e-12

    def test_top_degree_errors(self):
        lat = square_lattice(16)
        top = FormField.zero(lat, 2)
        with pytest.raises(FieldError):
            calc.exterior_derivative(top)

    def test_sine_derivative_converges(self):
        errs = []
        for n in (32, 64, 128):
            lat = square_lattice(n)
            x = lat.coordinate_grids()[1]
            f = FormField(lat, 0, np.sin(2 * np.pi * x))
            df = calc.exterior_derivative(f)
            exact = 2 * np.pi * np.cos(2 * np.pi * x)
            errs.append(np.max(np.abs(df.values[..., 1] - exact)))
        assert_order(errs, [1 / 32, 1 / 64, 1 / 128], 1.9)


class TestHodgeStar:
    def test_star_one_is_volume(self):
        lat = square_lattice(16)
        for g in (geo.minkowski_metric(lat), curved_metric(lat)):
            one = FormField(lat, 0, np.ones(lat.shape))
            top = calc.hodge_star(one, g)
            assert np.allclose(top.values[..., 0], geo.volume_density(g), atol=1e-13)

    def test_star_dt_golden(self):
        lat = square_lattice(16)
        g = geo.minkowski_metric(lat)
        dt = FormField(lat, 1, np.stack([np.ones(lat.shape), np.zeros(lat.shape)], -1))
        sdt = calc.hodge_star(dt, g)
        assert np.allclose(sdt.values[..., 0], 0.0, atol=1e-14)
        assert np.allclose(sdt.values[..., 1], -1.0, atol=1e-14)

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_double_star_identity(self, k, rng):
        lat = square_lattice(32)
        for g in (geo.minkowski_metric(lat), curved_metric(lat)):
            w = random_form(lat, k, rng)
            ww = calc.hodge_star(calc.hodge_star(w, g), g)
            expect = -1.0 * (-1.0) ** (k * (2 - k))
            assert np.max(np.abs(ww.values - expect * w.values)) < 1e-12

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_star_matches_epsilon_formula(self, k, rng):
        lat = square_lattice(12)
        g = curved_metric(lat)
        w = random_form(lat, k, rng)
        ours = calc.hodge_star(w, g)
        oracle = epsilon_star(w, g)
        assert np.max(np.abs(ours.values - oracle.values)) < 1e-11

    def test_double_star_2plus1(self, rng):
        lat = build_lattice((12, 12, 12), (0.05, 0.08, 0.08))
        g = geo.frw_metric(lat, 0.2)
        for k in range(4):
            w = random_form(lat, k, rng)
            ww = calc.hodge_star(calc.hodge_star(w, g), g)
            expect = -1.0 * (-1.0) ** (k * (3 - k))
            assert np.max(np.abs(ww.values - expect * w.values)) < 1e-12


class TestCodifferential:
    def test_scalar_codifferential_is_zero(self, rng):
        lat = square_lattice(16)
        g = geo.minkowski_metric(lat)
        f = random_form(lat, 0, rng)
        assert calc.codifferential(f, g).norm_inf() == 0.0

    def test_flat_divergence_formula(self, rng):
        lat = square_lattice(32)
        g = geo.minkowski_metric(lat)
        th = random_form(lat, 1, rng)
        dl = calc.codifferential(th, g)
        ref = lat.partial(th.values[..., 0], 0) - lat.partial(th.values[..., 1], 1)
        assert np.max(np.abs(dl.values[..., 0] - ref)) < 1e-12

    def test_covariant_divergence_cross_check(self):
        # delta theta = -nabla^i theta_i on a curved metric, to O(h^2)
        errs = []
        for n in (32, 64, 128):
            lat = square_lattice(n)
            g = curved_metric(lat)
            th = bump_form(lat, 1, (0.25, 0.5), (0.06, 0.1), weights=(1.0, -0.7))
            dl = calc.codifferential(th, g)
            data = geod(g)
            grad = geo.covariant_derivative_covector(lat, data.gamma, th.values)
            ref = -np.einsum("...ij,...ij->...", data.g_inv, grad)
            errs.append(np.max(np.abs(dl.values[..., 0] - ref)))
        assert_order(errs, [1 / 32, 1 / 64, 1 / 128], 1.9)

    def test_delta_squared_machine_zero(self, rng):
        lat = square_lattice(32)
        g = curved_metric(lat)
        beta = random_form(lat, 2, rng)
        dd = calc.codifferential(calc.codifferential(beta, g), g)
        assert dd.norm_inf() < 1e-11


class TestBox:
    def test_box0_is_delta_d(self, rng):
        lat = square_lattice(24)
        g = curved_metric(lat)
        f = random_form(lat, 0, rng)
        box = calc.box_k(f, g)
        dd = calc.codifferential(calc.exterior_derivative(f), g)
        assert np.array_equal(box.values, dd.values)

    def test_plane_wave_eigenvalue(self):
        errs = []
        for n in (32, 64, 128):
            lat = square_lattice(n)
            g = geo.minkowski_metric(lat)
            x = lat.coordinate_grids()[1]
            f = FormField(lat, 0, np.sin(2 * np.pi * x))
            box = calc.box_k(f, g)
            errs.append(np.max(np.abs(box.values[..., 0]
                                      - (2 * np.pi) ** 2 * np.sin(2 * np.pi * x))))
        assert_order(errs, [1 / 32, 1 / 64, 1 / 128], 1.9)

    def test_selfadjointness_defect_order(self):
        errs = []
        for n in (32, 64, 128):
            lat = square_lattice(n)
            g = geo.frw_metric(lat, 0.3)
            w = bump_form(lat, 1, (0.25, 0.45), (0.05, 0.08), weights=(0.8, 1.0))
            th = bump_form(lat, 1, (0.25, 0.55), (0.05, 0.08), weights=(1.0, -0.5))
            lhs = calc.global_pairing(calc.box_k(w, g), th, g)
            rhs = calc.global_pairing(w, calc.box_k(th, g), g)
            errs.append(abs(lhs - rhs))
        assert_order(errs, [1 / 32, 1 / 64, 1 / 128], 1.9)


class TestLichnerowicz:
    def test_flat_reduces_to_rough_laplacian(self, rng):
        lat = square_lattice(32)
        g = geo.minkowski_metric(lat)
        w = bump_form(lat, 1, (0.25, 0.5), (0.05, 0.08), weights=(1.0, 0.5))
        lich = calc.lichnerowicz_box(w, g)
        rough = np.zeros_like(w.values)
        for axis, sgn in ((0, 1.0), (1, -1.0)):
            rough += sgn * lat.partial(lat.partial(w.values, axis), axis)
        assert np.max(np.abs(lich.values - rough)) < 1e-10

    def test_frw_agreement_with_box(self):
        errs = []
        for n in (64, 128, 256):
            lat = square_lattice(n)
            g = geo.frw_metric(lat, 0.3)
            w = bump_form(lat, 1, (0.25, 0.5), (0.05, 0.08), weights=(0.7, 1.0))
            a = calc.box_k(w, g)
            b = calc.lichnerowicz_box(w, g)
            errs.append(np.max(np.abs((a - b).values[2:-2])))
        assert_order(errs, [1 / 64, 1 / 128, 1 / 256], 1.9)

    def test_scalar_analogue(self):
        lat = square_lattice(64)
        g = geo.frw_metric(lat, 0.3)
        f = bump_form(lat, 0, (0.25, 0.5), (0.05, 0.08))
        box = calc.box_k(f, g)
        data = geod(g)
        hess = np.stack([lat.partial(f.values[..., 0], a) for a in range(2)], -1)
        hess = np.stack([lat.partial(hess, a) for a in range(2)], -2)
        from lcfield.rce import scalar_hessian
        hess = scalar_hessian(lat, data.gamma, f.values[..., 0])
        rough = -np.einsum("...ij,...ij->...", data.g_inv, hess)
        scale = box.norm_inf()
        assert np.max(np.abs(box.values[2:-2, :, 0] - rough[2:-2])) < 2e-3 * scale


class TestGlobalPairing:
    def test_positive_scalar_bump(self):
        lat = square_lattice(32)
        g = geo.minkowski_metric(lat)
        f = bump_form(lat, 0, (0.25, 0.5), (0.05, 0.08))
        val = calc.global_pairing(f, f, g)
        assert val > 0
        assert val == pytest.approx(np.sum(f.values ** 2) * lat.cell_volume)

    def test_symmetry_exact(self, rng):
        lat = square_lattice(16)
        g = curved_metric(lat)
        w = random_form(lat, 1, rng)
        th = random_form(lat, 1, rng)
        a = calc.global_pairing(w, th, g)
        b = calc.global_pairing(th, w, g)
        assert abs(a - b) <= 1e-14 * max(abs(a), 1.0)

    def test_degree_mismatch(self, rng):
        lat = square_lattice(16)
        g = geo.minkowski_metric(lat)
        with pytest.raises(FieldError):
            calc.fiber_inner(random_form(lat, 0, rng), random_form(lat, 1, rng), g)

    def test_adjointness_defect_order(self):
        errs = []
        for n in (32, 64, 128):
            lat = square_lattice(n)
            g = geo.frw_metric(lat, 0.3)
            w = bump_form(lat, 0, (0.25, 0.45), (0.05, 0.08))
            th = bump_form(lat, 1, (0.25, 0.55), (0.05, 0.08), weights=(1.0, 0.6))
            lhs = calc.global_pairing(calc.exterior_derivative(w), th, g)
            rhs = calc.global_pairing(w, calc.codifferential(th, g), g)
            errs.append(abs(lhs - rhs))
        assert_order(errs, [1 / 32, 1 / 64, 1 / 128], 1.9)

    def test_fiber_inner_against_wedge_star(self, rng):
        # s * (w ^ *th) realized as the star composition equals <w, th>
        lat = square_lattice(12)
        g = curved_metric(lat)
        w = random_form(lat, 1, rng)
        th = random_form(lat, 1, rng)
        inner = calc.fiber_inner(w, th, g)
        sth = calc.hodge_star(th, g)
        # w ^ *th in 1+1: (w ^ sth)_{01} = w_0 sth_1 - w_1 sth_0
        wedge = w.values[..., 0] * sth.values[..., 1] - w.values[..., 1] * sth.values[..., 0]
        top = FormField(lat, 2, wedge[..., None], validate_halo=False)
        back = calc.hodge_star(top, g)
        assert np.max(np.abs(-1.0 * back.values[..., 0] - inner)) < 1e-12
