"""Exact-phase Weyl elements over the numerical symplectic space.

Elements are (phase, generator) pairs with |phase| = 1; the product
realizes the exponentiated commutation relations

    (p1, u) (p2, v) = (p1 p2 exp(-i/2 sigma(u, v)), u + v)

with sigma evaluated by the symplectic module.  No norms or completions:
this is the algebraic shadow the Weyl relations determine on products of
generators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rce, symplectic
from .causal import causal_hull, region_from_support
from .fields import FieldError

PHASE_TOL = 1e-14


@dataclass(frozen=True)
class WeylElement:
    phase: complex
    generator: symplectic.SolutionVector

    def __post_init__(self):
        if abs(abs(self.phase) - 1.0) > PHASE_TOL:
            raise FieldError("Weyl phases must have unit modulus")


def weyl(generator: symplectic.SolutionVector, phase=1.0 + 0.0j) -> WeylElement:
    return WeylElement(complex(phase), generator)


def weyl_compose(a: WeylElement, b: WeylElement) -> WeylElement:
    if a.generator.operator is not b.generator.operator:
        raise FieldError("kind mismatch in Weyl product")
    sigma = symplectic.symplectic_form(a.generator, b.generator)
    phase = a.phase * b.phase * np.exp(-0.5j * sigma)
    phase /= abs(phase)
    return WeylElement(phase, a.generator + b.generator)


def weyl_star(a: WeylElement) -> WeylElement:
    return WeylElement(np.conj(a.phase), -a.generator)


def causal_commutator_check(u: symplectic.SolutionVector,
                            v: symplectic.SolutionVector,
                            cone_metric=None):
    """|e^{-i sigma/2} - e^{+i sigma/2}| = 2 |sin(sigma/2)| together with
    the cone-disjointness flag of the generator supports."""
    sigma = symplectic.symplectic_form(u, v)
    magnitude = 2.0 * abs(np.sin(0.5 * sigma))
    g = cone_metric if cone_metric is not None else u.operator.metric
    lat = u.operator.lattice
    hull = causal_hull(region_from_support(lat, u.generator.values, 1e-12), g)
    supp_v = region_from_support(lat, v.generator.values, 1e-12)
    disjoint = not np.any(hull.mask & supp_v.mask)
    return magnitude, disjoint


def rce_lift(a: WeylElement, h, bands=None) -> WeylElement:
    """(p, u) -> (p, r_h u): the classical RCE acting on generators."""
    moved = rce.classical_rce(a.generator, h, bands)
    return WeylElement(a.phase, moved)


def reduce_word(elements):
    """Fold a finite word of Weyl elements left to right into a single
    (phase, generator) pair."""
    if not elements:
        raise FieldError("empty Weyl word")
    out = elements[0]
    for e in elements[1:]:
        out = weyl_compose(out, e)
    return out
