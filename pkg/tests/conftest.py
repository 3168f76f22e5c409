import numpy as np
import pytest

from lcfield.grid import build_lattice


def fit_order(errors, spacings):
    """Least-squares slope of log(err) against log(h)."""
    errors = np.asarray(errors, dtype=float)
    spacings = np.asarray(spacings, dtype=float)
    return float(np.polyfit(np.log(spacings), np.log(errors), 1)[0])


def assert_order(errors, spacings, min_order, floor=1e-12):
    """Pass when the fitted order reaches min_order, or when every error
    already sits at the roundoff floor (no truncation error to converge)."""
    if max(errors) <= floor:
        return
    order = fit_order(errors, spacings)
    assert order >= min_order, f"order {order:.2f} < {min_order} ({errors})"


def square_lattice(n, lam=0.5, length=1.0, mode="periodic"):
    dx = length / n
    return build_lattice((n, n), (lam * dx, dx), mode)


def tall_lattice(n, t_factor=2.5, lam=0.5, mode="periodic"):
    dx = 1.0 / n
    return build_lattice((int(t_factor * n), n), (lam * dx, dx), mode)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
