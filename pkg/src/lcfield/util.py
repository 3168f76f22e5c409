"""Small shared utilities."""

import numpy as np


def einsum(subscripts, *operands):
    """np.einsum with contraction-path optimization always on."""
    return np.einsum(subscripts, *operands, optimize=True)
