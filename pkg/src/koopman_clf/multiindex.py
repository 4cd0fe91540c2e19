"""Multi-index bookkeeping for the monomial basis of the polydisk Hardy space.

Multi-indices are plain tuples of non-negative ints.  The basis over n
variables up to total degree N is ordered degree first; within a degree,
the index whose exponent is larger at the smallest differing slot comes
first, so for n = 2, degree 2 the order is (2,0), (1,1), (0,2).
"""

import math
from dataclasses import dataclass, field

import numpy as np


def order_key(alpha):
    """Sort key realizing the basis order (degree, then descending slots)."""
    return (sum(alpha), tuple(-a for a in alpha))


def _compositions(nslots, total):
    # descending first slot, recursively: exactly the within-degree order
    if nslots == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for rest in _compositions(nslots - 1, total - head):
            yield (head,) + rest


@dataclass(frozen=True)
class MultiIndexBasis:
    """All multi-indices with |alpha| <= max_degree in basis order.

    Row 0 of ``exponents`` is the zero index (constant monomial); the
    operator-facing indices run 1..size.
    """

    dimension: int
    max_degree: int
    exponents: np.ndarray
    _inverse: dict = field(repr=False)
    degree_start: np.ndarray

    @property
    def size(self):
        """Number of non-constant basis monomials."""
        return self.exponents.shape[0] - 1

    def alpha(self, k):
        return tuple(int(a) for a in self.exponents[k])

    def degree(self, k):
        return int(self.exponents[k].sum())

    def index_of(self, alpha):
        """Basis position of ``alpha``, or None when |alpha| > max_degree."""
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.dimension:
            raise ValueError(
                f"multi-index has {len(alpha)} slots, basis has {self.dimension}"
            )
        if any(a < 0 for a in alpha):
            raise ValueError(f"negative exponent in {alpha}")
        if sum(alpha) > self.max_degree:
            return None
        return self._inverse[alpha]

    def indices_of_degree(self, d):
        """range of basis positions whose total degree equals d."""
        return range(int(self.degree_start[d]), int(self.degree_start[d + 1]))

    def count_of_degree(self, d):
        """Number of monomials of exact total degree d (any d >= 0)."""
        return math.comb(d + self.dimension - 1, self.dimension - 1)


def build_basis(dimension, max_degree):
    """Enumerate the basis for ``dimension`` variables up to ``max_degree``."""
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    rows = []
    starts = [0]
    for d in range(max_degree + 1):
        rows.extend(_compositions(dimension, d))
        starts.append(len(rows))
    exps = np.array(rows, dtype=np.int64)
    inverse = {alpha: k for k, alpha in enumerate(rows)}
    return MultiIndexBasis(dimension, max_degree, exps, inverse, np.array(starts))


def shift_index(alpha, component, gamma):
    """The coefficient exponent gamma - alpha + e_component, or None.

    Returns the multi-index beta such that a monomial of exponent alpha,
    hit by the coefficient beta in slot ``component`` of a vector field,
    lands on exponent gamma.  None when some slot would go negative.
    """
    if len(alpha) != len(gamma):
        raise ValueError("alpha and gamma must have the same length")
    if not 0 <= component < len(alpha):
        raise ValueError(f"component {component} out of range")
    beta = list(g - a for g, a in zip(gamma, alpha))
    beta[component] += 1
    if any(b < 0 for b in beta):
        return None
    return tuple(beta)
