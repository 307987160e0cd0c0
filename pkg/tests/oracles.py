"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def dyck_partner_distance(left_to_right: list[int], center: int) -> int | None:
    """Distance from ``center`` to its matching open bracket, by explicit stack matching.

    Symbols < 2 are open, >= 2 close. Matching is done over the whole prefix
    by a left-to-right stack; brackets left of index 0 are unknown, so an
    unmatched close returns ``None``.
    """
    stack: list[int] = []
    partner = {}
    for i, s in enumerate(left_to_right[: center + 1]):
        if s < 2:
            stack.append(i)
        elif stack:
            partner[i] = stack.pop()
        else:
            # matched (if at all) to something left of the window: every
            # open bracket before it is already matched
            stack.clear()
    if left_to_right[center] < 2:
        return 0
    if center not in partner:
        return None
    return center - partner[center]


def meshalkin_survival(n: int) -> float:
    """Exact ``P[R > n]`` for the bracket code with a fair first bit.

    ``R > n`` iff the site is a close bracket and the left walk (+1 for open,
    -1 for close) does not reach height +1 within ``n`` steps.
    """
    probs = {0: 1.0}
    for _ in range(n):
        new: dict[int, float] = {}
        for h, pr in probs.items():
            for step in (1, -1):
                g = h + step
                if g == 1:
                    continue
                new[g] = new.get(g, 0.0) + pr / 2
        probs = new
    return 0.5 * sum(probs.values())


def brute_factor_measure(block_fn, r: int, A: list[Fraction], yhat: list[int]) -> Fraction:
    """``nu([yhat])`` for a 1-d radius-r block code by listing every input on the extended window."""
    N = len(yhat)
    total = Fraction(0)
    for x in itertools.product(range(len(A)), repeat=N + 2 * r):
        if all(y < 0 or block_fn(x[u: u + 2 * r + 1]) == y for u, y in enumerate(yhat)):
            w = Fraction(1)
            for a in x:
                w *= A[a]
            total += w
    return total


def cyclic_xor3(x: list[int]) -> list[int]:
    N = len(x)
    return [(x[(u - 1) % N] + x[u] + x[(u + 1) % N]) % 2 for u in range(N)]


def empirical_norm(v: np.ndarray, k: float) -> float:
    return float(np.mean(np.abs(v) ** k) ** (1 / k))


def meshalkin_survival_closed(n: np.ndarray | int) -> np.ndarray:
    """Reflection principle: P[walk stays <= 0 for n steps] = C(n, floor(n/2)) / 2^n."""
    import math

    def one(m: int) -> float:
        k = m // 2
        return 0.5 * math.exp(math.lgamma(m + 1) - math.lgamma(k + 1) - math.lgamma(m - k + 1) - m * math.log(2))

    return np.vectorize(one, otypes=[float])(np.asarray(n, dtype=int))
