"""Finite-alphabet marginals, information statistics and i.i.d. sampling.

Configurations hold symbol *indices* (positions in ``Marginal.symbols``), not
the labels themselves.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Any, Hashable, Sequence

import numpy as np

from finitary.errors import DimensionMismatch, InsufficientWindow, PreconditionError
from finitary.lattice import Box, Site, TorusGeometry, as_site

LOG_BASES = ("natural", "base2")


def _log(x: float, base: str) -> float:
    return math.log2(x) if base == "base2" else math.log(x)


def _parse_prob(value: Any) -> Fraction | float:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    return float(value)


@dataclass(frozen=True)
class Marginal:
    """A probability vector on a finite alphabet.

    Probabilities are either all exact rationals (``Fraction``) or plain
    floats. Zero-probability symbols are rejected.
    """

    symbols: tuple[Hashable, ...]
    probs: tuple[Fraction | float, ...]
    log_base: str = "natural"
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        symbols = tuple(self.symbols)
        probs = tuple(_parse_prob(p) for p in self.probs)
        if len(symbols) == 0:
            raise PreconditionError("empty alphabet")
        if len(symbols) != len(probs):
            raise PreconditionError("symbols and probs differ in length")
        if len(set(symbols)) != len(symbols):
            raise PreconditionError("duplicate symbols")
        if self.log_base not in LOG_BASES:
            raise PreconditionError(f"log_base must be one of {LOG_BASES}")
        if any(isinstance(p, Fraction) for p in probs) and not all(
            isinstance(p, Fraction) for p in probs
        ):
            probs = tuple(float(p) for p in probs)
        if any(p <= 0 for p in probs):
            raise PreconditionError("probabilities must be strictly positive")
        total = sum(probs)
        if isinstance(total, Fraction):
            if total != 1:
                raise PreconditionError(f"probabilities sum to {total}, not 1")
        elif abs(total - 1.0) > 1e-12:
            raise PreconditionError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(symbols)})

    # constructors

    @classmethod
    def uniform(cls, m: int, log_base: str = "natural", symbols: Sequence[Hashable] | None = None) -> Marginal:
        if symbols is None:
            symbols = tuple(range(m))
        return cls(tuple(symbols), (Fraction(1, m),) * m, log_base)

    @classmethod
    def from_probs(cls, probs: Sequence[Any], log_base: str = "natural") -> Marginal:
        return cls(tuple(range(len(probs))), tuple(probs), log_base)

    @classmethod
    def from_dict(cls, obj: dict) -> Marginal:
        try:
            probs = obj["probs"]
        except KeyError:
            raise PreconditionError("marginal spec needs a 'probs' list") from None
        symbols = obj.get("symbols", list(range(len(probs))))
        return cls(tuple(symbols), tuple(probs), obj.get("log_base", "natural"))

    @classmethod
    def from_json(cls, text: str) -> Marginal:
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        probs = [str(p) if isinstance(p, Fraction) else p for p in self.probs]
        return {"symbols": list(self.symbols), "probs": probs, "log_base": self.log_base}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def with_base(self, log_base: str) -> Marginal:
        return Marginal(self.symbols, self.probs, log_base)

    # accessors

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def is_exact(self) -> bool:
        return isinstance(self.probs[0], Fraction)

    @property
    def float_probs(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs])

    @property
    def is_uniform(self) -> bool:
        return len(set(self.probs)) == 1

    def index(self, symbol: Hashable) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise PreconditionError(f"unknown symbol {symbol!r}") from None

    def info_values(self) -> np.ndarray:
        """``I_p(a)`` for every symbol, in alphabet order."""
        return np.array([-_log(float(p), self.log_base) for p in self.probs])

    def centered_info(self) -> np.ndarray:
        """``h + log p(a)`` per symbol; identically zero for uniform marginals."""
        if self.is_uniform:
            return np.zeros(self.size)
        return entropy(self) - self.info_values()


def entropy(p: Marginal) -> float:
    return info_moment(p, 1)


def information(p: Marginal, a: Hashable) -> float:
    return -_log(float(p.probs[p.index(a)]), p.log_base)


def info_moment(p: Marginal, k: int) -> float:
    """``E[I_p(X_0)^k]``: the k-th moment of the information function."""
    if k < 1:
        raise PreconditionError("moment order must be >= 1")
    total = 0.0
    for prob in p.probs:
        total += float(prob) * (-_log(float(prob), p.log_base)) ** k
    return total


def info_variance(p: Marginal) -> float:
    if p.is_uniform:
        return 0.0
    h = entropy(p)
    return max(info_moment(p, 2) - h * h, 0.0)


def permutation_equivalent(p: Marginal, q: Marginal, tol: float = 0.0) -> bool:
    """True iff the two probability multisets agree within ``tol`` entrywise."""
    if tol < 0:
        raise PreconditionError("tol must be nonnegative")
    if p.size != q.size:
        return False
    a = sorted(p.probs)
    b = sorted(q.probs)
    if tol == 0 and p.is_exact == q.is_exact:
        return a == b
    return all(abs(float(x) - float(y)) <= tol for x, y in zip(a, b))


# randomness

def make_rng(seed: Any | None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def child_seeds(seed: int | np.random.SeedSequence, count: int) -> list[np.random.SeedSequence]:
    """Independent streams derived from a master seed, one per block/worker."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(count)


def draw_symbols(p: Marginal, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    if p.size == 1:
        return np.zeros(shape, dtype=np.int64)
    if p.is_uniform:
        return rng.integers(0, p.size, size=shape, dtype=np.int64)
    cdf = np.cumsum(p.float_probs)
    cdf[-1] = 1.0
    u = rng.random(shape)
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


# configurations

class Window:
    """A configuration on a finite box of ``Z^d``.

    ``values[idx]`` is the symbol at site ``lo + idx``.
    """

    def __init__(self, values: np.ndarray, lo: Sequence[int]):
        self.values = np.asarray(values)
        self.lo = as_site(lo)
        if self.values.ndim != len(self.lo):
            raise DimensionMismatch("values rank differs from corner dimension")

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def hi(self) -> Site:
        return tuple(a + s - 1 for a, s in zip(self.lo, self.values.shape))

    def covers(self, center: Sequence[int], n: int) -> bool:
        return all(c - n >= a and c + n <= b for c, a, b in zip(center, self.lo, self.hi))

    def patch(self, center: Sequence[int], n: int) -> np.ndarray:
        """Values on ``B(center, n)`` as an array of shape ``(2n+1,)*d``."""
        center = as_site(center)
        if len(center) != self.d:
            raise DimensionMismatch("center dimension differs from configuration")
        if not self.covers(center, n):
            raise InsufficientWindow(f"B({center}, {n}) is not inside [{self.lo}, {self.hi}]")
        sl = tuple(slice(c - a - n, c - a + n + 1) for c, a in zip(center, self.lo))
        return self.values[sl]

    def __getitem__(self, site: Sequence[int]):
        return self.patch(site, 0).item()


class PeriodicConfig(Window):
    """The periodic extension to ``Z^d`` of a torus configuration."""

    def __init__(self, values: np.ndarray):
        values = np.asarray(values)
        super().__init__(values, (0,) * values.ndim)
        self.N = values.shape[0]
        if any(s != self.N for s in values.shape):
            raise DimensionMismatch("torus configurations must be cubic")

    def covers(self, center: Sequence[int], n: int) -> bool:
        return True

    def patch(self, center: Sequence[int], n: int) -> np.ndarray:
        center = as_site(center)
        if len(center) != self.d:
            raise DimensionMismatch("center dimension differs from configuration")
        idx = [np.arange(c - n, c + n + 1) % self.N for c in center]
        return self.values[np.ix_(*idx)]


class LazyField(Window):
    """An i.i.d. configuration on all of ``Z^d``, materialized on demand.

    Starts from an optional known block; every site outside it is drawn from
    ``p`` the first time any ``patch`` touches it. Values never change once
    drawn, so repeated queries are consistent.
    """

    def __init__(
        self,
        p: Marginal,
        rng: np.random.Generator,
        d: int = 1,
        known: np.ndarray | None = None,
        known_lo: Sequence[int] | None = None,
    ):
        self.p = p
        self.rng = rng
        if known is None:
            values = draw_symbols(p, (1,) * d, rng)
            lo = (0,) * d
        else:
            values = np.asarray(known, dtype=np.int64)
            lo = as_site(known_lo if known_lo is not None else (0,) * values.ndim)
        super().__init__(values, lo)

    def covers(self, center: Sequence[int], n: int) -> bool:
        return True

    def _grow(self, lo: Site, hi: Site) -> None:
        # at least double each side that grows, to amortize redraws
        new_lo, new_hi = [], []
        for a, b, want_a, want_b in zip(self.lo, self.hi, lo, hi):
            width = b - a + 1
            new_lo.append(min(want_a, a - width) if want_a < a else a)
            new_hi.append(max(want_b, b + width) if want_b > b else b)
        shape = tuple(b - a + 1 for a, b in zip(new_lo, new_hi))
        fresh = draw_symbols(self.p, shape, self.rng)
        sl = tuple(slice(a - na, a - na + s) for a, na, s in zip(self.lo, new_lo, self.values.shape))
        fresh[sl] = self.values
        self.values = fresh
        self.lo = tuple(new_lo)

    def patch(self, center: Sequence[int], n: int) -> np.ndarray:
        center = as_site(center)
        if len(center) != self.d:
            raise DimensionMismatch("center dimension differs from configuration")
        lo = tuple(c - n for c in center)
        hi = tuple(c + n for c in center)
        if not Window.covers(self, center, n):
            self._grow(lo, hi)
        return Window.patch(self, center, n)


def sample_window(p: Marginal, shape: Box | TorusGeometry, seed: Any = None) -> Window:
    """Draw i.i.d. symbols from ``p`` on a box or a torus.

    Returns a ``Window`` for a box and a ``PeriodicConfig`` for a torus.
    """
    rng = make_rng(seed)
    if isinstance(shape, TorusGeometry):
        return PeriodicConfig(draw_symbols(p, shape.shape, rng))
    if isinstance(shape, Box):
        return Window(draw_symbols(p, shape.shape, rng), shape.lo)
    raise PreconditionError(f"unsupported shape {shape!r}")
