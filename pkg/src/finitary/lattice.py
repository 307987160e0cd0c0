"""Integer lattice and discrete torus geometry.

Torus sites are stored 0-based, i.e. ``T_N^d`` is represented by ``[0, N)^d``.
Boxes follow the ``v + [1, N]^d`` convention: a box with corner ``v`` and side
``N`` holds the sites ``v_i + 1 <= t_i <= v_i + N``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from finitary.errors import DimensionMismatch, PreconditionError

Site = tuple[int, ...]

# neighborhoods of sites beyond this magnitude are refused
COORD_LIMIT = 2**62


def as_site(coords: Iterable[int] | int) -> Site:
    if isinstance(coords, int):
        return (coords,)
    return tuple(int(c) for c in coords)


def _common_dimension(sites: Iterable[Site]) -> int:
    dims = {len(s) for s in sites}
    if not dims:
        raise PreconditionError("empty site set")
    if len(dims) > 1:
        raise DimensionMismatch(f"sites of mixed dimensions {sorted(dims)}")
    (d,) = dims
    if d < 1:
        raise DimensionMismatch("sites must have dimension >= 1")
    return d


@dataclass(frozen=True)
class TorusGeometry:
    d: int
    N: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise PreconditionError(f"torus dimension must be >= 1, got {self.d}")
        if self.N < 1:
            raise PreconditionError(f"torus side must be >= 1, got {self.N}")
        if self.N**self.d > 2**62:
            raise PreconditionError("torus has too many sites to index")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def size(self) -> int:
        return self.N**self.d

    def sites(self) -> Iterable[Site]:
        """All torus sites in row-major order."""
        return itertools.product(range(self.N), repeat=self.d)


@dataclass(frozen=True)
class Box:
    """The translate ``corner + [1, side]^d`` of the cube."""

    corner: Site
    side: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "corner", as_site(self.corner))
        if self.side < 1:
            raise PreconditionError("box side must be positive")
        if len(self.corner) < 1:
            raise DimensionMismatch("box corner must have dimension >= 1")

    @property
    def d(self) -> int:
        return len(self.corner)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.d

    @property
    def lo(self) -> Site:
        """Smallest site of the box."""
        return tuple(c + 1 for c in self.corner)

    @property
    def hi(self) -> Site:
        """Largest site of the box."""
        return tuple(c + self.side for c in self.corner)

    def __contains__(self, site: Sequence[int]) -> bool:
        return len(site) == self.d and all(
            c + 1 <= s <= c + self.side for s, c in zip(site, self.corner)
        )

    def sites(self) -> Iterable[Site]:
        return itertools.product(*(range(c + 1, c + self.side + 1) for c in self.corner))


def box_neighborhood(S: Iterable[Sequence[int]], n: int) -> set[Site]:
    """Return ``B(S, n)``, the union of the cubes ``s + [-n, n]^d`` over ``s in S``."""
    sites = [as_site(s) for s in S]
    d = _common_dimension(sites)
    if n < 0:
        raise PreconditionError("neighborhood radius must be nonnegative")
    for s in sites:
        if any(abs(c) + n > COORD_LIMIT for c in s):
            raise OverflowError(f"neighborhood of {s} exceeds the coordinate bound")
    offsets = list(itertools.product(range(-n, n + 1), repeat=d))
    out: set[Site] = set()
    for s in sites:
        out.update(tuple(a + b for a, b in zip(s, off)) for off in offsets)
    return out


def torus_project(u: Sequence[int], geom: TorusGeometry) -> Site:
    u = as_site(u)
    if len(u) != geom.d:
        raise DimensionMismatch(f"site {u} has dimension {len(u)}, torus has {geom.d}")
    return tuple(c % geom.N for c in u)


def torus_neighborhood(S: Iterable[Sequence[int]], geom: TorusGeometry, m: int) -> set[Site]:
    """``B_{T_N^d}(S, m)``: the neighborhood taken on the torus."""
    return {torus_project(t, geom) for t in box_neighborhood(S, m)}


def lift_in_box(t_mod: Site, box: Box, N: int) -> Site:
    """The unique lattice site of ``box`` congruent to ``t_mod`` modulo ``N``."""
    return tuple(c + 1 + (s - c - 1) % N for s, c in zip(t_mod, box.corner))


def place_window(S: Iterable[Sequence[int]], geom: TorusGeometry, m: int) -> Site:
    """Find a corner ``v`` so that every lift of ``S`` into ``v + [1, N]^d``
    keeps its ``m``-neighborhood inside the box.

    Each coordinate independently takes the smallest residue not covered by
    the projected neighborhood. Raises if some coordinate is fully covered.
    """
    sites = [torus_project(s, geom) for s in S]
    if not sites:
        raise PreconditionError("cannot place an empty site set")
    N = geom.N
    v = []
    for i in range(geom.d):
        occupied = {(s[i] + delta) % N for s in sites for delta in range(-m, m + 1)}
        free = [r for r in range(N) if r not in occupied]
        if not free:
            raise PreconditionError(
                f"coordinate {i}: the {m}-neighborhood of S covers every residue mod {N}"
            )
        v.append(free[0])
    return tuple(v)


def check_lift(S: Iterable[Sequence[int]], geom: TorusGeometry, v: Sequence[int], m: int) -> bool:
    """Containment predicate, evaluated by brute force over the box.

    Scans every site of ``v + [1, N]^d`` and keeps those projecting into
    ``S``; each must be unique per element of ``S`` and keep its cube
    ``t + [-m, m]^d`` inside the box.
    """
    targets = {torus_project(s, geom) for s in S}
    box = Box(tuple(v), geom.N)
    found: dict[Site, list[Site]] = {s: [] for s in targets}
    for t in box.sites():
        key = torus_project(t, geom)
        if key in found:
            found[key].append(t)
    lo, hi = box.lo, box.hi
    for preimages in found.values():
        if len(preimages) != 1:
            return False
        (t,) = preimages
        if any(c - m < a or c + m > b for c, a, b in zip(t, lo, hi)):
            return False
    return True


def lift_window(S: Iterable[Sequence[int]], geom: TorusGeometry, m: int, k: int) -> Site:
    """Corner ``v`` such that ``pi^{-1}(S)`` restricted to ``v + [1, N]^d``
    keeps every ``m``-cube inside the box.

    Requires ``|S| <= k``, ``m > 2k`` and ``N == 2 (k + 1) m``; under these
    conditions every coordinate has at most ``k (2m + 1) < N`` covered
    residues, so a free one always exists.
    """
    sites = {torus_project(s, geom) for s in S}
    if not sites:
        raise PreconditionError("S must be nonempty")
    if len(sites) > k:
        raise PreconditionError(f"|S| = {len(sites)} exceeds k = {k}")
    if m <= 2 * k:
        raise PreconditionError(f"m = {m} must exceed 2k = {2 * k}")
    if geom.N != 2 * (k + 1) * m:
        raise PreconditionError(f"N must equal 2(k+1)m = {2 * (k + 1) * m}, got {geom.N}")
    return place_window(sites, geom, m)
