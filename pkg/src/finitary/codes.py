"""Finitary codes as progressive local rules.

A code is evaluated at a site ``u`` by handing its ``rule`` the pattern on
``B(u, n)`` for ``n = 0, 1, 2, ...``; the rule answers with a range-symbol
index, or ``None`` when it needs a larger window. The coding radius is the
first ``n`` at which the rule answers.

Subclasses may override :meth:`FinitaryCode.evaluate` and
:meth:`FinitaryCode.apply_torus` with faster routines; the test-suite checks
those against the generic progressive path.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Hashable, Sequence

import numpy as np

from finitary.errors import InsufficientWindow, PreconditionError
from finitary.lattice import as_site
from finitary.process import Marginal, PeriodicConfig, Window

# deferral symbol; never a valid range index
STAR = -1

DEFAULT_CAP = 2**16


@dataclass(frozen=True)
class RadiusResult:
    """Coding radius at a site, or the cap at which evaluation gave up."""

    value: int | None
    output: int | None = None
    censored_at: int | None = None

    @property
    def censored(self) -> bool:
        return self.value is None


class FinitaryCode:
    """Base class: a translation-equivariant progressive rule on ``Z^d``."""

    name = "abstract"
    constant_radius: int | None = None

    def __init__(self, domain_size: int, range_symbols: Sequence[Hashable], d: int = 1):
        if domain_size < 1:
            raise PreconditionError("domain alphabet must be nonempty")
        if d < 1:
            raise PreconditionError("dimension must be >= 1")
        self.domain_size = int(domain_size)
        self.range_symbols = tuple(range_symbols)
        self.d = int(d)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({json.dumps(self.to_spec()['params'])})"

    # subclass surface

    def rule(self, patch: np.ndarray) -> int | None:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def range_marginal(self, p: Marginal) -> Marginal | None:
        """Law of ``Y_0`` when it is known in closed form, else ``None``."""
        return None

    def default_marginal(self, log_base: str = "natural") -> Marginal:
        return Marginal.uniform(self.domain_size, log_base)

    # evaluation

    def evaluate(self, x: Window, u: Sequence[int], cap: int) -> RadiusResult:
        u = as_site(u)
        if not x.covers(u, cap):
            raise InsufficientWindow(f"configuration does not cover B({u}, {cap})")
        for n in range(cap + 1):
            out = self.rule(x.patch(u, n))
            if out is not None:
                return RadiusResult(n, out)
        return RadiusResult(None, censored_at=cap)

    def apply_torus(self, values: np.ndarray, n: int) -> np.ndarray:
        """Truncated code ``phi^n`` at every site of a periodic configuration."""
        x = PeriodicConfig(values)
        out = np.empty(values.shape, dtype=np.int64)
        for site in itertools.product(*(range(s) for s in values.shape)):
            res = self.evaluate(x, site, n)
            out[site] = STAR if res.censored else res.output
        return out

    def to_spec(self) -> dict:
        return {"name": self.name, "params": self.params()}

    def check_domain(self, p: Marginal) -> None:
        if p.size != self.domain_size:
            raise PreconditionError(
                f"code {self.name} reads {self.domain_size} symbols, marginal has {p.size}"
            )


def coding_radius(code: FinitaryCode, x: Window, cap: int, u: Sequence[int] | None = None) -> RadiusResult:
    """Smallest ``n <= cap`` at which the code's output at ``u`` (default: origin) is determined."""
    if cap < 0:
        raise PreconditionError("cap must be nonnegative")
    if u is None:
        u = (0,) * code.d
    return code.evaluate(x, u, cap)


def phi_n_site(code: FinitaryCode, x: Window, n: int, u: Sequence[int]) -> int:
    """Truncated code: the output index at ``u`` if determined within radius ``n``, else ``STAR``."""
    if n < 0:
        raise PreconditionError("truncation depth must be nonnegative")
    res = code.evaluate(x, u, n)
    return STAR if res.censored else res.output


def _radius_of(patch: np.ndarray) -> int:
    return (patch.shape[0] - 1) // 2


def _central(patch: np.ndarray, r: int) -> np.ndarray:
    n = _radius_of(patch)
    return patch[(slice(n - r, n + r + 1),) * patch.ndim]


class BlockCode(FinitaryCode):
    """Sliding block code of constant radius ``r`` given by a truth table.

    ``table[i]`` is the output for the block whose row-major base-``|A|``
    encoding is ``i``.
    """

    name = "table"

    def __init__(
        self,
        radius: int,
        table: Sequence[int],
        domain_size: int,
        range_symbols: Sequence[Hashable],
        d: int = 1,
    ):
        super().__init__(domain_size, range_symbols, d)
        if radius < 0:
            raise PreconditionError("block radius must be nonnegative")
        self.r = int(radius)
        self.constant_radius = self.r
        self.block_sites = (2 * self.r + 1) ** self.d
        expected = self.domain_size**self.block_sites
        table = np.asarray(table, dtype=np.int64)
        if table.shape != (expected,):
            raise PreconditionError(f"truth table needs {expected} entries, got {table.size}")
        if table.size and (table.min() < 0 or table.max() >= len(self.range_symbols)):
            raise PreconditionError("truth table entries must index the range alphabet")
        self.table = table
        self._weights = self.domain_size ** np.arange(self.block_sites - 1, -1, -1, dtype=np.int64)

    def params(self) -> dict:
        return {
            "radius": self.r,
            "dimension": self.d,
            "domain_size": self.domain_size,
            "range": list(self.range_symbols),
            "table": self.table.tolist(),
        }

    def block_output(self, block: Sequence[int]) -> int:
        """Output for a flat row-major block over ``B(0, r)``."""
        return int(self.table[int(np.dot(np.asarray(block, dtype=np.int64), self._weights))])

    def block_outputs(self, blocks: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`block_output` over the rows of ``blocks``."""
        return self.table[np.asarray(blocks, dtype=np.int64) @ self._weights]

    def rule(self, patch: np.ndarray) -> int | None:
        if _radius_of(patch) < self.r:
            return None
        return self.block_output(_central(patch, self.r).ravel())

    def evaluate(self, x: Window, u: Sequence[int], cap: int) -> RadiusResult:
        u = as_site(u)
        if not x.covers(u, cap):
            raise InsufficientWindow(f"configuration does not cover B({u}, {cap})")
        if cap < self.r:
            return RadiusResult(None, censored_at=cap)
        return RadiusResult(self.r, self.block_output(x.patch(u, self.r).ravel()))

    def _torus_outputs(self, values: np.ndarray) -> np.ndarray:
        idx = np.zeros(values.shape, dtype=np.int64)
        axes = tuple(range(values.ndim))
        for off in itertools.product(range(-self.r, self.r + 1), repeat=self.d):
            idx = idx * self.domain_size + np.roll(values, tuple(-o for o in off), axis=axes)
        return self.table[idx]

    def apply_torus(self, values: np.ndarray, n: int) -> np.ndarray:
        values = np.asarray(values, dtype=np.int64)
        if n < self.r:
            return np.full(values.shape, STAR, dtype=np.int64)
        return self._torus_outputs(values)

    def range_marginal(self, p: Marginal) -> Marginal | None:
        self.check_domain(p)
        if self.domain_size**self.block_sites > 2**20:
            return None
        one = Fraction(1) if p.is_exact else 1.0
        mass: dict[int, Any] = {}
        for block in itertools.product(range(self.domain_size), repeat=self.block_sites):
            w = one
            for a in block:
                w = w * p.probs[a]
            b = self.block_output(block)
            mass[b] = mass.get(b, 0) + w
        keep = [b for b in range(len(self.range_symbols)) if b in mass and mass[b] > 0]
        if len(keep) != len(self.range_symbols):
            # symbols outside the image would carry zero mass
            return None
        return Marginal(self.range_symbols, tuple(mass[b] for b in keep), p.log_base)


class IdentityCode(BlockCode):
    name = "identity"

    def __init__(self, domain_size: int = 2, d: int = 1, symbols: Sequence[Hashable] | None = None):
        symbols = tuple(range(domain_size)) if symbols is None else tuple(symbols)
        super().__init__(0, np.arange(domain_size), domain_size, symbols, d)

    def params(self) -> dict:
        return {"domain_size": self.domain_size, "dimension": self.d}

    def apply_torus(self, values: np.ndarray, n: int) -> np.ndarray:
        return np.array(values, dtype=np.int64, copy=True)

    def range_marginal(self, p: Marginal) -> Marginal:
        self.check_domain(p)
        return p


class PermutationCode(BlockCode):
    """Radius-0 relabeling ``a -> table[a]``."""

    name = "permutation"

    def __init__(self, table: Sequence[int], d: int = 1, symbols: Sequence[Hashable] | None = None):
        table = [int(t) for t in table]
        if sorted(table) != list(range(len(table))):
            raise PreconditionError(f"permutation table {table} is not a bijection")
        m = len(table)
        symbols = tuple(range(m)) if symbols is None else tuple(symbols)
        super().__init__(0, table, m, symbols, d)

    def params(self) -> dict:
        return {"table": self.table.tolist(), "dimension": self.d}

    def range_marginal(self, p: Marginal) -> Marginal:
        self.check_domain(p)
        probs = [None] * p.size
        for a, b in enumerate(self.table):
            probs[b] = p.probs[a]
        return Marginal(self.range_symbols, tuple(probs), p.log_base)


class XorWindowCode(BlockCode):
    """Output is the parity of the bits on ``B(0, r)``."""

    name = "xor_window"

    def __init__(self, r: int = 1, d: int = 1):
        if r < 0:
            raise PreconditionError("xor radius must be nonnegative")
        # table-free: bypass BlockCode's table check
        FinitaryCode.__init__(self, 2, (0, 1), d)
        self.r = int(r)
        self.constant_radius = self.r
        self.block_sites = (2 * self.r + 1) ** self.d

    def params(self) -> dict:
        return {"r": self.r, "dimension": self.d}

    def block_output(self, block: Sequence[int]) -> int:
        return int(np.sum(block)) % 2

    def block_outputs(self, blocks: np.ndarray) -> np.ndarray:
        return np.asarray(blocks).sum(axis=1) % 2

    def _torus_outputs(self, values: np.ndarray) -> np.ndarray:
        acc = np.zeros(values.shape, dtype=np.int64)
        axes = tuple(range(values.ndim))
        for off in itertools.product(range(-self.r, self.r + 1), repeat=self.d):
            acc += np.roll(values, tuple(-o for o in off), axis=axes)
        return acc % 2

    def range_marginal(self, p: Marginal) -> Marginal:
        self.check_domain(p)
        # parity of K independent bits with P(1) = t
        K = self.block_sites
        t = p.probs[1]
        one = Fraction(1) if p.is_exact else 1.0
        p1 = (one - (one - 2 * t) ** K) / 2
        if p1 == 0:
            return None
        return Marginal((0, 1), (one - p1, p1), p.log_base)


class MeshalkinCode(FinitaryCode):
    """Bracket-matching code on ``Z``.

    A domain symbol ``a`` in ``{0,1,2,3}`` carries two bits
    ``(a // 2, a % 2)``. First bit 0 is an open bracket, 1 a close bracket.
    Open sites output ``o``; a close site outputs ``c_{ij}`` where ``i`` is
    the second bit at its matching open bracket (nearest unmatched one to
    the left) and ``j`` its own second bit.
    """

    name = "meshalkin"
    range_labels = ("o", "c00", "c01", "c10", "c11")
    _first_chunk = 64

    def __init__(self):
        super().__init__(4, self.range_labels, 1)

    @staticmethod
    def _close_symbol(open_sym: int, close_sym: int) -> int:
        return 1 + 2 * (open_sym % 2) + (close_sym % 2)

    def rule(self, patch: np.ndarray) -> int | None:
        n = _radius_of(patch)
        center = int(patch[n])
        if center < 2:
            return 0
        depth = 0
        for j in range(1, n + 1):
            s = int(patch[n - j])
            if s >= 2:
                depth += 1
            elif depth == 0:
                return self._close_symbol(s, center)
            else:
                depth -= 1
        return None

    def evaluate(self, x: Window, u: Sequence[int], cap: int) -> RadiusResult:
        (u0,) = as_site(u)
        if not x.covers((u0,), cap):
            raise InsufficientWindow(f"configuration does not cover B({u0}, {cap})")
        center = int(x.patch((u0,), 0)[0])
        if center < 2:
            return RadiusResult(0, 0)
        n = min(self._first_chunk, cap)
        while True:
            left = x.patch((u0,), n)[:n][::-1]
            heights = np.cumsum(np.where(left < 2, 1, -1))
            hits = np.flatnonzero(heights == 1)
            if hits.size:
                j = int(hits[0]) + 1
                return RadiusResult(j, self._close_symbol(int(left[j - 1]), center))
            if n >= cap:
                return RadiusResult(None, censored_at=cap)
            n = min(2 * n, cap)

    def apply_torus(self, values: np.ndarray, n: int) -> np.ndarray:
        values = np.asarray(values, dtype=np.int64)
        if values.ndim != 1:
            raise PreconditionError("meshalkin code is one-dimensional")
        N = values.shape[0]
        ext = values[np.arange(-n, N) % N].tolist()
        out = [STAR] * N
        stack: list[int] = []
        for k, s in enumerate(ext):
            j = k - n
            if s < 2:
                stack.append(k)
                if j >= 0:
                    out[j] = 0
            elif stack:
                partner = stack.pop()
                if j >= 0 and k - partner <= n:
                    out[j] = self._close_symbol(ext[partner], s)
        return np.array(out, dtype=np.int64)

    def range_marginal(self, p: Marginal) -> Marginal | None:
        self.check_domain(p)
        theta = p.probs[0] + p.probs[1]
        if theta < Fraction(1, 2):
            return None
        probs = [theta]
        for i in (0, 1):
            for j in (0, 1):
                probs.append(p.probs[i] / theta * p.probs[2 + j])
        return Marginal(self.range_symbols, tuple(probs), p.log_base)


class SyntheticRadiusCode(FinitaryCode):
    """Constant output with a radius of prescribed law.

    The domain is uniform on ``levels`` symbols. The rule stops at the first
    ``j >= 1`` with ``x_{j e_1} < t_j``, where the integer thresholds ``t_j``
    realize the hazard ``1 - S(j)/S(j-1)`` of the target survival ``S``
    rounded to multiples of ``1/levels``. The realized survival is available
    exactly from :meth:`exact_survival`.

    Laws: ``geometric`` with ``S(n) = ratio**n``; ``power`` with
    ``S(n) = n**(-exponent)`` for ``n >= 1``.
    """

    name = "synthetic_radius"

    def __init__(self, law: str = "geometric", ratio: float = 0.5, exponent: float = 0.5,
                 levels: int | None = None, d: int = 1):
        if law not in ("geometric", "power"):
            raise PreconditionError(f"unknown synthetic law {law!r}")
        if law == "geometric" and not 0 < ratio < 1:
            raise PreconditionError("geometric ratio must lie in (0, 1)")
        if law == "power" and exponent <= 0:
            raise PreconditionError("power exponent must be positive")
        if levels is None:
            levels = 2 if (law == "geometric" and ratio == 0.5) else 2**16
        super().__init__(int(levels), ("s",), d)
        self.law = law
        self.ratio = float(ratio)
        self.exponent = float(exponent)
        self._thr = np.zeros(1, dtype=np.int64)

    def params(self) -> dict:
        out = {"law": self.law, "levels": self.domain_size, "dimension": self.d}
        if self.law == "geometric":
            out["ratio"] = self.ratio
        else:
            out["exponent"] = self.exponent
        return out

    def _hazard(self, j: int) -> float:
        if self.law == "geometric":
            return 1.0 - self.ratio
        if j == 1:
            return 0.0
        return 1.0 - ((j - 1) / j) ** self.exponent

    def thresholds(self, n: int) -> np.ndarray:
        """Integer thresholds ``t_0 .. t_n`` (``t_0`` unused)."""
        if self._thr.size <= n:
            size = max(n + 1, 2 * self._thr.size)
            thr = np.array([0] + [round(self._hazard(j) * self.domain_size) for j in range(1, size)],
                           dtype=np.int64)
            self._thr = thr
        return self._thr[: n + 1]

    def exact_survival(self, n: int) -> Fraction:
        """``P[R > n]`` for the quantized law, as an exact rational."""
        M = self.domain_size
        out = Fraction(1)
        for t in self.thresholds(n)[1:]:
            out *= Fraction(M - int(t), M)
        return out

    def _axis_values(self, patch: np.ndarray) -> np.ndarray:
        n = _radius_of(patch)
        idx = (slice(n + 1, 2 * n + 1),) + (n,) * (patch.ndim - 1)
        return patch[idx]

    def rule(self, patch: np.ndarray) -> int | None:
        n = _radius_of(patch)
        if n == 0:
            return None
        vals = self._axis_values(patch)
        return 0 if np.any(vals < self.thresholds(n)[1:]) else None

    def evaluate(self, x: Window, u: Sequence[int], cap: int) -> RadiusResult:
        u = as_site(u)
        if not x.covers(u, cap):
            raise InsufficientWindow(f"configuration does not cover B({u}, {cap})")
        n = min(64, cap)
        while n > 0:
            vals = self._axis_values(x.patch(u, n))
            hits = np.flatnonzero(vals < self.thresholds(n)[1:])
            if hits.size:
                return RadiusResult(int(hits[0]) + 1, 0)
            if n >= cap:
                break
            n = min(2 * n, cap)
        return RadiusResult(None, censored_at=cap)

    def range_marginal(self, p: Marginal) -> Marginal:
        return Marginal(("s",), (Fraction(1) if p.is_exact else 1.0,), p.log_base)


BUILTIN_NAMES = ("identity", "permutation", "xor_window", "meshalkin", "synthetic_radius", "table")

# shorthand names accepted by make_builtin and the CLI
ALIASES = {
    "xor3": ("xor_window", {"r": 1, "dimension": 1}),
    "swap": ("permutation", {"table": [1, 0]}),
}


def make_builtin(name: str, params: dict | None = None) -> FinitaryCode:
    params = dict(params or {})
    if name in ALIASES:
        base, defaults = ALIASES[name]
        name, params = base, {**defaults, **params}
    d = int(params.pop("dimension", params.pop("d", 1)))
    try:
        if name == "identity":
            return IdentityCode(int(params.pop("domain_size", 2)), d)
        if name == "permutation":
            if "table" not in params:
                raise PreconditionError("permutation code needs a 'table'")
            return PermutationCode(params.pop("table"), d)
        if name == "xor_window":
            return XorWindowCode(int(params.pop("r", 1)), d)
        if name == "meshalkin":
            if d != 1:
                raise PreconditionError("meshalkin code is defined for d = 1 only")
            return MeshalkinCode()
        if name == "synthetic_radius":
            return SyntheticRadiusCode(d=d, **params)
        if name == "table":
            table = params["table"]
            rng = params.get("range")
            domain_size = params.get("domain_size")
            if domain_size is None:
                domain_size = len(params["domain"])
            if rng is None:
                rng = sorted({t for t in table})
            index = {s: i for i, s in enumerate(rng)}
            if any(t not in index for t in table):
                table = [int(t) for t in table]
            else:
                table = [index[t] for t in table]
            return BlockCode(int(params["radius"]), table, int(domain_size), rng, d)
    except (TypeError, KeyError) as exc:
        raise PreconditionError(f"invalid parameters for code {name!r}: {exc}") from exc
    raise PreconditionError(f"unknown code {name!r}; choose from {BUILTIN_NAMES + tuple(ALIASES)}")


def code_from_spec(spec: dict) -> FinitaryCode:
    if "name" not in spec:
        raise PreconditionError("code spec needs a 'name'")
    return make_builtin(spec["name"], spec.get("params", {}))


def load_code(text: str) -> FinitaryCode:
    """Resolve a CLI code argument: a builtin name, a JSON string or a JSON file path."""
    stripped = text.strip()
    if stripped.startswith("{"):
        return code_from_spec(json.loads(stripped))
    path = Path(stripped)
    if path.suffix == ".json" or path.exists():
        try:
            return code_from_spec(json.loads(path.read_text()))
        except OSError as exc:
            raise PreconditionError(f"cannot read code spec {path}: {exc}") from exc
    return make_builtin(stripped)
