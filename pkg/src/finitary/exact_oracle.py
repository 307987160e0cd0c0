"""Exact cylinder measures and exhaustive checks of ``mu([x]) <= nu([phi^n(x)])``.

All arithmetic is in ``Fraction``/``int``. Only constant-radius block codes
are admitted, so the factor measure of a cylinder is a finite sum.

Two independent routes compute the factor measure ``nu([y])``:

* ``method="enumerate"``: every input on the ``r``-neighborhood of the
  window is listed (guarded at ``ENUMERATION_GUARD`` inputs);
* ``method="transfer"``: sites are summed out one at a time in row-major
  order, carrying only the sites that later constraints still read.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from finitary.codes import STAR, BlockCode, FinitaryCode
from finitary.errors import GuardExceeded, PreconditionError
from finitary.lattice import TorusGeometry
from finitary.process import Marginal
from finitary.torus_model import TorusConfig, model_apply

ENUMERATION_GUARD = 2**24


def _require_exact(p: Marginal) -> None:
    if not p.is_exact:
        raise PreconditionError("exact measures need a marginal with rational probabilities")


def _require_block_code(code: FinitaryCode) -> BlockCode:
    if not isinstance(code, BlockCode) or code.constant_radius is None:
        raise PreconditionError(f"code {code.name!r} does not have a constant radius")
    return code


def _integer_weights(p: Marginal) -> tuple[list[int], int]:
    """Numerators over a common denominator ``D``: ``p_a = w_a / D``."""
    D = math.lcm(*(q.denominator for q in p.probs))
    return [int(q * D) for q in p.probs], D


def domain_cylinder_measure(p: Marginal, xhat: TorusConfig | np.ndarray) -> Fraction:
    """``mu([xhat])``: the product of ``p`` over every torus site."""
    _require_exact(p)
    values = xhat.values if isinstance(xhat, TorusConfig) else np.asarray(xhat)
    counts = np.bincount(values.ravel(), minlength=p.size)
    out = Fraction(1)
    for a, c in enumerate(counts):
        out *= p.probs[a] ** int(c)
    return out


def _window_layout(shape: tuple[int, ...], r: int):
    """Sites of ``B(window, r)`` in row-major order, and for every window
    site the flat indices (row-major over ``B(u, r)``) of its block."""
    ext_shape = tuple(s + 2 * r for s in shape)
    ext_index = {site: i for i, site in enumerate(itertools.product(*(range(s) for s in ext_shape)))}
    offsets = list(itertools.product(range(-r, r + 1), repeat=len(shape)))
    blocks = {}
    for u in itertools.product(*(range(s) for s in shape)):
        # window site u sits at u + r in extended coordinates
        blocks[u] = [ext_index[tuple(c + r + o for c, o in zip(u, off))] for off in offsets]
    return ext_shape, len(ext_index), blocks


def _constraints(code: BlockCode, yhat: np.ndarray):
    _, n_ext, blocks = _window_layout(yhat.shape, code.r)
    cons = []
    for u, idx in blocks.items():
        target = int(yhat[u])
        if target != STAR:
            cons.append((idx, target))
    return n_ext, cons


def _factor_measure_enumerate(code: BlockCode, p: Marginal, yhat: np.ndarray) -> Fraction:
    n_ext, cons = _constraints(code, yhat)
    A = p.size
    total_configs = A**n_ext
    if total_configs > ENUMERATION_GUARD:
        raise GuardExceeded(f"{total_configs} inputs exceed the enumeration guard {ENUMERATION_GUARD}")
    if not cons:
        return Fraction(1)
    digits = A ** np.arange(n_ext - 1, -1, -1, dtype=np.int64)
    accepted: Counter = Counter()
    chunk = 1 << 16
    for start in range(0, total_configs, chunk):
        codes_ = np.arange(start, min(start + chunk, total_configs), dtype=np.int64)
        configs = (codes_[:, None] // digits[None, :]) % A
        ok = np.ones(len(codes_), dtype=bool)
        for idx, target in cons:
            ok &= code.block_outputs(configs[:, idx]) == target
            if not ok.any():
                break
        if ok.any():
            counts = np.stack([(configs[ok] == a).sum(axis=1) for a in range(A)], axis=1)
            accepted.update(map(tuple, counts.tolist()))
    out = Fraction(0)
    for counts, mult in accepted.items():
        w = Fraction(mult)
        for a, c in enumerate(counts):
            w *= p.probs[a] ** c
        out += w
    return out


def _factor_measure_transfer(code: BlockCode, p: Marginal, yhat: np.ndarray,
                             state_guard: int = ENUMERATION_GUARD) -> Fraction:
    n_ext, cons = _constraints(code, yhat)
    if not cons:
        return Fraction(1)
    w, D = _integer_weights(p)
    A = p.size
    # a site stays in the state until the last constraint reading it fires
    by_last: dict[int, list] = {}
    release = list(range(n_ext))
    for idx, target in cons:
        last = max(idx)
        by_last.setdefault(last, []).append((idx, target))
        for i in idx:
            release[i] = max(release[i], last)
    active: list[int] = []
    states: dict[tuple, int] = {(): 1}
    for s in range(n_ext):
        active.append(s)
        pos = {site: k for k, site in enumerate(active)}
        new: dict[tuple, int] = {}
        for st, weight in states.items():
            for a in range(A):
                new[st + (a,)] = weight * w[a]
        for idx, target in by_last.get(s, ()):
            locs = [pos[i] for i in idx]
            new = {st: wt for st, wt in new.items()
                   if code.block_output([st[k] for k in locs]) == target}
        keep = [k for k, site in enumerate(active) if release[site] > s]
        if len(keep) < len(active):
            merged: dict[tuple, int] = {}
            for st, wt in new.items():
                key = tuple(st[k] for k in keep)
                merged[key] = merged.get(key, 0) + wt
            new = merged
            active = [active[k] for k in keep]
        if len(new) > state_guard:
            raise GuardExceeded(f"transfer state space reached {len(new)} states")
        states = new
    return Fraction(sum(states.values()), D**n_ext)


def factor_cylinder_measure(code: FinitaryCode, p: Marginal, yhat: np.ndarray | Any,
                            method: str = "transfer") -> Fraction:
    """``nu([yhat])``: probability that the factor matches ``yhat`` at every non-``STAR`` window site."""
    _require_exact(p)
    code = _require_block_code(code)
    code.check_domain(p)
    values = getattr(yhat, "values", yhat)
    values = np.asarray(values, dtype=np.int64)
    if values.ndim != code.d:
        raise PreconditionError(f"pattern rank {values.ndim} differs from code dimension {code.d}")
    if method == "enumerate":
        return _factor_measure_enumerate(code, p, values)
    if method == "transfer":
        return _factor_measure_transfer(code, p, values)
    raise PreconditionError(f"unknown method {method!r}")


@dataclass
class Lemma2Report:
    configs: int
    violations: int
    min_slack: Fraction
    argmin_config: list[int]
    equalities: int = 0

    def to_dict(self) -> dict:
        return {
            "configs": self.configs,
            "violations": self.violations,
            "min_slack": {"num": self.min_slack.numerator, "den": self.min_slack.denominator},
            "argmin_config": self.argmin_config,
            "equalities": self.equalities,
        }

    def merge(self, other: Lemma2Report) -> Lemma2Report:
        """Combine reports of disjoint enumeration ranges; ties keep the earlier arg-min."""
        best = self if self.min_slack <= other.min_slack else other
        return Lemma2Report(
            self.configs + other.configs,
            self.violations + other.violations,
            best.min_slack,
            best.argmin_config,
            self.equalities + other.equalities,
        )


def verify_lemma2(code: FinitaryCode, p: Marginal, N: int, n: int, d: int | None = None,
                  start: int = 0, stop: int | None = None, method: str = "transfer") -> Lemma2Report:
    """Check ``mu([x]) <= nu([phi^n(x)])`` for every ``x`` on ``T_N^d``.

    Configurations are enumerated row-major with the first site most
    significant; ``start``/``stop`` restrict to a range of that order so
    that disjoint ranges can be checked independently and merged.
    """
    _require_exact(p)
    _require_block_code(code)
    code.check_domain(p)
    d = code.d if d is None else d
    geom = TorusGeometry(d, N)
    total = p.size**geom.size
    if total > ENUMERATION_GUARD:
        raise GuardExceeded(f"{total} torus configurations exceed the guard {ENUMERATION_GUARD}")
    stop = total if stop is None else min(stop, total)
    cache: dict[bytes, Fraction] = {}
    digits = p.size ** np.arange(geom.size - 1, -1, -1, dtype=np.int64)
    violations = equalities = 0
    min_slack: Fraction | None = None
    argmin: list[int] = []
    for index in range(start, stop):
        flat = (index // digits) % p.size
        xhat = TorusConfig(geom, flat.reshape(geom.shape))
        mu = domain_cylinder_measure(p, xhat)
        yhat = model_apply(code, n, xhat).values
        key = yhat.tobytes()
        if key not in cache:
            cache[key] = factor_cylinder_measure(code, p, yhat, method)
        slack = cache[key] - mu
        if slack < 0:
            violations += 1
        elif slack == 0:
            equalities += 1
        if min_slack is None or slack < min_slack:
            min_slack, argmin = slack, flat.tolist()
    return Lemma2Report(stop - start, violations, min_slack if min_slack is not None else Fraction(0),
                        argmin, equalities)
