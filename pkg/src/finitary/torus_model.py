"""Torus modeling of a finitary code, defect sets and Monte Carlo couplings."""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Hashable, Iterable, Sequence

import numpy as np

from finitary._mc import run_blocks
from finitary.codes import DEFAULT_CAP, STAR, FinitaryCode
from finitary.errors import DimensionMismatch, PreconditionError
from finitary.lattice import Box, Site, TorusGeometry, box_neighborhood, lift_in_box, place_window, torus_project
from finitary.process import LazyField, Marginal, draw_symbols, make_rng

STAR_TOKEN = "*"


@dataclass
class TorusConfig:
    """A domain configuration on ``T_N^d``; ``values`` holds symbol indices."""

    geom: TorusGeometry
    values: np.ndarray
    alphabet: tuple[Hashable, ...] | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.int64)
        if self.values.shape != self.geom.shape:
            raise DimensionMismatch(f"values of shape {self.values.shape} do not fill {self.geom}")
        if self.alphabet is not None:
            self.alphabet = tuple(self.alphabet)
            if self.values.size and (self.values.min() < 0 or self.values.max() >= len(self.alphabet)):
                raise PreconditionError("configuration holds symbols outside its alphabet")

    @classmethod
    def from_sequence(cls, seq: Sequence[int], d: int = 1, alphabet=None) -> TorusConfig:
        seq = np.asarray(seq, dtype=np.int64)
        N = round(seq.size ** (1.0 / d))
        geom = TorusGeometry(d, N)
        return cls(geom, seq.reshape(geom.shape), alphabet)

    def shifted(self, u: Sequence[int]) -> TorusConfig:
        """The translate ``T_{-u}``: new value at ``v`` is the old value at ``v + u``."""
        axes = tuple(range(self.geom.d))
        return TorusConfig(self.geom, np.roll(self.values, tuple(-c for c in u), axis=axes), self.alphabet)

    def dumps(self) -> str:
        alphabet = self.alphabet if self.alphabet is not None else tuple(range(int(self.values.max()) + 1))
        header = {"d": self.geom.d, "N": self.geom.N, "alphabet": list(alphabet)}
        body = " ".join(json.dumps(alphabet[v]) for v in self.values.ravel())
        return json.dumps(header) + "\n" + body + "\n"

    @classmethod
    def loads(cls, text: str) -> TorusConfig:
        head, _, body = text.partition("\n")
        header = json.loads(head)
        alphabet = tuple(header["alphabet"])
        index = {s: i for i, s in enumerate(alphabet)}
        geom = TorusGeometry(int(header["d"]), int(header["N"]))
        tokens = [json.loads(t) for t in body.split()]
        if len(tokens) != geom.size:
            raise PreconditionError(f"expected {geom.size} symbols, found {len(tokens)}")
        try:
            values = np.array([index[t] for t in tokens], dtype=np.int64).reshape(geom.shape)
        except KeyError as exc:
            raise PreconditionError(f"symbol {exc} not in alphabet") from None
        return cls(geom, values, alphabet)


@dataclass
class ModelOutput:
    """Image of a torus configuration under the truncated code; ``STAR`` marks defects."""

    geom: TorusGeometry
    values: np.ndarray
    alphabet: tuple[Hashable, ...] = ()

    @property
    def defect_mask(self) -> np.ndarray:
        return self.values == STAR

    @property
    def defects(self) -> set[Site]:
        return {tuple(int(c) for c in idx) for idx in np.argwhere(self.defect_mask)}

    def dumps(self) -> str:
        header = {"d": self.geom.d, "N": self.geom.N, "alphabet": list(self.alphabet), "star": STAR_TOKEN}
        body = " ".join(STAR_TOKEN if v == STAR else json.dumps(self.alphabet[v]) for v in self.values.ravel())
        return json.dumps(header) + "\n" + body + "\n"


def model_apply(code: FinitaryCode, n: int, xhat: TorusConfig) -> ModelOutput:
    """The ``(T_N^d, n)``-model: the truncated code at every site of the periodized ``xhat``."""
    geom = xhat.geom
    if n < 0:
        raise PreconditionError("truncation depth must be nonnegative")
    if geom.N < 2 * n + 1:
        raise PreconditionError(f"torus side N = {geom.N} must be at least 2n+1 = {2 * n + 1}")
    if geom.d != code.d:
        raise DimensionMismatch(f"code acts on Z^{code.d}, torus has dimension {geom.d}")
    return ModelOutput(geom, code.apply_torus(xhat.values, n), code.range_symbols)


def defect_count(out: ModelOutput) -> int:
    return int(np.count_nonzero(out.defect_mask))


def _defect_block(code: FinitaryCode, p: Marginal, geom: TorusGeometry, n: int,
                  count: int, seed: np.random.SeedSequence) -> np.ndarray:
    rng = make_rng(seed)
    fractions = np.empty(count)
    for i in range(count):
        xhat = TorusConfig(geom, draw_symbols(p, geom.shape, rng))
        fractions[i] = defect_count(model_apply(code, n, xhat)) / geom.size
    return fractions


def sample_defect_fractions(code: FinitaryCode, p: Marginal, geom: TorusGeometry, n: int,
                            samples: int, seed: Any = 0, workers: int = 1) -> np.ndarray:
    """Per-sample defect fraction ``|J^c| / N^d`` over independent torus configurations."""
    code.check_domain(p)
    if geom.N < 2 * n + 1:
        raise PreconditionError(f"torus side N = {geom.N} must be at least 2n+1 = {2 * n + 1}")
    func = functools.partial(_defect_block, code, p, geom, n)
    return np.concatenate(run_blocks(func, samples, seed, workers) or [np.empty(0)])


@dataclass
class CoupledSample:
    """One draw from the coupling of the torus model with the true factor on ``S``.

    ``model[i]`` is the truncated-model output at ``sites[i]`` (``STAR`` for a
    defect); ``factor[i]`` the untruncated factor value at the corresponding
    lifted site, or ``STAR`` when it stayed unresolved up to the cap
    (``censored[i]`` is then set).
    """

    sites: list[Site]
    lifted: list[Site]
    corner: Site
    model: np.ndarray
    factor: np.ndarray
    censored: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def disagreements(self) -> np.ndarray:
        return (self.model != self.factor) & ~self.censored

    @property
    def contract_holds(self) -> bool:
        """Disagreement happens exactly on defect sites (censored sites excluded)."""
        ok = ~self.censored
        return bool(np.array_equal(self.disagreements[ok], (self.model == STAR)[ok]))


def check_placement(S: Iterable[Sequence[int]], geom: TorusGeometry, n: int, corner: Sequence[int]) -> list[Site]:
    """Return the lifts of ``S`` into ``corner + [1, N]^d``; raise unless ``B(lifts, n)`` fits inside."""
    box = Box(tuple(corner), geom.N)
    lifted = [lift_in_box(torus_project(s, geom), box, geom.N) for s in S]
    if not all(t in box for t in box_neighborhood(lifted, n)):
        raise PreconditionError(f"B(S, {n}) does not fit inside {tuple(corner)} + [1, {geom.N}]^{geom.d}")
    return lifted


def coupled_sample(code: FinitaryCode, n: int, geom: TorusGeometry, S: Sequence[Sequence[int]],
                   p: Marginal, seed: Any = None, cap: int = DEFAULT_CAP,
                   corner: Sequence[int] | None = None) -> CoupledSample:
    """Joint draw of the model output and the factor on ``S``.

    ``x`` is drawn on the box ``corner + [1, N]^d``; the model reads its
    periodization, the factor reads ``x`` extended i.i.d. outside the box
    until the untruncated rule resolves (or ``cap`` is reached).
    """
    code.check_domain(p)
    if geom.N < 2 * n + 1:
        raise PreconditionError(f"torus side N = {geom.N} must be at least 2n+1 = {2 * n + 1}")
    sites = [torus_project(s, geom) for s in S]
    if not sites:
        raise PreconditionError("S must be nonempty")
    if corner is None:
        corner = place_window(sites, geom, n)
    corner = tuple(corner)
    lifted = check_placement(sites, geom, n, corner)
    rng = make_rng(seed)
    box = Box(corner, geom.N)
    x = draw_symbols(p, geom.shape, rng)
    # torus value at residue r sits at box position (r - corner - 1) mod N
    roll = tuple(c + 1 for c in corner)
    xhat = np.roll(x, roll, axis=tuple(range(geom.d)))
    yhat = model_apply(code, n, TorusConfig(geom, xhat)).values
    model = np.array([yhat[s] for s in sites], dtype=np.int64)
    field_ = LazyField(p, rng, geom.d, known=x, known_lo=box.lo)
    factor = np.empty(len(sites), dtype=np.int64)
    censored = np.zeros(len(sites), dtype=bool)
    for i, t in enumerate(lifted):
        res = code.evaluate(field_, t, cap)
        if res.censored:
            factor[i] = STAR
            censored[i] = True
        else:
            factor[i] = res.output
    return CoupledSample(sites, lifted, corner, model, factor, censored)
