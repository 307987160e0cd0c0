"""Estimators and diagnostic reports built on the torus model.

Covers coding-radius tails (empirical survival, weighted log-log or log-linear
fits, moment partial sums), the normalized positive-part information sums,
Hölder/triangle checks on empirical norms, moment-matching tables and the
verdict records for the two moment theorems.
"""

from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from finitary._mc import run_blocks
from finitary.codes import DEFAULT_CAP, STAR, FinitaryCode
from finitary.errors import InsufficientSupport, PreconditionError
from finitary.lattice import TorusGeometry, lift_window
from finitary.process import (
    LazyField,
    Marginal,
    draw_symbols,
    entropy,
    info_moment,
    info_variance,
    make_rng,
    permutation_equivalent,
)
from finitary.torus_model import (
    TorusConfig,
    coupled_sample,
    model_apply,
    sample_defect_fractions,
)

PLATEAU_GROWTH = 0.01
MATERIAL_CENSORING = 0.01


# ---------------------------------------------------------------- tails

@dataclass
class TailCurve:
    """Empirical law of the coding radius, censored at ``cap``.

    ``radius_counts[n]`` is the number of samples with radius exactly ``n``;
    ``censored`` counts samples still unresolved at ``cap``.
    """

    cap: int
    radius_counts: np.ndarray
    censored: int
    total: int

    def __post_init__(self) -> None:
        self.radius_counts = np.asarray(self.radius_counts, dtype=np.int64)
        if self.radius_counts.shape != (self.cap + 1,):
            raise PreconditionError("radius_counts must have cap + 1 entries")
        if int(self.radius_counts.sum()) + self.censored != self.total:
            raise PreconditionError("counts do not add up to total")

    @classmethod
    def from_survival(cls, survival: Sequence[float], total: int = 2**40) -> TailCurve:
        """Curve whose survival counts are ``round(total * survival[n])``; for testing fits."""
        s = np.asarray(survival, dtype=float)
        counts_gt = np.rint(total * s).astype(np.int64)
        cap = s.size - 1
        at = np.empty(cap + 1, dtype=np.int64)
        at[0] = total - counts_gt[0]
        at[1:] = counts_gt[:-1] - counts_gt[1:]
        return cls(cap, at, int(counts_gt[-1]), total)

    def merge(self, other: TailCurve) -> TailCurve:
        if other.cap != self.cap:
            raise PreconditionError("cannot merge curves with different caps")
        return TailCurve(self.cap, self.radius_counts + other.radius_counts,
                         self.censored + other.censored, self.total + other.total)

    def survival_counts(self) -> np.ndarray:
        """Number of samples with ``R > n`` for ``n = 0..cap`` (censored samples included)."""
        tail = np.cumsum(self.radius_counts[::-1])[::-1]
        return np.concatenate([tail[1:], [0]]) + self.censored

    def survival(self) -> np.ndarray:
        return self.survival_counts() / self.total

    def survival_at(self, n: int) -> float:
        return float(self.survival()[n])

    def survival_std_error(self, n: int) -> float:
        s = self.survival_at(n)
        return math.sqrt(s * (1 - s) / self.total)

    @property
    def censored_fraction(self) -> float:
        return self.censored / self.total

    def csv_rows(self) -> list[tuple[int, float]]:
        """``(n, survival)`` up to the first ``n`` where the survival reaches its final value."""
        s = self.survival()
        nz = np.flatnonzero(self.radius_counts)
        last = min(self.cap, (int(nz[-1]) + 1) if nz.size else 0)
        return [(n, float(s[n])) for n in range(last + 1)]

    def to_dict(self) -> dict:
        return {"cap": self.cap, "censored": self.censored, "total": self.total,
                "censored_fraction": self.censored_fraction}


def _tail_block(code: FinitaryCode, p: Marginal, cap: int, count: int, seed) -> TailCurve:
    rng = make_rng(seed)
    counts = np.zeros(cap + 1, dtype=np.int64)
    censored = 0
    origin = (0,) * code.d
    for _ in range(count):
        res = code.evaluate(LazyField(p, rng, code.d), origin, cap)
        if res.censored:
            censored += 1
        else:
            counts[res.value] += 1
    return TailCurve(cap, counts, censored, count)


def estimate_tail(code: FinitaryCode, p: Marginal | None = None, samples: int = 10_000,
                  cap: int = DEFAULT_CAP, seed: Any = 0, workers: int = 1) -> TailCurve:
    """Empirical survival of the coding radius at the origin over i.i.d. inputs."""
    if samples < 1:
        raise PreconditionError("need at least one sample")
    p = code.default_marginal() if p is None else p
    code.check_domain(p)
    parts = run_blocks(functools.partial(_tail_block, code, p, cap), samples, seed, workers)
    return functools.reduce(TailCurve.merge, parts)


@dataclass
class TailFit:
    family: str
    exponent_or_rate: float
    fit_window: tuple[int, int]
    residual: float
    intercept: float = 0.0
    points: int = 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["fit_window"] = list(self.fit_window)
        return out


def default_fit_window(cap: int) -> tuple[int, int]:
    return max(1, cap // 32), max(2, cap // 2)


def _wls_line(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[float, float, float]:
    W = w.sum()
    xm = (w * x).sum() / W
    ym = (w * y).sum() / W
    sxx = (w * (x - xm) ** 2).sum()
    if sxx == 0:
        raise InsufficientSupport("fit window has no spread")
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    resid = math.sqrt((w * (y - intercept - slope * x) ** 2).sum() / W)
    return slope, intercept, resid


def fit_tail(curve: TailCurve, family: str = "power", fit_window: Sequence[int] | None = None) -> TailFit:
    """Weighted least squares of log-survival against ``log n`` (power) or ``n`` (exponential).

    Weights are the survival counts, i.e. the inverse of the approximate
    variance of each log-survival point.
    """
    if family not in ("power", "exponential"):
        raise PreconditionError(f"unknown tail family {family!r}")
    lo, hi = default_fit_window(curve.cap) if fit_window is None else (int(fit_window[0]), int(fit_window[1]))
    if family == "power":
        lo = max(lo, 1)
    hi = min(hi, curve.cap)
    if lo >= hi:
        raise InsufficientSupport(f"empty fit window [{lo}, {hi}]")
    n = np.arange(lo, hi + 1)
    counts = curve.survival_counts()[lo: hi + 1].astype(float)
    keep = counts > 0
    if keep.sum() < 3:
        raise InsufficientSupport(f"fewer than 3 nonzero survival points in [{lo}, {hi}]")
    n, counts = n[keep], counts[keep]
    y = np.log(counts / curve.total)
    x = np.log(n) if family == "power" else n.astype(float)
    slope, intercept, resid = _wls_line(x, y, counts)
    if slope >= 0:
        raise InsufficientSupport("survival does not decay over the fit window")
    return TailFit(family, float(-slope), (lo, hi), float(resid), float(intercept), int(keep.sum()))


@dataclass
class TailClass:
    label: str  # "exponential" or "power"
    rate: float  # exponential rate (inf for bounded radii) or power exponent
    reason: str
    fits: dict = field(default_factory=dict)

    @property
    def is_exponential(self) -> bool:
        return self.label == "exponential"

    def to_dict(self) -> dict:
        return {"label": self.label, "rate": self.rate if math.isfinite(self.rate) else "inf",
                "reason": self.reason, "fits": self.fits}


def classify_tail(curve: TailCurve, fit_window: Sequence[int] | None = None) -> TailClass:
    """Decide between exponential and power-law decay of the radius tail.

    A curve whose survival vanishes before the cap, with nothing censored,
    has bounded observed radii and is classified exponential (rate ``inf``
    when it vanishes at once). Otherwise the family with the smaller
    weighted residual wins.
    """
    s = curve.survival_counts()
    if curve.censored == 0:
        zero = np.flatnonzero(s == 0)
        last = int(zero[0]) if zero.size else curve.cap
        if last < 3:
            return TailClass("exponential", math.inf, f"radius bounded by {last}")
        if fit_window is None and last <= curve.cap // 2:
            fit_window = (1, last)
    fits = {}
    for family in ("exponential", "power"):
        try:
            fits[family] = fit_tail(curve, family, fit_window)
        except InsufficientSupport:
            pass
    if not fits:
        if curve.censored == 0:
            return TailClass("exponential", math.inf, "too few nonzero tail points; radius effectively bounded")
        raise InsufficientSupport("cannot classify tail: no family could be fitted")
    best = min(fits.values(), key=lambda f: f.residual)
    return TailClass(best.family, best.exponent_or_rate, "smaller weighted residual",
                     {k: v.to_dict() for k, v in fits.items()})


@dataclass
class MomentEstimate:
    alpha: float
    estimate: float
    std_error: float
    partial_sum: float
    last_octave_growth: float
    censored_fraction: float
    censoring_material: bool
    status: str  # converged | divergence-suspected | inconclusive

    @property
    def divergence_suspected(self) -> bool:
        return self.status == "divergence-suspected"

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict:
        return asdict(self)


def moment_partial_sums(curve: TailCurve, alpha: float) -> np.ndarray:
    """``sum_{j=1}^{n} j^(alpha-1) P[R > j]`` for ``n = 1..cap``."""
    n = np.arange(1, curve.cap + 1, dtype=float)
    return np.cumsum(n ** (alpha - 1) * curve.survival()[1:])


def moment_estimate(curve: TailCurve, alpha: float) -> MomentEstimate:
    """Empirical ``E[R^alpha]`` with a convergence diagnostic.

    Censored samples enter at the cap, so the estimate is a lower bound when
    censoring occurs. The partial sums are declared convergent if they grow
    by less than 1% over the last octave ``(cap/2, cap]``; otherwise the
    estimate is flagged divergence-suspected when the censored mass, valued
    at ``cap**alpha``, is at least 1% of the estimate.
    """
    if alpha <= 0:
        raise PreconditionError("alpha must be positive")
    n = np.arange(curve.cap + 1, dtype=float)
    powers = n**alpha
    cap_term = float(curve.cap) ** alpha
    first = (curve.radius_counts * powers).sum() + curve.censored * cap_term
    second = (curve.radius_counts * powers**2).sum() + curve.censored * cap_term**2
    est = first / curve.total
    var = max(second / curve.total - est**2, 0.0)
    se = math.sqrt(var / curve.total)
    if curve.cap >= 2:
        sums = moment_partial_sums(curve, alpha)
        total_sum = float(sums[-1])
        half = float(sums[curve.cap // 2 - 1])
        growth = (total_sum - half) / total_sum if total_sum > 0 else 0.0
    else:
        total_sum, growth = 0.0, 0.0
    cens = curve.censored_fraction
    material = curve.censored > 0 and cens * cap_term >= MATERIAL_CENSORING * max(est, 1e-300)
    if growth < PLATEAU_GROWTH:
        status = "converged"
    elif material:
        status = "divergence-suspected"
    else:
        status = "inconclusive"
    return MomentEstimate(alpha, float(est), se, total_sum, growth, cens, bool(material), status)


# ------------------------------------------------------ torus statistics

@dataclass
class StatReport:
    estimate: float
    std_error: float
    n_samples: int
    parameters: dict
    extra: dict = field(default_factory=dict)
    values: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "std_error": self.std_error, "n_samples": self.n_samples,
                "parameters": self.parameters, "extra": self.extra}


def _domain_pp_block(p: Marginal, sites: int, count: int, seed) -> np.ndarray:
    rng = make_rng(seed)
    centered = p.centered_info()
    if not centered.any():
        return np.zeros(count)
    # only the symbol counts of the torus enter the sum
    counts = rng.multinomial(sites, p.float_probs, size=count)
    return np.maximum(counts @ centered / math.sqrt(sites), 0.0)


def _range_pp_block(code: FinitaryCode, p: Marginal, q: Marginal, geom: TorusGeometry, n: int,
                    count: int, seed) -> np.ndarray:
    rng = make_rng(seed)
    h = entropy(p)
    # h + log q(b) per range symbol
    terms = np.zeros(q.size) if (q.is_uniform and p.is_uniform and p.size == q.size) else h - q.info_values()
    out = np.empty(count)
    for i in range(count):
        y = model_apply(code, n, TorusConfig(geom, draw_symbols(p, geom.shape, rng))).values
        valid = y[y != STAR]
        out[i] = max(terms[valid].sum() / math.sqrt(geom.size), 0.0)
    return out


def positive_part_statistic(side: str, p: Marginal, N: int, reps: int, seed: Any = 0,
                            code: FinitaryCode | None = None, n: int = 0, d: int = 1,
                            q: Marginal | None = None, workers: int = 1) -> StatReport:
    """Mean of ``[ |T|^{-1/2} sum_u (h + log p(X_u)) ]^+`` over torus draws.

    ``side="range"`` replaces the domain sum by the sum of
    ``h + log q(Y_u)`` over the non-defect sites of the torus model of
    ``code``. The Gaussian limit ``sigma / sqrt(2 pi)`` is reported
    alongside, with ``sigma`` the standard deviation of the information
    function; ``variance / sqrt(2 pi)`` is reported as an alternative
    reading.
    """
    if side not in ("domain", "range"):
        raise PreconditionError("side must be 'domain' or 'range'")
    if reps < 1:
        raise PreconditionError("need at least one repetition")
    if side == "domain":
        geom = TorusGeometry(d, N)
        func = functools.partial(_domain_pp_block, p, geom.size)
        law = p
    else:
        if code is None:
            raise PreconditionError("the range-side statistic needs a code")
        code.check_domain(p)
        geom = TorusGeometry(code.d, N)
        if N < 2 * n + 1:
            raise PreconditionError(f"torus side N = {N} must be at least 2n+1 = {2 * n + 1}")
        q = code.range_marginal(p) if q is None else q
        if q is None:
            raise PreconditionError(f"range marginal of {code.name} is unknown; pass q explicitly")
        func = functools.partial(_range_pp_block, code, p, q, geom, n)
        law = q
    samples = np.concatenate(run_blocks(func, reps, seed, workers))
    var = info_variance(law)
    sigma = math.sqrt(var)
    params = {"side": side, "N": N, "d": geom.d, "n": n, "log_base": p.log_base}
    if code is not None:
        params["code"] = code.to_spec()
    return StatReport(
        float(samples.mean()),
        float(samples.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
        reps,
        params,
        {
            "target_sigma_reading": sigma / math.sqrt(2 * math.pi),
            "target_variance_reading": var / math.sqrt(2 * math.pi),
            "info_std": sigma,
            "info_variance": var,
        },
        samples,
    )


def defect_rate_report(code: FinitaryCode, p: Marginal, N: int, n: int, samples: int,
                       seed: Any = 0, cap: int = DEFAULT_CAP, workers: int = 1) -> dict:
    """Compare the mean per-site defect fraction with an independent estimate of ``P[R > n]``."""
    geom = TorusGeometry(code.d, N)
    ss = np.random.SeedSequence(seed)
    torus_seed, tail_seed = ss.spawn(2)
    fractions = sample_defect_fractions(code, p, geom, n, samples, torus_seed, workers)
    curve = estimate_tail(code, p, samples, max(cap, n + 1), tail_seed, workers)
    mean = float(fractions.mean())
    se_torus = float(fractions.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    tail = curve.survival_at(n)
    se_tail = curve.survival_std_error(n)
    combined = math.hypot(se_torus, se_tail)
    diff = mean - tail
    return {
        "N": N, "n": n, "d": code.d, "samples": samples,
        "mean_defect_fraction": mean, "defect_fraction_se": se_torus,
        "mean_defect_count": mean * geom.size,
        "tail_estimate": tail, "tail_se": se_tail,
        "difference": diff, "combined_se": combined,
        "z": diff / combined if combined > 0 else 0.0,
        "tail_censored": curve.censored,
    }


def _coupling_block(code: FinitaryCode, p: Marginal, n: int, k_values: tuple[int, ...], cap: int,
                    count: int, seed) -> dict:
    rng = make_rng(seed)
    stats = {"samples": 0, "sites": 0, "censored": 0, "disagreements": 0, "defects": 0,
             "contract_failures": 0}
    for i in range(count):
        k = k_values[i % len(k_values)]
        m = max(n, 2 * k + 1)
        geom = TorusGeometry(code.d, 2 * (k + 1) * m)
        S = {tuple(int(c) for c in rng.integers(0, geom.N, size=code.d)) for _ in range(k)}
        corner = lift_window(S, geom, m, k)
        cs = coupled_sample(code, n, geom, sorted(S), p, rng, cap, corner)
        ok = ~cs.censored
        stats["samples"] += 1
        stats["sites"] += len(cs.sites)
        stats["censored"] += int(cs.censored.sum())
        stats["disagreements"] += int(cs.disagreements.sum())
        stats["defects"] += int((cs.model[ok] == STAR).sum())
        stats["contract_failures"] += 0 if cs.contract_holds else 1
    return stats


def coupling_report(code: FinitaryCode, p: Marginal, n: int, samples: int,
                    k_values: Sequence[int] = (1, 2, 3, 4), seed: Any = 0,
                    cap: int = DEFAULT_CAP, workers: int = 1) -> dict:
    """Monte Carlo check that model and factor disagree exactly on defect sites.

    Sample ``i`` draws ``k = k_values[i mod len]`` random torus sites, places
    them with :func:`finitary.lattice.lift_window` (``m = max(n, 2k+1)``,
    ``N = 2(k+1)m``) and draws one coupled sample.
    """
    code.check_domain(p)
    func = functools.partial(_coupling_block, code, p, n, tuple(k_values), cap)
    parts = run_blocks(func, samples, seed, workers)
    out = {key: sum(part[key] for part in parts) for key in parts[0]}
    resolved = out["sites"] - out["censored"]
    out.update({
        "n": n, "k_values": list(k_values), "cap": cap,
        "censored_fraction": out["censored"] / out["sites"],
        "disagreement_rate": out["disagreements"] / resolved if resolved else 0.0,
        "contract_holds": out["contract_failures"] == 0,
    })
    return out


def log_measure_gaps(code: FinitaryCode, p: Marginal, N: int, n: int, samples: int,
                     seed: Any = 0, q: Marginal | None = None) -> dict:
    """Per-sample ``sum_u I_p(x_u) - sum_{u: y_u in B} I_q(y_u)`` on random torus draws.

    With rational marginals the sign is also decided exactly by comparing
    ``prod p(x_u)`` against ``prod q(y_u)``.
    """
    code.check_domain(p)
    q = code.range_marginal(p) if q is None else q
    if q is None:
        raise PreconditionError(f"range marginal of {code.name} is unknown; pass q explicitly")
    geom = TorusGeometry(code.d, N)
    rng = make_rng(seed)
    ip, iq = p.info_values(), q.info_values()
    gaps = np.empty(samples)
    exact_failures = 0
    exact = p.is_exact and q.is_exact
    for i in range(samples):
        x = draw_symbols(p, geom.shape, rng)
        y = model_apply(code, n, TorusConfig(geom, x)).values
        valid = y[y != STAR]
        gaps[i] = ip[x].sum() - iq[valid].sum()
        if exact:
            cx = np.bincount(x.ravel(), minlength=p.size)
            cy = np.bincount(valid, minlength=q.size)
            lhs = math.prod(p.probs[a] ** int(c) for a, c in enumerate(cx))
            rhs = math.prod(q.probs[b] ** int(c) for b, c in enumerate(cy))
            exact_failures += lhs > rhs
    return {
        "samples": samples, "N": N, "n": n,
        "min_gap": float(gaps.min()), "mean_gap": float(gaps.mean()),
        "float_failures": int((gaps < -1e-9 * geom.size).sum()),
        "exact_checked": exact, "exact_failures": int(exact_failures),
        "gaps": gaps,
    }


# ------------------------------------------------------- norm inequalities

@dataclass
class HolderReport:
    k: int
    N: float | None
    norm_diff_k: float
    holder_bound: float
    norm_f1_k: float
    norm_f2_k: float
    gap_kk: float
    bound_12: float
    bound_21: float
    holder_holds: bool
    triangle_holds: bool
    power_gap_holds: bool

    @property
    def all_hold(self) -> bool:
        return self.holder_holds and self.triangle_holds and self.power_gap_holds

    def to_dict(self) -> dict:
        out = asdict(self)
        out["all_hold"] = self.all_hold
        return out


def _norm(v: np.ndarray, k: float) -> float:
    return float(np.mean(np.abs(v) ** k) ** (1.0 / k))


def holder_chain_check(f1: Sequence[float], f2: Sequence[float], k: int, N: float | None = None,
                       rtol: float = 1e-9) -> HolderReport:
    """Check the norm chain on the empirical (uniform) law of paired samples.

    (i)   ``||f1-f2||_k <= ||(f1-f2)^(k-1)||_inf^(1/k) ||f1-f2||_1^(1/k)``;
    (ii)  ``||f1||_k <= ||f1-f2||_k + ||f2||_k``;
    (iii) ``||f1||_k^k - ||f2||_k^k <= (||f1-f2||_k + ||f2||_k)^k - ||f2||_k^k``
          and the same with ``f1``, ``f2`` swapped.
    ``rtol`` absorbs floating-point rounding only.
    """
    a = np.asarray(f1, dtype=float)
    b = np.asarray(f2, dtype=float)
    if a.shape != b.shape:
        raise PreconditionError("sample vectors differ in length")
    if a.size == 0:
        raise PreconditionError("sample vectors are empty")
    if k < 1:
        raise PreconditionError("k must be a positive integer")
    g = a - b
    ng = _norm(g, k)
    sup = float(np.max(np.abs(g) ** (k - 1)))
    holder = sup ** (1.0 / k) * _norm(g, 1) ** (1.0 / k)
    n1, n2 = _norm(a, k), _norm(b, k)
    gap = n1**k - n2**k
    b12 = (ng + n2) ** k - n2**k
    b21 = (ng + n1) ** k - n1**k

    def le(x: float, y: float) -> bool:
        return x <= y + rtol * max(1.0, abs(x), abs(y))

    return HolderReport(
        k, N, ng, holder, n1, n2, gap, b12, b21,
        holder_holds=le(ng, holder),
        triangle_holds=le(n1, ng + n2) and le(n2, ng + n1),
        power_gap_holds=le(gap, b12) and le(-gap, b21),
    )


# ---------------------------------------------------------- moment tables

def _empirical_marginal(code: FinitaryCode, p: Marginal, samples: int, cap: int, rng) -> Marginal:
    counts = np.zeros(len(code.range_symbols), dtype=np.int64)
    origin = (0,) * code.d
    for _ in range(samples):
        res = code.evaluate(LazyField(p, rng, code.d), origin, cap)
        if not res.censored:
            counts[res.output] += 1
    keep = counts > 0
    if not keep.any():
        raise PreconditionError("no resolved samples to estimate the range marginal")
    symbols = tuple(s for s, k in zip(code.range_symbols, keep) if k)
    probs = counts[keep] / counts[keep].sum()
    return Marginal(symbols, tuple(probs.tolist()), p.log_base)


def _torus_power_block(code: FinitaryCode, p: Marginal, q: Marginal, q_index: np.ndarray,
                       geom: TorusGeometry, n: int, K: int, count: int, seed) -> np.ndarray:
    rng = make_rng(seed)
    ip, iq = p.info_values(), q.info_values()
    out = np.empty((count, 2))
    for i in range(count):
        x = draw_symbols(p, geom.shape, rng)
        y = model_apply(code, n, TorusConfig(geom, x)).values
        valid = y[y != STAR]
        out[i, 0] = ip[x].sum()
        out[i, 1] = iq[q_index[valid]].sum()
    return out


def moment_match_report(code: FinitaryCode, p: Marginal, K: int, N: int, n: int, reps: int = 0,
                        seed: Any = 0, q: Marginal | None = None, q_samples: int = 10_000,
                        cap: int = DEFAULT_CAP, base_tol: float = 1e-9, workers: int = 1) -> dict:
    """Information-moment gaps ``E[I_p^k] - E[I_q^k]`` for ``k = 1..K``.

    Exact (closed-form) when the range marginal is known, plug-in Monte Carlo
    otherwise. With ``reps > 0`` the torus-side quantities
    ``|T|^{-1} E[(sum_u I_p(X_u))^k]`` and
    ``|T|^{-1} E[(sum_{u: Y_u in B} I_q(Y_u))^k]`` are estimated from paired
    draws of the ``(T_N^d, n)``-model.
    """
    if K < 1:
        raise PreconditionError("K must be >= 1")
    code.check_domain(p)
    exact = q is None and code.range_marginal(p) is not None
    ss = np.random.SeedSequence(seed)
    q_seed, torus_seed = ss.spawn(2)
    if q is None:
        q = code.range_marginal(p)
    if q is None:
        if q_samples < 1:
            raise PreconditionError("range marginal unknown and no samples requested")
        q = _empirical_marginal(code, p, q_samples, cap, make_rng(q_seed))
    rows = []
    for k in range(1, K + 1):
        mp, mq = info_moment(p, k), info_moment(q, k)
        tol = math.factorial(k) * base_tol
        rows.append({"k": k, "moment_p": mp, "moment_q": mq, "delta": mp - mq,
                     "tol": tol, "matches": abs(mp - mq) <= tol})
    report = {
        "K": K, "N": N, "n": n, "log_base": p.log_base, "exact_marginals": exact,
        "rows": rows, "all_match": all(r["matches"] for r in rows),
    }
    if reps > 0:
        geom = TorusGeometry(code.d, N)
        if N < 2 * n + 1:
            raise PreconditionError(f"torus side N = {N} must be at least 2n+1 = {2 * n + 1}")
        q_index = np.array([q._index.get(s, 0) for s in code.range_symbols], dtype=np.int64)
        func = functools.partial(_torus_power_block, code, p, q, q_index, geom, n, K)
        sums = np.concatenate(run_blocks(func, reps, torus_seed, workers))
        torus_rows = []
        for k in range(1, K + 1):
            lhs_s = sums[:, 0] ** k / geom.size
            rhs_s = sums[:, 1] ** k / geom.size
            diff = lhs_s - rhs_s
            torus_rows.append({
                "k": k, "domain_side": float(lhs_s.mean()), "range_side": float(rhs_s.mean()),
                "gap": float(diff.mean()),
                "gap_se": float(diff.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
            })
        report["torus"] = {"reps": reps, "rows": torus_rows}
    return report


# ------------------------------------------------------------- verdicts

def theorem1_report(code: FinitaryCode | None, p: Marginal, tail_fit: TailFit | None = None,
                    d: int | None = None, q: Marginal | None = None, var_tol: float = 1e-9,
                    entropy_tol: float = 1e-9, exponent_tol: float = 0.1) -> dict:
    """Informational-variance obstruction for equal-entropy factors.

    If the variances of the two information functions differ, no such factor
    can have a finite ``d/2``-moment of its coding radius; a fitted power
    tail with exponent at most ``d/2`` (plus ``exponent_tol`` for fit noise)
    is then consistent, while a lighter fitted tail is flagged.
    """
    if q is None:
        if code is None:
            raise PreconditionError("need a code or an explicit range marginal")
        q = code.range_marginal(p)
        if q is None:
            raise PreconditionError(f"range marginal of {code.name} is unknown; pass q explicitly")
    if d is None:
        d = code.d if code is not None else 1
    hp, hq = entropy(p), entropy(q.with_base(p.log_base))
    vp, vq = info_variance(p), info_variance(q.with_base(p.log_base))
    gap = abs(vp - vq)
    critical = d / 2
    record = {
        "log_base": p.log_base,
        "units": {"entropy": "bits" if p.log_base == "base2" else "nats",
                  "variance": "bits^2" if p.log_base == "base2" else "nats^2"},
        "entropy_p": hp, "entropy_q": hq,
        "var_p": vp, "var_q": vq, "variance_gap": gap,
        "critical_moment": critical, "d": d,
        "entropy_mismatch": abs(hp - hq) > entropy_tol,
    }
    if tail_fit is not None:
        record["tail_fit"] = tail_fit.to_dict()
    if record["entropy_mismatch"]:
        record["verdict"] = "theorem not applicable: entropy mismatch"
        return record
    if gap <= var_tol:
        record["verdict"] = "no obstruction"
        return record
    verdict = "finite d/2-moment impossible"
    if tail_fit is not None:
        if tail_fit.family == "power" and tail_fit.exponent_or_rate <= critical + exponent_tol:
            verdict += "; observed tails consistent"
        else:
            verdict += "; observed tails inconsistent"
    record["verdict"] = verdict
    return record


def theorem2_report(code: FinitaryCode, p: Marginal, K: int = 5, tol: float = 1e-9,
                    curve: TailCurve | None = None, tail_class: TailClass | None = None,
                    q: Marginal | None = None, samples: int = 10_000, cap: int = DEFAULT_CAP,
                    seed: Any = 0, fit_window: Sequence[int] | None = None) -> dict:
    """Exponential tails plus equal entropy force permutation-equivalent marginals."""
    code.check_domain(p)
    if tail_class is None:
        if curve is None:
            curve = estimate_tail(code, p, samples, cap, seed)
        tail_class = classify_tail(curve, fit_window)
    mm = moment_match_report(code, p, K, N=1, n=0, q=q, base_tol=tol, seed=seed, cap=cap)
    q = code.range_marginal(p) if q is None else q
    perm = permutation_equivalent(p, q, tol) if q is not None else False
    hp = entropy(p)
    hq = entropy(q) if q is not None else float("nan")
    record = {
        "log_base": p.log_base,
        "tail": tail_class.to_dict(),
        "exponential_tail": tail_class.is_exponential,
        "deltas": [r["delta"] for r in mm["rows"]],
        "moments_match": mm["all_match"],
        "permutation_equivalent": perm,
        "entropy_p": hp, "entropy_q": hq,
    }
    if not abs(hp - hq) <= tol:
        record["verdict"] = "hypothesis not met: unequal entropy"
        record["failed_hypothesis"] = "equal entropy"
    elif not tail_class.is_exponential:
        record["verdict"] = "hypothesis not met; no constraint"
        record["failed_hypothesis"] = "exponential tail"
    elif perm:
        record["verdict"] = "consistent"
    else:
        record["verdict"] = "inconsistent"
        record["detail"] = ("moments agree up to K but marginals differ"
                            if mm["all_match"] else "moments differ despite exponential tails")
    return record


__all__ = [
    "HolderReport", "MomentEstimate", "StatReport", "TailClass", "TailCurve", "TailFit",
    "classify_tail", "coupling_report", "defect_rate_report", "estimate_tail", "fit_tail",
    "holder_chain_check", "log_measure_gaps", "moment_estimate", "moment_match_report",
    "positive_part_statistic", "theorem1_report", "theorem2_report",
]
