from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from finitary.errors import DimensionMismatch, InsufficientWindow, PreconditionError
from finitary.lattice import Box, TorusGeometry
from finitary.process import (
    LazyField,
    Marginal,
    PeriodicConfig,
    Window,
    child_seeds,
    draw_symbols,
    entropy,
    info_moment,
    info_variance,
    information,
    permutation_equivalent,
    sample_window,
)

DYADIC = ["1/2", "1/8", "1/8", "1/8", "1/8"]


def b2(probs):
    return Marginal.from_probs(probs, "base2")


def test_entropy_examples():
    assert entropy(b2(["1/2", "1/2"])) == 1.0
    assert entropy(Marginal.uniform(4, "base2")) == 2.0
    assert entropy(b2(DYADIC)) == pytest.approx(2.0, abs=1e-15)
    assert entropy(Marginal.from_probs([1])) == 0.0


def test_information_examples():
    fair = b2(["1/2", "1/2"])
    assert information(fair, 0) == 1.0
    dy = b2(DYADIC)
    assert information(dy, 0) == 1.0
    assert information(dy, 1) == 3.0
    with pytest.raises(PreconditionError):
        information(dy, "missing")


def test_info_moment_examples():
    assert info_moment(Marginal.uniform(4, "base2"), 3) == 8.0
    assert info_moment(b2(DYADIC), 2) == pytest.approx(5.0, abs=1e-12)
    with pytest.raises(PreconditionError):
        info_moment(b2(DYADIC), 0)


def test_info_variance_examples():
    for m in (1, 2, 3, 7):
        assert info_variance(Marginal.uniform(m)) == 0.0
    assert info_variance(b2(DYADIC)) == pytest.approx(1.0, abs=1e-12)


def test_permutation_equivalent_examples():
    p = Marginal.from_probs([0.5, 0.3, 0.2])
    q = Marginal.from_probs([0.2, 0.5, 0.3])
    assert permutation_equivalent(p, q, 0)
    assert not permutation_equivalent(b2(DYADIC), Marginal.uniform(4), 0.1)
    assert permutation_equivalent(p, p, 0)
    with pytest.raises(PreconditionError):
        permutation_equivalent(p, q, -1)


def test_marginal_validation():
    with pytest.raises(PreconditionError):
        Marginal.from_probs(["1/2", "1/3"])
    with pytest.raises(PreconditionError):
        Marginal.from_probs([1.0, 0.0])
    with pytest.raises(PreconditionError):
        Marginal((0, 0), ("1/2", "1/2"))
    with pytest.raises(PreconditionError):
        Marginal.from_probs([0.5, 0.5], "base10")
    assert Marginal.from_probs([0.5, 0.5 + 1e-13]).size == 2


def test_marginal_json_roundtrip():
    p = Marginal(("a", "b"), ("1/3", "2/3"), "base2")
    q = Marginal.from_json(p.to_json())
    assert q == p and q.probs == (Fraction(1, 3), Fraction(2, 3))


probs_strategy = st.lists(st.integers(1, 20), min_size=1, max_size=6).map(
    lambda w: Marginal.from_probs([Fraction(x, sum(w)) for x in w]))


@given(probs_strategy)
def test_variance_nonnegative_zero_iff_uniform(p):
    v = info_variance(p)
    assert v >= 0
    if p.is_uniform:
        assert v == 0
    else:
        assert v > 1e-12


@given(probs_strategy)
def test_first_moment_is_entropy(p):
    assert info_moment(p, 1) == entropy(p)


@given(probs_strategy, st.integers(1, 5))
def test_base_change_scaling(p, k):
    nat, bits = p.with_base("natural"), p.with_base("base2")
    assert entropy(bits) == pytest.approx(entropy(nat) / math.log(2), rel=1e-12, abs=1e-12)
    assert info_moment(bits, k) == pytest.approx(info_moment(nat, k) / math.log(2) ** k, rel=1e-12, abs=1e-12)


@given(probs_strategy, st.randoms(use_true_random=False))
def test_permutation_equivalence_relabeling(p, rnd):
    perm = list(range(p.size))
    rnd.shuffle(perm)
    q = Marginal(tuple(f"s{i}" for i in range(p.size)), tuple(p.probs[i] for i in perm))
    assert permutation_equivalent(p, q, 0) and permutation_equivalent(q, p, 0)


def test_sample_window_point_mass_and_determinism():
    pm = Marginal.from_probs([1])
    w = sample_window(pm, Box((0, 0), 4), seed=1)
    assert (w.values == 0).all()
    p = Marginal.from_probs(["1/2", "1/4", "1/4"])
    a = sample_window(p, TorusGeometry(2, 8), seed=3)
    b = sample_window(p, TorusGeometry(2, 8), seed=3)
    assert np.array_equal(a.values, b.values)


def test_sample_window_frequency():
    w = sample_window(Marginal.uniform(2), Box((0,), 10**6), seed=11)
    assert abs((w.values == 0).mean() - 0.5) <= 0.002


def test_draw_symbols_nonuniform_frequencies():
    p = Marginal.from_probs(DYADIC)
    x = draw_symbols(p, (200_000,), np.random.default_rng(0))
    freq = np.bincount(x, minlength=5) / x.size
    se = np.sqrt(p.float_probs * (1 - p.float_probs) / x.size)
    assert np.all(np.abs(freq - p.float_probs) <= 4 * se)


def test_child_seeds_independent_and_reproducible():
    a = [np.random.default_rng(s).integers(0, 2**32) for s in child_seeds(5, 3)]
    b = [np.random.default_rng(s).integers(0, 2**32) for s in child_seeds(5, 3)]
    assert a == b and len(set(a)) == 3


def test_window_patch_and_errors():
    w = Window(np.arange(10), (-5,))
    assert list(w.patch((0,), 2)) == [3, 4, 5, 6, 7]
    with pytest.raises(InsufficientWindow):
        w.patch((3,), 2)
    with pytest.raises(DimensionMismatch):
        w.patch((0, 0), 1)


def test_periodic_config_wraps():
    c = PeriodicConfig(np.array([0, 1, 2, 3]))
    assert list(c.patch((0,), 2)) == [2, 3, 0, 1, 2]


def test_lazy_field_consistent_growth():
    f = LazyField(Marginal.uniform(4), np.random.default_rng(0), 1)
    small = f.patch((0,), 3).copy()
    big = f.patch((0,), 100)
    assert np.array_equal(big[97:104], small)
    assert np.array_equal(f.patch((50,), 2), big[148:153])


def test_lazy_field_keeps_known_block():
    known = np.array([[1, 2], [3, 0]])
    f = LazyField(Marginal.uniform(4), np.random.default_rng(0), 2, known=known, known_lo=(5, 7))
    f.patch((0, 0), 10)
    assert np.array_equal(f.patch((5, 7), 0), [[1]])
    assert f[(6, 8)] == 0 and f[(5, 8)] == 2
