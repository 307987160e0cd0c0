from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finitary.codes import (
    STAR,
    BlockCode,
    MeshalkinCode,
    coding_radius,
    code_from_spec,
    load_code,
    make_builtin,
    phi_n_site,
)
from finitary.errors import InsufficientWindow, PreconditionError
from finitary.process import LazyField, Marginal, PeriodicConfig, Window, permutation_equivalent
from oracles import dyck_partner_distance, meshalkin_survival


def window(vals, center=None):
    vals = np.asarray(vals)
    c = len(vals) // 2 if center is None else center
    return Window(vals, (-c,))


def test_identity_radius_zero():
    code = make_builtin("identity")
    x = window([1, 0, 1])
    assert coding_radius(code, x, 1).value == 0
    assert phi_n_site(code, x, 0, (1,)) == 1
    assert code.constant_radius == 0


def test_xor_window_radius_one():
    code = make_builtin("xor_window", {"r": 1})
    x = window([1, 0, 1, 1, 0])
    assert coding_radius(code, x, 2).value == 1
    assert phi_n_site(code, window([1, 0, 1]), 1, (0,)) == 0
    assert phi_n_site(code, window([1, 0, 1]), 0, (0,)) == STAR


def test_coding_radius_insufficient_window():
    with pytest.raises(InsufficientWindow):
        coding_radius(make_builtin("xor3"), window([0, 1, 0]), 2)


def test_meshalkin_open_site_radius_zero():
    code = MeshalkinCode()
    for a in (0, 1):
        res = coding_radius(code, window([3, 3, a, 2, 2]), 2)
        assert res.value == 0 and res.output == 0


def test_meshalkin_far_partner_is_star():
    # open at -5, then (open close) twice, then the close at 0: partner distance 5
    vals = [1, 0, 2, 0, 2, 3, 3, 3, 3, 3, 3]
    x = Window(np.array(vals), (-5,))
    assert coding_radius(code := MeshalkinCode(), x, 5).value == 5
    assert phi_n_site(code, x, 2, (0,)) == STAR
    # open partner has second bit 1, the close has second bit 1: c11
    assert phi_n_site(code, x, 5, (0,)) == 4
    assert code.range_symbols[4] == "c11"


def test_make_builtin_errors():
    with pytest.raises(PreconditionError):
        make_builtin("permutation", {"table": [0, 0]})
    with pytest.raises(PreconditionError):
        make_builtin("nonexistent")
    with pytest.raises(PreconditionError):
        make_builtin("meshalkin", {"d": 2})


def test_permutation_marginal():
    code = make_builtin("permutation", {"table": [2, 0, 1]})
    p = Marginal.from_probs(["1/2", "1/3", "1/6"])
    q = code.range_marginal(p)
    assert permutation_equivalent(p, q, 0)
    assert code.constant_radius == 0


def test_meshalkin_range_marginal_exact():
    q = MeshalkinCode().range_marginal(Marginal.uniform(4))
    assert [str(x) for x in q.probs] == ["1/2", "1/8", "1/8", "1/8", "1/8"]


def test_xor_range_marginal_uniform():
    q = make_builtin("xor_window", {"r": 2, "d": 2}).range_marginal(Marginal.uniform(2))
    assert [str(x) for x in q.probs] == ["1/2", "1/2"]
    # biased bits: parity of 3 bits each 1 w.p. 1/4
    q = make_builtin("xor3").range_marginal(Marginal.from_probs(["3/4", "1/4"]))
    assert q.probs[1] == Fraction(7, 16)


def test_code_spec_roundtrip_and_loading(tmp_path):
    for name, params in [("identity", {}), ("xor_window", {"r": 2}), ("meshalkin", {}),
                         ("permutation", {"table": [1, 0]}),
                         ("synthetic_radius", {"law": "power", "exponent": 0.5})]:
        code = make_builtin(name, params)
        again = code_from_spec(code.to_spec())
        assert again.to_spec() == code.to_spec()
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"name": "xor_window", "params": {"r": 1}}))
    assert load_code(str(path)).name == "xor_window"
    assert load_code('{"name": "identity"}').name == "identity"
    assert load_code("swap").name == "permutation"


def test_truth_table_code():
    # radius-1 majority over bits, given as a truth table
    table = [int(bin(i).count("1") >= 2) for i in range(8)]
    code = load_code(json.dumps({"name": "table", "params": {"radius": 1, "table": table, "domain_size": 2,
                                                             "range": [0, 1]}}))
    assert isinstance(code, BlockCode)
    assert phi_n_site(code, window([1, 1, 0]), 1, (0,)) == 1
    assert phi_n_site(code, window([1, 0, 0]), 1, (0,)) == 0


CODES = [
    make_builtin("identity"),
    make_builtin("swap"),
    make_builtin("xor3"),
    make_builtin("xor_window", {"r": 1, "d": 2}),
    MeshalkinCode(),
    make_builtin("synthetic_radius", {"law": "geometric"}),
]


@pytest.mark.parametrize("code", CODES, ids=lambda c: c.name + str(c.d))
def test_progressiveness(code):
    rng = np.random.default_rng(1)
    cap = 40
    for _ in range(1000 if code.d == 1 else 200):
        f = LazyField(code.default_marginal(), rng, code.d)
        res = code.evaluate(f, (0,) * code.d, cap)
        if res.censored:
            continue
        for extra in (1, 2):
            out = code.rule(f.patch((0,) * code.d, res.value + extra))
            assert out == res.output
        if res.value > 0:
            assert code.rule(f.patch((0,) * code.d, res.value - 1)) is None


@pytest.mark.parametrize("code", CODES, ids=lambda c: c.name + str(c.d))
def test_fast_evaluate_matches_generic_rule(code):
    rng = np.random.default_rng(2)
    for _ in range(300):
        f = LazyField(code.default_marginal(), rng, code.d)
        cap = int(rng.integers(0, 300 if code.d == 1 else 4))
        fast = code.evaluate(f, (0,) * code.d, cap)
        slow = type(code).__mro__[-2].evaluate(code, f, (0,) * code.d, cap)
        assert fast == slow


@pytest.mark.parametrize("code", CODES, ids=lambda c: c.name + str(c.d))
def test_vectorized_torus_matches_site_loop(code):
    from finitary.codes import FinitaryCode

    rng = np.random.default_rng(3)
    N = 9 if code.d == 1 else 5
    for n in range(0, (N - 1) // 2 + 1):
        vals = rng.integers(0, code.domain_size, size=(N,) * code.d)
        assert np.array_equal(code.apply_torus(vals, n), FinitaryCode.apply_torus(code, vals, n))


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=60))
def test_meshalkin_against_stack_oracle(vals):
    code = MeshalkinCode()
    center = len(vals) - 1
    # right padding only makes the window symmetric; the rule never reads it
    x = Window(np.array(vals + [3] * center), (-center,))
    res = code.evaluate(x, (0,), center)
    expected = dyck_partner_distance(vals, center)
    assert res.value == expected
    if expected:
        partner = vals[center - expected]
        assert res.output == 1 + 2 * (partner % 2) + vals[center] % 2


def test_truncation_matches_radius():
    code = MeshalkinCode()
    rng = np.random.default_rng(4)
    for _ in range(500):
        f = LazyField(Marginal.uniform(4), rng, 1)
        res = code.evaluate(f, (0,), 200)
        if res.censored:
            continue
        for n in (res.value, res.value + 3):
            assert phi_n_site(code, f, n, (0,)) == res.output
        if res.value:
            assert phi_n_site(code, f, res.value - 1, (0,)) == STAR


def test_meshalkin_pushforward():
    code = MeshalkinCode()
    rng = np.random.default_rng(5)
    counts = np.zeros(5)
    n = 100_000
    seen = 0
    for _ in range(n):
        res = code.evaluate(LazyField(Marginal.uniform(4), rng, 1), (0,), 2**12)
        if not res.censored:
            counts[res.output] += 1
            seen += 1
    q = np.array([0.5, 0.125, 0.125, 0.125, 0.125])
    freq = counts / seen
    assert np.all(np.abs(freq - q) <= 3 * np.sqrt(q * (1 - q) / seen) + 2e-3)


def test_meshalkin_survival_oracle_matches_first_passage():
    # P[R > 1] = P(close) * P(first step is a close) = 1/4
    assert meshalkin_survival(0) == 0.5
    assert meshalkin_survival(1) == 0.25
    assert meshalkin_survival(2) == 0.25


def test_synthetic_exact_survival():
    g = make_builtin("synthetic_radius", {"law": "geometric", "ratio": 0.5})
    assert [g.exact_survival(n) for n in range(4)] == [1, 0.5, 0.25, 0.125]
    pw = make_builtin("synthetic_radius", {"law": "power", "exponent": 0.5})
    for n in (1, 4, 16, 100):
        assert float(pw.exact_survival(n)) == pytest.approx(n**-0.5, rel=1e-3)


def test_periodic_evaluation_agrees_with_window():
    code = make_builtin("xor3")
    vals = np.array([1, 0, 0, 0, 0, 0])
    x = PeriodicConfig(vals)
    assert [phi_n_site(code, x, 1, (u,)) for u in range(6)] == [1, 1, 0, 0, 0, 1]
