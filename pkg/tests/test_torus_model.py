from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finitary.codes import STAR, MeshalkinCode, make_builtin
from finitary.errors import DimensionMismatch, PreconditionError
from finitary.lattice import TorusGeometry, lift_window
from finitary.process import Marginal
from finitary.torus_model import (
    ModelOutput,
    TorusConfig,
    check_placement,
    coupled_sample,
    defect_count,
    model_apply,
    sample_defect_fractions,
)
from oracles import cyclic_xor3, meshalkin_survival


def test_identity_model_is_identity():
    x = TorusConfig(TorusGeometry(2, 5), np.random.default_rng(0).integers(0, 2, (5, 5)))
    y = model_apply(make_builtin("identity", {"d": 2}), 2, x)
    assert np.array_equal(y.values, x.values) and defect_count(y) == 0 and y.defects == set()


def test_xor3_hand_example():
    x = TorusConfig.from_sequence([1, 0, 0, 0, 0, 0])
    y = model_apply(make_builtin("xor3"), 1, x)
    assert y.values.tolist() == [1, 1, 0, 0, 0, 1] and y.defects == set()


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=3, max_size=20))
def test_xor3_matches_cyclic_oracle(x):
    y = model_apply(make_builtin("xor3"), 1, TorusConfig.from_sequence(x))
    assert y.values.tolist() == cyclic_xor3(x)


def test_model_preconditions():
    x = TorusConfig.from_sequence([0, 1, 0, 1])
    with pytest.raises(PreconditionError):
        model_apply(make_builtin("xor3"), 2, x)
    with pytest.raises(DimensionMismatch):
        model_apply(make_builtin("xor_window", {"d": 2}), 1, x)


def test_defect_count_all_star():
    g = TorusGeometry(2, 3)
    assert defect_count(ModelOutput(g, np.full(g.shape, STAR))) == 9
    y = model_apply(make_builtin("xor3"), 0, TorusConfig.from_sequence([0, 1, 0]))
    assert defect_count(y) == 3


def test_meshalkin_torus_defects_follow_partner_distance():
    # open(0) close close(3): site 2 matches 0 at distance 2; site 1 matches 0 at distance 1
    x = TorusConfig.from_sequence([0, 2, 3, 1, 1, 1, 1])
    y = model_apply(MeshalkinCode(), 1, x).values
    assert y[1] == 1 and y[2] == STAR
    y = model_apply(MeshalkinCode(), 2, x).values
    # site 1 pairs with 0 (distance 1) and site 2 then pairs with 6 across the wrap (distance 3)
    assert y[1] == 1 and y[2] == STAR
    y = model_apply(MeshalkinCode(), 3, x).values
    assert y[2] == 1 + 2 * 1 + 1


CODES = [make_builtin("xor3"), MeshalkinCode(), make_builtin("xor_window", {"r": 1, "d": 2}),
         make_builtin("swap")]


@pytest.mark.parametrize("code", CODES, ids=lambda c: f"{c.name}{c.d}")
def test_model_commutes_with_translation(code):
    rng = np.random.default_rng(7)
    N = 11 if code.d == 1 else 5
    g = TorusGeometry(code.d, N)
    for _ in range(30):
        x = TorusConfig(g, rng.integers(0, code.domain_size, g.shape))
        u = tuple(int(c) for c in rng.integers(-N, N, code.d))
        n = int(rng.integers(0, (N - 1) // 2 + 1))
        left = model_apply(code, n, x.shifted(u)).values
        right = TorusConfig(g, model_apply(code, n, x).values).shifted(u).values
        assert np.array_equal(left, right)


def test_torus_config_roundtrip():
    g = TorusGeometry(2, 3)
    x = TorusConfig(g, np.arange(9).reshape(3, 3) % 4, ("a", "b", "c", "d"))
    again = TorusConfig.loads(x.dumps())
    assert np.array_equal(again.values, x.values) and again.alphabet == x.alphabet
    with pytest.raises(PreconditionError):
        TorusConfig.loads('{"d": 1, "N": 3, "alphabet": [0, 1]}\n0 1\n')


def test_model_output_dump_marks_star():
    y = model_apply(MeshalkinCode(), 1, TorusConfig.from_sequence([2, 2, 2]))
    assert y.dumps().splitlines()[1] == "* * *"


def test_defect_rate_against_exact_tail():
    code = MeshalkinCode()
    frac = sample_defect_fractions(code, Marginal.uniform(4), TorusGeometry(1, 64), 8, 2000, seed=1)
    se = frac.std(ddof=1) / np.sqrt(frac.size)
    assert abs(frac.mean() - meshalkin_survival(8)) <= 3 * se


def test_defect_fractions_independent_of_workers():
    code = make_builtin("xor3")
    g = TorusGeometry(1, 9)
    a = sample_defect_fractions(code, Marginal.uniform(2), g, 0, 2500, seed=3, workers=1)
    b = sample_defect_fractions(code, Marginal.uniform(2), g, 0, 2500, seed=3, workers=2)
    assert np.array_equal(a, b)


def test_coupled_identity_always_agrees():
    g = TorusGeometry(1, 16)
    for seed in range(20):
        cs = coupled_sample(make_builtin("identity"), 3, g, [(5,), (1,)], Marginal.uniform(2), seed)
        assert np.array_equal(cs.model, cs.factor) and cs.contract_holds


@pytest.mark.parametrize("k", [1, 2, 3])
def test_coupling_contract_meshalkin(k):
    code = MeshalkinCode()
    rng = np.random.default_rng(k)
    n = 6
    m = max(n, 2 * k + 1)
    g = TorusGeometry(1, 2 * (k + 1) * m)
    for _ in range(300):
        S = {(int(rng.integers(0, g.N)),) for _ in range(k)}
        v = lift_window(S, g, m, k)
        cs = coupled_sample(code, n, g, sorted(S), Marginal.uniform(4), rng, 2**12, v)
        assert cs.contract_holds
        ok = ~cs.censored
        resolved = (cs.model != STAR) & ok
        assert np.array_equal(cs.model[resolved], cs.factor[resolved])


def test_coupling_disagreement_rate_matches_tail():
    code = MeshalkinCode()
    g = TorusGeometry(1, 64)
    rng = np.random.default_rng(9)
    hits = []
    for _ in range(4000):
        cs = coupled_sample(code, 8, g, [(0,)], Marginal.uniform(4), rng, 2**14)
        if not cs.censored[0]:
            hits.append(bool(cs.disagreements[0]))
    hits = np.array(hits)
    se = np.sqrt(meshalkin_survival(8) * (1 - meshalkin_survival(8)) / hits.size)
    assert abs(hits.mean() - meshalkin_survival(8)) <= 3 * se + 2e-3


def test_check_placement_rejects_overhang():
    g = TorusGeometry(1, 12)
    with pytest.raises(PreconditionError):
        check_placement([(0,)], g, 3, (0,))
    assert check_placement([(5,)], g, 3, (0,)) == [(5,)]
