import math

import numpy as np
import pytest

from belllab import lhv
from belllab.counts import CountsTable
from belllab.quantum import singlet_correlator

PAPER_ANGLES = (0.0, math.pi / 2, 5 * math.pi / 4, 3 * math.pi / 4)
SQRT2 = math.sqrt(2.0)


def paper_chsh_input():
    return lhv.ChshInput({
        (i, j): singlet_correlator(PAPER_ANGLES[i - 1], PAPER_ANGLES[j - 1])
        for i in (1, 2) for j in (3, 4)
    })


def paper_eberhard_input():
    def p11(i, j):
        return (1 - math.cos(PAPER_ANGLES[i - 1] - PAPER_ANGLES[j - 1])) / 4

    def p10(i, j):
        return (1 + math.cos(PAPER_ANGLES[i - 1] - PAPER_ANGLES[j - 1])) / 4

    return lhv.EberhardInput(p11_13=p11(1, 3), p10_14=p10(1, 4), p01_23=p10(2, 3), p11_24=p11(2, 4))


# ---------------------------------------------------------------------------
# functional values


def test_chsh_value_at_quantum_angles():
    assert lhv.chsh_value(paper_chsh_input()) == pytest.approx(2 * SQRT2, abs=1e-10)


def test_chsh_value_zero_and_boundary():
    zeros = lhv.ChshInput({pair: 0.0 for pair in lhv.CHSH_PAIRS})
    assert lhv.chsh_value(zeros) == 0.0
    ones = lhv.ChshInput({pair: 1.0 for pair in lhv.CHSH_PAIRS})
    assert lhv.chsh_value(ones) == 2.0


def test_chsh_input_validation():
    with pytest.raises(ValueError, match="missing"):
        lhv.ChshInput({(1, 3): 0.5})
    bad = {pair: 0.0 for pair in lhv.CHSH_PAIRS}
    bad[(2, 4)] = 1.5
    with pytest.raises(ValueError, match="outside"):
        lhv.ChshInput(bad)


def test_eberhard_value_at_quantum_angles():
    assert lhv.eberhard_value(paper_eberhard_input()) == pytest.approx(
        1 / SQRT2 - 0.5, abs=1e-10)


def test_eberhard_value_uniform_quarter():
    uniform = lhv.EberhardInput(0.25, 0.25, 0.25, 0.25)
    assert lhv.eberhard_value(uniform) == pytest.approx(-0.5, abs=1e-15)


def test_eberhard_closed_form_consistency_random_angles():
    # oracle: expand the singlet probabilities symbolically in terms of cosines
    rng = np.random.default_rng(3)
    for _ in range(50):
        phi = rng.uniform(-math.pi, math.pi, size=4)
        d = lambda i, j: phi[i - 1] - phi[j - 1]
        value = lhv.eberhard_value(lhv.EberhardInput(
            p11_13=(1 - math.cos(d(1, 3))) / 4,
            p10_14=(1 + math.cos(d(1, 4))) / 4,
            p01_23=(1 + math.cos(d(2, 3))) / 4,
            p11_24=(1 - math.cos(d(2, 4))) / 4,
        ))
        expected = (-math.cos(d(1, 3)) - math.cos(d(1, 4)) - math.cos(d(2, 3))
                    + math.cos(d(2, 4)) - 2) / 4
        assert value == pytest.approx(expected, abs=1e-12)


def test_eberhard_input_validation():
    with pytest.raises(ValueError, match="outside"):
        lhv.EberhardInput(1.2, 0.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# classical bounds by enumeration


def test_lhv_bound_chsh_is_two():
    bound, argmax = lhv.lhv_bound("chsh")
    assert bound == 2.0
    assert all(lhv.strategy_value(s, "chsh") == 2.0 for s in argmax)
    assert len(lhv.all_strategies("chsh")) == 16


def test_lhv_bound_eberhard_is_zero():
    bound, argmax = lhv.lhv_bound("eberhard")
    assert bound == 0.0
    assert argmax  # the bound is attained


def test_chsh_minimum_is_minus_two():
    values = [lhv.strategy_value(s, "chsh") for s in lhv.all_strategies("chsh")]
    assert min(values) == -2.0


def test_every_chsh_strategy_value_is_plus_or_minus_two():
    for s in lhv.all_strategies("chsh"):
        assert lhv.strategy_value(s, "chsh") in (-2.0, 2.0)


def test_random_mixtures_respect_classical_bounds():
    rng = np.random.default_rng(17)
    chsh_strats = lhv.all_strategies("chsh")
    eber_strats = lhv.all_strategies("eberhard")
    for _ in range(1000):
        w = rng.dirichlet(np.ones(16))
        assert abs(lhv.mixture_values(w, chsh_strats, "chsh")) <= 2.0 + 1e-12
        assert lhv.mixture_values(w, eber_strats, "eberhard") <= 0.0 + 1e-12


def test_quantum_point_exceeds_classical_bounds():
    assert lhv.chsh_value(paper_chsh_input()) > lhv.lhv_bound("chsh")[0]
    assert lhv.eberhard_value(paper_eberhard_input()) > lhv.lhv_bound("eberhard")[0]


def test_unknown_game_rejected():
    with pytest.raises(ValueError):
        lhv.lhv_bound("ghz")


def test_strategy_outcome_set_validation():
    with pytest.raises(ValueError):
        lhv.DeterministicStrategy(2, 1, 1, 1)
    s = lhv.DeterministicStrategy(1, -1, 1, -1)
    assert s.a(1) == 1 and s.a(2) == -1 and s.b(3) == 1 and s.b(4) == -1


# ---------------------------------------------------------------------------
# estimation from counts


def munich_style_counts():
    table = CountsTable(source="test")
    table.add("AB", (2, 3), 1, 251)
    table.add("AB", (2, 3), -1, 1012)
    table.add("AB", (2, 4), 1, 932)
    table.add("AB", (2, 4), -1, 242)
    return table


def test_correlator_estimates_from_published_counts():
    ests = lhv.correlator_estimates(munich_style_counts())
    e23, se23, n23 = ests[(2, 3)]
    # oracle: E = (N+ - N-)/(N+ + N-), se = sqrt((1 - E^2)/N), evaluated by hand
    assert n23 == 1263
    assert e23 == pytest.approx((251 - 1012) / 1263, abs=1e-12)
    assert e23 == pytest.approx(-0.6025, abs=5e-4)
    assert se23 == pytest.approx(math.sqrt((1 - e23 ** 2) / 1263), abs=1e-12)
    assert se23 == pytest.approx(0.0225, abs=5e-4)
    e24, se24, n24 = ests[(2, 4)]
    assert e24 == pytest.approx(690 / 1174, abs=1e-12)
    assert e24 == pytest.approx(0.5877, abs=5e-4)


def test_correlator_estimate_symmetric_counts_is_zero():
    table = CountsTable(source="test")
    table.add("AB", (1, 3), 1, 500)
    table.add("AB", (1, 3), -1, 500)
    e, se, n = lhv.correlator_estimates(table)[(1, 3)]
    assert e == 0.0
    assert se == pytest.approx(math.sqrt(1 / 1000), abs=1e-12)


def test_estimate_chsh_from_joint_tuple_counts():
    table = CountsTable(source="test")
    # deterministic strategy a=b=+1 at every pair: E = 1 everywhere, CHSH = 2
    for pair in lhv.CHSH_PAIRS:
        table.add("AB", pair, (1, 1), 100)
    value, se = lhv.estimate_from_counts(table, "chsh")
    assert value == pytest.approx(2.0, abs=1e-12)
    assert se == 0.0


def test_estimate_chsh_requires_every_pair():
    table = CountsTable(source="test")
    table.add("AB", (1, 3), 1, 10)
    with pytest.raises(lhv.InsufficientDataError):
        lhv.estimate_from_counts(table, "chsh")


def test_estimate_eberhard_from_joint_counts():
    table = CountsTable(source="test")
    n = 1000
    for pair in lhv.CHSH_PAIRS:
        d = PAPER_ANGLES[pair[0] - 1] - PAPER_ANGLES[pair[1] - 1]
        p_pp = (1 - math.cos(d)) / 4
        p_pm = (1 + math.cos(d)) / 4
        table.add("AB", pair, (1, 1), round(n * p_pp))
        table.add("AB", pair, (1, -1), round(n * p_pm))
        table.add("AB", pair, (-1, 1), round(n * p_pm))
        table.add("AB", pair, (-1, -1), round(n * p_pp))
    value, se = lhv.estimate_from_counts(table, "eberhard")
    assert value == pytest.approx(1 / SQRT2 - 0.5, abs=2e-3)
    assert se > 0


def test_estimate_eberhard_needs_joint_outcomes():
    table = CountsTable(source="test")
    for pair in lhv.CHSH_PAIRS:  # product counts only, no (a, b) cells
        table.add("AB", pair, 1, 40)
        table.add("AB", pair, -1, 60)
    with pytest.raises(lhv.InsufficientDataError, match="joint"):
        lhv.estimate_from_counts(table, "eberhard")
    with pytest.raises(lhv.InsufficientDataError, match="no trials"):
        lhv.estimate_from_counts(munich_style_counts(), "eberhard")


def test_estimate_ignores_no_detection_products():
    table = CountsTable(source="test")
    table.add("AB", (1, 3), (1, 1), 50)
    table.add("AB", (1, 3), (0, 1), 25)  # lost particle carries no product sign
    table.add("AB", (1, 3), (-1, -1), 50)
    e, se, n = lhv.correlator_estimates(table)[(1, 3)]
    assert n == 100
    assert e == pytest.approx(1.0, abs=1e-12)
