"""Bell quantities, classical bounds by strategy enumeration, and count-based estimators.

The CHSH functional uses +/-1 outcomes; the detection-aware variant uses {0, 1}
outcomes where a lost particle and a "-1" both count as 0, so the strategy
space for either game is the same 2^4 = 16 deterministic assignments.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .counts import CountsTable

GAME_CHSH = "chsh"
GAME_EBERHARD = "eberhard"
CHSH_PAIRS = ((1, 3), (1, 4), (2, 3), (2, 4))
# sign of each correlator's contribution to the CHSH combination
CHSH_SIGNS = {(1, 3): 1.0, (1, 4): 1.0, (2, 3): 1.0, (2, 4): -1.0}


class InsufficientDataError(ValueError):
    """A required setting pair has no recorded trials."""


@dataclass(frozen=True)
class ChshInput:
    """The four correlators <A_i B_j> keyed by setting pair (i, j)."""

    correlators: Mapping[tuple[int, int], float]

    def __post_init__(self):
        corr = {(int(i), int(j)): float(v) for (i, j), v in self.correlators.items()}
        for pair in CHSH_PAIRS:
            if pair not in corr:
                raise ValueError(f"missing correlator for setting pair {pair}")
            if not -1.0 <= corr[pair] <= 1.0:
                raise ValueError(f"correlator {corr[pair]} at {pair} outside [-1, 1]")
        object.__setattr__(self, "correlators", corr)


@dataclass(frozen=True)
class EberhardInput:
    """The four joint detection probabilities entering the detection-aware bound.

    p11_13 = p(1_1, 1_3), p10_14 = p(1_1, 0_4), p01_23 = p(0_2, 1_3),
    p11_24 = p(1_2, 1_4).
    """

    p11_13: float
    p10_14: float
    p01_23: float
    p11_24: float

    def __post_init__(self):
        for name in ("p11_13", "p10_14", "p01_23", "p11_24"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class DeterministicStrategy:
    """Local assignment of outcomes to every setting: a1, a2 for A and b3, b4 for B."""

    a1: int
    a2: int
    b3: int
    b4: int
    outcome_set: tuple[int, ...] = (-1, 1)

    def __post_init__(self):
        for name in ("a1", "a2", "b3", "b4"):
            if getattr(self, name) not in self.outcome_set:
                raise ValueError(f"{name}={getattr(self, name)} not in outcome set {self.outcome_set}")

    def a(self, setting: int) -> int:
        if setting not in (1, 2):
            raise ValueError(f"A setting must be 1 or 2, got {setting}")
        return self.a1 if setting == 1 else self.a2

    def b(self, setting: int) -> int:
        if setting not in (3, 4):
            raise ValueError(f"B setting must be 3 or 4, got {setting}")
        return self.b3 if setting == 3 else self.b4


def chsh_value(value_input: ChshInput) -> float:
    """Signed combination E13 + E14 + E23 - E24."""
    c = value_input.correlators
    return sum(CHSH_SIGNS[pair] * c[pair] for pair in CHSH_PAIRS)


def eberhard_value(value_input: EberhardInput) -> float:
    """Left-hand side p(1_1,1_3) - p(1_1,0_4) - p(0_2,1_3) - p(1_2,1_4)."""
    v = value_input
    return v.p11_13 - v.p10_14 - v.p01_23 - v.p11_24


def all_strategies(game: str) -> tuple[DeterministicStrategy, ...]:
    """All 16 deterministic strategies of the game's outcome set."""
    outcomes = (-1, 1) if game == GAME_CHSH else (0, 1)
    if game not in (GAME_CHSH, GAME_EBERHARD):
        raise ValueError(f"unknown game {game!r}")
    return tuple(
        DeterministicStrategy(a1, a2, b3, b4, outcomes)
        for a1, a2, b3, b4 in itertools.product(outcomes, repeat=4)
    )


def strategy_value(strategy: DeterministicStrategy, game: str) -> float:
    """The game functional evaluated at one deterministic strategy."""
    s = strategy
    if game == GAME_CHSH:
        return float(s.a1 * s.b3 + s.a1 * s.b4 + s.a2 * s.b3 - s.a2 * s.b4)
    if game == GAME_EBERHARD:
        return float(
            (s.a1 == 1 and s.b3 == 1)
            - (s.a1 == 1 and s.b4 == 0)
            - (s.a2 == 0 and s.b3 == 1)
            - (s.a2 == 1 and s.b4 == 1)
        )
    raise ValueError(f"unknown game {game!r}")


def lhv_bound(game: str) -> tuple[float, tuple[DeterministicStrategy, ...]]:
    """Exhaustive classical maximum of the game functional and its maximizers."""
    strategies = all_strategies(game)
    values = [strategy_value(s, game) for s in strategies]
    best = max(values)
    argmax = tuple(s for s, v in zip(strategies, values) if v == best)
    return best, argmax


def mixture_values(weights: Iterable[float], strategies: Iterable[DeterministicStrategy], game: str) -> float:
    """Game value of a convex mixture of deterministic strategies."""
    total = 0.0
    for w, s in zip(weights, strategies):
        total += w * strategy_value(s, game)
    return total


# ---------------------------------------------------------------------------
# plug-in estimation from counts


def _eberhard_bit(value: int) -> int:
    """Collapse a recorded outcome to the {0, 1} convention (-1 and 0 both map to 0)."""
    return 1 if value == 1 else 0


def _pair_counts(counts: CountsTable, pair: tuple[int, int]) -> tuple[int, int]:
    """(N_plus, N_minus) product counts for the AB pair at one setting pair.

    Accepts either +/-1 product keys or (a, b) joint-outcome keys; trials where
    either outcome is 0 carry no product sign and are skipped.
    """
    n_plus = n_minus = 0
    for outcome, n in counts.outcomes("AB", pair).items():
        if isinstance(outcome, tuple):
            a, b = outcome
            prod = a * b
        else:
            prod = outcome
        if prod == 1:
            n_plus += n
        elif prod == -1:
            n_minus += n
    return n_plus, n_minus


def correlator_estimates(counts: CountsTable) -> dict[tuple[int, int], tuple[float, float, int]]:
    """Per setting pair: (E_hat, standard error, events), E_hat = (N+ - N-)/(N+ + N-)."""
    out = {}
    for pair in counts.setting_pairs("AB"):
        n_plus, n_minus = _pair_counts(counts, pair)
        n = n_plus + n_minus
        if n == 0:
            continue
        e_hat = (n_plus - n_minus) / n
        se = math.sqrt(max(1.0 - e_hat * e_hat, 0.0) / n)
        out[pair] = (e_hat, se, n)
    return out


def _joint_prob_estimate(counts: CountsTable, pair: tuple[int, int],
                         bit_a: int, bit_b: int) -> tuple[float, float]:
    """(p_hat, se) of a joint {0,1} outcome cell from (a, b) joint counts."""
    cells = counts.outcomes("AB", pair)
    total = 0
    hits = 0
    for outcome, n in cells.items():
        if not isinstance(outcome, tuple):
            raise InsufficientDataError(
                f"setting pair {pair} has only product counts; joint (a, b) counts required"
            )
        total += n
        if (_eberhard_bit(outcome[0]), _eberhard_bit(outcome[1])) == (bit_a, bit_b):
            hits += n
    if total == 0:
        raise InsufficientDataError(f"no trials recorded for setting pair {pair}")
    p = hits / total
    return p, math.sqrt(p * (1.0 - p) / total)


def estimate_from_counts(counts: CountsTable, game: str) -> tuple[float, float]:
    """Plug-in estimate of the game value with its quadrature standard error."""
    if game == GAME_CHSH:
        ests = correlator_estimates(counts)
        value = 0.0
        var = 0.0
        for pair in CHSH_PAIRS:
            if pair not in ests:
                raise InsufficientDataError(f"no +/- events recorded for setting pair {pair}")
            e_hat, se, _ = ests[pair]
            value += CHSH_SIGNS[pair] * e_hat
            var += se * se
        return value, math.sqrt(var)
    if game == GAME_EBERHARD:
        cells = (((1, 3), 1, 1), ((1, 4), 1, 0), ((2, 3), 0, 1), ((2, 4), 1, 1))
        signs = (1.0, -1.0, -1.0, -1.0)
        value = 0.0
        var = 0.0
        for (pair, bit_a, bit_b), sign in zip(cells, signs):
            p, se = _joint_prob_estimate(counts, pair, bit_a, bit_b)
            value += sign * p
            var += se * se
        return value, math.sqrt(var)
    raise ValueError(f"unknown game {game!r}")
