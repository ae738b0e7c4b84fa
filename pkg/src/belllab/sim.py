"""Event-by-event trial generators and the clone-store-compare-exclude defense.

Three generators share one deterministic randomness contract: a PCG64 stream
is consumed as a fixed row of 10 uniforms per trial (slots below), so trial i
only ever touches draws [10*i, 10*i+10) and a parallel producer could reach
them with ``bit_generator.advance``. Identical configs therefore yield
byte-identical logs.

Uniform slots per trial:
  0 setting_a   1 setting_b   2 herald / strategy draw   3 joint outcome draw
  4 detection A 5 detection B 6 jitter A  7 jitter B  8 jitter C  9 tamper
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import quantum
from .eventlog import ClonedRecord, CopySnapshot, EventLog, LogMeta, TrialRecord, dict_hash
from .lhv import DeterministicStrategy, all_strategies
from .spacetime import LayoutConfig, default_chsh_layout, default_swapping_layout, layout_to_dict, spacelike_margin_delay, validate_layout

GENERATORS = ("quantum", "lhv", "hacked_lhv")
PAPER_ANGLES = (0.0, math.pi / 2, 5 * math.pi / 4, 3 * math.pi / 4)
SETTING_PAIRS = ((1, 3), (1, 4), (2, 3), (2, 4))
JOINT_OUTCOMES = ((1, 1), (1, -1), (-1, 1), (-1, -1))
_SLOTS = 10


class SimConfigError(ValueError):
    """A simulation config field is invalid; the message names the field."""


class SimRunError(RuntimeError):
    """The config is well-formed but the run is not allowed (e.g. bad layout)."""


@dataclass(frozen=True)
class TimingModel:
    """Nominal readout tags (ns); None means take them from the layout events."""

    tau_a_ns: int | None = None
    tau_b_ns: int | None = None
    tau_c_ns: int | None = None
    jitter_ns: int = 0
    store_latency_ns: int = 250

    def __post_init__(self):
        if self.jitter_ns < 0:
            raise SimConfigError("timing.jitter_ns must be >= 0")
        if self.store_latency_ns < 1:
            raise SimConfigError("timing.store_latency_ns must be >= 1")


@dataclass(frozen=True)
class HackerConfig:
    """Post-readout adversary: rewrite outcomes knowing the remote choice."""

    delay_ns: int
    tamper_fraction: float
    target_copies: tuple[str, ...] = ()
    allow_superluminal: bool = False

    def __post_init__(self):
        if not 0.0 <= self.tamper_fraction <= 1.0:
            raise SimConfigError("hacker.tamper_fraction must lie in [0, 1]")
        if self.delay_ns < 0:
            raise SimConfigError("hacker.delay_ns must be >= 0")
        object.__setattr__(self, "target_copies", tuple(self.target_copies))


@dataclass(frozen=True)
class SimConfig:
    generator: str
    n_trials: int
    seed: int
    angles: tuple[float, float, float, float] = PAPER_ANGLES
    efficiency: float | tuple[float, float] = 1.0
    swapping: bool = False
    layout: LayoutConfig | None = None
    timing: TimingModel = TimingModel()
    hacker: HackerConfig | None = None
    lhv_mixture: tuple[tuple[float, DeterministicStrategy], ...] | None = None

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise SimConfigError(f"generator must be one of {GENERATORS}, got {self.generator!r}")
        if self.n_trials < 1:
            raise SimConfigError("n_trials must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise SimConfigError("seed must be a 64-bit nonnegative integer")
        angles = tuple(float(a) for a in self.angles)
        if len(angles) != 4 or not all(math.isfinite(a) for a in angles):
            raise SimConfigError("angles must be four finite values (phi_1..phi_4)")
        eff = self.efficiency
        eff = (float(eff), float(eff)) if isinstance(eff, (int, float)) else tuple(float(e) for e in eff)
        if len(eff) != 2 or not all(0.0 <= e <= 1.0 for e in eff):
            raise SimConfigError("efficiency must be one value or (A, B) pair in [0, 1]")
        if self.generator == "hacked_lhv" and self.hacker is None:
            raise SimConfigError("hacker block is required when generator=hacked_lhv")
        if self.lhv_mixture is not None:
            mixture = tuple((float(w), s) for w, s in self.lhv_mixture)
            if not mixture:
                raise SimConfigError("lhv_mixture must not be empty")
            if any(w < 0 for w, _ in mixture):
                raise SimConfigError("lhv_mixture weights must be nonnegative")
            if abs(sum(w for w, _ in mixture) - 1.0) > 1e-9:
                raise SimConfigError("lhv_mixture weights must sum to 1")
            object.__setattr__(self, "lhv_mixture", mixture)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "efficiency", eff)

    def resolved_layout(self) -> LayoutConfig:
        if self.layout is not None:
            return self.layout
        return default_swapping_layout() if self.swapping else default_chsh_layout()

    def angle_for(self, setting: int) -> float:
        return self.angles[setting - 1]

    def to_dict(self) -> dict:
        """JSON-ready form covering every field; basis of the config hash."""
        mixture = None
        if self.lhv_mixture is not None:
            mixture = [
                {"weight": w, "a1": s.a1, "a2": s.a2, "b3": s.b3, "b4": s.b4}
                for w, s in self.lhv_mixture
            ]
        hacker = None
        if self.hacker is not None:
            hacker = {
                "delay_ns": self.hacker.delay_ns,
                "tamper_fraction": self.hacker.tamper_fraction,
                "target_copies": list(self.hacker.target_copies),
                "allow_superluminal": self.hacker.allow_superluminal,
            }
        return {
            "generator": self.generator,
            "n_trials": self.n_trials,
            "seed": self.seed,
            "angles": list(self.angles),
            "efficiency": list(self.efficiency),
            "swapping": self.swapping,
            "layout": layout_to_dict(self.resolved_layout()),
            "timing": {
                "tau_a_ns": self.timing.tau_a_ns,
                "tau_b_ns": self.timing.tau_b_ns,
                "tau_c_ns": self.timing.tau_c_ns,
                "jitter_ns": self.timing.jitter_ns,
                "store_latency_ns": self.timing.store_latency_ns,
            },
            "hacker": hacker,
            "lhv_mixture": mixture,
        }


def config_hash(config: SimConfig) -> str:
    return dict_hash(config.to_dict())


def _resolve_taus(config: SimConfig) -> tuple[int, int, int]:
    """Nominal readout tags in ns, falling back to the layout's readout events."""
    layout = config.resolved_layout()

    def from_layout(label: str, default: int) -> int:
        for e in layout.events:
            if e.label == label:
                return int(round(e.t * 1e9))
        return default

    t = config.timing
    tau_a = t.tau_a_ns if t.tau_a_ns is not None else from_layout("readout_A_done", 1500)
    tau_b = t.tau_b_ns if t.tau_b_ns is not None else from_layout("readout_B_done", 1500)
    tau_c = t.tau_c_ns if t.tau_c_ns is not None else from_layout("readout_C_done", 1000)
    return tau_a, tau_b, tau_c


def _require_valid_layout(config: SimConfig) -> None:
    report = validate_layout(config.resolved_layout())
    if not report.passed:
        bad = ", ".join(f"{a}<->{b}" for a, b in report.violated_pairs())
        raise SimRunError(f"layout is invalid: required pairs not spacelike: {bad}")


def minimum_hack_delay_ns(layout: LayoutConfig) -> int:
    """Smallest post-readout delay after which remote-choice info can have arrived."""
    worst = 0.0
    for label_a, label_b in layout.required_separations:
        worst = max(worst, spacelike_margin_delay(layout, label_a, label_b))
    return int(math.ceil(worst * 1e9))


def _uniforms(seed: int, n: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.random((n, _SLOTS))


def _quantum_pair_distributions(angles: Sequence[float]) -> dict[tuple[int, int], np.ndarray]:
    """Born joint-outcome distributions of the singlet per setting pair."""
    rho = quantum.bell_singlet().density()
    return {pair: _ab_distribution(rho, angles, pair) for pair in SETTING_PAIRS}


def _ab_distribution(rho: quantum.DensityMatrix, angles: Sequence[float],
                     pair: tuple[int, int]) -> np.ndarray:
    povm_a = quantum.phase_measurement(angles[pair[0] - 1])
    povm_b = quantum.phase_measurement(angles[pair[1] - 1])
    elements = []
    for (la, ka) in povm_a.elements:
        for (lb, kb) in povm_b.elements:
            elements.append(((la, lb), quantum.tensor(ka, kb)))
    joint = quantum.Povm(tuple(elements))
    assert joint.labels() == JOINT_OUTCOMES
    return quantum.born_probabilities(rho, joint)


def _swap_conditionals(angles: Sequence[float]) -> tuple[float, dict, dict]:
    """Heralding probability and per-pair AB distributions given C=1 / C=0."""
    psi = quantum.tensor(quantum.bell_singlet(), quantum.bell_singlet())  # (A, a, B, b)
    rho = psi.density()
    proj = quantum.embed_operator(quantum.swap_projector(), (1, 3), rho.dims)
    p_herald = float(np.trace(proj @ rho.matrix).real)
    heralded = quantum.DensityMatrix(proj @ rho.matrix @ proj / p_herald, rho.dims)
    anti_mat = rho.matrix - proj @ rho.matrix - rho.matrix @ proj + proj @ rho.matrix @ proj
    anti = quantum.DensityMatrix(anti_mat / (1.0 - p_herald), rho.dims)
    rho1 = quantum.partial_trace(heralded, (0, 2))
    rho0 = quantum.partial_trace(anti, (0, 2))
    dist1 = {pair: _ab_distribution(rho1, angles, pair) for pair in SETTING_PAIRS}
    dist0 = {pair: _ab_distribution(rho0, angles, pair) for pair in SETTING_PAIRS}
    return p_herald, dist1, dist0


def _sample_outcomes_by_pair(sa: np.ndarray, sb: np.ndarray, u: np.ndarray,
                             dists: dict[tuple[int, int], np.ndarray],
                             select: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized inverse-CDF joint draw matching born_sample's convention."""
    out_a = np.zeros(len(sa), dtype=np.int64)
    out_b = np.zeros(len(sb), dtype=np.int64)
    labels_a = np.array([o[0] for o in JOINT_OUTCOMES])
    labels_b = np.array([o[1] for o in JOINT_OUTCOMES])
    for pair, probs in dists.items():
        mask = (sa == pair[0]) & (sb == pair[1])
        if select is not None:
            mask &= select
        if not np.any(mask):
            continue
        cum = np.cumsum(probs)
        idx = np.searchsorted(cum, u[mask], side="right")
        if np.any(idx >= len(probs)):  # float dust at the top of the CDF
            live = np.nonzero(probs > 1e-14)[0]
            idx = np.where(idx >= len(probs), live[-1], idx)
        out_a[mask] = labels_a[idx]
        out_b[mask] = labels_b[idx]
    return out_a, out_b


def _apply_efficiency(outcomes: np.ndarray, u: np.ndarray, efficiency: float) -> np.ndarray:
    if efficiency >= 1.0:
        return outcomes
    return np.where(u < efficiency, outcomes, 0)


def _timetags(u: np.ndarray, tau_ns: int, jitter_ns: int) -> np.ndarray:
    tags = np.full(len(u), tau_ns, dtype=np.int64)
    if jitter_ns > 0:
        tags += np.floor(u * jitter_ns).astype(np.int64)
    return tags


def _assemble_records(n: int, sa, sb, oa, ob, ta, tb, oc=None, tc=None, tampered=None) -> list[TrialRecord]:
    oc_list = oc.tolist() if oc is not None else [None] * n
    tc_list = tc.tolist() if tc is not None else [None] * n
    tampered_list = tampered.tolist() if tampered is not None else [False] * n
    return [
        TrialRecord(i, sa_i, sb_i, oa_i, ob_i, ta_i, tb_i, oc_i, tc_i, tm_i)
        for i, (sa_i, sb_i, oa_i, ob_i, ta_i, tb_i, oc_i, tc_i, tm_i) in enumerate(
            zip(sa.tolist(), sb.tolist(), oa.tolist(), ob.tolist(),
                ta.tolist(), tb.tolist(), oc_list, tc_list, tampered_list)
        )
    ]


def _meta(config: SimConfig) -> LogMeta:
    return LogMeta(generator=config.generator, seed=config.seed,
                   config_hash=config_hash(config), n_trials=config.n_trials)


def run_quantum(config: SimConfig) -> EventLog:
    """Singlet-model generator; Born sampling per trial, settings uniform."""
    if config.generator != "quantum":
        raise SimConfigError(f"generator must be 'quantum', got {config.generator!r}")
    _require_valid_layout(config)
    n = config.n_trials
    u = _uniforms(config.seed, n)
    sa = np.where(u[:, 0] < 0.5, 1, 2)
    sb = np.where(u[:, 1] < 0.5, 3, 4)
    tau_a, tau_b, tau_c = _resolve_taus(config)
    jitter = config.timing.jitter_ns
    oc = tc = None
    if config.swapping:
        p_herald, dist1, dist0 = _swap_conditionals(config.angles)
        herald = (u[:, 2] < p_herald)
        oa, ob = _sample_outcomes_by_pair(sa, sb, u[:, 3], dist1, herald)
        oa0, ob0 = _sample_outcomes_by_pair(sa, sb, u[:, 3], dist0, ~herald)
        oa, ob = oa + oa0, ob + ob0
        oc = herald.astype(np.int64)
        tc = _timetags(u[:, 8], tau_c, jitter)
    else:
        dists = _quantum_pair_distributions(config.angles)
        oa, ob = _sample_outcomes_by_pair(sa, sb, u[:, 3], dists)
    ea, eb = config.efficiency
    oa = _apply_efficiency(oa, u[:, 4], ea)
    ob = _apply_efficiency(ob, u[:, 5], eb)
    ta = _timetags(u[:, 6], tau_a, jitter)
    tb = _timetags(u[:, 7], tau_b, jitter)
    records = _assemble_records(n, sa, sb, oa, ob, ta, tb, oc, tc)
    return EventLog(_meta(config), records)


def _resolve_mixture(config: SimConfig, strategy_mixture) -> tuple[np.ndarray, list[DeterministicStrategy]]:
    mixture = strategy_mixture if strategy_mixture is not None else config.lhv_mixture
    if mixture is None:
        strategies = list(all_strategies("chsh"))
        weights = np.full(len(strategies), 1.0 / len(strategies))
        return weights, strategies
    mixture = list(mixture)
    if not mixture:
        raise SimConfigError("lhv_mixture must not be empty")
    weights = np.array([float(w) for w, _ in mixture])
    if np.any(weights < 0) or abs(float(weights.sum()) - 1.0) > 1e-9:
        raise SimConfigError("lhv_mixture weights must be nonnegative and sum to 1")
    return weights, [s for _, s in mixture]


def _lhv_arrays(config: SimConfig, strategy_mixture):
    n = config.n_trials
    u = _uniforms(config.seed, n)
    sa = np.where(u[:, 0] < 0.5, 1, 2)
    sb = np.where(u[:, 1] < 0.5, 3, 4)
    weights, strategies = _resolve_mixture(config, strategy_mixture)
    cum = np.cumsum(weights)
    idx = np.minimum(np.searchsorted(cum, u[:, 2], side="right"), len(strategies) - 1)
    a1 = np.array([s.a1 for s in strategies])
    a2 = np.array([s.a2 for s in strategies])
    b3 = np.array([s.b3 for s in strategies])
    b4 = np.array([s.b4 for s in strategies])
    oa = np.where(sa == 1, a1[idx], a2[idx])
    ob = np.where(sb == 3, b3[idx], b4[idx])
    ea, eb = config.efficiency
    oa = _apply_efficiency(oa, u[:, 4], ea)
    ob = _apply_efficiency(ob, u[:, 5], eb)
    tau_a, tau_b, _ = _resolve_taus(config)
    jitter = config.timing.jitter_ns
    ta = _timetags(u[:, 6], tau_a, jitter)
    tb = _timetags(u[:, 7], tau_b, jitter)
    return u, sa, sb, oa, ob, ta, tb


def run_lhv(config: SimConfig, strategy_mixture=None) -> EventLog:
    """Local-hidden-variable generator: outcomes read off a drawn strategy."""
    if config.generator != "lhv":
        raise SimConfigError(f"generator must be 'lhv', got {config.generator!r}")
    _require_valid_layout(config)
    _, sa, sb, oa, ob, ta, tb = _lhv_arrays(config, strategy_mixture)
    records = _assemble_records(config.n_trials, sa, sb, oa, ob, ta, tb)
    return EventLog(_meta(config), records)


# per-pair target sign of the CHSH contribution (the hacker's objective)
_CHSH_TARGET_SIGN = {(1, 3): 1, (1, 4): 1, (2, 3): 1, (2, 4): -1}


def _chsh_max_rewrite(setting_a: int, setting_b: int, outcome_a: int, outcome_b: int) -> tuple[int, int]:
    """Flip the local outcome so the trial's CHSH contribution has the target sign."""
    target = _CHSH_TARGET_SIGN[(setting_a, setting_b)]
    if outcome_a * outcome_b == target:
        return outcome_a, outcome_b
    if outcome_b != 0:
        return target * outcome_b, outcome_b
    if outcome_a != 0:
        return outcome_a, target * outcome_a
    return 1, target


def _chsh_overwrite_rewrite(setting_a: int, setting_b: int, outcome_a: int, outcome_b: int) -> tuple[int, int]:
    """Overwrite with a maximizing assignment that always differs from the record.

    Flips A's recorded sign and sets B to match the target product, so a copy
    rewritten under this rule is guaranteed to diverge from untouched copies.
    """
    target = _CHSH_TARGET_SIGN[(setting_a, setting_b)]
    new_a = 1 if outcome_a == 0 else -outcome_a
    return new_a, target * new_a


def _marginal_shift_rewrite(setting_a: int, setting_b: int, outcome_a: int, outcome_b: int) -> tuple[int, int]:
    """Bias A's marginal by the remote setting (a detectably signaling rewrite)."""
    return (1 if setting_b == 4 else -1), outcome_b


REWRITE_RULES: dict[str, Callable[[int, int, int, int], tuple[int, int]]] = {
    "chsh_max": _chsh_max_rewrite,
    "chsh_overwrite": _chsh_overwrite_rewrite,
    "marginal_shift": _marginal_shift_rewrite,
}


def run_hacked_lhv(config: SimConfig, strategy_mixture=None, rule: str = "chsh_max") -> EventLog:
    """LHV base log with a post-readout rewrite on a tamper_fraction of trials.

    Nominal time tags are left untouched; the true completion time of a
    tampered readout is nominal + hacker.delay_ns, which is what re-validating
    the layout with an effective event shift exposes.
    """
    if config.generator != "hacked_lhv":
        raise SimConfigError(f"generator must be 'hacked_lhv', got {config.generator!r}")
    if config.hacker is None:
        raise SimConfigError("hacker block is required when generator=hacked_lhv")
    _require_valid_layout(config)
    layout = config.resolved_layout()
    min_delay = minimum_hack_delay_ns(layout)
    if config.hacker.delay_ns < min_delay and not config.hacker.allow_superluminal:
        raise SimRunError(
            f"hacker.delay_ns={config.hacker.delay_ns} is below the light-travel "
            f"minimum {min_delay} ns for this layout; set allow_superluminal to override"
        )
    u, sa, sb, oa, ob, ta, tb = _lhv_arrays(config, strategy_mixture)
    rewrite = REWRITE_RULES[rule]
    tampered = u[:, 9] < config.hacker.tamper_fraction
    oa = oa.copy()
    ob = ob.copy()
    for i in np.nonzero(tampered)[0]:
        oa[i], ob[i] = rewrite(int(sa[i]), int(sb[i]), int(oa[i]), int(ob[i]))
    records = _assemble_records(config.n_trials, sa, sb, oa, ob, ta, tb, tampered=tampered)
    return EventLog(_meta(config), records)


# ---------------------------------------------------------------------------
# broadcast defense: clone, tamper, verify


class CloneVerificationError(ValueError):
    """Verification is impossible (fewer than two copies)."""


def clone_records(log: EventLog, m: int, stores: Sequence[str] | None = None,
                  store_latency_ns: int = 250) -> list[ClonedRecord]:
    """Snapshot every record m times to distinct stores; store tags strictly increase."""
    if m < 1:
        raise ValueError("copy count m must be >= 1")
    if store_latency_ns < 1:
        raise ValueError("store_latency_ns must be >= 1")
    if stores is None:
        stores = tuple(f"store-{k + 1}" for k in range(m))
    store_ids = tuple(dict.fromkeys(str(s) for s in stores))
    if len(store_ids) < m:
        raise ValueError(f"need {m} distinct stores, got {len(store_ids)}")
    store_ids = store_ids[:m]
    if m == 1:
        import warnings

        warnings.warn("objectivity loophole open: a single copy cannot be verified",
                      stacklevel=2)
    cloned = []
    for rec in log.records:
        readout_done = max(rec.timetag_a, rec.timetag_b)
        copies = tuple(
            CopySnapshot(store_ids[k], rec.outcome_a, rec.outcome_b,
                         rec.timetag_a, rec.timetag_b,
                         readout_done + (k + 1) * store_latency_ns)
            for k in range(m)
        )
        cloned.append(ClonedRecord(rec, copies))
    return cloned


@dataclass(frozen=True)
class AttackerConfig:
    """Copy-store adversary: rewrites outcomes in targeted stores only.

    The default rule always changes the stored values of an attacked trial,
    so single-store attacks are fully visible in copy comparisons.
    """

    target_stores: tuple[str, ...]
    tamper_fraction: float = 1.0
    delay_ns: int = 0
    rule: str = "chsh_overwrite"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.tamper_fraction <= 1.0:
            raise ValueError("tamper_fraction must lie in [0, 1]")
        if self.rule not in REWRITE_RULES:
            raise ValueError(f"rule must be one of {tuple(REWRITE_RULES)}")
        object.__setattr__(self, "target_stores", tuple(self.target_stores))


def tamper_copies(cloned: Sequence[ClonedRecord], attacker: AttackerConfig) -> list[ClonedRecord]:
    """Rewrite outcomes in the attacker's stores after their store time tags.

    Store and readout time tags are left as recorded (the hack is covert);
    untouched stores keep the original snapshots.
    """
    targets = set(attacker.target_stores)
    rng = np.random.Generator(np.random.PCG64(attacker.seed))
    hit = rng.random(len(cloned)) < attacker.tamper_fraction
    rewrite = REWRITE_RULES[attacker.rule]
    out = []
    for rec, hit_i in zip(cloned, hit):
        if not hit_i or not targets:
            out.append(rec)
            continue
        base = rec.base
        new_a, new_b = rewrite(base.setting_a, base.setting_b, base.outcome_a, base.outcome_b)
        copies = tuple(
            replace(c, outcome_a=new_a, outcome_b=new_b) if c.store_id in targets else c
            for c in rec.copies
        )
        out.append(ClonedRecord(base, copies))
    return out


def verify_clones(cloned: Sequence[ClonedRecord],
                  meta: LogMeta | None = None) -> tuple[EventLog, tuple[int, ...]]:
    """Compare copies; exclude any trial whose copies differ, keep unanimous ones.

    The clean records take their outcomes and time tags from the (agreeing)
    copies, which is all a real auditor has.
    """
    cloned = list(cloned)
    if not cloned:
        raise CloneVerificationError("no cloned records to verify")
    if min(len(rec.copies) for rec in cloned) < 2:
        raise CloneVerificationError(
            "objectivity loophole open: need at least two copies to verify")
    clean: list[TrialRecord] = []
    excluded: list[int] = []
    for rec in cloned:
        if not rec.unanimous():
            excluded.append(rec.base.trial_id)
            continue
        agreed = rec.copies[0]
        clean.append(replace(
            rec.base,
            outcome_a=agreed.outcome_a, outcome_b=agreed.outcome_b,
            timetag_a=agreed.timetag_a, timetag_b=agreed.timetag_b,
        ))
    if meta is None:
        meta = LogMeta(generator="clone_verified", seed=0, config_hash="", n_trials=len(clean))
    else:
        meta = LogMeta(generator=meta.generator, seed=meta.seed, config_hash=meta.config_hash,
                       n_trials=len(clean), schema_version=meta.schema_version,
                       reveal_truth=meta.reveal_truth)
    return EventLog(meta, clean), tuple(excluded)
