"""Statistical audits of event logs and published count tables.

Covers the no-signaling equalities (marginals must not depend on the remote
choice, heralding rates must not depend on any choice), time-binned detection
ratio constancy, and equality of Bell-correlator magnitudes. Every audit
reports statistics and p-values; it never issues verdicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .counts import CountsTable
from .eventlog import EventLog
from .lhv import correlator_estimates

DEFAULT_ALPHA = 0.05
EXACT_BINOMIAL_LIMIT = 1000  # exact two-sided tail up to here, else cc-normal

FOOTER_CONDITIONAL_BINOMIAL = (
    "rate comparisons without per-setting trial totals use the conditional "
    "binomial construction (equal exposure assumed)"
)


@dataclass
class AuditTest:
    """One test row: statistic kind 'z', 'chi2' or 'count'; p_value None if untestable."""

    name: str
    kind: str
    statistic: float | None
    p_value: float | None
    flag: bool
    bonferroni_flag: bool = False
    note: str = ""


@dataclass
class AuditReport:
    alpha: float
    tests: list[AuditTest] = field(default_factory=list)
    footers: list[str] = field(default_factory=list)
    series: dict[str, list[tuple[float, float]]] = field(default_factory=dict)

    def flagged(self) -> list[AuditTest]:
        return [t for t in self.tests if t.flag]

    def add_footer(self, text: str) -> None:
        if text not in self.footers:
            self.footers.append(text)


def _apply_bonferroni(report: AuditReport) -> AuditReport:
    testable = [t for t in report.tests if t.p_value is not None]
    m = len(testable)
    for t in testable:
        t.flag = t.p_value < report.alpha
        t.bonferroni_flag = m > 0 and t.p_value < report.alpha / m
    return report


# ---------------------------------------------------------------------------
# elementary tests


def two_rate_test(n1: int, n2: int) -> tuple[float, float]:
    """Equal-rate test of two event counts with equal (unknown) exposure.

    Under the null, n1 ~ Binomial(n1+n2, 1/2). Returns
    z = (n1-n2)/sqrt(n1+n2) and the two-sided p-value: the exact binomial
    tail sum for n1+n2 <= 1000, else the continuity-corrected normal tail
    (which agrees with the exact sum to <1e-4 at the switchover).
    """
    n1, n2 = int(n1), int(n2)
    if n1 < 0 or n2 < 0:
        raise ValueError("counts must be nonnegative")
    n = n1 + n2
    if n == 0:
        raise ValueError("two_rate_test is undefined for two zero counts")
    z = (n1 - n2) / math.sqrt(n)
    if n <= EXACT_BINOMIAL_LIMIT:
        p = 2.0 * float(stats.binom.cdf(min(n1, n2), n, 0.5))
    else:
        z_cc = (abs(n1 - n / 2.0) - 0.5) / (math.sqrt(n) / 2.0)
        p = 2.0 * float(stats.norm.sf(max(z_cc, 0.0)))
    return z, min(p, 1.0)


def two_proportion_test(k1: int, n1: int, k2: int, n2: int) -> tuple[float, float]:
    """Pooled two-proportion z-test; two-sided normal p-value."""
    for k, n in ((k1, n1), (k2, n2)):
        if n < 1:
            raise ValueError("trial totals must be >= 1")
        if not 0 <= k <= n:
            raise ValueError(f"count {k} outside [0, {n}]")
    p1, p2 = k1 / n1, k2 / n2
    pooled = (k1 + k2) / (n1 + n2)
    if pooled in (0.0, 1.0):
        return 0.0, 1.0
    z = (p1 - p2) / math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    p = 2.0 * float(stats.norm.sf(abs(z)))
    return z, min(p, 1.0)


def chi2_homogeneity(table: np.ndarray) -> tuple[float, float, int]:
    """Pearson chi-square of homogeneity on a 2D count table; (stat, p, df).

    All-zero rows/columns are dropped before computing expectations.
    """
    obs = np.asarray(table, dtype=float)
    obs = obs[obs.sum(axis=1) > 0][:, obs.sum(axis=0) > 0]
    if obs.shape[0] < 2 or obs.shape[1] < 2:
        raise ValueError("need at least a 2x2 table with nonzero margins")
    row = obs.sum(axis=1, keepdims=True)
    col = obs.sum(axis=0, keepdims=True)
    expected = row @ col / obs.sum()
    stat = float(((obs - expected) ** 2 / expected).sum())
    df = (obs.shape[0] - 1) * (obs.shape[1] - 1)
    return stat, float(stats.chi2.sf(stat, df)), df


# ---------------------------------------------------------------------------
# counting


def marginal_counts(log: EventLog) -> CountsTable:
    """Per-setting-pair outcome counts for A, B, their joint, and C if present."""
    table = CountsTable(source=f"log:{log.meta.generator}:{log.meta.seed}")
    entries = table.entries
    for rec in log.records:
        pair = (rec.setting_a, rec.setting_b)
        for key in (
            ("A", pair, rec.outcome_a),
            ("B", pair, rec.outcome_b),
            ("AB", pair, (rec.outcome_a, rec.outcome_b)),
        ):
            entries[key] = entries.get(key, 0) + 1
        if rec.outcome_c is not None:
            key = ("C", pair, rec.outcome_c)
            entries[key] = entries.get(key, 0) + 1
    return table


# ---------------------------------------------------------------------------
# no-signaling suite

# (row name, party, left setting pair, right setting pair)
_NS_EQUALITIES = (
    ("p(A|1,3)=p(A|1,4)", "A", (1, 3), (1, 4)),
    ("p(A|2,3)=p(A|2,4)", "A", (2, 3), (2, 4)),
    ("p(B|1,3)=p(B|2,3)", "B", (1, 3), (2, 3)),
    ("p(B|1,4)=p(B|2,4)", "B", (1, 4), (2, 4)),
)
_C_PAIRS = ((1, 3), (1, 4), (2, 3), (2, 4))


def _untestable(name: str, note: str) -> AuditTest:
    return AuditTest(name, "none", None, None, False, note=f"untestable: {note}")


def _distribution_row(name: str, left: dict, right: dict, report: AuditReport) -> AuditTest:
    """One equality row; full outcome distributions get a chi-square, lone
    matching cells fall back to the equal-exposure rate construction."""
    if not left or not right:
        return _untestable(name, "missing cells")
    outcomes = sorted(set(left) | set(right), key=str)
    if len(outcomes) >= 2:
        table = np.array([[left.get(o, 0) for o in outcomes],
                          [right.get(o, 0) for o in outcomes]], dtype=float)
        try:
            stat, p, _ = chi2_homogeneity(table)
        except ValueError as exc:
            return _untestable(name, str(exc))
        return AuditTest(name, "chi2", stat, p, False)
    outcome = outcomes[0]
    z, p = two_rate_test(left[outcome], right[outcome])
    report.add_footer(FOOTER_CONDITIONAL_BINOMIAL)
    return AuditTest(name, "z", z, p, False, note="equal-exposure rate comparison")


def nosignaling_suite(counts: CountsTable, alpha: float = DEFAULT_ALPHA,
                      assumed_total_per_setting: int | None = None) -> AuditReport:
    """One row per no-signaling equality, pairwise rows plus a 4-cell
    homogeneity row for the heralding quadruple, Bonferroni-adjusted flags.

    ``assumed_total_per_setting`` supplies per-setting trial totals for count
    tables that only publish event counts; comparisons made under that
    assumption are tagged in the row note and the report footer.
    """
    report = AuditReport(alpha=alpha)
    for name, party, pair_l, pair_r in _NS_EQUALITIES:
        left = counts.outcomes(party, pair_l)
        right = counts.outcomes(party, pair_r)
        report.tests.append(_distribution_row(name, left, right, report))

    c_cells = {pair: counts.outcomes("C", pair) for pair in _C_PAIRS}
    have_c = [pair for pair in _C_PAIRS if c_cells[pair]]
    for i, pair_l in enumerate(_C_PAIRS):
        for pair_r in _C_PAIRS[i + 1:]:
            name = f"rate(C=1|{pair_l[0]},{pair_l[1]})=rate(C=1|{pair_r[0]},{pair_r[1]})"
            left, right = c_cells[pair_l], c_cells[pair_r]
            if not left or not right:
                if have_c:
                    report.tests.append(_untestable(name, "missing cells"))
                continue
            if 0 in left and 0 in right:  # totals derivable: proportion test
                z, p = two_proportion_test(left.get(1, 0), sum(left.values()),
                                           right.get(1, 0), sum(right.values()))
                report.tests.append(AuditTest(name, "z", z, p, False))
            else:
                z, p = two_rate_test(left.get(1, 0), right.get(1, 0))
                report.add_footer(FOOTER_CONDITIONAL_BINOMIAL)
                report.tests.append(AuditTest(name, "z", z, p, False,
                                              note="equal-exposure rate comparison"))
    if len(have_c) >= 2:
        name = f"C-rate homogeneity ({len(have_c)} cells)"
        if all(0 in c_cells[pair] for pair in have_c):
            table = np.array([[c_cells[p_].get(1, 0), c_cells[p_].get(0, 0)] for p_ in have_c])
            stat, p, _ = chi2_homogeneity(table)
        else:
            # equal exposure: herald counts multinomial with equal cell rates
            ones = np.array([c_cells[p_].get(1, 0) for p_ in have_c], dtype=float)
            expected = ones.mean()
            stat = float(((ones - expected) ** 2 / expected).sum()) if expected > 0 else 0.0
            p = float(stats.chi2.sf(stat, len(have_c) - 1))
            report.add_footer(FOOTER_CONDITIONAL_BINOMIAL)
        report.tests.append(AuditTest(name, "chi2", stat, p, False))

    if not any(t.p_value is not None for t in report.tests):
        _rate_comparison_fallback(counts, report, assumed_total_per_setting)
    _apply_bonferroni(report)
    return report


def _rate_comparison_fallback(counts: CountsTable, report: AuditReport,
                              assumed_total: int | None) -> None:
    """Compare lone published count cells that fit no standard equality.

    Emitted only when nothing above was testable; each row states its
    assumption (equal exposure, or the supplied per-setting trial total).
    """
    for party in counts.parties():
        pairs = counts.setting_pairs(party)
        cells = {pair: counts.outcomes(party, pair) for pair in pairs}
        single = [(pair, next(iter(cells[pair].items())))
                  for pair in pairs if len(cells[pair]) == 1]
        for i, (pair_l, (outcome, k_l)) in enumerate(single):
            for pair_r, (outcome_r, k_r) in single[i + 1:]:
                if outcome_r != outcome:
                    continue
                name = f"rate({party}={outcome}|{pair_l[0]},{pair_l[1]})=rate({party}={outcome}|{pair_r[0]},{pair_r[1]})"
                if assumed_total is not None:
                    z, p = two_proportion_test(k_l, assumed_total, k_r, assumed_total)
                    note = f"assumed {assumed_total} trials per setting"
                    report.add_footer(
                        f"proportion comparisons assume {assumed_total} trials per setting "
                        f"(totals not published)")
                else:
                    z, p = two_rate_test(k_l, k_r)
                    note = "equal-exposure rate comparison"
                    report.add_footer(FOOTER_CONDITIONAL_BINOMIAL)
                report.tests.append(AuditTest(name, "z", z, p, False, note=note))


# ---------------------------------------------------------------------------
# time-binned detection-ratio constancy (the Vienna-style check)


def binned_ratio_test(log: EventLog, bin_width_ns: int, alpha: float = DEFAULT_ALPHA) -> AuditReport:
    """Does the detection ratio between A's two settings depend on the time bin?

    Bins A's time tags, then tests homogeneity of the (setting x bin) detection
    count table against the pooled ratio with a Pearson chi-square. Per-bin
    ratios p(A=1|setting 1)/p(A=1|setting 2) go to ``report.series`` for
    plotting. Bins whose ratio denominator is zero are merged rightward.
    """
    report = AuditReport(alpha=alpha)
    name = "detection-ratio constancy across time bins"
    if bin_width_ns < 1:
        raise ValueError("bin_width_ns must be >= 1")
    if not log.records:
        report.tests.append(_untestable(name, "empty log"))
        return report
    tags = np.array([rec.timetag_a for rec in log.records], dtype=np.int64)
    setting = np.array([rec.setting_a for rec in log.records])
    detected = np.array([rec.outcome_a == 1 for rec in log.records])
    lo, hi = int(tags.min()), int(tags.max())
    edges = np.arange(lo, hi + bin_width_ns + 1, bin_width_ns)
    which = np.digitize(tags, edges) - 1

    bins = []
    for b in range(len(edges) - 1):
        in_bin = which == b
        t1 = int(np.sum(in_bin & (setting == 1)))
        t2 = int(np.sum(in_bin & (setting == 2)))
        n1 = int(np.sum(in_bin & (setting == 1) & detected))
        n2 = int(np.sum(in_bin & (setting == 2) & detected))
        bins.append([float(edges[b]), t1, t2, n1, n2])
    bins = [b for b in bins if b[1] + b[2] > 0]

    # merge bins rightward while the ratio denominator is zero
    merged = []
    carry = None
    for b in bins:
        if carry is not None:
            b = [carry[0], carry[1] + b[1], carry[2] + b[2], carry[3] + b[3], carry[4] + b[4]]
            carry = None
        if b[1] == 0 or b[2] == 0 or b[4] == 0:
            carry = b
        else:
            merged.append(b)
    if carry is not None:
        if merged:
            last = merged[-1]
            merged[-1] = [last[0], last[1] + carry[1], last[2] + carry[2],
                          last[3] + carry[3], last[4] + carry[4]]
        else:
            merged.append(carry)

    report.series["binned_ratio"] = [
        (left, (n1 / t1) / (n2 / t2)) for left, t1, t2, n1, n2 in merged if t1 and t2 and n2
    ]
    if len(merged) < 2:
        report.tests.append(_untestable(name, "insufficient bins"))
        return report
    table = np.array([[b[3] for b in merged], [b[4] for b in merged]], dtype=float)
    try:
        stat, p, _ = chi2_homogeneity(table)
    except ValueError as exc:
        report.tests.append(_untestable(name, str(exc)))
        return report
    report.tests.append(AuditTest(f"{name} ({len(merged)} bins, width {bin_width_ns} ns)",
                                  "chi2", stat, p, False))
    _apply_bonferroni(report)
    return report


# ---------------------------------------------------------------------------
# correlator-magnitude equality (the Munich-style check)


def correlator_equality_test(counts: CountsTable, alpha: float = DEFAULT_ALPHA) -> AuditReport:
    """Pairwise and joint equality of |E_ij| across setting pairs, plus the
    singlet sign pattern (three correlators share a sign, one is opposite)."""
    report = AuditReport(alpha=alpha)
    ests = correlator_estimates(counts)
    pairs = sorted(ests)
    for pair in pairs:
        _, _, n = ests[pair]
        if n < 10:
            report.tests.append(_untestable(
                f"low statistics at {pair}", f"only {n} events"))
    for i, pair_l in enumerate(pairs):
        for pair_r in pairs[i + 1:]:
            e_l, se_l, _ = ests[pair_l]
            e_r, se_r, _ = ests[pair_r]
            name = f"|E{pair_l[0]}{pair_l[1]}|=|E{pair_r[0]}{pair_r[1]}|"
            denom = math.hypot(se_l, se_r)
            if denom == 0.0:
                equal = abs(abs(e_l) - abs(e_r)) < 1e-12
                report.tests.append(AuditTest(name, "z", 0.0 if equal else math.inf,
                                              1.0 if equal else 0.0, False,
                                              note="zero standard errors"))
                continue
            z = (abs(e_l) - abs(e_r)) / denom
            p = 2.0 * float(stats.norm.sf(abs(z)))
            report.tests.append(AuditTest(name, "z", z, min(p, 1.0), False))
    usable = [pair for pair in pairs if ests[pair][1] > 0]
    if len(usable) >= 2:
        mags = np.array([abs(ests[pair][0]) for pair in usable])
        ws = np.array([1.0 / ests[pair][1] ** 2 for pair in usable])
        mean = float((ws * mags).sum() / ws.sum())
        stat = float((ws * (mags - mean) ** 2).sum())
        p = float(stats.chi2.sf(stat, len(usable) - 1))
        report.tests.append(AuditTest(
            f"|E| homogeneity ({len(usable)} pairs)", "chi2", stat, p, False))
    if len(pairs) == 4:
        signs = [1 if ests[pair][0] > 0 else -1 for pair in pairs]
        positives = signs.count(1)
        ok = positives in (1, 3)
        report.tests.append(AuditTest(
            "sign pattern (three alike, one opposite)", "count", float(positives),
            None, not ok, note="" if ok else "pattern violated"))
    else:
        report.tests.append(_untestable(
            "sign pattern (three alike, one opposite)",
            f"needs all four pairs, have {len(pairs)}"))
    _apply_bonferroni(report)
    return report
