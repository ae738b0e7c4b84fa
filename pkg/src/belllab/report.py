"""Report emission: delimited tables, human-readable text, and rendered figures.

Audit reports exist in two forms: a text table for humans and line-delimited
machine records (one test per line) for downstream tooling. The log report
writes plot-ready TSV tables and renders the matching matplotlib figures next
to them. Output is deterministic: no timestamps, fixed float formatting.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .audit import AuditReport, binned_ratio_test, marginal_counts
from .counts import CountsTable
from .eventlog import EventLog, atomic_write_text
from .lhv import CHSH_PAIRS, GAME_CHSH, GAME_EBERHARD, InsufficientDataError, correlator_estimates, estimate_from_counts
from .spacetime import LayoutConfig, SPACELIKE, validate_layout

AUDIT_HEADER_PREFIX = "#belllab-audit"
_PNG_METADATA = {"Software": "belllab"}  # keep renders byte-stable across runs


def _fmt(value, digits: int = 10) -> str:
    if value is None:
        return "."
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.{digits}g}"
    return str(value)


# ---------------------------------------------------------------------------
# audit report formats


def format_audit_text(report: AuditReport, title: str = "audit") -> str:
    lines = [f"{title} (alpha={_fmt(report.alpha)})"]
    width = max([len(t.name) for t in report.tests], default=20)
    header = f"{'test':<{width}}  {'kind':<5} {'statistic':>12} {'p-value':>12}  flag  bonferroni"
    lines.append(header)
    lines.append("-" * len(header))
    for t in report.tests:
        flag = "FLAG" if t.flag else "ok"
        bon = "FLAG" if t.bonferroni_flag else "ok"
        lines.append(
            f"{t.name:<{width}}  {t.kind:<5} {_fmt(t.statistic, 6):>12} "
            f"{_fmt(t.p_value, 6):>12}  {flag:<4}  {bon}"
            + (f"  [{t.note}]" if t.note else "")
        )
    for footer in report.footers:
        lines.append(f"note: {footer}")
    return "\n".join(lines) + "\n"


def audit_machine_lines(report: AuditReport) -> str:
    """One test per line: name, kind, statistic, p_value, flag, bonferroni, note."""
    lines = [f"{AUDIT_HEADER_PREFIX} v=1 alpha={_fmt(report.alpha)}"]
    for t in report.tests:
        lines.append("\t".join([
            t.name, t.kind, _fmt(t.statistic), _fmt(t.p_value),
            _fmt(t.flag), _fmt(t.bonferroni_flag), t.note or ".",
        ]))
    for footer in report.footers:
        lines.append(f"#footer\t{footer}")
    for series_name, rows in sorted(report.series.items()):
        for x, y in rows:
            lines.append(f"#series\t{series_name}\t{_fmt(x)}\t{_fmt(y)}")
    return "\n".join(lines) + "\n"


def write_audit_outputs(report: AuditReport, text_path: str | Path | None,
                        machine_path: str | Path | None, title: str = "audit") -> None:
    if text_path is not None:
        atomic_write_text(Path(text_path), format_audit_text(report, title))
    if machine_path is not None:
        atomic_write_text(Path(machine_path), audit_machine_lines(report))


# ---------------------------------------------------------------------------
# log summary tables


def correlator_table(counts: CountsTable) -> list[tuple]:
    ests = correlator_estimates(counts)
    return [(f"{pair[0]},{pair[1]}",) + ests[pair] for pair in sorted(ests)]


def bell_summary_rows(counts: CountsTable) -> list[tuple[str, float, float]]:
    rows = []
    for game in (GAME_CHSH, GAME_EBERHARD):
        try:
            value, se = estimate_from_counts(counts, game)
        except InsufficientDataError:
            continue
        rows.append((game, value, se))
    return rows


def marginal_table(counts: CountsTable) -> list[tuple]:
    rows = []
    for party in counts.parties():
        if party == "AB":
            continue
        for pair in counts.setting_pairs(party):
            cells = counts.outcomes(party, pair)
            total = sum(cells.values())
            for outcome in sorted(cells):
                rows.append((party, f"{pair[0]},{pair[1]}", outcome,
                             cells[outcome], cells[outcome] / total))
    return rows


def _write_table(path: Path, header: tuple[str, ...], rows: list[tuple]) -> None:
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# figures


def render_correlator_figure(counts: CountsTable, path: str | Path) -> None:
    ests = correlator_estimates(counts)
    pairs = [pair for pair in CHSH_PAIRS if pair in ests] or sorted(ests)
    labels = [f"({i},{j})" for i, j in pairs]
    values = [ests[p][0] for p in pairs]
    errors = [ests[p][1] for p in pairs]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(labels, values, yerr=errors, capsize=4, color="#4878a8")
    ax.axhline(0.0, color="black", linewidth=0.8)
    for bound in (math.sqrt(0.5), -math.sqrt(0.5)):
        ax.axhline(bound, color="gray", linestyle=":", linewidth=0.8)
    ax.set_ylabel("correlator estimate")
    ax.set_xlabel("setting pair (i, j)")
    ax.set_ylim(-1.05, 1.05)
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_METADATA)
    plt.close(fig)


def render_binned_ratio_figure(series: list[tuple[float, float]], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    if series:
        xs = [row[0] for row in series]
        ys = [row[1] for row in series]
        ax.step(xs, ys, where="post", color="#a84848")
        ax.axhline(1.0, color="gray", linestyle=":", linewidth=0.8)
    ax.set_xlabel("time bin start (ns)")
    ax.set_ylabel("detection ratio p(1|setting 1) / p(1|setting 2)")
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_METADATA)
    plt.close(fig)


def render_layout_figure(layout: LayoutConfig, path: str | Path) -> None:
    """Spacetime diagram (x vs t) with lightcones from every choice event."""
    report = validate_layout(layout)
    fig, ax = plt.subplots(figsize=(6, 5))
    ts = [e.t * 1e6 for e in layout.events]
    span = max(abs(e.pos[0]) for e in layout.events) * 1.4 + 1.0
    t_max = max(ts) * 1.3 + 1e-3
    for e in layout.events:
        is_choice = e.label.startswith("choice")
        ax.plot(e.pos[0], e.t * 1e6, "o" if is_choice else "s",
                color="#333333", markersize=6)
        ax.annotate(e.label, (e.pos[0], e.t * 1e6), textcoords="offset points",
                    xytext=(4, 4), fontsize=8)
        if is_choice:
            # future lightcone edges; t axis in microseconds
            dt = t_max - e.t * 1e6
            dx = layout.c * dt * 1e-6
            ax.plot([e.pos[0], e.pos[0] + dx], [e.t * 1e6, t_max], color="#c8a848", linewidth=0.9)
            ax.plot([e.pos[0], e.pos[0] - dx], [e.t * 1e6, t_max], color="#c8a848", linewidth=0.9)
    for check in report.checks:
        e1, e2 = layout.event(check.label_a), layout.event(check.label_b)
        color = "#48a868" if check.interval == SPACELIKE else "#a84848"
        ax.plot([e1.pos[0], e2.pos[0]], [e1.t * 1e6, e2.t * 1e6],
                color=color, linestyle="--", linewidth=1.0)
    ax.set_xlim(-span, span)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("t (us)")
    ax.set_title("required pairs: green spacelike, red not", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_METADATA)
    plt.close(fig)


# ---------------------------------------------------------------------------
# the full log report


def write_log_report(log: EventLog, outdir: str | Path, bin_width_ns: int = 4,
                     layout: LayoutConfig | None = None) -> list[Path]:
    """Write summary tables and figures for one event log; returns the paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    counts = marginal_counts(log)
    written: list[Path] = []

    path = outdir / "correlators.tsv"
    _write_table(path, ("pair", "correlator", "stderr", "events"), correlator_table(counts))
    written.append(path)

    path = outdir / "bell_summary.tsv"
    _write_table(path, ("quantity", "value", "stderr"), bell_summary_rows(counts))
    written.append(path)

    path = outdir / "marginals.tsv"
    _write_table(path, ("party", "pair", "outcome", "count", "frequency"), marginal_table(counts))
    written.append(path)

    ratio_report = binned_ratio_test(log, bin_width_ns)
    series = ratio_report.series.get("binned_ratio", [])
    path = outdir / "binned_ratio.tsv"
    _write_table(path, ("bin_start_ns", "ratio"), [tuple(row) for row in series])
    written.append(path)

    path = outdir / "correlators.png"
    render_correlator_figure(counts, path)
    written.append(path)

    path = outdir / "binned_ratio.png"
    render_binned_ratio_figure(series, path)
    written.append(path)

    if layout is not None:
        path = outdir / "layout.png"
        render_layout_figure(layout, path)
        written.append(path)
    return written
