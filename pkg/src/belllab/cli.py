"""Command-line surface: simulate, audit, clone-verify, layout-check, vacuum-check, report.

Exit codes are a stable contract: 0 success, 1 usage or parse failure,
2 validation or check failure. Auditing always exits 0 when it runs; raising
flags is reporting, not judging.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .audit import (AuditReport, binned_ratio_test, correlator_equality_test,
                    marginal_counts, nosignaling_suite)
from .counts import CountsFormatError, CountsTable, parse_counts, COUNTS_HEADER_PREFIX
from .datasets import bundled_dataset, dataset_names
from .eventlog import (EventLog, LOG_HEADER_PREFIX, LogFormatError, RunManifest,
                       atomic_write_text, read_log, write_cloned_log, write_log,
                       write_manifest)
from .lhv import DeterministicStrategy, GAME_CHSH, GAME_EBERHARD, InsufficientDataError, estimate_from_counts
from .report import audit_machine_lines, format_audit_text, write_audit_outputs, write_log_report
from .sim import (AttackerConfig, CloneVerificationError, HackerConfig, REWRITE_RULES,
                  SimConfig, SimConfigError, SimRunError, TimingModel, clone_records,
                  config_hash, run_hacked_lhv, run_lhv, run_quantum, tamper_copies,
                  verify_clones)
from .spacetime import (LayoutConfig, LayoutError, LayoutParseError, layout_from_dict,
                        read_layout_file, validate_layout)
from .vacuum import (ADMISSIBLE, FourVector, InvariantCorrelator,
                     conservation_forces_zero, minkowski_dot, realism_admissible)

_PARSE_ERRORS = (FileNotFoundError, IsADirectoryError, PermissionError,
                 json.JSONDecodeError, LayoutParseError, LogFormatError,
                 CountsFormatError, KeyError)
_VALIDATION_ERRORS = (SimConfigError, SimRunError, CloneVerificationError,
                      LayoutError, InsufficientDataError, ValueError)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; our contract reserves 2 for validation."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


class ConfigFieldError(SimConfigError):
    pass


# ---------------------------------------------------------------------------
# simulate


_CONFIG_FIELDS = {"generator", "n_trials", "seed", "angles", "efficiency", "swapping",
                  "layout", "timing", "hacker", "lhv_mixture"}


def _field_error(name: str, problem: str) -> ConfigFieldError:
    return ConfigFieldError(f"config field {name!r}: {problem}")


def load_sim_config(path: str | Path) -> SimConfig:
    """Parse and validate a JSON simulation config, naming the offending field."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise _field_error("<root>", "config must be a JSON object")
    unknown = set(data) - _CONFIG_FIELDS
    if unknown:
        raise _field_error(sorted(unknown)[0], "unknown field")
    for required in ("generator", "n_trials", "seed"):
        if required not in data:
            raise _field_error(required, "missing")
    layout = None
    if data.get("layout") is not None:
        raw = data["layout"]
        try:
            if isinstance(raw, str):
                layout = read_layout_file(Path(path).parent / raw if not Path(raw).is_absolute() else raw)
            elif isinstance(raw, dict):
                layout = layout_from_dict(raw)
            else:
                raise ValueError("must be a path or an object")
        except (OSError, LayoutParseError, LayoutError, ValueError, KeyError, TypeError) as exc:
            raise _field_error("layout", str(exc)) from exc
    timing = TimingModel()
    if data.get("timing") is not None:
        try:
            timing = TimingModel(**data["timing"])
        except (TypeError, SimConfigError) as exc:
            raise _field_error("timing", str(exc)) from exc
    hacker = None
    if data.get("hacker") is not None:
        try:
            hacker = HackerConfig(
                delay_ns=int(data["hacker"]["delay_ns"]),
                tamper_fraction=float(data["hacker"]["tamper_fraction"]),
                target_copies=tuple(data["hacker"].get("target_copies", ())),
                allow_superluminal=bool(data["hacker"].get("allow_superluminal", False)),
            )
        except (TypeError, KeyError, ValueError, SimConfigError) as exc:
            raise _field_error("hacker", str(exc)) from exc
    mixture = None
    if data.get("lhv_mixture") is not None:
        try:
            mixture = tuple(
                (float(entry["weight"]),
                 DeterministicStrategy(int(entry["a1"]), int(entry["a2"]),
                                       int(entry["b3"]), int(entry["b4"])))
                for entry in data["lhv_mixture"]
            )
        except (TypeError, KeyError, ValueError) as exc:
            raise _field_error("lhv_mixture", str(exc)) from exc
    try:
        return SimConfig(
            generator=data["generator"],
            n_trials=int(data["n_trials"]),
            seed=int(data["seed"]),
            angles=tuple(data.get("angles", SimConfig.angles)),
            efficiency=data.get("efficiency", 1.0),
            swapping=bool(data.get("swapping", False)),
            layout=layout,
            timing=timing,
            hacker=hacker,
            lhv_mixture=mixture,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SimConfigError):
            raise
        raise ConfigFieldError(f"config: {exc}") from exc


def _run_generator(config: SimConfig) -> EventLog:
    if config.generator == "quantum":
        return run_quantum(config)
    if config.generator == "lhv":
        return run_lhv(config)
    return run_hacked_lhv(config)


def cmd_simulate(args) -> int:
    config = load_sim_config(args.config)
    log = _run_generator(config)
    log.meta.reveal_truth = bool(args.reveal_truth)
    write_log(log, args.out)
    manifest = RunManifest.create(config_hash(config), config.seed, config.generator)
    manifest_path = args.manifest or (str(args.out) + ".manifest.json")
    write_manifest(manifest, manifest_path)
    print(f"wrote {len(log.records)} trials to {args.out}")
    print(f"config hash {manifest.config_hash}")
    return 0


# ---------------------------------------------------------------------------
# audit


def _sniff_input(path: Path) -> str:
    with open(path) as handle:
        first = handle.readline()
    if first.startswith(LOG_HEADER_PREFIX):
        return "log"
    if first.startswith(COUNTS_HEADER_PREFIX):
        return "counts"
    raise LogFormatError(f"{path}: neither an event log nor a counts file")


def _merge_reports(sections: list[tuple[str, AuditReport]], alpha: float) -> AuditReport:
    merged = AuditReport(alpha=alpha)
    for title, rep in sections:
        for t in rep.tests:
            t.name = f"{title}: {t.name}"
            merged.tests.append(t)
        for footer in rep.footers:
            merged.add_footer(footer)
        merged.series.update(rep.series)
    return merged


def cmd_audit(args) -> int:
    suites = ("nosignaling", "binned-ratio", "correlator") if args.suite == "all" else (args.suite,)
    skipped: list[tuple[int, str]] = []
    log = None
    assumed_total = None
    if args.dataset:
        dataset = bundled_dataset(args.dataset)
        counts, assumed_total = dataset.counts, dataset.assumed_total_per_setting
        source = args.dataset
    else:
        path = Path(args.input)
        kind = _sniff_input(path)
        if kind == "log":
            log, skipped = read_log(path, tolerate_malformed=True)
            counts = marginal_counts(log)
        else:
            counts = parse_counts(path.read_text())
        source = str(path)
    sections = []
    for suite in suites:
        if suite == "nosignaling":
            sections.append(("nosignaling", nosignaling_suite(
                counts, alpha=args.alpha, assumed_total_per_setting=assumed_total)))
        elif suite == "correlator":
            sections.append(("correlator", correlator_equality_test(counts, alpha=args.alpha)))
        elif suite == "binned-ratio":
            if log is None:
                print("error: the binned-ratio suite needs an event log input", file=sys.stderr)
                return 1
            sections.append(("binned-ratio", binned_ratio_test(
                log, args.bin_width_ns, alpha=args.alpha)))
    merged = _merge_reports(sections, args.alpha)
    for lineno, reason in skipped:
        merged.add_footer(f"skipped malformed record at line {lineno}: {reason}")
    text = format_audit_text(merged, title=f"audit of {source}")
    sys.stdout.write(text)
    if args.out:
        atomic_write_text(Path(args.out), audit_machine_lines(merged))
    if args.out_text:
        atomic_write_text(Path(args.out_text), text)
    return 0


# ---------------------------------------------------------------------------
# clone-verify


def _bell_estimate_lines(log: EventLog) -> list[str]:
    counts = marginal_counts(log)
    lines = []
    for game in (GAME_CHSH, GAME_EBERHARD):
        try:
            value, se = estimate_from_counts(counts, game)
            lines.append(f"post-exclusion {game}: {value:.6f} +/- {se:.6f}")
        except InsufficientDataError as exc:
            lines.append(f"post-exclusion {game}: not estimable ({exc})")
    return lines


def cmd_clone_verify(args) -> int:
    log, _ = read_log(args.log)
    if args.copies < 2:
        raise CloneVerificationError(
            "objectivity loophole open: need at least two copies (m >= 2)")
    stores = args.stores.split(",") if args.stores else None
    cloned = clone_records(log, args.copies, stores, store_latency_ns=args.store_latency_ns)
    if args.attacker_stores:
        attacker = AttackerConfig(
            target_stores=tuple(args.attacker_stores.split(",")),
            tamper_fraction=args.attacker_fraction,
            delay_ns=args.attacker_delay_ns,
            rule=args.attacker_rule,
            seed=args.attacker_seed,
        )
        cloned = tamper_copies(cloned, attacker)
    if args.out_cloned:
        write_cloned_log(log.meta, cloned, args.out_cloned)
    clean, excluded = verify_clones(cloned, log.meta)
    rate = len(excluded) / len(cloned) if cloned else 0.0
    print(f"trials: {len(cloned)}  excluded: {len(excluded)}  exclusion rate: {rate:.4f}")
    for line in _bell_estimate_lines(clean):
        print(line)
    if args.out_clean:
        write_log(clean, args.out_clean)
    if args.out_exclusions:
        lines = [f"#belllab-exclusions v=1 total={len(cloned)} excluded={len(excluded)}"]
        lines.extend(str(tid) for tid in excluded)
        atomic_write_text(Path(args.out_exclusions), "\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------
# layout-check


def cmd_layout_check(args) -> int:
    layout = read_layout_file(args.layout)
    if args.c_override is not None:
        layout = LayoutConfig(layout.events, layout.required_separations, args.c_override)
    report = validate_layout(layout)
    print(f"layout: {args.layout} (c = {layout.c:g} m/s)")
    for check in report.checks:
        print(f"  {check.label_a} <-> {check.label_b}: {check.interval}"
              f"  margin {check.margin_m:+.3f} m")
    print("PASS" if report.passed else "FAIL: required pairs must all be spacelike")
    return 0 if report.passed else 2


# ---------------------------------------------------------------------------
# vacuum-check


def cmd_vacuum_check(args) -> int:
    try:
        comps = tuple(float(x) for x in args.p.split(","))
        p = FourVector(comps)
    except ValueError as exc:
        print(f"error: --p must be four comma-separated numbers: {exc}", file=sys.stderr)
        return 1
    c = InvariantCorrelator(xi=args.xi, eta=args.eta)
    result = realism_admissible(c, p)
    pp = minkowski_dot(p, p)
    print(f"p.p = {pp:g}")
    print(f"realism: {result.status}" + (" (boundary)" if result.on_boundary else ""))
    if args.conservation:
        if pp >= 0:
            print("conservation check skipped: p is not spacelike")
        else:
            check = conservation_forces_zero(c, p)
            print(f"transversality p_mu G^(mu nu) = 0: {'holds' if check.transverse else 'fails'}")
            if not check.transverse:
                witness = ", ".join(f"{x:g}" for x in check.witness)
                print(f"witness residual: ({witness})")
            if check.forced_zero:
                print("charge conservation forces the correlator to vanish completely: G = 0")
    return 0


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    log, _ = read_log(args.input, tolerate_malformed=True)
    layout = read_layout_file(args.layout) if args.layout else None
    written = write_log_report(log, args.outdir, bin_width_ns=args.bin_width_ns, layout=layout)
    for path in written:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="belllab",
                     description="Desk-scale Bell-test laboratory: simulate, attack, defend, audit.")
    parser.add_argument("--version", action="version", version=f"belllab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a trial generator and write an event log")
    p.add_argument("--config", required=True, help="JSON simulation config")
    p.add_argument("--out", required=True, help="output event-log path")
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    p.add_argument("--reveal-truth", action="store_true",
                   help="include the simulator's ground-truth tampered flag in the log")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("audit", help="statistical audits of a log or counts table")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="event log or counts file")
    src.add_argument("--dataset", choices=dataset_names(), help="bundled published dataset")
    p.add_argument("--suite", choices=("nosignaling", "binned-ratio", "correlator", "all"),
                   default="nosignaling")
    p.add_argument("--alpha", type=float, default=0.05, help="per-test significance level")
    p.add_argument("--bin-width-ns", type=int, default=4)
    p.add_argument("--out", help="machine-readable report path (one test per line)")
    p.add_argument("--out-text", help="also write the text report to this path")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("clone-verify", help="clone a log to stores, optionally attack, verify")
    p.add_argument("--log", required=True)
    p.add_argument("-m", "--copies", type=int, required=True, help="number of copies (>= 2)")
    p.add_argument("--stores", help="comma-separated store ids (default auto)")
    p.add_argument("--store-latency-ns", type=int, default=250)
    p.add_argument("--attacker-stores", help="comma-separated store ids the attacker rewrites")
    p.add_argument("--attacker-fraction", type=float, default=1.0)
    p.add_argument("--attacker-delay-ns", type=int, default=0)
    p.add_argument("--attacker-rule", choices=tuple(REWRITE_RULES), default="chsh_overwrite")
    p.add_argument("--attacker-seed", type=int, default=0)
    p.add_argument("--out-clean", help="write the post-exclusion log here")
    p.add_argument("--out-exclusions", help="write excluded trial ids here")
    p.add_argument("--out-cloned", help="write the cloned log (with copy snapshots) here")
    p.set_defaults(func=cmd_clone_verify)

    p = sub.add_parser("layout-check", help="validate spacelike separations of a layout file")
    p.add_argument("--layout", required=True)
    p.add_argument("--c-override", type=float, help="use this signal speed instead of the file's c")
    p.set_defaults(func=cmd_layout_check)

    p = sub.add_parser("vacuum-check", help="classify an invariant correlator against realism")
    p.add_argument("--xi", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--p", required=True, help="four-vector p0,p1,p2,p3")
    p.add_argument("--conservation", action="store_true",
                   help="also check charge-conservation transversality (spacelike p)")
    p.set_defaults(func=cmd_vacuum_check)

    p = sub.add_parser("report", help="render summary tables and figures for a log")
    p.add_argument("--input", required=True, help="event log")
    p.add_argument("--outdir", required=True)
    p.add_argument("--bin-width-ns", type=int, default=4)
    p.add_argument("--layout", help="also render a spacetime diagram of this layout")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        # parse-type failures take precedence even when they subclass ValueError
        if isinstance(exc, _PARSE_ERRORS):
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _PARSE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
