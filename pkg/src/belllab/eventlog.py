"""Trial records, event logs, clone snapshots, and their line-delimited files.

One trial per line, tab separated, with a single header line carrying the
schema version, generator, seed, config hash and the exact field order.
Missing optional values are written as ".". Writes are atomic
(write-temp-then-rename), so concurrent invocations on distinct outputs are
safe and a crashed run never leaves a truncated log behind.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

LOG_SCHEMA_VERSION = 1
LOG_HEADER_PREFIX = "#belllab-log"
MANIFEST_SCHEMA_VERSION = 1

SETTINGS_A = (1, 2)
SETTINGS_B = (3, 4)
OUTCOMES_AB = (-1, 0, 1)
OUTCOMES_C = (0, 1)

BASE_FIELDS = (
    "trial_id", "setting_a", "setting_b", "outcome_a", "outcome_b",
    "outcome_c", "timetag_a", "timetag_b", "timetag_c",
)


class LogFormatError(ValueError):
    """Malformed event-log file."""


@dataclass(frozen=True, slots=True)
class TrialRecord:
    """One trial: settings, outcomes, nanosecond time tags, optional heralding."""

    trial_id: int
    setting_a: int
    setting_b: int
    outcome_a: int
    outcome_b: int
    timetag_a: int
    timetag_b: int
    outcome_c: int | None = None
    timetag_c: int | None = None
    tampered: bool = False

    def __post_init__(self):
        if self.setting_a not in SETTINGS_A:
            raise ValueError(f"setting_a must be in {SETTINGS_A}, got {self.setting_a}")
        if self.setting_b not in SETTINGS_B:
            raise ValueError(f"setting_b must be in {SETTINGS_B}, got {self.setting_b}")
        if self.outcome_a not in OUTCOMES_AB or self.outcome_b not in OUTCOMES_AB:
            raise ValueError(f"outcomes must be in {OUTCOMES_AB}")
        if self.outcome_c is not None and self.outcome_c not in OUTCOMES_C:
            raise ValueError(f"outcome_c must be in {OUTCOMES_C} or absent")


@dataclass(frozen=True, slots=True)
class CopySnapshot:
    """One stored copy of a readout: outcomes, their time tags, and the store time."""

    store_id: str
    outcome_a: int
    outcome_b: int
    timetag_a: int
    timetag_b: int
    stored_at: int


@dataclass(frozen=True, slots=True)
class ClonedRecord:
    """A trial plus m copy snapshots written to logically independent stores."""

    base: TrialRecord
    copies: tuple[CopySnapshot, ...]

    def __post_init__(self):
        if len(self.copies) < 1:
            raise ValueError("a cloned record needs at least one copy")
        stores = [c.store_id for c in self.copies]
        if len(set(stores)) != len(stores):
            raise ValueError("copy store ids must be distinct")

    @property
    def store_ids(self) -> tuple[str, ...]:
        return tuple(c.store_id for c in self.copies)

    @property
    def final_timetag(self) -> int:
        return max(c.stored_at for c in self.copies)

    def unanimous(self) -> bool:
        first = self.copies[0]
        return all(
            (c.outcome_a, c.outcome_b, c.timetag_a, c.timetag_b)
            == (first.outcome_a, first.outcome_b, first.timetag_a, first.timetag_b)
            for c in self.copies[1:]
        )


@dataclass
class LogMeta:
    generator: str
    seed: int
    config_hash: str
    n_trials: int
    schema_version: int = LOG_SCHEMA_VERSION
    reveal_truth: bool = False


@dataclass
class EventLog:
    meta: LogMeta
    records: list[TrialRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)


# ---------------------------------------------------------------------------
# serialization


def atomic_write_text(path: Path, text: str) -> None:
    """Write-temp-then-rename so readers never observe a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.chmod(tmp, 0o644)  # mkstemp defaults to 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _opt(value) -> str:
    return "." if value is None else str(value)


def _parse_opt_int(token: str) -> int | None:
    return None if token == "." else int(token)


def _log_fields(meta: LogMeta) -> tuple[str, ...]:
    return BASE_FIELDS + (("tampered",) if meta.reveal_truth else ())


def _header_line(meta: LogMeta, fields: tuple[str, ...]) -> str:
    return (
        f"{LOG_HEADER_PREFIX} v={meta.schema_version} generator={meta.generator} "
        f"seed={meta.seed} config={meta.config_hash or '-'} n={meta.n_trials} "
        f"fields={','.join(fields)}"
    )


def _record_tokens(rec: TrialRecord, reveal_truth: bool) -> list[str]:
    tokens = [
        str(rec.trial_id), str(rec.setting_a), str(rec.setting_b),
        str(rec.outcome_a), str(rec.outcome_b), _opt(rec.outcome_c),
        str(rec.timetag_a), str(rec.timetag_b), _opt(rec.timetag_c),
    ]
    if reveal_truth:
        tokens.append("1" if rec.tampered else "0")
    return tokens


def format_log(log: EventLog) -> str:
    fields = _log_fields(log.meta)
    lines = [_header_line(log.meta, fields)]
    for rec in log.records:
        lines.append("\t".join(_record_tokens(rec, log.meta.reveal_truth)))
    return "\n".join(lines) + "\n"


def _parse_header(line: str) -> tuple[LogMeta, tuple[str, ...]]:
    if not line.startswith(LOG_HEADER_PREFIX):
        raise LogFormatError(f"missing {LOG_HEADER_PREFIX} header line")
    attrs = {}
    for token in line.split()[1:]:
        key, _, value = token.partition("=")
        attrs[key] = value
    try:
        fields = tuple(attrs["fields"].split(","))
        meta = LogMeta(
            generator=attrs["generator"],
            seed=int(attrs["seed"]),
            config_hash="" if attrs.get("config", "-") == "-" else attrs["config"],
            n_trials=int(attrs["n"]),
            schema_version=int(attrs["v"]),
            reveal_truth="tampered" in fields,
        )
    except (KeyError, ValueError) as exc:
        raise LogFormatError(f"bad header line: {exc}") from exc
    return meta, fields


def _parse_record(tokens: list[str], fields: tuple[str, ...]) -> TrialRecord:
    if len(tokens) != len(fields):
        raise ValueError(f"expected {len(fields)} fields, got {len(tokens)}")
    values = dict(zip(fields, tokens))
    return TrialRecord(
        trial_id=int(values["trial_id"]),
        setting_a=int(values["setting_a"]),
        setting_b=int(values["setting_b"]),
        outcome_a=int(values["outcome_a"]),
        outcome_b=int(values["outcome_b"]),
        outcome_c=_parse_opt_int(values["outcome_c"]),
        timetag_a=int(values["timetag_a"]),
        timetag_b=int(values["timetag_b"]),
        timetag_c=_parse_opt_int(values["timetag_c"]),
        tampered=values.get("tampered", "0") == "1",
    )


def parse_log(text: str, tolerate_malformed: bool = False) -> tuple[EventLog, list[tuple[int, str]]]:
    """Parse a log; returns (log, skipped) where skipped lists (lineno, reason).

    With ``tolerate_malformed`` false any bad record raises; otherwise bad
    records are skipped and reported, never silently dropped.
    """
    lines = text.splitlines()
    if not lines:
        raise LogFormatError("empty file")
    meta, fields = _parse_header(lines[0])
    records: list[TrialRecord] = []
    skipped: list[tuple[int, str]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            records.append(_parse_record(line.split("\t"), fields))
        except ValueError as exc:
            if not tolerate_malformed:
                raise LogFormatError(f"line {lineno}: {exc}") from exc
            skipped.append((lineno, str(exc)))
    return EventLog(meta, records), skipped


def read_log(path: str | Path, tolerate_malformed: bool = False) -> tuple[EventLog, list[tuple[int, str]]]:
    return parse_log(Path(path).read_text(), tolerate_malformed)


def write_log(log: EventLog, path: str | Path) -> None:
    atomic_write_text(Path(path), format_log(log))


# cloned logs carry per-copy snapshot columns after the base fields

_COPY_FIELDS = ("store", "outcome_a", "outcome_b", "timetag_a", "timetag_b", "stored_at")


def format_cloned_log(meta: LogMeta, cloned: list[ClonedRecord]) -> str:
    m = len(cloned[0].copies) if cloned else 0
    fields = list(_log_fields(meta))
    for k in range(m):
        fields.extend(f"copy{k}_{name}" for name in _COPY_FIELDS)
    lines = [_header_line(meta, tuple(fields))]
    for rec in cloned:
        if len(rec.copies) != m:
            raise ValueError("all cloned records must carry the same number of copies")
        tokens = _record_tokens(rec.base, meta.reveal_truth)
        for c in rec.copies:
            tokens.extend([c.store_id, str(c.outcome_a), str(c.outcome_b),
                           str(c.timetag_a), str(c.timetag_b), str(c.stored_at)])
        lines.append("\t".join(tokens))
    return "\n".join(lines) + "\n"


def parse_cloned_log(text: str) -> tuple[LogMeta, list[ClonedRecord]]:
    lines = text.splitlines()
    if not lines:
        raise LogFormatError("empty file")
    meta, fields = _parse_header(lines[0])
    base_fields = _log_fields(meta)
    n_base = len(base_fields)
    copy_width = len(_COPY_FIELDS)
    if (len(fields) - n_base) % copy_width:
        raise LogFormatError("header fields do not contain whole copy snapshots")
    m = (len(fields) - n_base) // copy_width
    cloned: list[ClonedRecord] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        tokens = line.split("\t")
        if len(tokens) != len(fields):
            raise LogFormatError(f"line {lineno}: expected {len(fields)} fields, got {len(tokens)}")
        try:
            base = _parse_record(tokens[:n_base], base_fields)
            copies = []
            for k in range(m):
                chunk = tokens[n_base + k * copy_width: n_base + (k + 1) * copy_width]
                copies.append(CopySnapshot(chunk[0], int(chunk[1]), int(chunk[2]),
                                           int(chunk[3]), int(chunk[4]), int(chunk[5])))
            cloned.append(ClonedRecord(base, tuple(copies)))
        except ValueError as exc:
            raise LogFormatError(f"line {lineno}: {exc}") from exc
    return meta, cloned


def write_cloned_log(meta: LogMeta, cloned: list[ClonedRecord], path: str | Path) -> None:
    atomic_write_text(Path(path), format_cloned_log(meta, cloned))


def read_cloned_log(path: str | Path) -> tuple[LogMeta, list[ClonedRecord]]:
    return parse_cloned_log(Path(path).read_text())


# ---------------------------------------------------------------------------
# run manifests


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def dict_hash(data) -> str:
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()


@dataclass
class RunManifest:
    """Sidecar provenance for a simulated log; the hash covers every config field."""

    config_hash: str
    seed: int
    generator: str
    created_utc: str
    versions: dict[str, str]
    schema_version: int = MANIFEST_SCHEMA_VERSION

    @classmethod
    def create(cls, config_hash: str, seed: int, generator: str) -> "RunManifest":
        import matplotlib
        import numpy
        import scipy

        from . import __version__

        return cls(
            config_hash=config_hash,
            seed=seed,
            generator=generator,
            created_utc=datetime.now(timezone.utc).isoformat(),
            versions={
                "belllab": __version__,
                "numpy": numpy.__version__,
                "scipy": scipy.__version__,
                "matplotlib": matplotlib.__version__,
            },
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": self.schema_version,
                "config_hash": self.config_hash,
                "seed": self.seed,
                "generator": self.generator,
                "created_utc": self.created_utc,
                "versions": self.versions,
            },
            indent=2,
            sort_keys=True,
        ) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        data = json.loads(text)
        return cls(
            config_hash=data["config_hash"],
            seed=int(data["seed"]),
            generator=data["generator"],
            created_utc=data["created_utc"],
            versions=dict(data["versions"]),
            schema_version=int(data["schema_version"]),
        )


def write_manifest(manifest: RunManifest, path: str | Path) -> None:
    atomic_write_text(Path(path), manifest.to_json())
