"""Lightcone geometry and experiment-layout validation.

Every readout-completion event of one party must be spacelike separated from
every remote choice event (r > c*|dt|); the lightlike boundary conservatively
counts as *not* separated, since a boundary signal could still connect them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

SPEED_OF_LIGHT = 299792458.0  # m/s

TIMELIKE = "timelike"
SPACELIKE = "spacelike"
LIGHTLIKE = "lightlike"

LIGHTCONE_RTOL = 1e-9  # relative tolerance for the lightlike boundary
PARTIES = ("A", "B", "C")


class LayoutError(ValueError):
    """Configuration problem in a spacetime layout (missing label, bad value)."""


class LayoutParseError(ValueError):
    """Malformed layout file."""


@dataclass(frozen=True)
class SpacetimeEvent:
    """A labeled (t, x, y, z) point; t in seconds, positions in meters."""

    label: str
    party: str
    t: float
    pos: tuple[float, float, float]

    def __post_init__(self):
        if self.party not in PARTIES:
            raise LayoutError(f"event {self.label!r}: party must be one of {PARTIES}, got {self.party!r}")
        pos = tuple(float(x) for x in self.pos)
        if len(pos) != 3:
            raise LayoutError(f"event {self.label!r}: position must have 3 components")
        coords = (float(self.t),) + pos
        if not all(math.isfinite(x) for x in coords):
            raise LayoutError(f"event {self.label!r}: coordinates must be finite")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "pos", pos)


@dataclass(frozen=True)
class LayoutConfig:
    """Events plus the list of (label, label) pairs that must be spacelike."""

    events: tuple[SpacetimeEvent, ...]
    required_separations: tuple[tuple[str, str], ...]
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        events = tuple(self.events)
        labels = [e.label for e in events]
        if len(set(labels)) != len(labels):
            raise LayoutError("event labels must be unique")
        if not self.c > 0:
            raise LayoutError(f"signal speed c must be positive, got {self.c}")
        required = tuple((str(a), str(b)) for a, b in self.required_separations)
        for a, b in required:
            for label in (a, b):
                if label not in labels:
                    raise LayoutError(f"required pair references unknown event {label!r}")
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "required_separations", required)

    def event(self, label: str) -> SpacetimeEvent:
        for e in self.events:
            if e.label == label:
                return e
        raise LayoutError(f"no event labeled {label!r}")

    def with_event_shifted(self, label: str, delay_s: float) -> "LayoutConfig":
        """Copy of the layout with one event's time tag pushed later by ``delay_s``."""
        shifted = effective_event_shift(self.event(label), delay_s)
        events = tuple(shifted if e.label == label else e for e in self.events)
        return LayoutConfig(events, self.required_separations, self.c)


@dataclass(frozen=True)
class PairCheck:
    label_a: str
    label_b: str
    interval: str
    margin_m: float  # r - c*|dt|; positive means spacelike


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[PairCheck, ...]
    passed: bool
    c: float

    def violated_pairs(self) -> tuple[tuple[str, str], ...]:
        return tuple((ck.label_a, ck.label_b) for ck in self.checks if ck.interval != SPACELIKE)


def separation(e1: SpacetimeEvent, e2: SpacetimeEvent) -> tuple[float, float]:
    """(spatial distance r, |time difference|) between two events."""
    r = math.dist(e1.pos, e2.pos)
    return r, abs(e1.t - e2.t)


def interval_class(e1: SpacetimeEvent, e2: SpacetimeEvent, c: float = SPEED_OF_LIGHT) -> str:
    """Classify the interval: spacelike iff r > c|dt|, with a relative lightlike band."""
    r, dt = separation(e1, e2)
    ct = c * dt
    tol = LIGHTCONE_RTOL * max(r, ct, 1.0)
    if abs(r - ct) <= tol:
        return LIGHTLIKE
    return SPACELIKE if r > ct else TIMELIKE


def validate_layout(layout: LayoutConfig) -> ValidationReport:
    """Check every required pair; the layout passes iff all pairs are spacelike."""
    checks = []
    for label_a, label_b in layout.required_separations:
        e1, e2 = layout.event(label_a), layout.event(label_b)
        r, dt = separation(e1, e2)
        checks.append(PairCheck(label_a, label_b, interval_class(e1, e2, layout.c), r - layout.c * dt))
    passed = all(ck.interval == SPACELIKE for ck in checks)
    return ValidationReport(tuple(checks), passed, layout.c)


def effective_event_shift(event: SpacetimeEvent, delay_s: float) -> SpacetimeEvent:
    """Same event completed ``delay_s`` seconds later (a tampering hypothesis)."""
    if delay_s < 0:
        raise ValueError(f"delay must be nonnegative, got {delay_s}")
    return replace(event, t=event.t + delay_s)


def spacelike_margin_delay(layout: LayoutConfig, label_a: str, label_b: str) -> float:
    """Delay (seconds) on either event that moves the pair onto the light cone."""
    e1, e2 = layout.event(label_a), layout.event(label_b)
    r, dt = separation(e1, e2)
    return max(r / layout.c - dt, 0.0)


# ---------------------------------------------------------------------------
# stock layouts


def default_chsh_layout(half_distance_m: float = 600.0, readout_s: float = 1.5e-6,
                        c: float = SPEED_OF_LIGHT) -> LayoutConfig:
    """Two-party layout: choices at t=0 at +/-d, readouts done at t=readout_s."""
    d = float(half_distance_m)
    events = (
        SpacetimeEvent("choice_a", "A", 0.0, (-d, 0.0, 0.0)),
        SpacetimeEvent("choice_b", "B", 0.0, (d, 0.0, 0.0)),
        SpacetimeEvent("readout_A_done", "A", readout_s, (-d, 0.0, 0.0)),
        SpacetimeEvent("readout_B_done", "B", readout_s, (d, 0.0, 0.0)),
    )
    required = (("choice_b", "readout_A_done"), ("choice_a", "readout_B_done"))
    return LayoutConfig(events, required, c)


def default_swapping_layout(half_distance_m: float = 600.0, readout_s: float = 1.5e-6,
                            herald_s: float = 1.0e-6, c: float = SPEED_OF_LIGHT) -> LayoutConfig:
    """Three-party layout with the heralding station C midway between A and B."""
    base = default_chsh_layout(half_distance_m, readout_s, c)
    events = base.events + (
        SpacetimeEvent("choice_c", "C", 0.0, (0.0, 0.0, 0.0)),
        SpacetimeEvent("readout_C_done", "C", herald_s, (0.0, 0.0, 0.0)),
    )
    required = base.required_separations + (
        ("choice_a", "readout_C_done"),
        ("choice_b", "readout_C_done"),
    )
    return LayoutConfig(events, required, c)


# ---------------------------------------------------------------------------
# layout files: line-delimited key=value records


def format_layout(layout: LayoutConfig) -> str:
    lines = ["#belllab-layout v=1", f"c={layout.c!r}"]
    for e in layout.events:
        lines.append(
            f"event label={e.label} party={e.party} t={e.t!r} "
            f"x={e.pos[0]!r} y={e.pos[1]!r} z={e.pos[2]!r}"
        )
    for a, b in layout.required_separations:
        lines.append(f"require a={a} b={b}")
    return "\n".join(lines) + "\n"


def _kv_fields(tokens: Sequence[str], lineno: int) -> dict[str, str]:
    fields = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep:
            raise LayoutParseError(f"line {lineno}: expected key=value, got {token!r}")
        fields[key] = value
    return fields


def parse_layout(text: str) -> LayoutConfig:
    events: list[SpacetimeEvent] = []
    required: list[tuple[str, str]] = []
    c = SPEED_OF_LIGHT
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        kind = tokens[0]
        try:
            if kind.startswith("c="):
                c = float(kind[2:])
            elif kind == "event":
                fields = _kv_fields(tokens[1:], lineno)
                events.append(SpacetimeEvent(
                    fields["label"], fields["party"], float(fields["t"]),
                    (float(fields["x"]), float(fields["y"]), float(fields["z"])),
                ))
            elif kind == "require":
                fields = _kv_fields(tokens[1:], lineno)
                required.append((fields["a"], fields["b"]))
            else:
                raise LayoutParseError(f"line {lineno}: unknown record kind {kind!r}")
        except (KeyError, ValueError) as exc:
            if isinstance(exc, LayoutParseError):
                raise
            raise LayoutParseError(f"line {lineno}: {exc}") from exc
    try:
        return LayoutConfig(tuple(events), tuple(required), c)
    except LayoutError as exc:
        raise LayoutParseError(str(exc)) from exc


def read_layout_file(path: str | Path) -> LayoutConfig:
    return parse_layout(Path(path).read_text())


def write_layout_file(layout: LayoutConfig, path: str | Path) -> None:
    from .eventlog import atomic_write_text

    atomic_write_text(Path(path), format_layout(layout))


def layout_to_dict(layout: LayoutConfig) -> dict:
    """JSON-ready form, also used for config hashing."""
    return {
        "c": layout.c,
        "events": [
            {"label": e.label, "party": e.party, "t": e.t,
             "x": e.pos[0], "y": e.pos[1], "z": e.pos[2]}
            for e in layout.events
        ],
        "required": [list(pair) for pair in layout.required_separations],
    }


def layout_from_dict(data: dict) -> LayoutConfig:
    events = tuple(
        SpacetimeEvent(d["label"], d["party"], float(d["t"]),
                       (float(d["x"]), float(d["y"]), float(d["z"])))
        for d in data.get("events", ())
    )
    required = tuple((str(a), str(b)) for a, b in data.get("required", ()))
    return LayoutConfig(events, required, float(data.get("c", SPEED_OF_LIGHT)))
