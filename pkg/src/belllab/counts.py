"""Setting-conditioned outcome count tables and their on-disk format.

A count table maps (party-or-pair, setting pair, outcome value) to a
nonnegative integer. Outcome values are single ints for one party
("A", "B", "C") and (a, b) int pairs or a +/-1 product for the "AB" pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

OutcomeKey = int | tuple[int, int]
CountKey = tuple[str, tuple[int, int], OutcomeKey]

COUNTS_HEADER_PREFIX = "#belllab-counts"
COUNTS_SCHEMA_VERSION = 1


class CountsFormatError(ValueError):
    """Raised for malformed counts files."""


@dataclass
class CountsTable:
    """Map of (party, (setting_a, setting_b), outcome) -> event count."""

    entries: dict[CountKey, int] = field(default_factory=dict)
    source: str = ""

    def __post_init__(self):
        for key, n in self.entries.items():
            self._check_key(key)
            if int(n) < 0:
                raise ValueError(f"negative count {n} for {key}")

    @staticmethod
    def _check_key(key: CountKey) -> None:
        party, pair, outcome = key
        if not isinstance(party, str):
            raise ValueError(f"party must be a string, got {party!r}")
        if len(pair) != 2:
            raise ValueError(f"setting pair must have two entries, got {pair!r}")

    def add(self, party: str, pair: tuple[int, int], outcome: OutcomeKey, n: int = 1) -> None:
        if n < 0:
            raise ValueError("count increments must be nonnegative")
        key = (party, (int(pair[0]), int(pair[1])), outcome)
        self._check_key(key)
        self.entries[key] = self.entries.get(key, 0) + int(n)

    def get(self, party: str, pair: tuple[int, int], outcome: OutcomeKey) -> int:
        return self.entries.get((party, (int(pair[0]), int(pair[1])), outcome), 0)

    def outcomes(self, party: str, pair: tuple[int, int]) -> dict[OutcomeKey, int]:
        """Outcome -> count map for one party at one setting pair."""
        pair = (int(pair[0]), int(pair[1]))
        return {key[2]: n for key, n in self.entries.items() if key[0] == party and key[1] == pair}

    def total(self, party: str, pair: tuple[int, int]) -> int:
        return sum(self.outcomes(party, pair).values())

    def setting_pairs(self, party: str) -> tuple[tuple[int, int], ...]:
        pairs = {key[1] for key in self.entries if key[0] == party}
        return tuple(sorted(pairs))

    def parties(self) -> tuple[str, ...]:
        return tuple(sorted({key[0] for key in self.entries}))

    def copy(self) -> "CountsTable":
        return CountsTable(dict(self.entries), self.source)


def _format_outcome(outcome: OutcomeKey) -> str:
    if isinstance(outcome, tuple):
        return ",".join(str(int(v)) for v in outcome)
    return str(int(outcome))


def _parse_outcome(token: str) -> OutcomeKey:
    if "," in token:
        parts = token.split(",")
        if len(parts) != 2:
            raise CountsFormatError(f"outcome {token!r} must be one value or a pair")
        return (int(parts[0]), int(parts[1]))
    return int(token)


def format_counts(table: CountsTable) -> str:
    """Line-delimited counts: header, then party/setting_a/setting_b/outcome/count."""
    lines = [f"{COUNTS_HEADER_PREFIX} v={COUNTS_SCHEMA_VERSION} source={table.source or '-'}"]
    for (party, pair, outcome), n in sorted(table.entries.items(), key=lambda kv: (kv[0][0], kv[0][1], str(kv[0][2]))):
        lines.append("\t".join([party, str(pair[0]), str(pair[1]), _format_outcome(outcome), str(n)]))
    return "\n".join(lines) + "\n"


def parse_counts(text: str) -> CountsTable:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(COUNTS_HEADER_PREFIX):
        raise CountsFormatError(f"missing {COUNTS_HEADER_PREFIX} header line")
    source = "-"
    for token in lines[0].split()[1:]:
        key, _, value = token.partition("=")
        if key == "source":
            source = value
    table = CountsTable(source="" if source == "-" else source)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise CountsFormatError(f"line {lineno}: expected 5 tab-separated fields, got {len(fields)}")
        party, sa, sb, outcome, n = fields
        try:
            table.add(party, (int(sa), int(sb)), _parse_outcome(outcome), int(n))
        except ValueError as exc:
            raise CountsFormatError(f"line {lineno}: {exc}") from exc
    return table


def read_counts_file(path: str | Path) -> CountsTable:
    return parse_counts(Path(path).read_text())


def write_counts_file(table: CountsTable, path: str | Path) -> None:
    from .eventlog import atomic_write_text

    atomic_write_text(Path(path), format_counts(table))
