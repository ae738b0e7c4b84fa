"""Bundled published count tables and shipped example layouts.

The counts are literals from the loophole-free experiments' public numbers:
Delft heralding counts (with and without the coincidence time window), NIST
detection marginals (totals unpublished; comparisons assume a documented
per-setting trial total), and the Munich +/- pair counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .counts import CountsTable

NIST_ASSUMED_TOTAL_PER_SETTING = 50_000_000  # totals not published; z is
# insensitive to this choice once totals >> counts (Poisson limit |z|=2.81)


@dataclass(frozen=True)
class BundledDataset:
    name: str
    counts: CountsTable
    description: str
    assumed_total_per_setting: int | None = None


_RAW = {
    "delft_c_counts": (
        {("C", (1, 4), 1): 79, ("C", (2, 4), 1): 51},
        "Delft heralding counts N(C=1) inside the coincidence window",
        None,
    ),
    "delft_c_counts_nowindow": (
        {("C", (1, 4), 1): 218, ("C", (2, 4), 1): 159},
        "Delft heralding counts N(C=1) with the time window removed",
        None,
    ),
    "nist_a_marginals": (
        {("A", (1, 3), 1): 502339, ("A", (2, 3), 1): 505163},
        "NIST detection counts N(A=1) outside the peak region",
        NIST_ASSUMED_TOTAL_PER_SETTING,
    ),
    "munich_ab_counts": (
        {
            ("AB", (2, 3), 1): 251, ("AB", (2, 3), -1): 1012,
            ("AB", (2, 4), 1): 932, ("AB", (2, 4), -1): 242,
        },
        "Munich +/- pair counts N(AB=+/-) for setting pairs (2,3) and (2,4)",
        None,
    ),
}


def dataset_names() -> tuple[str, ...]:
    return tuple(sorted(_RAW))


def bundled_dataset(name: str) -> BundledDataset:
    """A fresh copy of one bundled dataset (the literals stay immutable)."""
    try:
        entries, description, assumed = _RAW[name]
    except KeyError:
        raise KeyError(f"unknown dataset {name!r}; available: {dataset_names()}") from None
    return BundledDataset(name, CountsTable(dict(entries), source=name), description, assumed)


def example_layout_path(name: str) -> Path:
    """Filesystem path of a shipped example layout file."""
    ref = resources.files("belllab").joinpath("data", "layouts", f"{name}.layout")
    with resources.as_file(ref) as path:
        if not path.exists():
            raise KeyError(f"no shipped layout named {name!r}")
        return Path(path)
