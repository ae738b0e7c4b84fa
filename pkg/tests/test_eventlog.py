import json
import os

import pytest

from belllab import sim
from belllab.counts import CountsTable, format_counts, parse_counts, CountsFormatError
from belllab.eventlog import (ClonedRecord, CopySnapshot, EventLog, LogFormatError,
                              LogMeta, RunManifest, TrialRecord, atomic_write_text,
                              format_cloned_log, format_log, parse_cloned_log,
                              parse_log, dict_hash)


def small_log(reveal=False):
    meta = LogMeta(generator="lhv", seed=7, config_hash="abc123", n_trials=3,
                   reveal_truth=reveal)
    records = [
        TrialRecord(0, 1, 3, 1, -1, 1500, 1502),
        # ground-truth flags belong only in reveal-truth logs
        TrialRecord(1, 2, 4, -1, 0, 1510, 1498, tampered=reveal),
        TrialRecord(2, 1, 4, 0, 1, 1500, 1500, outcome_c=1, timetag_c=900),
    ]
    return EventLog(meta, records)


def test_trial_record_validation():
    with pytest.raises(ValueError, match="setting_a"):
        TrialRecord(0, 3, 3, 1, 1, 0, 0)
    with pytest.raises(ValueError, match="setting_b"):
        TrialRecord(0, 1, 1, 1, 1, 0, 0)
    with pytest.raises(ValueError, match="outcomes"):
        TrialRecord(0, 1, 3, 2, 1, 0, 0)
    with pytest.raises(ValueError, match="outcome_c"):
        TrialRecord(0, 1, 3, 1, 1, 0, 0, outcome_c=-1)


def test_log_round_trip_field_for_field():
    log = small_log()
    text = format_log(log)
    parsed, skipped = parse_log(text)
    assert skipped == []
    assert parsed.meta == log.meta
    assert parsed.records == log.records


def test_log_round_trip_with_truth_column():
    log = small_log(reveal=True)
    parsed, _ = parse_log(format_log(log))
    assert parsed.records[1].tampered is True
    assert parsed.records == log.records


def test_default_log_strips_truth_column():
    meta = LogMeta(generator="lhv", seed=7, config_hash="abc", n_trials=1)
    log = EventLog(meta, [TrialRecord(0, 1, 3, 1, -1, 10, 10, tampered=True)])
    text = format_log(log)
    assert "tampered" not in text.splitlines()[0]
    parsed, _ = parse_log(text)
    # the oracle flag is stripped, not leaked
    assert all(not rec.tampered for rec in parsed.records)


def test_parse_log_strict_raises_on_malformed_line():
    text = format_log(small_log())
    broken = text.replace("\n1\t2", "\n1\tbad", 1)
    with pytest.raises(LogFormatError, match="line 3"):
        parse_log(broken)


def test_parse_log_tolerant_skips_and_reports():
    text = format_log(small_log())
    lines = text.splitlines()
    lines.insert(2, "not\ta\trecord")
    log, skipped = parse_log("\n".join(lines) + "\n", tolerate_malformed=True)
    assert len(log.records) == 3
    assert len(skipped) == 1
    assert skipped[0][0] == 3


def test_parse_log_requires_header():
    with pytest.raises(LogFormatError, match="header"):
        parse_log("1\t2\t3\n")


def test_cloned_log_round_trip():
    log = small_log()
    cloned = sim.clone_records(log, 2, ("left", "right"), store_latency_ns=10)
    text = format_cloned_log(log.meta, cloned)
    meta, parsed = parse_cloned_log(text)
    assert meta == log.meta
    assert parsed == cloned


def test_cloned_record_invariants():
    rec = TrialRecord(0, 1, 3, 1, -1, 100, 100)
    snap = CopySnapshot("s1", 1, -1, 100, 100, 150)
    with pytest.raises(ValueError, match="distinct"):
        ClonedRecord(rec, (snap, snap))
    cloned = ClonedRecord(rec, (snap, CopySnapshot("s2", 1, -1, 100, 100, 200)))
    assert cloned.final_timetag == 200
    assert cloned.store_ids == ("s1", "s2")
    assert cloned.unanimous()


def test_atomic_write_replaces_existing_file(tmp_path):
    target = tmp_path / "out.txt"
    target.write_text("old")
    atomic_write_text(target, "new")
    assert target.read_text() == "new"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]  # no temp residue


# ---------------------------------------------------------------------------
# counts files


def test_counts_round_trip():
    table = CountsTable(source="unit")
    table.add("C", (1, 4), 1, 79)
    table.add("AB", (2, 3), (1, -1), 12)
    table.add("AB", (2, 3), -1, 5)
    parsed = parse_counts(format_counts(table))
    assert parsed.entries == table.entries
    assert parsed.source == "unit"


def test_counts_reject_negative():
    with pytest.raises(ValueError, match="negative"):
        CountsTable({("A", (1, 3), 1): -1})


def test_counts_parse_errors():
    with pytest.raises(CountsFormatError, match="header"):
        parse_counts("A\t1\t3\t1\t5\n")
    with pytest.raises(CountsFormatError, match="line 2"):
        parse_counts("#belllab-counts v=1 source=x\nA\t1\t3\t1\n")


def test_counts_accessors():
    table = CountsTable(source="unit")
    table.add("A", (1, 3), 1, 10)
    table.add("A", (1, 3), -1, 30)
    table.add("A", (1, 4), 1, 7)
    assert table.total("A", (1, 3)) == 40
    assert table.outcomes("A", (1, 3)) == {1: 10, -1: 30}
    assert table.setting_pairs("A") == ((1, 3), (1, 4))
    assert table.parties() == ("A",)


# ---------------------------------------------------------------------------
# manifests and config hashing


def test_manifest_json_round_trip():
    manifest = RunManifest.create("deadbeef", 42, "quantum")
    back = RunManifest.from_json(manifest.to_json())
    assert back == manifest
    assert "belllab" in manifest.versions


def test_config_hash_covers_every_field():
    base = sim.SimConfig(generator="quantum", n_trials=100, seed=1)
    base_hash = sim.config_hash(base)
    variants = [
        sim.SimConfig(generator="lhv", n_trials=100, seed=1),
        sim.SimConfig(generator="quantum", n_trials=101, seed=1),
        sim.SimConfig(generator="quantum", n_trials=100, seed=2),
        sim.SimConfig(generator="quantum", n_trials=100, seed=1, angles=(0.1, 1.0, 2.0, 3.0)),
        sim.SimConfig(generator="quantum", n_trials=100, seed=1, efficiency=0.5),
        sim.SimConfig(generator="quantum", n_trials=100, seed=1, swapping=True),
        sim.SimConfig(generator="quantum", n_trials=100, seed=1,
                      timing=sim.TimingModel(jitter_ns=5)),
        sim.SimConfig(generator="hacked_lhv", n_trials=100, seed=1,
                      hacker=sim.HackerConfig(delay_ns=5000, tamper_fraction=0.5)),
        sim.SimConfig(generator="quantum", n_trials=100, seed=1,
                      layout=sim.default_chsh_layout(half_distance_m=700.0)),
    ]
    hashes = {sim.config_hash(v) for v in variants}
    assert base_hash not in hashes
    assert len(hashes) == len(variants)
    # and the hash is stable for an identical config
    again = sim.SimConfig(generator="quantum", n_trials=100, seed=1)
    assert sim.config_hash(again) == base_hash


def test_dict_hash_is_canonical():
    assert dict_hash({"a": 1, "b": 2}) == dict_hash({"b": 2, "a": 1})
