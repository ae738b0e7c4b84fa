import json
from pathlib import Path

import pytest

from belllab.cli import main
from belllab.datasets import example_layout_path
from belllab.eventlog import RunManifest, read_log


def write_config(tmp_path, **overrides):
    config = {"generator": "quantum", "n_trials": 400, "seed": 5}
    config.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


def test_simulate_writes_log_and_manifest(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "run.log"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    log, skipped = read_log(out)
    assert len(log.records) == 400
    assert skipped == []
    manifest = RunManifest.from_json((tmp_path / "run.log.manifest.json").read_text())
    assert manifest.generator == "quantum"
    assert manifest.config_hash == log.meta.config_hash
    assert "config hash" in capsys.readouterr().out


def test_simulate_same_config_gives_identical_hash_and_bytes(tmp_path):
    cfg = write_config(tmp_path)
    out1, out2 = tmp_path / "a.log", tmp_path / "b.log"
    main(["simulate", "--config", str(cfg), "--out", str(out1)])
    main(["simulate", "--config", str(cfg), "--out", str(out2)])
    assert out1.read_bytes() == out2.read_bytes()


def test_simulate_bad_json_is_parse_failure(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x.log")]) == 1


def test_simulate_missing_config_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "none.json"),
                 "--out", str(tmp_path / "x.log")]) == 1


def test_simulate_validation_errors_name_the_field(tmp_path, capsys):
    cfg = write_config(tmp_path, generator="hacked_lhv")  # no hacker block
    rc = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x.log")])
    assert rc == 2
    assert "hacker" in capsys.readouterr().err

    cfg2 = write_config(tmp_path, efficiency=2.0)
    rc = main(["simulate", "--config", str(cfg2), "--out", str(tmp_path / "x.log")])
    assert rc == 2
    assert "efficiency" in capsys.readouterr().err

    cfg3 = write_config(tmp_path, typo_field=1)
    rc = main(["simulate", "--config", str(cfg3), "--out", str(tmp_path / "x.log")])
    assert rc == 2
    assert "typo_field" in capsys.readouterr().err


def test_simulate_reveal_truth_adds_column(tmp_path):
    cfg = write_config(tmp_path, generator="hacked_lhv", n_trials=50,
                       hacker={"delay_ns": 3000, "tamper_fraction": 1.0})
    out = tmp_path / "hacked.log"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--reveal-truth"]) == 0
    header = out.read_text().splitlines()[0]
    assert "tampered" in header
    log, _ = read_log(out)
    assert all(rec.tampered for rec in log.records)


def test_simulate_with_layout_file(tmp_path):
    cfg = write_config(tmp_path, layout=str(example_layout_path("chsh_pass")))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "ok.log")]) == 0
    cfg_bad = write_config(tmp_path, layout=str(example_layout_path("chsh_fail")))
    assert main(["simulate", "--config", str(cfg_bad), "--out", str(tmp_path / "no.log")]) == 2


def test_audit_bundled_dataset_reports_published_statistic(capsys):
    assert main(["audit", "--dataset", "delft_c_counts"]) == 0
    out = capsys.readouterr().out
    row = next(line for line in out.splitlines() if "rate(C=1|1,4)=rate(C=1|2,4)" in line)
    assert "2.4557" in row or "2.45576" in row
    assert "FLAG" in row


def test_audit_log_all_suites(tmp_path, capsys):
    cfg = write_config(tmp_path, n_trials=4000, timing={"jitter_ns": 40})
    out = tmp_path / "run.log"
    main(["simulate", "--config", str(cfg), "--out", str(out)])
    capsys.readouterr()  # drop the simulate chatter
    machine = tmp_path / "audit.tsv"
    text_out = tmp_path / "audit.txt"
    rc = main(["audit", "--input", str(out), "--suite", "all",
               "--out", str(machine), "--out-text", str(text_out)])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "nosignaling:" in stdout
    assert "binned-ratio:" in stdout
    assert "correlator:" in stdout
    assert machine.read_text().startswith("#belllab-audit")
    assert text_out.read_text() == stdout


def test_audit_exit_zero_even_when_flags_raised(capsys):
    # auditing is reporting, not judging
    assert main(["audit", "--dataset", "delft_c_counts_nowindow"]) == 0


def test_audit_counts_file_input(tmp_path, capsys):
    from belllab.counts import write_counts_file
    from belllab.datasets import bundled_dataset

    path = tmp_path / "counts.tsv"
    write_counts_file(bundled_dataset("munich_ab_counts").counts, path)
    assert main(["audit", "--input", str(path), "--suite", "correlator"]) == 0
    assert "|E23|=|E24|" in capsys.readouterr().out


def test_audit_binned_ratio_requires_log(tmp_path, capsys):
    from belllab.counts import write_counts_file
    from belllab.datasets import bundled_dataset

    path = tmp_path / "counts.tsv"
    write_counts_file(bundled_dataset("munich_ab_counts").counts, path)
    assert main(["audit", "--input", str(path), "--suite", "binned-ratio"]) == 1


def test_audit_unreadable_input(tmp_path):
    junk = tmp_path / "junk.txt"
    junk.write_text("hello\n")
    assert main(["audit", "--input", str(junk)]) == 1


def test_clone_verify_flow(tmp_path, capsys):
    cfg = write_config(tmp_path, generator="lhv", n_trials=2000)
    log_path = tmp_path / "run.log"
    main(["simulate", "--config", str(cfg), "--out", str(log_path)])
    clean = tmp_path / "clean.log"
    exclusions = tmp_path / "excl.tsv"
    cloned = tmp_path / "cloned.log"
    rc = main(["clone-verify", "--log", str(log_path), "-m", "2",
               "--attacker-stores", "store-1", "--attacker-fraction", "0.2",
               "--attacker-seed", "11", "--out-clean", str(clean),
               "--out-exclusions", str(exclusions), "--out-cloned", str(cloned)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "exclusion rate" in out
    assert "post-exclusion chsh" in out
    clean_log, _ = read_log(clean)
    excluded_ids = [int(line) for line in exclusions.read_text().splitlines()[1:]]
    assert len(clean_log.records) + len(excluded_ids) == 2000
    from belllab.eventlog import read_cloned_log
    meta, cloned_records = read_cloned_log(cloned)
    assert len(cloned_records) == 2000


def test_clone_verify_single_copy_is_loophole_error(tmp_path, capsys):
    cfg = write_config(tmp_path, generator="lhv", n_trials=50)
    log_path = tmp_path / "run.log"
    main(["simulate", "--config", str(cfg), "--out", str(log_path)])
    rc = main(["clone-verify", "--log", str(log_path), "-m", "1"])
    assert rc == 2
    assert "objectivity loophole open" in capsys.readouterr().err


def test_layout_check_exit_codes(tmp_path, capsys):
    assert main(["layout-check", "--layout", str(example_layout_path("chsh_pass"))]) == 0
    assert main(["layout-check", "--layout", str(example_layout_path("chsh_fail"))]) == 2
    out = capsys.readouterr().out
    assert "FAIL" in out
    bad = tmp_path / "broken.layout"
    bad.write_text("event label=p\n")
    assert main(["layout-check", "--layout", str(bad)]) == 1
    assert main(["layout-check", "--layout", str(tmp_path / "missing.layout")]) == 1


def test_layout_check_c_override_can_rescue_failing_layout(capsys):
    fail = str(example_layout_path("chsh_fail"))
    assert main(["layout-check", "--layout", fail]) == 2
    # light that is 4x faster shrinks c*dt below the 1200 m separation
    assert main(["layout-check", "--layout", fail, "--c-override", "74948114.5"]) == 0


def test_vacuum_check_outputs(capsys):
    assert main(["vacuum-check", "--xi", "0", "--eta", "0", "--p", "0,1,0,0",
                 "--conservation"]) == 0
    out = capsys.readouterr().out
    assert "vanish completely" in out

    assert main(["vacuum-check", "--xi", "1", "--eta", "-0.5", "--p", "1,0,0,0"]) == 0
    assert "admissible" in capsys.readouterr().out

    assert main(["vacuum-check", "--xi", "1", "--eta", "-0.5", "--p", "1,1,0,0"]) == 0
    assert "unclassified" in capsys.readouterr().out

    assert main(["vacuum-check", "--xi", "1", "--eta", "0", "--p", "0,1,0"]) == 1


def test_report_writes_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path, n_trials=3000, timing={"jitter_ns": 30})
    log_path = tmp_path / "run.log"
    main(["simulate", "--config", str(cfg), "--out", str(log_path)])
    outdir = tmp_path / "report"
    rc = main(["report", "--input", str(log_path), "--outdir", str(outdir),
               "--layout", str(example_layout_path("chsh_pass"))])
    assert rc == 0
    assert (outdir / "bell_summary.tsv").exists()
    assert (outdir / "correlators.png").exists()
    assert (outdir / "layout.png").exists()


def test_usage_errors_exit_one(capsys):
    assert main(["no-such-command"]) == 1
    assert main(["simulate"]) == 1  # missing required flags
    assert main([]) == 1
