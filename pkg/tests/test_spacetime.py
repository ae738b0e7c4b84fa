import math

import numpy as np
import pytest

from belllab import spacetime as st


def ev(label, t, x, party="A", y=0.0, z=0.0):
    return st.SpacetimeEvent(label, party, t, (x, y, z))


# ---------------------------------------------------------------------------
# interval classification


def test_interval_class_examples_unit_c():
    assert st.interval_class(ev("a", 0, 0), ev("b", 1, 2), c=1.0) == st.SPACELIKE
    assert st.interval_class(ev("a", 0, 0), ev("b", 2, 1), c=1.0) == st.TIMELIKE
    assert st.interval_class(ev("a", 0, 0), ev("b", 1, 1), c=1.0) == st.LIGHTLIKE


def test_interval_class_is_symmetric():
    rng = np.random.default_rng(5)
    for _ in range(50):
        t1, t2 = rng.uniform(-1e-5, 1e-5, 2)
        p1, p2 = rng.uniform(-1e4, 1e4, (2, 3))
        e1, e2 = ev("a", t1, *p1[:1], y=p1[1], z=p1[2]), ev("b", t2, *p2[:1], y=p2[1], z=p2[2])
        assert st.interval_class(e1, e2) == st.interval_class(e2, e1)


def test_interval_class_translation_invariant():
    rng = np.random.default_rng(6)
    for _ in range(50):
        t1, t2, dt = rng.uniform(-1e-5, 1e-5, 3)
        p1, p2, dp = rng.uniform(-1e4, 1e4, (3, 3))
        e1 = st.SpacetimeEvent("a", "A", t1, tuple(p1))
        e2 = st.SpacetimeEvent("b", "B", t2, tuple(p2))
        f1 = st.SpacetimeEvent("a", "A", t1 + dt, tuple(p1 + dp))
        f2 = st.SpacetimeEvent("b", "B", t2 + dt, tuple(p2 + dp))
        assert st.interval_class(e1, e2) == st.interval_class(f1, f2)


def test_lightlike_boundary_counts_as_not_spacelike():
    layout = st.LayoutConfig(
        (ev("choice_b", 0.0, 600.0, party="B"), ev("readout_A_done", 600.0 / st.SPEED_OF_LIGHT, 0.0)),
        (("choice_b", "readout_A_done"),),
    )
    report = st.validate_layout(layout)
    assert report.checks[0].interval == st.LIGHTLIKE
    assert not report.passed


# ---------------------------------------------------------------------------
# layout validation


def test_default_chsh_layout_passes():
    report = st.validate_layout(st.default_chsh_layout())
    assert report.passed
    assert all(c.margin_m > 0 for c in report.checks)


def test_slow_readout_layout_fails_with_negative_margin():
    report = st.validate_layout(st.default_chsh_layout(readout_s=5.0e-6))
    assert not report.passed
    assert all(c.margin_m < 0 for c in report.checks)


def test_swapping_layout_fails_on_exactly_one_pair_when_c_is_late():
    # push the heralding readout into the A-choice cone only: place C nearer A
    base = st.default_swapping_layout()
    events = []
    for e in base.events:
        if e.label in ("choice_c", "readout_C_done"):
            events.append(st.SpacetimeEvent(e.label, e.party, e.t, (-400.0, 0.0, 0.0)))
        else:
            events.append(e)
    # distance from choice_a (-600) is 200 m; from choice_b (+600) it is 1000 m
    layout = st.LayoutConfig(tuple(events), base.required_separations, base.c)
    report = st.validate_layout(layout)
    violated = report.violated_pairs()
    assert violated == (("choice_a", "readout_C_done"),)
    assert not report.passed


def test_validate_layout_missing_label_is_configuration_error():
    with pytest.raises(st.LayoutError, match="unknown event"):
        st.LayoutConfig((ev("a", 0, 0),), (("a", "ghost"),))


def test_duplicate_labels_rejected():
    with pytest.raises(st.LayoutError, match="unique"):
        st.LayoutConfig((ev("a", 0, 0), ev("a", 1, 1)), ())


def test_party_must_be_known():
    with pytest.raises(st.LayoutError, match="party"):
        st.SpacetimeEvent("x", "D", 0.0, (0.0, 0.0, 0.0))


# ---------------------------------------------------------------------------
# tamper-shift hypotheses


def test_effective_event_shift_zero_is_identity():
    e = ev("readout_A_done", 1.5e-6, -600.0)
    assert st.effective_event_shift(e, 0.0) == e


def test_effective_event_shift_rejects_negative_delay():
    with pytest.raises(ValueError):
        st.effective_event_shift(ev("a", 0, 0), -1e-9)


def test_shift_past_threshold_breaks_spacelike_separation():
    layout = st.default_chsh_layout()
    threshold = st.spacelike_margin_delay(layout, "choice_b", "readout_A_done")
    # oracle: r/c - |dt| from the construction itself
    assert threshold == pytest.approx(1200.0 / st.SPEED_OF_LIGHT - 1.5e-6, rel=1e-12)

    beyond = layout.with_event_shifted("readout_A_done", threshold * 1.5)
    assert st.interval_class(beyond.event("choice_b"), beyond.event("readout_A_done"),
                             layout.c) == st.TIMELIKE
    assert not st.validate_layout(beyond).passed


def test_shift_exactly_to_threshold_is_lightlike():
    layout = st.default_chsh_layout()
    threshold = st.spacelike_margin_delay(layout, "choice_b", "readout_A_done")
    boundary = layout.with_event_shifted("readout_A_done", threshold)
    assert st.interval_class(boundary.event("choice_b"), boundary.event("readout_A_done"),
                             layout.c) == st.LIGHTLIKE


def test_shift_monotonically_degrades_every_passing_layout():
    rng = np.random.default_rng(9)
    for _ in range(20):
        d = rng.uniform(100, 2000)
        readout = rng.uniform(0.1, 0.9) * (2 * d / st.SPEED_OF_LIGHT)
        layout = st.default_chsh_layout(half_distance_m=d, readout_s=readout)
        assert st.validate_layout(layout).passed
        threshold = st.spacelike_margin_delay(layout, "choice_b", "readout_A_done")
        shifted = layout.with_event_shifted("readout_A_done", threshold * 2 + 1e-9)
        assert not st.validate_layout(shifted).passed


# ---------------------------------------------------------------------------
# layout files


def test_layout_round_trip():
    layout = st.default_swapping_layout(half_distance_m=450.0, readout_s=1.1e-6)
    parsed = st.parse_layout(st.format_layout(layout))
    assert parsed == layout


def test_parse_layout_accepts_comments_and_custom_c():
    text = """
# comment line
c=1.0
event label=p party=A t=0 x=0 y=0 z=0
event label=q party=B t=1 x=2 y=0 z=0
require a=p b=q
"""
    layout = st.parse_layout(text)
    assert layout.c == 1.0
    assert st.validate_layout(layout).passed


@pytest.mark.parametrize("bad", [
    "event label=p party=A t=zero x=0 y=0 z=0",
    "event label=p party=A x=0 y=0 z=0",
    "weird label=p",
    "require a=p",
])
def test_parse_layout_rejects_malformed_lines(bad):
    with pytest.raises(st.LayoutParseError):
        st.parse_layout(bad)


def test_layout_dict_round_trip():
    layout = st.default_chsh_layout()
    assert st.layout_from_dict(st.layout_to_dict(layout)) == layout
