from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from scoreline.exceptions import MissingContextError, RangeError
from scoreline.model import Measure, Note, Part, TimeSignature
from scoreline.timeunits import (
    beat_anchor_div,
    beat_map,
    convert_time,
    fast_beat_unit,
    quarter_map,
    slow_beat_unit,
)


def simple_part(dpq=12):
    part = Part("P1", divs_per_quarter=dpq)
    part.add(TimeSignature(4, 4), 0)
    part.add(Measure(1), 0, 4 * dpq)
    part.add(Note("n1", "C"), 0, 4 * dpq)
    return part


def anacrusis_12_8_part():
    # dpq=2 (eighth = 1 div); pickup of one eighth, then a full 12/8 measure
    part = Part("P1", divs_per_quarter=2)
    part.add(TimeSignature(12, 8), 0)
    part.add(Measure(0), 0, 1)
    part.add(Measure(1), 1, 13)
    part.add(Note("n1", "C"), 0, 1)
    part.add(Note("n2", "D"), 1, 4)
    return part


def test_div_quarter_linear_scaling():
    part = simple_part(dpq=12)
    assert convert_time(part, 24, "div", "quarter") == 2


def test_piecewise_divs_map():
    # 12 divs/quarter over quarters [0,2) (divs [0,24)), 24 afterwards:
    # div 48 = 2 quarters + 24/24 quarters = quarter 3
    part = Part("P1", divs_per_quarter=12)
    part.set_quarter_divisions(24, 24)
    part.add(Note("n1", "C"), 0, 72)
    assert convert_time(part, 48, "div", "quarter") == 3
    assert convert_time(part, 3, "quarter", "div") == 48
    assert convert_time(part, 12, "div", "quarter") == 1


def test_anacrusis_slow_beat_is_minus_one():
    part = anacrusis_12_8_part()
    assert beat_anchor_div(part) == 1
    assert convert_time(part, 0, "div", "beat", beat_mode="slow") == -1


def test_anacrusis_fast_beat_is_minus_third():
    part = anacrusis_12_8_part()
    assert convert_time(part, 0, "div", "beat", beat_mode="fast") == F(-1, 3)


def test_beat_units():
    assert slow_beat_unit(12, 8) == F(1, 2)
    assert fast_beat_unit(12, 8) == F(3, 2)
    assert slow_beat_unit(4, 4) == 1
    assert fast_beat_unit(4, 4) == 1  # not compound: fast == slow
    assert fast_beat_unit(6, 8) == F(3, 2)
    assert fast_beat_unit(3, 4) == 1  # denominator 4 stays simple


def test_beat_without_time_signature_raises():
    part = Part("P1", divs_per_quarter=2)
    part.add(Note("n1", "C"), 0, 4)
    with pytest.raises(MissingContextError):
        convert_time(part, 0, "div", "beat")


def test_unknown_unit_rejected():
    part = simple_part()
    with pytest.raises(RangeError):
        convert_time(part, 0, "div", "lightyears")


def test_time_signature_change_mid_piece():
    # 4/4 for one measure (4 quarters), then 3/4: beats accumulate piecewise
    part = Part("P1", divs_per_quarter=4)
    part.add(TimeSignature(4, 4), 0)
    part.add(TimeSignature(3, 4), 16)
    part.add(Measure(1), 0, 16)
    part.add(Measure(2), 16, 28)
    part.add(Note("n1", "C"), 0, 28)
    assert convert_time(part, 16, "div", "beat") == 4
    assert convert_time(part, 28, "div", "beat") == 7
    # inverse round-trip across the breakpoint
    assert convert_time(part, 7, "beat", "div") == 28


def test_quarter_anchor_is_timeline_start_even_with_anacrusis():
    part = anacrusis_12_8_part()
    assert convert_time(part, 0, "div", "quarter") == 0
    assert convert_time(part, 1, "div", "quarter") == F(1, 2)


@given(
    rates=st.lists(st.integers(min_value=1, max_value=64), min_size=1, max_size=4),
    points=st.lists(st.integers(min_value=0, max_value=4000), min_size=1, max_size=20),
)
def test_div_quarter_roundtrip_exact(rates, points):
    part = Part("P1", divs_per_quarter=rates[0])
    boundary = 0
    for rate in rates[1:]:
        boundary += 97  # arbitrary but deterministic segment length
        part.set_quarter_divisions(boundary, rate)
    qmap = quarter_map(part)
    for p in points:
        assert qmap.inverse(qmap(p)) == p


@given(st.lists(st.integers(min_value=0, max_value=10000), min_size=2, max_size=10))
def test_conversion_monotone(points):
    part = Part("P1", divs_per_quarter=12)
    part.set_quarter_divisions(120, 7)
    part.add(TimeSignature(6, 8), 0)
    part.add(Measure(1), 0, 36)
    pts = sorted(points)
    for unit, mode in (("quarter", "slow"), ("beat", "slow"), ("beat", "fast")):
        converted = [convert_time(part, p, "div", unit, beat_mode=mode) for p in pts]
        assert all(a <= b for a, b in zip(converted, converted[1:]))


def test_beat_map_roundtrip_with_anchor():
    part = anacrusis_12_8_part()
    bmap = beat_map(part, "slow")
    qmap = quarter_map(part)
    for div in range(0, 14):
        q = qmap(div)
        assert bmap.inverse(bmap(q)) == q
