"""Conversion between div, quarter, and beat positions of a part.

Quarter positions are anchored at div 0 (quarter 0 is the timeline start).
Beat positions are anchored at the first downbeat: beat 0 is the start of
the first complete measure, so anacrusis notes get negative beats.  Two
beat readings exist for compound meters: ``slow`` counts denominator units
(12 beats in a 12/8 measure), ``fast`` counts compound groups (4 dotted
quarters in 12/8); for non-compound signatures both agree.

All maps are piecewise linear, strictly increasing, and exact over the
rationals (``fractions.Fraction`` in and out).
"""

from __future__ import annotations

import bisect
from fractions import Fraction
from typing import Union

from .exceptions import MissingContextError, RangeError
from .model import Part

Rational = Union[int, Fraction]

UNITS = ("div", "quarter", "beat")
BEAT_MODES = ("slow", "fast")


def _as_fraction(t) -> Fraction:
    if isinstance(t, (int, Fraction)):
        return Fraction(t)
    if isinstance(t, float):
        return Fraction(t).limit_denominator(10**9)
    raise TypeError(f"not a rational position: {t!r}")


class PiecewiseLinearMap:
    """Strictly increasing piecewise linear map given by anchor points
    ``(x_i, y_i)`` and slopes; the first and last segments extend to
    infinity."""

    def __init__(self, xs: list[Fraction], ys: list[Fraction], slopes: list[Fraction]):
        # len(slopes) == len(xs); slopes[i] applies on [xs[i], xs[i+1])
        # and slopes[0] also left of xs[0]
        self.xs = xs
        self.ys = ys
        self.slopes = slopes

    def __call__(self, x: Rational) -> Fraction:
        x = _as_fraction(x)
        i = bisect.bisect_right(self.xs, x) - 1
        if i < 0:
            i = 0
        return self.ys[i] + (x - self.xs[i]) * self.slopes[i]

    def inverse(self, y: Rational) -> Fraction:
        y = _as_fraction(y)
        i = bisect.bisect_right(self.ys, y) - 1
        if i < 0:
            i = 0
        return self.xs[i] + (y - self.ys[i]) / self.slopes[i]


def quarter_map(part: Part) -> PiecewiseLinearMap:
    """div -> quarter map induced by the part's divs map, anchored at
    quarter 0 = div 0."""
    xs, ys, slopes = [], [], []
    q = Fraction(0)
    prev_div = None
    prev_rate = None
    for start_div, dpq in part.divs_map:
        start_div = Fraction(start_div)
        if prev_div is not None:
            q += (start_div - prev_div) * prev_rate
        rate = Fraction(1, dpq)  # quarters per div
        xs.append(start_div)
        ys.append(q)
        slopes.append(rate)
        prev_div, prev_rate = start_div, rate
    return PiecewiseLinearMap(xs, ys, slopes)


def slow_beat_unit(beats: int, beat_type: int) -> Fraction:
    """Length of one denominator-unit beat, in quarters."""
    return Fraction(4, beat_type)


def fast_beat_unit(beats: int, beat_type: int) -> Fraction:
    """Length of one compound-group beat, in quarters; equals the slow
    unit outside compound meters."""
    if beats % 3 == 0 and beat_type in (8, 16):
        return Fraction(12, beat_type)
    return slow_beat_unit(beats, beat_type)


def beat_anchor_div(part: Part) -> int:
    """Div position of the first downbeat: start of the first measure
    whose span matches its time signature. Falls back to div 0 when the
    part has no (complete) measures."""
    qmap = quarter_map(part)
    for measure in part.measures:
        ts = part.time_signature_at(measure.start.t)
        if ts is None:
            break
        nominal = ts.beats * Fraction(4, ts.beat_type)
        span = qmap(measure.end.t) - qmap(measure.start.t)
        if span == nominal:
            return measure.start.t
    return 0


def beat_map(part: Part, mode: str = "slow") -> PiecewiseLinearMap:
    """quarter -> beat map for the part.

    Raises :class:`MissingContextError` when the part carries no time
    signature.
    """
    if mode not in BEAT_MODES:
        raise RangeError(f"bad beat mode {mode!r}")
    signatures = part.time_signatures
    if not signatures:
        raise MissingContextError(
            f"part {part.id!r} has no time signature; beat positions undefined")
    qmap = quarter_map(part)
    unit_of = slow_beat_unit if mode == "slow" else fast_beat_unit

    xs, ys, slopes = [], [], []
    b = Fraction(0)
    prev_q = None
    prev_slope = None
    for sig in signatures:
        q = qmap(sig.start.t)
        if prev_q is not None:
            if q == prev_q:  # redundant signature at the same position
                xs.pop(), ys.pop(), slopes.pop()
            else:
                b += (q - prev_q) * prev_slope
        slope = 1 / unit_of(sig.beats, sig.beat_type)  # beats per quarter
        xs.append(q)
        ys.append(b)
        slopes.append(slope)
        prev_q, prev_slope = q, slope

    relmap = PiecewiseLinearMap(xs, ys, slopes)
    shift = relmap(qmap(beat_anchor_div(part)))
    return PiecewiseLinearMap(xs, [y - shift for y in ys], slopes)


def convert_time(part: Part, t: Rational, from_unit: str, to_unit: str,
                 beat_mode: str = "slow") -> Fraction:
    """Convert position ``t`` between div, quarter, and beat units."""
    for unit in (from_unit, to_unit):
        if unit not in UNITS:
            raise RangeError(f"unknown time unit {unit!r}")
    t = _as_fraction(t)
    if from_unit == to_unit:
        return t

    qmap = quarter_map(part)
    if from_unit == "div":
        q = qmap(t)
    elif from_unit == "quarter":
        q = t
    else:
        q = beat_map(part, beat_mode).inverse(t)

    if to_unit == "div":
        return qmap.inverse(q)
    if to_unit == "quarter":
        return q
    return beat_map(part, beat_mode)(q)
