"""Piano rolls: sparse pitch-by-frame matrices from scores or performances.

A note occupies frames ``floor(o*time_div)`` through
``max(floor(o*time_div), ceil((o+d)*time_div) - 1)`` so short notes are
never dropped; zero-duration grace notes are excluded.  Frame 0 sits at
the timeline start (relevant for beat-unit rolls, where the anacrusis
makes raw positions negative).  Values are 1 for scores and the velocity
for performances; overlaps keep the maximum.
"""

from __future__ import annotations

import math
import warnings
from fractions import Fraction
from typing import Optional

import numpy as np

from .exceptions import RangeError, ScorelineWarning
from .notearray import Source, collect_parts, is_performance, merged_note_spans
from .timeunits import beat_map, quarter_map

PIANO_LOW, PIANO_HIGH = 21, 108


class PianoRoll:
    """A sparse matrix of shape (pitches, time frames) plus its metadata."""

    def __init__(self, matrix, time_unit: str, time_div: int,
                 piano_range: bool, origin: Fraction, fill: str):
        self.matrix = matrix
        self.time_unit = time_unit
        self.time_div = time_div
        self.piano_range = piano_range
        self.origin = origin  # position of frame 0, in time_unit
        self.fill = fill

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def frame_length(self) -> Fraction:
        return Fraction(1, self.time_div)

    def __repr__(self):
        return (f"PianoRoll(shape={self.shape}, unit={self.time_unit}, "
                f"time_div={self.time_div})")


def _score_events(parts, time_unit, beat_mode):
    """(onset, duration, pitch, value) in the requested unit, plus span."""
    events = []
    span = Fraction(0)
    origin = Fraction(0)
    for part in parts:
        part.require_frozen()
        qmap = quarter_map(part)
        if time_unit == "div":
            conv = Fraction
        elif time_unit == "quarter":
            conv = qmap
        else:
            bmap = beat_map(part, beat_mode)
            conv = lambda t: bmap(qmap(t))  # noqa: E731
        part_origin = conv(0)
        origin = min(origin, part_origin)
        span = max(span, conv(part.last_div) - part_origin)
        for note, start, end in merged_note_spans(part):
            if end <= start:
                continue  # grace notes never enter piano rolls
            events.append((conv(start), conv(end) - conv(start), note.midi_pitch, 1))
    return events, origin, span


def compute_pianoroll(source: Source,
                      time_unit: Optional[str] = None,
                      time_div: int = 8,
                      piano_range: bool = False,
                      fill: str = "full",
                      beat_mode: str = "slow") -> PianoRoll:
    """Compute a piano roll at ``time_div`` frames per time unit.

    The default unit is ``quarter`` for scores and ``sec`` for
    performances; ``sec`` is only valid for performances and the score
    units only for scores.
    """
    if time_div <= 0:
        raise RangeError("time_div must be positive")
    if fill not in ("full", "onset_only"):
        raise RangeError(f"bad fill mode {fill!r}")

    if is_performance(source):
        time_unit = time_unit or "sec"
        if time_unit != "sec":
            raise RangeError("performances support only the sec time unit")
        source.require_frozen()
        events = [(Fraction(n.onset_sec), Fraction(n.duration_sec),
                   n.midi_pitch, n.velocity) for n in source.notes]
        origin = Fraction(0)
        span = max((o + d for o, d, _p, _v in events), default=Fraction(0))
    else:
        time_unit = time_unit or "quarter"
        if time_unit not in ("div", "quarter", "beat"):
            raise RangeError(f"bad score time unit {time_unit!r}")
        events, origin, span = _score_events(collect_parts(source), time_unit, beat_mode)

    n_cols = max(int(math.ceil(span * time_div)), 0)
    n_rows = (PIANO_HIGH - PIANO_LOW + 1) if piano_range else 128

    rows, cols, values = [], [], []
    clipped = 0
    for onset, duration, pitch, value in events:
        if piano_range and not PIANO_LOW <= pitch <= PIANO_HIGH:
            clipped += 1
            continue
        row = pitch - PIANO_LOW if piano_range else pitch
        rel = onset - origin
        start_frame = math.floor(rel * time_div)
        end_frame = max(start_frame, math.ceil((rel + duration) * time_div) - 1)
        if fill == "onset_only":
            end_frame = start_frame
        for frame in range(start_frame, end_frame + 1):
            if 0 <= frame < n_cols:
                rows.append(row)
                cols.append(frame)
                values.append(value)
    if clipped:
        warnings.warn(f"{clipped} note(s) outside the piano range were clipped",
                      ScorelineWarning, stacklevel=2)

    # overlapping notes must not sum; keep the maximum value per cell
    matrix = _max_duplicates(rows, cols, values, (n_rows, n_cols))
    return PianoRoll(matrix, time_unit, time_div, piano_range, origin, fill)


def _max_duplicates(rows, cols, values, shape):
    from scipy import sparse

    best: dict[tuple[int, int], int] = {}
    for r, c, v in zip(rows, cols, values):
        key = (r, c)
        if v > best.get(key, 0):
            best[key] = v
    if best:
        r2, c2, v2 = zip(*[(r, c, v) for (r, c), v in best.items()])
    else:
        r2 = c2 = v2 = []
    return sparse.coo_matrix((v2, (r2, c2)), shape=shape, dtype=np.int64).tocsr()


def pianoroll_to_csv(roll: PianoRoll) -> str:
    """Coordinate-list CSV: one `rows,cols` header line, then row,col,value
    triples in row-major order."""
    matrix = roll.matrix.tocoo()
    triples = sorted(zip(matrix.row.tolist(), matrix.col.tolist(),
                         matrix.data.tolist()))
    lines = [f"{roll.shape[0]},{roll.shape[1]}"]
    lines.extend(f"{r},{c},{v}" for r, c, v in triples)
    return "\n".join(lines) + "\n"


def pianoroll_to_pgm(roll: PianoRoll) -> str:
    """Plain PGM (P2, maxval 127) image; top row is the highest pitch."""
    dense = np.asarray(roll.matrix.todense())
    dense = np.clip(dense, 0, 127)[::-1]  # flip so high pitches are on top
    n_rows, n_cols = dense.shape
    lines = ["P2", f"{n_cols} {n_rows}", "127"]
    for row in dense:
        lines.append(" ".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"
