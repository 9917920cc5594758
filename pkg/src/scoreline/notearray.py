"""Note arrays: flat per-note feature records as numpy structured arrays.

Score records carry onset/duration in beats, quarters, and divs plus pitch,
voice, and id; performance records carry seconds, velocity, track, and
channel.  Tied notes are merged into a single record by default (id of the
first note of the chain).  Equality of note arrays is the canonical score
equality used by the round-trip tests.
"""

from __future__ import annotations

import warnings
from typing import Callable, Sequence, Union

import numpy as np

from .document import ScoreDocument
from .exceptions import FeatureError, MissingContextError, ScorelineWarning
from .model import (
    Part,
    PartGroup,
    PerformedPart,
    notes_sorted,
)
from .timeunits import beat_map, quarter_map

Source = Union[Part, PerformedPart, ScoreDocument, PartGroup]

SCORE_FIELDS = [
    ("onset_beat", "<f8"),
    ("duration_beat", "<f8"),
    ("onset_quarter", "<f8"),
    ("duration_quarter", "<f8"),
    ("onset_div", "<i8"),
    ("duration_div", "<i8"),
    ("pitch", "<i8"),
    ("voice", "<i8"),
    ("id", "<U256"),
]
TS_FIELDS = [("ts_beats", "<i8"), ("ts_beat_type", "<i8")]
PERFORMANCE_FIELDS = [
    ("onset_sec", "<f8"),
    ("duration_sec", "<f8"),
    ("pitch", "<i8"),
    ("velocity", "<i8"),
    ("track", "<i8"),
    ("channel", "<i8"),
    ("id", "<U256"),
]


def collect_parts(source: Source) -> list[Part]:
    if isinstance(source, Part):
        return [source]
    if isinstance(source, PartGroup):
        return list(source.iter_parts())
    if isinstance(source, ScoreDocument):
        return source.part_list()
    raise TypeError(f"not a score source: {source!r}")


def is_performance(source) -> bool:
    return isinstance(source, PerformedPart)


def merged_note_spans(part: Part, merge: bool = True):
    """Yield (note, start_div, end_div) with tie chains merged.

    A chain is a ``start`` note followed by ``continue`` notes and a
    ``stop`` note of the same pitch and voice; the merged span keeps the
    first note's identity.
    """
    notes = notes_sorted(part)
    if not merge:
        for note in notes:
            yield note, note.start.t, note.end.t
        return
    open_chains: dict[tuple[int, int], list] = {}
    finished = []
    for note in notes:
        key = (note.midi_pitch, note.voice)
        if note.tie == "start":
            finished.append([note, note.start.t, note.end.t])
            open_chains[key] = finished[-1]
        elif note.tie in ("continue", "stop"):
            chain = open_chains.get(key)
            if chain is None or chain[2] != note.start.t:
                warnings.warn(
                    f"tie {note.tie} without matching start on note {note.id}",
                    ScorelineWarning, stacklevel=3)
                finished.append([note, note.start.t, note.end.t])
                if note.tie == "continue":
                    open_chains[key] = finished[-1]
            else:
                chain[2] = note.end.t
                if note.tie == "stop":
                    del open_chains[key]
        else:
            finished.append([note, note.start.t, note.end.t])
    finished.sort(key=lambda rec: (rec[1], rec[0].midi_pitch, rec[0].id))
    for note, start, end in finished:
        yield note, start, end


def _feature_columns(extra_features, notes, context):
    columns = []
    for name, func in extra_features:
        values = []
        for note in notes:
            try:
                values.append(func(note, context))
            except Exception as exc:
                raise FeatureError(name, getattr(note, "id", "?"), exc) from exc
        if all(isinstance(v, (int, float, np.integer, np.floating)) for v in values):
            columns.append((name, "<f8", [float(v) for v in values]))
        else:
            columns.append((name, "<U256", [str(v) for v in values]))
    return columns


def _score_records(part: Part, include_time_signature: bool,
                   merge_tied_notes: bool, beat_mode: str):
    part.require_frozen()
    qmap = quarter_map(part)
    try:
        bmap = beat_map(part, beat_mode)
    except MissingContextError:
        bmap = None
        if part.notes:
            warnings.warn(
                f"part {part.id!r} has no time signature; beat columns equal "
                "quarter columns", ScorelineWarning, stacklevel=3)

    spans = list(merged_note_spans(part, merge_tied_notes))
    records = []
    for note, start, end in spans:
        on_q = qmap(start)
        off_q = qmap(end)
        if bmap is None:
            on_b, off_b = on_q, off_q
        else:
            on_b, off_b = bmap(on_q), bmap(off_q)
        record = [float(on_b), float(off_b - on_b), float(on_q), float(off_q - on_q),
                  int(start), int(end - start), note.midi_pitch, note.voice, note.id]
        if include_time_signature:
            ts = part.time_signature_at(start)
            if ts is None:
                warnings.warn(
                    f"part {part.id!r} has no time signature for ts columns",
                    ScorelineWarning, stacklevel=3)
                record.extend([0, 0])
            else:
                record.extend([ts.beats, ts.beat_type])
        records.append(record)
    return records, [note for note, _s, _e in spans]


def note_array(source: Source,
               include_time_signature: bool = False,
               extra_features: Sequence[tuple[str, Callable]] = (),
               merge_tied_notes: bool = True,
               beat_mode: str = "slow") -> np.ndarray:
    """Build the note array of a part, document, or performance.

    ``extra_features`` is a sequence of ``(name, func)`` pairs; each func is
    called as ``func(note, source_part)`` and its results appended as an
    extra named column.
    """
    if is_performance(source):
        source.require_frozen()
        notes = list(source.notes)
        records = [[n.onset_sec, n.duration_sec, n.midi_pitch, n.velocity,
                    n.track, n.channel, n.id] for n in notes]
        dtype = list(PERFORMANCE_FIELDS)
        if include_time_signature:
            warnings.warn("performances carry no time signature columns",
                          ScorelineWarning, stacklevel=2)
        context = source
    else:
        parts = collect_parts(source)
        records = []
        notes = []
        for part in parts:
            recs, ns = _score_records(part, include_time_signature,
                                      merge_tied_notes, beat_mode)
            records.extend(recs)
            notes.extend(ns)
        dtype = list(SCORE_FIELDS) + (TS_FIELDS if include_time_signature else [])
        if len(parts) > 1:
            order = sorted(range(len(records)),
                           key=lambda i: (records[i][4], records[i][6], records[i][8]))
            records = [records[i] for i in order]
            notes = [notes[i] for i in order]
        context = parts[0] if len(parts) == 1 else source

    columns = _feature_columns(extra_features, notes, context)
    dtype.extend((name, kind) for name, kind, _values in columns)
    for i, record in enumerate(records):
        record.extend(values[i] for _n, _k, values in columns)
    return np.array([tuple(r) for r in records], dtype=dtype)


def note_array_to_csv(array: np.ndarray) -> str:
    """Deterministic CSV emission: header row of field names, one record
    per line, '.' decimal separator."""
    names = array.dtype.names
    lines = [",".join(names)]
    for row in array:
        cells = []
        for name in names:
            value = row[name]
            if isinstance(value, (np.floating, float)):
                cells.append(repr(float(value)))
            elif isinstance(value, (np.integer, int)):
                cells.append(str(int(value)))
            else:
                cells.append(str(value))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
