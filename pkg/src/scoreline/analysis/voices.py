"""Voice separation by contig connection.

The piece is cut into *contigs*: maximal spans over which the set of
sounding notes is constant, so every note in a contig sounds for the whole
contig and the notes stack without crossing.  Within a contig notes are
ranked by pitch, highest first.  Fragments of the same note in neighbouring
contigs stay connected (held notes); the remaining fragments are connected
across each boundary by a minimum-cost assignment on absolute pitch
distance, canonicalized to the non-crossing optimum.  Connected fragments
form voice chains, numbered 1..V from the highest mean pitch down.
Adjacent contigs separated by silence are still connected, so a monophonic
line with rests stays a single voice.
"""

from __future__ import annotations

from typing import Union

import numpy as np

from ..document import ScoreDocument
from ..model import Part, PartGroup, PerformedPart, notes_sorted
from ..notearray import collect_parts, is_performance


class Contig:
    """A maximal interval with a constant set of sounding notes.

    ``order`` lists note indices by descending pitch; the k-th entry is
    voice k within the contig.
    """

    __slots__ = ("start", "end", "order")

    def __init__(self, start, end, order):
        self.start = start
        self.end = end
        self.order = order

    def __len__(self):
        return len(self.order)


def _note_intervals(source):
    """(onset, offset, pitch) triples in onset-then-pitch order."""
    if is_performance(source):
        source.require_frozen()
        return [(n.onset_sec, n.onset_sec + n.duration_sec, n.midi_pitch)
                for n in source.notes]
    if isinstance(source, np.ndarray):
        names = source.dtype.names or ()
        if "onset_div" in names:
            onset, duration = "onset_div", "duration_div"
        else:
            onset, duration = "onset_sec", "duration_sec"
        order = sorted(range(len(source)),
                       key=lambda i: (source[i][onset], source[i]["pitch"], i))
        return [(float(source[i][onset]),
                 float(source[i][onset]) + float(source[i][duration]),
                 int(source[i]["pitch"])) for i in order]
    intervals = []
    for part in collect_parts(source):
        for note in notes_sorted(part):
            intervals.append((note.start.t, note.end.t, note.midi_pitch))
    return intervals


def build_contigs(intervals) -> list[Contig]:
    """Cut sounding intervals into contigs with constant sounding sets."""
    positive = [i for i, (on, off, _p) in enumerate(intervals) if off > on]
    times = sorted({t for i in positive for t in intervals[i][:2]})
    contigs = []
    for lo, hi in zip(times, times[1:]):
        sounding = [i for i in positive
                    if intervals[i][0] <= lo and intervals[i][1] >= hi]
        if not sounding:
            continue
        sounding.sort(key=lambda i: (-intervals[i][2], i))
        if contigs and contigs[-1].end == lo and contigs[-1].order == sounding:
            contigs[-1].end = hi
        else:
            contigs.append(Contig(lo, hi, sounding))
    return contigs


def _connect(contigs, intervals, parent):
    """Union fragments across each pair of consecutive contigs."""

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        parent[find(a)] = find(b)

    for left, right in zip(contigs, contigs[1:]):
        left_set = set(left.order)
        right_set = set(right.order)
        free_left = [i for i in left.order if i not in right_set]
        free_right = [i for i in right.order if i not in left_set]
        # held notes connect to themselves by identity; assign the rest
        if not free_left or not free_right:
            continue
        from scipy.optimize import linear_sum_assignment

        cost = np.empty((len(free_left), len(free_right)))
        for a, i in enumerate(free_left):
            for b, j in enumerate(free_right):
                cost[a, b] = abs(intervals[i][2] - intervals[j][2])
        rows, cols = linear_sum_assignment(cost)
        # canonicalize to the non-crossing optimum: both lists are sorted by
        # pitch, so re-pair the matched index sets in order
        for a, b in zip(sorted(rows), sorted(cols)):
            union(free_left[a], free_right[b])


def estimate_voices(source: Union[Part, PerformedPart, ScoreDocument, PartGroup,
                                  np.ndarray]) -> np.ndarray:
    """Voice number (1..V) per note, in onset-then-pitch order.

    Zero-duration grace notes inherit the voice of the closest-pitch
    sounding note at their onset.
    """
    intervals = _note_intervals(source)
    n = len(intervals)
    if n == 0:
        return np.zeros(0, dtype=np.int64)

    contigs = build_contigs(intervals)
    parent = list(range(n))
    _connect(contigs, intervals, parent)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chains: dict[int, list[int]] = {}
    for i, (on, off, _p) in enumerate(intervals):
        if off > on:
            chains.setdefault(find(i), []).append(i)

    ranked = sorted(
        chains.values(),
        key=lambda members: (-(sum(intervals[i][2] for i in members) / len(members)),
                             min(intervals[i][0] for i in members),
                             min(members)))
    voices = np.zeros(n, dtype=np.int64)
    for number, members in enumerate(ranked, start=1):
        for i in members:
            voices[i] = number

    # grace notes: inherit from the nearest sounding note at their onset
    for i, (on, off, pitch) in enumerate(intervals):
        if off > on:
            continue
        candidates = [j for j, (jon, joff, _jp) in enumerate(intervals)
                      if joff > jon and jon <= on < joff]
        if not candidates:
            candidates = [j for j, (jon, joff, _jp) in enumerate(intervals)
                          if joff > jon]
        if candidates:
            best = min(candidates,
                       key=lambda j: (abs(intervals[j][2] - pitch), voices[j]))
            voices[i] = voices[best]
        else:
            voices[i] = 1
    return voices


def apply_voices(part: Part) -> None:
    """Write estimated voice numbers onto the notes of an unfrozen part."""
    voices = estimate_voices(part)
    for note, voice in zip(notes_sorted(part), voices):
        note.voice = int(voice)
