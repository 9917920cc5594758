"""Enumerate and materialize playthroughs of a score's repetition structure.

The timeline is cut into atomic segments at every structural position
(repeat signs, volta boundaries, segno/coda/fine marks).  A playthrough is
an ordered list of segments produced by simulating the navigation: plain
repeats are taken once or twice (performers often skip them, so both
variants are enumerated), voltas are active only on their pass numbers,
da capo / dal segno jump once, and fine / to coda take effect on the
return pass.  A skipped repeat plays the final pass, so the second ending
is the one kept.
"""

from __future__ import annotations

from itertools import product
from typing import NamedTuple, Optional

from .exceptions import StructureError
from .model import (
    Directive,
    GraceNote,
    KeySignature,
    Measure,
    Note,
    Part,
    Rest,
    Slur,
    TimeSignature,
)


class PlayoutSegment(NamedTuple):
    start_div: int
    end_div: int
    pass_constraints: frozenset  # volta pass numbers; empty = all passes


class _Repeat(NamedTuple):
    start: int
    end: int


class _Structure:
    def __init__(self, part: Part):
        self.end = part.last_div
        marks = sorted(part.navigation_marks, key=lambda m: (m.start.t, m.kind))
        self.repeats: list[_Repeat] = []
        self.voltas = []          # (start, end, numbers, repeat_index)
        self.positions = {}       # kind -> div for segno/coda/fine
        self.da_capo: Optional[int] = None
        self.dal_segno: Optional[int] = None
        self.to_coda: Optional[int] = None

        stack = []
        implicit_used = False
        for mark in marks:
            if mark.kind == "repeat_start":
                stack.append(mark.start.t)
            elif mark.kind == "repeat_end":
                if stack:
                    start = stack.pop()
                elif not implicit_used:
                    start = 0
                    implicit_used = True
                else:
                    raise StructureError(
                        f"unpaired repeat end at div {mark.start.t}: the "
                        "timeline-start fallback is already taken")
                if mark.start.t <= start:
                    raise StructureError(
                        f"repeat at div {start} closes before it opens")
                self.repeats.append(_Repeat(start, mark.start.t))
            elif mark.kind == "volta":
                self.voltas.append([mark.start.t, mark.end.t,
                                    mark.volta_numbers, None])
            elif mark.kind in ("segno", "coda", "fine"):
                self.positions[mark.kind] = mark.start.t
            elif mark.kind == "da_capo":
                self.da_capo = mark.start.t
            elif mark.kind == "dal_segno":
                self.dal_segno = mark.start.t
            elif mark.kind == "to_coda":
                self.to_coda = mark.start.t
        self.repeats.sort()

        for volta in self.voltas:
            start = volta[0]
            enclosing = None
            for index, repeat in enumerate(self.repeats):
                if repeat.start <= start <= repeat.end:
                    enclosing = index
            if enclosing is None:
                raise StructureError(
                    f"volta at div {start} has no enclosing repeat")
            volta[3] = enclosing

        if self.dal_segno is not None and "segno" not in self.positions:
            raise StructureError("dal segno without a segno mark")
        if self.to_coda is not None and "coda" not in self.positions:
            raise StructureError("to coda without a coda mark")

    def boundaries(self) -> list[int]:
        cuts = {0, self.end}
        for repeat in self.repeats:
            cuts.update((repeat.start, repeat.end))
        for start, end, _numbers, _idx in self.voltas:
            cuts.update((start, end))
        cuts.update(self.positions.values())
        for pos in (self.da_capo, self.dal_segno, self.to_coda):
            if pos is not None:
                cuts.add(pos)
        return sorted(c for c in cuts if 0 <= c <= self.end)

    def segments(self) -> list[PlayoutSegment]:
        cuts = self.boundaries()
        segments = []
        for lo, hi in zip(cuts, cuts[1:]):
            numbers: frozenset = frozenset()
            for start, end, volta_numbers, _idx in self.voltas:
                if start <= lo and hi <= end:
                    numbers = volta_numbers
            segments.append(PlayoutSegment(lo, hi, numbers))
        return segments

    def volta_repeat_of(self, segment: PlayoutSegment) -> Optional[int]:
        for start, end, _numbers, repeat_index in self.voltas:
            if start <= segment.start_div and segment.end_div <= end:
                return repeat_index
        return None


def _simulate(structure: _Structure, take_repeat: dict[int, bool]
              ) -> list[PlayoutSegment]:
    segments = structure.segments()
    if not segments:
        return []
    index_at = {segment.start_div: i for i, segment in enumerate(segments)}
    repeat_pass = {i: (1 if take_repeat.get(i, True) else 2)
                   for i in range(len(structure.repeats))}
    post_jump = False
    out = []
    i = 0
    steps = 0
    limit = 8 * len(segments) + 64
    while i < len(segments):
        steps += 1
        if steps > limit:
            raise StructureError("navigation does not terminate")
        segment = segments[i]
        if segment.pass_constraints:
            repeat_index = structure.volta_repeat_of(segment)
            current = 2 if post_jump else repeat_pass.get(repeat_index, 2)
            if current not in segment.pass_constraints:
                i += 1
                continue
        out.append(segment)
        boundary = segment.end_div

        if post_jump and structure.positions.get("fine") == boundary:
            return out
        if post_jump and structure.to_coda == boundary:
            target = index_at.get(structure.positions["coda"])
            if target is None:  # coda sits at the very end: nothing follows
                return out
            i = target
            continue
        jumped = False
        # innermost repeat first when several close on the same barline
        for r_index in sorted(range(len(structure.repeats)),
                              key=lambda r: structure.repeats[r].start,
                              reverse=True):
            repeat = structure.repeats[r_index]
            if repeat.end == boundary and not post_jump \
                    and take_repeat.get(r_index, True) \
                    and repeat_pass[r_index] == 1:
                repeat_pass[r_index] = 2
                i = index_at[repeat.start]
                jumped = True
                break
        if jumped:
            continue
        if not post_jump and structure.da_capo == boundary:
            post_jump = True
            i = 0
            continue
        if not post_jump and structure.dal_segno == boundary:
            post_jump = True
            target = index_at.get(structure.positions["segno"])
            if target is None:
                return out
            i = target
            continue
        i += 1
    return out


def enumerate_unfoldings(part: Part) -> list[list[PlayoutSegment]]:
    """All distinct terminating playthroughs, fewest segments first."""
    structure = _Structure(part)
    n_repeats = len(structure.repeats)
    seen = {}
    for decisions in product((True, False), repeat=n_repeats):
        take = dict(enumerate(decisions))
        playout = _simulate(structure, take)
        key = tuple((s.start_div, s.end_div) for s in playout)
        seen.setdefault(key, playout)
    ordered = sorted(seen.values(),
                     key=lambda p: (len(p), tuple((s.start_div, s.end_div)
                                                  for s in p)))
    return ordered


def unfold_maximal(part: Part) -> Part:
    """Materialize the playthrough that takes every repeat and jump."""
    structure = _Structure(part)
    playout = _simulate(structure, {i: True for i in range(len(structure.repeats))})
    return _materialize(part, playout)


def _materialize(part: Part, playout: list[PlayoutSegment]) -> Part:
    out = Part(part.id, name=part.name, staff_count=part.staff_count,
               divs_per_quarter=part.divs_per_quarter)

    # coalesce source-contiguous segments so held notes stay whole
    runs = []
    for segment in playout:
        if runs and runs[-1][1] == segment.start_div:
            runs[-1][1] = segment.end_div
        else:
            runs.append([segment.start_div, segment.end_div])

    occurrences: dict[str, int] = {}
    slur_done = set()
    cursor = 0
    measure_number = 1
    current_ts: Optional[tuple] = None
    current_ks: Optional[tuple] = None
    for run_start, run_end in runs:
        offset = cursor - run_start
        id_map = {}

        ts_here = part.time_signature_at(run_start)
        if ts_here is not None and ts_here.start.t <= run_start:
            spec = (ts_here.beats, ts_here.beat_type)
            if spec != current_ts:
                out.add(TimeSignature(*spec), cursor)
                current_ts = spec
        ks_here = part.key_signature_at(run_start)
        if ks_here is not None and ks_here.start.t <= run_start:
            spec = (ks_here.fifths, ks_here.mode)
            if spec != current_ks:
                out.add(KeySignature(spec[0], spec[1]), cursor)
                current_ks = spec

        for point in part.points():
            t = point.t
            if t < run_start or t >= run_end:
                continue
            for obj in point.starting:
                end = min(obj.end.t, run_end) + offset
                start = t + offset
                if isinstance(obj, Note):
                    count = occurrences.get(obj.id, 0) + 1
                    occurrences[obj.id] = count
                    new_id = f"{obj.id}-{count}"
                    id_map[obj.id] = new_id
                    cls = GraceNote if isinstance(obj, GraceNote) else Note
                    out.add(cls(new_id, obj.step, obj.alter, obj.octave,
                                voice=obj.voice, staff=obj.staff, tie=obj.tie),
                            start, end)
                elif isinstance(obj, Rest):
                    count = occurrences.get(obj.id, 0) + 1
                    occurrences[obj.id] = count
                    out.add(Rest(f"{obj.id}-{count}", voice=obj.voice,
                                 staff=obj.staff), start, end)
                elif isinstance(obj, Measure):
                    out.add(Measure(measure_number), start, end)
                    measure_number += 1
                elif isinstance(obj, TimeSignature):
                    if t > run_start:
                        out.add(TimeSignature(obj.beats, obj.beat_type), start)
                        current_ts = (obj.beats, obj.beat_type)
                elif isinstance(obj, KeySignature):
                    if t > run_start:
                        out.add(KeySignature(obj.fifths, obj.mode), start)
                        current_ks = (obj.fifths, obj.mode)
                elif isinstance(obj, Directive):
                    out.add(Directive(obj.kind, obj.text), start)
                # navigation marks are dropped

        for slur in part.slurs:
            start_id = id_map.get(slur.start_note_id)
            end_id = id_map.get(slur.end_note_id)
            if start_id and end_id and (start_id, end_id) not in slur_done:
                start_note = out.note_by_id(start_id)
                end_note = out.note_by_id(end_id)
                out.add(Slur(start_id, end_id), start_note.start.t,
                        end_note.end.t)
                slur_done.add((start_id, end_id))
        cursor += run_end - run_start
    return out.freeze()
