"""Timeline-based score, performance, and alignment data model.

A :class:`Part` holds an ordered sequence of :class:`TimePoint` objects at
non-negative integer *div* positions.  Score elements (notes, rests,
measures, signatures, ...) are :class:`TimedObject` instances registered
with the time points where they start and end.  Performances are flat
(:class:`PerformedPart`); alignments link the two by note id.

Parts and performed parts are mutable while they are being built and must
be frozen (:meth:`Part.freeze`) before feature extraction; frozen objects
are immutable and safe to share between threads.
"""

from __future__ import annotations

import bisect
from typing import Iterable, Iterator, Optional, Sequence, Union

from .exceptions import IdentityError, RangeError, StateError

# semitone offset of each step letter above C
STEP_SEMITONES = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
STEPS = "CDEFGAB"

TIE_STATES = ("none", "start", "stop", "continue")
NAVIGATION_KINDS = (
    "repeat_start",
    "repeat_end",
    "volta",
    "da_capo",
    "dal_segno",
    "segno",
    "fine",
    "coda",
    "to_coda",
)


def midi_pitch_of(step: str, alter: int, octave: int) -> int:
    """MIDI pitch of a spelled note: ``12*(octave+1) + semitone(step) + alter``."""
    if step not in STEP_SEMITONES:
        raise ValueError(f"bad step {step!r}")
    return 12 * (octave + 1) + STEP_SEMITONES[step] + alter


class TimePoint:
    """A temporal position in a part, in integer div units.

    ``starting`` and ``ending`` hold the timed objects registered here.
    """

    __slots__ = ("t", "starting", "ending")

    def __init__(self, t: int):
        self.t = t
        # dicts double as insertion-ordered sets; membership is what matters
        self.starting: dict = {}
        self.ending: dict = {}

    def __repr__(self):
        return f"TimePoint(t={self.t}, starting={len(self.starting)}, ending={len(self.ending)})"


class TimedObject:
    """Base class for anything registered on a timeline with a start and
    end :class:`TimePoint` (set by :meth:`Part.add`)."""

    __slots__ = ("start", "end")

    def __init__(self):
        self.start: Optional[TimePoint] = None
        self.end: Optional[TimePoint] = None

    @property
    def duration_div(self) -> int:
        if self.start is None or self.end is None:
            raise StateError(f"{self!r} is not registered with a part")
        return self.end.t - self.start.t


class Note(TimedObject):
    """A pitched note. Pitch is stored spelled; ``midi_pitch`` is derived."""

    __slots__ = ("id", "step", "alter", "octave", "voice", "staff", "tie")

    def __init__(self, id, step, alter=0, octave=4, voice=1, staff=1, tie="none"):
        super().__init__()
        if step not in STEP_SEMITONES:
            raise ValueError(f"bad step {step!r}")
        if tie not in TIE_STATES:
            raise ValueError(f"bad tie state {tie!r}")
        self.id = id
        self.step = step
        self.alter = int(alter)
        self.octave = int(octave)
        self.voice = int(voice)
        self.staff = int(staff)
        self.tie = tie

    @property
    def midi_pitch(self) -> int:
        return midi_pitch_of(self.step, self.alter, self.octave)

    def respell(self, step: str, alter: int, octave: int) -> None:
        """Change the spelling without changing the sounding pitch."""
        if midi_pitch_of(step, alter, octave) != self.midi_pitch:
            raise ValueError(
                f"respelling {step}{alter:+d} oct {octave} would change midi pitch"
            )
        self.step, self.alter, self.octave = step, int(alter), int(octave)

    def __repr__(self):
        return f"Note(id={self.id!r}, pitch={self.step}{self.alter:+d}/{self.octave}, voice={self.voice})"


class GraceNote(Note):
    """An ornament note occupying zero div duration."""

    __slots__ = ()


class Rest(TimedObject):
    __slots__ = ("id", "voice", "staff")

    def __init__(self, id, voice=1, staff=1):
        super().__init__()
        self.id = id
        self.voice = int(voice)
        self.staff = int(staff)

    def __repr__(self):
        return f"Rest(id={self.id!r}, voice={self.voice})"


class Measure(TimedObject):
    __slots__ = ("number",)

    def __init__(self, number: int):
        super().__init__()
        self.number = int(number)

    def __repr__(self):
        return f"Measure({self.number})"


class TimeSignature(TimedObject):
    __slots__ = ("beats", "beat_type")

    def __init__(self, beats: int, beat_type: int):
        super().__init__()
        if beats <= 0 or beat_type <= 0:
            raise ValueError("time signature members must be positive")
        self.beats = int(beats)
        self.beat_type = int(beat_type)

    def __repr__(self):
        return f"TimeSignature({self.beats}/{self.beat_type})"


class KeySignature(TimedObject):
    __slots__ = ("fifths", "mode")

    def __init__(self, fifths: int, mode: str = "major"):
        super().__init__()
        if not -7 <= int(fifths) <= 7:
            raise ValueError("fifths out of range -7..7")
        if mode not in ("major", "minor"):
            raise ValueError(f"bad mode {mode!r}")
        self.fifths = int(fifths)
        self.mode = mode

    def __repr__(self):
        return f"KeySignature(fifths={self.fifths}, mode={self.mode})"


class Slur(TimedObject):
    __slots__ = ("start_note_id", "end_note_id")

    def __init__(self, start_note_id: str, end_note_id: str):
        super().__init__()
        self.start_note_id = start_note_id
        self.end_note_id = end_note_id

    def __repr__(self):
        return f"Slur({self.start_note_id!r} -> {self.end_note_id!r})"


class Directive(TimedObject):
    """A tempo or loudness performance directive."""

    __slots__ = ("kind", "text")

    def __init__(self, kind: str, text: str):
        super().__init__()
        if kind not in ("tempo", "loudness"):
            raise ValueError(f"bad directive kind {kind!r}")
        self.kind = kind
        self.text = text

    def __repr__(self):
        return f"Directive({self.kind}, {self.text!r})"


class NavigationMark(TimedObject):
    """Repeat signs, voltas, and da capo/segno/coda navigation."""

    __slots__ = ("kind", "volta_numbers")

    def __init__(self, kind: str, volta_numbers: Iterable[int] = ()):
        super().__init__()
        if kind not in NAVIGATION_KINDS:
            raise ValueError(f"bad navigation kind {kind!r}")
        numbers = frozenset(int(n) for n in volta_numbers)
        if kind == "volta":
            if not numbers or any(n <= 0 for n in numbers):
                raise ValueError("volta requires positive pass numbers")
        elif numbers:
            raise ValueError("volta_numbers only apply to volta marks")
        self.kind = kind
        self.volta_numbers = numbers

    def __repr__(self):
        extra = f", passes={sorted(self.volta_numbers)}" if self.volta_numbers else ""
        return f"NavigationMark({self.kind}{extra})"


class Part:
    """A score part: a timeline of TimePoints plus registered objects.

    ``divs_map`` is piecewise constant divs-per-quarter, defined from div 0.
    """

    def __init__(self, id: str, name: str = "", staff_count: int = 1,
                 divs_per_quarter: int = 1):
        if staff_count < 1:
            raise ValueError("staff_count must be positive")
        self.id = id
        self.name = name
        self.staff_count = int(staff_count)
        self._points: dict[int, TimePoint] = {}
        self._ts: list[int] = []  # sorted div positions of the timepoints
        self._divs_map: list[tuple[int, int]] = [(0, int(divs_per_quarter))]
        self._note_ids: set[str] = set()
        self._frozen = False

    # -- lifecycle ---------------------------------------------------

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> "Part":
        """Mark the part immutable. Returns self for chaining."""
        self._frozen = True
        return self

    def require_frozen(self):
        if not self._frozen:
            raise StateError(f"part {self.id!r} must be frozen first")

    def _require_mutable(self):
        if self._frozen:
            raise StateError(f"part {self.id!r} is frozen")

    # -- divs map ----------------------------------------------------

    def set_quarter_divisions(self, start_div: int, divs_per_quarter: int):
        """Declare divs-per-quarter from ``start_div`` onward."""
        self._require_mutable()
        if divs_per_quarter <= 0:
            raise RangeError("divs_per_quarter must be positive")
        if start_div < 0:
            raise RangeError("divisions change at negative time")
        entries = [e for e in self._divs_map if e[0] != start_div]
        entries.append((int(start_div), int(divs_per_quarter)))
        entries.sort()
        if entries[0][0] != 0:
            raise RangeError("divs_map must be defined at div 0")
        self._divs_map = entries

    @property
    def divs_map(self) -> tuple[tuple[int, int], ...]:
        return tuple(self._divs_map)

    @property
    def divs_per_quarter(self) -> int:
        """The divs-per-quarter at div 0 (constant for all file loaders)."""
        return self._divs_map[0][1]

    # -- timeline ----------------------------------------------------

    def get_or_create_point(self, t: int) -> TimePoint:
        self._require_mutable()
        if t < 0:
            raise RangeError(f"negative div position {t}")
        if not isinstance(t, int):
            raise RangeError(f"div position must be an integer, got {t!r}")
        point = self._points.get(t)
        if point is None:
            point = TimePoint(t)
            self._points[t] = point
            bisect.insort(self._ts, t)
        return point

    def point_at(self, t: int) -> Optional[TimePoint]:
        return self._points.get(t)

    def points(self) -> Iterator[TimePoint]:
        """Iterate time points in strictly increasing div order."""
        for t in self._ts:
            yield self._points[t]

    @property
    def first_div(self) -> int:
        return self._ts[0] if self._ts else 0

    @property
    def last_div(self) -> int:
        return self._ts[-1] if self._ts else 0

    # -- registration ------------------------------------------------

    def add(self, obj: TimedObject, start_div: int, end_div: Optional[int] = None):
        """Register ``obj`` on the timeline at ``[start_div, end_div]``.

        ``end_div`` defaults to ``start_div`` for point-like objects.
        Notes must have positive div duration; grace notes zero.
        """
        self._require_mutable()
        if end_div is None:
            end_div = start_div
        if start_div < 0 or end_div < 0:
            raise RangeError(
                f"object times must be non-negative, got [{start_div}, {end_div}]"
            )
        if end_div < start_div:
            raise RangeError(f"end {end_div} precedes start {start_div}")
        if isinstance(obj, GraceNote):
            if end_div != start_div:
                raise RangeError("grace notes occupy zero div duration")
        elif isinstance(obj, Note) and end_div <= start_div:
            raise RangeError("notes must have positive div duration")
        if isinstance(obj, (Note, Rest)):
            if obj.id in self._note_ids:
                raise IdentityError(f"duplicate note id {obj.id!r} in part {self.id!r}")
            self._note_ids.add(obj.id)
        start = self.get_or_create_point(start_div)
        end = self.get_or_create_point(end_div)
        start.starting[obj] = None
        end.ending[obj] = None
        obj.start = start
        obj.end = end
        return obj

    # -- queries -----------------------------------------------------

    def iter_all(self, cls=TimedObject) -> Iterator[TimedObject]:
        """All registered objects of ``cls``, ordered by start div (stable)."""
        for point in self.points():
            for obj in point.starting:
                if isinstance(obj, cls):
                    yield obj

    @property
    def notes(self) -> list[Note]:
        return list(self.iter_all(Note))

    @property
    def rests(self) -> list[Rest]:
        return list(self.iter_all(Rest))

    @property
    def measures(self) -> list[Measure]:
        return list(self.iter_all(Measure))

    @property
    def time_signatures(self) -> list[TimeSignature]:
        return list(self.iter_all(TimeSignature))

    @property
    def key_signatures(self) -> list[KeySignature]:
        return list(self.iter_all(KeySignature))

    @property
    def navigation_marks(self) -> list[NavigationMark]:
        return list(self.iter_all(NavigationMark))

    @property
    def directives(self) -> list[Directive]:
        return list(self.iter_all(Directive))

    @property
    def slurs(self) -> list[Slur]:
        return list(self.iter_all(Slur))

    def note_by_id(self, note_id: str) -> Optional[Note]:
        for note in self.iter_all(Note):
            if note.id == note_id:
                return note
        return None

    def time_signature_at(self, t: int) -> Optional[TimeSignature]:
        """The time signature in force at div ``t`` (the last one at or
        before ``t``; the first one if ``t`` precedes all of them)."""
        sigs = self.time_signatures
        if not sigs:
            return None
        current = sigs[0]
        for sig in sigs:
            if sig.start.t <= t:
                current = sig
            else:
                break
        return current

    def key_signature_at(self, t: int) -> Optional[KeySignature]:
        sigs = self.key_signatures
        if not sigs:
            return None
        current = sigs[0]
        for sig in sigs:
            if sig.start.t <= t:
                current = sig
            else:
                break
        return current

    def __repr__(self):
        return f"Part(id={self.id!r}, points={len(self._ts)})"


class PartGroup:
    """An ordered grouping of parts (or nested groups)."""

    def __init__(self, id: str = "", children: Sequence[Union[Part, "PartGroup"]] = ()):
        self.id = id
        self.children: list[Union[Part, PartGroup]] = list(children)
        ids = [c.id for c in self.children]
        if len(ids) != len(set(ids)):
            raise IdentityError(f"duplicate child ids in group {id!r}")

    def append(self, child: Union[Part, "PartGroup"]):
        if any(c.id == child.id for c in self.children):
            raise IdentityError(f"duplicate child id {child.id!r} in group {self.id!r}")
        self.children.append(child)

    def iter_parts(self) -> Iterator[Part]:
        """All parts in document order, descending into nested groups."""
        for child in self.children:
            if isinstance(child, Part):
                yield child
            else:
                yield from child.iter_parts()

    def __repr__(self):
        return f"PartGroup(id={self.id!r}, children={len(self.children)})"


def notes_sorted(part: Part) -> list[Note]:
    """Notes ordered by (start div, midi pitch, id); stable and deterministic."""
    return sorted(part.iter_all(Note), key=lambda n: (n.start.t, n.midi_pitch, n.id))


# ---------------------------------------------------------------------------
# performances


class PerformedNote:
    __slots__ = ("id", "onset_sec", "duration_sec", "midi_pitch", "velocity",
                 "channel", "track")

    def __init__(self, id, onset_sec, duration_sec, midi_pitch, velocity,
                 channel=0, track=0):
        if onset_sec < 0:
            raise RangeError("onset_sec must be non-negative")
        if duration_sec <= 0:
            raise RangeError("duration_sec must be positive")
        if not 0 <= midi_pitch <= 127:
            raise RangeError(f"midi pitch {midi_pitch} out of 0..127")
        if not 1 <= velocity <= 127:
            raise RangeError(f"velocity {velocity} out of 1..127")
        if not 0 <= channel <= 15:
            raise RangeError(f"channel {channel} out of 0..15")
        if track < 0:
            raise RangeError("track must be non-negative")
        self.id = id
        self.onset_sec = float(onset_sec)
        self.duration_sec = float(duration_sec)
        self.midi_pitch = int(midi_pitch)
        self.velocity = int(velocity)
        self.channel = int(channel)
        self.track = int(track)

    def __repr__(self):
        return (f"PerformedNote(id={self.id!r}, onset={self.onset_sec:.3f}, "
                f"pitch={self.midi_pitch}, vel={self.velocity})")


class ControlEvent:
    __slots__ = ("time_sec", "channel", "controller_number", "value")

    def __init__(self, time_sec, channel, controller_number, value):
        self.time_sec = float(time_sec)
        self.channel = int(channel)
        self.controller_number = int(controller_number)
        self.value = int(value)

    def __repr__(self):
        return (f"ControlEvent(t={self.time_sec:.3f}, cc={self.controller_number}, "
                f"value={self.value})")


class PerformedPart:
    """Ordered performed notes (seconds, velocity) plus control events."""

    def __init__(self, id: str = "P0", ppq: int = 480):
        self.id = id
        self.ppq = int(ppq)  # tick resolution of the source, kept for export
        self.notes: list[PerformedNote] = []
        self.controls: list[ControlEvent] = []
        self.warnings: list = []  # loader warnings, if any
        self._note_ids: set[str] = set()
        self._frozen = False

    @property
    def frozen(self) -> bool:
        return self._frozen

    def add_note(self, note: PerformedNote):
        if self._frozen:
            raise StateError("performed part is frozen")
        if note.id in self._note_ids:
            raise IdentityError(f"duplicate performed note id {note.id!r}")
        self._note_ids.add(note.id)
        self.notes.append(note)

    def add_control(self, control: ControlEvent):
        if self._frozen:
            raise StateError("performed part is frozen")
        self.controls.append(control)

    def freeze(self) -> "PerformedPart":
        self.notes.sort(key=lambda n: (n.onset_sec, n.midi_pitch, n.id))
        self.controls.sort(key=lambda c: (c.time_sec, c.channel, c.controller_number))
        self._frozen = True
        return self

    def require_frozen(self):
        if not self._frozen:
            raise StateError("performed part must be frozen first")

    def note_by_id(self, note_id: str) -> Optional[PerformedNote]:
        for note in self.notes:
            if note.id == note_id:
                return note
        return None

    def __repr__(self):
        return f"PerformedPart(id={self.id!r}, notes={len(self.notes)})"


def generate_note_ids(records: Sequence[tuple]) -> list[str]:
    """Deterministic ids ``n1..nN`` for (onset, pitch) sortable records.

    ``records`` is a sequence of (onset, pitch) tuples in source order; the
    id of each source position reflects its 1-based rank in (onset, pitch)
    order, ties resolved by source position.
    """
    order = sorted(range(len(records)), key=lambda i: (records[i][0], records[i][1], i))
    ids = [""] * len(records)
    for rank, src in enumerate(order, start=1):
        ids[src] = f"n{rank}"
    return ids


# ---------------------------------------------------------------------------
# alignments

ALIGNMENT_LABELS = ("match", "insertion", "deletion", "ornament")


class AlignmentPair:
    __slots__ = ("label", "score_id", "perf_id")

    def __init__(self, label: str, score_id: Optional[str] = None,
                 perf_id: Optional[str] = None):
        if label not in ALIGNMENT_LABELS:
            raise ValueError(f"bad alignment label {label!r}")
        if label in ("match", "ornament") and (score_id is None or perf_id is None):
            raise IdentityError(f"{label} pairs carry both ids")
        if label == "insertion" and (perf_id is None or score_id is not None):
            raise IdentityError("insertion pairs carry only a performance id")
        if label == "deletion" and (score_id is None or perf_id is not None):
            raise IdentityError("deletion pairs carry only a score id")
        self.label = label
        self.score_id = score_id
        self.perf_id = perf_id

    def __eq__(self, other):
        return (isinstance(other, AlignmentPair)
                and (self.label, self.score_id, self.perf_id)
                == (other.label, other.score_id, other.perf_id))

    def __hash__(self):
        return hash((self.label, self.score_id, self.perf_id))

    def __repr__(self):
        return f"AlignmentPair({self.label}, score={self.score_id!r}, perf={self.perf_id!r})"


class Alignment:
    """A sequence of alignment pairs linking score and performance notes."""

    def __init__(self, pairs: Iterable[AlignmentPair] = ()):
        self.pairs: list[AlignmentPair] = []
        self._matched_score: set[str] = set()
        self._matched_perf: set[str] = set()
        for pair in pairs:
            self.append(pair)

    def append(self, pair: AlignmentPair):
        if pair.label == "match":
            if pair.score_id in self._matched_score:
                raise IdentityError(
                    f"score id {pair.score_id!r} in more than one match pair")
            if pair.perf_id in self._matched_perf:
                raise IdentityError(
                    f"performance id {pair.perf_id!r} in more than one match pair")
            self._matched_score.add(pair.score_id)
            self._matched_perf.add(pair.perf_id)
        self.pairs.append(pair)

    def label_counts(self) -> dict[str, int]:
        counts = {label: 0 for label in ALIGNMENT_LABELS}
        for pair in self.pairs:
            counts[pair.label] += 1
        return counts

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __eq__(self, other):
        return isinstance(other, Alignment) and self.pairs == other.pairs

    def __repr__(self):
        return f"Alignment(pairs={len(self.pairs)})"
