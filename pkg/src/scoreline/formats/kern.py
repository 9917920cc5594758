"""Humdrum **kern import.

Supported subset: kern spines with recip durations (including dotted and
rational values), pitch tokens with # / - / n accidentals, chords, rests,
ties, grace notes, spine splits/joins (*^ / *v), barlines with repeat
marks, *M time signatures, *k[...] key signatures, key designations
(*G: etc.), *MM tempo marks, *staff grouping (two adjacent spines under
one staff pair merge into a grand-staff part), and *I" instrument names.
Unsupported interpretations are skipped with a warning.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction

from ..document import ScoreDocument, WarningSink
from ..exceptions import ParseError
from ..model import (
    Directive,
    KeySignature,
    Measure,
    NavigationMark,
    Note,
    GraceNote,
    Part,
    PartGroup,
    Rest,
    TimeSignature,
)

RECIP_RE = re.compile(r"(\d+)(?:%(\d+))?(\.*)")
PITCH_RE = re.compile(r"([a-gA-G]+)(#+|-+|n)?")
TS_RE = re.compile(r"\*M(\d+)/(\d+)")
TEMPO_RE = re.compile(r"\*MM(\d+(?:\.\d+)?)")
KEYSIG_RE = re.compile(r"\*k\[([a-gA-G#\-n]*)\]")
KEYDES_RE = re.compile(r"\*([a-gA-G])([#\-]?):")
STAFF_RE = re.compile(r"\*staff(\d+)")
PART_RE = re.compile(r"\*part(\d+)")
INSTRUMENT_RE = re.compile(r'\*I"(.+)')

def recip_to_quarters(token: str):
    """Duration in quarters of the recip part of a token, or None.

    ``0`` is a breve and ``00`` a longa; ``N%M`` is M/N whole notes.
    Prefix characters (ties, slurs) before the digits are allowed.
    """
    match = RECIP_RE.search(token)
    if not match:
        return None
    digits, rational, dot_marks = match.groups()
    if set(digits) == {"0"}:
        base = Fraction(8) * 2 ** (len(digits) - 1)
    else:
        den = int(rational) if rational else 1
        base = Fraction(4 * den, int(digits))
    value = base
    increment = base
    for _ in range(len(dot_marks)):
        increment /= 2
        value += increment
    return value


def kern_pitch(token: str):
    """(step, alter, octave) from a kern pitch token, or None for rests."""
    if "r" in token:
        return None
    match = PITCH_RE.search(token)
    if not match:
        return None
    letters, accidental = match.group(1), match.group(2) or ""
    if letters != letters[0] * len(letters):
        return None
    if letters[0].islower():
        octave = 3 + len(letters)
    else:
        octave = 4 - len(letters)
    if accidental.startswith("#"):
        alter = len(accidental)
    elif accidental.startswith("-"):
        alter = -len(accidental)
    else:
        alter = 0
    return letters[0].upper(), alter, octave


def kern_key_signature(accidentals: str) -> int:
    """Fifths from the accidental list inside *k[...]: each sharp adds one,
    each flat subtracts one (standard signatures list only one kind)."""
    return accidentals.count("#") - accidentals.count("-")


class _Spine:
    """Content accumulated for one kern spine."""

    def __init__(self, index: int):
        self.index = index
        self.is_kern = True
        self.notes = []   # (onset_q, dur_q, step, alter, octave, tie, grace, voice)
        self.rests = []   # (onset_q, dur_q, voice)
        self.staff = None
        self.part_no = None
        self.name = ""
        self.max_voice = 1


class _Column:
    __slots__ = ("spine", "voice", "cursor")

    def __init__(self, spine: _Spine, voice: int, cursor: Fraction):
        self.spine = spine
        self.voice = voice
        self.cursor = cursor


def load_kern(source, strict: bool = False, source_name: str = "") -> ScoreDocument:
    """Parse a Humdrum **kern document."""
    from . import read_bytes

    data, name = read_bytes(source)
    source_name = source_name or name
    sink = WarningSink(strict=strict, source=source_name)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8 text: {exc}", source=source_name) from exc

    spines: list[_Spine] = []
    columns: list[_Column] = []
    started = False
    # global (shared) events, in quarters
    signatures = []       # (pos_q, beats, beat_type)
    key_signatures = []   # (pos_q, fifths, mode)
    tempos = []           # (pos_q, text)
    measures = []         # (pos_q, number_or_None)
    repeats = []          # (pos_q, kind)

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line or line.startswith("!"):
            continue
        tokens = line.split("\t")

        if not started:
            if all(t.startswith("**") for t in tokens):
                for token in tokens:
                    spine = _Spine(len(spines))
                    spine.is_kern = token == "**kern"
                    if not spine.is_kern:
                        sink.warn(f"line {line_no}", f"ignored spine {token}")
                    spines.append(spine)
                    columns.append(_Column(spine, 1, Fraction(0)))
                started = True
                continue
            raise ParseError("no kern spine", source=source_name, line=line_no)

        if len(tokens) != len(columns):
            # spine manipulator rows change the column count; handle below
            pass

        if all(t.startswith("*") for t in tokens):
            columns = _interpretation_row(tokens, columns, sink, line_no,
                                          signatures, key_signatures, tempos)
            designation = _key_designation_of_row(tokens)
            if designation is not None:
                position = _max_cursor(columns)
                letter, alter, mode = designation
                if key_signatures and key_signatures[-1][0] == position:
                    pos, fifths, _old = key_signatures[-1]
                    key_signatures[-1] = (pos, fifths, mode)
                else:
                    fifths = (LETTER_FIFTHS[letter] + 7 * alter
                              - (3 if mode == "minor" else 0))
                    if -7 <= fifths <= 7:
                        key_signatures.append((position, fifths, mode))
            continue

        first = next((t for t in tokens if t != "."), "")
        if first.startswith("="):
            position = _max_cursor(columns)
            for column in columns:
                column.cursor = position
            number_match = re.search(r"=+(\d+)", first)
            number = int(number_match.group(1)) if number_match else None
            measures.append((position, number))
            if ":|" in first:
                repeats.append((position, "repeat_end"))
            if "|:" in first:
                repeats.append((position, "repeat_start"))
            continue

        if len(tokens) != len(columns):
            sink.warn(f"line {line_no}",
                      f"expected {len(columns)} tokens, got {len(tokens)}; "
                      "line skipped")
            continue
        for column, token in zip(columns, tokens):
            if token == "." or not column.spine.is_kern:
                continue
            _data_token(column, token, sink, line_no)

    if not started:
        raise ParseError("no kern spine", source=source_name)

    end = _max_cursor(columns)
    for spine in spines:
        for onset, dur, *_rest in spine.notes:
            end = max(end, onset + dur)
    return _finalize(spines, signatures, key_signatures, tempos, measures,
                     repeats, end, sink)


def _max_cursor(columns) -> Fraction:
    kern_cursors = [c.cursor for c in columns if c.spine.is_kern]
    return max(kern_cursors, default=Fraction(0))


LETTER_FIFTHS = {"C": 0, "D": 2, "E": 4, "F": -1, "G": 1, "A": 3, "B": 5}


def _key_designation_of_row(tokens):
    """(letter, alter, mode) of a *X: key designation, or None."""
    for token in tokens:
        match = KEYDES_RE.match(token)
        if match:
            letter, accidental = match.groups()
            alter = {"#": 1, "-": -1}.get(accidental, 0)
            mode = "minor" if letter.islower() else "major"
            return letter.upper(), alter, mode
    return None


def _interpretation_row(tokens, columns, sink, line_no, signatures,
                        key_signatures, tempos):
    if any(t in ("*^", "*v", "*-", "*+", "*x") for t in tokens):
        return _manipulate_spines(tokens, columns, sink, line_no)
    recorded_ts = recorded_ks = recorded_tempo = False
    for column, token in zip(columns, tokens):
        spine = column.spine
        match = TS_RE.match(token)
        if match:
            if not recorded_ts:
                signatures.append((column.cursor, int(match.group(1)),
                                   int(match.group(2))))
                recorded_ts = True
            continue
        match = KEYSIG_RE.match(token)
        if match:
            if not recorded_ks:
                fifths = kern_key_signature(match.group(1))
                key_signatures.append((column.cursor, fifths, "major"))
                recorded_ks = True
            continue
        match = TEMPO_RE.match(token)
        if match:
            if not recorded_tempo:
                tempos.append((column.cursor, f"quarter={match.group(1)}"))
                recorded_tempo = True
            continue
        match = STAFF_RE.match(token)
        if match:
            spine.staff = int(match.group(1))
            continue
        match = PART_RE.match(token)
        if match:
            spine.part_no = int(match.group(1))
            continue
        match = INSTRUMENT_RE.match(token)
        if match:
            spine.name = match.group(1)
            continue
        if KEYDES_RE.match(token) or token in ("*", "*-") or token.startswith(
                ("*clef", "*MM", "*met", "*tb", "*ICklav", "*I'", "*>")):
            continue
        if token != "*":
            sink.warn(f"line {line_no}", f"ignored interpretation {token}")
    return columns


def _manipulate_spines(tokens, columns, sink, line_no):
    new_columns = []
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if i >= len(columns):
            sink.warn(f"line {line_no}", "manipulator row wider than spine count")
            break
        column = columns[i]
        if token == "*^":
            column.spine.max_voice += 1
            new_columns.append(column)
            new_columns.append(_Column(column.spine, column.spine.max_voice,
                                       column.cursor))
            i += 1
        elif token == "*v":
            merged = column
            j = i
            while j < len(tokens) and tokens[j] == "*v" and \
                    j < len(columns) and columns[j].spine is column.spine:
                merged.cursor = max(merged.cursor, columns[j].cursor)
                j += 1
            new_columns.append(merged)
            i = j
        elif token == "*-":
            i += 1
        elif token in ("*+", "*x"):
            sink.warn(f"line {line_no}", f"unsupported spine manipulator {token}; "
                      "spine structure flattened")
            new_columns.append(column)
            i += 1
        else:
            new_columns.append(column)
            i += 1
    # keep any remaining columns (defensive against ragged rows)
    new_columns.extend(columns[len(tokens):])
    return new_columns


def _data_token(column, token, sink, line_no):
    spine = column.spine
    grace = "q" in token or "Q" in token
    duration = recip_to_quarters(token)
    if duration is None and not grace:
        sink.warn(f"line {line_no}", f"token {token!r} has no duration; skipped")
        return
    if grace:
        duration = Fraction(0)
    onset = column.cursor
    for subtoken in token.split(" "):
        if not subtoken:
            continue
        if "r" in subtoken and not PITCH_RE.search(subtoken):
            spine.rests.append((onset, duration, column.voice))
            continue
        pitch = kern_pitch(subtoken)
        if pitch is None:
            spine.rests.append((onset, duration, column.voice))
            continue
        step, alter, octave = pitch
        if "[" in subtoken:
            tie = "start"
        elif "]" in subtoken:
            tie = "stop"
        elif "_" in subtoken:
            tie = "continue"
        else:
            tie = "none"
        spine.notes.append((onset, duration, step, alter, octave, tie,
                            grace, column.voice))
    column.cursor = onset + duration


def _finalize(spines, signatures, key_signatures, tempos, measures, repeats,
              end_q, sink) -> ScoreDocument:
    kern_spines = [s for s in spines if s.is_kern]
    if not kern_spines:
        raise ParseError("no kern spine")

    denominators = [end_q.denominator]
    for spine in kern_spines:
        for onset, dur, *_rest in spine.notes:
            denominators.extend((onset.denominator, dur.denominator))
        for onset, dur, _voice in spine.rests:
            denominators.extend((onset.denominator, dur.denominator))
    for pos, *_rest in signatures + key_signatures + tempos + measures:
        denominators.append(pos.denominator)
    dpq = math.lcm(*denominators) if denominators else 1

    # group adjacent spines into grand-staff parts
    groups = []
    i = 0
    while i < len(kern_spines):
        this = kern_spines[i]
        nxt = kern_spines[i + 1] if i + 1 < len(kern_spines) else None
        if nxt is not None and (
                (this.part_no is not None and this.part_no == nxt.part_no)
                or ({this.staff, nxt.staff} == {1, 2})):
            groups.append([this, nxt])
            i += 2
        else:
            groups.append([this])
            i += 1

    def to_div(q: Fraction) -> int:
        scaled = q * dpq
        return int(scaled)

    root = PartGroup("root")
    for index, group in enumerate(groups, start=1):
        # upper staff first inside a grand-staff part
        ordered = sorted(group, key=lambda s: (s.staff or 1, s.index))
        staff_count = len(ordered) if len(ordered) > 1 else 1
        name = next((s.name for s in ordered if s.name), "")
        part = Part(f"P{index}", name=name, staff_count=staff_count,
                    divs_per_quarter=dpq)
        note_specs = []
        rest_specs = []
        voice_base = 0
        for staff_index, spine in enumerate(ordered, start=1):
            staff = staff_index if staff_count > 1 else 1
            for onset, dur, step, alter, octave, tie, grace, voice in spine.notes:
                note_specs.append((to_div(onset), to_div(onset + dur), step, alter,
                                   octave, tie, grace, voice_base + voice, staff))
            for onset, dur, voice in spine.rests:
                rest_specs.append((to_div(onset), to_div(onset + dur),
                                   voice_base + voice, staff))
            voice_base += spine.max_voice
        from ..model import generate_note_ids, midi_pitch_of

        ids = generate_note_ids([
            (spec[0], midi_pitch_of(spec[2], spec[3], spec[4]))
            for spec in note_specs])
        for note_id, (start, end, step, alter, octave, tie, grace, voice,
                      staff) in zip(ids, note_specs):
            cls = GraceNote if grace else Note
            part.add(cls(note_id, step, alter, octave, voice=voice, staff=staff,
                         tie=tie), start, end)
        for k, (start, end, voice, staff) in enumerate(rest_specs, start=1):
            part.add(Rest(f"r{k}", voice=voice, staff=staff), start, end)

        for pos, beats, beat_type in signatures:
            part.add(TimeSignature(beats, beat_type), to_div(pos))
        for pos, fifths, mode in key_signatures:
            part.add(KeySignature(fifths, mode), to_div(pos))
        for pos, text in tempos:
            part.add(Directive("tempo", text), to_div(pos))
        for pos, kind in repeats:
            part.add(NavigationMark(kind), to_div(pos))

        boundaries = sorted({to_div(pos) for pos, _n in measures}
                            | {0, to_div(end_q)})
        numbers = {to_div(pos): n for pos, n in measures if n is not None}
        spans = [(a, b) for a, b in zip(boundaries, boundaries[1:]) if b > a]
        prev = None
        for idx, (start, end) in enumerate(spans):
            if start in numbers:
                number = numbers[start]
            elif prev is not None:
                number = prev + 1
            else:
                # unlabeled leading span: a pickup before the first numbered bar
                following = next((numbers[s] for s, _e in spans[idx + 1:]
                                  if s in numbers), None)
                number = following - 1 if following is not None else idx + 1
            part.add(Measure(number), start, end)
            prev = number
        part.freeze()
        root.append(part)
    return ScoreDocument(root, "kern", sink.items)
