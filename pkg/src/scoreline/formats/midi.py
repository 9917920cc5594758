"""MIDI import (score or performance reading) and export.

A MIDI file read as a performance becomes a PerformedPart with seconds
computed by piecewise tempo-map integration.  Read as a score, ticks map
directly to divs (divs-per-quarter = ppq, no re-quantization), one part
per (track, channel) pair with notes, and the analysis tools fill in the
missing pitch spelling, voices, and key signature.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Union

from ..document import ScoreDocument, WarningSink
from ..exceptions import EncodeError
from ..model import (
    ControlEvent,
    KeySignature,
    Measure,
    Note,
    Part,
    PartGroup,
    PerformedNote,
    PerformedPart,
    TimeSignature,
    generate_note_ids,
)
from .smf import DEFAULT_TEMPO, SmfData, TempoMap, build_smf, parse_smf

# provisional sharp-wise spelling for unspelled MIDI pitches
SHARP_STEPS = ("C", "C", "D", "D", "E", "F", "F", "G", "G", "A", "A", "B")
SHARP_ALTERS = (0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 1, 0)

# MIDI key signature (sharps/flats count) -> tonic pitch class per mode
_MAJOR_PC_OF_FIFTHS = {sf: (sf * 7) % 12 for sf in range(-7, 8)}


def _tempo_map(smf: SmfData) -> TempoMap:
    entries = []
    for track in smf.tracks:
        for event in track:
            if event[0] == "tempo":
                entries.append((event[1], event[2]))
    return TempoMap(entries, smf.ppq)


def _paired_notes(smf: SmfData, sink: WarningSink):
    """FIFO-match note-on/off per (track, channel, pitch); returns
    (track, channel, pitch, velocity, on_tick, off_tick) tuples."""
    notes = []
    for track_index, track in enumerate(smf.tracks):
        open_notes: dict[tuple[int, int], list] = {}
        end_tick = 0
        for event in track:
            end_tick = max(end_tick, event[1])
            if event[0] == "note_on":
                _kind, tick, channel, pitch, velocity = event
                open_notes.setdefault((channel, pitch), []).append((tick, velocity))
            elif event[0] == "note_off":
                _kind, tick, channel, pitch, _velocity = event
                queue = open_notes.get((channel, pitch))
                if not queue:
                    sink.warn(f"track {track_index}",
                              f"orphan note-off for pitch {pitch} at tick {tick}")
                    continue
                on_tick, velocity = queue.pop(0)
                notes.append((track_index, channel, pitch, velocity, on_tick, tick))
        for (channel, pitch), queue in sorted(open_notes.items()):
            for on_tick, velocity in queue:
                sink.warn(f"track {track_index}",
                          f"dangling note-on for pitch {pitch} at tick {on_tick}; "
                          "closed at end of track")
                if end_tick > on_tick:
                    notes.append((track_index, channel, pitch, velocity,
                                  on_tick, end_tick))
    return notes


def load_performance_midi(source, strict: bool = False,
                          source_name: str = "") -> PerformedPart:
    """Read an SMF file as a performance (onsets and durations in seconds)."""
    from . import read_bytes

    data, name = read_bytes(source)
    source_name = source_name or name
    sink = WarningSink(strict=strict, source=source_name)
    smf = parse_smf(data, source_name)
    tmap = _tempo_map(smf)

    performance = PerformedPart(ppq=smf.ppq)
    raw = _paired_notes(smf, sink)
    specs = []
    for track, channel, pitch, velocity, on_tick, off_tick in raw:
        onset = tmap.seconds_at(on_tick)
        offset = tmap.seconds_at(off_tick)
        if offset <= onset:
            continue
        specs.append((onset, offset - onset, pitch, velocity, channel, track))
    specs.sort(key=lambda s: (s[0], s[2], s[4], s[5]))
    ids = generate_note_ids([(s[0], s[2]) for s in specs])
    for note_id, (onset, duration, pitch, velocity, channel, track) in zip(ids, specs):
        performance.add_note(PerformedNote(
            note_id, onset, duration, pitch, max(velocity, 1), channel, track))

    for track in smf.tracks:
        for event in track:
            if event[0] == "control":
                _kind, tick, channel, number, value = event
                performance.add_control(ControlEvent(
                    tmap.seconds_at(tick), channel, number, value))
    performance.warnings = sink.items
    return performance.freeze()


def load_score_midi(source, strict: bool = False,
                    source_name: str = "") -> ScoreDocument:
    """Read an SMF file as a quantized score: ticks are divs, ppq is the
    divs-per-quarter; spelling/voices/key are estimated when absent."""
    from ..analysis import apply_spelling, apply_voices, estimate_key, key_signature_of
    from ..exceptions import DegenerateInputError, EmptyInputError
    from . import read_bytes

    data, name = read_bytes(source)
    source_name = source_name or name
    sink = WarningSink(strict=strict, source=source_name)
    smf = parse_smf(data, source_name)

    signatures = []
    key_signatures = []
    for track in smf.tracks:
        for event in track:
            if event[0] == "time_signature":
                signatures.append((event[1], event[2], event[3]))
            elif event[0] == "key_signature":
                key_signatures.append((event[1], event[2], event[3]))

    raw = _paired_notes(smf, sink)
    groups: dict[tuple[int, int], list] = {}
    for track, channel, pitch, velocity, on_tick, off_tick in raw:
        if off_tick <= on_tick:
            continue
        groups.setdefault((track, channel), []).append((on_tick, off_tick, pitch))

    root = PartGroup("root")
    parts = []
    for index, key in enumerate(sorted(groups), start=1):
        track, channel = key
        part = Part(f"P{index}", name=f"track {track} channel {channel}",
                    divs_per_quarter=smf.ppq)
        events = sorted(groups[key])
        ids = generate_note_ids([(on, pitch) for on, _off, pitch in events])
        for note_id, (on, off, pitch) in zip(ids, events):
            part.add(Note(note_id, SHARP_STEPS[pitch % 12], SHARP_ALTERS[pitch % 12],
                          pitch // 12 - 1), on, off)
        for tick, numerator, denominator in signatures:
            part.add(TimeSignature(numerator, denominator), tick)
        for tick, sf, mi in key_signatures:
            if -7 <= sf <= 7:
                part.add(KeySignature(sf, "minor" if mi == 1 else "major"), tick)
            else:
                sink.warn(f"tick {tick}", f"key signature {sf} out of range")
        _add_measures(part, signatures)
        parts.append(part)
        root.append(part)

    for part in parts:
        apply_spelling(part)
        apply_voices(part)

    if not key_signatures and parts:
        try:
            name_guess = estimate_key(PartGroup("all", parts))
            fifths, mode = key_signature_of(name_guess)
            for part in parts:
                part.add(KeySignature(fifths, mode), 0)
        except (EmptyInputError, DegenerateInputError) as exc:
            sink.warn("key estimation", str(exc))

    for part in parts:
        part.freeze()
    return ScoreDocument(root, "midi", sink.items)


def _add_measures(part: Part, signatures: list[tuple[int, int, int]]):
    """Tile measures from tick 0 using the signatures in force."""
    end = part.last_div
    if not signatures or end == 0:
        return
    marks = sorted(signatures)
    if marks[0][0] != 0:
        marks.insert(0, (0, marks[0][1], marks[0][2]))
    number = 1
    cursor = 0
    for (start, numerator, denominator), nxt in zip(marks, marks[1:] + [(end, 0, 0)]):
        span = int(Fraction(numerator * 4, denominator) * part.divs_per_quarter)
        if span <= 0:
            continue
        limit = nxt[0]
        while cursor < limit and cursor < end:
            measure_end = min(cursor + span, end)
            part.add(Measure(number), cursor, measure_end)
            number += 1
            cursor = measure_end


TEMPO_TEXT = re.compile(r"(?:^|\b)(whole|half|quarter|eighth|16th|tempo)\s*=\s*(\d+(?:\.\d+)?)")

_UNIT_QUARTERS = {"whole": 4.0, "half": 2.0, "quarter": 1.0, "eighth": 0.5,
                  "16th": 0.25, "tempo": 1.0}


def tempo_directive_us(text: str):
    """Microseconds per quarter from a tempo directive text, or None."""
    match = TEMPO_TEXT.search(text)
    if not match:
        return None
    unit, value = match.group(1), float(match.group(2))
    quarter_bpm = value * _UNIT_QUARTERS[unit]
    if quarter_bpm <= 0:
        return None
    return int(round(60_000_000 / quarter_bpm))


def save_midi(source: Union[Part, PerformedPart, ScoreDocument, PartGroup], sink,
              default_tempo_us: int = DEFAULT_TEMPO) -> None:
    """Write a performance or score as a type 1 SMF."""
    if isinstance(source, PerformedPart):
        data = _performance_smf(source, default_tempo_us)
    else:
        data = _score_smf(source, default_tempo_us)
    if hasattr(sink, "write"):
        sink.write(data)
    else:
        with open(sink, "wb") as handle:
            handle.write(data)


def _performance_smf(performance: PerformedPart, tempo_us: int) -> bytes:
    performance.require_frozen()
    ppq = performance.ppq

    def tick_of(seconds: float) -> int:
        return round(seconds * ppq * 1_000_000 / tempo_us)

    n_tracks = max((n.track for n in performance.notes), default=0) + 1
    tracks = [[] for _ in range(n_tracks)]
    tracks[0].append(("tempo", 0, tempo_us))
    for note in performance.notes:
        if not 0 <= note.midi_pitch <= 127:
            raise EncodeError(f"pitch {note.midi_pitch} out of 0..127")
        on = tick_of(note.onset_sec)
        off = max(tick_of(note.onset_sec + note.duration_sec), on + 1)
        tracks[note.track].append(("note_on", on, note.channel,
                                   note.midi_pitch, note.velocity))
        tracks[note.track].append(("note_off", off, note.channel,
                                   note.midi_pitch, 0))
    for control in performance.controls:
        tracks[0].append(("control", tick_of(control.time_sec), control.channel,
                          control.controller_number, control.value))
    return build_smf(tracks, ppq)


def _score_smf(source, tempo_us: int) -> bytes:
    from ..notearray import collect_parts

    parts = collect_parts(source)
    if not parts:
        return build_smf([[]], 480)
    ppq_values = {p.divs_per_quarter for p in parts}
    if len(ppq_values) > 1:
        raise EncodeError("parts disagree on divs-per-quarter")
    dpq = ppq_values.pop()
    # div positions scale 1:1 to ticks
    conductor = [("tempo", 0, tempo_us)]
    seen_tempo_ticks = {0}
    lead = parts[0]
    for sig in lead.time_signatures:
        conductor.append(("time_signature", sig.start.t, sig.beats, sig.beat_type))
    for key in lead.key_signatures:
        conductor.append(("key_signature", key.start.t, key.fifths,
                          1 if key.mode == "minor" else 0))
    tracks = [conductor]
    for index, part in enumerate(parts):
        channel = index % 16
        track = []
        for directive in part.directives:
            if directive.kind != "tempo":
                continue
            us = tempo_directive_us(directive.text)
            if not us:
                continue
            if directive.start.t == 0:
                conductor[0] = ("tempo", 0, us)
            elif directive.start.t not in seen_tempo_ticks:
                conductor.append(("tempo", directive.start.t, us))
                seen_tempo_ticks.add(directive.start.t)
        for note in part.notes:
            if not 0 <= note.midi_pitch <= 127:
                raise EncodeError(f"pitch {note.midi_pitch} out of 0..127")
            if note.duration_div <= 0:
                continue  # grace notes have no performed duration
            track.append(("note_on", note.start.t, channel, note.midi_pitch, 64))
            track.append(("note_off", note.end.t, channel, note.midi_pitch, 0))
        tracks.append(track)
    return build_smf(tracks, dpq)
