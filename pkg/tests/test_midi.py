import io
from pathlib import Path

import pytest

import midi_bytes as mb
from scoreline.exceptions import ParseError
from scoreline.formats.midi import (
    load_performance_midi,
    load_score_midi,
    save_midi,
    tempo_directive_us,
)
from scoreline.formats.musicxml import load_musicxml
from scoreline.formats.smf import TempoMap, parse_smf
from scoreline.model import notes_sorted

DATA = Path(__file__).parent / "data"


def test_default_tempo_quarter_note():
    pp = load_performance_midi(mb.default_tempo_note())
    (note,) = pp.notes
    assert note.onset_sec == pytest.approx(0.5, abs=1e-12)
    assert note.duration_sec == pytest.approx(0.5, abs=1e-12)
    assert note.velocity == 80 and note.midi_pitch == 60
    assert note.id == "n1"


def test_two_tempo_piecewise_integration():
    pp = load_performance_midi(mb.two_tempo_fixture())
    (note,) = pp.notes
    # 480 ticks at 500000 (0.5 s) + 480 ticks at 250000 (0.25 s)
    assert note.onset_sec == pytest.approx(0.75, abs=1e-9)
    assert note.duration_sec == pytest.approx(0.25, abs=1e-9)


def test_zero_velocity_note_on_closes_note():
    pp = load_performance_midi(mb.zero_velocity_off_fixture())
    (note,) = pp.notes
    assert note.midi_pitch == 67 and note.channel == 3
    assert note.duration_sec == pytest.approx(0.5)
    assert not pp.warnings


def test_orphan_and_dangling_warnings():
    pp = load_performance_midi(mb.orphan_events_fixture())
    assert len(pp.notes) == 2
    messages = " ".join(w.message for w in pp.warnings)
    assert "orphan note-off" in messages
    assert "dangling note-on" in messages
    with pytest.raises(ParseError):
        load_performance_midi(mb.orphan_events_fixture(), strict=True)


def test_sustain_pedal_captured():
    pp = load_performance_midi(mb.sustain_pedal_fixture())
    assert [(c.controller_number, c.value) for c in pp.controls] == [(64, 127), (64, 0)]
    assert pp.controls[1].time_sec == pytest.approx(0.5)


def test_tempo_map_roundtrip():
    tmap = TempoMap([(0, 500000), (480, 250000)], ppq=480)
    for tick in (0, 100, 480, 700, 960):
        assert tmap.tick_at(tmap.seconds_at(tick)) == pytest.approx(tick, abs=1e-6)
    # strictly increasing
    times = [tmap.seconds_at(t) for t in range(0, 1000, 50)]
    assert all(a < b for a, b in zip(times, times[1:]))


def test_load_score_midi_one_note_spelled():
    data = mb.smf([mb.track([(0, mb.note_on(0, 60, 64)), (4, mb.note_off(0, 60))])],
                  ppq=4, fmt=0)
    doc = load_score_midi(data)
    (part,) = doc.part_list()
    assert part.divs_per_quarter == 4
    (note,) = part.notes
    assert (note.step, note.alter, note.octave) == ("C", 0, 4)
    assert note.voice == 1
    assert (note.start.t, note.end.t) == (0, 4)


def test_load_score_midi_meta_and_partition():
    doc = load_score_midi(mb.quantized_score_fixture())
    parts = doc.part_list()
    assert len(parts) == 2  # (track, channel) partition
    for part in parts:
        (ts,) = part.time_signatures
        assert (ts.beats, ts.beat_type) == (4, 4)
        assert ts.start.t == 0
        assert part.key_signatures  # estimated when absent
        assert part.measures
    melody = parts[0]
    assert [n.start.t for n in notes_sorted(melody)] == [0, 4]


def test_performance_roundtrip_exact():
    pp = load_performance_midi(mb.two_tempo_fixture())
    buffer = io.BytesIO()
    save_midi(pp, buffer)
    again = load_performance_midi(buffer.getvalue())
    assert len(again.notes) == len(pp.notes)
    tick = 0.5 / 480  # one tick at the written tempo
    for a, b in zip(pp.notes, again.notes):
        assert b.onset_sec == pytest.approx(a.onset_sec, abs=tick)
        assert b.duration_sec == pytest.approx(a.duration_sec, abs=tick)
        assert (a.midi_pitch, a.velocity, a.channel, a.track) == \
               (b.midi_pitch, b.velocity, b.channel, b.track)


def test_controls_roundtrip():
    pp = load_performance_midi(mb.sustain_pedal_fixture())
    buffer = io.BytesIO()
    save_midi(pp, buffer)
    again = load_performance_midi(buffer.getvalue())
    assert [(c.time_sec, c.channel, c.controller_number, c.value)
            for c in again.controls] == \
           [(c.time_sec, c.channel, c.controller_number, c.value)
            for c in pp.controls]


def test_score_part_to_midi_and_back():
    doc = load_musicxml(DATA / "minimal.musicxml")
    buffer = io.BytesIO()
    save_midi(doc, buffer)
    data = buffer.getvalue()
    # 3 quarters at default tempo: reload as performance
    pp = load_performance_midi(data)
    (note,) = pp.notes
    assert note.onset_sec == pytest.approx(0.0)
    assert note.duration_sec == pytest.approx(2.0)  # whole note at 120 bpm
    # reload as score: divs preserved exactly
    doc2 = load_score_midi(data)
    (part,) = doc2.part_list()
    (note2,) = part.notes
    assert (note2.start.t, note2.end.t) == (0, 4)
    assert part.divs_per_quarter == 1


def test_three_quarters_at_default_tempo():
    from scoreline.model import Note, Part

    part = Part("P1", divs_per_quarter=2)
    for k in range(3):
        part.add(Note(f"n{k}", "C", 0, 4), 2 * k, 2 * (k + 1))
    part.freeze()
    buffer = io.BytesIO()
    save_midi(part, buffer)
    pp = load_performance_midi(buffer.getvalue())
    assert [n.onset_sec for n in pp.notes] == pytest.approx([0.0, 0.5, 1.0])


def test_tempo_directive_parsing():
    assert tempo_directive_us("quarter=120") == 500000
    assert tempo_directive_us("half=60") == 500000
    assert tempo_directive_us("tempo=120.0") == 500000
    assert tempo_directive_us("Allegro") is None


def test_smpte_division_rejected():
    import struct

    data = b"MThd" + struct.pack(">IHHH", 6, 0, 1, 0x8000 | (25 << 8) | 40)
    with pytest.raises(ParseError):
        parse_smf(data)


def test_type2_rejected():
    import struct

    data = b"MThd" + struct.pack(">IHHH", 6, 2, 0, 480)
    with pytest.raises(ParseError):
        parse_smf(data)
