from pathlib import Path

import pytest

from scoreline.exceptions import ParseError
from scoreline.formats.mei import load_mei
from scoreline.model import notes_sorted

DATA = Path(__file__).parent / "data"

MINIMAL = b"""<?xml version="1.0"?>
<mei xmlns="http://www.music-encoding.org/ns/mei">
  <music><body><mdiv><score>
    <scoreDef meter.count="4" meter.unit="4">
      <staffGrp><staffDef n="1"/></staffGrp>
    </scoreDef>
    <section>
      <measure n="1">
        <staff n="1"><layer n="1">
          <note pname="c" oct="4" dur="1"/>
        </layer></staff>
      </measure>
    </section>
  </score></mdiv></body></music>
</mei>
"""


def test_minimal_whole_note():
    doc = load_mei(MINIMAL)
    (part,) = doc.part_list()
    (note,) = part.notes
    assert note.midi_pitch == 60
    assert (note.start.t, note.end.t) == (0, 4 * part.divs_per_quarter)
    (ts,) = part.time_signatures
    assert (ts.beats, ts.beat_type) == (4, 4)


def test_chord_shares_span():
    data = MINIMAL.replace(
        b'<note pname="c" oct="4" dur="1"/>',
        b'<chord dur="4"><note pname="c" oct="5"/><note pname="e" oct="5"/></chord>')
    doc = load_mei(data)
    (part,) = doc.part_list()
    notes = notes_sorted(part)
    assert [n.midi_pitch for n in notes] == [72, 76]
    assert notes[0].start.t == notes[1].start.t == 0
    assert notes[0].end.t == notes[1].end.t == part.divs_per_quarter


def test_rptend_at_measure_end():
    data = MINIMAL.replace(b'<measure n="1">', b'<measure n="1" right="rptend">')
    doc = load_mei(data)
    (part,) = doc.part_list()
    (mark,) = part.navigation_marks
    (measure,) = part.measures
    assert mark.kind == "repeat_end"
    assert mark.start.t == measure.end.t


def test_violin_fixture():
    doc = load_mei(DATA / "violin.mei")
    (part,) = doc.part_list()
    assert part.name == "Violin"
    dpq = part.divs_per_quarter
    assert dpq == 3  # triplet eighths need denominator 3
    notes = notes_sorted(part)
    by_id = {n.id: n for n in notes}

    # key signature (2 sharps) spells written f as F#
    assert by_id["m1n1"].midi_pitch == 66
    # explicit natural overrides the signature
    assert by_id["m1n2"].alter == 0
    # triplet eighths: each 1/3 quarter
    assert by_id["m1n3"].duration_div == 1
    assert by_id["m1n3"].start.t == 3 * dpq
    assert by_id["m1n5"].end.t == 4 * dpq
    # the second tuplet note is also sharpened by the key signature
    assert by_id["m1n5"].alter == 1

    # measures tile: 1 + 1 + 2 measures of 4 quarters
    assert [(m.start.t, m.end.t) for m in part.measures] == \
        [(0, 12), (12, 24), (24, 36), (36, 48)]

    marks = {(m.kind, m.start.t, m.end.t, tuple(sorted(m.volta_numbers)))
             for m in part.navigation_marks}
    assert ("repeat_start", 0, 0, ()) in marks
    assert ("repeat_end", 24, 24, ()) in marks
    assert ("volta", 12, 24, (1,)) in marks
    assert ("volta", 24, 48, (2,)) in marks

    assert (by_id["m3n1"].tie, by_id["m4n1"].tie) == ("start", "stop")
    (slur,) = part.slurs
    assert (slur.start_note_id, slur.end_note_id) == ("m1n1", "m1n2")
    (ks,) = part.key_signatures
    assert (ks.fifths, ks.mode) == (2, "major")


def test_wrong_root_rejected():
    with pytest.raises(ParseError):
        load_mei(b"<music/>")


def test_malformed_rejected():
    with pytest.raises(ParseError):
        load_mei(b"<mei><unclosed>")


def test_generated_ids_when_missing():
    doc = load_mei(MINIMAL)
    (part,) = doc.part_list()
    assert part.notes[0].id == "n1"
