import io
import random
from pathlib import Path

import pytest

from scoreline.exceptions import IdentityError, ParseError
from scoreline.formats.matchfile import load_corresp, load_match, save_match
from scoreline.formats.musicxml import load_musicxml
from scoreline.model import (
    Alignment,
    AlignmentPair,
    PerformedNote,
    PerformedPart,
)

DATA = Path(__file__).parent / "data"


def test_single_match_line():
    text = (b"info(midiClockUnits,480).\ninfo(midiClockRate,500000).\n"
            b"snote(s1,[C,0],4,1:1,0,1,0,1,[])-note(p1,60,0,480,64,0,0).\n")
    performance, alignment, _score = load_match(text)
    assert len(alignment) == 1
    assert alignment.pairs[0] == AlignmentPair("match", "s1", "p1")
    (note,) = performance.notes
    assert note.midi_pitch == 60
    assert note.onset_sec == pytest.approx(0.0)
    assert note.duration_sec == pytest.approx(0.5)


def test_pair_multiset():
    _perf, alignment, _score = load_match(DATA / "example.match")
    assert alignment.label_counts() == {
        "match": 3, "insertion": 1, "deletion": 1, "ornament": 0}


def test_score_reconstruction():
    perf, alignment, score = load_match(DATA / "example.match")
    assert score is not None
    (part,) = score.part_list()
    assert [n.id for n in part.notes] == ["n1", "n2", "n3", "n4"]
    assert part.note_by_id("n4").alter == 1
    (ts,) = part.time_signatures
    assert (ts.beats, ts.beat_type) == (4, 4)
    assert part.measures


def test_roundtrip_preserves_alignment_and_performance():
    perf, alignment, score = load_match(DATA / "example.match")
    buffer = io.StringIO()
    save_match(score.part_list()[0] if score else None, perf, alignment, buffer)
    perf2, alignment2, _score2 = load_match(buffer.getvalue().encode("utf-8"))
    assert alignment2 == alignment
    assert [(n.id, n.onset_sec, n.duration_sec, n.midi_pitch, n.velocity,
             n.channel, n.track) for n in perf2.notes] == \
           [(n.id, n.onset_sec, n.duration_sec, n.midi_pitch, n.velocity,
             n.channel, n.track) for n in perf.notes]


def test_save_is_byte_stable():
    rng = random.Random(11)
    for _trial in range(20):
        performance = PerformedPart()
        alignment = Alignment()
        n = rng.randrange(1, 50)
        for k in range(n):
            onset = round(rng.uniform(0, 20), 3)
            pitch = rng.randrange(21, 108)
            note = PerformedNote(f"p{k}", onset, round(rng.uniform(0.05, 2), 3),
                                 pitch, rng.randrange(1, 128),
                                 rng.randrange(0, 16), rng.randrange(0, 3))
            performance.add_note(note)
            alignment.append(AlignmentPair("insertion", perf_id=f"p{k}"))
        performance.freeze()
        first = io.StringIO()
        save_match(None, performance, alignment, first)
        perf2, alignment2, _ = load_match(first.getvalue().encode("utf-8"))
        second = io.StringIO()
        save_match(None, perf2, alignment2, second)
        assert first.getvalue() == second.getvalue()


def test_empty_alignment_header_only():
    buffer = io.StringIO()
    save_match(None, PerformedPart().freeze(), Alignment(), buffer)
    lines = [l for l in buffer.getvalue().splitlines() if l]
    assert all(l.startswith("info(") for l in lines)


def test_malformed_line_reports_number():
    text = b"snote(bad line\n"
    with pytest.raises(ParseError) as err:
        load_match(text)
    assert "1" in str(err.value)


def test_duplicate_ids_rejected():
    text = (b"snote(s1,[C,0],4,1:1,0,1,0,1,[])-note(p1,60,0,480,64,0,0).\n"
            b"snote(s1,[D,0],4,1:2,0,1,1,2,[])-note(p2,62,480,960,64,0,0).\n")
    with pytest.raises(IdentityError):
        load_match(text)


def test_unresolved_id_on_save():
    performance = PerformedPart().freeze()
    alignment = Alignment([AlignmentPair("insertion", perf_id="ghost")])
    with pytest.raises(IdentityError):
        save_match(None, performance, alignment, io.StringIO())


def test_match_from_real_part_roundtrips():
    doc = load_musicxml(DATA / "anacrusis_12_8.musicxml")
    part = doc.part_list()[0]
    performance = PerformedPart()
    alignment = Alignment()
    notes = [n for n in part.notes]
    for k, note in enumerate(sorted(notes, key=lambda n: (n.start.t, n.midi_pitch))):
        perf_note = PerformedNote(f"p{k}", 0.25 * k + 0.01, 0.2,
                                  note.midi_pitch, 60 + k)
        performance.add_note(perf_note)
        alignment.append(AlignmentPair("match", note.id, f"p{k}"))
    performance.freeze()
    buffer = io.StringIO()
    save_match(part, performance, alignment, buffer)
    perf2, alignment2, score2 = load_match(buffer.getvalue().encode("utf-8"))
    assert alignment2 == alignment
    assert len(perf2.notes) == len(performance.notes)
    # anacrusis: the first score note sits at slow beat -1
    assert "-1," in buffer.getvalue().splitlines()[4]


def test_corresp_basic():
    alignment = load_corresp(DATA / "example.corresp")
    assert alignment.label_counts() == {
        "match": 3, "insertion": 1, "deletion": 1, "ornament": 0}
    first = alignment.pairs[0]
    assert first == AlignmentPair("match", score_id="n1", perf_id="1")


def test_corresp_all_matches_cardinality():
    rows = ["\t".join([f"a{k}", "0.0", "C4", "60", "64",
                       f"r{k}", "0.0", "C4", "60", "0"]) for k in range(7)]
    alignment = load_corresp(("\n".join(rows) + "\n").encode("utf-8"))
    assert alignment.label_counts()["match"] == 7
    assert len(alignment) == 7


def test_corresp_column_mismatch():
    with pytest.raises(ParseError) as err:
        load_corresp(b"a\tb\tc\n")
    assert "1" in str(err.value)
