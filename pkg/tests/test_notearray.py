from pathlib import Path

import pytest

from scoreline.exceptions import FeatureError, ScorelineWarning
from scoreline.formats.musicxml import load_musicxml
from scoreline.model import Note, Part, PerformedNote, PerformedPart, TimeSignature
from scoreline.notearray import note_array, note_array_to_csv

DATA = Path(__file__).parent / "data"


def test_empty_part_gives_empty_array():
    part = Part("P1").freeze()
    arr = note_array(part)
    assert len(arr) == 0
    assert "onset_quarter" in arr.dtype.names


def test_minimal_whole_note_fields():
    doc = load_musicxml(DATA / "minimal.musicxml")
    arr = note_array(doc, include_time_signature=True)
    assert len(arr) == 1
    rec = arr[0]
    assert rec["onset_quarter"] == 0.0 and rec["duration_quarter"] == 4.0
    assert rec["onset_beat"] == 0.0 and rec["duration_beat"] == 4.0
    assert rec["onset_div"] == 0 and rec["duration_div"] == 4
    assert rec["pitch"] == 60 and rec["voice"] == 1
    assert rec["ts_beats"] == 4 and rec["ts_beat_type"] == 4


def test_anacrusis_upper_staff_quarters():
    doc = load_musicxml(DATA / "anacrusis_12_8.musicxml")
    arr = note_array(doc)
    upper = arr[arr["voice"] == 1]
    assert list(upper["onset_quarter"]) == [0.0, 1.0, 5.0, 6.0, 7.0]
    assert upper["onset_beat"][0] == -1.0


def test_tied_notes_merge_to_first_id():
    doc = load_musicxml(DATA / "ties_slurs_grace.musicxml")
    arr = note_array(doc)
    tied = arr[arr["id"] == "t1"]
    assert len(tied) == 1
    assert tied[0]["duration_quarter"] == 4.0  # two tied halves
    assert "t2" not in arr["id"]
    # grace note kept with zero duration
    grace = arr[arr["id"] == "g1"]
    assert len(grace) == 1 and grace[0]["duration_div"] == 0

    unmerged = note_array(doc, merge_tied_notes=False)
    assert "t2" in unmerged["id"]
    assert len(unmerged) == len(arr) + 1


def test_sorted_by_onset_pitch_id():
    part = Part("P1", divs_per_quarter=1)
    part.add(TimeSignature(4, 4), 0)
    part.add(Note("z", "E", 0, 4), 0, 1)
    part.add(Note("a", "C", 0, 4), 0, 1)
    part.add(Note("b", "C", 0, 5), 1, 2)
    part.freeze()
    arr = note_array(part)
    assert list(arr["id"]) == ["a", "z", "b"]


def test_beat_columns_fall_back_to_quarters_without_ts():
    part = Part("P1", divs_per_quarter=2)
    part.add(Note("n1", "C"), 0, 4)
    part.freeze()
    with pytest.warns(ScorelineWarning):
        arr = note_array(part)
    assert arr[0]["onset_beat"] == arr[0]["onset_quarter"]
    assert arr[0]["duration_beat"] == 2.0


def test_extra_features_and_errors():
    doc = load_musicxml(DATA / "minimal.musicxml")
    arr = note_array(doc, extra_features=[
        ("octave", lambda note, part: note.octave),
        ("name", lambda note, part: note.step),
    ])
    assert arr[0]["octave"] == 4.0
    assert arr[0]["name"] == "C"

    def broken(note, part):
        raise ValueError("boom")

    with pytest.raises(FeatureError) as err:
        note_array(doc, extra_features=[("bad", broken)])
    assert "bad" in str(err.value) and "n1" in str(err.value)


def test_performance_note_array():
    pp = PerformedPart()
    pp.add_note(PerformedNote("n2", 1.0, 0.5, 64, 80, channel=1, track=2))
    pp.add_note(PerformedNote("n1", 0.0, 1.0, 60, 90))
    pp.freeze()
    arr = note_array(pp)
    assert arr.dtype.names == ("onset_sec", "duration_sec", "pitch", "velocity",
                               "track", "channel", "id")
    assert list(arr["id"]) == ["n1", "n2"]
    assert arr[1]["velocity"] == 80 and arr[1]["channel"] == 1 and arr[1]["track"] == 2


def test_csv_emission_deterministic():
    doc = load_musicxml(DATA / "anacrusis_12_8.musicxml")
    text_a = note_array_to_csv(note_array(doc))
    text_b = note_array_to_csv(note_array(load_musicxml(DATA / "anacrusis_12_8.musicxml")))
    assert text_a == text_b
    header = text_a.splitlines()[0]
    assert header.startswith("onset_beat,duration_beat,onset_quarter")
    assert len(text_a.splitlines()) == 1 + 8  # 8 notes


def test_multi_part_document_merged():
    doc = load_musicxml(DATA / "two_parts.musicxml")
    arr = note_array(doc)
    assert len(arr) == 2
    assert list(arr["pitch"]) == [48, 60]  # sorted by onset then pitch
