import pytest

from scoreline.exceptions import IdentityError, RangeError, StateError
from scoreline.model import (
    Alignment,
    AlignmentPair,
    GraceNote,
    Note,
    Part,
    PartGroup,
    PerformedNote,
    PerformedPart,
    Rest,
    TimeSignature,
    generate_note_ids,
    midi_pitch_of,
    notes_sorted,
)


def test_first_object_defines_timeline():
    part = Part("P1", divs_per_quarter=4)
    n1 = Note("n1", "C")
    part.add(n1, 0, 4)
    assert [p.t for p in part.points()] == [0, 4]
    assert n1 in part.point_at(0).starting
    assert n1 in part.point_at(4).ending


def test_shared_boundary_timepoint():
    part = Part("P1", divs_per_quarter=4)
    n1 = part.add(Note("n1", "C"), 0, 4)
    n2 = part.add(Note("n2", "D"), 4, 8)
    assert [p.t for p in part.points()] == [0, 4, 8]
    mid = part.point_at(4)
    assert n1 in mid.ending and n2 in mid.starting


def test_negative_time_rejected():
    part = Part("P1")
    with pytest.raises(RangeError):
        part.add(Note("n1", "C"), -1, 3)


def test_duplicate_note_id_rejected():
    part = Part("P1")
    part.add(Note("n1", "C"), 0, 1)
    with pytest.raises(IdentityError):
        part.add(Note("n1", "D"), 1, 2)


def test_zero_duration_note_rejected():
    part = Part("P1")
    with pytest.raises(RangeError):
        part.add(Note("n1", "C"), 2, 2)
    # grace notes are the zero-duration exception
    part.add(GraceNote("g1", "C"), 2, 2)


def test_frozen_part_rejects_mutation():
    part = Part("P1")
    part.add(Note("n1", "C"), 0, 1)
    part.freeze()
    with pytest.raises(StateError):
        part.add(Note("n2", "D"), 1, 2)


def test_midi_pitch_formula_exhaustive():
    # every (step, alter, octave) in range satisfies the formula
    semis = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
    for step, semi in semis.items():
        for alter in range(-2, 3):
            for octave in range(0, 9):
                expected = 12 * (octave + 1) + semi + alter
                assert midi_pitch_of(step, alter, octave) == expected
                note = Note("x", step, alter, octave)
                assert note.midi_pitch == expected


def test_respell_keeps_pitch():
    note = Note("n1", "C", 1, 4)  # C#4 = 61
    note.respell("D", -1, 4)
    assert note.midi_pitch == 61 and note.step == "D"
    with pytest.raises(ValueError):
        note.respell("D", 0, 4)


def test_notes_sorted_orderings():
    part = Part("P1", divs_per_quarter=1)
    assert notes_sorted(part) == []
    part.add(Note("a", "E", 0, 4), 0, 1)   # 64
    part.add(Note("b", "C", 0, 4), 0, 1)   # 60, same onset -> pitch wins
    part.add(Note("n2", "G", 0, 4), 1, 2)  # same onset+pitch as n1 below
    part.add(Note("n1", "G", 0, 4), 1, 2)
    ids = [n.id for n in notes_sorted(part)]
    assert ids == ["b", "a", "n1", "n2"]


def test_timeline_order_insensitive():
    def build(order):
        part = Part("P1", divs_per_quarter=2)
        objs = {
            "n1": (Note("n1", "C"), 0, 4),
            "n2": (Note("n2", "E"), 4, 8),
            "m": (Measure := __import__("scoreline.model", fromlist=["Measure"]).Measure(1), 0, 8),
            "ts": (TimeSignature(4, 4), 0, 0),
        }
        for key in order:
            obj, s, e = objs[key]
            part.add(obj, s, e)
        return part

    a = build(["n1", "n2", "m", "ts"])
    b = build(["ts", "m", "n2", "n1"])
    assert [p.t for p in a.points()] == [p.t for p in b.points()]
    for pa, pb in zip(a.points(), b.points()):
        key = lambda o: (type(o).__name__, getattr(o, "id", ""))
        assert sorted(map(key, pa.starting)) == sorted(map(key, pb.starting))
        assert sorted(map(key, pa.ending)) == sorted(map(key, pb.ending))


def test_part_group_nesting_and_duplicate_ids():
    p1, p2 = Part("P1"), Part("P2")
    inner = PartGroup("G2", [p2])
    root = PartGroup("G1", [p1, inner])
    assert [p.id for p in root.iter_parts()] == ["P1", "P2"]
    with pytest.raises(IdentityError):
        root.append(Part("P1"))


def test_generate_note_ids_rank_order():
    # source order differs from (onset, pitch) order
    records = [(2, 60), (0, 72), (0, 60)]
    assert generate_note_ids(records) == ["n3", "n2", "n1"]


def test_performed_part_freeze_sorts():
    pp = PerformedPart()
    pp.add_note(PerformedNote("a", 1.0, 0.5, 70, 64))
    pp.add_note(PerformedNote("b", 0.5, 0.5, 60, 64))
    pp.add_note(PerformedNote("c", 0.5, 0.5, 55, 64))
    pp.freeze()
    assert [n.id for n in pp.notes] == ["c", "b", "a"]
    dup = PerformedPart()
    dup.add_note(PerformedNote("x", 0.0, 1.0, 60, 64))
    with pytest.raises(IdentityError):
        dup.add_note(PerformedNote("x", 1.0, 1.0, 62, 64))


def test_performed_note_validation():
    with pytest.raises(RangeError):
        PerformedNote("x", 0.0, 1.0, 200, 64)
    with pytest.raises(RangeError):
        PerformedNote("x", 0.0, 0.0, 60, 64)
    with pytest.raises(RangeError):
        PerformedNote("x", 0.0, 1.0, 60, 0)


def test_alignment_pair_invariants():
    Alignment([
        AlignmentPair("match", "s1", "p1"),
        AlignmentPair("insertion", perf_id="p2"),
        AlignmentPair("deletion", score_id="s2"),
        AlignmentPair("ornament", "s3", "p3"),
    ])
    with pytest.raises(IdentityError):
        AlignmentPair("match", "s1", None)
    with pytest.raises(IdentityError):
        AlignmentPair("insertion", score_id="s1", perf_id="p1")
    with pytest.raises(IdentityError):
        AlignmentPair("deletion", perf_id="p1")
    with pytest.raises(IdentityError):
        Alignment([
            AlignmentPair("match", "s1", "p1"),
            AlignmentPair("match", "s1", "p2"),
        ])


def test_rest_ids_share_note_namespace():
    part = Part("P1")
    part.add(Rest("r1"), 0, 4)
    with pytest.raises(IdentityError):
        part.add(Note("r1", "C"), 0, 4)
