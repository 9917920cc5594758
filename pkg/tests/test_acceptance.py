"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test prints a PASS line when its criterion holds; a failing assertion
marks the criterion FAIL.  Run with ``pytest -s tests/test_acceptance.py``
to see the per-criterion report.
"""

import io
import random
import time
from fractions import Fraction
from pathlib import Path

import pytest

import midi_bytes as mb
from scoreline.analysis.key import estimate_key, key_name
from scoreline.analysis.spelling import estimate_spelling
from scoreline.analysis.voices import build_contigs, estimate_voices
from scoreline.formats import load_score
from scoreline.formats.matchfile import load_match, save_match
from scoreline.formats.midi import load_performance_midi, save_midi
from scoreline.formats.musicxml import load_musicxml, save_musicxml
from scoreline.model import Note, Part, notes_sorted
from scoreline.notearray import note_array
from scoreline.pianoroll import compute_pianoroll
from scoreline.timeunits import convert_time
from scoreline.unfold import enumerate_unfoldings, unfold_maximal

from test_key import oracle_key, part_distribution, scale_part
from test_spelling import oracle_spelling

DATA = Path(__file__).parent / "data"

CORPUS_SCORES = [
    "minimal.musicxml",
    "two_parts.musicxml",
    "divisions_change.musicxml",
    "anacrusis_12_8.musicxml",
    "seven_quarter_span_12_8.musicxml",
    "repeat_voltas.musicxml",
    "da_capo_fine.musicxml",
    "ties_slurs_grace.musicxml",
    "scale.krn",
    "grand_staff.krn",
    "line_upper.krn",
    "line_lower.krn",
    "violin.mei",
]


def report(name):
    print(f"ACCEPTANCE {name}: PASS")


def test_piano_roll_shape():
    """A bundled 12/8 score spanning 7 quarters, time_div=4, piano range
    -> shape exactly (88, 28); runtime < 1 s."""
    started = time.perf_counter()
    doc = load_score(DATA / "seven_quarter_span_12_8.musicxml")
    roll = compute_pianoroll(doc, time_div=4, piano_range=True)
    elapsed = time.perf_counter() - started
    assert roll.shape == (88, 28)
    assert elapsed < 1.0
    report("piano-roll shape (88, 28)")


def test_time_unit_example():
    """The bundled anacrusis score: upper-staff onset quarters begin
    [0, 1, 5, 6, 7]; the anacrusis note sits at slow beat -1. Exact
    rational equality."""
    doc = load_score(DATA / "anacrusis_12_8.musicxml")
    (part,) = doc.part_list()
    upper = [n for n in notes_sorted(part) if n.voice == 1]
    quarters = [convert_time(part, n.start.t, "div", "quarter") for n in upper]
    assert quarters[:5] == [Fraction(0), Fraction(1), Fraction(5), Fraction(6),
                            Fraction(7)]
    first_beat = convert_time(part, upper[0].start.t, "div", "beat",
                              beat_mode="slow")
    assert first_beat == Fraction(-1)
    arr = note_array(part)
    voiced = arr[arr["voice"] == 1]
    assert list(voiced["onset_quarter"][:5]) == [0.0, 1.0, 5.0, 6.0, 7.0]
    assert voiced["onset_beat"][0] == -1.0
    report("time units: quarters [0,1,5,6,7], slow beat -1")


def test_key_estimation_24_of_24():
    """Major/harmonic-minor scale fixtures with doubled tonic: the
    generating key is returned 24/24 and matches a brute-force oracle;
    names use the 'C'/'Cm'/'F#m' format. Runtime < 1 s."""
    started = time.perf_counter()
    hits = 0
    for tonic in range(12):
        for mode in ("major", "minor"):
            part = scale_part(tonic, mode)
            expected = key_name(tonic, mode)
            got = estimate_key(part)
            assert got == oracle_key(part_distribution(part))
            if got == expected:
                hits += 1
    elapsed = time.perf_counter() - started
    assert hits == 24
    assert estimate_key(scale_part(6, "minor")).endswith("m")
    assert estimate_key(scale_part(0, "major")) == "C"
    assert estimate_key(scale_part(6, "minor")) == "F#m"
    assert elapsed < 1.0
    report("key estimation 24/24 against oracle")


def _diatonic_test_set():
    """200 diatonic notes spread over all 15 key signatures (fifths -7..7)."""
    rng = random.Random(1515)
    pitches = []
    per_key = [14 if index < 5 else 13 for index in range(15)]  # 5*14+10*13=200
    for fifths, count in zip(range(-7, 8), per_key):
        tonic_pc = (fifths * 7) % 12
        scale = [(tonic_pc + step) % 12 for step in (0, 2, 4, 5, 7, 9, 11)]
        for _ in range(count):
            degree = rng.choice(scale)
            octave = rng.choice((3, 4, 5))
            pitches.append(12 * (octave + 1) + degree)
    assert len(pitches) == 200
    return pitches


def test_pitch_spelling_oracle_equivalence():
    """200-note diatonic set across all 15 key signatures spelled equal to
    the independent windowed-count oracle (100%); octave-shift invariance
    on 100 randomized inputs."""
    pitches = _diatonic_test_set()
    part = Part("P1", divs_per_quarter=1)
    for k, pitch in enumerate(pitches):
        part.add(Note(f"n{k:03d}", "C", pitch - 60, 4), k, k + 1)
    part.freeze()
    got = [(str(r["step"]), int(r["alter"]), int(r["octave"]))
           for r in estimate_spelling(part)]
    want = oracle_spelling(pitches, 10, 42)
    matches = sum(1 for g, w in zip(got, want) if g == w)
    assert matches == 200

    rng = random.Random(77)
    for _trial in range(100):
        seq = [rng.randrange(36, 84) for _ in range(rng.randrange(1, 30))]
        base_part = Part("P1", divs_per_quarter=1)
        up_part = Part("P2", divs_per_quarter=1)
        for k, pitch in enumerate(seq):
            base_part.add(Note(f"n{k:03d}", "C", pitch - 60, 4), k, k + 1)
            up_part.add(Note(f"n{k:03d}", "C", pitch - 60, 5), k, k + 1)
        base = estimate_spelling(base_part.freeze())
        shifted = estimate_spelling(up_part.freeze())
        assert [(r["step"], r["alter"]) for r in base] == \
               [(r["step"], r["alter"]) for r in shifted]
        assert all(int(s["octave"]) == int(b["octave"]) + 1
                   for b, s in zip(base, shifted))
    report("pitch spelling: 200/200 oracle equality, octave invariance x100")


def test_voice_separation_two_lines():
    """Interleaving the two bundled monophonic lines (>= 9 semitones apart)
    recovers exactly 2 voices with 100% agreement; the contig-internal
    pitch-order invariant holds on 100 randomized inputs."""
    upper = load_score(DATA / "line_upper.krn").part_list()[0]
    lower = load_score(DATA / "line_lower.krn").part_list()[0]
    separation = (min(n.midi_pitch for n in upper.notes)
                  - max(n.midi_pitch for n in lower.notes))
    assert separation >= 9

    merged = Part("MIX", divs_per_quarter=2)
    expected = {}
    for label, part, factor, voice in (("up", upper, 2, 1), ("lo", lower, 1, 2)):
        for note in part.notes:
            new_id = f"{label}-{note.id}"
            merged.add(Note(new_id, note.step, note.alter, note.octave),
                       note.start.t * factor, note.end.t * factor)
            expected[new_id] = voice
    merged.freeze()
    voices = estimate_voices(merged)
    agreement = sum(1 for note, voice in zip(notes_sorted(merged), voices)
                    if expected[note.id] == voice)
    assert len(set(voices)) == 2
    assert agreement == len(expected)  # 100%

    rng = random.Random(31337)
    for _trial in range(100):
        triples = []
        for _ in range(rng.randrange(2, 25)):
            onset = rng.randrange(0, 40)
            triples.append((float(onset), float(onset + rng.randrange(1, 8)),
                            rng.randrange(30, 100)))
        for contig in build_contigs(triples):
            pitches = [triples[i][2] for i in contig.order]
            assert pitches == sorted(pitches, reverse=True)
            for i in contig.order:
                assert triples[i][0] <= contig.start and triples[i][1] >= contig.end
    report("voice separation: 2 voices, 100% agreement, contig invariant x100")


def test_round_trips():
    """(a) score -> MusicXML -> score note arrays identical on every corpus
    file; (b) MIDI performance round-trip identical up to 1 tick; (c) match
    load/save/load identity."""
    for name in CORPUS_SCORES:
        doc = load_score(DATA / name)
        buffer = io.StringIO()
        save_musicxml(doc, buffer)
        again = load_musicxml(buffer.getvalue().encode("utf-8"))
        arr_a = note_array(doc)
        arr_b = note_array(again)
        assert arr_a.dtype == arr_b.dtype, name
        assert len(arr_a) == len(arr_b), name
        for field in arr_a.dtype.names:
            assert list(arr_a[field]) == list(arr_b[field]), (name, field)

    for fixture in (mb.default_tempo_note(), mb.two_tempo_fixture(),
                    mb.zero_velocity_off_fixture(), mb.sustain_pedal_fixture(),
                    mb.quantized_score_fixture()):
        perf = load_performance_midi(fixture)
        buffer = io.BytesIO()
        save_midi(perf, buffer)
        again = load_performance_midi(buffer.getvalue())
        assert len(again.notes) == len(perf.notes)
        tick = 0.5 / perf.ppq  # seconds per tick at the written tempo
        for a, b in zip(perf.notes, again.notes):
            assert abs(a.onset_sec - b.onset_sec) <= tick + 1e-12
            assert abs(a.duration_sec - b.duration_sec) <= tick + 1e-12
            assert (a.midi_pitch, a.velocity, a.channel, a.track) == \
                   (b.midi_pitch, b.velocity, b.channel, b.track)

    perf, alignment, score = load_match(DATA / "example.match")
    buffer = io.StringIO()
    save_match(score.part_list()[0], perf, alignment, buffer)
    perf2, alignment2, _ = load_match(buffer.getvalue().encode("utf-8"))
    assert alignment2 == alignment
    assert [(n.id, n.onset_sec, n.duration_sec, n.midi_pitch, n.velocity,
             n.channel, n.track) for n in perf2.notes] == \
           [(n.id, n.onset_sec, n.duration_sec, n.midi_pitch, n.velocity,
             n.channel, n.track) for n in perf.notes]
    report("round-trips: MusicXML exact, MIDI within 1 tick, match exact")


def test_unfolding_fixture():
    """The repeat + two-volta fixture enumerates the hand-derived set
    (including the skip variant); the maximal unfolding is [A, v1, A, v2]
    with note count |A|*2 + |v1| + |v2|. Exact."""
    doc = load_score(DATA / "repeat_voltas.musicxml")
    (part,) = doc.part_list()
    unfoldings = enumerate_unfoldings(part)
    spans = [[(s.start_div, s.end_div) for s in u] for u in unfoldings]
    assert spans == [
        [(0, 4), (8, 12)],                   # skip variant
        [(0, 4), (4, 8), (0, 4), (8, 12)],   # maximal: A, v1, A, v2
    ]
    unfolded = unfold_maximal(part)
    a_notes = [n for n in part.notes if n.start.t < 4]
    v1_notes = [n for n in part.notes if 4 <= n.start.t < 8]
    v2_notes = [n for n in part.notes if 8 <= n.start.t < 12]
    assert len(unfolded.notes) == 2 * len(a_notes) + len(v1_notes) + len(v2_notes)
    report("unfolding: enumeration set and maximal [A, v1, A, v2]")


def test_tempo_map_correctness():
    """Two-tempo MIDI fixture: the tick-960 note starts at 0.75 s
    (piecewise integration); tolerance 1e-9 s."""
    perf = load_performance_midi(mb.two_tempo_fixture())
    (note,) = perf.notes
    assert note.onset_sec == pytest.approx(0.75, abs=1e-9)
    report("tempo map: tick 960 -> 0.750000000 s")
