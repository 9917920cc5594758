"""Pitch spelling by windowed tonic counting (first stage of the ps13
method).

For each note, every pitch class is considered as a candidate tonic with a
strength equal to how often that class occurs among the surrounding notes
(a window of ``k_pre`` notes back and ``k_post`` forward in onset order).
Each tonic implies a letter for the note's chroma through the
chromatic-to-morphetic interval table; letter strengths are summed over
tonics and the strongest letter wins.  The accidental then follows from
the letter and the sounding pitch.
"""

from __future__ import annotations

from typing import Union

import numpy as np

from ..document import ScoreDocument
from ..exceptions import RangeError
from ..model import Part, PartGroup, PerformedPart, notes_sorted
from ..notearray import collect_parts, is_performance

# morphetic (letter-step) interval for each chromatic interval above the
# tonic: unison, m2, M2, m3, M3, P4, A4, P5, m6, M6, m7, M7
CHROMATIC_TO_MORPHETIC = tuple((7 * c + 5) // 12 for c in range(12))

# letter index (C=0..B=6) of each tonic pitch class, sharp-named tonics
TONIC_LETTER = (0, 0, 1, 1, 2, 3, 3, 4, 4, 5, 5, 6)

LETTER_NAMES = "CDEFGAB"
LETTER_SEMITONES = (0, 2, 4, 5, 7, 9, 11)

SPELLING_DTYPE = np.dtype([("step", "<U1"), ("alter", "<i8"), ("octave", "<i8")])

DEFAULT_K_PRE = 10
DEFAULT_K_POST = 42


def _onset_sorted_pitches(source) -> list[int]:
    if is_performance(source):
        source.require_frozen()
        return [n.midi_pitch for n in source.notes]
    if isinstance(source, np.ndarray):
        names = source.dtype.names or ()
        onset = "onset_div" if "onset_div" in names else "onset_sec"
        order = sorted(range(len(source)),
                       key=lambda i: (source[i][onset], source[i]["pitch"], i))
        return [int(source[i]["pitch"]) for i in order]
    pitches = []
    for part in collect_parts(source):
        for note in notes_sorted(part):
            pitches.append(note.midi_pitch)
    return pitches


def spell_one(chroma: int, strengths_by_tonic) -> tuple[str, int]:
    """Pick (letter, alter) for a chroma given per-tonic strengths."""
    letter_strength = [0.0] * 7
    for tonic in range(12):
        weight = strengths_by_tonic[tonic]
        if not weight:
            continue
        interval = (chroma - tonic) % 12
        letter = (TONIC_LETTER[tonic] + CHROMATIC_TO_MORPHETIC[interval]) % 7
        letter_strength[letter] += weight

    def candidate(letter: int):
        alter = (chroma - LETTER_SEMITONES[letter] + 5) % 12 - 5  # wrap to -5..6
        # strongest letter first; ties toward small |alter|, then sharps
        return (-letter_strength[letter], abs(alter), 0 if alter >= 0 else 1, letter)

    best = min(range(7), key=candidate)
    alter = (chroma - LETTER_SEMITONES[best] + 5) % 12 - 5
    return LETTER_NAMES[best], alter


def estimate_spelling(source: Union[Part, PerformedPart, ScoreDocument, PartGroup,
                                    np.ndarray],
                      k_pre: int = DEFAULT_K_PRE,
                      k_post: int = DEFAULT_K_POST) -> np.ndarray:
    """Spell every note; returns a (step, alter, octave) record per note in
    onset-then-pitch order."""
    if k_pre < 0 or k_post < 0:
        raise RangeError("window sizes must be non-negative")
    pitches = _onset_sorted_pitches(source)
    chromas = [p % 12 for p in pitches]
    n = len(pitches)

    out = np.empty(n, dtype=SPELLING_DTYPE)
    for i in range(n):
        lo = max(0, i - k_pre)
        hi = min(n, i + k_post)
        counts = [0] * 12
        for j in range(lo, hi):
            counts[chromas[j]] += 1
        step, alter = spell_one(chromas[i], counts)
        octave = (pitches[i] - alter - LETTER_SEMITONES[LETTER_NAMES.index(step)]) // 12 - 1
        out[i] = (step, alter, octave)
    return out


def apply_spelling(part: Part, k_pre: int = DEFAULT_K_PRE,
                   k_post: int = DEFAULT_K_POST) -> None:
    """Respell the notes of an unfrozen part in place."""
    spelled = estimate_spelling(part, k_pre=k_pre, k_post=k_post)
    for note, rec in zip(notes_sorted(part), spelled):
        note.respell(str(rec["step"]), int(rec["alter"]), int(rec["octave"]))
