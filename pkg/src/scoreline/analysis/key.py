"""Key signature estimation by pitch-class profile correlation.

The duration-weighted pitch-class distribution of the input is correlated
(Pearson) against 24 reference profiles: the major and minor probe-tone
profiles in all twelve rotations.  The default profiles are the
Krumhansl-Kessler ratings; alternates can be injected for experiments.
"""

from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from ..document import ScoreDocument
from ..exceptions import DegenerateInputError, EmptyInputError
from ..model import Part, PartGroup, PerformedPart
from ..notearray import collect_parts, is_performance
from ..timeunits import quarter_map

# Krumhansl-Kessler probe-tone profiles (major/minor, tonic first)
MAJOR_PROFILE = (6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88)
MINOR_PROFILE = (6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17)

# tonic names for each pitch class, using the enharmonic spelling with the
# fewest accidentals in the key signature; (name, fifths) per mode
MAJOR_KEYS = [("C", 0), ("Db", -5), ("D", 2), ("Eb", -3), ("E", 4), ("F", -1),
              ("F#", 6), ("G", 1), ("Ab", -4), ("A", 3), ("Bb", -2), ("B", 5)]
MINOR_KEYS = [("C", -3), ("C#", 4), ("D", -1), ("D#", 6), ("E", 1), ("F", -4),
              ("F#", 3), ("G", -2), ("G#", 5), ("A", 0), ("Bb", -5), ("B", 2)]


def key_name(pitch_class: int, mode: str) -> str:
    if mode == "minor":
        return MINOR_KEYS[pitch_class % 12][0] + "m"
    return MAJOR_KEYS[pitch_class % 12][0]


def key_signature_of(name: str) -> tuple[int, str]:
    """(fifths, mode) of a key name as returned by :func:`estimate_key`."""
    mode = "minor" if name.endswith("m") and len(name) > 1 else "major"
    tonic = name[:-1] if mode == "minor" else name
    table = MINOR_KEYS if mode == "minor" else MAJOR_KEYS
    for candidate, fifths in table:
        if candidate == tonic:
            return fifths, mode
    raise ValueError(f"unknown key name {name!r}")


def _weighted_pitches(source) -> list[tuple[int, float]]:
    if is_performance(source):
        source.require_frozen()
        return [(n.midi_pitch, n.duration_sec) for n in source.notes]
    if isinstance(source, np.ndarray):
        names = source.dtype.names or ()
        if "duration_quarter" in names:
            return [(int(r["pitch"]), float(r["duration_quarter"])) for r in source]
        if "duration_sec" in names:
            return [(int(r["pitch"]), float(r["duration_sec"])) for r in source]
        raise TypeError("note array lacks duration fields")
    pitches = []
    for part in collect_parts(source):
        qmap = quarter_map(part)
        for note in part.notes:
            weight = float(qmap(note.end.t) - qmap(note.start.t))
            pitches.append((note.midi_pitch, weight))
    return pitches


def pitch_class_distribution(source) -> np.ndarray:
    """Duration-weighted pitch-class histogram (quarters for scores,
    seconds for performances)."""
    weighted = _weighted_pitches(source)
    if not weighted:
        raise EmptyInputError("no notes to estimate a key from")
    dist = np.zeros(12)
    for pitch, weight in weighted:
        dist[pitch % 12] += weight
    return dist


def estimate_key(source: Union[Part, PerformedPart, ScoreDocument, PartGroup, np.ndarray],
                 major_profile: Optional[Sequence[float]] = None,
                 minor_profile: Optional[Sequence[float]] = None) -> str:
    """Estimate the key, returned as tonic name plus 'm' for minor
    (e.g. 'C', 'Cm', 'F#m').

    Ties are broken deterministically: lowest tonic pitch class first,
    major before minor.
    """
    dist = pitch_class_distribution(source)
    if np.ptp(dist) == 0:
        raise DegenerateInputError(
            "constant pitch-class distribution has no defined correlation")
    profiles = {
        "major": np.asarray(major_profile if major_profile is not None
                            else MAJOR_PROFILE, dtype=float),
        "minor": np.asarray(minor_profile if minor_profile is not None
                            else MINOR_PROFILE, dtype=float),
    }
    for mode, profile in profiles.items():
        if profile.shape != (12,):
            raise ValueError(f"{mode} profile must have 12 weights")
        if np.ptp(profile) == 0:
            raise DegenerateInputError(f"{mode} profile is degenerate (constant)")

    best = None
    best_r = -np.inf
    for pitch_class in range(12):
        for mode in ("major", "minor"):
            rotated = np.roll(profiles[mode], pitch_class)
            r = np.corrcoef(dist, rotated)[0, 1]
            if r > best_r:
                best_r = r
                best = (pitch_class, mode)
    pitch_class, mode = best
    return key_name(pitch_class, mode)
