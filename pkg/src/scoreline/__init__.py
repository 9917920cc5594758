"""scoreline: symbolic music processing toolkit.

Parses MusicXML, Humdrum kern, MEI, and MIDI into a timeline score model
(or MIDI into performances), reads and writes alignment files, generates
note arrays and piano rolls, and runs key / spelling / voice estimation
and repetition unfolding.
"""

from . import analysis
from .document import ScoreDocument
from .exceptions import ScorelineError, ScorelineWarning
from .formats import load_performance, load_score, sniff_format
from .formats.kern import load_kern
from .formats.matchfile import load_corresp, load_match, save_match
from .formats.mei import load_mei
from .formats.midi import load_performance_midi, load_score_midi, save_midi
from .formats.musicxml import load_musicxml, save_musicxml
from .model import (
    Alignment,
    AlignmentPair,
    ControlEvent,
    Directive,
    GraceNote,
    KeySignature,
    Measure,
    NavigationMark,
    Note,
    Part,
    PartGroup,
    PerformedNote,
    PerformedPart,
    Rest,
    Slur,
    TimePoint,
    TimeSignature,
    notes_sorted,
)
from .notearray import note_array, note_array_to_csv
from .pianoroll import PianoRoll, compute_pianoroll, pianoroll_to_csv, pianoroll_to_pgm
from .timeunits import convert_time
from .unfold import PlayoutSegment, enumerate_unfoldings, unfold_maximal

__version__ = "0.1.0"

__all__ = [
    "analysis",
    "ScoreDocument",
    "ScorelineError",
    "ScorelineWarning",
    "load_performance",
    "load_score",
    "sniff_format",
    "load_kern",
    "load_corresp",
    "load_match",
    "save_match",
    "load_mei",
    "load_performance_midi",
    "load_score_midi",
    "save_midi",
    "load_musicxml",
    "save_musicxml",
    "Alignment",
    "AlignmentPair",
    "ControlEvent",
    "Directive",
    "GraceNote",
    "KeySignature",
    "Measure",
    "NavigationMark",
    "Note",
    "Part",
    "PartGroup",
    "PerformedNote",
    "PerformedPart",
    "Rest",
    "Slur",
    "TimePoint",
    "TimeSignature",
    "notes_sorted",
    "note_array",
    "note_array_to_csv",
    "PianoRoll",
    "compute_pianoroll",
    "pianoroll_to_csv",
    "pianoroll_to_pgm",
    "convert_time",
    "PlayoutSegment",
    "enumerate_unfoldings",
    "unfold_maximal",
]
