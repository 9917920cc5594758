"""Music analysis tools: key estimation, pitch spelling, voice separation."""

from .key import (
    MAJOR_PROFILE,
    MINOR_PROFILE,
    estimate_key,
    key_name,
    key_signature_of,
    pitch_class_distribution,
)
from .spelling import apply_spelling, estimate_spelling
from .voices import apply_voices, build_contigs, estimate_voices

__all__ = [
    "MAJOR_PROFILE",
    "MINOR_PROFILE",
    "estimate_key",
    "key_name",
    "key_signature_of",
    "pitch_class_distribution",
    "estimate_spelling",
    "apply_spelling",
    "estimate_voices",
    "apply_voices",
    "build_contigs",
]
