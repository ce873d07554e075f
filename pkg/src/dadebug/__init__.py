"""Detect and explain inappropriate chatbot responses from dialogue-act mismatches."""

from .errors import DataError, ModelFormatError, SchemaMismatchError
from .taxonomy import ChatbotDA, UserDA, default_ruleset, load_ruleset
from .transcript import Appropriateness, Dialogue, Utterance, load_transcripts, write_transcripts

__version__ = "0.1.0"

__all__ = [
    "Appropriateness",
    "ChatbotDA",
    "DataError",
    "Dialogue",
    "ModelFormatError",
    "SchemaMismatchError",
    "UserDA",
    "Utterance",
    "default_ruleset",
    "load_ruleset",
    "load_transcripts",
    "write_transcripts",
]
