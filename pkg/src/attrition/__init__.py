"""Student non-completion prediction on registrar-style transcript data."""

__version__ = "0.1.0"

from .config import RunConfig
from .labeling import LabeledDataset, OutcomeLabel, balance, enrollment_terms, label_all, label_outcome, window_allowance
from .records import Demographics, EntryInfo, StudentRecord, Term, TranscriptEntry, term_from_index, term_index
from .synthetic import GroundTruth, SynthConfig, generate_cohort, write_cohort

__all__ = [
    "Demographics",
    "EntryInfo",
    "GroundTruth",
    "LabeledDataset",
    "OutcomeLabel",
    "RunConfig",
    "StudentRecord",
    "SynthConfig",
    "Term",
    "TranscriptEntry",
    "balance",
    "enrollment_terms",
    "generate_cohort",
    "label_all",
    "label_outcome",
    "term_from_index",
    "term_index",
    "window_allowance",
    "write_cohort",
]
