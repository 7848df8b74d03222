"""Self-supervised agglomerative clustering for speaker diarization."""

__version__ = "0.1.0"

from .model import (ClusterState, Hyperparams, Recording, SpeakerTurn, read_embeddings,
                    read_rttm, write_embeddings, write_rttm)
from .pipeline import DiarizationResult, run_baseline, run_ssa
from .scoring import DerReport, compute_der

__all__ = [
    "ClusterState", "DerReport", "DiarizationResult", "Hyperparams", "Recording",
    "SpeakerTurn", "compute_der", "read_embeddings", "read_rttm", "run_baseline",
    "run_ssa", "write_embeddings", "write_rttm",
]
