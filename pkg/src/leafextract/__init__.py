"""Front-most leaf extraction from outdoor photographs."""

from .errors import LeafExtractError, MarkerVanishedError, NoLeafCandidateError, NoVeinFoundError
from .evaluation import EvaluationReport, evaluate_corpus, precision_recall
from .pipeline import ExtractionResult, PipelineConfig, extract_leaf
from .synthetic import generate_synthetic_scene

__all__ = [
    "LeafExtractError",
    "MarkerVanishedError",
    "NoLeafCandidateError",
    "NoVeinFoundError",
    "EvaluationReport",
    "evaluate_corpus",
    "precision_recall",
    "ExtractionResult",
    "PipelineConfig",
    "extract_leaf",
    "generate_synthetic_scene",
]
