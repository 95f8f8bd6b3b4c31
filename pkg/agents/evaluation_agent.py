# agents/evaluation_agent.py
"""Evaluation step: score predictions against gold samples, overall and per group."""
from __future__ import annotations

from typing import Sequence

import sys
import os
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.append(project_root)

from agents.annotator_agent import classify_answer_type, classify_question
from tools.metrics_tool import EvalConfig, EvalReport, evaluate, evaluate_by_group
from utils.data_utils import Prediction, Sample
from utils.errors import ConfigError, SchemaError
from utils.log_utils import get_logger

logger = get_logger(__name__)

GROUPINGS = ("question_type", "answer_type")


def pair_predictions(predictions: Sequence[Prediction], samples: Sequence[Sample]) -> list[tuple[str, str]]:
    """Predictions line up with samples by position; each must name the same document and question."""
    if len(predictions) != len(samples):
        raise SchemaError(f"{len(predictions)} predictions for {len(samples)} samples")
    pairs = []
    for line, (p, s) in enumerate(zip(predictions, samples), start=1):
        if p.document_id != s.document_id:
            raise SchemaError(f"expected document '{s.document_id}', got '{p.document_id}'", line=line, field="document_id")
        if p.question != s.qa.question:
            raise SchemaError("question differs from the gold sample", line=line, field="question")
        pairs.append((p.prediction, s.qa.answer))
    return pairs


def group_labels(samples: Sequence[Sample], by: str) -> list[str]:
    if by == "question_type":
        return [s.qa.question_type or classify_question(s.qa.question).value for s in samples]
    if by == "answer_type":
        return [s.qa.answer_type or classify_answer_type(s.qa.answer).value for s in samples]
    raise ConfigError(f"unknown grouping '{by}', expected one of {GROUPINGS}")


def run_evaluation(predictions: Sequence[Prediction], samples: Sequence[Sample], config: EvalConfig = EvalConfig(),
                   by: str | None = None) -> tuple[EvalReport, dict[str, EvalReport], dict]:
    logger.info(f"--- Running evaluation on {len(samples)} samples ---")
    pairs = pair_predictions(predictions, samples)
    report = evaluate(pairs, config)
    groups = evaluate_by_group(pairs, group_labels(samples, by), config) if by else {}
    results = {'processed_count': report.n, **report.as_percentages()}
    logger.info(f"Evaluation: ANLS {results['anls']:.2f}, F1 {results['f1']:.2f}, Accuracy {results['accuracy']:.2f}")
    return report, groups, results
