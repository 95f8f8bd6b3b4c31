# agents/baseline_agent.py
"""
Reference scores that need no model: an OCR upper bound that answers exactly when the
gold answer appears verbatim in the context (optionally cut to the average context
size), and heuristics that draw a random answer from the most frequent training answers.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import replace

import numpy as np
import pandas as pd

import sys
import os
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.append(project_root)

from agents.annotator_agent import align_sample
from agents.evaluation_agent import run_evaluation
from tools.metrics_tool import EvalConfig
from utils.data_utils import Dataset, Document, Prediction
from utils.errors import ConfigError
from utils.log_utils import get_logger

logger = get_logger(__name__)

AVG_CONTEXT_BOXES = 142
BASELINES = ("matched-ocr", "matched-ocr-avg", "rand-top10", "rand-top100")


def truncate_context(document: Document, max_boxes: int | None) -> Document:
    """Keeps the first max_boxes OCR tokens in stored order, as the model input does."""
    if max_boxes is None or len(document.tokens) <= max_boxes:
        return document
    return replace(document, tokens=document.tokens[:max_boxes], reading_order=None)


def matched_ocr_predictions(dataset: Dataset, max_boxes: int | None = None) -> list[Prediction]:
    """The gold answer when it matches the context verbatim, else the empty string."""
    predictions = []
    for s in dataset.samples:
        alignment = align_sample(s, truncate_context(dataset.document_for(s), max_boxes))
        answer = s.qa.answer if alignment.rule == "exact" else ""
        predictions.append(Prediction(s.document_id, s.qa.question, answer))
    return predictions


def top_answers(dataset: Dataset, k: int) -> list[str]:
    """The k most frequent answers, ties in first-seen order."""
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")
    return [answer for answer, _ in Counter(s.qa.answer for s in dataset.samples).most_common(k)]


def random_top_predictions(train_set: Dataset, test_set: Dataset, k: int, seed: int = 0) -> list[Prediction]:
    candidates = top_answers(train_set, k)
    if not candidates:
        raise ConfigError("training set has no answers to draw from")
    rng = np.random.default_rng(seed)
    picks = rng.integers(len(candidates), size=len(test_set.samples))
    return [Prediction(s.document_id, s.qa.question, candidates[i]) for s, i in zip(test_set.samples, picks)]


def baseline_predictions(name: str, train_set: Dataset, test_set: Dataset, seed: int = 0,
                         max_boxes: int = AVG_CONTEXT_BOXES) -> list[Prediction]:
    if name == "matched-ocr":
        return matched_ocr_predictions(test_set)
    if name == "matched-ocr-avg":
        return matched_ocr_predictions(test_set, max_boxes)
    if name == "rand-top10":
        return random_top_predictions(train_set, test_set, 10, seed)
    if name == "rand-top100":
        return random_top_predictions(train_set, test_set, 100, seed)
    raise ConfigError(f"unknown baseline '{name}', expected one of {BASELINES}")


def run_baselines(train_set: Dataset, test_set: Dataset, eval_config: EvalConfig = EvalConfig(),
                  names: tuple[str, ...] = BASELINES, seed: int = 0,
                  max_boxes: int = AVG_CONTEXT_BOXES) -> tuple[pd.DataFrame, dict]:
    """One row per baseline with ANLS/F1/Accuracy in percent."""
    logger.info(f"--- Running baselines {list(names)} on {len(test_set.samples)} samples ---")
    results = {'processed_count': 0, 'failed_items': []}
    rows = []
    for name in names:
        try:
            predictions = baseline_predictions(name, train_set, test_set, seed, max_boxes)
        except ConfigError as e:
            results['failed_items'].append({"baseline": name, "error": str(e)})
            continue
        report, _, _ = run_evaluation(predictions, test_set.samples, eval_config)
        rows.append({"baseline": name, **report.as_percentages()})
        results['processed_count'] += 1
    table = pd.DataFrame(rows, columns=["baseline", "anls", "f1", "accuracy"])
    logger.info(f"Baselines finished: {results['processed_count']} scored, {len(results['failed_items'])} failed")
    return table, results
