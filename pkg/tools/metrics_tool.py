# tools/metrics_tool.py
"""Token F1, exact-match accuracy and ANLS over (prediction, ground truth) pairs."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import Levenshtein
import pandas as pd

import sys
import os
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.append(project_root)

from config import settings
from utils.errors import ConfigError

MINOR_GROUPS = ("Reason", "Manner", "Other")
MINORS = "Minors"

_WHITESPACE = re.compile(r"\s+")

AnswerPair = tuple[str, str]  # (prediction, ground truth)


@dataclass(frozen=True)
class EvalConfig:
    tau: float = settings.ANLS_TAU
    normalize_text: bool = True

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau must lie in [0, 1], got {self.tau}")


@dataclass(frozen=True)
class EvalReport:
    anls: float
    f1: float
    accuracy: float
    n: int

    def as_percentages(self) -> dict[str, float]:
        return {"anls": round(100 * self.anls, 2), "f1": round(100 * self.f1, 2),
                "accuracy": round(100 * self.accuracy, 2)}

    def as_record(self) -> dict:
        return {**self.as_percentages(), "n": self.n}


def normalize(text: str, config: EvalConfig = EvalConfig()) -> str:
    if not config.normalize_text:
        return text
    return _WHITESPACE.sub(" ", text.lower()).strip()


def precision_recall(pair: AnswerPair, config: EvalConfig = EvalConfig()) -> tuple[float, float]:
    pred = normalize(pair[0], config).split()
    truth = normalize(pair[1], config).split()
    if not pred or not truth:
        both = float(not pred and not truth)
        return both, both
    shared = sum((Counter(pred) & Counter(truth)).values())
    return shared / len(pred), shared / len(truth)


def f1_pair(pair: AnswerPair, config: EvalConfig = EvalConfig()) -> float:
    """Harmonic mean of multiset token precision and recall; 1 when both sides are empty."""
    p, r = precision_recall(pair, config)
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


def exact_match(pair: AnswerPair, config: EvalConfig = EvalConfig()) -> float:
    return float(normalize(pair[0], config) == normalize(pair[1], config))


def levenshtein(a: str, b: str) -> int:
    return Levenshtein.distance(a, b)


def normalized_levenshtein(pair: AnswerPair, config: EvalConfig = EvalConfig()) -> float:
    a, b = normalize(pair[0], config), normalize(pair[1], config)
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return levenshtein(a, b) / longest


def anls_pair(pair: AnswerPair, config: EvalConfig = EvalConfig()) -> float:
    nl = normalized_levenshtein(pair, config)
    return 1.0 - nl if nl < config.tau else 0.0


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def accuracy(pairs: Sequence[AnswerPair], config: EvalConfig = EvalConfig()) -> float:
    return _mean([exact_match(p, config) for p in pairs])


def anls(pairs: Sequence[AnswerPair], config: EvalConfig = EvalConfig()) -> float:
    return _mean([anls_pair(p, config) for p in pairs])


def f1(pairs: Sequence[AnswerPair], config: EvalConfig = EvalConfig()) -> float:
    return _mean([f1_pair(p, config) for p in pairs])


def score_pairs(pairs: Sequence[AnswerPair], config: EvalConfig = EvalConfig()) -> pd.DataFrame:
    """One row per pair with its normalized distance and the three per-pair scores."""
    rows = [{
        "prediction": p[0],
        "ground_truth": p[1],
        "nl": normalized_levenshtein(p, config),
        "anls": anls_pair(p, config),
        "f1": f1_pair(p, config),
        "exact": exact_match(p, config),
    } for p in pairs]
    return pd.DataFrame(rows, columns=["prediction", "ground_truth", "nl", "anls", "f1", "exact"])


def evaluate(pairs: Sequence[AnswerPair], config: EvalConfig = EvalConfig()) -> EvalReport:
    return EvalReport(anls=anls(pairs, config), f1=f1(pairs, config), accuracy=accuracy(pairs, config), n=len(pairs))


def merge_minor_groups(label: str | None) -> str:
    if label is None or label in MINOR_GROUPS:
        return MINORS
    return label


def evaluate_by_group(pairs: Sequence[AnswerPair], labels: Sequence[str | None],
                      config: EvalConfig = EvalConfig(), merge_minors: bool = True) -> dict[str, EvalReport]:
    """Per-label reports, with Reason, Manner and Other (and unlabeled pairs) pooled as Minors."""
    if len(pairs) != len(labels):
        raise ValueError(f"{len(pairs)} pairs but {len(labels)} labels")
    frame = score_pairs(pairs, config)
    frame["group"] = [merge_minor_groups(l) if merge_minors else (l or MINORS) for l in labels]
    reports = {}
    for group, rows in frame.groupby("group", sort=True):
        reports[group] = EvalReport(anls=float(rows["anls"].mean()), f1=float(rows["f1"].mean()),
                                    accuracy=float(rows["exact"].mean()), n=len(rows))
    return reports
