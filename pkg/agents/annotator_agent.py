# agents/annotator_agent.py
"""
Annotation step: rule-based question types (keyword table with multi-syllable priority),
answer types (Numeric / NonNumeric / Hybrid) and extractive answer spans.
"""
from __future__ import annotations

import enum
import unicodedata
from dataclasses import dataclass, replace
from typing import Sequence

import pandas as pd
from joblib import Parallel, delayed

import sys
import os
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.append(project_root)

from config import settings
from utils.data_utils import SEP_TOKEN, Dataset, Document, Sample, linearize
from utils.log_utils import get_logger

logger = get_logger(__name__)


class QuestionType(str, enum.Enum):
    LOCATION = "Location"
    OBJECT = "Object"
    QUANTITY = "Quantity"
    TIME = "Time"
    REASON = "Reason"
    MANNER = "Manner"
    PERSON = "Person"
    OTHER = "Other"


class AnswerType(str, enum.Enum):
    NUMERIC = "Numeric"
    NON_NUMERIC = "NonNumeric"
    HYBRID = "Hybrid"


class KeywordPosition(str, enum.Enum):
    START = "Start"
    MIDDLE = "Middle"
    END = "End"


@dataclass(frozen=True)
class KeywordTable:
    keywords: dict[QuestionType, tuple[str, ...]]

    def multi_syllable(self) -> list[tuple[tuple[str, ...], QuestionType]]:
        """Multi-syllable keywords, longest first."""
        entries = [(tuple(k.split()), cls) for cls, words in self.keywords.items() for k in words if len(k.split()) > 1]
        return sorted(entries, key=lambda e: -len(e[0]))

    def single_syllable(self) -> dict[str, QuestionType]:
        return {k: cls for cls, words in self.keywords.items() for k in words if len(k.split()) == 1}


KEYWORDS = KeywordTable({
    QuestionType.LOCATION: ("đâu",),
    QuestionType.OBJECT: ("gì", "nào"),
    QuestionType.QUANTITY: ("mấy", "nhiêu"),
    QuestionType.TIME: ("khi nào", "lúc nào", "thời gian nào",
                        "ngày nào", "ngày mấy", "ngày bao nhiêu", "mùng nào", "mùng mấy",
                        "tháng nào", "tháng mấy",
                        "giờ nào", "mấy giờ",
                        "năm nào",
                        "thứ mấy"),
    QuestionType.REASON: ("vì sao", "tại sao", "để làm gì"),
    QuestionType.MANNER: ("thế nào", "bằng cách nào", "làm cách nào", "làm sao", "như nào"),
    QuestionType.PERSON: ("ai",),
})


def _is_punctuation(ch: str) -> bool:
    return unicodedata.category(ch)[0] in ("P", "S")


def syllables(question: str) -> list[str]:
    """NFC, lowercase, punctuation and symbols to spaces, then whitespace split."""
    text = unicodedata.normalize("NFC", question).lower()
    return "".join(" " if _is_punctuation(ch) else ch for ch in text).split()


@dataclass(frozen=True)
class KeywordMatch:
    question_type: QuestionType
    start: int  # syllable index
    end: int   # exclusive


def match_keywords(question: str, table: KeywordTable = KEYWORDS) -> tuple[list[KeywordMatch], int]:
    """Multi-syllable runs are matched first and consume their syllables; singles see the rest."""
    units = syllables(question)
    used = [False] * len(units)
    matches = []
    for words, cls in table.multi_syllable():
        n = len(words)
        for i in range(len(units) - n + 1):
            if tuple(units[i:i + n]) == words and not any(used[i:i + n]):
                used[i:i + n] = [True] * n
                matches.append(KeywordMatch(cls, i, i + n))
    singles = table.single_syllable()
    for i, unit in enumerate(units):
        if not used[i] and unit in singles:
            used[i] = True
            matches.append(KeywordMatch(singles[unit], i, i + 1))
    matches.sort(key=lambda m: m.start)
    return matches, len(units)


def classify_question(question: str, table: KeywordTable = KEYWORDS) -> QuestionType:
    """Exactly one matched class gives that class; none or several give Other."""
    matches, _ = match_keywords(question, table)
    classes = {m.question_type for m in matches}
    if len(classes) == 1:
        return classes.pop()
    return QuestionType.OTHER


def keyword_position(question: str, table: KeywordTable = KEYWORDS) -> KeywordPosition | None:
    """Where the first keyword run sits in the question; None when the question is Other."""
    if classify_question(question, table) == QuestionType.OTHER:
        return None
    matches, n = match_keywords(question, table)
    first = matches[0]
    if first.start == 0:
        return KeywordPosition.START
    if first.end == n:
        return KeywordPosition.END
    return KeywordPosition.MIDDLE


def classify_answer_type(answer: str) -> AnswerType:
    residue = [ch for ch in answer if not _is_punctuation(ch) and not ch.isspace()]
    if not residue:
        return AnswerType.NON_NUMERIC
    digits = sum(ch.isdecimal() for ch in residue)
    if digits == len(residue):
        return AnswerType.NUMERIC
    if digits == 0:
        return AnswerType.NON_NUMERIC
    return AnswerType.HYBRID


# --- Span alignment ---

CLS_INDEX = 0  # context token k sits at position k + 1


@dataclass(frozen=True)
class SpanAlignment:
    start_token: int
    end_token: int
    rule: str | None = None  # "exact", "deletion", or None when unanswerable

    @property
    def answerable(self) -> bool:
        return self.rule is not None

    @classmethod
    def unanswerable(cls) -> "SpanAlignment":
        return cls(CLS_INDEX, CLS_INDEX, None)


def _find_item(item: str, context: str) -> tuple[int, int, str] | None:
    """Character span [start, end) and rule for one answer item."""
    pos = context.find(item)
    if pos >= 0:
        return pos, pos + len(item), "exact"
    if len(item) < 2:
        return None
    best = None
    for i in range(len(item)):
        variant = item[:i] + item[i + 1:]
        pos = context.find(variant)
        if pos >= 0 and (best is None or (pos, i) < best[:2]):
            best = (pos, i, len(variant))
    if best is None:
        return None
    return best[0], best[0] + best[2], "deletion"


def _covering_tokens(start: int, end: int, token_offsets: Sequence[tuple[int, int]]) -> tuple[int, int]:
    covered = [k for k, (s, e) in enumerate(token_offsets) if s < end and e > start]
    if not covered:
        return CLS_INDEX, CLS_INDEX
    return covered[0] + 1, covered[-1] + 1


def align_answer(answer: str, context: str, token_offsets: Sequence[tuple[int, int]]) -> SpanAlignment:
    """
    Rule 1: first exact occurrence. Rule 2 (answers of two or more characters): the
    single-deletion variant found earliest in the context, ties going to the smallest
    deleted index. Otherwise the CLS sentinel. List answers are aligned item by item
    and span from the first item start to the last item end.
    """
    answer = unicodedata.normalize("NFC", answer).strip()
    items = [item.strip() for item in answer.split(SEP_TOKEN)] if SEP_TOKEN in answer else [answer]
    found = []
    for item in items:
        hit = _find_item(item, context) if item else None
        if hit is None:
            return SpanAlignment.unanswerable()
        found.append(hit)
    start = min(h[0] for h in found)
    end = max(h[1] for h in found)
    rule = "deletion" if any(h[2] == "deletion" for h in found) else "exact"
    first, last = _covering_tokens(start, end, token_offsets)
    if first == CLS_INDEX:
        return SpanAlignment.unanswerable()
    return SpanAlignment(first, last, rule)


def align_sample(sample: Sample, document: Document) -> SpanAlignment:
    context, offsets = linearize(document)
    return align_answer(sample.qa.answer, context, offsets)


def align_samples(dataset: Dataset, n_jobs: int = settings.N_JOBS) -> list[SpanAlignment]:
    return Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(align_sample)(s, dataset.document_for(s)) for s in dataset.samples
    )


def coverage_stats(dataset: Dataset, alignments: Sequence[SpanAlignment] | None = None) -> dict[str, float]:
    """Fractions of answers resolvable by rule 1 alone and by rules 1 and 2."""
    if alignments is None:
        alignments = align_samples(dataset)
    n = len(alignments)
    if n == 0:
        return {"fully_matched": 0.0, "with_deletion": 0.0}
    exact = sum(a.rule == "exact" for a in alignments)
    resolved = sum(a.answerable for a in alignments)
    return {"fully_matched": exact / n, "with_deletion": resolved / n}


# --- Dataset level ---

def annotate_samples(samples: Sequence[Sample], table: KeywordTable = KEYWORDS) -> list[Sample]:
    return [replace(s, qa=replace(s.qa,
                                  question_type=classify_question(s.qa.question, table).value,
                                  answer_type=classify_answer_type(s.qa.answer).value))
            for s in samples]


def dataset_statistics(dataset: Dataset) -> tuple[pd.DataFrame, pd.DataFrame]:
    """
    Per question type: count, mean question length in syllables, mean answer length in
    characters and the keyword position shares. Per answer type: count and share.
    """
    rows = []
    for s in dataset.samples:
        position = keyword_position(s.qa.question)
        rows.append({
            "question_type": s.qa.question_type or classify_question(s.qa.question).value,
            "answer_type": s.qa.answer_type or classify_answer_type(s.qa.answer).value,
            "question_length": len(syllables(s.qa.question)),
            "answer_length": len(s.qa.answer),
            "position": position.value if position else None,
        })
    frame = pd.DataFrame(rows, columns=["question_type", "answer_type", "question_length", "answer_length", "position"])

    by_question = frame.groupby("question_type").agg(
        count=("question_length", "size"),
        avg_question_length=("question_length", "mean"),
        avg_answer_length=("answer_length", "mean"),
    )
    positions = pd.crosstab(frame["question_type"], frame["position"], normalize="index") if frame["position"].notna().any() else pd.DataFrame()
    by_question = by_question.join(positions.reindex(columns=[p.value for p in KeywordPosition], fill_value=0.0)).fillna(0.0)

    by_answer = frame.groupby("answer_type").agg(count=("answer_length", "size"), avg_answer_length=("answer_length", "mean"))
    by_answer["share"] = by_answer["count"] / max(len(frame), 1)
    return by_question.reset_index(), by_answer.reset_index()


def run_classification(dataset: Dataset) -> tuple[list[Sample], dict]:
    logger.info("--- Running question/answer classification ---")
    results = {'processed_count': 0, 'question_types': {}, 'answer_types': {}}
    annotated = annotate_samples(dataset.samples)
    for s in annotated:
        results['processed_count'] += 1
        results['question_types'][s.qa.question_type] = results['question_types'].get(s.qa.question_type, 0) + 1
        results['answer_types'][s.qa.answer_type] = results['answer_types'].get(s.qa.answer_type, 0) + 1
    logger.info(f"Classified {results['processed_count']} samples: {results['question_types']}")
    return annotated, results


def run_alignment(dataset: Dataset, n_jobs: int = settings.N_JOBS) -> tuple[list[Sample], dict]:
    logger.info("--- Running answer span alignment ---")
    alignments = align_samples(dataset, n_jobs=n_jobs)
    aligned = [replace(s, span=(a.start_token, a.end_token)) for s, a in zip(dataset.samples, alignments)]
    results = {
        'processed_count': len(aligned),
        'unanswerable_count': sum(not a.answerable for a in alignments),
        'failed_items': [s.document_id for s, a in zip(dataset.samples, alignments) if not a.answerable],
        **coverage_stats(dataset, alignments),
    }
    logger.info(f"Aligned {results['processed_count']} answers: fully matched {results['fully_matched']:.2%}, "
                f"with one deletion {results['with_deletion']:.2%}")
    return aligned, results
