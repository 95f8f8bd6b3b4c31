# utils/data_utils.py
"""
Documents, OCR tokens and QA samples, plus their line-delimited JSON files.

documents file: {"id", "tokens": [{"text", "box": [x_min, y_min, x_max, y_max]}], "reading_order"?}
samples file:   {"document_id", "question", "answer", "question_type"?, "answer_type"?, "span"?}
"""
from __future__ import annotations

import io
import json
import math
import os
import statistics
import sys
import unicodedata
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence

import numpy as np
import pandas as pd

project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.append(project_root)

from tools.layout_hash_tool import BoundingBox
from utils.errors import DatasetIOError, LayoutHashError, SchemaError
from utils.log_utils import get_logger

logger = get_logger(__name__)

SEP_TOKEN = "<sep>"
LINE_THRESHOLD = 0.5  # fraction of the median box height


@dataclass(frozen=True)
class OcrToken:
    text: str
    box: BoundingBox

    def __post_init__(self):
        if not self.text:
            raise SchemaError("OCR token text is empty", field="text")
        if "\n" in self.text or "\r" in self.text:
            raise SchemaError("OCR token text contains a line break", field="text")


@dataclass(frozen=True)
class Document:
    id: str
    tokens: tuple[OcrToken, ...]
    reading_order: tuple[int, ...] | None = None  # gold order, when the generator knows it

    @property
    def boxes(self) -> list[BoundingBox]:
        return [t.box for t in self.tokens]

    @property
    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]


@dataclass(frozen=True)
class QAPair:
    question: str
    answer: str
    question_type: str | None = None
    answer_type: str | None = None

    def __post_init__(self):
        if not self.answer:
            raise SchemaError("answer is empty", field="answer")

    @property
    def answer_items(self) -> list[str]:
        return [item.strip() for item in self.answer.split(SEP_TOKEN)]


@dataclass(frozen=True)
class Sample:
    document_id: str
    qa: QAPair
    span: tuple[int, int] | None = None


@dataclass(frozen=True)
class Prediction:
    document_id: str
    question: str
    prediction: str


@dataclass
class Dataset:
    documents: dict[str, Document] = field(default_factory=dict)
    samples: list[Sample] = field(default_factory=list)

    def document_for(self, sample: Sample) -> Document:
        return self.documents[sample.document_id]

    def __len__(self) -> int:
        return len(self.samples)


# --- Reading order ---

def serialize_reading_order(tokens: Sequence[OcrToken], threshold: float = LINE_THRESHOLD) -> list[OcrToken]:
    """
    Groups tokens into lines (a token joins the current line when its center is within
    threshold * median box height of the line's mean center), orders lines top to bottom
    and tokens left to right inside a line. Stable for ties.
    """
    if not tokens:
        return []
    limit = threshold * statistics.median(t.box.height for t in tokens)
    by_y = sorted(range(len(tokens)), key=lambda i: tokens[i].box.center[1])

    lines: list[list[int]] = []
    line_sum = 0.0
    for i in by_y:
        y = tokens[i].box.center[1]
        if lines and abs(y - line_sum / len(lines[-1])) <= limit:
            lines[-1].append(i)
            line_sum += y
        else:
            lines.append([i])
            line_sum = y

    def mean_y(line):
        return sum(tokens[i].box.center[1] for i in line) / len(line)

    lines.sort(key=mean_y)
    ordered = []
    for line in lines:
        ordered.extend(sorted(line, key=lambda i: (tokens[i].box.x_min, i)))
    return [tokens[i] for i in ordered]


def with_reading_order(document: Document) -> Document:
    return replace(document, tokens=tuple(serialize_reading_order(document.tokens)), reading_order=None)


def linearize(document: Document) -> tuple[str, list[tuple[int, int]]]:
    """Joins token texts with single spaces; returns the context and per-token character offsets."""
    offsets = []
    cursor = 0
    for token in document.tokens:
        offsets.append((cursor, cursor + len(token.text)))
        cursor += len(token.text) + 1
    return " ".join(document.texts), offsets


# --- Record conversion ---

def _nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def _missing(value: Any) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


def _require(record: dict, key: str, line: int, kind: type = str) -> Any:
    value = record.get(key)
    if _missing(value):
        raise SchemaError("missing required value", line=line, field=key)
    if not isinstance(value, kind):
        raise SchemaError(f"expected {kind.__name__}, got {type(value).__name__}", line=line, field=key)
    return value


def _optional_str(record: dict, key: str, line: int) -> str | None:
    value = record.get(key)
    if _missing(value):
        return None
    if not isinstance(value, str):
        raise SchemaError(f"expected str, got {type(value).__name__}", line=line, field=key)
    return value


def document_to_record(document: Document) -> dict:
    record = {
        "id": document.id,
        "tokens": [{"text": t.text, "box": t.box.as_list()} for t in document.tokens],
    }
    if document.reading_order is not None:
        record["reading_order"] = list(document.reading_order)
    return record


def document_from_record(record: dict, line: int) -> Document:
    doc_id = _require(record, "id", line)
    raw_tokens = _require(record, "tokens", line, list)
    tokens = []
    for k, raw in enumerate(raw_tokens):
        if not isinstance(raw, dict):
            raise SchemaError(f"token {k} is not an object", line=line, field="tokens")
        text = raw.get("text")
        box = raw.get("box")
        if not isinstance(text, str):
            raise SchemaError(f"token {k} has no text", line=line, field="tokens.text")
        if not isinstance(box, list) or not all(isinstance(v, (int, float)) for v in box):
            raise SchemaError(f"token {k} has no numeric box", line=line, field="tokens.box")
        try:
            tokens.append(OcrToken(_nfc(text), BoundingBox.from_list(box)))
        except (LayoutHashError, SchemaError) as e:
            raise SchemaError(f"token {k}: {e}", line=line, field="tokens") from e
    order = record.get("reading_order")
    if _missing(order):
        order = None
    elif not isinstance(order, list) or sorted(order) != list(range(len(tokens))):
        raise SchemaError("not a permutation of token indices", line=line, field="reading_order")
    return Document(id=_nfc(doc_id), tokens=tuple(tokens), reading_order=tuple(order) if order is not None else None)


def sample_to_record(sample: Sample) -> dict:
    record = {
        "document_id": sample.document_id,
        "question": sample.qa.question,
        "answer": sample.qa.answer,
    }
    if sample.qa.question_type is not None:
        record["question_type"] = sample.qa.question_type
    if sample.qa.answer_type is not None:
        record["answer_type"] = sample.qa.answer_type
    if sample.span is not None:
        record["span"] = list(sample.span)
    return record


def sample_from_record(record: dict, line: int) -> Sample:
    document_id = _require(record, "document_id", line)
    question = _require(record, "question", line)
    answer = _require(record, "answer", line)
    if not answer:
        raise SchemaError("answer is empty", line=line, field="answer")
    span = record.get("span")
    if _missing(span):
        span = None
    elif not (isinstance(span, list) and len(span) == 2 and all(isinstance(v, int) for v in span)):
        raise SchemaError("expected [start, end]", line=line, field="span")
    qa = QAPair(
        question=_nfc(question),
        answer=_nfc(answer),
        question_type=_optional_str(record, "question_type", line),
        answer_type=_optional_str(record, "answer_type", line),
    )
    return Sample(document_id=_nfc(document_id), qa=qa, span=tuple(span) if span is not None else None)


def prediction_from_record(record: dict, line: int) -> Prediction:
    return Prediction(
        document_id=_nfc(_require(record, "document_id", line)),
        question=_nfc(_require(record, "question", line)),
        prediction=_nfc(record.get("prediction") if isinstance(record.get("prediction"), str) else ""),
    )


# --- Files ---

def read_numbered_records(path: str) -> list[tuple[int, dict]]:
    """Reads a line-delimited JSON file into (file line number, record) pairs; blank lines are skipped."""
    if not os.path.exists(path):
        raise DatasetIOError(f"file not found: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            numbered = [(n, line) for n, line in enumerate(f.read().splitlines(), start=1) if line.strip()]
    except (OSError, UnicodeDecodeError) as e:
        raise DatasetIOError(f"cannot read {path}: {e}") from e
    if not numbered:
        return []
    try:
        df = pd.read_json(io.StringIO("\n".join(line for _, line in numbered)), lines=True, dtype=False,
                          convert_dates=False, precise_float=True)
    except ValueError:
        # pandas does not say which line failed; find it
        for number, line in numbered:
            try:
                value = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(f"invalid JSON ({e.msg})", line=number) from e
            if not isinstance(value, dict):
                raise SchemaError("record is not an object", line=number)
        raise SchemaError(f"unreadable records in {path}")
    records = df.to_dict(orient="records")
    return [(number, {k: v for k, v in r.items() if not _missing(v)}) for (number, _), r in zip(numbered, records)]


def read_records(path: str) -> list[dict]:
    return [record for _, record in read_numbered_records(path)]


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialise {type(value).__name__}")


def write_records(records: Iterable[dict], path: str) -> None:
    # json.dumps writes the shortest repr of every float, so values load back bit for bit
    try:
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps(record, ensure_ascii=False, default=_json_default) + "\n")
    except OSError as e:
        raise DatasetIOError(f"cannot write {path}: {e}") from e


def _check_types(numbered: list[tuple[int, dict]], required: Sequence[str]) -> None:
    for line, record in numbered:
        for key in required:
            if _missing(record.get(key)):
                raise SchemaError("missing required value", line=line, field=key)


def load_documents(path: str) -> dict[str, Document]:
    numbered = read_numbered_records(path)
    _check_types(numbered, ("id", "tokens"))
    documents: dict[str, Document] = {}
    for line, record in numbered:
        document = document_from_record(record, line)
        if document.id in documents:
            raise SchemaError(f"duplicate document id '{document.id}'", line=line, field="id")
        documents[document.id] = document
    return documents


def _load_numbered_samples(path: str) -> list[tuple[int, Sample]]:
    numbered = read_numbered_records(path)
    _check_types(numbered, ("document_id", "question", "answer"))
    return [(line, sample_from_record(record, line)) for line, record in numbered]


def load_samples(path: str) -> list[Sample]:
    return [sample for _, sample in _load_numbered_samples(path)]


def load_dataset(documents_path: str, samples_path: str) -> Dataset:
    documents = load_documents(documents_path)
    numbered = _load_numbered_samples(samples_path)
    for line, sample in numbered:
        if sample.document_id not in documents:
            raise SchemaError(f"unknown document '{sample.document_id}'", line=line, field="document_id")
    samples = [sample for _, sample in numbered]
    logger.info(f"Loaded {len(documents)} documents and {len(samples)} samples")
    return Dataset(documents=documents, samples=samples)


def save_dataset(dataset: Dataset, documents_path: str, samples_path: str) -> None:
    write_records((document_to_record(d) for d in dataset.documents.values()), documents_path)
    write_records((sample_to_record(s) for s in dataset.samples), samples_path)
    logger.info(f"Saved {len(dataset.documents)} documents to {documents_path} and {len(dataset.samples)} samples to {samples_path}")


def load_predictions(path: str) -> list[Prediction]:
    numbered = read_numbered_records(path)
    _check_types(numbered, ("document_id", "question"))
    return [prediction_from_record(record, line) for line, record in numbered]


def save_predictions(predictions: Iterable[Prediction], path: str) -> None:
    write_records(({"document_id": p.document_id, "question": p.question, "prediction": p.prediction}
                   for p in predictions), path)


# --- Splits ---

def split_dataset(dataset: Dataset, ratios: Sequence[int] = (8, 1, 1), seed: int = 0) -> list[Dataset]:
    """Splits by document so that no document lands in two parts."""
    doc_ids = sorted(dataset.documents)
    rng = np.random.default_rng(seed)
    shuffled = [doc_ids[i] for i in rng.permutation(len(doc_ids))]
    total = sum(ratios)
    bounds = np.cumsum([0] + [round(len(shuffled) * r / total) for r in ratios])
    bounds = np.minimum(bounds, len(shuffled))
    bounds[-1] = len(shuffled)

    parts = []
    for start, end in zip(bounds[:-1], bounds[1:]):
        ids = set(shuffled[start:end])
        parts.append(Dataset(
            documents={d: dataset.documents[d] for d in doc_ids if d in ids},
            samples=[s for s in dataset.samples if s.document_id in ids],
        ))
    return parts
