# agents/synth_agent.py
"""
Synthetic receipt generator: amount tokens laid out on a rows x cols grid with jittered
boxes, optional duplicate surface texts that only their position tells apart, and
position-dependent questions over them.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

import sys
import os
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.append(project_root)

from config import settings
from tools.layout_hash_tool import BoundingBox, layout_hash
from utils.data_utils import SEP_TOKEN, Dataset, Document, OcrToken, QAPair, Sample, linearize
from utils.errors import ConfigError
from utils.log_utils import get_logger

logger = get_logger(__name__)

TASKS = ("quadrant-lookup", "right-neighbor", "region-value")
MAX_VOCAB = 90  # two-digit amounts 10.000 .. 99.000

QUADRANT_QUESTION = "which token lies in quadrant q{q} ?"
NEIGHBOR_QUESTION = "which token is right of {anchor} ?"
REGION_QUESTION = "list the tokens in quadrant q{q} ?"


@dataclass(frozen=True)
class SynthConfig:
    seed: int = settings.SEED
    rows: int = 2
    cols: int = 4
    vocab_size: int = 16
    duplicate_fraction: float = 1.0
    task: str = "right-neighbor"
    shuffle: bool = True
    cell_size: float = 100.0
    box_fraction: float = 0.6
    # max center offset, as a fraction of the cell size; hash levels finer than the grid
    # split each cell through its center, so with jitter their letters vary per document
    jitter: float = 0.1

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.rows * self.cols < 4:
            raise ConfigError(f"grid {self.rows}x{self.cols} needs at least 4 cells")
        if not 0.0 <= self.duplicate_fraction <= 1.0:
            raise ConfigError(f"duplicate fraction must lie in [0, 1], got {self.duplicate_fraction}")
        if not 1 <= self.vocab_size <= MAX_VOCAB:
            raise ConfigError(f"vocab size must lie in 1..{MAX_VOCAB}, got {self.vocab_size}")
        if self.task not in TASKS:
            raise ConfigError(f"unknown task '{self.task}', expected one of {TASKS}")
        if not 0.0 <= self.jitter <= 0.1:
            raise ConfigError(f"jitter must lie in [0, 0.1] of a cell so boxes stay in their cell, got {self.jitter}")

    @property
    def n_tokens(self) -> int:
        return self.rows * self.cols


def surface_vocabulary(size: int) -> list[str]:
    """Receipt-like amounts of equal width, so no text is a substring of another."""
    return [f"{10 + k}.000" for k in range(size)]


def _texts(config: SynthConfig, rng: np.random.Generator) -> list[str]:
    """Surface texts in row-major cell order, with ceil(p*n) of them shared in pairs."""
    n = config.n_tokens
    k = math.ceil(config.duplicate_fraction * n)
    if k == 1:
        k = 2
    groups = [2] * (k // 2)
    if k % 2:
        groups[-1] = 3
    sizes = groups + [1] * (n - k)
    vocab = surface_vocabulary(config.vocab_size)
    picked = rng.choice(len(vocab), size=len(sizes), replace=len(sizes) > len(vocab))
    texts = [vocab[i] for i, size in zip(picked, sizes) for _ in range(size)]
    return [texts[i] for i in rng.permutation(n)]


def _cell_of(box: BoundingBox, config: SynthConfig) -> tuple[int, int]:
    cx, cy = box.center
    return int(cy // config.cell_size), int(cx // config.cell_size)


def gen_receipt(config: SynthConfig, index: int = 0, doc_id: str | None = None) -> Document:
    """One grid document; the same (seed, index) always gives the same document."""
    rng = np.random.default_rng((config.seed, index))
    texts = _texts(config, rng)
    size = config.cell_size
    half = config.box_fraction * size / 2
    tokens = []
    for cell, text in enumerate(texts):
        r, c = divmod(cell, config.cols)
        jx, jy = rng.uniform(-config.jitter, config.jitter, size=2) * size
        cx, cy = (c + 0.5) * size + jx, (r + 0.5) * size + jy
        box = BoundingBox(*(round(v, 2) for v in (cx - half, cy - half, cx + half, cy + half)))
        tokens.append(OcrToken(text, box))

    if config.shuffle:
        stored = [int(i) for i in rng.permutation(len(tokens))]
    else:
        stored = list(range(len(tokens)))
    position = {cell: k for k, cell in enumerate(stored)}
    return Document(
        id=doc_id or f"doc-{index:05d}",
        tokens=tuple(tokens[cell] for cell in stored),
        reading_order=tuple(position[cell] for cell in range(len(tokens))),
    )


def _grid(document: Document, config: SynthConfig) -> dict[tuple[int, int], int]:
    return {_cell_of(t.box, config): k for k, t in enumerate(document.tokens)}


def _quadrants(document: Document) -> list[int]:
    return [code.quadrants[0] for code in layout_hash(document.boxes, 1).codes]


def gen_qa(config: SynthConfig, document: Document) -> list[QAPair]:
    grid = _grid(document, config)
    texts = document.texts
    pairs = []

    if config.task == "quadrant-lookup":
        quadrants = _quadrants(document)
        for q in range(1, 5):
            inside = [k for k, qk in enumerate(quadrants) if qk == q]
            if len(inside) == 1:
                pairs.append(QAPair(QUADRANT_QUESTION.format(q=q), texts[inside[0]]))

    elif config.task == "right-neighbor":
        copies: dict[str, list[tuple[int, int]]] = {}
        for cell in sorted(grid):
            copies.setdefault(texts[grid[cell]], []).append(cell)
        for text, cells in copies.items():
            if len(cells) < 2:
                continue
            anchors = [(r, c) for r, c in cells if c < config.cols - 1]
            if len(anchors) != 1:
                continue
            r, c = anchors[0]
            pairs.append(QAPair(NEIGHBOR_QUESTION.format(anchor=text), texts[grid[(r, c + 1)]]))

    else:
        quadrants = _quadrants(document)
        order = document.reading_order or tuple(range(len(texts)))
        for q in range(1, 5):
            inside = [k for k in order if quadrants[k] == q]
            if inside:
                pairs.append(QAPair(REGION_QUESTION.format(q=q), f" {SEP_TOKEN} ".join(texts[k] for k in inside)))
    return pairs


def gen_dataset(config: SynthConfig, n_documents: int, start_index: int = 0) -> Dataset:
    dataset = Dataset()
    for index in range(start_index, start_index + n_documents):
        document = gen_receipt(config, index)
        dataset.documents[document.id] = document
        dataset.samples.extend(Sample(document.id, qa) for qa in gen_qa(config, document))
    return dataset


def gen_splits(config: SynthConfig, n_train: int, n_test: int) -> tuple[Dataset, Dataset]:
    """Disjoint train/test sets holding at least n_train / n_test samples."""
    parts = []
    index = 0
    for wanted in (n_train, n_test):
        part = Dataset()
        while len(part.samples) < wanted:
            chunk = gen_dataset(config, 64, start_index=index)
            index += 64
            part.documents.update(chunk.documents)
            part.samples.extend(chunk.samples)
        parts.append(part)
    return parts[0], parts[1]


# --- Planted OCR deletions ---

def plant_deletions(dataset: Dataset, fraction: float, seed: int = 0) -> Dataset:
    """
    Copies the documents of round(fraction * N) samples under new ids and deletes one
    character of the answer token in each copy, so those answers only align through a
    single deletion. Candidates are single-item answers occurring exactly once in context.
    """
    n = len(dataset.samples)
    wanted = round(fraction * n)
    candidates = []
    for i, s in enumerate(dataset.samples):
        if SEP_TOKEN in s.qa.answer:
            continue
        document = dataset.document_for(s)
        context, _ = linearize(document)
        if context.count(s.qa.answer) == 1 and s.qa.answer in document.texts and len(s.qa.answer) >= 2:
            candidates.append(i)
    if wanted > len(candidates):
        raise ConfigError(f"cannot plant {wanted} deletions, only {len(candidates)} eligible samples")

    rng = np.random.default_rng(seed)
    chosen = sorted(int(i) for i in rng.choice(candidates, size=wanted, replace=False))
    documents = dict(dataset.documents)
    samples = list(dataset.samples)
    for i in chosen:
        sample = samples[i]
        document = dataset.document_for(sample)
        k = document.texts.index(sample.qa.answer)
        text = document.tokens[k].text
        cut = int(rng.integers(len(text)))
        damaged = replace(document.tokens[k], text=text[:cut] + text[cut + 1:])
        tokens = document.tokens[:k] + (damaged,) + document.tokens[k + 1:]
        copy = replace(document, id=f"{document.id}-ocr{i}", tokens=tokens)
        documents[copy.id] = copy
        samples[i] = replace(sample, document_id=copy.id)
    logger.info(f"Planted {len(chosen)} single-character OCR deletions over {n} samples")
    return Dataset(documents=documents, samples=samples)


# --- Text-only baseline ---

def right_neighbor_chance(anchor: str, counts: Mapping[str, int], rows: int, cols: int) -> float:
    """
    Best accuracy a reader of the token bag alone can reach on one right-neighbor sample.
    Given that exactly one of the m anchor copies sits outside the last column, the
    answer is another anchor only when the anchor is in the next-to-last column and the
    cell to its right holds one of the m - 1 copies in the last column.
    """
    m = counts[anchor]
    n = sum(counts.values())
    p_anchor = (m - 1) / rows / (cols - 1)
    best = p_anchor
    for text, count in counts.items():
        if text != anchor:
            best = max(best, (1.0 - p_anchor) * count / (n - m))
    return best


def anchor_of(question: str) -> str:
    return question.split()[-2]


def text_only_chance(dataset: Dataset, config: SynthConfig) -> float:
    """Mean of right_neighbor_chance over the right-neighbor samples of a dataset."""
    if not dataset.samples:
        return 0.0
    chances = []
    for s in dataset.samples:
        counts = Counter(dataset.document_for(s).texts)
        chances.append(right_neighbor_chance(anchor_of(s.qa.question), counts, config.rows, config.cols))
    return float(np.mean(chances))


def run_synth(config: SynthConfig, n_documents: int) -> tuple[Dataset, dict]:
    logger.info(f"--- Running synthetic generation ({config.task}, {config.rows}x{config.cols}) ---")
    dataset = gen_dataset(config, n_documents)
    results = {
        'processed_count': len(dataset.documents),
        'sample_count': len(dataset.samples),
        'task': config.task,
    }
    if config.task == "right-neighbor":
        results['text_only_chance'] = text_only_chance(dataset, config)
    logger.info(f"Generated {results['processed_count']} documents with {results['sample_count']} samples")
    return dataset, results
