# tools/tokenizer_tool.py
"""Word-level vocabulary and the question + OCR input builder with per-level layout letters."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

import sys
import os
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.append(project_root)

from tools.layout_hash_tool import MAX_LEVELS, QUESTION_SYMBOL, layout_hash, layout_letters, letter_alphabet
from utils.data_utils import SEP_TOKEN, Document

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<s>", "</s>"
SPECIALS = [PAD, UNK, BOS, EOS, SEP_TOKEN]


def split_words(text: str) -> list[str]:
    return text.split()


class Vocabulary:
    """Dense ids: specials, then the layout letters and '0', then corpus words in first-seen order."""

    def __init__(self, tokens: Sequence[str]):
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")
        missing = [t for t in SPECIALS + letter_alphabet(MAX_LEVELS) + [QUESTION_SYMBOL] if t not in self.index]
        if missing:
            raise ValueError(f"vocabulary lacks reserved tokens {missing}")

    @classmethod
    def build(cls, texts: Iterable[str]) -> "Vocabulary":
        tokens = SPECIALS + letter_alphabet(MAX_LEVELS) + [QUESTION_SYMBOL]
        seen = set(tokens)
        for text in texts:
            for word in split_words(text):
                if word not in seen:
                    seen.add(word)
                    tokens.append(word)
        return cls(tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id(self, token: str) -> int:
        return self.index.get(token, self.index[UNK])

    def ids(self, words: Sequence[str]) -> list[int]:
        return [self.id(w) for w in words]

    def token(self, token_id: int) -> str:
        return self.tokens[token_id]

    @property
    def pad_id(self) -> int:
        return self.index[PAD]

    @property
    def unk_id(self) -> int:
        return self.index[UNK]

    @property
    def bos_id(self) -> int:
        return self.index[BOS]

    @property
    def eos_id(self) -> int:
        return self.index[EOS]

    def detokenize(self, ids: Sequence[int]) -> str:
        words = []
        for i in ids:
            if i == self.eos_id:
                break
            if i in (self.pad_id, self.bos_id):
                continue
            words.append(self.tokens[i])
        return " ".join(words)


@dataclass(frozen=True)
class TokenizedInput:
    ids: np.ndarray      # (T,) token ids: question words then OCR words
    letters: np.ndarray  # (L, T) layout letter ids
    n_question: int

    @property
    def length(self) -> int:
        return len(self.ids)


def build_vocabulary(documents: Iterable[Document], questions: Iterable[str], answers: Iterable[str]) -> Vocabulary:
    texts = []
    for document in documents:
        texts.extend(document.texts)
    texts.extend(questions)
    texts.extend(answers)
    return Vocabulary.build(texts)


def tokenize(question: str, document: Document, vocab: Vocabulary, levels: int, max_input_len: int) -> TokenizedInput:
    """
    Question words carry '0' at every level; each OCR word carries its box's letters.
    Hashing runs over the whole document before truncation to max_input_len.
    """
    words = split_words(question)
    letter_columns = [[QUESTION_SYMBOL] * levels for _ in words]

    if document.tokens:
        rows = layout_letters(layout_hash(document.boxes, levels))
        for k, token in enumerate(document.tokens):
            column = [rows[level][k] for level in range(levels)]
            for word in split_words(token.text):
                words.append(word)
                letter_columns.append(column)

    words = words[:max_input_len]
    letter_columns = letter_columns[:max_input_len]
    ids = np.array(vocab.ids(words), dtype=np.int64)
    letters = np.array([[vocab.id(c[level]) for c in letter_columns] for level in range(levels)],
                       dtype=np.int64).reshape(levels, len(words))
    return TokenizedInput(ids=ids, letters=letters, n_question=min(len(split_words(question)), max_input_len))


def encode_answer(answer: str, vocab: Vocabulary, max_answer_len: int) -> np.ndarray:
    """Answer ids followed by EOS, truncated so the total stays within max_answer_len."""
    ids = vocab.ids(split_words(answer))[: max_answer_len - 1]
    return np.array(ids + [vocab.eos_id], dtype=np.int64)
