import numpy as np
import pytest

from tests.helpers import make_document
from tools.tokenizer_tool import PAD, UNK, Vocabulary, encode_answer, tokenize
from utils.data_utils import SEP_TOKEN, Document


@pytest.fixture
def vocab():
    return Vocabulary.build(["what is the total ?", "a b c", "x y"])


def letters_of(tokenized, vocab):
    return [[vocab.token(i) for i in row] for row in tokenized.letters]


def test_reserved_tokens_are_atomic(vocab):
    for token in ["A", "H", "T", "X", "0", SEP_TOKEN, PAD, UNK]:
        assert token in vocab
    assert len(set(vocab.tokens)) == len(vocab)


def test_empty_ocr_gives_question_symbols(vocab):
    tokenized = tokenize("a b c", Document("d", ()), vocab, 4, 180)
    assert letters_of(tokenized, vocab) == [["0"] * 3] * 4
    assert tokenized.n_question == 3


def test_truncation_drops_ocr_tail(vocab):
    items = [("x", (i * 10, 0, i * 10 + 5, 5)) for i in range(197)]
    tokenized = tokenize("a b c", make_document("d", items), vocab, 4, 180)
    assert tokenized.length == 180
    assert tokenized.letters.shape == (4, 180)


def test_hash_runs_before_truncation(vocab):
    # the dropped tail still stretches the root rect
    items = [("x", (0, 0, 1, 1)), ("y", (99, 99, 100, 100))]
    kept = tokenize("a", make_document("d", items), vocab, 2, 2)
    alone = tokenize("a", make_document("d", items[:1]), vocab, 2, 2)
    assert letters_of(kept, vocab)[0][1] == "A"
    assert letters_of(alone, vocab)[0][1] == "D"


def test_corner_token_letter_column(vocab):
    doc = make_document("d", [("x", (0, 0, 0, 0)), ("y", (10, 10, 10, 10))])
    tokenized = tokenize("a b", doc, vocab, 4, 180)
    letters = letters_of(tokenized, vocab)
    assert [row[2] for row in letters] == ["A", "E", "I", "M"]
    assert [row[0] for row in letters] == ["0"] * 4


def test_multi_word_token_shares_its_box(vocab):
    doc = make_document("d", [("a b", (0, 0, 0, 0)), ("c", (10, 10, 10, 10))])
    tokenized = tokenize("x", doc, vocab, 3, 180)
    letters = letters_of(tokenized, vocab)
    assert [row[1] for row in letters] == [row[2] for row in letters]


def test_unknown_words_map_to_unk(vocab):
    tokenized = tokenize("never seen", Document("d", ()), vocab, 1, 180)
    assert list(tokenized.ids) == [vocab.unk_id, vocab.unk_id]


def test_encode_answer_appends_eos(vocab):
    ids = encode_answer(f"a {SEP_TOKEN} b", vocab, 16)
    assert list(ids) == [vocab.id("a"), vocab.id(SEP_TOKEN), vocab.id("b"), vocab.eos_id]
    assert len(encode_answer(" ".join(["a"] * 40), vocab, 8)) == 8


def test_detokenize_stops_at_eos(vocab):
    ids = [vocab.bos_id, vocab.id("a"), vocab.id(SEP_TOKEN), vocab.id("b"), vocab.eos_id, vocab.id("c")]
    assert vocab.detokenize(ids) == f"a {SEP_TOKEN} b"


def test_vocabulary_requires_reserved_tokens():
    with pytest.raises(ValueError):
        Vocabulary(["a", "b"])
