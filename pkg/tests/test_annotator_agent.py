import unicodedata

import pytest
from hypothesis import given
from hypothesis import strategies as st

from agents.annotator_agent import (CLS_INDEX, KEYWORDS, AnswerType, KeywordPosition, QuestionType, SpanAlignment,
                                    align_answer, align_sample, annotate_samples, classify_answer_type,
                                    classify_question, coverage_stats, dataset_statistics, keyword_position,
                                    match_keywords, run_alignment, run_classification, syllables)
from tests.helpers import make_document
from utils.data_utils import SEP_TOKEN, Dataset, QAPair, Sample, linearize, with_reading_order


@pytest.mark.parametrize("question, expected", [
    ("Khách hàng đã mua gì?", QuestionType.OBJECT),
    ("Ai là nhân viên phụ trách hóa đơn này?", QuestionType.PERSON),
    ("Sản phẩm đầu tiên trong hóa đơn này có tên là gì và số lượng mua bao nhiêu?", QuestionType.OTHER),
    ("Hóa đơn in vào ngày nào?", QuestionType.TIME),
    ("Cửa hàng ở đâu?", QuestionType.LOCATION),
    ("Tổng tiền là bao nhiêu?", QuestionType.QUANTITY),
    ("Vì sao hóa đơn bị hủy?", QuestionType.REASON),
    ("Thanh toán bằng cách nào?", QuestionType.MANNER),
    ("Hóa đơn này của cửa hàng.", QuestionType.OTHER),
])
def test_classify_question(question, expected):
    assert classify_question(question) == expected


def test_multi_syllable_keyword_consumes_its_syllables():
    matches, n = match_keywords("Hóa đơn in vào ngày nào?")
    assert n == 6
    assert [(m.question_type, m.start, m.end) for m in matches] == [(QuestionType.TIME, 4, 6)]


def test_longer_keywords_win():
    # "ngày bao nhiêu" must not leave "nhiêu" to the Quantity single
    assert classify_question("Hóa đơn xuất ngày bao nhiêu?") == QuestionType.TIME
    assert classify_question("Mấy giờ cửa hàng mở?") == QuestionType.TIME


def test_syllables_normalize_case_and_punctuation():
    decomposed = unicodedata.normalize("NFD", "Ngày NÀO?")
    assert syllables(decomposed) == ["ngày", "nào"]
    assert classify_question(decomposed) == QuestionType.TIME


def test_keyword_table_is_longest_first():
    lengths = [len(words) for words, _ in KEYWORDS.multi_syllable()]
    assert lengths == sorted(lengths, reverse=True)
    assert KEYWORDS.single_syllable()["đâu"] == QuestionType.LOCATION


@pytest.mark.parametrize("question, position", [
    ("Ai là nhân viên?", KeywordPosition.START),
    ("Khách hàng đã mua gì?", KeywordPosition.END),
    ("Hóa đơn nào có giảm giá?", KeywordPosition.MIDDLE),
    ("Tên là gì và bao nhiêu?", None),
])
def test_keyword_position(question, position):
    assert keyword_position(question) == position


@pytest.mark.parametrize("answer, expected", [
    ("50 000", AnswerType.NUMERIC),
    ("30/04/2024", AnswerType.NUMERIC),
    ("tiền mặt", AnswerType.NON_NUMERIC),
    ("24/12/2022(Thứ bảy)", AnswerType.HYBRID),
    ("...", AnswerType.NON_NUMERIC),
    ("50.000đ", AnswerType.HYBRID),
])
def test_classify_answer_type(answer, expected):
    assert classify_answer_type(answer) == expected


def test_alignment_exact(receipt):
    doc = with_reading_order(receipt)
    context, offsets = linearize(doc)
    alignment = align_answer("Trà đào", context, offsets)
    assert alignment == SpanAlignment(1, 2, "exact")
    assert align_answer("50.000", context, offsets) == SpanAlignment(3, 3, "exact")


def test_alignment_takes_first_occurrence():
    doc = make_document("d", [("x", (0, 0, 5, 5)), ("50", (10, 0, 20, 5)), ("50", (30, 0, 40, 5))])
    context, offsets = linearize(doc)
    assert align_answer("50", context, offsets).start_token == 2


def test_alignment_single_deletion():
    doc = make_document("d", [("Tổng", (0, 0, 30, 10)), ("50000", (40, 0, 90, 10))])
    context, offsets = linearize(doc)
    assert align_answer("50.000", context, offsets) == SpanAlignment(2, 2, "deletion")


def test_deletion_prefers_earliest_context_position():
    # dropping the last character matches at 0, dropping the first only later
    doc = make_document("d", [("abc", (0, 0, 10, 10)), ("bcd", (20, 0, 30, 10))])
    context, offsets = linearize(doc)
    assert align_answer("abcd", context, offsets).start_token == 1


def test_unanswerable_gets_cls():
    doc = make_document("d", [("Tổng", (0, 0, 30, 10))])
    context, offsets = linearize(doc)
    alignment = align_answer("99.999", context, offsets)
    assert alignment == SpanAlignment.unanswerable()
    assert (alignment.start_token, alignment.end_token) == (CLS_INDEX, CLS_INDEX)
    assert not alignment.answerable
    assert not align_answer("x", context, offsets).answerable


def test_list_answer_aligns_each_item(receipt):
    doc = with_reading_order(receipt)
    sample = Sample(doc.id, QAPair("q", f"Trà đào {SEP_TOKEN} 50000"))
    assert align_sample(sample, doc) == SpanAlignment(1, 5, "exact")
    missing = Sample(doc.id, QAPair("q", f"Trà đào {SEP_TOKEN} 12345"))
    assert not align_sample(missing, doc).answerable


def test_alignment_is_case_sensitive():
    doc = make_document("d", [("Tiền", (0, 0, 30, 10)), ("mặt", (35, 0, 60, 10))])
    context, offsets = linearize(doc)
    assert align_answer("Tiền mặt", context, offsets).rule == "exact"
    assert align_answer("TIỀN MẶT", context, offsets).rule is None


def test_coverage_all_verbatim(receipt):
    doc = with_reading_order(receipt)
    dataset = Dataset(documents={doc.id: doc},
                      samples=[Sample(doc.id, QAPair("q", "Tổng")), Sample(doc.id, QAPair("q", "50000"))])
    assert coverage_stats(dataset) == {"fully_matched": 1.0, "with_deletion": 1.0}


def test_coverage_empty_dataset():
    assert coverage_stats(Dataset()) == {"fully_matched": 0.0, "with_deletion": 0.0}


def test_run_alignment_sets_spans(receipt):
    doc = with_reading_order(receipt)
    dataset = Dataset(documents={doc.id: doc},
                      samples=[Sample(doc.id, QAPair("q", "Tổng")), Sample(doc.id, QAPair("q", "không có"))])
    aligned, results = run_alignment(dataset, n_jobs=1)
    assert [s.span for s in aligned] == [(4, 4), (0, 0)]
    assert results['unanswerable_count'] == 1
    assert results['fully_matched'] == 0.5


def test_classification_results(receipt):
    dataset = Dataset(documents={receipt.id: receipt}, samples=[
        Sample(receipt.id, QAPair("Tổng tiền là bao nhiêu?", "50.000")),
        Sample(receipt.id, QAPair("Khách hàng đã mua gì?", "Trà đào")),
    ])
    annotated, results = run_classification(dataset)
    assert [s.qa.question_type for s in annotated] == ["Quantity", "Object"]
    assert [s.qa.answer_type for s in annotated] == ["Numeric", "NonNumeric"]
    assert results['processed_count'] == 2


def test_dataset_statistics(receipt):
    samples = annotate_samples([
        Sample(receipt.id, QAPair("Tổng tiền là bao nhiêu?", "50.000")),
        Sample(receipt.id, QAPair("Mấy món?", "2")),
        Sample(receipt.id, QAPair("Khách hàng đã mua gì?", "Trà đào")),
    ])
    by_question, by_answer = dataset_statistics(Dataset(documents={receipt.id: receipt}, samples=samples))
    quantity = by_question.set_index("question_type").loc["Quantity"]
    assert quantity["count"] == 2
    assert quantity["End"] == 0.5 and quantity["Start"] == 0.5 and quantity["Middle"] == 0.0
    shares = by_answer.set_index("answer_type")["share"]
    assert shares["Numeric"] == pytest.approx(2 / 3)


@pytest.mark.parametrize("keyword", [k for k in KEYWORDS.keywords[QuestionType.TIME] if len(k.split()) > 1])
def test_every_time_keyword_beats_its_singles(keyword):
    assert classify_question(f"Hóa đơn được in {keyword}?") == QuestionType.TIME
    assert classify_question(f"{keyword.capitalize()} cửa hàng mở cửa?") == QuestionType.TIME


@given(st.text(alphabet="0123456789abcđ ", max_size=12), st.text(alphabet=".,/()-:;!?%", max_size=4))
def test_answer_type_ignores_punctuation(answer, punctuation):
    assert classify_answer_type(answer + punctuation) == classify_answer_type(answer)
    assert classify_answer_type(punctuation + answer) == classify_answer_type(answer)


@given(st.lists(st.sampled_from(["50.000", "50000", "Tổng", "tiền", "mặt", "x", "ab"]), min_size=1, max_size=4))
def test_deletion_rule_never_loses_coverage(answers):
    doc = make_document("d", [("Tổng", (0, 0, 30, 10)), ("5000", (40, 0, 90, 10)), ("tiền", (0, 20, 30, 30))])
    dataset = Dataset(documents={doc.id: doc}, samples=[Sample(doc.id, QAPair("q", a)) for a in answers])
    stats = coverage_stats(dataset)
    assert stats["with_deletion"] >= stats["fully_matched"]
