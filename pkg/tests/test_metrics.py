import logging

from editpivot.generic_classes import PivotError, make_stream
from editpivot.metrics import (
    PRF,
    EvalReport,
    bleu,
    clipped_overlap,
    e2c_c2e,
    error_breakdown,
    evaluate,
    exact_match,
    ngram_counts,
    restoration_counts,
    restoration_fscore,
    restored_ngrams,
    restored_words,
    rouge_l,
    rouge_n
)
from funcs_for_tests import (
    BATMAN_INCOMPLETE,
    BATMAN_REWRITTEN,
    as_seqs,
    brute_bleu,
    brute_restoration,
    brute_rouge_l,
    brute_rouge_n,
    random_micro_corpus,
    seq,
    seqs
)
import numpy as np
import pytest

pivot_err = pytest.raises(PivotError)
approx = pytest.approx


def test_ngram_counts():
    counts = ngram_counts(seq("a b a b"), 2)
    assert counts == {("a", "b"): 2, ("b", "a"): 1}
    assert ngram_counts(["a"], 2) == {}
    assert clipped_overlap(ngram_counts("aab", 1), ngram_counts("ab", 1)) == 2
    with pivot_err:
        ngram_counts(["a"], 0)


def test_exact_match():
    refs = seqs(["a b", "c", "d e", "f"])
    assert exact_match(refs, refs) == 1.0
    assert exact_match(seqs(["x", "y", "z", "w"]), refs) == 0.0
    assert exact_match(seqs(["a b", "c", "d e", "g"]), refs) == 0.75
    # normalized sequences, not raw strings
    assert exact_match(seqs(["a  b"]), seqs(["a b"])) == 1.0


def test_corpus_checks():
    with pivot_err:
        exact_match(seqs(["a"]), seqs(["a", "b"]))
    with pivot_err:
        bleu([], [])
    with pivot_err:
        restoration_fscore(seqs(["a"]), seqs(["a"]), seqs(["a", "b"]))


def test_bleu():
    refs = seqs(["a b c d e", "x y z w"])
    assert bleu(refs, refs) == approx(1.0)
    assert bleu(seqs(["a b"]), seqs(["a c"]), 1) == approx(0.5)
    assert bleu(seqs(["a b"]), seqs(["a c"]), 2) == 0.0
    with pivot_err:
        bleu(refs, refs, 0)


def test_bleu_brevity_penalty():
    # unigram precision 1, brevity penalty exp(1 - 4/2)
    assert bleu(seqs(["a b"]), seqs(["a b c d"]), 1) == approx(np.exp(-1.0))
    assert bleu(seqs(["a b c d"]), seqs(["a b"]), 1) == approx(0.5)


def test_rouge_n():
    refs = seqs(["a b c", "d e"])
    assert rouge_n(refs, refs, 2) == approx(PRF(1.0, 1.0, 1.0))
    assert rouge_n(seqs(["a b c"]), seqs(["a b"]), 2) == approx(PRF(0.5, 1.0, 2 / 3))
    assert rouge_n(seqs(["a b"]), seqs(["c d"]), 1) == PRF(0.0, 0.0, 0.0)


def test_rouge_l():
    assert rouge_l(seqs(["a x c"]), seqs(["a b c"])) == approx(PRF(2 / 3, 2 / 3, 2 / 3))
    assert rouge_l(seqs(["a b"]), seqs(["a b"])) == approx(PRF(1.0, 1.0, 1.0))
    assert rouge_l(seqs([""]), seqs(["a b"])) == PRF(0.0, 0.0, 0.0)
    assert rouge_l(seqs([""]), seqs([""])) == PRF(1.0, 1.0, 1.0)
    # mean over samples
    assert rouge_l(seqs(["a", "x"]), seqs(["a", "y"])).f1 == approx(0.5)


def test_restored_words():
    assert restored_words(seq(BATMAN_INCOMPLETE), seq(BATMAN_REWRITTEN)) == {"Ben", "Affleck", "as", "Batman"}
    assert restored_words(seq("a b"), seq("a b")) == frozenset()
    assert restored_words(seq("a"), seq("a a b")) == {"b"}


def test_restored_ngrams():
    grams = restored_ngrams(seq("why"), seq("why duan yu highest"), 2)
    assert grams == {("why", "duan"): 1, ("duan", "yu"): 1, ("yu", "highest"): 1}
    assert restored_ngrams(seq("a b"), seq("a b"), 1) == {}


def test_restoration_hand_example():
    score = restoration_fscore(seqs(["why"]), seqs(["why duan highest"]), seqs(["why duan yu highest"]), 1)
    assert score == approx((1.0, 2 / 3, 0.8))
    counts = restoration_counts(seqs(["why"]), seqs(["why duan highest"]), seqs(["why duan yu highest"]), 1)
    assert tuple(counts) == (2, 2, 3)


def test_restoration_identical():
    refs = seqs([BATMAN_REWRITTEN, "I am fine."])
    incompletes = seqs([BATMAN_INCOMPLETE, "I am fine."])
    for order in (1, 2, 3):
        assert restoration_fscore(incompletes, refs, refs, order) == approx((1.0, 1.0, 1.0))


def test_restoration_nothing_restored(caplog):
    with caplog.at_level(logging.WARNING):
        score = restoration_fscore(seqs(["a b"]), seqs(["a b"]), seqs(["a"]), 1)
    assert score == (0.0, 0.0, 0.0)
    assert "no restored" in caplog.text


def test_e2c_c2e():
    pairs = [(False, True), (False, False), (True, True), (True, False)]
    assert e2c_c2e(pairs) == (0.5, 0.5)
    assert e2c_c2e([(True, True)] * 3) == (None, 0.0)
    assert e2c_c2e([(False, False)] * 3) == (0.0, None)
    with pivot_err:
        e2c_c2e([])


def test_breakdown_all_correct():
    refs = seqs([BATMAN_REWRITTEN, "I am fine."])
    breakdown = error_breakdown(seqs([BATMAN_INCOMPLETE, "I am fine."]), refs, refs)
    assert breakdown.insertion_error_count == 0
    assert breakdown.replacement_error_count == 0
    assert breakdown.wrong_samples == 0
    assert breakdown.no_edit_samples == 1
    assert breakdown.no_edit_em == 1.0
    assert breakdown.replacement_sample_em == 1.0
    assert breakdown.insertion_only_em is None
    assert breakdown.replacement_op_fraction == 0.5


def test_breakdown_missing_insertion():
    breakdown = error_breakdown(seqs([BATMAN_INCOMPLETE]), seqs(["It is Ben Affleck who acted."]),
                                seqs([BATMAN_REWRITTEN]))
    assert (breakdown.insertion_error_count, breakdown.replacement_error_count) == (1, 0)
    assert breakdown.insertion_error_share == 1.0


def test_breakdown_wrong_replacement():
    breakdown = error_breakdown(seqs([BATMAN_INCOMPLETE]), seqs(["It is Batman who acted as Batman."]),
                                seqs([BATMAN_REWRITTEN]))
    assert (breakdown.insertion_error_count, breakdown.replacement_error_count) == (0, 1)
    assert breakdown.wrong_samples == 1


def test_breakdown_wrong_gap():
    # same inserted span at a different gap is still an insertion error
    breakdown = error_breakdown(seqs(["a b"]), seqs(["x a b"]), seqs(["a x b"]))
    assert breakdown.insertion_error_count == 1


def test_micro_corpus_oracles():
    rng = make_stream(100)
    for _ in range(100):
        incompletes, preds, refs = random_micro_corpus(rng)
        for order in (1, 2, 3, 4):
            assert bleu(preds, refs, order) == approx(brute_bleu(preds, refs, order), abs=1e-12)
        for order in (1, 2):
            assert rouge_n(preds, refs, order) == approx(brute_rouge_n(preds, refs, order), abs=1e-12)
        assert rouge_l(preds, refs) == approx(brute_rouge_l(preds, refs), abs=1e-12)
        for order in (1, 2, 3):
            score = restoration_fscore(incompletes, preds, refs, order)
            assert score == approx(brute_restoration(incompletes, preds, refs, order), abs=1e-12)
            if score.precision + score.recall > 0:
                harmonic = 2 * score.precision * score.recall / (score.precision + score.recall)
                assert score.fscore == approx(harmonic, abs=1e-12)
            assert all(0.0 <= value <= 1.0 for value in score)


def test_permutation_invariance():
    rng = make_stream(8)
    incompletes, preds, refs = (as_seqs(column) for column in random_micro_corpus(rng, max_samples=15))
    order = rng.permutation(len(preds))
    shuffled = [[column[i] for i in order] for column in (incompletes, preds, refs)]
    original = evaluate(incompletes, preds, refs).to_dict()
    permuted = evaluate(*shuffled).to_dict()
    for key, value in original.items():
        if isinstance(value, (float, dict)):
            assert permuted[key] == approx(value, abs=1e-12)
        else:
            assert permuted[key] == value


def test_evaluate_identical():
    incompletes = seqs([BATMAN_INCOMPLETE, "为什么"])
    refs = seqs([BATMAN_REWRITTEN, "为什么段誉武功最高"])
    report = evaluate(incompletes, refs, refs)
    assert isinstance(report, EvalReport)
    assert report.em == 1.0
    assert report.n_samples == 2
    assert all(score == approx(1.0) for score in report.bleu.values())
    assert report.rouge_l == approx(PRF(1.0, 1.0, 1.0))
    assert report.warnings == []
    assert report.e2c is None and report.c2e is None


def test_report_keys():
    refs = seqs(["a b c"])
    report = evaluate(seqs(["a b"]), seqs(["a b x"]), refs, bleu_orders=(1, 2), rouge_orders=(1,),
                      restoration_orders=(1,))
    record = report.to_dict()
    assert set(record) == {"n_samples", "em", "bleu_1", "bleu_2", "rouge_1", "rouge_l", "f_1",
                           "e2c", "c2e", "error_breakdown", "warnings"}
    assert set(record["rouge_1"]) == {"precision", "recall", "f1"}
    assert set(record["f_1"]) == {"precision", "recall", "fscore"}
    assert record["error_breakdown"]["wrong_samples"] == 1


def test_report_zero_restoration_warning():
    report = evaluate(seqs(["a b"]), seqs(["a b"]), seqs(["a b"]), restoration_orders=(1, 2))
    assert len(report.warnings) == 2
    assert report.warnings[0].startswith("f_1")
    assert report.restoration[1] == (0.0, 0.0, 0.0)
