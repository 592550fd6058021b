'''
metrics.py
author(s): editpivot developers

Evaluation and analysis metrics for rewritten utterances

Functions
---------
ngram_counts: multiset of n-grams of a sequence
exact_match: fraction of exactly matching predictions
bleu: corpus BLEU with brevity penalty
rouge_n: micro-averaged n-gram overlap
rouge_l: mean LCS-based precision/recall/F1
restored_words: tokens a rewrite adds to the incomplete utterance
restoration_counts: micro counts behind the restoration F-score
restoration_fscore: restoration precision/recall/F-score
e2c_c2e: how stage 2 changes stage-1 correctness
error_breakdown: insertion/replacement error analysis
evaluate: every metric in one EvalReport

(c) Copyright editpivot developers 2024
'''
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from editpivot.editscript import OpKind, extract, lcs_length
from editpivot.generic_classes import DEFAULT_MARKERS, MarkerSet, PivotError
from editpivot.text import TokenSeq

logger = logging.getLogger(__name__)


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float


class RestorationScore(NamedTuple):
    precision: float
    recall: float
    fscore: float


class RestorationCounts(NamedTuple):
    matched: int
    predicted: int
    reference: int


def harmonic_mean(precision: float, recall: float) -> float:
    '''2pr/(p+r), 0 when p+r is 0'''
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def safe_divide(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator else 0.0


def _items(seq) -> tuple:
    return seq.surfaces if isinstance(seq, TokenSeq) else tuple(seq)


def _check_corpus(*columns):
    lengths = {len(column) for column in columns}
    if len(lengths) != 1:
        raise PivotError(f"corpus columns differ in length: {[len(column) for column in columns]}")
    if lengths == {0}:
        raise PivotError("cannot score an empty corpus")


def ngram_counts(seq, n: int) -> Counter:
    '''Multiset of the n-grams of a sequence

    Parameters
    ----------
    seq : TokenSeq | sequence
    n : int
        order, at least 1

    Returns
    -------
    Counter
        n-gram tuple -> count
    '''
    if n < 1:
        raise PivotError(f"n-gram order must be positive: {n}")
    items = _items(seq)
    return Counter(tuple(items[i:i + n]) for i in range(len(items) - n + 1))


def clipped_overlap(predicted: Counter, reference: Counter) -> int:
    '''Size of the multiset intersection'''
    return sum((predicted & reference).values())


def exact_match(predictions, references) -> float:
    '''Fraction of predictions whose token sequence equals the reference'''
    _check_corpus(predictions, references)
    matches = sum(_items(pred) == _items(ref) for pred, ref in zip(predictions, references))
    return matches / len(predictions)


def bleu(predictions, references, max_order: int = 4) -> float:
    '''Corpus BLEU.

    Geometric mean of the clipped n-gram precisions for orders
    1..max_order, times exp(min(0, 1 - ref_len / pred_len)) with lengths
    summed over the corpus.

    Parameters
    ----------
    predictions : list[TokenSeq]
    references : list[TokenSeq]
    max_order : int, optional
        by default 4

    Returns
    -------
    float
        score in [0, 1]
    '''
    _check_corpus(predictions, references)
    if max_order < 1:
        raise PivotError(f"max_order must be positive: {max_order}")
    matched = np.zeros(max_order)
    total = np.zeros(max_order)
    pred_len = ref_len = 0
    for pred, ref in zip(predictions, references):
        pred_len += len(_items(pred))
        ref_len += len(_items(ref))
        for order in range(1, max_order + 1):
            pred_counts = ngram_counts(pred, order)
            matched[order - 1] += clipped_overlap(pred_counts, ngram_counts(ref, order))
            total[order - 1] += sum(pred_counts.values())
    if pred_len == 0 or np.any(matched == 0):
        return 0.0
    log_precision = np.mean(np.log(matched / total))
    brevity_penalty = min(0.0, 1 - ref_len / pred_len)
    return float(np.exp(log_precision + brevity_penalty))


def rouge_n(predictions, references, n: int = 1) -> PRF:
    '''Corpus ROUGE-n from micro-summed clipped n-gram matches'''
    _check_corpus(predictions, references)
    matched = pred_total = ref_total = 0
    for pred, ref in zip(predictions, references):
        pred_counts, ref_counts = ngram_counts(pred, n), ngram_counts(ref, n)
        matched += clipped_overlap(pred_counts, ref_counts)
        pred_total += sum(pred_counts.values())
        ref_total += sum(ref_counts.values())
    precision = safe_divide(matched, pred_total)
    recall = safe_divide(matched, ref_total)
    return PRF(precision, recall, harmonic_mean(precision, recall))


def _rouge_l_sample(pred, ref) -> PRF:
    pred, ref = _items(pred), _items(ref)
    if not pred and not ref:
        return PRF(1.0, 1.0, 1.0)
    if not pred or not ref:
        return PRF(0.0, 0.0, 0.0)
    common = lcs_length(pred, ref)
    precision, recall = common / len(pred), common / len(ref)
    return PRF(precision, recall, harmonic_mean(precision, recall))


def rouge_l(predictions, references) -> PRF:
    '''Mean over samples of LCS precision, recall and F1'''
    _check_corpus(predictions, references)
    scores = np.array([_rouge_l_sample(pred, ref) for pred, ref in zip(predictions, references)])
    precision, recall, f1 = scores.mean(axis=0)
    return PRF(float(precision), float(recall), float(f1))


def restored_words(incomplete, utterance) -> frozenset:
    '''Token types of utterance that do not occur in incomplete'''
    return frozenset(_items(utterance)) - frozenset(_items(incomplete))


def restored_ngrams(incomplete, utterance, n: int) -> Counter:
    '''n-grams of utterance containing at least one restored word'''
    restored = restored_words(incomplete, utterance)
    return Counter({
        gram: count for gram, count in ngram_counts(utterance, n).items()
        if restored.intersection(gram)
        })


def restoration_counts(incompletes, predictions, references, n: int = 1) -> RestorationCounts:
    '''Micro-summed restored n-gram counts over a corpus'''
    _check_corpus(incompletes, predictions, references)
    matched = predicted = reference = 0
    for incomplete, pred, ref in zip(incompletes, predictions, references):
        pred_grams = restored_ngrams(incomplete, pred, n)
        ref_grams = restored_ngrams(incomplete, ref, n)
        matched += clipped_overlap(pred_grams, ref_grams)
        predicted += sum(pred_grams.values())
        reference += sum(ref_grams.values())
    return RestorationCounts(matched, predicted, reference)


def restoration_fscore(incompletes, predictions, references, n: int = 1) -> RestorationScore:
    '''Restoration precision, recall and F-score over n-grams with a restored word.

    A zero denominator gives 0 for that value and logs a warning; reports
    flag it through restoration_counts.

    Parameters
    ----------
    incompletes, predictions, references : list[TokenSeq]
    n : int, optional
        by default 1

    Returns
    -------
    RestorationScore
    '''
    counts = restoration_counts(incompletes, predictions, references, n)
    if not counts.predicted or not counts.reference:
        logger.warning(f"restoration F{n}: no restored {n}-grams in the "
                       f"{'predictions' if not counts.predicted else 'references'}, scoring 0")
    precision = safe_divide(counts.matched, counts.predicted)
    recall = safe_divide(counts.matched, counts.reference)
    return RestorationScore(precision, recall, harmonic_mean(precision, recall))


def e2c_c2e(stage_pairs) -> tuple[float | None, float | None]:
    '''Error-to-correct and correct-to-error rates.

    Parameters
    ----------
    stage_pairs : list[tuple[bool, bool]]
        (stage 1 correct, stage 2 correct) per sample

    Returns
    -------
    tuple[float | None, float | None]
        E2C = #(wrong, right) / #wrong, C2E = #(right, wrong) / #right;
        None where the denominator is zero
    '''
    if not stage_pairs:
        raise PivotError("e2c/c2e need at least one sample")
    counts = Counter((bool(first), bool(second)) for first, second in stage_pairs)
    wrong = counts[(False, True)] + counts[(False, False)]
    right = counts[(True, True)] + counts[(True, False)]
    e2c = counts[(False, True)] / wrong if wrong else None
    c2e = counts[(True, False)] / right if right else None
    return e2c, c2e


@dataclass
class ErrorBreakdown:
    '''Insertion/replacement error analysis.

    A wrong prediction is charged an insertion error when its insertions
    (span and gap) differ from the gold ones, and a replacement error when
    its replacements differ; a sample can be charged both.
    '''
    insertion_error_count: int = 0
    replacement_error_count: int = 0
    no_edit_samples: int = 0
    no_edit_em: float | None = None
    wrong_samples: int = 0
    insertion_error_share: float | None = None
    replacement_error_share: float | None = None
    replacement_sample_em: float | None = None
    insertion_only_em: float | None = None
    replacement_op_fraction: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _op_multiset(script, kind: OpKind) -> Counter:
    return Counter(
        (op.anchor, op.deleted.surfaces, op.inserted.surfaces)
        for op in script.ops if op.kind is kind
        )


def _subset_em(flags: list) -> float | None:
    return sum(flags) / len(flags) if flags else None


def error_breakdown(incompletes, predictions, references, markers: MarkerSet = DEFAULT_MARKERS) -> ErrorBreakdown:
    '''Charge wrong predictions with insertion and/or replacement errors

    Parameters
    ----------
    incompletes, predictions, references : list[TokenSeq]
    markers : MarkerSet, optional

    Returns
    -------
    ErrorBreakdown
    '''
    _check_corpus(incompletes, predictions, references)
    breakdown = ErrorBreakdown()
    no_edit, with_replacement, insertion_only = [], [], []
    gold_insertions = gold_replacements = 0
    for incomplete, pred, ref in zip(incompletes, predictions, references):
        correct = _items(pred) == _items(ref)
        gold = extract(incomplete, ref, markers)
        gold_insertions += len(gold.insertions)
        gold_replacements += len(gold.replacements)
        if not gold.ops:
            no_edit.append(correct)
        elif gold.replacements:
            with_replacement.append(correct)
        else:
            insertion_only.append(correct)
        if correct:
            continue
        breakdown.wrong_samples += 1
        predicted = extract(incomplete, pred, markers)
        if _op_multiset(gold, OpKind.INSERTION) != _op_multiset(predicted, OpKind.INSERTION):
            breakdown.insertion_error_count += 1
        if _op_multiset(gold, OpKind.REPLACEMENT) != _op_multiset(predicted, OpKind.REPLACEMENT):
            breakdown.replacement_error_count += 1
    charged = breakdown.insertion_error_count + breakdown.replacement_error_count
    if charged:
        breakdown.insertion_error_share = breakdown.insertion_error_count / charged
        breakdown.replacement_error_share = breakdown.replacement_error_count / charged
    breakdown.no_edit_samples = len(no_edit)
    breakdown.no_edit_em = _subset_em(no_edit)
    breakdown.replacement_sample_em = _subset_em(with_replacement)
    breakdown.insertion_only_em = _subset_em(insertion_only)
    if gold_insertions + gold_replacements:
        breakdown.replacement_op_fraction = gold_replacements / (gold_insertions + gold_replacements)
    return breakdown


@dataclass
class EvalReport:
    '''Every metric of one run.

    to_dict uses the report field names em, bleu_<n>, rouge_<n>, rouge_l,
    f_<n>, e2c, c2e, error_breakdown.
    '''
    em: float
    bleu: dict = field(default_factory=dict)
    rouge: dict = field(default_factory=dict)
    rouge_l: PRF | None = None
    restoration: dict = field(default_factory=dict)
    e2c: float | None = None
    c2e: float | None = None
    error_breakdown: ErrorBreakdown | None = None
    stage_matrix: dict | None = None
    stage1_em: float | None = None
    corrected_fraction: float | None = None
    warnings: list = field(default_factory=list)
    n_samples: int = 0

    def to_dict(self) -> dict:
        report = {"n_samples": self.n_samples, "em": self.em}
        for order, score in sorted(self.bleu.items()):
            report[f"bleu_{order}"] = score
        for order, score in sorted(self.rouge.items()):
            report[f"rouge_{order}"] = score._asdict()
        report["rouge_l"] = self.rouge_l._asdict() if self.rouge_l is not None else None
        for order, score in sorted(self.restoration.items()):
            report[f"f_{order}"] = score._asdict()
        report["e2c"] = self.e2c
        report["c2e"] = self.c2e
        report["error_breakdown"] = self.error_breakdown.to_dict() if self.error_breakdown else None
        if self.stage_matrix is not None:
            report["stage_matrix"] = self.stage_matrix
            report["stage1_em"] = self.stage1_em
            report["corrected_fraction"] = self.corrected_fraction
        report["warnings"] = list(self.warnings)
        return report


def evaluate(incompletes, predictions, references, bleu_orders=(1, 2, 3, 4), rouge_orders=(1, 2),
             restoration_orders=(1, 2, 3), markers: MarkerSet = DEFAULT_MARKERS) -> EvalReport:
    '''Compute every metric for a corpus of predictions

    Parameters
    ----------
    incompletes, predictions, references : list[TokenSeq]
    bleu_orders, rouge_orders, restoration_orders : iterable of int, optional
    markers : MarkerSet, optional

    Returns
    -------
    EvalReport
        e2c/c2e left unset, see engine.analyze
    '''
    _check_corpus(incompletes, predictions, references)
    report = EvalReport(em=exact_match(predictions, references), n_samples=len(predictions))
    report.bleu = {order: bleu(predictions, references, order) for order in bleu_orders}
    report.rouge = {order: rouge_n(predictions, references, order) for order in rouge_orders}
    report.rouge_l = rouge_l(predictions, references)
    for order in restoration_orders:
        counts = restoration_counts(incompletes, predictions, references, order)
        if not counts.predicted or not counts.reference:
            report.warnings.append(f"f_{order}: zero restored {order}-grams "
                                   f"(predicted {counts.predicted}, reference {counts.reference}), reported as 0")
        report.restoration[order] = restoration_fscore(incompletes, predictions, references, order)
    report.error_breakdown = error_breakdown(incompletes, predictions, references, markers)
    return report
