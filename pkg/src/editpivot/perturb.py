'''
perturb.py
author(s): editpivot developers

Adversarial perturbation of edit scripts for stage-2 training data.

For every op two uniform draws decide whether it is kept, has its text
replaced by a span sampled from the dialogue history, or is dropped.
One more draw decides whether a random insertion or replacement is
appended at the end.

(c) Copyright editpivot developers 2024
'''
from dataclasses import dataclass

import numpy as np

from editpivot.editscript import EditOp, EditScript, OpKind
from editpivot.generic_classes import PivotError, check_seed
from editpivot.text import TokenSeq


@dataclass(frozen=True)
class PerturbConfig:
    '''Perturbation parameters.

    Attributes
    ----------
    prob_p : float
        probability that an op is perturbed, and that an op is appended
    prob_r : float
        probability that a perturbed op has its text replaced rather than
        being dropped
    max_span_len : int
        longest span sampled from the history or the utterance
    seed : int
        64-bit unsigned run seed
    random_replace, random_delete, random_insert : bool
        switch each perturbation kind on or off; switched-off kinds still
        consume their random draws
    '''
    prob_p: float = 0.6
    prob_r: float = 0.5
    max_span_len: int = 5
    seed: int = 0
    random_replace: bool = True
    random_delete: bool = True
    random_insert: bool = True

    def __post_init__(self):
        for name in ("prob_p", "prob_r"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not 0 <= value <= 1:
                raise PivotError(f"{name} must be a probability in [0, 1]: {value!r}")
        if isinstance(self.max_span_len, bool) or not isinstance(self.max_span_len, int) or self.max_span_len < 1:
            raise PivotError(f"max_span_len must be a positive integer: {self.max_span_len!r}")
        check_seed(self.seed)


@dataclass(frozen=True)
class PerturbTrace:
    '''What a perturbation did'''
    replaced: int = 0
    dropped: int = 0
    appended: int = 0

    @property
    def fired(self) -> bool:
        return bool(self.replaced or self.dropped or self.appended)


def sample_span(source: TokenSeq, rng: np.random.Generator, max_len: int) -> TokenSeq:
    '''Sample a contiguous span.

    The start is uniform over the source, the length uniform over
    1..min(max_len, tokens remaining).

    Parameters
    ----------
    source : TokenSeq
    rng : np.random.Generator
    max_len : int

    Returns
    -------
    TokenSeq
    '''
    if not source:
        raise PivotError("cannot sample a span from an empty sequence")
    if max_len < 1:
        raise PivotError(f"max_len must be positive: {max_len}")
    start = int(rng.integers(0, len(source)))
    length = int(rng.integers(1, min(max_len, len(source) - start) + 1))
    return source[start:start + length]


def _fires(draw: float, prob: float) -> bool:
    # a zero probability never fires, even on a draw of exactly 0.0
    return prob > 0 and draw <= prob


def _with_text(op: EditOp, span: TokenSeq) -> EditOp:
    if op.kind is OpKind.INSERTION:
        return EditOp.insertion(span)
    return EditOp.replacement(op.deleted, span)


def perturb_with_trace(script: EditScript, history: TokenSeq, incomplete: TokenSeq, cfg: PerturbConfig,
                       rng: np.random.Generator) -> tuple[EditScript, PerturbTrace]:
    '''Perturb a script, also reporting what happened.

    Draw order: for each op, prob_1 and prob_2, then the history span if
    the op is re-texted; after all ops, prob_3, then the utterance span,
    the history span and the candidate choice if an op is appended.

    Parameters
    ----------
    script : EditScript
        never modified
    history : TokenSeq
        dialogue history, source of new spans
    incomplete : TokenSeq
        incomplete utterance, source of the deleted span of an appended replacement
    cfg : PerturbConfig
    rng : np.random.Generator

    Returns
    -------
    tuple[EditScript, PerturbTrace]
        unanchored script and the trace
    '''
    ops = []
    replaced = dropped = appended = 0
    for op in script.ops:
        prob_1, prob_2 = rng.random(), rng.random()
        if _fires(prob_1, cfg.prob_p) and _fires(prob_2, cfg.prob_r):
            span = sample_span(history, rng, cfg.max_span_len)
            if cfg.random_replace:
                ops.append(_with_text(op, span))
                replaced += 1
            else:
                ops.append(op.without_anchor())
        elif _fires(prob_1, cfg.prob_p):
            if cfg.random_delete:
                dropped += 1
            else:
                ops.append(op.without_anchor())
        else:
            ops.append(op.without_anchor())
    prob_3 = rng.random()
    if _fires(prob_3, cfg.prob_p):
        origin_span = sample_span(incomplete, rng, cfg.max_span_len)
        new_span = sample_span(history, rng, cfg.max_span_len)
        choice = int(rng.integers(0, 2))
        if cfg.random_insert:
            if choice == 0:
                ops.append(EditOp.insertion(new_span))
            else:
                ops.append(EditOp.replacement(origin_span, new_span))
            appended = 1
    return EditScript(tuple(ops)), PerturbTrace(replaced, dropped, appended)


def perturb(script: EditScript, history: TokenSeq, incomplete: TokenSeq, cfg: PerturbConfig,
            rng: np.random.Generator) -> EditScript:
    '''Perturb a script (see perturb_with_trace)'''
    perturbed, _ = perturb_with_trace(script, history, incomplete, cfg, rng)
    return perturbed
