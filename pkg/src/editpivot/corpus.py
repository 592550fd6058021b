'''
corpus.py
author(s): editpivot developers

Dialogue corpora: loading, saving, statistics and construction of the
stage-1 and stage-2 prompt files.

Prompt layout, with [CLS]/[SEP] written as literal strings:
    stage 1: [CLS] h_1 [SEP] h_2 ... [SEP] u_n [SEP]
    stage 2: [CLS] h_1 [SEP] h_2 ... [SEP] u_n [SEP] ops [SEP]

(c) Copyright editpivot developers 2024
'''
import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from editpivot.editscript import Layout, enum_from_name, extract, serialize
from editpivot.generic_classes import DEFAULT_MARKERS, MarkerSet, PivotError, sample_stream
from editpivot.parsing import get_format
from editpivot.perturb import PerturbConfig, perturb_with_trace
from editpivot.text import TokenMode, concat, normalize, tokenize

logger = logging.getLogger(__name__)


class PromptVariant(Enum):
    STAGE1 = "stage1"
    STAGE2 = "stage2"
    STAGE2_PREDICTED = "stage2_predicted"


@dataclass(frozen=True)
class DialogueSample:
    '''One dialogue turn to rewrite.

    Attributes
    ----------
    id : str
        unique within a corpus
    history : tuple[str, ...]
        utterances before the incomplete one
    incomplete : str
        non-empty utterance to rewrite
    rewritten : str | None
        reference rewrite, None for inference-only data
    '''
    id: str
    history: tuple[str, ...]
    incomplete: str
    rewritten: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "history", tuple(self.history))
        if not isinstance(self.incomplete, str) or not self.incomplete.strip():
            raise PivotError(f"sample {self.id}: incomplete utterance must be a non-empty string")
        if not all(isinstance(utterance, str) for utterance in self.history):
            raise PivotError(f"sample {self.id}: history must be a list of strings")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "history": list(self.history),
            "incomplete": self.incomplete,
            "rewritten": self.rewritten
            }

    def require_rewritten(self) -> str:
        if self.rewritten is None:
            raise PivotError(f"sample {self.id} has no rewritten utterance")
        return self.rewritten


@dataclass(frozen=True)
class PreparedExample:
    '''A model input/target pair'''
    id: str
    input: str
    target: str | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {"id": self.id, "input": self.input, "target": self.target, "meta": dict(self.meta)}


@dataclass(frozen=True)
class CorpusStats:
    avg_cont_len: float
    avg_curr_len: float
    avg_rewr_len: float
    n_insertion: int
    n_replacement: int
    n_samples: int

    def to_dict(self) -> dict:
        return asdict(self)


def _read_lines(path) -> list[tuple[int, str]]:
    with open(path, encoding="utf-8") as corpus_file:
        lines = [(number, line.rstrip("\n")) for number, line in enumerate(corpus_file, start=1)]
    lines = [(number, line) for number, line in lines if line.strip()]
    if not lines:
        raise PivotError(f"empty corpus file: {path}")
    return lines


def _optional_text(value) -> str | None:
    return value if value else None


def _sample_from_json(obj, line_number: int) -> DialogueSample:
    if not isinstance(obj, dict):
        raise PivotError(f"line {line_number}: expected a json object")
    history = obj.get("history", [])
    if not isinstance(history, list):
        raise PivotError(f"line {line_number}: history must be an array of strings")
    if "incomplete" not in obj:
        raise PivotError(f"line {line_number}: missing field 'incomplete'")
    rewritten = obj.get("rewritten")
    if rewritten is not None and not isinstance(rewritten, str):
        raise PivotError(f"line {line_number}: rewritten must be a string")
    sample_id = obj.get("id", line_number)
    return DialogueSample(str(sample_id), tuple(history), obj["incomplete"], _optional_text(rewritten))


def _sample_from_tsv(line: str, line_number: int) -> DialogueSample:
    columns = line.split("\t")
    if len(columns) < 2:
        raise PivotError(f"line {line_number}: need at least incomplete and rewritten columns")
    return DialogueSample(str(line_number), tuple(columns[:-2]), columns[-2], _optional_text(columns[-1]))


def load(path, format_type: str | None = None) -> list[DialogueSample]:
    '''Load a dialogue corpus.

    JSONL lines hold {"history", "incomplete", "rewritten", "id"} with
    rewritten and id optional (id defaults to the line number). TSV lines
    hold tab-separated utterances: last column rewritten, second to last
    incomplete, the rest history; ids are line numbers.

    Parameters
    ----------
    path : str | Path
    format_type : str | None, optional
        "jsonl" or "tsv", by default taken from the file suffix

    Returns
    -------
    list[DialogueSample]
    '''
    corpus_format = get_format(path, format_type)
    corpus = []
    for line_number, line in _read_lines(path):
        if corpus_format == "jsonl":
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as error:
                raise PivotError(f"line {line_number}: malformed json ({error.msg})")
            sample = _sample_from_json(obj, line_number)
        else:
            sample = _sample_from_tsv(line, line_number)
        corpus.append(sample)
    check_unique_ids(corpus)
    logger.info(f"loaded {len(corpus)} samples from {path}")
    return corpus


def check_unique_ids(corpus):
    seen = set()
    for sample in corpus:
        if sample.id in seen:
            raise PivotError(f"duplicate sample id: {sample.id}")
        seen.add(sample.id)


def write_jsonl(records, path):
    '''Write one json object per line'''
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as out_file:
        for record in records:
            out_file.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_jsonl(path) -> list[tuple[int, dict]]:
    '''Read (line number, object) pairs from a JSONL file'''
    records = []
    for line_number, line in _read_lines(path):
        try:
            records.append((line_number, json.loads(line)))
        except json.JSONDecodeError as error:
            raise PivotError(f"{path} line {line_number}: malformed json ({error.msg})")
    return records


def save(corpus, path):
    '''Write a corpus in the canonical JSONL form'''
    write_jsonl((sample.to_dict() for sample in corpus), path)


def save_prepared(examples, path):
    write_jsonl((example.to_dict() for example in examples), path)


def load_prepared(path) -> list[PreparedExample]:
    examples = []
    for line_number, obj in read_jsonl(path):
        if not isinstance(obj, dict) or "id" not in obj or "input" not in obj:
            raise PivotError(f"{path} line {line_number}: prepared examples need id and input")
        examples.append(PreparedExample(str(obj["id"]), obj["input"], obj.get("target"), obj.get("meta") or {}))
    return examples


def stats(corpus, mode: TokenMode = TokenMode.AUTO, markers: MarkerSet = DEFAULT_MARKERS) -> CorpusStats:
    '''Corpus statistics: average token lengths and edit op totals

    Parameters
    ----------
    corpus : list[DialogueSample]
        every sample needs a rewritten utterance
    mode : TokenMode, optional
    markers : MarkerSet, optional

    Returns
    -------
    CorpusStats
    '''
    if not corpus:
        raise PivotError("cannot compute statistics of an empty corpus")
    lengths = np.zeros((len(corpus), 3))
    n_insertion = n_replacement = 0
    for index, sample in enumerate(corpus):
        rewritten = tokenize(sample.require_rewritten(), mode, markers)
        incomplete = tokenize(sample.incomplete, mode, markers)
        history = concat((tokenize(utterance, mode, markers) for utterance in sample.history), mode)
        lengths[index] = (len(history), len(incomplete), len(rewritten))
        script = extract(incomplete, rewritten, markers)
        n_insertion += len(script.insertions)
        n_replacement += len(script.replacements)
    avg_cont, avg_curr, avg_rewr = lengths.mean(axis=0)
    return CorpusStats(float(avg_cont), float(avg_curr), float(avg_rewr), n_insertion, n_replacement, len(corpus))


def context_prompt(sample: DialogueSample, mode: TokenMode = TokenMode.AUTO, markers: MarkerSet = DEFAULT_MARKERS,
                   incomplete: str | None = None) -> str:
    '''Stage-1 input: [CLS] history joined by [SEP], [SEP], utterance, [SEP].

    incomplete, when given, stands in for the sample's own utterance.
    '''
    incomplete = sample.incomplete if incomplete is None else incomplete
    parts = [markers.cls]
    for index, utterance in enumerate(sample.history):
        if index:
            parts.append(markers.sep)
        parts.append(normalize(utterance, mode, markers))
    parts += [markers.sep, normalize(incomplete, mode, markers), markers.sep]
    return " ".join(part for part in parts if part)


def ops_prompt(sample: DialogueSample, ops: str, mode: TokenMode = TokenMode.AUTO,
               markers: MarkerSet = DEFAULT_MARKERS, incomplete: str | None = None) -> str:
    '''Stage-2 input: the stage-1 input followed by the ops string and [SEP]'''
    parts = [context_prompt(sample, mode, markers, incomplete), ops, markers.sep]
    return " ".join(part for part in parts if part)


def gold_script(sample: DialogueSample, mode: TokenMode = TokenMode.AUTO, markers: MarkerSet = DEFAULT_MARKERS):
    '''Gold edit script of a sample'''
    incomplete = tokenize(sample.incomplete, mode, markers)
    return extract(incomplete, tokenize(sample.require_rewritten(), mode, markers), markers)


def gold_ops(sample: DialogueSample, layout: Layout = Layout.POSITIONAL, mode: TokenMode = TokenMode.AUTO,
             markers: MarkerSet = DEFAULT_MARKERS) -> str:
    '''Serialized gold edit script of a sample'''
    try:
        return serialize(gold_script(sample, mode, markers), layout, markers)
    except PivotError as error:
        raise PivotError(f"sample {sample.id}: {error}")


def gold_ops_by_id(corpus, layout: Layout = Layout.POSITIONAL, mode: TokenMode = TokenMode.AUTO,
                   markers: MarkerSet = DEFAULT_MARKERS) -> dict[str, str]:
    '''Serialized gold scripts of the samples with a rewritten utterance.

    Samples whose script cannot be serialized (a marker literal inside an
    utterance) are left out with a warning.
    '''
    golds = {}
    for sample in corpus:
        if sample.rewritten is None:
            continue
        try:
            golds[sample.id] = gold_ops(sample, layout, mode, markers)
        except PivotError as error:
            logger.warning(f"skipping {error}")
    return golds


def build_stage1(corpus, layout: "Layout | str" = Layout.POSITIONAL, mode: TokenMode = TokenMode.AUTO,
                 markers: MarkerSet = DEFAULT_MARKERS) -> list[PreparedExample]:
    '''Stage-1 examples: dialogue context in, serialized gold script out

    Parameters
    ----------
    corpus : list[DialogueSample]
    layout : Layout | str, optional
        by default Layout.POSITIONAL
    mode : TokenMode, optional
    markers : MarkerSet, optional

    Returns
    -------
    list[PreparedExample]
        in corpus order, without the samples whose script cannot be serialized
    '''
    layout = enum_from_name(Layout, layout)
    for sample in corpus:
        sample.require_rewritten()
    golds = gold_ops_by_id(corpus, layout, mode, markers)
    meta = {"perturbed": False, "variant": PromptVariant.STAGE1.value}
    return [
        PreparedExample(sample.id, context_prompt(sample, mode, markers), golds[sample.id], dict(meta))
        for sample in corpus if sample.id in golds
        ]


def perturbed_ops(sample: DialogueSample, cfg: PerturbConfig, layout: Layout = Layout.POSITIONAL,
                  mode: TokenMode = TokenMode.AUTO, markers: MarkerSet = DEFAULT_MARKERS) -> tuple[str, bool]:
    '''Serialized perturbed gold script of a sample and whether perturbation fired.

    New spans come from the history, or from the incomplete utterance when
    the history is empty. The random stream is the sample's own.
    '''
    incomplete = tokenize(sample.incomplete, mode, markers)
    history = concat((tokenize(utterance, mode, markers) for utterance in sample.history), mode)
    script = extract(incomplete, tokenize(sample.require_rewritten(), mode, markers), markers)
    rng = sample_stream(cfg.seed, sample.id)
    perturbed, trace = perturb_with_trace(script, history or incomplete, incomplete, cfg, rng)
    try:
        return serialize(perturbed, layout, markers), trace.fired
    except PivotError as error:
        raise PivotError(f"sample {sample.id}: {error}")


def build_stage2(corpus, cfg: PerturbConfig, use_gold_ops: bool = True, layout: "Layout | str" = Layout.POSITIONAL,
                 mode: TokenMode = TokenMode.AUTO, markers: MarkerSet = DEFAULT_MARKERS) -> list[PreparedExample]:
    '''Stage-2 training examples.

    With use_gold_ops the ops slot holds the perturbed gold script,
    otherwise it is left empty (no-pivot baseline input).

    Parameters
    ----------
    corpus : list[DialogueSample]
    cfg : PerturbConfig
        perturbation parameters and the run seed
    use_gold_ops : bool, optional
        by default True
    layout : Layout | str, optional
    mode : TokenMode, optional
    markers : MarkerSet, optional

    Returns
    -------
    list[PreparedExample]
        in corpus order, target = rewritten; with use_gold_ops the samples
        whose script cannot be serialized are left out
    '''
    layout = enum_from_name(Layout, layout)
    examples = []
    for sample in corpus:
        ops, fired = "", False
        if use_gold_ops:
            sample.require_rewritten()
            try:
                ops, fired = perturbed_ops(sample, cfg, layout, mode, markers)
            except PivotError as error:
                logger.warning(f"skipping {error}")
                continue
        meta = {"perturbed": fired, "variant": PromptVariant.STAGE2.value}
        target = normalize(sample.rewritten, mode, markers) if sample.rewritten is not None else None
        examples.append(PreparedExample(sample.id, ops_prompt(sample, ops, mode, markers), target, meta))
    perturbed = sum(example.meta["perturbed"] for example in examples)
    logger.info(f"built {len(examples)} stage-2 examples, {perturbed} perturbed")
    return examples


def build_stage2_from_predictions(corpus, predicted_ops, with_targets: bool = False, mode: TokenMode = TokenMode.AUTO,
                                  markers: MarkerSet = DEFAULT_MARKERS) -> list[PreparedExample]:
    '''Stage-2 examples with the raw stage-1 predictions in the ops slot

    Parameters
    ----------
    corpus : list[DialogueSample]
    predicted_ops : Mapping[str, str]
        sample id -> stage-1 output, used verbatim
    with_targets : bool, optional
        also emit rewritten targets, by default False
    mode : TokenMode, optional
    markers : MarkerSet, optional

    Returns
    -------
    list[PreparedExample]
    '''
    examples = []
    for sample in corpus:
        if sample.id not in predicted_ops:
            raise PivotError(f"no predicted ops for sample {sample.id}")
        target = None
        if with_targets:
            target = normalize(sample.require_rewritten(), mode, markers)
        meta = {"perturbed": False, "variant": PromptVariant.STAGE2_PREDICTED.value}
        examples.append(PreparedExample(sample.id, ops_prompt(sample, predicted_ops[sample.id], mode, markers),
                                        target, meta))
    return examples
