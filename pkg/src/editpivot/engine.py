'''
engine.py
author(s): editpivot developers

Generation backends and the two-stage rewriting run.

Stage 1 maps the dialogue context to an edit script, stage 2 maps the
context plus that script to the rewritten utterance. Variants:
    teo: both stages through their backends
    teo_stage1: stage 1 only, parsed ops applied with random insertion gaps
    teo_rfis: replacements applied locally, only insertions passed to stage 2
    teo_gold: gold ops passed to stage 2, stage-1 backend unused

Classes
-------
BackendSpec: how to reach a backend
BackendBase: common backend interface
CommandBackend, HttpBackend, GoldBackend, IdentityBackend, EmptyBackend
RunRecord: one sample's outcome
RunResult: records plus run metadata

(c) Copyright editpivot developers 2024
'''
import json
import logging
import shlex
import subprocess
import threading
import time
import urllib.error
import urllib.request
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from tqdm import tqdm

from editpivot.constants import BACKEND_MAPPING, BACKOFF_BASE
from editpivot.corpus import (
    check_unique_ids,
    context_prompt,
    gold_ops_by_id,
    gold_script,
    ops_prompt,
    read_jsonl
)
from editpivot.editscript import (
    EditScript,
    Layout,
    Policy,
    Strategy,
    apply,
    enum_from_name,
    parse,
    serialize,
    split_rfis
)
from editpivot.generic_classes import DEFAULT_MARKERS, MarkerSet, PivotError, check_seed, sample_stream
from editpivot.metrics import EvalReport, e2c_c2e, evaluate
from editpivot.text import TokenMode, TokenSeq, detokenize, normalize, tokenize

logger = logging.getLogger(__name__)


class BackendKind(Enum):
    COMMAND = "command"
    HTTP = "http"
    GOLD = "gold"
    IDENTITY = "identity"
    EMPTY = "empty"


class Variant(Enum):
    TEO = "teo"
    TEO_STAGE1 = "teo_stage1"
    TEO_RFIS = "teo_rfis"
    TEO_GOLD = "teo_gold"


@dataclass(frozen=True)
class BackendSpec:
    '''How to reach a generation backend.

    Attributes
    ----------
    kind : BackendKind
    endpoint : str
        command line (COMMAND) or url (HTTP)
    timeout : float
        seconds, for the whole process (COMMAND) or one request (HTTP)
    retries : int
        extra HTTP attempts per prompt
    '''
    kind: BackendKind
    endpoint: str = ""
    timeout: float = 60.0
    retries: int = 3

    def __post_init__(self):
        object.__setattr__(self, "kind", enum_from_name(BackendKind, self.kind))
        if self.kind in (BackendKind.COMMAND, BackendKind.HTTP) and not self.endpoint:
            raise PivotError(f"{self.kind.value} backend needs an endpoint")
        if isinstance(self.timeout, bool) or not isinstance(self.timeout, (int, float)) or self.timeout <= 0:
            raise PivotError(f"backend timeout must be positive: {self.timeout!r}")
        if isinstance(self.retries, bool) or not isinstance(self.retries, int) or self.retries < 0:
            raise PivotError(f"backend retries must be a non-negative integer: {self.retries!r}")

    @classmethod
    def from_dict(cls, table: dict) -> "BackendSpec":
        return cls(table["kind"], table.get("endpoint", ""), table.get("timeout", 60.0), table.get("retries", 3))

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "endpoint": self.endpoint, "timeout": self.timeout, "retries": self.retries}


@dataclass(frozen=True)
class Generation:
    '''Backend output for one prompt; output is None when error is set'''
    id: str
    output: str | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


class _Accumulator:
    '''Thread-safe collection of generations keyed by sample id'''
    def __init__(self):
        self._lock = threading.Lock()
        self._results = {}

    def add(self, generation: Generation):
        with self._lock:
            self._results[generation.id] = generation

    def ordered(self, ids) -> list[Generation]:
        with self._lock:
            return [self._results.get(sample_id, Generation(sample_id, None, "no output")) for sample_id in ids]


class BackendBase(ABC):
    '''Common base for generation backends

    Attributes
    ----------
    spec : BackendSpec
    max_in_flight : int
        prompts dispatched concurrently
    progress : bool
        show a progress bar
    '''
    def __init__(self, spec: BackendSpec, max_in_flight: int = 1, progress: bool = False):
        if max_in_flight < 1:
            raise PivotError(f"max_in_flight must be positive: {max_in_flight}")
        self.spec = spec
        self.max_in_flight = max_in_flight
        self.progress = progress

    @classmethod
    def from_spec(cls, spec: BackendSpec, **kwargs) -> "BackendBase":
        '''Construct the backend class named by spec.kind

        Parameters
        ----------
        spec : BackendSpec
        **kwargs
            max_in_flight, progress, and per-kind extras: outputs for GOLD,
            incompletes for IDENTITY, sleep for HTTP
        '''
        constructor = globals()[BACKEND_MAPPING[spec.kind.value]]
        return constructor(spec, **kwargs)

    @abstractmethod
    def generate(self, prompts: list[tuple[str, str]]) -> list[Generation]:
        '''Generate one output per prompt

        Parameters
        ----------
        prompts : list[tuple[str, str]]
            (sample id, prompt) pairs

        Returns
        -------
        list[Generation]
            in prompt order
        '''
        pass


class _MappingBackend(BackendBase):
    '''Backends answering from a per-id table'''
    def __init__(self, spec: BackendSpec, outputs=None, max_in_flight: int = 1, progress: bool = False):
        super().__init__(spec, max_in_flight, progress)
        self.outputs = dict(outputs or {})

    def generate(self, prompts):
        return [
            Generation(sample_id, self.outputs[sample_id]) if sample_id in self.outputs
            else Generation(sample_id, None, f"{self.spec.kind.value} backend has no entry for {sample_id}")
            for sample_id, _ in prompts
            ]


class GoldBackend(_MappingBackend):
    '''Returns gold targets supplied at construction'''
    def __init__(self, spec: BackendSpec, outputs=None, incompletes=None, **kwargs):
        super().__init__(spec, outputs, **kwargs)


class IdentityBackend(_MappingBackend):
    '''Echoes the incomplete utterance'''
    def __init__(self, spec: BackendSpec, outputs=None, incompletes=None, **kwargs):
        super().__init__(spec, incompletes, **kwargs)


class EmptyBackend(BackendBase):
    def __init__(self, spec: BackendSpec, outputs=None, incompletes=None, **kwargs):
        super().__init__(spec, **kwargs)

    def generate(self, prompts):
        return [Generation(sample_id, "") for sample_id, _ in prompts]


def _read_output(obj) -> str:
    if not isinstance(obj, dict) or not isinstance(obj.get("output"), str):
        raise ValueError(f"malformed backend response: {obj!r}")
    return obj["output"]


class CommandBackend(BackendBase):
    '''A process reading {"id","prompt"} lines and writing {"id","output"} lines.

    The process is spawned once per generate call; outputs are matched by
    id, so the process may answer in any order.
    '''
    def __init__(self, spec: BackendSpec, outputs=None, incompletes=None, **kwargs):
        super().__init__(spec, **kwargs)

    def generate(self, prompts):
        if not prompts:
            return []
        requests = "".join(
            json.dumps({"id": sample_id, "prompt": prompt}, ensure_ascii=False) + "\n"
            for sample_id, prompt in prompts
            )
        try:
            proc = subprocess.Popen(shlex.split(self.spec.endpoint), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                    stderr=subprocess.PIPE, text=True, encoding="utf-8")
        except OSError as error:
            return [Generation(sample_id, None, f"could not start backend: {error}") for sample_id, _ in prompts]
        try:
            stdout, stderr = proc.communicate(requests, timeout=self.spec.timeout)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.communicate()
            return [Generation(sample_id, None, f"backend timed out after {self.spec.timeout}s")
                    for sample_id, _ in prompts]
        results = _Accumulator()
        wanted = {sample_id for sample_id, _ in prompts}
        for line in stdout.splitlines():
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                output = _read_output(obj)
            except (json.JSONDecodeError, ValueError) as error:
                logger.warning(f"ignoring backend line: {error}")
                continue
            if str(obj.get("id")) in wanted:
                results.add(Generation(str(obj["id"]), output))
        if proc.returncode:
            logger.warning(f"backend exited with status {proc.returncode}: {stderr.strip()[:200]}")
        missing = f"no output from backend (exit status {proc.returncode})"
        return [
            generation if generation.ok else Generation(generation.id, None, missing)
            for generation in results.ordered([sample_id for sample_id, _ in prompts])
            ]


class HttpBackend(BackendBase):
    '''POST {"prompt"} per prompt, read {"output"}; retried with exponential backoff'''
    def __init__(self, spec: BackendSpec, outputs=None, incompletes=None, sleep=time.sleep, **kwargs):
        super().__init__(spec, **kwargs)
        self.sleep = sleep

    def request(self, prompt: str) -> str:
        body = json.dumps({"prompt": prompt}, ensure_ascii=False).encode("utf-8")
        request = urllib.request.Request(self.spec.endpoint, data=body, method="POST",
                                         headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(request, timeout=self.spec.timeout) as response:
            if response.status != 200:
                raise ValueError(f"status {response.status}")
            return _read_output(json.loads(response.read().decode("utf-8")))

    def generate_one(self, sample_id: str, prompt: str) -> Generation:
        error = None
        for attempt in range(self.spec.retries + 1):
            try:
                return Generation(sample_id, self.request(prompt))
            except (urllib.error.URLError, OSError, ValueError) as exc:
                error = str(exc)
                logger.debug(f"{sample_id}: attempt {attempt + 1} failed: {error}")
            if attempt < self.spec.retries:
                self.sleep(BACKOFF_BASE * 2 ** attempt)
        return Generation(sample_id, None, f"failed after {self.spec.retries + 1} attempts: {error}")

    def generate(self, prompts):
        results = _Accumulator()
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            futures = [pool.submit(self.generate_one, sample_id, prompt) for sample_id, prompt in prompts]
            for future in tqdm(as_completed(futures), total=len(futures), disable=not self.progress, desc="http"):
                results.add(future.result())
        return results.ordered([sample_id for sample_id, _ in prompts])


def generate(backend: BackendBase, prompts: list[tuple[str, str]]) -> list[Generation]:
    '''Run prompts through a backend.

    Failures are recorded per sample; the call fails only when every
    prompt fails.

    Parameters
    ----------
    backend : BackendBase
    prompts : list[tuple[str, str]]
        (sample id, prompt) pairs

    Returns
    -------
    list[Generation]
        in prompt order
    '''
    generations = backend.generate(prompts)
    failed = [generation for generation in generations if not generation.ok]
    if prompts and len(failed) == len(prompts):
        raise PivotError(f"every sample failed on the {backend.spec.kind.value} backend, first error: {failed[0].error}")
    for generation in failed:
        logger.warning(f"sample {generation.id}: {generation.error}")
    return generations


@dataclass
class RunRecord:
    '''What happened to one sample.

    Attributes
    ----------
    id : str
    stage1_ops_raw : str
        stage-1 output as received
    stage1_script : EditScript | None
        leniently parsed stage-1 output, None when stage 1 failed
    prediction : TokenSeq
        empty when the sample failed
    variant : Variant
    error : str | None
    stage2_ops : str | None
        what went into the stage-2 ops slot
    '''
    id: str
    stage1_ops_raw: str
    stage1_script: EditScript | None
    prediction: TokenSeq
    variant: Variant
    error: str | None = None
    stage2_ops: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "prediction": detokenize(self.prediction),
            "stage1_ops": self.stage1_ops_raw,
            "stage2_ops": self.stage2_ops,
            "variant": self.variant.value,
            "error": self.error
            }


@dataclass
class RunResult:
    records: list[RunRecord]
    metadata: dict = field(default_factory=dict)

    @property
    def failed(self) -> list[RunRecord]:
        return [record for record in self.records if record.error is not None]

    def by_id(self) -> dict:
        return {record.id: record for record in self.records}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _stage_backend(spec: BackendSpec, outputs: dict, incompletes: dict, max_in_flight: int, progress: bool,
                   sleep) -> BackendBase:
    kwargs = {"outputs": outputs, "incompletes": incompletes, "max_in_flight": max_in_flight, "progress": progress}
    if spec.kind is BackendKind.HTTP:
        kwargs["sleep"] = sleep
    return BackendBase.from_spec(spec, **kwargs)


def run_two_stage(corpus, stage1: BackendSpec, stage2: BackendSpec, variant: "Variant | str" = Variant.TEO,
                  seed: int = 0, layout: "Layout | str" = Layout.POSITIONAL, mode: TokenMode = TokenMode.AUTO,
                  markers: MarkerSet = DEFAULT_MARKERS, max_in_flight: int = 1, progress: bool = False,
                  sleep=time.sleep) -> RunResult:
    '''Rewrite every sample of a corpus with the two-stage pipeline

    Parameters
    ----------
    corpus : list[DialogueSample]
    stage1, stage2 : BackendSpec
        GOLD stage 1 answers with serialized gold scripts, GOLD stage 2
        with rewritten utterances; IDENTITY echoes the incomplete utterance
    variant : Variant | str, optional
        by default Variant.TEO
    seed : int, optional
        run seed for the per-sample random streams, by default 0
    layout : Layout | str, optional
        layout of gold and forwarded ops
    mode : TokenMode, optional
    markers : MarkerSet, optional
    max_in_flight : int, optional
        concurrent prompts per backend
    progress : bool, optional
        show progress bars
    sleep : callable, optional
        backoff sleep of HTTP backends

    Returns
    -------
    RunResult
        one record per sample, in corpus order
    '''
    variant = enum_from_name(Variant, variant)
    layout = enum_from_name(Layout, layout)
    seed = check_seed(seed)
    check_unique_ids(corpus)
    if not corpus:
        raise PivotError("cannot run on an empty corpus")
    if variant is Variant.TEO_GOLD:
        for sample in corpus:
            sample.require_rewritten()
    started = _now()
    samples = {sample.id: sample for sample in corpus}
    incompletes = {sample.id: sample.incomplete for sample in corpus}
    references = {sample.id: normalize(sample.rewritten, mode, markers)
                  for sample in corpus if sample.rewritten is not None}
    golds = gold_ops_by_id(corpus, layout, mode, markers)

    # stage 1
    if variant is Variant.TEO_GOLD:
        stage1_outputs = [
            Generation(sample.id, golds[sample.id]) if sample.id in golds
            else Generation(sample.id, None, "gold script cannot be serialized")
            for sample in corpus
            ]
    else:
        backend = _stage_backend(stage1, golds, incompletes, max_in_flight, progress, sleep)
        logger.info(f"stage 1: {len(corpus)} prompts to the {stage1.kind.value} backend")
        stage1_outputs = generate(backend, [(sample.id, context_prompt(sample, mode, markers)) for sample in corpus])

    records = {}
    stage2_prompts = []
    for generation in tqdm(stage1_outputs, disable=not progress, desc="stage 1"):
        sample = samples[generation.id]
        if not generation.ok:
            records[sample.id] = RunRecord(sample.id, "", None, TokenSeq(mode=mode), variant, generation.error)
            continue
        script, diagnostics = parse(generation.output, strict=False, mode=mode, markers=markers)
        if diagnostics:
            logger.debug(f"sample {sample.id}: {len(diagnostics)} stage-1 parse diagnostics")
        record = RunRecord(sample.id, generation.output, script, TokenSeq(mode=mode), variant)
        records[sample.id] = record
        incomplete = tokenize(sample.incomplete, mode, markers)
        if variant is Variant.TEO_STAGE1:
            record.prediction = apply(incomplete, script, Strategy.RANDOM, sample_stream(seed, sample.id),
                                      Policy.LENIENT, markers)
        elif variant is Variant.TEO_RFIS:
            replacements, insertions = split_rfis(script)
            replaced = apply(incomplete, replacements, Strategy.MATCHED, policy=Policy.LENIENT, markers=markers)
            record.stage2_ops = serialize(insertions, layout, markers)
            stage2_prompts.append((sample.id, ops_prompt(sample, record.stage2_ops, mode, markers, detokenize(replaced))))
        else:
            record.stage2_ops = generation.output
            stage2_prompts.append((sample.id, ops_prompt(sample, record.stage2_ops, mode, markers)))

    # stage 2
    if stage2_prompts:
        backend = _stage_backend(stage2, references, incompletes, max_in_flight, progress, sleep)
        logger.info(f"stage 2: {len(stage2_prompts)} prompts to the {stage2.kind.value} backend")
        for generation in generate(backend, stage2_prompts):
            record = records[generation.id]
            if generation.ok:
                record.prediction = tokenize(generation.output, mode, markers)
            else:
                record.error = generation.error

    ordered = [records[sample.id] for sample in corpus]
    failed_ids = [record.id for record in ordered if record.error is not None]
    if failed_ids:
        logger.warning(f"{len(failed_ids)} of {len(ordered)} samples failed and have empty predictions")
    metadata = {
        "seed": seed,
        "variant": variant.value,
        "layout": layout.value,
        "backends": {"stage1": stage1.to_dict(), "stage2": stage2.to_dict()},
        "failed_ids": failed_ids,
        "started": started,
        "finished": _now()
        }
    return RunResult(ordered, metadata)


def _canonical_keys(script: EditScript) -> tuple:
    # insertions first, so positional and grouped layouts compare equal
    return tuple(op.key() for op in script.insertions) + tuple(op.key() for op in script.replacements)


def analyze(run: RunResult, corpus, mode: TokenMode = TokenMode.AUTO, markers: MarkerSet = DEFAULT_MARKERS,
            bleu_orders=(1, 2, 3, 4), rouge_orders=(1, 2), restoration_orders=(1, 2, 3)) -> EvalReport:
    '''Score a run and relate stage-1 correctness to stage-2 correctness

    Parameters
    ----------
    run : RunResult
    corpus : list[DialogueSample]
        references for every record
    mode : TokenMode, optional
    markers : MarkerSet, optional
    bleu_orders, rouge_orders, restoration_orders : iterable of int, optional

    Returns
    -------
    EvalReport
        with e2c, c2e, the 2x2 stage matrix, stage-1 script EM and the
        fraction of samples corrected by stage 2
    '''
    records = run.by_id()
    incompletes, predictions, references, pairs = [], [], [], []
    for sample in corpus:
        if sample.id not in records:
            raise PivotError(f"run has no record for sample {sample.id}")
        record = records[sample.id]
        incomplete = tokenize(sample.incomplete, mode, markers)
        reference = tokenize(sample.require_rewritten(), mode, markers)
        stage1_right = (record.stage1_script is not None
                        and _canonical_keys(record.stage1_script) == _canonical_keys(gold_script(sample, mode, markers)))
        stage2_right = record.prediction == reference
        incompletes.append(incomplete)
        predictions.append(record.prediction)
        references.append(reference)
        pairs.append((stage1_right, stage2_right))
    report = evaluate(incompletes, predictions, references, bleu_orders, rouge_orders, restoration_orders, markers)
    report.e2c, report.c2e = e2c_c2e(pairs)
    matrix = {
        "stage1_right": {"stage2_right": 0, "stage2_wrong": 0},
        "stage1_wrong": {"stage2_right": 0, "stage2_wrong": 0}
        }
    for stage1_right, stage2_right in pairs:
        row = "stage1_right" if stage1_right else "stage1_wrong"
        matrix[row]["stage2_right" if stage2_right else "stage2_wrong"] += 1
    report.stage_matrix = matrix
    report.stage1_em = sum(first for first, _ in pairs) / len(pairs)
    report.corrected_fraction = matrix["stage1_wrong"]["stage2_right"] / len(pairs)
    if run.failed:
        report.warnings.append(f"{len(run.failed)} samples failed during the run and were scored as empty predictions")
    return report


def load_run(stage1_path, pred_path, mode: TokenMode = TokenMode.AUTO, markers: MarkerSet = DEFAULT_MARKERS,
             variant: "Variant | str" = Variant.TEO) -> RunResult:
    '''Rebuild a RunResult from a stage-1 ops file and a predictions file.

    The stage-1 file holds {"id", "ops"} or {"id", "stage1_ops"} lines, the
    predictions file {"id", "prediction"} lines.
    '''
    variant = enum_from_name(Variant, variant)
    stage1_ops = {}
    for line_number, obj in read_jsonl(stage1_path):
        raw = obj.get("ops", obj.get("stage1_ops")) if isinstance(obj, dict) else None
        if not isinstance(raw, str) or "id" not in obj:
            raise PivotError(f"{stage1_path} line {line_number}: need id and ops")
        stage1_ops[str(obj["id"])] = raw
    records = []
    for line_number, obj in read_jsonl(pred_path):
        if not isinstance(obj, dict) or "id" not in obj or not isinstance(obj.get("prediction"), str):
            raise PivotError(f"{pred_path} line {line_number}: need id and prediction")
        sample_id = str(obj["id"])
        if sample_id not in stage1_ops:
            raise PivotError(f"no stage-1 ops for sample {sample_id}")
        script, _ = parse(stage1_ops[sample_id], strict=False, mode=mode, markers=markers)
        records.append(RunRecord(sample_id, stage1_ops[sample_id], script,
                                 tokenize(obj["prediction"], mode, markers), variant, obj.get("error")))
    return RunResult(records, {"variant": variant.value, "stage1_path": str(stage1_path), "pred_path": str(pred_path)})
