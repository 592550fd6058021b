'''
toolkit.py
author(s): editpivot developers

Python interface to access program functionality

(c) Copyright editpivot developers 2024
'''

import dataclasses
import functools
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from editpivot import corpus as corpus_io
from editpivot.editscript import EditScript, Layout, Policy, Strategy, apply_with_report, enum_from_name, parse, serialize
from editpivot.engine import BackendSpec, Variant, analyze, load_run, run_two_stage
from editpivot.generic_classes import MarkerSet, PivotError, check_seed, sample_stream
from editpivot.metrics import evaluate
from editpivot.parsing import ParameterFiller, env_overrides, extract_data
from editpivot.perturb import PerturbConfig
from editpivot.text import TokenMode, detokenize, tokenize

logger = logging.getLogger(__name__)


def log_method(method_name: str):
    '''Decorator to log the start and end of toolkit steps

    Parameters
    ----------
    method_name : str
        name of method to print when logging
    '''
    def decorator_log(func):
        @functools.wraps(func)
        def wrapper_logger(*args, **kwargs):
            logger.info(f"Starting: {method_name}")
            to_return = func(*args, **kwargs)
            logger.info(f"Finished: {method_name}")
            return to_return
        return wrapper_logger
    return decorator_log


def _orders(name: str, value) -> tuple[int, ...]:
    if not isinstance(value, list) or not value:
        raise PivotError(f"metrics/{name} must be a non-empty list")
    if any(isinstance(order, bool) or not isinstance(order, int) or order < 1 for order in value):
        raise PivotError(f"metrics/{name} must hold positive integers: {value}")
    return tuple(value)


@dataclass(frozen=True)
class Config:
    '''Validated, typed view of a filled configuration tree'''
    seed: int
    mode: TokenMode
    markers: MarkerSet
    layout: Layout
    policy: Policy
    strategy: Strategy
    perturb: PerturbConfig
    stage1: BackendSpec
    stage2: BackendSpec
    bleu_orders: tuple[int, ...]
    rouge_orders: tuple[int, ...]
    restoration_orders: tuple[int, ...]
    max_in_flight: int
    progress: bool
    destination: Path

    @classmethod
    def from_dict(cls, tree: dict) -> "Config":
        '''Convert a filled configuration tree

        Parameters
        ----------
        tree : dict
            configuration with every default key present

        Returns
        -------
        Config
        '''
        seed = check_seed(tree["seed"])
        engine = tree["engine"]
        if isinstance(engine["max_in_flight"], bool) or not isinstance(engine["max_in_flight"], int) \
                or engine["max_in_flight"] < 1:
            raise PivotError(f"engine/max_in_flight must be a positive integer: {engine['max_in_flight']!r}")
        if not isinstance(engine["progress"], bool):
            raise PivotError(f"engine/progress must be true or false: {engine['progress']!r}")
        return cls(
            seed=seed,
            mode=TokenMode.from_name(tree["text"]["mode"]),
            markers=MarkerSet(**tree["markers"]),
            layout=enum_from_name(Layout, tree["editscript"]["layout"]),
            policy=enum_from_name(Policy, tree["editscript"]["policy"]),
            strategy=enum_from_name(Strategy, tree["editscript"]["strategy"]),
            perturb=PerturbConfig(seed=seed, **tree["perturb"]),
            stage1=BackendSpec.from_dict(tree["backends"]["stage1"]),
            stage2=BackendSpec.from_dict(tree["backends"]["stage2"]),
            bleu_orders=_orders("bleu_orders", tree["metrics"]["bleu_orders"]),
            rouge_orders=_orders("rouge_orders", tree["metrics"]["rouge_orders"]),
            restoration_orders=_orders("restoration_orders", tree["metrics"]["restoration_orders"]),
            max_in_flight=engine["max_in_flight"],
            progress=engine["progress"],
            destination=Path(tree["output"]["destination"])
            )


@dataclass
class StepSummary:
    '''Outcome of one file-level step'''
    written: int = 0
    hard_errors: int = 0
    skipped_ops: int = 0
    messages: list = dataclasses.field(default_factory=list)

    def __str__(self) -> str:
        return f"{self.written} written, {self.hard_errors} failed, {self.skipped_ops} ops skipped"


class PivotToolkit():
    '''Access editpivot functionality

    Attributes
    ----------
    parameter_filler: ParameterFiller
        Handles filling of configuration trees
    config_tree: dict
        filled configuration
    sources: dict
        key path -> where its value came from
    key_route_delimiter: str
        delimiter for parameter paths
    '''
    def __init__(self) -> None:
        self.parameter_filler = ParameterFiller()
        self.config_tree = {}
        self.sources = {}
        self.print_parameter_logs = False
        self.key_route_delimiter = '/'
        self.fill_config()

    @property
    def config(self) -> Config:
        return Config.from_dict(self.config_tree)

    def fill_config(self) -> dict:
        '''Fill config_tree with defaults

        Returns
        -------
        dict
            filled configuration
        '''
        self.config_tree = self.parameter_filler.process_config(self.config_tree)
        if self.print_parameter_logs:
            self.parameter_filler.print_log()
        return self.config_tree

    def parse_config(self, filename) -> dict:
        '''Read a toml (or json) config file, fill it and record which keys it set

        Parameters
        ----------
        filename : str | Path

        Returns
        -------
        dict
            filled configuration
        '''
        self.config_tree = extract_data(filename)
        for path in self.__leaf_paths(self.config_tree):
            self.sources[path] = "config file"
        return self.fill_config()

    def load_config(self, filename=None, environ=None, cli_overrides: dict | None = None) -> Config:
        '''Build the effective configuration, CLI > environment > config file > default

        Parameters
        ----------
        filename : str | Path | None, optional
            config file
        environ : Mapping | None, optional
            by default os.environ
        cli_overrides : dict | None, optional
            key path -> value from command-line flags

        Returns
        -------
        Config
        '''
        if filename:
            self.parse_config(filename)
        self.change_params(env_overrides(environ, self.key_route_delimiter), "environment")
        self.change_params(cli_overrides or {}, "CLI flag")
        for path in self.__leaf_paths(self.config_tree):
            source = self.sources.get(path, "default value")
            message = f"{path} set to {self.__follow_key_route(path.split('/'), self.config_tree)} from {source}"
            if source == "default value":
                logger.debug(message)
            else:
                logger.info(message)
        return self.config

    def change_delimiter(self, delimiter: str):
        '''Change the delimiter to use in key paths
        for the change_params and get_param methods.
        By default the delimiter is '/'.

        Parameters
        ----------
        delimiter : str
            New delimiter
        '''
        self.key_route_delimiter = delimiter
        logger.info(f"Delimiter changed to: {delimiter}")

    def change_params(self, updated_params: dict, source: str = "change_params"):
        r'''Change parameters in the stored configuration.
        A parameter is referenced using its path, the keys used to reach it
        joined by the delimiter. For example {"perturb/prob_p": 0.3}.

        Parameters
        ----------
        updated_params : dict
            dictionary of the form {path to parameter : updated value}
        source : str, optional
            recorded as where the value came from
        '''
        for param_path, updated_value in updated_params.items():
            if type(param_path) is not str:
                raise PivotError(f"path should be given as a string: {str(param_path)}")
            key_route = param_path.split(self.key_route_delimiter)
            self.config_tree = self.__build_param_dict(key_route, self.config_tree, updated_value)
            self.sources["/".join(key_route)] = source

    def get_param(self, param_path: str):
        r'''Get parameter in the stored configuration, e.g. "perturb/prob_p"

        Parameters
        ----------
        param_path : str
            Path to parameter

        Returns
        -------
        any
            value of parameter
        '''
        key_route = param_path.split(self.key_route_delimiter)
        return self.__follow_key_route(key_route, self.config_tree)

    def __follow_key_route(self, key_route: list[str], param_dict: dict):
        if not isinstance(param_dict, dict) or key_route[0] not in param_dict.keys():
            raise PivotError(f"Path given does not correspond to existing parameters: {key_route[0]}")
        if len(key_route) == 1:
            return param_dict[key_route[0]]
        return self.__follow_key_route(key_route[1:], param_dict[key_route[0]])

    def __build_param_dict(self, key_route: list, param_dict: dict, updated_value):
        if len(key_route) == 0:
            return updated_value
        if not isinstance(param_dict, dict) or key_route[0] not in param_dict.keys():
            raise PivotError(f"Path given does not correspond to existing parameters: {key_route[0]}")
        param_dict[key_route[0]] = self.__build_param_dict(key_route[1:], param_dict[key_route[0]], updated_value)
        return param_dict

    def __leaf_paths(self, tree: dict, prefix: tuple = ()) -> list[str]:
        paths = []
        for key, value in tree.items():
            if isinstance(value, dict):
                paths += self.__leaf_paths(value, prefix + (key,))
            else:
                paths.append("/".join(prefix + (key,)))
        return paths

    def output_path(self, path) -> Path:
        '''Resolve an output path against output/destination'''
        return Path(self.config.destination, path)

    def report_header(self) -> dict:
        return {"seed": self.config.seed, "config": self.config_tree}

    def write_report(self, report: dict, out_path) -> Path:
        out_path = self.output_path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", encoding="utf-8") as report_file:
            json.dump({**report, **self.report_header()}, report_file, ensure_ascii=False, indent=2, sort_keys=True)
            report_file.write("\n")
        return out_path

    def load_corpus(self, in_path):
        return corpus_io.load(in_path)

    @log_method("Extracting edit scripts")
    def extract_file(self, in_path, out_path) -> StepSummary:
        '''Write the serialized gold script of every sample, with anchors

        Parameters
        ----------
        in_path : str | Path
            corpus with rewritten utterances
        out_path : str | Path
            JSONL of {"id", "ops", "anchors", "source_len"}
        '''
        cfg = self.config
        records = []
        for sample in self.load_corpus(in_path):
            script = corpus_io.gold_script(sample, cfg.mode, cfg.markers)
            ordered = _layout_order(script, cfg.layout)
            records.append({
                "id": sample.id,
                "ops": serialize(script, cfg.layout, cfg.markers),
                "anchors": [op.anchor for op in ordered.ops],
                "source_len": script.source_len
                })
        corpus_io.write_jsonl(records, self.output_path(out_path))
        return StepSummary(written=len(records))

    @log_method("Applying edit scripts")
    def apply_file(self, in_path, ops_path, out_path) -> StepSummary:
        '''Apply stored edit scripts to the incomplete utterances

        Parameters
        ----------
        in_path : str | Path
            corpus
        ops_path : str | Path
            JSONL of {"id", "ops"}, optionally with "anchors" and "source_len"
        out_path : str | Path
            JSONL of {"id", "prediction"}
        '''
        cfg = self.config
        ops_records = {}
        for line_number, obj in corpus_io.read_jsonl(ops_path):
            if not isinstance(obj, dict) or "id" not in obj or not isinstance(obj.get("ops"), str):
                raise PivotError(f"{ops_path} line {line_number}: need id and ops")
            ops_records[str(obj["id"])] = obj
        summary = StepSummary()
        predictions = []
        for sample in self.load_corpus(in_path):
            if sample.id not in ops_records:
                raise PivotError(f"no ops for sample {sample.id}")
            incomplete = tokenize(sample.incomplete, cfg.mode, cfg.markers)
            try:
                script = _read_ops(ops_records[sample.id], cfg)
                result, skipped = apply_with_report(incomplete, script, cfg.strategy, sample_stream(cfg.seed, sample.id),
                                                    cfg.policy, cfg.markers)
                summary.skipped_ops += skipped
            except PivotError as error:
                summary.hard_errors += 1
                summary.messages.append(f"sample {sample.id}: {error}")
                logger.warning(f"sample {sample.id}: {error}")
                result = incomplete[0:0]
            predictions.append({"id": sample.id, "prediction": detokenize(result)})
        corpus_io.write_jsonl(predictions, self.output_path(out_path))
        summary.written = len(predictions)
        return summary

    @log_method("Preparing training data")
    def prepare(self, stage: int, in_path, out_path, use_gold_ops: bool = True) -> StepSummary:
        '''Write stage-1 or stage-2 prompt files'''
        cfg = self.config
        corpus = self.load_corpus(in_path)
        if stage == 1:
            examples = corpus_io.build_stage1(corpus, cfg.layout, cfg.mode, cfg.markers)
        elif stage == 2:
            examples = corpus_io.build_stage2(corpus, cfg.perturb, use_gold_ops, cfg.layout, cfg.mode, cfg.markers)
        else:
            raise PivotError(f"stage must be 1 or 2: {stage}")
        corpus_io.save_prepared(examples, self.output_path(out_path))
        summary = StepSummary(written=len(examples))
        kept = {example.id for example in examples}
        summary.messages = [f"sample {sample.id}: skipped, its edit script cannot be serialized"
                            for sample in corpus if sample.id not in kept]
        return summary

    @log_method("Running inference")
    def infer(self, variant: "Variant | str", in_path, out_path) -> StepSummary:
        '''Run the two-stage pipeline and write predictions plus a metadata sidecar

        Parameters
        ----------
        variant : Variant | str
        in_path : str | Path
            corpus
        out_path : str | Path
            JSONL of run records; <out_path>.meta.json gets the run metadata
        '''
        cfg = self.config
        run = run_two_stage(self.load_corpus(in_path), cfg.stage1, cfg.stage2, variant, cfg.seed, cfg.layout,
                            cfg.mode, cfg.markers, cfg.max_in_flight, cfg.progress)
        out_path = self.output_path(out_path)
        corpus_io.write_jsonl((record.to_dict() for record in run.records), out_path)
        meta_path = out_path.with_name(out_path.name + ".meta.json")
        with open(meta_path, "w", encoding="utf-8") as meta_file:
            json.dump({**run.metadata, "config": self.config_tree}, meta_file, ensure_ascii=False, indent=2, sort_keys=True)
            meta_file.write("\n")
        failed = run.failed
        summary = StepSummary(written=len(run.records))
        summary.messages = [f"sample {record.id}: {record.error}" for record in failed]
        if cfg.policy is Policy.STRICT:
            summary.hard_errors = len(failed)
        return summary

    @log_method("Evaluating predictions")
    def evaluate_file(self, pred_path, ref_path, out_report) -> dict:
        '''Score a predictions file against a reference corpus, write the report'''
        cfg = self.config
        predictions = _read_predictions(pred_path)
        incompletes, preds, refs = [], [], []
        for sample in self.load_corpus(ref_path):
            if sample.id not in predictions:
                raise PivotError(f"no prediction for sample {sample.id}")
            incompletes.append(tokenize(sample.incomplete, cfg.mode, cfg.markers))
            preds.append(tokenize(predictions[sample.id], cfg.mode, cfg.markers))
            refs.append(tokenize(sample.require_rewritten(), cfg.mode, cfg.markers))
        report = evaluate(incompletes, preds, refs, cfg.bleu_orders, cfg.rouge_orders, cfg.restoration_orders,
                          cfg.markers).to_dict()
        self.write_report(report, out_report)
        return report

    @log_method("Computing corpus statistics")
    def corpus_stats(self, in_path) -> corpus_io.CorpusStats:
        cfg = self.config
        return corpus_io.stats(self.load_corpus(in_path), cfg.mode, cfg.markers)

    @log_method("Analysing stage correlation")
    def analyze_files(self, stage1_path, pred_path, ref_path, out_report) -> dict:
        '''Relate stage-1 correctness to stage-2 correctness, write the report'''
        cfg = self.config
        run = load_run(stage1_path, pred_path, cfg.mode, cfg.markers)
        report = analyze(run, self.load_corpus(ref_path), cfg.mode, cfg.markers, cfg.bleu_orders, cfg.rouge_orders,
                         cfg.restoration_orders).to_dict()
        self.write_report(report, out_report)
        return report


def _layout_order(script: EditScript, layout: Layout) -> EditScript:
    if layout is Layout.GROUPED:
        return EditScript(script.insertions + script.replacements, script.source_len)
    return script


def _read_ops(record: dict, cfg: Config) -> EditScript:
    '''Parse a stored ops string, restoring anchors when the record has them'''
    script, diagnostics = parse(record["ops"], strict=cfg.policy is Policy.STRICT, mode=cfg.mode, markers=cfg.markers)
    for diagnostic in diagnostics:
        logger.debug(f"sample {record['id']}: {diagnostic}")
    anchors = record.get("anchors")
    if not isinstance(anchors, list) or len(anchors) != len(script.ops) \
            or not all(isinstance(anchor, int) for anchor in anchors):
        return script
    ops = tuple(dataclasses.replace(op, anchor=anchor) for op, anchor in zip(script.ops, anchors))
    ordered = sorted(range(len(ops)), key=lambda index: ops[index].anchor)
    return EditScript(tuple(ops[index] for index in ordered), record.get("source_len"))


def _read_predictions(pred_path) -> dict:
    predictions = {}
    for line_number, obj in corpus_io.read_jsonl(pred_path):
        if not isinstance(obj, dict) or "id" not in obj or not isinstance(obj.get("prediction"), str):
            raise PivotError(f"{pred_path} line {line_number}: need id and prediction")
        predictions[str(obj["id"])] = obj["prediction"]
    return predictions
