'''
cli.py
author(s): editpivot developers

Command-line interface. Every pipeline step is a subcommand; settings
come from CLI flags, then EDITPIVOT_* environment variables, then the
config file, then defaults.

(c) Copyright editpivot developers 2024
'''
import argparse
import json
import logging

import toml

from editpivot.default_params import DEFAULT_CONFIG
from editpivot.engine import Variant
from editpivot.generic_classes import PivotError
from editpivot.toolkit import PivotToolkit, StepSummary

logger = logging.getLogger(__name__)


def _finish(summary: StepSummary) -> int:
    '''Print the partial-failure summary, exit 1 on hard errors'''
    print(f"summary: {summary}")
    for message in summary.messages:
        print(f"  {message}")
    return 1 if summary.hard_errors else 0


def cmd_extract(toolkit: PivotToolkit, in_path, out_path) -> int:
    return _finish(toolkit.extract_file(in_path, out_path))


def cmd_apply(toolkit: PivotToolkit, in_path, ops_path, out_path) -> int:
    return _finish(toolkit.apply_file(in_path, ops_path, out_path))


def cmd_prepare(toolkit: PivotToolkit, stage: int, in_path, out_path, use_gold_ops: bool = True) -> int:
    return _finish(toolkit.prepare(stage, in_path, out_path, use_gold_ops))


def cmd_infer(toolkit: PivotToolkit, variant: str, in_path, out_path) -> int:
    return _finish(toolkit.infer(variant, in_path, out_path))


def cmd_eval(toolkit: PivotToolkit, pred_path, ref_path, out_report) -> int:
    report = toolkit.evaluate_file(pred_path, ref_path, out_report)
    print(f"EM {report['em']:.4f}, report written to {toolkit.output_path(out_report)}")
    for warning in report["warnings"]:
        print(f"warning: {warning}")
    return 0


def cmd_stats(toolkit: PivotToolkit, in_path, out_report=None) -> int:
    corpus_stats = {"mode": toolkit.config.mode.value, **toolkit.corpus_stats(in_path).to_dict()}
    print(json.dumps(corpus_stats, indent=2))
    if out_report:
        toolkit.write_report(corpus_stats, out_report)
    return 0


def cmd_analyze(toolkit: PivotToolkit, stage1_path, pred_path, ref_path, out_report) -> int:
    report = toolkit.analyze_files(stage1_path, pred_path, ref_path, out_report)
    print(f"E2C {report['e2c']}, C2E {report['c2e']}, stage matrix {report['stage_matrix']}")
    return 0


def cmd_info() -> int:
    '''Print the default configuration as a toml template'''
    print(toml.dumps(DEFAULT_CONFIG))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=str, help="Name of toml config file")
    common.add_argument("--seed", type=int, help="Run seed (64-bit unsigned)")
    common.add_argument("--mode", type=str, help="Tokenization mode: char, whitespace or auto")
    common.add_argument("--layout", type=str, help="Ops layout: positional or grouped")
    policy = common.add_mutually_exclusive_group()
    policy.add_argument("--strict", dest="policy", action="store_const", const="strict", help="Fail on bad ops")
    policy.add_argument("--lenient", dest="policy", action="store_const", const="lenient", help="Skip bad ops")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(prog="editpivot", description="Edit-operation pivot toolkit for utterance rewriting")
    subparsers = parser.add_subparsers(dest="command", required=True)

    extract = subparsers.add_parser("extract", parents=[common], help="Write gold edit scripts")
    extract.add_argument("in_path")
    extract.add_argument("out_path")

    apply = subparsers.add_parser("apply", parents=[common], help="Apply edit scripts to incomplete utterances")
    apply.add_argument("in_path")
    apply.add_argument("ops_path")
    apply.add_argument("out_path")
    apply.add_argument("--strategy", type=str, help="anchored, matched or random")

    prepare = subparsers.add_parser("prepare", parents=[common], help="Build stage-1 or stage-2 training files")
    prepare.add_argument("stage", type=int, choices=[1, 2])
    prepare.add_argument("in_path")
    prepare.add_argument("out_path")
    prepare.add_argument("--no-gold-ops", action="store_true", help="Leave the stage-2 ops slot empty")

    infer = subparsers.add_parser("infer", parents=[common], help="Run the two-stage pipeline")
    infer.add_argument("in_path")
    infer.add_argument("out_path")
    infer.add_argument("--variant", type=str, default=Variant.TEO.value,
                       help=f"one of {', '.join(variant.value for variant in Variant)}")

    evaluate = subparsers.add_parser("eval", parents=[common], help="Score predictions")
    evaluate.add_argument("pred_path")
    evaluate.add_argument("ref_path")
    evaluate.add_argument("out_report")

    stats = subparsers.add_parser("stats", parents=[common], help="Corpus statistics")
    stats.add_argument("in_path")
    stats.add_argument("--out", dest="out_report", type=str, help="Also write the statistics to this file")

    analyze = subparsers.add_parser("analyze", parents=[common], help="Relate stage-1 and stage-2 correctness")
    analyze.add_argument("stage1_path")
    analyze.add_argument("pred_path")
    analyze.add_argument("ref_path")
    analyze.add_argument("out_report")

    subparsers.add_parser("info", help="Print the default configuration template")
    return parser


def cli_overrides(args: argparse.Namespace) -> dict:
    '''Key paths set by command-line flags'''
    flags = {
        "seed": getattr(args, "seed", None),
        "text/mode": getattr(args, "mode", None),
        "editscript/layout": getattr(args, "layout", None),
        "editscript/policy": getattr(args, "policy", None),
        "editscript/strategy": getattr(args, "strategy", None)
        }
    return {path: value for path, value in flags.items() if value is not None}


def dispatch(toolkit: PivotToolkit, args: argparse.Namespace) -> int:
    if args.command == "extract":
        return cmd_extract(toolkit, args.in_path, args.out_path)
    if args.command == "apply":
        return cmd_apply(toolkit, args.in_path, args.ops_path, args.out_path)
    if args.command == "prepare":
        return cmd_prepare(toolkit, args.stage, args.in_path, args.out_path, not args.no_gold_ops)
    if args.command == "infer":
        return cmd_infer(toolkit, args.variant, args.in_path, args.out_path)
    if args.command == "eval":
        return cmd_eval(toolkit, args.pred_path, args.ref_path, args.out_report)
    if args.command == "stats":
        return cmd_stats(toolkit, args.in_path, args.out_report)
    if args.command == "analyze":
        return cmd_analyze(toolkit, args.stage1_path, args.pred_path, args.ref_path, args.out_report)
    raise PivotError(f"unknown command: {args.command}")


def main(argv=None, environ=None) -> int:
    '''Run one command

    Parameters
    ----------
    argv : list[str] | None, optional
        by default sys.argv[1:]
    environ : Mapping | None, optional
        by default os.environ

    Returns
    -------
    int
        exit status
    '''
    args = build_parser().parse_args(argv)
    if args.command == "info":
        return cmd_info()
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    toolkit = PivotToolkit()
    try:
        toolkit.load_config(args.config, environ, cli_overrides(args))
        return dispatch(toolkit, args)
    except PivotError as error:
        logger.error(str(error))
        return 1
    except OSError as error:
        logger.error(f"I/O error: {error}")
        return 1
