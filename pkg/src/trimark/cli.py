"""Command-line front door: train the toy model, generate watermarked text,
detect, and run evaluations.

Every subcommand prints a one-line human summary to stdout and writes full
JSON (or CSV for sweeps) to ``--out``.  Exit codes: 0 on success — including
a CLEAN detection verdict, which is data, not an error — 1 on I/O or
validation failures, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .detector import DetectionReport, detect
from .engine import GenerationRecord, ToyMarkovModel, generate
from .evaluate import EvalConfig, run_fpr, run_tpr, sweep, write_sweep_csv
from .partition import PartitionParams
from .tokens import TokenStream, read_jsonl, write_jsonl

_OVERRIDE_FIELDS = (
    "gamma_g",
    "gamma_y",
    "gamma_r",
    "delta",
    "window_h",
    "key",
    "lambda_f",
    "alpha",
)


def _u64(text: str) -> int:
    value = int(text, 0)  # accepts decimal or 0x-prefixed hex
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text!r} is not an unsigned 64-bit integer")
    return value


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_argument_group("watermark parameters")
    group.add_argument("--params", metavar="FILE", help="JSON file of watermark parameters")
    group.add_argument("--gamma-g", dest="gamma_g", type=float, help="green vocabulary share")
    group.add_argument("--gamma-y", dest="gamma_y", type=float, help="yellow vocabulary share")
    group.add_argument("--gamma-r", dest="gamma_r", type=float, help="red vocabulary share")
    group.add_argument("--delta", type=float, help="logit bias magnitude")
    group.add_argument("--window", dest="window_h", type=int, help="seeding context length")
    group.add_argument("--key", type=_u64, help="secret key (decimal or 0x hex)")
    group.add_argument("--lambda-f", dest="lambda_f", type=float, help="green weight in the combined score")
    group.add_argument("--alpha", type=float, help="target false-positive rate")


def _resolve_params(
    args: argparse.Namespace,
    parser: argparse.ArgumentParser,
    base: PartitionParams | None = None,
) -> PartitionParams:
    """Merge defaults < embedded/base params < --params file < flag overrides."""
    data = (base or PartitionParams()).to_dict()
    if args.params:
        path = Path(args.params)
        if not path.is_file():
            parser.error(f"params file not found: {path}")
        data.update(json.loads(path.read_text(encoding="utf-8")))
    for name in _OVERRIDE_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    return PartitionParams.from_dict(data)


def _load_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> EvalConfig:
    path = Path(args.config)
    if not path.is_file():
        parser.error(f"config file not found: {path}")
    return EvalConfig.from_dict(json.loads(path.read_text(encoding="utf-8")))


def _read_prompt_streams(args: argparse.Namespace, vocab_size: int) -> list[TokenStream]:
    if args.format == "text":
        text = Path(args.infile).read_text(encoding="utf-8")
        if not text:
            raise ValueError(f"prompt file {args.infile} is empty")
        return [TokenStream.from_text(text)]
    streams = []
    for value in read_jsonl(args.infile):
        ids = value["tokens"] if isinstance(value, dict) else value
        streams.append(TokenStream.from_ids(ids, vocab_size))
    if not streams:
        raise ValueError(f"prompt file {args.infile} contains no samples")
    return streams


def _cmd_train(args, parser) -> int:
    model = ToyMarkovModel.from_text_file(args.infile, order=args.order)
    model.save(args.out)
    print(
        f"trained order-{model.order} model on {model.trained_tokens} tokens "
        f"({model.context_count} contexts) -> {args.out}"
    )
    return 0


def _cmd_generate(args, parser) -> int:
    params = _resolve_params(args, parser)
    model = ToyMarkovModel.load(args.model)
    prompts = _read_prompt_streams(args, params.vocab_size)
    rng = np.random.default_rng(args.sample_seed) if args.mode == "sample" else None
    records = []
    for prompt in prompts:
        records.append(
            generate(
                prompt,
                args.n_tokens,
                model,
                params,
                mode=args.mode,
                temperature=args.temperature,
                rng=rng,
            ).to_json_dict()
        )
    write_jsonl(args.out, records)
    print(f"generated {len(records)} sample(s) x {args.n_tokens} tokens -> {args.out}")
    return 0


def _summary_line(name: str, report: DetectionReport) -> str:
    tail = " [low-confidence]" if report.low_confidence else ""
    return (
        f"{name}: {report.decision.value} fisher={report.fisher_score:.4f} "
        f"threshold={report.threshold:.4f} length={report.length}{tail}"
    )


def _record_stream(value: dict | list, args, parser) -> tuple[TokenStream, PartitionParams]:
    """Token stream plus effective params for one detect input line."""
    embedded: PartitionParams | None = None
    if isinstance(value, dict) and "completion_tokens" in value:
        record = GenerationRecord.from_json_dict(value)
        embedded = record.params
        stream = record.completion if args.completion_only else record.prompt.concat(record.completion)
    else:
        params_probe = _resolve_params(args, parser)
        ids = value["tokens"] if isinstance(value, dict) else value
        stream = TokenStream.from_ids(ids, params_probe.vocab_size)
    return stream, _resolve_params(args, parser, base=embedded)


def _cmd_detect(args, parser) -> int:
    if args.format == "text":
        params = _resolve_params(args, parser)
        text = Path(args.infile).read_text(encoding="utf-8")
        report = detect(text, params)
        Path(args.out).write_text(
            json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        print(_summary_line(str(args.infile), report))
        return 0
    reports = []
    flagged = 0
    for idx, value in enumerate(read_jsonl(args.infile)):
        stream, params = _record_stream(value, args, parser)
        report = detect(stream, params)
        reports.append(report.to_json_dict())
        flagged += report.decision.value == "WATERMARKED"
        print(_summary_line(f"sample {idx}", report))
    if not reports:
        raise ValueError(f"input file {args.infile} contains no samples")
    write_jsonl(args.out, reports)
    if len(reports) > 1:
        print(f"flagged {flagged}/{len(reports)} samples as WATERMARKED -> {args.out}")
    return 0


def _cmd_eval_tpr(args, parser) -> int:
    config = _load_config(args, parser)
    model = ToyMarkovModel.load(args.model)
    report = run_tpr(config, model)
    Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    detected = round(report.tpr * config.n_samples)
    print(
        f"TPR {report.tpr:.4f} ({detected}/{config.n_samples}) "
        f"ppl mean {report.ppl_summary['mean']:.2f} -> {args.out}"
    )
    return 0


def _cmd_eval_fpr(args, parser) -> int:
    config = _load_config(args, parser)
    report = run_fpr(config)
    Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    flagged = round(report.fpr * config.n_samples)
    print(f"FPR {report.fpr:.4f} ({flagged}/{config.n_samples}) -> {args.out}")
    return 0


def _cmd_sweep(args, parser) -> int:
    config = _load_config(args, parser)
    model = ToyMarkovModel.load(args.model)
    grid_path = Path(args.grid)
    if not grid_path.is_file():
        parser.error(f"grid file not found: {grid_path}")
    grid = json.loads(grid_path.read_text(encoding="utf-8"))
    rows = sweep(config, model, grid, max_cells=args.max_cells)
    write_sweep_csv(rows, args.out)
    ok = sum(1 for r in rows if r["status"] == "ok")
    print(f"swept {len(rows)} cell(s) ({ok} ok, {len(rows) - ok} invalid) -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trimark",
        description="Tri-set (green/yellow/red) statistical watermarking for token streams.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("train", help="train the toy Markov model on a text corpus")
    p.add_argument("--in", dest="infile", required=True, metavar="FILE", help="UTF-8 corpus file")
    p.add_argument("--out", required=True, metavar="FILE", help="model JSON output path")
    p.add_argument("--order", type=int, default=2, help="Markov order (default 2)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("generate", help="generate watermarked completions")
    p.add_argument("--model", required=True, metavar="FILE", help="trained model JSON")
    p.add_argument("--in", dest="infile", required=True, metavar="FILE", help="prompt file")
    p.add_argument("--out", required=True, metavar="FILE", help="generation records (JSONL)")
    p.add_argument(
        "--format",
        choices=("text", "tokens-jsonl"),
        default="text",
        help="prompt input format (default text: whole file is one prompt)",
    )
    p.add_argument("--n-tokens", type=int, default=200, help="completion length (default 200)")
    p.add_argument("--mode", choices=("greedy", "sample"), default="greedy")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--sample-seed", type=int, default=0, help="rng seed for --mode sample")
    _add_param_flags(p)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("detect", help="score text or token streams for the watermark")
    p.add_argument("--in", dest="infile", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="FILE", help="detection report(s) JSON/JSONL")
    p.add_argument(
        "--format",
        choices=("text", "tokens-jsonl"),
        default="text",
        help="input format; tokens-jsonl accepts id lists, {\"tokens\": ...} objects, "
        "or records written by `generate`",
    )
    p.add_argument(
        "--completion-only",
        action="store_true",
        help="for generation records, score the completion without the prompt",
    )
    _add_param_flags(p)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("eval-tpr", help="watermark-then-detect true-positive-rate run")
    p.add_argument("--config", required=True, metavar="FILE", help="EvalConfig JSON")
    p.add_argument("--model", required=True, metavar="FILE", help="trained model JSON")
    p.add_argument("--out", required=True, metavar="FILE", help="EvalReport JSON")
    p.set_defaults(func=_cmd_eval_tpr)

    p = sub.add_parser("eval-fpr", help="clean-text false-positive-rate run")
    p.add_argument("--config", required=True, metavar="FILE", help="EvalConfig JSON")
    p.add_argument("--out", required=True, metavar="FILE", help="EvalReport JSON")
    p.set_defaults(func=_cmd_eval_fpr)

    p = sub.add_parser("sweep", help="Cartesian parameter sweep writing a CSV of rates")
    p.add_argument("--config", required=True, metavar="FILE", help="EvalConfig JSON")
    p.add_argument("--model", required=True, metavar="FILE", help="trained model JSON")
    p.add_argument("--grid", required=True, metavar="FILE", help="JSON mapping of axis -> values")
    p.add_argument("--out", required=True, metavar="FILE", help="CSV output path")
    p.add_argument("--max-cells", type=int, default=256, help="cell budget (default 256)")
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
