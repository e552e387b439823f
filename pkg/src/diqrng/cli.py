"""Command-line entry points for the pipeline.

Exit codes: 0 success, 1 validation problem (bad config or arguments),
2 stage failure at run time.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .extract import BitStream
from .pipeline import PipelineConfig, preset_config


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        cfg = PipelineConfig.from_json(Path(args.config).read_text())
    elif getattr(args, "preset", None):
        cfg = preset_config(args.preset)
    else:
        cfg = PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg = _replace(cfg, global_seed=args.seed)
    if getattr(args, "out", None):
        cfg = _replace(cfg, output_dir=args.out)
    if getattr(args, "threshold", None) is not None:
        cfg = _replace(cfg, suite_threshold=args.threshold)
    return cfg


def _replace(cfg: PipelineConfig, **kwargs) -> PipelineConfig:
    import dataclasses

    return dataclasses.replace(cfg, **kwargs)


def _out_dir(cfg: PipelineConfig, args) -> Path:
    return Path(args.out or cfg.output_dir)


def cmd_print_config(args) -> int:
    cfg = _load_config(args)
    print(cfg.to_json())
    return 0


def cmd_simulate_hom(args) -> int:
    cfg = _load_config(args)
    result = pipeline.run_hom(cfg, _out_dir(cfg, args))
    print(json.dumps({k: result[k] for k in ("visibility", "stderr")}, indent=2))
    return 0


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    _, info = pipeline.run_generate(cfg, _out_dir(cfg, args), n_bits=args.n_bits)
    print(json.dumps(info, indent=2))
    return 0


def cmd_certify(args) -> int:
    cfg = _load_config(args)
    bits = BitStream.load(args.bits) if args.bits else None
    report = pipeline.run_certify(cfg, bits, _out_dir(cfg, args))
    summary = {
        "chsh_model": report["chsh_model"],
        "chsh_direct": report["chsh_direct"]["S"],
        "verdict": report["verdict"],
    }
    print(json.dumps(summary, indent=2))
    return 0


def cmd_extract(args) -> int:
    cfg = _load_config(args)
    raw = BitStream.load(args.bits)
    _, info = pipeline.run_extract(cfg, raw, _out_dir(cfg, args))
    print(json.dumps(info, indent=2))
    return 0


def cmd_test(args) -> int:
    cfg = _load_config(args)
    bits = BitStream.load(args.bits)
    report = pipeline.run_test(cfg, bits, _out_dir(cfg, args))
    print(json.dumps({"all_passed": report.all_passed, "failing": report.failing()}, indent=2))
    return 0


def cmd_run_all(args) -> int:
    cfg = _load_config(args)
    report = pipeline.run_all(cfg, _out_dir(cfg, args), n_bits=args.n_bits)
    summary = {
        "preset": report["preset"],
        "hom_visibility": report["hom"]["visibility"],
        "chsh_direct": report["certify"]["chsh_direct"]["S"],
        "chsh_mle": report["certify"]["tomography"].get("mle", {}).get("S"),
        "chsh_bayes": report["certify"]["tomography"].get("bayes", {}).get("S_mean"),
        "min_entropy_extracted": report["min_entropy"]["extracted"]["h_inf"],
        "suite_all_passed": report["verdict"]["suite_all_passed"],
        "report": str(Path(args.out or cfg.output_dir) / "run_report.json"),
    }
    print(json.dumps(summary, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diqrng",
        description="Entanglement-based QRNG simulator and certification pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, bits_arg=False, n_bits_arg=False):
        p.add_argument("--config", help="pipeline config JSON path")
        p.add_argument(
            "--preset",
            choices=["dataset_A", "dataset_B", "classical_source"],
            help="built-in operating point",
        )
        p.add_argument("--seed", type=int, help="override the global seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threshold", type=float, help="suite pass threshold")
        if bits_arg:
            p.add_argument("--bits", required=True, help="input bit file")
        if n_bits_arg:
            p.add_argument("--n-bits", type=int, default=None, dest="n_bits")

    common(sub.add_parser("print-config", help="show the resolved config"))
    common(sub.add_parser("simulate-hom", help="HOM scan and visibility fit"))
    common(sub.add_parser("generate", help="generate raw heralded bits"), n_bits_arg=True)
    certify_p = sub.add_parser("certify", help="CHSH + tomography + min-entropy")
    common(certify_p)
    certify_p.add_argument("--bits", help="raw bit file for min-entropy")
    common(sub.add_parser("extract", help="Toeplitz extraction"), bits_arg=True)
    common(sub.add_parser("test", help="SP 800-22 suite"), bits_arg=True)
    common(sub.add_parser("run-all", help="full pipeline"), n_bits_arg=True)
    return parser


_COMMANDS = {
    "print-config": cmd_print_config,
    "simulate-hom": cmd_simulate_hom,
    "generate": cmd_generate,
    "certify": cmd_certify,
    "extract": cmd_extract,
    "test": cmd_test,
    "run-all": cmd_run_all,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
