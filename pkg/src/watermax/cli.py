"""Command-line front end for the whole package.

Subcommands: ``model`` builds a synthetic generator file, ``embed``
watermarks a text, ``detect`` tests one, ``attack`` edits one, and
``theory`` prints closed-form tables as CSV.  ``sweep``, ``calibrate``
and ``lawcheck`` drive the experiment harness from a single config JSON
plus flag overrides.

Texts travel as JSON files holding a ``tokens`` list plus whatever
metadata the producing command recorded.  Keys are given inline as hex
or as ``@path`` to a key file (hex text or raw bytes, 16 bytes
minimum).  Harness outputs land in ``--outdir``, else ``$WATERMAX_OUTDIR``,
else ``./watermax_runs``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .attacks import AttackSpec, attack
from .detectors import (DesyncError, DetectionReport, detect_optimal,
                        detect_robust, detect_simple)
from .embedder import EmbedParams, embed
from .generator import GeneratorModel, load_model, random_model, save_model
from .harness import (ExperimentConfig, run_h0_calibration, run_h1_lawcheck,
                      run_power_sweep, write_plot_data)
from .scoring import DEFAULT_WINDOW, SecretKey
from .theory import (CONSTANTS_PATH, PowerQuery, distortion_bounds,
                     max_gauss_constants, power,
                     selection_prob_without_replacement)

SCHEMES = ("gaussian", "kgw", "aaronson")


def parse_key(spec: str) -> SecretKey:
    """``@path`` reads a key file; anything else must be inline hex."""
    if spec.startswith("@"):
        return SecretKey.from_file(spec[1:])
    return SecretKey.from_hex(spec)


def _int_list(text: str) -> List[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _float_list(text: str) -> List[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _read_text_file(path: str) -> Dict:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict) or "tokens" not in data:
        raise ValueError(f"{path}: expected a JSON object with a 'tokens' list")
    return data


def _write_json(path: str, payload: Dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2) + "\n")


def _report_dict(report: DetectionReport) -> Dict:
    out = {
        "detector": report.detector,
        "statistic": report.statistic,
        "pvalue": report.pvalue,
        "threshold": report.threshold,
        "decision": report.decision,
        "flagged_empty": report.flagged_empty,
        "params": report.params,
    }
    if report.chunks is not None:
        out["chunks"] = {
            "pvalues": report.chunks.p,
            "empty_flags": report.chunks.empty_flags,
        }
    return _jsonable(out)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(columns: Sequence[str], rows: Sequence[Dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _cmd_model(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    model = random_model(args.vocab, args.order, args.concentration, rng,
                         temperature=args.temperature, top_p=args.top_p)
    save_model(model, args.out)
    print(args.out)
    return 0


def _cmd_embed(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    key = parse_key(args.key)
    params = EmbedParams(
        chunks=args.chunks,
        drafts=args.drafts,
        chunk_len=args.chunklen,
        beam_width=args.beamwidth,
        beam_tokens=args.beamtokens,
        window=args.window,
        scheme=args.scheme,
        kgw_gamma=args.kgw_gamma,
    )
    prompt = _int_list(args.prompt)
    tokens, trace = embed(model, prompt, params, key, args.seed,
                          total_length=args.length)
    _write_json(args.out, {
        "tokens": tokens,
        "vocab_size": model.vocab_size,
        "prompt": prompt,
        "seed": args.seed,
        "params": {
            "chunks": params.chunks,
            "drafts": params.drafts,
            "chunk_len": params.chunk_len,
            "beam_width": params.beam_width,
            "beam_tokens": params.beam_tokens,
            "window": params.window,
            "scheme": params.scheme,
            "kgw_gamma": params.kgw_gamma,
        },
    })
    if args.trace:
        with Path(args.trace).open("w") as fh:
            for record in trace:
                fh.write(json.dumps(_jsonable(record)) + "\n")
    print(args.out)
    return 0


def _cmd_detect(args: argparse.Namespace) -> int:
    text = _read_text_file(getattr(args, "in"))["tokens"]
    key = parse_key(args.key)
    common = dict(scheme=args.scheme, window=args.window, pfa=args.pfa,
                  kgw_gamma=args.kgw_gamma)
    if args.mode == "simple":
        report = detect_simple(text, key, **common)
    elif args.mode == "robust":
        report = detect_robust(text, key, **common)
    else:
        if args.chunks is None or args.chunklen is None:
            raise ValueError("optimal mode needs --chunks and --chunklen")
        report = detect_optimal(text, key, chunks=args.chunks,
                                chunk_len=args.chunklen, **common)
    _emit(json.dumps(_report_dict(report), indent=2) + "\n", args.out)
    return 0


def _cmd_attack(args: argparse.Namespace) -> int:
    data = _read_text_file(getattr(args, "in"))
    mix = _float_list(args.mix)
    if len(mix) != 3:
        raise ValueError("--mix needs three comma-separated weights s,i,d")
    vocab = args.vocab if args.vocab is not None else data.get("vocab_size")
    if vocab is None:
        raise ValueError("--vocab required: input file has no vocab_size")
    spec = AttackSpec(alpha=args.alpha, vocab_size=int(vocab),
                      mix=tuple(mix), rng_seed=args.seed)
    attacked = attack(data["tokens"], spec)
    out = dict(data)
    out["tokens"] = attacked
    out["attack"] = {"alpha": spec.alpha, "mix": list(spec.mix),
                     "seed": spec.rng_seed, "original_length": len(data["tokens"])}
    _write_json(args.out, out)
    print(args.out)
    return 0


def _cmd_theory_power(args: argparse.Namespace) -> int:
    rows = []
    for chunks in args.chunks:
        for drafts in args.drafts:
            for pfa in args.pfa:
                for alpha in args.alpha:
                    query = PowerQuery(detector=args.detector, n=drafts,
                                       pfa=pfa, chunks=chunks, alpha=alpha)
                    rows.append({
                        "detector": args.detector, "chunks": chunks,
                        "drafts": drafts, "pfa": pfa, "alpha": alpha,
                        "power": power(query),
                    })
    columns = ("detector", "chunks", "drafts", "pfa", "alpha", "power")
    _emit(_csv_text(columns, rows), args.out)
    return 0


def _cmd_theory_constants(args: argparse.Namespace) -> int:
    ns = args.n if args.n else list(range(1, args.n_max + 1))
    rows = []
    if args.samples:
        for n in ns:
            c = max_gauss_constants(n, args.samples, seed=args.seed)
            rows.append({"n": n, "e": c.e, "v": c.v, "se_e": c.se_e,
                         "se_v": c.se_v, "samples": c.samples})
    else:
        table = json.loads(CONSTANTS_PATH.read_text())
        entries = table["entries"]
        for n in ns:
            entry = entries.get(str(n))
            if entry is None:
                raise ValueError(
                    f"n={n} beyond the packaged table; use --samples")
            rows.append({"n": n, "e": entry["e"], "v": entry["v"],
                         "se_e": entry["se_e"], "se_v": entry["se_v"],
                         "samples": table["samples"]})
    columns = ("n", "e", "v", "se_e", "se_v", "samples")
    _emit(_csv_text(columns, rows), args.out)
    return 0


def _cmd_theory_distortion(args: argparse.Namespace) -> int:
    rows = []
    for p in args.p:
        for drafts in args.drafts:
            lower, upper = distortion_bounds(p, drafts)
            rows.append({
                "p": p, "drafts": drafts, "lower": lower, "upper": upper,
                "selection_prob": selection_prob_without_replacement(p, drafts),
            })
    columns = ("p", "drafts", "lower", "upper", "selection_prob")
    _emit(_csv_text(columns, rows), args.out)
    return 0


def load_config(path: str, overrides: argparse.Namespace) -> ExperimentConfig:
    """Build an ExperimentConfig from a JSON file plus flag overrides."""
    raw = json.loads(Path(path).read_text())
    if getattr(overrides, "model", None):
        raw["model"] = overrides.model
    model = raw["model"]
    if isinstance(model, str):
        model = load_model(model)
    else:
        model = GeneratorModel.from_dict(model)
    for field in ("scenario", "trials", "outdir"):
        value = getattr(overrides, field, None)
        if value is not None:
            raw[field] = value
    if getattr(overrides, "base_seed", None) is not None:
        raw["base_seed"] = overrides.base_seed
    kwargs = dict(
        scenario=raw["scenario"],
        model=model,
        keys=tuple(parse_key(k).data for k in raw["keys"]),
        grid=tuple(EmbedParams(**g) for g in raw["grid"]),
        pfas=tuple(raw["pfas"]),
        trials=int(raw["trials"]),
        base_seed=int(raw.get("base_seed", 0)),
        outdir=raw.get("outdir"),
    )
    if "detectors" in raw:
        kwargs["detectors"] = tuple(raw["detectors"])
    if "alphas" in raw:
        kwargs["alphas"] = tuple(raw["alphas"])
    if "attack_mix" in raw:
        kwargs["attack_mix"] = tuple(raw["attack_mix"])
    return ExperimentConfig(**kwargs)


def _run_harness(args: argparse.Namespace, runner) -> int:
    config = load_config(args.config, args)
    path = runner(config)
    if args.plot:
        with path.open() as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
            columns = reader.fieldnames or ()
        write_plot_data(Path(args.plot), rows, columns)
    print(path)
    return 0


def _add_key_scheme_window(p: argparse.ArgumentParser) -> None:
    p.add_argument("--key", required=True,
                   help="hex key, or @path to a key file")
    p.add_argument("--scheme", default="gaussian", choices=SCHEMES)
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW,
                   help="hash window h (default %(default)s)")
    p.add_argument("--kgw-gamma", type=float, default=0.5,
                   help="green-list fraction for the kgw scheme")


def _add_harness_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--scenario", help="override scenario id")
    p.add_argument("--trials", type=int, help="override trial count")
    p.add_argument("--base-seed", type=int, dest="base_seed",
                   help="override base seed")
    p.add_argument("--model", help="override model file path")
    p.add_argument("--outdir", help="override output directory")
    p.add_argument("--plot", help="also write a gnuplot-style .dat file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="watermax",
        description="Watermark embedding, detection and analysis "
                    "on synthetic token models.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", help="write a random generator model file")
    p.add_argument("--vocab", type=int, required=True)
    p.add_argument("--order", type=int, default=0)
    p.add_argument("--concentration", type=float, required=True,
                   help="Dirichlet concentration; small = low entropy")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--top-p", type=float, default=1.0, dest="top_p")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_model)

    p = sub.add_parser("embed", help="generate a watermarked text")
    p.add_argument("--model", required=True, help="generator model JSON")
    _add_key_scheme_window(p)
    p.add_argument("--chunks", type=int, required=True, help="iterations N")
    p.add_argument("--drafts", type=int, required=True,
                   help="drafts per candidate n")
    p.add_argument("--beamwidth", type=int, default=1, help="beam width m")
    p.add_argument("--chunklen", type=int, required=True,
                   help="tokens per chunk")
    p.add_argument("--beamtokens", type=int, default=0,
                   help="deterministic prefix tokens b")
    p.add_argument("--length", type=int,
                   help="total token budget; shortens the last chunk")
    p.add_argument("--prompt", default="",
                   help="comma-separated prompt token ids")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", help="write per-iteration JSONL trace here")
    p.add_argument("--out", required=True, help="output text JSON")
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("detect", help="test a text for the watermark")
    p.add_argument("--mode", required=True,
                   choices=("simple", "optimal", "robust"))
    _add_key_scheme_window(p)
    p.add_argument("--chunks", type=int, help="chunk count (optimal mode)")
    p.add_argument("--chunklen", type=int,
                   help="chunk length (optimal mode)")
    p.add_argument("--pfa", type=float, default=1e-3,
                   help="false-alarm probability")
    p.add_argument("--in", required=True, help="text JSON to test")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("attack", help="edit a text to degrade the watermark")
    p.add_argument("--alpha", type=float, required=True,
                   help="fraction of tokens left untouched")
    p.add_argument("--mix", default="1,0,0",
                   help="substitution,insertion,deletion weights")
    p.add_argument("--vocab", type=int,
                   help="vocabulary size (default: from the input file)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("theory", help="closed-form tables as CSV")
    tsub = p.add_subparsers(dest="table", required=True)

    t = tsub.add_parser("power", help="detection power laws")
    t.add_argument("--detector", required=True,
                   choices=("simple", "optimal", "robust"))
    t.add_argument("--chunks", type=_int_list, default=[1],
                   help="comma-separated chunk counts")
    t.add_argument("--drafts", type=_int_list, required=True)
    t.add_argument("--pfa", type=_float_list, required=True)
    t.add_argument("--alpha", type=_float_list, default=[1.0],
                   help="preserved-score fractions (robust only)")
    t.add_argument("--out")
    t.set_defaults(func=_cmd_theory_power)

    t = tsub.add_parser("constants",
                        help="moments of the max of n gaussians")
    t.add_argument("--n", type=_int_list, help="comma-separated draft counts")
    t.add_argument("--n-max", type=int, default=10, dest="n_max",
                   help="emit n = 1..n_max when --n is absent")
    t.add_argument("--samples", type=int,
                   help="fresh Monte Carlo instead of the packaged table")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--out")
    t.set_defaults(func=_cmd_theory_constants)

    t = tsub.add_parser("distortion",
                        help="selection-probability distortion bounds")
    t.add_argument("--p", type=_float_list, required=True,
                   help="comma-separated base probabilities")
    t.add_argument("--drafts", type=_int_list, required=True)
    t.add_argument("--out")
    t.set_defaults(func=_cmd_theory_distortion)

    for name, runner, blurb in (
            ("sweep", run_power_sweep, "power sweep over a parameter grid"),
            ("calibrate", run_h0_calibration,
             "false-alarm calibration on unwatermarked texts"),
            ("lawcheck", run_h1_lawcheck,
             "chunk-score law check across beam settings")):
        p = sub.add_parser(name, help=blurb)
        _add_harness_overrides(p)
        p.set_defaults(func=lambda a, r=runner: _run_harness(a, r))

    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DesyncError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
