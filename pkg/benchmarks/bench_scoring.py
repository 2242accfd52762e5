"""Throughput of the scoring kernel: compiled extension vs pure Python.

The backend is fixed at import time by WATERMAX_BACKEND, so the default
mode spawns one child process per backend and compares their rates.
Run `python benchmarks/bench_scoring.py` from the repository root.
"""

import argparse
import os
import re
import subprocess
import sys
import time

import numpy as np


def bench_one(tokens: int, vocab: int, window: int, scheme: str,
              repeats: int) -> float:
    from watermax.scoring import ScoringSession

    key = b"benchmark-key-0123456789abcdef00"
    rng = np.random.default_rng(1234)
    text = rng.integers(0, vocab, size=tokens, dtype=np.int32)
    best = float("inf")
    for _ in range(repeats):
        sess = ScoringSession(key, scheme, window)
        t0 = time.perf_counter()
        sess.feed(text)
        best = min(best, time.perf_counter() - t0)
    return tokens / best


def run_child(backend: str, args: argparse.Namespace) -> float:
    env = dict(os.environ, WATERMAX_BACKEND=backend)
    cmd = [sys.executable, os.path.abspath(__file__),
           "--backend", backend,
           "--tokens", str(args.tokens), "--vocab", str(args.vocab),
           "--window", str(args.window), "--scheme", args.scheme,
           "--repeats", str(args.repeats)]
    out = subprocess.run(cmd, env=env, check=True, capture_output=True,
                         text=True).stdout
    match = re.search(r"rate=([0-9.e+]+)", out)
    if match is None:
        raise RuntimeError(f"child produced no rate line:\n{out}")
    print(out, end="")
    return float(match.group(1))


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--tokens", type=int, default=2_000_000)
    ap.add_argument("--vocab", type=int, default=32_000)
    ap.add_argument("--window", type=int, default=6)
    ap.add_argument("--scheme", default="gaussian",
                    choices=("gaussian", "kgw", "aaronson"))
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--backend", choices=("compiled", "python"),
                    help="internal: benchmark this process's backend only")
    args = ap.parse_args()

    if args.backend:
        from watermax import BACKEND_NAME
        assert BACKEND_NAME == args.backend, (BACKEND_NAME, args.backend)
        rate = bench_one(args.tokens, args.vocab, args.window, args.scheme,
                         args.repeats)
        print(f"{args.backend:8s} scheme={args.scheme} window={args.window} "
              f"tokens={args.tokens} rate={rate:.3e} tok/s")
        return 0

    rates = {b: run_child(b, args) for b in ("compiled", "python")}
    print(f"speedup  compiled/python = {rates['compiled'] / rates['python']:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
