"""Monte Carlo experiment harness.

Three orchestrated experiments, each emitting a deterministic CSV plus a
JSON manifest carrying the full configuration and its hash: power sweeps
(empirical vs theoretical detection power, with optional edit attacks),
false-alarm calibration on unwatermarked model text, and the chunk
p-value law check. Theoretical columns come only from the theory module.

Direct Monte Carlo validates false-alarm rates down to about 1e-3 at
desk scale; quoted operating points at 1e-6 rest on the analytically
calibrated thresholds whose laws these runs validate.
"""

import csv
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .attacks import AttackSpec, attack, effective_alpha
from .detectors import (calibrate_threshold, chunk_pvalues, detect_optimal,
                        detect_robust, detect_simple)
from .embedder import EmbedParams, embed
from .generator import DraftRequest, GeneratorModel, sample_drafts
from .special import ndtri
from .theory import power_optimal, power_robust, power_simple

__all__ = [
    "ExperimentConfig",
    "config_dict",
    "config_hash",
    "h0_sample",
    "resolve_outdir",
    "run_h0_calibration",
    "run_h1_lawcheck",
    "run_power_sweep",
    "wilson_interval",
    "write_plot_data",
]

OUTDIR_ENV = "WATERMAX_OUTDIR"

_DETECTORS = ("simple", "optimal", "robust")

POWER_COLUMNS = (
    "detector", "scheme", "chunks", "drafts", "chunk_len", "window",
    "beam_tokens", "pfa", "alpha", "alpha_eff", "trials", "hits",
    "p_emp", "ci_lo", "ci_hi", "p_theory",
)
H0_COLUMNS = (
    "detector", "scheme", "window", "chunks", "chunk_len", "key",
    "pfa", "trials", "hits", "fa_emp", "ci_lo", "ci_hi",
)
LAW_COLUMNS = (
    "point", "drafts", "chunks", "beam_tokens", "samples", "flagged_share",
    "ks_distance", "deviant", "grid_p", "cdf_emp", "cdf_theory",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a model, keys, an embed-parameter grid, and the
    Monte Carlo budget. Every derived artifact records this config."""

    scenario: str
    model: GeneratorModel
    keys: Tuple[bytes, ...]
    grid: Tuple[EmbedParams, ...]
    pfas: Tuple[float, ...]
    trials: int
    detectors: Tuple[str, ...] = ("optimal", "robust")
    alphas: Tuple[float, ...] = (1.0,)
    attack_mix: Tuple[float, float, float] = (1.0, 0.0, 0.0)
    base_seed: int = 0
    outdir: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.scenario:
            raise ValueError("scenario id must be non-empty")
        if not self.keys or not all(isinstance(k, bytes) for k in self.keys):
            raise ValueError("keys must be a non-empty tuple of bytes")
        if not self.grid:
            raise ValueError("grid must contain at least one point")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if not all(0.0 < p < 1.0 for p in self.pfas) or not self.pfas:
            raise ValueError("pfas must lie strictly inside (0, 1)")
        if not all(0.0 <= a <= 1.0 for a in self.alphas) or not self.alphas:
            raise ValueError("alphas must lie in [0, 1]")
        unknown = set(self.detectors) - set(_DETECTORS)
        if unknown:
            raise ValueError(f"unknown detectors: {sorted(unknown)}")


def config_dict(config: ExperimentConfig) -> Dict:
    return {
        "scenario": config.scenario,
        "model": config.model.to_dict(),
        "keys": [k.hex() for k in config.keys],
        "grid": [vars(p).copy() for p in config.grid],
        "pfas": list(config.pfas),
        "trials": config.trials,
        "detectors": list(config.detectors),
        "alphas": list(config.alphas),
        "attack_mix": list(config.attack_mix),
        "base_seed": config.base_seed,
    }


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(config_dict(config), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def resolve_outdir(config: ExperimentConfig) -> Path:
    if config.outdir:
        base = Path(config.outdir)
    elif os.environ.get(OUTDIR_ENV):
        base = Path(os.environ[OUTDIR_ENV])
    else:
        base = Path.cwd() / "watermax_runs"
    base.mkdir(parents=True, exist_ok=True)
    return base


def wilson_interval(hits: int, trials: int,
                    confidence: float = 0.99) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or not (0 <= hits <= trials):
        raise ValueError("need 0 <= hits <= trials, trials >= 1")
    if not (0.0 < confidence < 1.0):
        raise ValueError("confidence must lie in (0, 1)")
    z = -ndtri((1.0 - confidence) / 2.0)
    phat = hits / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = (z / denom) * ((phat * (1 - phat) / trials
                           + z * z / (4 * trials * trials)) ** 0.5)
    # the exact endpoints at the boundary, which float sqrt misses by ulps
    lo = 0.0 if hits == 0 else max(0.0, center - half)
    hi = 1.0 if hits == trials else min(1.0, center + half)
    return lo, hi


def _trial_seed(base: int, *indices: int) -> int:
    blob = np.array([base, *indices], dtype=np.int64).tobytes()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")


def h0_sample(model: GeneratorModel, length: int, count: int,
              seed: int) -> np.ndarray:
    """Batch of unwatermarked texts drawn straight from the model."""
    batch = sample_drafts(model, DraftRequest(context=(), length=length,
                                              n=count, b=0, rng_seed=seed))
    return batch.tokens


def _params_fields(params: EmbedParams) -> Dict:
    return {
        "scheme": params.scheme, "chunks": params.chunks,
        "drafts": params.drafts, "chunk_len": params.chunk_len,
        "window": params.window, "beam_tokens": params.beam_tokens,
    }


def _theory_power(detector: str, params: EmbedParams, pfa: float,
                  alpha: float, alpha_eff: float) -> Optional[float]:
    """Theoretical detection power where the theory module covers the
    point; None leaves the CSV cell blank."""
    attacked = alpha < 1.0
    if detector == "simple":
        if params.chunks == 1 and not attacked:
            return power_simple(params.drafts, pfa)
        return None
    if detector == "optimal":
        return None if attacked else power_optimal(
            params.chunks, params.drafts, pfa)
    if params.scheme != "gaussian":
        return None
    return power_robust(params.chunks, params.drafts, pfa,
                        alpha_eff if attacked else 1.0)


def power_sweep_rows(config: ExperimentConfig) -> List[Dict]:
    rows = []
    for gi, params in enumerate(config.grid):
        for ai, alpha in enumerate(config.alphas):
            texts = []
            alpha_effs = []
            for t in range(config.trials):
                key = config.keys[t % len(config.keys)]
                seed = _trial_seed(config.base_seed, gi, ai, t)
                text, _ = embed(config.model, (), params, key, seed)
                if alpha < 1.0:
                    spec = AttackSpec(alpha, config.model.vocab_size,
                                      mix=config.attack_mix, rng_seed=seed)
                    attacked = attack(text, spec)
                    alpha_effs.append(effective_alpha(
                        text, attacked, key, window=params.window))
                    text = attacked
                else:
                    alpha_effs.append(1.0)
                texts.append(text)
            alpha_eff = float(np.mean(alpha_effs))
            for detector in config.detectors:
                for pfa in config.pfas:
                    hits = 0
                    for t, text in enumerate(texts):
                        key = config.keys[t % len(config.keys)]
                        if detector == "simple":
                            rep = detect_simple(
                                text, key, scheme=params.scheme,
                                window=params.window, pfa=pfa,
                                kgw_gamma=params.kgw_gamma)
                        elif detector == "optimal":
                            rep = detect_optimal(
                                text, key, scheme=params.scheme,
                                window=params.window, chunks=params.chunks,
                                chunk_len=params.chunk_len, pfa=pfa,
                                kgw_gamma=params.kgw_gamma)
                        else:
                            rep = detect_robust(
                                text, key, scheme=params.scheme,
                                window=params.window, pfa=pfa,
                                kgw_gamma=params.kgw_gamma)
                        hits += rep.decision
                    lo, hi = wilson_interval(hits, config.trials)
                    theo = _theory_power(detector, params, pfa, alpha,
                                         alpha_eff)
                    rows.append({
                        "detector": detector, **_params_fields(params),
                        "pfa": pfa, "alpha": alpha, "alpha_eff": alpha_eff,
                        "trials": config.trials, "hits": hits,
                        "p_emp": hits / config.trials,
                        "ci_lo": lo, "ci_hi": hi,
                        "p_theory": "" if theo is None else theo,
                    })
    return rows


def h0_calibration_rows(config: ExperimentConfig) -> List[Dict]:
    """False-alarm rates of every configured detector on unwatermarked
    text, per key and pooled over keys (key column 'all').

    Each text is scored once; per-pfa decisions reuse the statistic
    against calibrate_threshold, which is exactly what the detectors
    compare internally.
    """
    rows = []
    for gi, params in enumerate(config.grid):
        length = params.chunks * params.chunk_len
        tau_opt = {pfa: calibrate_threshold("optimal", pfa,
                                            chunks=params.chunks)
                   for pfa in config.pfas}
        tau_rob: Dict[Tuple[int, float], float] = {}
        hits: Dict[Tuple[str, float], List[int]] = {
            (d, pfa): [0] * len(config.keys)
            for d in config.detectors for pfa in config.pfas
        }
        for ki, key in enumerate(config.keys):
            texts = h0_sample(config.model, length, config.trials,
                              _trial_seed(config.base_seed, 1000 + gi, ki))
            for text in texts:
                base = detect_simple(text, key, scheme=params.scheme,
                                     window=params.window, pfa=0.5,
                                     kgw_gamma=params.kgw_gamma)
                leff = base.params["leff"]
                if "optimal" in config.detectors:
                    lam = detect_optimal(
                        text, key, scheme=params.scheme,
                        window=params.window, chunks=params.chunks,
                        chunk_len=params.chunk_len, pfa=0.5,
                        kgw_gamma=params.kgw_gamma).statistic
                for pfa in config.pfas:
                    for detector in config.detectors:
                        if detector == "simple":
                            dec = base.pvalue < pfa
                        elif detector == "robust":
                            tk = (leff, pfa)
                            if tk not in tau_rob:
                                tau_rob[tk] = calibrate_threshold(
                                    "robust", pfa, leff=leff,
                                    scheme=params.scheme,
                                    kgw_gamma=params.kgw_gamma)
                            dec = leff > 0 and base.statistic > tau_rob[tk]
                        else:
                            dec = lam < tau_opt[pfa]
                        hits[(detector, pfa)][ki] += dec
        for detector in config.detectors:
            for pfa in config.pfas:
                per_key = hits[(detector, pfa)]
                for ki, h in enumerate(per_key):
                    rows.append(_h0_row(params, detector, pfa, str(ki), h,
                                        config.trials))
                rows.append(_h0_row(params, detector, pfa, "all",
                                    sum(per_key),
                                    config.trials * len(config.keys)))
    return rows


def _h0_row(params: EmbedParams, detector: str, pfa: float, key: str,
            hits: int, trials: int) -> Dict:
    lo, hi = wilson_interval(hits, trials)
    return {
        "detector": detector, "scheme": params.scheme,
        "window": params.window, "chunks": params.chunks,
        "chunk_len": params.chunk_len, "key": key, "pfa": pfa,
        "trials": trials, "hits": hits, "fa_emp": hits / trials,
        "ci_lo": lo, "ci_hi": hi,
    }


_LAW_GRID = np.linspace(0.0, 1.0, 51)
_DEVIANT_KS = 0.5


def lawcheck_rows(config: ExperimentConfig) -> List[Dict]:
    """Empirical CDF of the selected chunks' local p-values against the
    best-of-n law 1 - (1 - p)^n, with the exact Kolmogorov distance."""
    rows = []
    for gi, params in enumerate(config.grid):
        samples = []
        flagged = 0
        total = 0
        for t in range(config.trials):
            key = config.keys[t % len(config.keys)]
            seed = _trial_seed(config.base_seed, 2000 + gi, t)
            text, _ = embed(config.model, (), params, key, seed)
            out = chunk_pvalues(text, key, scheme=params.scheme,
                                window=params.window, chunks=params.chunks,
                                chunk_len=params.chunk_len,
                                kgw_gamma=params.kgw_gamma)
            total += out.p.size
            flagged += int(out.empty_flags.sum())
            samples.extend(out.p[~out.empty_flags].tolist())
        samples = np.sort(np.asarray(samples))
        n = params.drafts
        if samples.size:
            theo = np.array([power_simple(n, p) if 0 < p < 1 else p
                             for p in samples])
            steps = np.arange(1, samples.size + 1) / samples.size
            ks = float(np.maximum(np.abs(steps - theo),
                                  np.abs(steps - 1 / samples.size - theo)).max())
        else:
            ks = 1.0
        for p in _LAW_GRID:
            cdf_emp = float(np.searchsorted(samples, p, side="right")
                            / samples.size) if samples.size else 0.0
            cdf_theory = power_simple(n, float(p)) if 0 < p < 1 else float(p)
            rows.append({
                "point": gi, "drafts": n, "chunks": params.chunks,
                "beam_tokens": params.beam_tokens,
                "samples": int(samples.size),
                "flagged_share": flagged / total if total else 1.0,
                "ks_distance": ks, "deviant": int(ks > _DEVIANT_KS),
                "grid_p": float(p), "cdf_emp": cdf_emp,
                "cdf_theory": cdf_theory,
            })
    return rows


def _write_csv(path: Path, rows: Iterable[Dict],
               columns: Sequence[str]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns),
                                extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def write_plot_data(path: Path, rows: Iterable[Dict],
                    columns: Sequence[str]) -> None:
    """Space-separated layout with a commented header, for gnuplot."""
    with Path(path).open("w") as fh:
        fh.write("# " + " ".join(columns) + "\n")
        for row in rows:
            fh.write(" ".join(str(row.get(c, "")) for c in columns) + "\n")


def _write_manifest(path: Path, config: ExperimentConfig,
                    files: Sequence[str], columns: Sequence[str]) -> None:
    payload = {
        "scenario": config.scenario,
        "config": config_dict(config),
        "config_sha256": config_hash(config),
        "columns": list(columns),
        "files": list(files),
    }
    path.write_text(json.dumps(payload, indent=1, sort_keys=True))


def _run(config: ExperimentConfig, kind: str, rows: List[Dict],
         columns: Sequence[str]) -> Path:
    outdir = resolve_outdir(config)
    csv_path = outdir / f"{config.scenario}_{kind}.csv"
    _write_csv(csv_path, rows, columns)
    _write_manifest(outdir / f"{config.scenario}_{kind}.manifest.json",
                    config, [csv_path.name], columns)
    return csv_path


def run_power_sweep(config: ExperimentConfig) -> Path:
    return _run(config, "power", power_sweep_rows(config), POWER_COLUMNS)


def run_h0_calibration(config: ExperimentConfig) -> Path:
    return _run(config, "h0", h0_calibration_rows(config), H0_COLUMNS)


def run_h1_lawcheck(config: ExperimentConfig) -> Path:
    return _run(config, "lawcheck", lawcheck_rows(config), LAW_COLUMNS)
