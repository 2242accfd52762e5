"""watermax: keyed text watermarking by chunked max-score sampling.

Drafts are sampled in chunks, scored through a keyed hash of sliding token
windows, and the highest-scoring drafts are kept; detection reduces to exact
hypothesis tests on the reconstructed scores. The package bundles the
scoring scheme, a synthetic generator to drive it, the embedder, three
detectors, an attack simulator, closed-form power formulas, and Monte Carlo
harnesses that check the formulas against simulation.
"""

from .attacks import (AttackSpec, attack, attack_batch, edit_rate_for_preservation,
                      effective_alpha, expected_preservation)
from .backend import BACKEND_NAME
from .detectors import (DesyncError, DetectionReport, calibrate_threshold,
                        chunk_pvalues, detect_optimal, detect_robust,
                        detect_simple)
from .embedder import EmbedParams, embed, embed_simple
from .generator import (DraftBatch, DraftRequest, GeneratorModel, beam_prefixes,
                        entropy_profile, load_model, next_distribution,
                        random_model, sample_drafts, save_model)
from .harness import (ExperimentConfig, run_h0_calibration, run_h1_lawcheck,
                      run_power_sweep, wilson_interval)
from .pvalues import PValue, pvalue
from .scoring import (DEFAULT_WINDOW, ScoringSession, SecretKey,
                      TokenVariable, cumulative_score, seed_for)
from .theory import (MaxGaussConstants, PowerQuery, distortion_bounds,
                     gauss_max_moments, max_gauss_constants, power,
                     power_optimal, power_robust, power_simple,
                     selection_prob_with_replacement_bruteforce,
                     selection_prob_without_replacement)

__version__ = "0.1.0"

__all__ = [
    "AttackSpec", "attack", "attack_batch", "edit_rate_for_preservation",
    "effective_alpha", "expected_preservation",
    "BACKEND_NAME",
    "DesyncError", "DetectionReport", "calibrate_threshold", "chunk_pvalues",
    "detect_optimal", "detect_robust", "detect_simple",
    "EmbedParams", "embed", "embed_simple",
    "DraftBatch", "DraftRequest", "GeneratorModel", "beam_prefixes",
    "entropy_profile", "load_model", "next_distribution", "random_model",
    "sample_drafts", "save_model",
    "ExperimentConfig", "run_h0_calibration", "run_h1_lawcheck",
    "run_power_sweep", "wilson_interval",
    "PValue", "pvalue",
    "DEFAULT_WINDOW", "ScoringSession", "SecretKey", "TokenVariable",
    "cumulative_score", "seed_for",
    "MaxGaussConstants", "PowerQuery", "distortion_bounds",
    "gauss_max_moments", "max_gauss_constants", "power", "power_optimal",
    "power_robust", "power_simple",
    "selection_prob_with_replacement_bruteforce",
    "selection_prob_without_replacement",
    "__version__",
]
