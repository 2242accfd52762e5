"""Kernel backend selection.

The compiled extension is preferred when it imports; otherwise the pure
Python twin takes over. ``WATERMAX_BACKEND=python`` or ``=compiled`` forces
the choice (forcing ``compiled`` propagates the ImportError rather than
falling back, so misbuilt environments fail loudly).
"""

from __future__ import annotations

import os

_requested = os.environ.get("WATERMAX_BACKEND", "").strip().lower()

if _requested == "python":
    from . import _corepy as kernel
elif _requested == "compiled":
    from . import _core as kernel  # type: ignore[no-redef]
elif _requested == "":
    try:
        from . import _core as kernel  # type: ignore[no-redef]
    except ImportError:
        from . import _corepy as kernel
else:
    raise RuntimeError(
        f"WATERMAX_BACKEND must be 'python' or 'compiled', got {_requested!r}")

BACKEND_NAME: str = kernel.BACKEND_NAME

SCHEME_GAUSSIAN: int = kernel.SCHEME_GAUSSIAN
SCHEME_KGW: int = kernel.SCHEME_KGW
SCHEME_AARONSON: int = kernel.SCHEME_AARONSON

Session = kernel.Session
score_block = kernel.score_block
gram_seeds = kernel.gram_seeds
seed_for = kernel.seed_for
mix64 = kernel.mix64
uniform_for_seed = kernel.uniform_for_seed
uniform_for_counter = kernel.uniform_for_counter
normal_cdf_block = kernel.normal_cdf_block
