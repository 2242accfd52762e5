"""Deterministic seed derivations for draft sampling.

All experiment randomness flows from a 64-bit master seed through SHA-256
derivations, so any draft is reproducible from (master seed, chunk index,
candidate text, draft index) alone. Deriving from the candidate TEXT rather
than its position in the beam makes the draft tree a pure function of
content: identical prefixes always see identical continuations, whatever
order the search visits them in.
"""

from __future__ import annotations

import hashlib
import struct

__all__ = ["chunk_stream_seed", "draft_stream_seed"]


def chunk_stream_seed(master_seed: int, iteration: int, tokens) -> int:
    """Seed of the draft request extending ``tokens`` at chunk ``iteration``."""
    toks = [int(t) for t in tokens]
    payload = struct.pack("<QII", master_seed & (2**64 - 1), iteration, len(toks))
    payload += struct.pack(f"<{len(toks)}I", *toks)
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")


def draft_stream_seed(request_seed: int, draft_index: int) -> int:
    """Per-draft sampling stream seed within one draft request."""
    payload = struct.pack("<QI", request_seed & (2**64 - 1), draft_index)
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
