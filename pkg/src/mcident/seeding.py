"""Deterministic seed derivation.

All Monte-Carlo entry points take an explicit 64-bit seed.  Sub-tasks
(per-trial sampling, threshold calibration, per-block work) derive their own
seeds from the master seed through :func:`split_seed`, a fixed SHA-256 based
splitting rule.  The rule is stable across platforms, processes and thread
counts, which is what makes experiment output byte-reproducible.
"""

from __future__ import annotations

import hashlib

_U64 = 1 << 64


def split_seed(master: int, *path: int | str) -> int:
    """Derive a child seed from ``master`` and a path of labels/indices.

    Distinct paths give (cryptographically) independent child seeds;
    identical paths always give the same child.
    """
    h = hashlib.sha256()
    h.update(b"mcident.seed.v1")
    h.update(int(master % _U64).to_bytes(8, "little"))
    for part in path:
        if isinstance(part, str):
            data = part.encode("utf-8")
            h.update(b"s" + len(data).to_bytes(4, "little") + data)
        else:
            h.update(b"i" + int(part % _U64).to_bytes(8, "little"))
    return int.from_bytes(h.digest()[:8], "little")
