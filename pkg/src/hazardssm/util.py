"""Small shared helpers: seed derivation, exact CSV text, atomic writes, hashing."""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

import numpy as np


def frame_to_csv(df) -> str:
    """CSV text with floats at full round-trip precision.

    pandas' default float formatting truncates to ~16 significant digits;
    reprs are the shortest strings that parse back to the identical double.
    """
    return df.to_csv(index=False, float_format=lambda v: repr(float(v)))


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministically derive a child seed from a base seed and integer keys.

    All randomness in a run flows from one top-level seed; per-task seeds
    (rolling windows, replicate studies, predictive draws) are derived with
    this so results do not depend on execution order or worker scheduling.
    """
    ss = np.random.SeedSequence([int(seed)] + [int(k) for k in keys])
    return int(ss.generate_state(1, np.uint64)[0])


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write text to ``path`` via a temp file + rename in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()
