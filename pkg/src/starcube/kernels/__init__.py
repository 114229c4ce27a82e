"""Group-by reduction kernels with implementation selection at import.

The compiled extension is used when present; setting ``STARCUBE_PURE=1`` in the
environment (before import) forces the numpy fallback. Both implementations
return identical results: unique keys ascending, exact int64 sums and counts.

Shared key convention: composite group coordinates are packed into a single
int64 by mixed-radix encoding (``pack_codes``); ``key_bound`` is the exclusive
upper bound of the packed key space, used by the compiled path to pick dense
accumulation over hashing.
"""

from __future__ import annotations

import os

import numpy as np

from . import fallback as _fallback

HAVE_NATIVE = False
_impl = _fallback
if os.environ.get("STARCUBE_PURE") != "1":
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        HAVE_NATIVE = True
    except ImportError:
        pass

ACTIVE = "native" if _impl is not _fallback else "fallback"

# Packed keys must stay well inside int64; beyond this the grouping falls back
# to factorizing per-dimension codes first (see pack_codes caller).
MAX_KEY_BOUND = 1 << 62


def sum_by_key(keys: np.ndarray, values: np.ndarray, key_bound: int):
    return _impl.sum_by_key(keys, values, key_bound)


def sum2_by_key(keys: np.ndarray, values_a: np.ndarray, values_b: np.ndarray, key_bound: int):
    return _impl.sum2_by_key(keys, values_a, values_b, key_bound)


def pack_codes(code_columns: list[np.ndarray], radices: list[int]) -> tuple[np.ndarray, int]:
    """Mixed-radix pack of per-dimension codes into int64 keys.

    Returns (keys, key_bound). Last dimension varies fastest, so ascending
    packed keys sort cells lexicographically by coordinate tuple.
    """
    bound = 1
    for r in radices:
        bound *= int(r)
    if bound > MAX_KEY_BOUND:
        raise OverflowError(f"packed key space {bound} exceeds {MAX_KEY_BOUND}")
    if not code_columns:
        return np.zeros(0, dtype=np.int64), 1
    keys = code_columns[0].astype(np.int64, copy=True)
    for codes, radix in zip(code_columns[1:], radices[1:]):
        keys *= radix
        keys += codes
    return keys, bound


def unpack_codes(keys: np.ndarray, radices: list[int]) -> list[np.ndarray]:
    """Inverse of pack_codes: one int32 code column per radix."""
    out: list[np.ndarray] = []
    rest = keys.astype(np.int64, copy=True)
    for radix in reversed(radices):
        out.append((rest % radix).astype(np.int32))
        rest //= radix
    out.reverse()
    return out
