"""State digests: FNV-1a 64 over the little-endian int64 encoding of a state.

The compiled kernel is used when it was built; otherwise, or when
``FTSAFRA_PURE_PYTHON`` is set, the pure-Python version is used. Both
produce identical values.
"""

import os
import sys
from array import array

from . import _digest_py

ALGORITHM = "fnv1a64/int64le"

fnv1a64_py = _digest_py.fnv1a64

try:
    if os.environ.get("FTSAFRA_PURE_PYTHON"):
        raise ImportError("pure Python requested")
    from ._digest_ext import fnv1a64 as fnv1a64_ext
except ImportError:
    fnv1a64_ext = None

fnv1a64 = fnv1a64_ext if fnv1a64_ext is not None else fnv1a64_py
BACKEND = "cython" if fnv1a64_ext is not None else "python"

if array("q").itemsize != 8:  # pragma: no cover
    raise ImportError("int64 arrays are required for digests")


def pack(words) -> bytes:
    a = array("q", words)
    if sys.byteorder != "little":  # pragma: no cover
        a.byteswap()
    return a.tobytes()


def digest_words(words) -> int:
    return fnv1a64(pack(words))


def digest_u64s(values) -> int:
    """Digest of a sequence of unsigned 64-bit values (e.g. other digests)."""
    a = array("Q", values)
    if sys.byteorder != "little":  # pragma: no cover
        a.byteswap()
    return fnv1a64(a.tobytes())


def hexdigest(value: int) -> str:
    return f"{value:016x}"
