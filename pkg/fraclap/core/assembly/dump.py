"""Binary dump of an assembled system.

Layout, little-endian:

    8 bytes   magic b"FRACLAP1"
    8 bytes   n, int64
    8 bytes   s, float64
    40 bytes  mesh fingerprint, ASCII, NUL padded
    8*n*n     matrix, float64, row-major
    8*n       load, float64
"""
import logging
import struct
from typing import Tuple

import numpy as np

from fraclap.core.assembly.stiffness import StiffnessSystem
from fraclap.core.exceptions import AssemblyError

logger = logging.getLogger(__name__)

MAGIC = b"FRACLAP1"
HEADER = struct.Struct("<qd40s")


def dump_system(system: StiffnessSystem, path: str) -> None:
    n = system.n_dofs
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(HEADER.pack(n, float(system.s), system.fingerprint.encode("ascii")[:40]))
        handle.write(np.ascontiguousarray(system.matrix, dtype="<f8").tobytes())
        handle.write(np.ascontiguousarray(system.load, dtype="<f8").tobytes())
    logger.info(f"Wrote {n}x{n} system to {path}")


def load_system(path: str) -> Tuple[np.ndarray, np.ndarray, float, str]:
    """Returns (matrix, load, s, fingerprint)."""
    with open(path, "rb") as handle:
        data = handle.read()
    if data[:len(MAGIC)] != MAGIC:
        raise AssemblyError(f"{path} is not a system dump")
    offset = len(MAGIC)
    n, s, raw = HEADER.unpack_from(data, offset)
    offset += HEADER.size
    expected = offset + 8 * (n * n + n)
    if len(data) != expected:
        raise AssemblyError(f"{path}: expected {expected} bytes for n={n}, found {len(data)}")
    matrix = np.frombuffer(data, dtype="<f8", count=n * n, offset=offset).reshape(n, n).copy()
    load = np.frombuffer(data, dtype="<f8", count=n, offset=offset + 8 * n * n).copy()
    return matrix, load, s, raw.rstrip(b"\0").decode("ascii")
