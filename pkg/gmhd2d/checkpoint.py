"""
Binary checkpoints of a FlowState.

Layout (little-endian, packed):

    offset  field        type
    0       magic        7 bytes, b"GMHD2D\\0"
    7       version      u32
    11      n            u32
    15      box_length   f64
    23      time         f64
    31      nu           f64
    39      alpha        f64
    47      kappa        f64
    55      beta         f64
    63      payload      omega_hat then j_hat, row-major complex128 (2 * n * n * 16 bytes)
"""

import logging
import os
import struct
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from gmhd2d.dynamics import PhysicsParams
from gmhd2d.errors import CheckpointError
from gmhd2d.fields import FlowState
from gmhd2d.spectral import Grid2D, SpectralField

logger = logging.getLogger(__name__)

MAGIC = b"GMHD2D\0"
VERSION = 1
HEADER = struct.Struct("<7sIIdd4d")
HEADER_FIELDS = ("magic", "version", "n", "box_length", "time", "nu", "alpha", "kappa", "beta")
FIELD_OFFSETS: Dict[str, int] = {
    "magic": 0,
    "version": 7,
    "n": 11,
    "box_length": 15,
    "time": 23,
    "nu": 31,
    "alpha": 39,
    "kappa": 47,
    "beta": 55,
    "payload": HEADER.size,
}
COEFF_DTYPE = np.dtype("<c16")


@dataclass(frozen=True)
class CheckpointHeader:
    version: int
    n: int
    box_length: float
    time: float
    nu: float
    alpha: float
    kappa: float
    beta: float

    @property
    def payload_size(self) -> int:
        return 2 * self.n * self.n * COEFF_DTYPE.itemsize

    def as_dict(self) -> Dict[str, object]:
        return {name: getattr(self, name) for name in HEADER_FIELDS[1:]}


def _fail(name: str, message: str):
    raise CheckpointError(name, FIELD_OFFSETS[name], message)


def _parse_header(blob: bytes) -> CheckpointHeader:
    if len(blob) < HEADER.size:
        bad = max((name for name, off in FIELD_OFFSETS.items() if off <= len(blob)), key=FIELD_OFFSETS.get)
        _fail(bad, f"file ends after {len(blob)} bytes, header needs {HEADER.size}")
    magic, version, n, box_length, time, nu, alpha, kappa, beta = HEADER.unpack_from(blob)
    if magic != MAGIC:
        _fail("magic", f"expected {MAGIC!r}, found {magic!r}")
    if version != VERSION:
        _fail("version", f"unsupported version {version} (expected {VERSION})")
    if n < 8 or n % 2:
        _fail("n", f"grid size must be even and >= 8, found {n}")
    for name, value in (("box_length", box_length), ("time", time)):
        if not np.isfinite(value):
            _fail(name, f"non-finite value {value}")
    if box_length <= 0:
        _fail("box_length", f"must be positive, found {box_length}")
    for name, value in (("nu", nu), ("alpha", alpha), ("kappa", kappa), ("beta", beta)):
        if not (np.isfinite(value) and value >= 0):
            _fail(name, f"physics parameter must be finite and >= 0, found {value}")
    return CheckpointHeader(version, n, box_length, time, nu, alpha, kappa, beta)


def write_checkpoint(path: str, state: FlowState, params: PhysicsParams):
    """Write ``state`` and ``params``; the file is replaced atomically."""
    grid = state.grid
    header = HEADER.pack(
        MAGIC,
        VERSION,
        grid.n,
        grid.box_length,
        state.time,
        params.nu,
        params.alpha,
        params.kappa,
        params.beta,
    )
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "wb") as handle:
        handle.write(header)
        handle.write(np.ascontiguousarray(state.omega_hat.coeffs, dtype=COEFF_DTYPE).tobytes())
        handle.write(np.ascontiguousarray(state.j_hat.coeffs, dtype=COEFF_DTYPE).tobytes())
    os.replace(tmp_path, path)
    logger.info("checkpoint written: %s (t=%.6g, n=%d)", path, state.time, grid.n)


def read_header(path: str) -> CheckpointHeader:
    with open(path, "rb") as handle:
        return _parse_header(handle.read(HEADER.size))


def read_checkpoint(path: str) -> Tuple[FlowState, PhysicsParams]:
    """Load a checkpoint; malformed files raise CheckpointError naming the field and offset."""
    with open(path, "rb") as handle:
        blob = handle.read()
    header = _parse_header(blob)
    payload = blob[HEADER.size:]
    if len(payload) != header.payload_size:
        _fail("payload", f"expected {header.payload_size} bytes, found {len(payload)}")
    coeffs = np.frombuffer(payload, dtype=COEFF_DTYPE).reshape(2, header.n, header.n)
    if not np.all(np.isfinite(coeffs)):
        _fail("payload", "non-finite coefficients")
    grid = Grid2D(header.n, header.box_length)
    try:
        state = FlowState(
            SpectralField(grid, coeffs[0].astype(np.complex128)),
            SpectralField(grid, coeffs[1].astype(np.complex128)),
            header.time,
        )
    except ValueError as exc:
        raise CheckpointError("payload", HEADER.size, str(exc)) from exc
    params = PhysicsParams(nu=header.nu, alpha=header.alpha, kappa=header.kappa, beta=header.beta)
    return state, params
