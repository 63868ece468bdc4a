#!/usr/bin/env python3
"""
Tests for binary checkpoints: bit-exact round trips and field-level errors
for malformed files.
"""

import struct
import sys

import numpy as np
import pytest

from gmhd2d.checkpoint import FIELD_OFFSETS, HEADER, read_checkpoint, read_header, write_checkpoint
from gmhd2d.dynamics import PhysicsParams
from gmhd2d.errors import CheckpointError
from gmhd2d.fields import InitialCondition, make_initial_condition
from gmhd2d.spectral import Grid2D


@pytest.fixture
def checkpoint(tmp_path):
    ic = InitialCondition(kind="random_bandlimited", seed=12, k_max=5)
    state = make_initial_condition(ic, Grid2D(16, box_length=3.0))
    state = type(state)(state.omega_hat, state.j_hat, 0.125)
    params = PhysicsParams(nu=0.01, alpha=0.5, kappa=1.0, beta=1.25)
    path = tmp_path / "state.bin"
    write_checkpoint(str(path), state, params)
    return path, state, params


def _corrupt(path, offset: int, data: bytes):
    blob = bytearray(path.read_bytes())
    blob[offset:offset + len(data)] = data
    path.write_bytes(bytes(blob))


class TestRoundTrip:
    def test_header_size(self):
        assert HEADER.size == 63
        assert FIELD_OFFSETS["payload"] == 63

    def test_bitwise(self, checkpoint):
        path, state, params = checkpoint
        loaded, loaded_params = read_checkpoint(str(path))
        assert loaded.omega_hat.coeffs.tobytes() == state.omega_hat.coeffs.tobytes()
        assert loaded.j_hat.coeffs.tobytes() == state.j_hat.coeffs.tobytes()
        assert loaded.time == state.time
        assert loaded.grid.box_length == 3.0
        assert loaded_params == params

    def test_file_size(self, checkpoint):
        path, _, _ = checkpoint
        assert path.stat().st_size == 63 + 2 * 16 * 16 * 16
        assert not path.with_name("state.bin.tmp").exists()

    def test_read_header(self, checkpoint):
        path, _, _ = checkpoint
        header = read_header(str(path))
        assert header.as_dict() == {
            "version": 1, "n": 16, "box_length": 3.0, "time": 0.125,
            "nu": 0.01, "alpha": 0.5, "kappa": 1.0, "beta": 1.25,
        }


class TestCorruption:
    def test_bad_magic(self, checkpoint):
        path, _, _ = checkpoint
        _corrupt(path, 0, b"XX")
        with pytest.raises(CheckpointError) as info:
            read_checkpoint(str(path))
        assert (info.value.field, info.value.offset) == ("magic", 0)

    def test_bad_version(self, checkpoint):
        path, _, _ = checkpoint
        _corrupt(path, 7, struct.pack("<I", 99))
        with pytest.raises(CheckpointError) as info:
            read_checkpoint(str(path))
        assert (info.value.field, info.value.offset) == ("version", 7)
        assert "version" in str(info.value)

    def test_odd_grid(self, checkpoint):
        path, _, _ = checkpoint
        _corrupt(path, 11, struct.pack("<I", 15))
        with pytest.raises(CheckpointError) as info:
            read_checkpoint(str(path))
        assert info.value.field == "n"

    def test_negative_kappa(self, checkpoint):
        path, _, _ = checkpoint
        _corrupt(path, 47, struct.pack("<d", -1.0))
        with pytest.raises(CheckpointError) as info:
            read_checkpoint(str(path))
        assert (info.value.field, info.value.offset) == ("kappa", 47)

    @pytest.mark.parametrize("length, field", [(0, "magic"), (9, "version"), (20, "box_length"), (60, "beta")])
    def test_truncated_header(self, checkpoint, length, field):
        path, _, _ = checkpoint
        path.write_bytes(path.read_bytes()[:length])
        with pytest.raises(CheckpointError) as info:
            read_checkpoint(str(path))
        assert info.value.field == field
        assert info.value.offset == FIELD_OFFSETS[field]

    def test_truncated_payload(self, checkpoint):
        path, _, _ = checkpoint
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(CheckpointError) as info:
            read_checkpoint(str(path))
        assert (info.value.field, info.value.offset) == ("payload", 63)

    def test_non_finite_payload(self, checkpoint):
        path, _, _ = checkpoint
        _corrupt(path, 63 + 16 * 5, np.array([np.nan + 0j], dtype="<c16").tobytes())
        with pytest.raises(CheckpointError, match="non-finite"):
            read_checkpoint(str(path))


def main():
    """Run this module's tests"""
    code = pytest.main([__file__, "-q"])
    if code == 0:
        print("\n✅ checkpoint tests passed")
    else:
        print("\n❌ checkpoint tests failed")
    sys.exit(code)


if __name__ == "__main__":
    main()
