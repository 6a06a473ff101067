import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sandpile_patterns import io
from sandpile_patterns.grid import DomainError, IntField, Window

windows = st.builds(Window, st.integers(-50, 50), st.integers(-50, 50), st.integers(1, 12), st.integers(1, 12))


@given(windows, st.integers(0, 2 ** 32))
def test_igf_roundtrip(w, seed):
    rng = np.random.default_rng(seed)
    f = IntField(w, rng.integers(-2 ** 62, 2 ** 62, w.shape))
    data = io.encode_igf(f)
    assert len(data) == 44 + 8 * w.width * w.height
    assert io.decode_igf(data) == f
    assert io.encode_igf(io.decode_igf(data)) == data


@given(windows, st.integers(0, 2 ** 32))
def test_fgf_roundtrip_bit_exact(w, seed):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(w.shape) * 10.0 ** rng.integers(-300, 300, w.shape)
    vals.flat[0] = -0.0
    data = io.encode_fgf(w, vals)
    w2, v2 = io.decode_fgf(data)
    assert w2 == w
    assert v2.tobytes() == np.ascontiguousarray(vals, "<f8").tobytes()


def test_header_layout():
    f = IntField(Window(-1, 2, 2, 1), [[7, -8]])
    data = io.encode_igf(f)
    assert data[:4] == b"IGF1"
    assert struct.unpack("<5q", data[4:44]) == (-1, 2, 2, 1, 0)
    assert struct.unpack("<2q", data[44:]) == (7, -8)


def test_decode_errors():
    f = IntField(Window(0, 0, 2, 2), np.arange(4).reshape(2, 2))
    data = io.encode_igf(f)
    with pytest.raises(DomainError):
        io.decode_igf(b"XGF1" + data[4:])
    with pytest.raises(DomainError):
        io.decode_igf(data[:-1])
    with pytest.raises(DomainError):
        io.decode_fgf(data)
    with pytest.raises(DomainError):
        io.decode_igf(data[:10])
    bad = bytearray(data)
    bad[36:44] = struct.pack("<q", 1)
    with pytest.raises(DomainError):
        io.decode_igf(bytes(bad))


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "sub" / "f.igf"
    f = IntField(Window(0, 0, 1, 1), [[5]])
    io.write_igf(p, f)
    io.write_igf(p, IntField(Window(0, 0, 1, 1), [[6]]))
    assert io.read_igf(p)[(0, 0)] == 6
    assert [q.name for q in p.parent.iterdir()] == ["f.igf"]
