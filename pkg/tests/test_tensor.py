import numpy as np
import pytest

from jsslkit.tensor import Tensor, TnsrFormatError, read_tnsr, write_tnsr


def test_construction_and_invariants():
    t = Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert t.shape == (2, 2)
    assert t.size == 4
    assert t.data.dtype == np.float64


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        Tensor([1.0, np.nan])
    with pytest.raises(ValueError):
        Tensor([np.inf])


def test_immutable():
    t = Tensor([1.0, 2.0])
    with pytest.raises(ValueError):
        t.data[0] = 5.0


def test_construction_copies_input():
    src = np.array([1.0, 2.0])
    t = Tensor(src)
    src[0] = 99.0
    assert t.data[0] == 1.0


@pytest.mark.parametrize("shape", [(), (1,), (3,), (2, 3), (2, 3, 4, 2)])
def test_tnsr_roundtrip(tmp_path, shape):
    rng = np.random.default_rng(7)
    arr = rng.normal(size=shape)
    path = tmp_path / "t.tnsr"
    write_tnsr(path, arr)
    back = read_tnsr(path)
    assert back.shape == shape
    np.testing.assert_array_equal(back.data, arr)


def test_tnsr_roundtrip_bytes_deterministic(tmp_path):
    arr = np.random.default_rng(3).normal(size=(4, 5))
    p1, p2 = tmp_path / "a.tnsr", tmp_path / "b.tnsr"
    write_tnsr(p1, arr)
    write_tnsr(p2, arr)
    assert p1.read_bytes() == p2.read_bytes()


def test_tnsr_header_layout(tmp_path):
    path = tmp_path / "t.tnsr"
    write_tnsr(path, np.zeros((2, 3)))
    raw = path.read_bytes()
    assert raw[:4] == b"TNSR"
    assert raw[4] == 1  # version
    assert raw[5] == 2  # ndim
    assert int.from_bytes(raw[6:14], "little") == 2
    assert int.from_bytes(raw[14:22], "little") == 3
    assert len(raw) == 22 + 6 * 8


def test_tnsr_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.tnsr"
    path.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(TnsrFormatError):
        read_tnsr(path)


def test_tnsr_rejects_truncated(tmp_path):
    path = tmp_path / "t.tnsr"
    write_tnsr(path, np.zeros((4, 4)))
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(TnsrFormatError):
        read_tnsr(path)


def test_tnsr_rejects_bad_version(tmp_path):
    path = tmp_path / "t.tnsr"
    write_tnsr(path, np.zeros(2))
    raw = bytearray(path.read_bytes())
    raw[4] = 9
    path.write_bytes(bytes(raw))
    with pytest.raises(TnsrFormatError):
        read_tnsr(path)


def test_tnsr_rejects_non_finite_payload(tmp_path):
    path = tmp_path / "t.tnsr"
    write_tnsr(path, np.zeros(2))
    raw = bytearray(path.read_bytes())
    raw[-8:] = np.array([np.nan]).tobytes()
    path.write_bytes(bytes(raw))
    with pytest.raises(TnsrFormatError):
        read_tnsr(path)
