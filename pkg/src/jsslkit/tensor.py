"""Dense float64 tensor storage and the TNSR binary file format.

A Tensor is an immutable, C-contiguous, 64-bit float array.  Complex data
is stored as a real tensor with a trailing axis of size 2 (re, im), so the
autodiff engine stays real-valued throughout.
"""

from __future__ import annotations

import struct

import numpy as np

_MAGIC = b"TNSR"
_VERSION = 1


class TnsrFormatError(ValueError):
    """Raised when a TNSR file is malformed or holds non-finite data."""


class Tensor:
    """Immutable dense float64 array.

    External data is validated (finite values only) and copied; internal
    op results are wrapped without re-validation via :meth:`_wrap`.
    """

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64, order="C")
        if not np.all(np.isfinite(arr)):
            raise ValueError("Tensor rejects non-finite values (NaN/Inf)")
        arr.setflags(write=False)
        self._data = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        # Internal fast path: trusted op outputs, no finite check, no copy.
        out = object.__new__(cls)
        a = np.ascontiguousarray(arr, dtype=np.float64)
        a.setflags(write=False)
        out._data = a
        return out

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    def item(self) -> float:
        return float(self._data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


def as_array(x) -> np.ndarray:
    """Accept a Tensor or an ndarray-like, return a float64 ndarray."""
    if isinstance(x, Tensor):
        return x.data
    return np.asarray(x, dtype=np.float64)


def write_tnsr(path, x) -> None:
    """Write an array to ``path`` in the TNSR format.

    Layout: magic ``TNSR``, u8 version, u8 ndim, ndim little-endian u64
    extents, then the row-major float64 payload (little-endian).
    """
    arr = as_array(x)
    if arr.ndim > 255:
        raise TnsrFormatError("too many dimensions for TNSR")
    header = _MAGIC + struct.pack("<BB", _VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    payload = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_tnsr(path) -> Tensor:
    """Read a TNSR file, validating magic, version, shape and finiteness."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 6 or raw[:4] != _MAGIC:
        raise TnsrFormatError(f"{path}: not a TNSR file")
    version, ndim = struct.unpack_from("<BB", raw, 4)
    if version != _VERSION:
        raise TnsrFormatError(f"{path}: unsupported TNSR version {version}")
    offset = 6
    if len(raw) < offset + 8 * ndim:
        raise TnsrFormatError(f"{path}: truncated TNSR header")
    shape = struct.unpack_from(f"<{ndim}Q", raw, offset)
    offset += 8 * ndim
    count = int(np.prod(shape)) if ndim else 1
    expected = offset + 8 * count
    if len(raw) != expected:
        raise TnsrFormatError(
            f"{path}: payload size mismatch (got {len(raw) - offset} bytes, "
            f"expected {8 * count})"
        )
    arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
    arr = arr.reshape(shape).astype(np.float64)
    try:
        return Tensor(arr)
    except ValueError as exc:
        raise TnsrFormatError(f"{path}: {exc}") from exc
