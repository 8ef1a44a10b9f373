"""Convolution kernel backend selection.

Prefers the compiled Cython core when it is built; otherwise falls back to
the pure-numpy reference implementation.  ``JSSLKIT_KERNELS=python`` or
``=compiled`` forces a backend (the latter fails loudly if not built).
Both backends share contracts; ``benchmarks/bench_kernels.py`` compares
their speed and agreement.
"""

from __future__ import annotations

import os

import numpy as np

from . import reference

_forced = os.environ.get("JSSLKIT_KERNELS", "").strip().lower()

_compiled = None
if _forced != "python":
    try:
        from . import _convcore as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None
        if _forced == "compiled":
            raise ImportError(
                "JSSLKIT_KERNELS=compiled but the extension is not built; "
                "run `pip install -e . --no-build-isolation`"
            )

BACKEND = "compiled" if _compiled is not None else "python"


def _c(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def conv2d_forward(x, w, dilation: int = 1) -> np.ndarray:
    if _compiled is not None:
        return _compiled.conv2d_forward(_c(x), _c(w), dilation)
    return reference.conv2d_forward(_c(x), _c(w), dilation)


def conv2d_backward_weight(x, g, kh: int, kw: int, dilation: int = 1) -> np.ndarray:
    if _compiled is not None:
        return _compiled.conv2d_backward_weight(_c(x), _c(g), kh, kw, dilation)
    return reference.conv2d_backward_weight(_c(x), _c(g), kh, kw, dilation)


def conv2d_backward_input(g, w, h: int, wd: int, dilation: int = 1) -> np.ndarray:
    if _compiled is not None:
        return _compiled.conv2d_backward_input(_c(g), _c(w), h, wd, dilation)
    return reference.conv2d_backward_input(_c(g), _c(w), h, wd, dilation)
