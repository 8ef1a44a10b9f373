"""Pure-numpy convolution kernels (fallback backend).

All convolutions are valid-mode cross-correlations on single images:
input (C_in, H, W), weight (C_out, C_in, kh, kw).  Padding is applied by
the caller.  Semantics match the compiled backend exactly up to floating
point accumulation order.
"""

from __future__ import annotations

import numpy as np


def _windows(x: np.ndarray, kh: int, kw: int, dilation: int) -> np.ndarray:
    # (C, Ho, Wo, kh, kw) view of all kernel-sized patches.
    win = np.lib.stride_tricks.sliding_window_view(x, ((kh - 1) * dilation + 1,
                                                       (kw - 1) * dilation + 1),
                                                   axis=(1, 2))
    return win[..., ::dilation, ::dilation]


def conv2d_forward(x: np.ndarray, w: np.ndarray, dilation: int = 1) -> np.ndarray:
    win = _windows(x, w.shape[2], w.shape[3], dilation)
    # sum over (C_in, kh, kw)
    return np.tensordot(w, win, axes=([1, 2, 3], [0, 3, 4]))


def conv2d_backward_weight(x: np.ndarray, g: np.ndarray, kh: int, kw: int,
                           dilation: int = 1) -> np.ndarray:
    win = _windows(x, kh, kw, dilation)
    # dL/dw[o,c,a,b] = sum_{i,j} g[o,i,j] * x[c, i+a*d, j+b*d]
    return np.tensordot(g, win, axes=([1, 2], [1, 2]))


def conv2d_backward_input(g: np.ndarray, w: np.ndarray, h: int, wd: int,
                          dilation: int = 1) -> np.ndarray:
    # Scatter each output cotangent back through the taps it touched.
    c_out, c_in, kh, kw = w.shape
    dx = np.zeros((c_in, h, wd), dtype=np.float64)
    ho, wo = g.shape[1], g.shape[2]
    for a in range(kh):
        for b in range(kw):
            # (C_in,) x (C_out,) tap matrix applied to the whole g plane
            taps = w[:, :, a, b]  # (C_out, C_in)
            contrib = np.tensordot(taps, g, axes=([0], [0]))  # (C_in, Ho, Wo)
            dx[:, a * dilation:a * dilation + ho,
               b * dilation:b * dilation + wo] += contrib
    return dx
