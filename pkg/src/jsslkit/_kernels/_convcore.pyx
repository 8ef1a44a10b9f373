# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution kernels (valid-mode cross-correlation).

Same contracts as jsslkit._kernels.reference; inner loops run over the
contiguous trailing axis so the compiler can vectorize them.
"""

import numpy as np


def conv2d_forward(double[:, :, ::1] x, double[:, :, :, ::1] w, int dilation=1):
    cdef Py_ssize_t c_out = w.shape[0], c_in = w.shape[1]
    cdef Py_ssize_t kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t h = x.shape[1], wd = x.shape[2]
    cdef Py_ssize_t ho = h - (kh - 1) * dilation
    cdef Py_ssize_t wo = wd - (kw - 1) * dilation
    out_arr = np.zeros((c_out, ho, wo), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t o, c, a, b, i, j
    cdef double tap
    with nogil:
        for o in range(c_out):
            for c in range(c_in):
                for a in range(kh):
                    for b in range(kw):
                        tap = w[o, c, a, b]
                        for i in range(ho):
                            for j in range(wo):
                                out[o, i, j] += tap * x[c, i + a * dilation,
                                                        j + b * dilation]
    return out_arr


def conv2d_backward_weight(double[:, :, ::1] x, double[:, :, ::1] g,
                           int kh, int kw, int dilation=1):
    cdef Py_ssize_t c_out = g.shape[0], c_in = x.shape[0]
    cdef Py_ssize_t ho = g.shape[1], wo = g.shape[2]
    dw_arr = np.zeros((c_out, c_in, kh, kw), dtype=np.float64)
    cdef double[:, :, :, ::1] dw = dw_arr
    cdef Py_ssize_t o, c, a, b, i, j
    cdef double acc
    with nogil:
        for o in range(c_out):
            for c in range(c_in):
                for a in range(kh):
                    for b in range(kw):
                        acc = 0.0
                        for i in range(ho):
                            for j in range(wo):
                                acc += g[o, i, j] * x[c, i + a * dilation,
                                                      j + b * dilation]
                        dw[o, c, a, b] = acc
    return dw_arr


def conv2d_backward_input(double[:, :, ::1] g, double[:, :, :, ::1] w,
                          Py_ssize_t h, Py_ssize_t wd, int dilation=1):
    cdef Py_ssize_t c_out = w.shape[0], c_in = w.shape[1]
    cdef Py_ssize_t kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = g.shape[1], wo = g.shape[2]
    dx_arr = np.zeros((c_in, h, wd), dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_arr
    cdef Py_ssize_t o, c, a, b, i, j
    cdef double tap
    with nogil:
        for c in range(c_in):
            for o in range(c_out):
                for a in range(kh):
                    for b in range(kw):
                        tap = w[o, c, a, b]
                        for i in range(ho):
                            for j in range(wo):
                                dx[c, i + a * dilation, j + b * dilation] += \
                                    tap * g[o, i, j]
    return dx_arr
