import numpy as np
import pytest

from jsslkit import _kernels as kernels
from jsslkit._kernels import reference


def conv2d_loop(x, w, dilation=1):
    """Direct-loop valid cross-correlation oracle."""
    c_out, c_in, kh, kw = w.shape
    ho = x.shape[1] - (kh - 1) * dilation
    wo = x.shape[2] - (kw - 1) * dilation
    out = np.zeros((c_out, ho, wo))
    for o in range(c_out):
        for i in range(ho):
            for j in range(wo):
                acc = 0.0
                for c in range(c_in):
                    for a in range(kh):
                        for b in range(kw):
                            acc += x[c, i + a * dilation, j + b * dilation] * w[o, c, a, b]
                out[o, i, j] = acc
    return out


@pytest.mark.parametrize("dilation", [1, 2])
@pytest.mark.parametrize("impl", [kernels, reference])
def test_forward_matches_loop_oracle(impl, dilation):
    rng = np.random.default_rng(11)
    x = rng.normal(size=(3, 9, 10))
    w = rng.normal(size=(4, 3, 3, 3))
    got = impl.conv2d_forward(x, w, dilation)
    want = conv2d_loop(x, w, dilation)
    assert np.abs(got - want).max() < 1e-12


def test_backward_input_is_flipped_kernel_full_correlation():
    # d(conv)/dx equals full-mode correlation of the cotangent with the
    # spatially flipped kernel; checked against a direct loop on 5x5 input.
    rng = np.random.default_rng(5)
    x = rng.normal(size=(2, 5, 5))
    w = rng.normal(size=(3, 2, 3, 3))
    g = rng.normal(size=(3, 3, 3))
    got = kernels.conv2d_backward_input(g, w, 5, 5)

    want = np.zeros_like(x)
    wf = w[:, :, ::-1, ::-1]
    gp = np.pad(g, ((0, 0), (2, 2), (2, 2)))  # full correlation
    for c in range(2):
        for i in range(5):
            for j in range(5):
                acc = 0.0
                for o in range(3):
                    for a in range(3):
                        for b in range(3):
                            acc += gp[o, i + a, j + b] * wf[o, c, a, b]
                want[c, i, j] = acc
    assert np.abs(got - want).max() < 1e-12


@pytest.mark.parametrize("dilation", [1, 2])
def test_backward_weight_matches_loop(dilation):
    rng = np.random.default_rng(6)
    x = rng.normal(size=(2, 8, 8))
    w_shape = (3, 2, 3, 3)
    ho = 8 - 2 * dilation
    g = rng.normal(size=(3, ho, ho))
    got = kernels.conv2d_backward_weight(x, g, 3, 3, dilation)
    want = np.zeros(w_shape)
    for o in range(3):
        for c in range(2):
            for a in range(3):
                for b in range(3):
                    acc = 0.0
                    for i in range(ho):
                        for j in range(ho):
                            acc += g[o, i, j] * x[c, i + a * dilation, j + b * dilation]
                    want[o, c, a, b] = acc
    assert np.abs(got - want).max() < 1e-12


@pytest.mark.skipif(kernels.BACKEND != "compiled",
                    reason="compiled backend not built")
def test_backends_agree():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(6, 32, 32))
    w = rng.normal(size=(8, 6, 3, 3))
    f_c = kernels.conv2d_forward(x, w)
    f_p = reference.conv2d_forward(x, w)
    assert np.abs(f_c - f_p).max() < 1e-11
    g = rng.normal(size=f_c.shape)
    assert np.abs(kernels.conv2d_backward_input(g, w, 32, 32)
                  - reference.conv2d_backward_input(g, w, 32, 32)).max() < 1e-11
    assert np.abs(kernels.conv2d_backward_weight(x, g, 3, 3)
                  - reference.conv2d_backward_weight(x, g, 3, 3)).max() < 1e-10
