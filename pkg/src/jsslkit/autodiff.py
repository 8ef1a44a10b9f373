"""Tape-based reverse-mode automatic differentiation.

Forward values are computed eagerly with numpy; every recorded operation
appends a backward rule to its Tape.  Complex quantities live as real
tensors with a trailing (re, im) axis, so gradients are taken with respect
to the real and imaginary channels independently.

Conventions: relu/abs/sqrt have subgradient 0 at their kinks; fft2c is the
centered (fftshift . FFT . ifftshift) orthonormal transform over the two
axes preceding the (re, im) axis, making its adjoint equal to its inverse.

Broadcasting is deliberately not supported, with one exception: ``mul`` and
``div`` accept a scalar (size-1) operand, which the unrolled models need
for trainable penalties and step sizes.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as kernels
from .tensor import Tensor

OP_KINDS = frozenset({
    "add", "sub", "mul", "div", "scalar_mul", "matmul", "conv2d", "relu",
    "sum", "mean", "reshape", "slice", "concat", "abs", "sqrt", "square",
    "exp", "complex_mul", "complex_conj", "fft2c", "ifft2c", "mask_apply",
    "pad", "crop",
})


class AutodiffError(ValueError):
    """Shape or argument error while recording an operation."""


class Variable:
    """A value on a Tape: a Tensor plus a graph handle and gradient slot."""

    __slots__ = ("tape", "node_id", "value", "requires_grad", "needs_grad", "grad")

    def __init__(self, tape, node_id, value, requires_grad, needs_grad):
        self.tape = tape
        self.node_id = node_id
        self.value = value
        self.requires_grad = requires_grad
        self.needs_grad = needs_grad
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Variable(id={self.node_id}, shape={self.value.shape})"

    # Small arithmetic sugar used by the models.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Variable):
            return mul(self, other)
        return scalar_mul(self, float(other))

    def __rmul__(self, other):
        return scalar_mul(self, float(other))

    def __truediv__(self, other):
        if isinstance(other, Variable):
            return div(self, other)
        return scalar_mul(self, 1.0 / float(other))

    def __neg__(self):
        return scalar_mul(self, -1.0)


class _Record:
    __slots__ = ("out_id", "in_ids", "in_needs", "backward")

    def __init__(self, out_id, in_ids, in_needs, backward):
        self.out_id = out_id
        self.in_ids = in_ids
        self.in_needs = in_needs
        self.backward = backward


class Tape:
    """Ordered log of recorded operations for one reverse pass.

    Inputs of every op precede it (construction order), so the backward
    pass is a single reverse sweep that visits each op exactly once.
    """

    def __init__(self):
        self._records: list[_Record] = []
        self._leaves: list[Variable] = []
        self._next_id = 0

    def _new_var(self, value: Tensor, requires_grad: bool, needs_grad: bool) -> Variable:
        var = Variable(self, self._next_id, value, requires_grad, needs_grad)
        self._next_id += 1
        return var

    def variable(self, value, requires_grad: bool = False) -> Variable:
        """Register a leaf holding ``value`` (Tensor or array-like)."""
        t = value if isinstance(value, Tensor) else Tensor(value)
        var = self._new_var(t, requires_grad, requires_grad)
        self._leaves.append(var)
        return var

    def constant(self, value) -> Variable:
        return self.variable(value, requires_grad=False)

    def record(self, op_kind: str, inputs: list, attrs: dict | None = None) -> Variable:
        """Apply ``op_kind`` to ``inputs`` eagerly and log its backward rule."""
        if op_kind not in OP_KINDS:
            raise AutodiffError(f"unknown op kind {op_kind!r}")
        for v in inputs:
            if not isinstance(v, Variable):
                raise AutodiffError(f"{op_kind}: inputs must be Variables")
            if v.tape is not self:
                raise AutodiffError(f"{op_kind}: input from a different Tape")
        attrs = attrs or {}
        out_arr, backward = _FORWARD[op_kind](
            [v.value.data for v in inputs], attrs)
        needs = any(v.needs_grad for v in inputs)
        out = self._new_var(Tensor._wrap(out_arr), False, needs)
        if needs:
            self._records.append(_Record(
                out.node_id,
                tuple(v.node_id for v in inputs),
                tuple(v.needs_grad for v in inputs),
                backward,
            ))
        return out

    def backward(self, loss: Variable) -> dict:
        """Reverse-accumulate d(loss)/d(leaf) for every requires_grad leaf.

        Returns a map node_id -> Tensor; leaves unreachable from the loss
        get zero gradients.  Also populates each leaf's ``grad`` slot.
        """
        if not isinstance(loss, Variable) or loss.tape is not self:
            raise AutodiffError("loss must be a Variable on this Tape")
        if loss.value.size != 1:
            raise AutodiffError(
                f"backward requires a scalar loss, got shape {loss.value.shape}")
        grads: dict[int, np.ndarray] = {
            loss.node_id: np.ones(loss.value.shape, dtype=np.float64)
        }
        for rec in reversed(self._records):
            g = grads.pop(rec.out_id, None)
            if g is None:
                continue
            for vid, wanted, gin in zip(rec.in_ids, rec.in_needs,
                                        rec.backward(g, rec.in_needs)):
                if not wanted or gin is None:
                    continue
                acc = grads.get(vid)
                grads[vid] = gin if acc is None else acc + gin
        result = {}
        for leaf in self._leaves:
            if not leaf.requires_grad:
                continue
            arr = grads.get(leaf.node_id)
            if arr is None:
                arr = np.zeros(leaf.value.shape, dtype=np.float64)
            t = Tensor._wrap(np.ascontiguousarray(
                np.broadcast_to(arr, leaf.value.shape)))
            leaf.grad = t
            result[leaf.node_id] = t
        return result


# ---------------------------------------------------------------------------
# Forward/backward rules.  Each rule returns (out_array, backward) where
# backward(g, wanted) yields one cotangent (or None) per input.


def _shapes(vals):
    return " vs ".join(str(v.shape) for v in vals)


def _require(cond, op, msg, vals=()):
    if not cond:
        detail = f" ({_shapes(vals)})" if vals else ""
        raise AutodiffError(f"{op}: {msg}{detail}")


def _is_scalar(a):
    return a.size == 1


def _reduce_like(g, shape):
    # Collapse a full-shape cotangent onto a size-1 operand.
    return np.asarray(g.sum(), dtype=np.float64).reshape(shape)


def _fw_add(vals, attrs):
    a, b = vals
    _require(a.shape == b.shape, "add", "shape mismatch", vals)
    out = a + b

    def backward(g, wanted):
        return (g if wanted[0] else None, g if wanted[1] else None)

    return out, backward


def _fw_sub(vals, attrs):
    a, b = vals
    _require(a.shape == b.shape, "sub", "shape mismatch", vals)
    out = a - b

    def backward(g, wanted):
        return (g if wanted[0] else None, -g if wanted[1] else None)

    return out, backward


def _fw_mul(vals, attrs):
    a, b = vals
    _require(a.shape == b.shape or _is_scalar(a) or _is_scalar(b),
             "mul", "shapes must match or one operand must be scalar", vals)
    out = a * b

    def backward(g, wanted):
        ga = gb = None
        if wanted[0]:
            ga = g * b
            if _is_scalar(a) and ga.shape != a.shape:
                ga = _reduce_like(ga, a.shape)
        if wanted[1]:
            gb = g * a
            if _is_scalar(b) and gb.shape != b.shape:
                gb = _reduce_like(gb, b.shape)
        return (ga, gb)

    return out, backward


def _fw_div(vals, attrs):
    a, b = vals
    _require(a.shape == b.shape or _is_scalar(a) or _is_scalar(b),
             "div", "shapes must match or one operand must be scalar", vals)
    out = a / b

    def backward(g, wanted):
        ga = gb = None
        if wanted[0]:
            ga = g / b
            if _is_scalar(a) and ga.shape != a.shape:
                ga = _reduce_like(ga, a.shape)
        if wanted[1]:
            gb = -g * a / (b * b)
            if _is_scalar(b) and gb.shape != b.shape:
                gb = _reduce_like(gb, b.shape)
        return (ga, gb)

    return out, backward


def _fw_scalar_mul(vals, attrs):
    (a,) = vals
    c = float(attrs["scalar"])
    out = a * c

    def backward(g, wanted):
        return (g * c,)

    return out, backward


def _fw_matmul(vals, attrs):
    a, b = vals
    _require(a.ndim == 2 and b.ndim == 2 and a.shape[1] == b.shape[0],
             "matmul", "expects (m,k) @ (k,n)", vals)
    out = a @ b

    def backward(g, wanted):
        ga = g @ b.T if wanted[0] else None
        gb = a.T @ g if wanted[1] else None
        return (ga, gb)

    return out, backward


def _fw_conv2d(vals, attrs):
    x, w = vals[0], vals[1]
    bias = vals[2] if len(vals) > 2 else None
    dilation = int(attrs.get("dilation", 1))
    _require(x.ndim == 3 and w.ndim == 4, "conv2d",
             "expects input (C,H,W) and weight (O,C,kh,kw)", vals)
    _require(w.shape[1] == x.shape[0], "conv2d", "channel mismatch", vals)
    kh, kw = w.shape[2], w.shape[3]
    _require(x.shape[1] >= (kh - 1) * dilation + 1
             and x.shape[2] >= (kw - 1) * dilation + 1,
             "conv2d", "kernel larger than input", vals)
    if bias is not None:
        _require(bias.shape == (w.shape[0],), "conv2d",
                 "bias must be (C_out,)", vals)
    out = kernels.conv2d_forward(x, w, dilation)
    if bias is not None:
        out = out + bias[:, None, None]
    h, wd = x.shape[1], x.shape[2]

    def backward(g, wanted):
        g = np.ascontiguousarray(g)
        gx = (kernels.conv2d_backward_input(g, w, h, wd, dilation)
              if wanted[0] else None)
        gw = (kernels.conv2d_backward_weight(x, g, kh, kw, dilation)
              if wanted[1] else None)
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(1, 2)) if wanted[2] else None)
        return tuple(grads)

    return out, backward


def _fw_relu(vals, attrs):
    (a,) = vals
    out = np.maximum(a, 0.0)
    pos = a > 0.0

    def backward(g, wanted):
        return (g * pos,)

    return out, backward


def _fw_sum(vals, attrs):
    (a,) = vals
    axis = attrs.get("axis")
    if axis is None:
        out = np.asarray(a.sum())

        def backward(g, wanted):
            return (np.broadcast_to(g.reshape(()), a.shape),)
    else:
        axis = int(axis)
        out = a.sum(axis=axis)

        def backward(g, wanted):
            return (np.broadcast_to(np.expand_dims(g, axis), a.shape),)

    return out, backward


def _fw_mean(vals, attrs):
    (a,) = vals
    out = np.asarray(a.mean())
    inv = 1.0 / a.size

    def backward(g, wanted):
        return (np.broadcast_to(g.reshape(()) * inv, a.shape),)

    return out, backward


def _fw_reshape(vals, attrs):
    (a,) = vals
    shape = tuple(int(s) for s in attrs["shape"])
    _require(int(np.prod(shape)) == a.size, "reshape",
             f"cannot reshape {a.shape} to {shape}")
    out = a.reshape(shape)

    def backward(g, wanted):
        return (g.reshape(a.shape),)

    return out, backward


def _fw_slice(vals, attrs):
    (a,) = vals
    index = tuple(slice(*s) if isinstance(s, (tuple, list)) else s
                  for s in attrs["index"])
    out = a[index]

    def backward(g, wanted):
        buf = np.zeros(a.shape, dtype=np.float64)
        buf[index] = g
        return (buf,)

    return np.ascontiguousarray(out), backward


def _fw_concat(vals, attrs):
    axis = int(attrs.get("axis", 0))
    _require(len(vals) >= 1, "concat", "needs at least one input")
    out = np.concatenate(vals, axis=axis)
    sizes = [v.shape[axis] for v in vals]
    offsets = np.cumsum([0] + sizes)

    def backward(g, wanted):
        pieces = []
        for i, want in enumerate(wanted):
            if not want:
                pieces.append(None)
                continue
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(int(offsets[i]), int(offsets[i + 1]))
            pieces.append(np.ascontiguousarray(g[tuple(sl)]))
        return tuple(pieces)

    return out, backward


def _fw_abs(vals, attrs):
    (a,) = vals
    out = np.abs(a)
    sgn = np.sign(a)

    def backward(g, wanted):
        return (g * sgn,)

    return out, backward


def _fw_sqrt(vals, attrs):
    (a,) = vals
    _require(np.all(a >= 0.0), "sqrt", "negative input")
    out = np.sqrt(a)

    def backward(g, wanted):
        # subgradient 0 where the input is exactly 0
        denom = np.where(out > 0.0, 2.0 * out, 1.0)
        return (np.where(out > 0.0, g / denom, 0.0),)

    return out, backward


def _fw_square(vals, attrs):
    (a,) = vals
    out = a * a

    def backward(g, wanted):
        return (2.0 * g * a,)

    return out, backward


def _fw_exp(vals, attrs):
    (a,) = vals
    out = np.exp(a)

    def backward(g, wanted):
        return (g * out,)

    return out, backward


def _check_complex(op, a):
    _require(a.ndim >= 1 and a.shape[-1] == 2, op,
             f"expects trailing (re, im) axis, got shape {a.shape}")


def _fw_complex_mul(vals, attrs):
    a, b = vals
    _check_complex("complex_mul", a)
    _check_complex("complex_mul", b)
    _require(a.shape == b.shape, "complex_mul", "shape mismatch", vals)
    ar, ai = a[..., 0], a[..., 1]
    br, bi = b[..., 0], b[..., 1]
    out = np.stack([ar * br - ai * bi, ar * bi + ai * br], axis=-1)

    def backward(g, wanted):
        gr, gi = g[..., 0], g[..., 1]
        ga = gb = None
        if wanted[0]:  # g * conj(b)
            ga = np.stack([gr * br + gi * bi, -gr * bi + gi * br], axis=-1)
        if wanted[1]:  # g * conj(a)
            gb = np.stack([gr * ar + gi * ai, -gr * ai + gi * ar], axis=-1)
        return (ga, gb)

    return out, backward


def _fw_complex_conj(vals, attrs):
    (a,) = vals
    _check_complex("complex_conj", a)
    out = a.copy()
    out[..., 1] = -out[..., 1]

    def backward(g, wanted):
        gc = g.copy()
        gc[..., 1] = -gc[..., 1]
        return (gc,)

    return out, backward


def _to_complex(a):
    return a[..., 0] + 1j * a[..., 1]


def _from_complex(z):
    return np.ascontiguousarray(np.stack([z.real, z.imag], axis=-1))


def fft2c_array(a: np.ndarray) -> np.ndarray:
    """Centered orthonormal 2-D FFT of a (..., H, W, 2) real-pair array."""
    z = _to_complex(a)
    axes = (-2, -1)
    z = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(z, axes=axes),
                                    norm="ortho"), axes=axes)
    return _from_complex(z)


def ifft2c_array(a: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2c_array`."""
    z = _to_complex(a)
    axes = (-2, -1)
    z = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(z, axes=axes),
                                     norm="ortho"), axes=axes)
    return _from_complex(z)


def _fw_fft2c(vals, attrs):
    (a,) = vals
    _check_complex("fft2c", a)
    _require(a.ndim >= 3, "fft2c", f"needs (..., H, W, 2), got {a.shape}")
    out = fft2c_array(a)

    def backward(g, wanted):
        # unitary in the real pair representation: adjoint = inverse
        return (ifft2c_array(g),)

    return out, backward


def _fw_ifft2c(vals, attrs):
    (a,) = vals
    _check_complex("ifft2c", a)
    _require(a.ndim >= 3, "ifft2c", f"needs (..., H, W, 2), got {a.shape}")
    out = ifft2c_array(a)

    def backward(g, wanted):
        return (fft2c_array(g),)

    return out, backward


def _mask_view(op, a, mask):
    _require(mask.ndim == 2, op, f"mask must be 2-D, got {mask.shape}")
    if a.ndim >= 3 and a.shape[-1] == 2:
        spatial = a.shape[-3:-1]
        view = mask[..., None]
    elif a.ndim >= 2:
        spatial = a.shape[-2:]
        view = mask
    else:
        raise AutodiffError(f"{op}: cannot mask shape {a.shape}")
    _require(spatial == mask.shape, op,
             f"mask shape {mask.shape} does not match spatial dims {spatial}")
    return view


def _fw_mask_apply(vals, attrs):
    (a,) = vals
    mask = np.asarray(attrs["mask"], dtype=np.float64)
    view = _mask_view("mask_apply", a, mask)
    out = a * view

    def backward(g, wanted):
        return (g * view,)

    return out, backward


def _fw_pad(vals, attrs):
    (a,) = vals
    widths = tuple(tuple(int(x) for x in pw) for pw in attrs["widths"])
    mode = attrs.get("mode", "constant")
    _require(len(widths) == a.ndim, "pad", "one (before, after) pair per axis")
    _require(mode in ("constant", "edge", "reflect"), "pad",
             f"unsupported mode {mode!r}")
    out = np.pad(a, widths, mode=mode)
    if mode == "constant":
        sl = tuple(slice(b, b + n) for (b, _), n in zip(widths, a.shape))

        def backward(g, wanted):
            return (np.ascontiguousarray(g[sl]),)
    else:
        # Scatter-add through the index map induced by the padding.
        idx = np.pad(np.arange(a.size).reshape(a.shape), widths, mode=mode)

        def backward(g, wanted):
            flat = np.bincount(idx.ravel(), weights=g.ravel(),
                               minlength=a.size)
            return (flat.reshape(a.shape),)

    return out, backward


def _fw_crop(vals, attrs):
    (a,) = vals
    offsets = tuple(int(o) for o in attrs["offsets"])
    sizes = tuple(int(s) for s in attrs["sizes"])
    _require(len(offsets) == a.ndim and len(sizes) == a.ndim, "crop",
             "offsets/sizes must cover every axis")
    _require(all(0 <= o and o + s <= n
                 for o, s, n in zip(offsets, sizes, a.shape)),
             "crop", f"window {offsets}+{sizes} exceeds shape {a.shape}")
    sl = tuple(slice(o, o + s) for o, s in zip(offsets, sizes))
    out = np.ascontiguousarray(a[sl])

    def backward(g, wanted):
        buf = np.zeros(a.shape, dtype=np.float64)
        buf[sl] = g
        return (buf,)

    return out, backward


_FORWARD = {
    "add": _fw_add,
    "sub": _fw_sub,
    "mul": _fw_mul,
    "div": _fw_div,
    "scalar_mul": _fw_scalar_mul,
    "matmul": _fw_matmul,
    "conv2d": _fw_conv2d,
    "relu": _fw_relu,
    "sum": _fw_sum,
    "mean": _fw_mean,
    "reshape": _fw_reshape,
    "slice": _fw_slice,
    "concat": _fw_concat,
    "abs": _fw_abs,
    "sqrt": _fw_sqrt,
    "square": _fw_square,
    "exp": _fw_exp,
    "complex_mul": _fw_complex_mul,
    "complex_conj": _fw_complex_conj,
    "fft2c": _fw_fft2c,
    "ifft2c": _fw_ifft2c,
    "mask_apply": _fw_mask_apply,
    "pad": _fw_pad,
    "crop": _fw_crop,
}


# ---------------------------------------------------------------------------
# Functional helpers (numpy-style module namespace).


def add(a, b):
    return a.tape.record("add", [a, b])


def sub(a, b):
    return a.tape.record("sub", [a, b])


def mul(a, b):
    return a.tape.record("mul", [a, b])


def div(a, b):
    return a.tape.record("div", [a, b])


def scalar_mul(a, scalar: float):
    return a.tape.record("scalar_mul", [a], {"scalar": scalar})


def matmul(a, b):
    return a.tape.record("matmul", [a, b])


def conv2d(x, w, bias=None, dilation: int = 1):
    inputs = [x, w] if bias is None else [x, w, bias]
    return x.tape.record("conv2d", inputs, {"dilation": dilation})


def relu(a):
    return a.tape.record("relu", [a])


def sum(a, axis=None):  # noqa: A001 - numpy-style namespace
    return a.tape.record("sum", [a], {"axis": axis})


def mean(a):
    return a.tape.record("mean", [a])


def reshape(a, shape):
    return a.tape.record("reshape", [a], {"shape": tuple(shape)})


def slice_(a, index):
    return a.tape.record("slice", [a], {"index": tuple(index)})


def concat(vars_, axis: int = 0):
    return vars_[0].tape.record("concat", list(vars_), {"axis": axis})


def abs(a):  # noqa: A001 - numpy-style namespace
    return a.tape.record("abs", [a])


def sqrt(a):
    return a.tape.record("sqrt", [a])


def square(a):
    return a.tape.record("square", [a])


def exp(a):
    return a.tape.record("exp", [a])


def complex_mul(a, b):
    return a.tape.record("complex_mul", [a, b])


def complex_conj(a):
    return a.tape.record("complex_conj", [a])


def fft2c(a):
    return a.tape.record("fft2c", [a])


def ifft2c(a):
    return a.tape.record("ifft2c", [a])


def mask_apply(a, mask):
    return a.tape.record("mask_apply", [a], {"mask": np.asarray(mask)})


def pad(a, widths, mode: str = "constant"):
    return a.tape.record("pad", [a], {"widths": widths, "mode": mode})


def crop(a, offsets, sizes):
    return a.tape.record("crop", [a], {"offsets": offsets, "sizes": sizes})


def sigmoid(a):
    """1 / (1 + exp(-a)), composed from primitive ops."""
    one = a.tape.constant(np.ones(a.value.shape))
    return div(one, add(one, exp(scalar_mul(a, -1.0))))


# ---------------------------------------------------------------------------


def grad_check(f, point, h: float = 1e-5, max_coords: int | None = None,
               seed: int = 0) -> float:
    """Compare analytic gradients of a scalar graph against central differences.

    ``f`` takes a Variable built from ``point`` and returns a scalar
    Variable.  Returns the worst |analytic - fd| / max(1, |fd|) over the
    checked coordinates (all of them, or ``max_coords`` sampled ones).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    point = point if isinstance(point, Tensor) else Tensor(point)
    tape = Tape()
    x = tape.variable(point, requires_grad=True)
    loss = f(x)
    analytic = tape.backward(loss)[x.node_id].data.ravel()

    base = point.data.ravel()
    n = base.size
    if max_coords is not None and max_coords < n:
        rng = np.random.default_rng(seed)
        coords = rng.choice(n, size=max_coords, replace=False)
    else:
        coords = np.arange(n)

    def eval_at(flat):
        t = Tape()
        v = t.variable(Tensor._wrap(flat.reshape(point.shape)))
        return float(f(v).value.data)

    worst = 0.0
    for i in coords:
        bumped = base.copy()
        bumped[i] = base[i] + h
        fp = eval_at(bumped)
        bumped[i] = base[i] - h
        fm = eval_at(bumped)
        fd = (fp - fm) / (2.0 * h)
        err = np.abs(analytic[i] - fd) / max(1.0, np.abs(fd))
        if err > worst:
            worst = float(err)
    return worst
