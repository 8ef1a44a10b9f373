"""The multi-coil MRI measurement model.

Shape conventions (complex data carries a trailing (re, im) axis):

* multi-coil k-space  (n_c, n_x, n_y, 2)
* coil sensitivity maps (n_c, n_x, n_y, 2), RSS-normalized
* complex image (n_x, n_y, 2); magnitude image (n_x, n_y)

Every operator accepts either plain arrays (fast numpy path) or autodiff
Variables, in which case the computation is recorded on the Variable's
Tape so models can backpropagate through the physics.  Both paths share
the same FFT convention: centered, orthonormal, over the two axes before
the (re, im) axis, so the forward operator's adjoint is exact.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .tensor import Tensor, as_array


def _is_var(x) -> bool:
    return isinstance(x, ad.Variable)


def _grid(mask) -> np.ndarray:
    # Accept SamplingMask-like objects, Tensors or arrays.
    g = getattr(mask, "grid", mask)
    return as_array(g)


def fft2c(x):
    if _is_var(x):
        return ad.fft2c(x)
    return ad.fft2c_array(as_array(x))


def ifft2c(x):
    if _is_var(x):
        return ad.ifft2c(x)
    return ad.ifft2c_array(as_array(x))


def complex_conj(x):
    if _is_var(x):
        return ad.complex_conj(x)
    out = as_array(x).copy()
    out[..., 1] = -out[..., 1]
    return out


def complex_modulus(x):
    """Pointwise |z| of a (..., 2) real-pair array; subgradient 0 at zero."""
    if _is_var(x):
        return ad.sqrt(ad.sum(ad.square(x), axis=-1))
    a = as_array(x)
    return np.sqrt(np.sum(a * a, axis=-1))


def stack_coils(x, n_c: int):
    """Replicate a complex image (H, W, 2) into (n_c, H, W, 2)."""
    if _is_var(x):
        h, w, _ = x.value.shape
        one = ad.reshape(x, (1, h, w, 2))
        return ad.concat([one] * n_c, axis=0)
    a = as_array(x)
    return np.broadcast_to(a, (n_c,) + a.shape).copy()


def expand_coils(x, maps):
    """Image to per-coil images: multiply by each sensitivity profile."""
    n_c = (maps.value.shape if _is_var(maps) else as_array(maps).shape)[0]
    xs = stack_coils(x, n_c)
    if _is_var(xs) or _is_var(maps):
        xs = xs if _is_var(xs) else maps.tape.constant(xs)
        maps_v = maps if _is_var(maps) else xs.tape.constant(as_array(maps))
        return ad.complex_mul(maps_v, xs)
    return _cmul_nd(as_array(maps), xs)


def reduce_coils(coil_imgs, maps):
    """Per-coil images to one image: conjugate-weighted coil sum."""
    if _is_var(coil_imgs) or _is_var(maps):
        tape = coil_imgs.tape if _is_var(coil_imgs) else maps.tape
        ci = coil_imgs if _is_var(coil_imgs) else tape.constant(as_array(coil_imgs))
        mv = maps if _is_var(maps) else tape.constant(as_array(maps))
        return ad.sum(ad.complex_mul(ad.complex_conj(mv), ci), axis=0)
    return _cmul_nd(complex_conj(as_array(maps)), as_array(coil_imgs)).sum(axis=0)


def _cmul_nd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ar, ai = a[..., 0], a[..., 1]
    br, bi = b[..., 0], b[..., 1]
    return np.stack([ar * br - ai * bi, ar * bi + ai * br], axis=-1)


def rss_reconstruct(kspace):
    """Root-sum-of-squares magnitude image from multi-coil k-space."""
    imgs = ifft2c(kspace)
    if _is_var(imgs):
        return ad.sqrt(ad.sum(ad.sum(ad.square(imgs), axis=-1), axis=0))
    a = as_array(imgs)
    return np.sqrt((a * a).sum(axis=-1).sum(axis=0))


def sense_reconstruct(kspace, maps):
    """Magnitude of the sensitivity-weighted coil combination."""
    k_nc = (kspace.value.shape if _is_var(kspace) else as_array(kspace).shape)[0]
    m_nc = (maps.value.shape if _is_var(maps) else as_array(maps).shape)[0]
    if k_nc != m_nc:
        raise ValueError(f"coil count mismatch: k-space {k_nc}, maps {m_nc}")
    return complex_modulus(reduce_coils(ifft2c(kspace), maps))


def apply_mask(kspace, mask):
    """Zero k-space entries outside the sampling set; identical per coil."""
    grid = _grid(mask)
    if _is_var(kspace):
        return ad.mask_apply(kspace, grid)
    a = as_array(kspace)
    if a.shape[-3:-1] != grid.shape:
        raise ValueError(
            f"mask shape {grid.shape} does not match k-space spatial dims "
            f"{a.shape[-3:-1]}")
    return a * grid[..., None]


def forward_operator(image, mask, maps):
    """Image -> subsampled multi-coil k-space (expand, FFT, subsample)."""
    return apply_mask(fft2c(expand_coils(image, maps)), mask)


def adjoint_operator(kspace, mask, maps):
    """Subsampled multi-coil k-space -> image (subsample, IFFT, reduce)."""
    return reduce_coils(ifft2c(apply_mask(kspace, mask)), maps)


def simulate_acquisition(image, mask, maps, noise_sigma: float = 0.0,
                         seed: int = 0) -> np.ndarray:
    """Forward model plus seeded complex Gaussian noise on sampled entries.

    Per-component noise std is ``noise_sigma``; zero-filled entries stay
    exactly zero.
    """
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    clean = forward_operator(as_array(image), mask, as_array(maps))
    if noise_sigma == 0.0:
        return clean
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, noise_sigma, size=clean.shape)
    return clean + noise * _grid(mask)[..., None]


def validate_sensitivity_maps(maps, tol: float = 1e-8) -> None:
    """Check the RSS-normalization invariant where any coil is nonzero."""
    a = as_array(maps)
    power = (a * a).sum(axis=-1).sum(axis=0)
    active = power > 0
    if active.any() and np.abs(power[active] - 1.0).max() > tol:
        raise ValueError("sensitivity maps are not RSS-normalized")


def to_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)
