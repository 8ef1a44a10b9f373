"""Cartesian subsampling masks and self-supervised k-space partitioning.

Mask generators are column-based (full readout rows, fastMRI-style lines);
the partitioner splits the sampled set pixel-wise by rejection-sampling
2-D Gaussian coordinates around the k-space center, which concentrates the
loss-target partition near the densely informative low frequencies.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

from .tensor import read_tnsr, write_tnsr

# acceleration -> fully sampled central fraction; R=2 is inference-only.
ACS_FRACTIONS = {2: 0.16, 4: 0.08, 8: 0.04, 12: 0.03, 16: 0.02}
TRAIN_ACCELERATIONS = (4, 8, 12, 16)

PARTITION_RATIO_GRID = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
FIXED_PARTITION_RATIO = 0.5


class SamplingError(ValueError):
    """Invalid sampling/partitioning configuration."""


def acs_fraction_for(acceleration: int, phase: str) -> float:
    """ACS fraction for an acceleration factor; R=2 is inference-only."""
    if phase not in ("train", "inference"):
        raise SamplingError(f"unknown phase {phase!r}")
    r = int(acceleration)
    if r not in ACS_FRACTIONS:
        raise SamplingError(f"unsupported acceleration {acceleration}")
    if phase == "train" and r not in TRAIN_ACCELERATIONS:
        raise SamplingError(f"acceleration {r} is inference-only")
    return ACS_FRACTIONS[r]


def _round_half_away(x: float) -> int:
    # fixed rounding convention for column counts (x >= 0)
    return int(math.floor(x + 0.5))


@dataclasses.dataclass(frozen=True)
class SamplingMask:
    """Binary (n_x, n_y) sampling grid with acquisition metadata.

    ``acs_band`` is the half-open column interval of the autocalibration
    region; partition masks inherit it from their parent acquisition mask
    even though they are not fully sampled there.
    """

    grid: np.ndarray
    acceleration: float | None = None
    acs_fraction: float | None = None
    seed: int | None = None
    scheme: str | None = None
    acs_band: tuple[int, int] | None = None

    def __post_init__(self):
        g = np.ascontiguousarray(np.asarray(self.grid, dtype=np.float64))
        if g.ndim != 2:
            raise SamplingError(f"mask grid must be 2-D, got {g.shape}")
        if not np.all((g == 0.0) | (g == 1.0)):
            raise SamplingError("mask entries must be 0 or 1")
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)
        if self.acs_fraction is not None and self.acs_band is not None:
            lo, hi = self.acs_band
            if hi > lo and not np.all(g[:, lo:hi] == 1.0):
                raise SamplingError("ACS band must be fully sampled")

    @property
    def n_x(self) -> int:
        return self.grid.shape[0]

    @property
    def n_y(self) -> int:
        return self.grid.shape[1]

    @property
    def n_sampled(self) -> int:
        return int(self.grid.sum())

    def sampled_fraction(self) -> float:
        return self.n_sampled / self.grid.size


def _acs_band(n_y: int, acs_fraction: float) -> tuple[int, int]:
    n_acs = _round_half_away(acs_fraction * n_y)
    if n_acs == 0:
        mid = n_y // 2
        return (mid, mid)
    start = n_y // 2 - n_acs // 2
    return (start, start + n_acs)


def _column_mask(n_x: int, n_y: int, columns: np.ndarray) -> np.ndarray:
    grid = np.zeros((n_x, n_y), dtype=np.float64)
    grid[:, columns] = 1.0
    return grid


def _budget(n_y: int, r: float, band: tuple[int, int]) -> tuple[int, np.ndarray]:
    target_total = _round_half_away(n_y / r)
    n_acs = band[1] - band[0]
    n_extra = target_total - n_acs
    if n_extra < 0:
        raise SamplingError(
            f"ACS band ({n_acs} columns) exceeds the sampling budget "
            f"({target_total} columns at R={r})")
    non_acs = np.array([c for c in range(n_y) if not band[0] <= c < band[1]])
    if n_extra > non_acs.size:
        raise SamplingError("sampling budget exceeds available columns")
    return n_extra, non_acs


def make_equispaced_mask(n_x: int, n_y: int, r: float, acs_fraction: float,
                         seed: int = 0) -> SamplingMask:
    """Equispaced column sampling with a fully sampled centered ACS band.

    Non-ACS columns are placed at a uniform real-valued stride with a
    seeded integer offset; the total sampled column count always lands
    within one column of n_y / R.
    """
    if r < 1:
        raise SamplingError("acceleration must be >= 1")
    band = _acs_band(n_y, acs_fraction)
    n_extra, non_acs = _budget(n_y, r, band)
    cols = list(range(band[0], band[1]))
    if n_extra > 0:
        spacing = non_acs.size / n_extra
        rng = np.random.default_rng(seed)
        offset = int(rng.integers(0, max(1, int(math.floor(spacing)))))
        picks = np.floor(offset + spacing * np.arange(n_extra)).astype(int)
        cols.extend(int(non_acs[p]) for p in picks)
    grid = _column_mask(n_x, n_y, np.array(sorted(set(cols)), dtype=int))
    return SamplingMask(grid, acceleration=float(r),
                        acs_fraction=float(acs_fraction), seed=int(seed),
                        scheme="equispaced", acs_band=band)


def make_random_uniform_mask(n_x: int, n_y: int, r: float, acs_fraction: float,
                             seed: int = 0) -> SamplingMask:
    """Uniformly random column sampling with a fully sampled ACS band."""
    if r < 1:
        raise SamplingError("acceleration must be >= 1")
    band = _acs_band(n_y, acs_fraction)
    n_extra, non_acs = _budget(n_y, r, band)
    cols = list(range(band[0], band[1]))
    if n_extra > 0:
        rng = np.random.default_rng(seed)
        cols.extend(int(c) for c in rng.choice(non_acs, size=n_extra,
                                               replace=False))
    grid = _column_mask(n_x, n_y, np.array(sorted(set(cols)), dtype=int))
    return SamplingMask(grid, acceleration=float(r),
                        acs_fraction=float(acs_fraction), seed=int(seed),
                        scheme="random_uniform", acs_band=band)


@dataclasses.dataclass(frozen=True)
class PartitionSpec:
    """Parameters of the Gaussian k-space split.

    ``q`` is the target |theta| / |mask| ratio, ``sigma`` the draw std in
    pixels, ``acs_window`` the side of the centered window forced into the
    model-input partition.
    """

    q: float
    sigma: float = 3.5
    acs_window: int = 4
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise SamplingError(f"partition ratio q must be in (0, 1), got {self.q}")
        if self.sigma <= 0:
            raise SamplingError("sigma must be positive")
        if self.acs_window < 0:
            raise SamplingError("acs_window must be nonnegative")


@dataclasses.dataclass(frozen=True)
class PartitionStats:
    selected_pre_window: int
    pre_window_ratio: float
    gaussian_draws: int
    uniform_fill: int


def partition_with_stats(mask: SamplingMask, spec: PartitionSpec):
    """Split the sampled set into disjoint (theta, lam) with diagnostics.

    Pixel coordinates are drawn from N(center, sigma^2 I), rounded to the
    nearest grid index; draws outside the grid or outside the sampled set
    are rejected.  Selection stops at the first crossing of the ratio q.
    If rejection exceeds 100 * |mask| draws (the Gaussian has saturated its
    reachable pixels), the remainder is filled uniformly from the not yet
    selected sampled positions.  Afterwards the centered acs_window^2
    positions are moved into lam so sensitivity estimation always sees the
    k-space center.
    """
    m = mask.grid.astype(bool)
    m_count = int(m.sum())
    if m_count == 0:
        raise SamplingError("cannot partition an empty mask")
    if spec.acs_window ** 2 > m_count:
        raise SamplingError("acs_window^2 exceeds the number of sampled positions")
    n_x, n_y = m.shape
    target = max(1, int(math.ceil(spec.q * m_count - 1e-9)))

    rng = np.random.default_rng(spec.seed)
    theta = np.zeros((n_x, n_y), dtype=bool)
    selected = 0
    draws = 0
    limit = 100 * m_count
    chunk = 2048
    while selected < target and draws < limit:
        ks = rng.normal(n_x / 2.0, spec.sigma, size=chunk)
        js = rng.normal(n_y / 2.0, spec.sigma, size=chunk)
        draws += chunk
        ki = np.rint(ks).astype(int)
        ji = np.rint(js).astype(int)
        ok = (ki >= 0) & (ki < n_x) & (ji >= 0) & (ji < n_y)
        ki, ji = ki[ok], ji[ok]
        ok = m[ki, ji] & ~theta[ki, ji]
        for k, j in zip(ki[ok], ji[ok]):
            if not theta[k, j]:
                theta[k, j] = True
                selected += 1
                if selected >= target:
                    break

    fill = 0
    if selected < target:
        pool = np.flatnonzero(m & ~theta)
        fill = target - selected
        picks = rng.choice(pool, size=fill, replace=False)
        theta.ravel()[picks] = True
        selected = target

    pre_ratio = selected / m_count

    w = spec.acs_window
    if w > 0:
        r0 = n_x // 2 - w // 2
        c0 = n_y // 2 - w // 2
        theta[r0:r0 + w, c0:c0 + w] = False

    lam = m & ~theta
    theta_mask = SamplingMask(theta.astype(np.float64))
    lam_mask = SamplingMask(lam.astype(np.float64), acs_band=mask.acs_band,
                            acs_fraction=None)
    stats = PartitionStats(selected_pre_window=selected,
                           pre_window_ratio=pre_ratio,
                           gaussian_draws=draws, uniform_fill=fill)
    return theta_mask, lam_mask, stats


def gaussian_partition(mask: SamplingMask, spec: PartitionSpec):
    """Disjoint (theta, lam) partition of the sampled set; theta + lam = mask."""
    theta, lam, _ = partition_with_stats(mask, spec)
    return theta, lam


def sample_partition_ratio(mode: str, seed: int = 0) -> float:
    """Draw the partition ratio: uniform over the 0.3..0.8 grid, or fixed 0.5."""
    if mode == "fixed":
        return FIXED_PARTITION_RATIO
    if mode == "range":
        rng = np.random.default_rng(seed)
        return float(rng.choice(PARTITION_RATIO_GRID))
    raise SamplingError(f"unknown partition ratio mode {mode!r}")


def save_mask(path_stem, mask: SamplingMask) -> None:
    """Persist a mask as <stem>.tnsr plus a <stem>.json metadata sidecar."""
    write_tnsr(f"{path_stem}.tnsr", mask.grid)
    meta = {
        "acceleration": mask.acceleration,
        "acs_fraction": mask.acs_fraction,
        "seed": mask.seed,
        "scheme": mask.scheme,
    }
    with open(f"{path_stem}.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_mask(path_stem) -> SamplingMask:
    grid = read_tnsr(f"{path_stem}.tnsr").data
    with open(f"{path_stem}.json") as fh:
        meta = json.load(fh)
    band = None
    if meta.get("acs_fraction") is not None:
        band = _acs_band(grid.shape[1], meta["acs_fraction"])
    return SamplingMask(grid, acceleration=meta.get("acceleration"),
                        acs_fraction=meta.get("acs_fraction"),
                        seed=meta.get("seed"), scheme=meta.get("scheme"),
                        acs_band=band)
