"""Acquisition mask generation and the self-supervised theta/lambda split.

Acquisition masks are Cartesian: the readout axis is fully sampled, the
phase-encode (ky-kz) plane is randomly undersampled around a fully sampled
centered ACS block. The split into a data-consistency set (theta) and a
loss set (lambda) is drawn in three dimensions, weighted by a Gaussian
centered on k-space center, so split masks are generally *not* constant
along the readout axis even though the acquisition mask is.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ArgumentError, InfeasibleConfigError
from .fft import fft_axis, ifft_axis
from .mri import CoilSet


@dataclass
class SamplingMask:
    """Binary 3D k-space mask with ACS bookkeeping.

    Parameters
    ----------
    bits : (nx, ny, nz) bool array
    acs : (height, width) centered fully-sampled block in the phase-encode plane
    readout_axis : index of the fully sampled axis
    """

    bits: np.ndarray
    acs: tuple
    readout_axis: int = 0

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.ndim != 3:
            raise ArgumentError(f"mask must be 3D, got shape {self.bits.shape}")
        if self.readout_axis not in (0, 1, 2):
            raise ArgumentError(f"readout_axis must be 0..2, got {self.readout_axis}")
        self.acs = (int(self.acs[0]), int(self.acs[1]))

    @property
    def dims(self) -> tuple:
        return self.bits.shape

    @property
    def plane_axes(self) -> tuple:
        return tuple(a for a in range(3) if a != self.readout_axis)

    @property
    def plane_shape(self) -> tuple:
        a, b = self.plane_axes
        return (self.bits.shape[a], self.bits.shape[b])

    def plane(self) -> np.ndarray:
        """The ky-kz pattern at readout index 0."""
        index = [slice(None)] * 3
        index[self.readout_axis] = 0
        return self.bits[tuple(index)]

    def acs_region(self) -> np.ndarray:
        """Boolean volume marking the ACS block (all readout positions)."""
        region = np.zeros(self.dims, dtype=bool)
        (pa, pb), (na, nb) = self.plane_axes, self.plane_shape
        h, w = self.acs
        sa = slice(na // 2 - h // 2, na // 2 - h // 2 + h)
        sb = slice(nb // 2 - w // 2, nb // 2 - w // 2 + w)
        index = [slice(None)] * 3
        index[pa] = sa
        index[pb] = sb
        region[tuple(index)] = True
        return region

    def is_readout_constant(self) -> bool:
        first = np.take(self.bits, [0], axis=self.readout_axis)
        return bool(np.all(self.bits == first))

    def count(self) -> int:
        return int(self.bits.sum())

    def as_float(self) -> np.ndarray:
        return self.bits.astype(np.float64)


@dataclass
class MaskSplit:
    """Disjoint pair (theta, lambda) partitioning the acquired set."""

    theta: SamplingMask
    lam: SamplingMask

    def omega_bits(self) -> np.ndarray:
        return self.theta.bits | self.lam.bits

    def validate(self) -> None:
        if np.any(self.theta.bits & self.lam.bits):
            raise ArgumentError("theta and lambda overlap")
        if not np.any(self.lam.bits):
            raise ArgumentError("lambda is empty")


@dataclass
class SplitConfig:
    """Parameters of the Gaussian-weighted split.

    rho is the fraction of eligible acquired samples assigned to lambda;
    sigma the per-axis Gaussian stds in index units (None picks dim/4);
    keep_acs_in_theta protects the ACS block from lambda. With
    weight_lambda_center=False the Gaussian weighting selects theta
    instead, leaving lambda periphery-heavy.
    """

    rho: float = 0.4
    sigma: Optional[tuple] = None
    keep_acs_in_theta: bool = True
    weight_lambda_center: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ArgumentError(f"rho must be in (0,1), got {self.rho}")
        if self.sigma is not None and any(s <= 0 for s in self.sigma):
            raise ArgumentError("sigma entries must be positive")


def generate_mask(
    dims: tuple,
    R: float,
    acs: tuple,
    readout_axis: int = 0,
    seed: int = 0,
) -> SamplingMask:
    """Random uniform ky-kz undersampling at rate R with a fully sampled ACS.

    The sampled fraction of the phase-encode plane is round(plane/R) exactly;
    the pattern is replicated along the readout axis. Deterministic per seed.
    """
    if R < 1:
        raise ArgumentError(f"acceleration R must be >= 1, got {R}")
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ArgumentError(f"bad dims {dims}")
    plane_axes = tuple(a for a in range(3) if a != readout_axis)
    na, nb = dims[plane_axes[0]], dims[plane_axes[1]]
    h, w = int(acs[0]), int(acs[1])
    if h > na or w > nb:
        raise InfeasibleConfigError(f"ACS {acs} does not fit in plane ({na}, {nb})")
    total = na * nb
    target = int(round(total / R))
    if h * w > target:
        raise InfeasibleConfigError(
            f"ACS alone ({h * w} samples) exceeds the rate budget {target} (R={R})"
        )

    plane = np.zeros((na, nb), dtype=bool)
    plane[na // 2 - h // 2 : na // 2 - h // 2 + h, nb // 2 - w // 2 : nb // 2 - w // 2 + w] = True
    remaining = target - h * w
    free = np.flatnonzero(~plane.ravel())
    rng = np.random.default_rng(seed)
    chosen = rng.choice(free, size=remaining, replace=False)
    flat = plane.ravel()
    flat[chosen] = True
    plane = flat.reshape(na, nb)

    shape = [1, 1, 1]
    shape[plane_axes[0]] = na
    shape[plane_axes[1]] = nb
    bits = np.broadcast_to(plane.reshape(shape), dims).copy()
    return SamplingMask(bits, (h, w), readout_axis)


def retrospective_subsample(
    mask: SamplingMask,
    new_R: float,
    new_acs: tuple,
    seed: int = 0,
) -> SamplingMask:
    """Subsample an existing acquisition mask to a higher rate.

    Keeps the (smaller) new ACS block fully and draws the remaining
    survivors uniformly from the currently set ky-kz locations. The output
    is always a subset of the input.
    """
    if not mask.is_readout_constant():
        raise ArgumentError("retrospective subsampling expects an acquisition mask")
    h, w = int(new_acs[0]), int(new_acs[1])
    if h > mask.acs[0] or w > mask.acs[1]:
        raise ArgumentError(f"new ACS {new_acs} must fit inside existing ACS {mask.acs}")
    na, nb = mask.plane_shape
    plane = mask.plane().copy()
    n_set = int(plane.sum())
    target = int(round(na * nb / new_R))
    if target > n_set:
        raise InfeasibleConfigError(
            f"rate {new_R} needs {target} samples but only {n_set} were acquired"
        )
    acs_plane = np.zeros((na, nb), dtype=bool)
    acs_plane[na // 2 - h // 2 : na // 2 - h // 2 + h, nb // 2 - w // 2 : nb // 2 - w // 2 + w] = True
    if target < h * w:
        raise InfeasibleConfigError(f"new ACS ({h * w}) exceeds the rate budget {target}")

    keep = acs_plane.copy()
    candidates = np.flatnonzero((plane & ~acs_plane).ravel())
    need = target - h * w
    rng = np.random.default_rng(seed)
    chosen = rng.choice(candidates, size=need, replace=False)
    flat = keep.ravel()
    flat[chosen] = True
    keep = flat.reshape(na, nb)

    shape = [1, 1, 1]
    pa, pb = mask.plane_axes
    shape[pa] = na
    shape[pb] = nb
    bits = np.broadcast_to(keep.reshape(shape), mask.dims).copy()
    return SamplingMask(bits, (h, w), mask.readout_axis)


def _gaussian_weights(mask: SamplingMask, sigma: tuple) -> np.ndarray:
    grids = np.meshgrid(
        *[np.arange(n) - n // 2 for n in mask.dims], indexing="ij", sparse=True
    )
    expo = sum((g / s) ** 2 for g, s in zip(grids, sigma))
    return np.exp(-0.5 * expo)


def split_gaussian(mask: SamplingMask, cfg: SplitConfig) -> MaskSplit:
    """Split acquired samples into disjoint theta (DC) and lambda (loss) sets.

    lambda receives ceil(rho * n_eligible) locations drawn without
    replacement with probability proportional to a 3D Gaussian at k-space
    center (weighted reservoir keys), so the count is exact and the split
    deterministic per seed.
    """
    sigma = cfg.sigma if cfg.sigma is not None else tuple(max(d / 4.0, 1.0) for d in mask.dims)
    eligible = mask.bits.copy()
    if cfg.keep_acs_in_theta:
        eligible &= ~mask.acs_region()
    n_eligible = int(eligible.sum())
    if n_eligible < 2:
        raise ArgumentError("mask needs at least 2 eligible samples outside the protected region")
    n_lam = int(np.ceil(cfg.rho * n_eligible))
    if n_lam >= n_eligible and n_eligible == mask.count():
        raise ArgumentError("rho too large: theta would be empty")

    weights = _gaussian_weights(mask, sigma)
    if not cfg.weight_lambda_center:
        # Invert: the Gaussian then concentrates theta at the center.
        wmax = weights[tuple(n // 2 for n in mask.dims)]
        weights = wmax - weights + 1e-12
    flat_idx = np.flatnonzero(eligible.ravel())
    w = weights.ravel()[flat_idx]

    rng = np.random.default_rng(cfg.seed)
    u = rng.random(flat_idx.size)
    # Efraimidis-Spirakis: top-k keys log(u)/w ~ weighted draw w/o replacement.
    keys = np.log(u) / w
    order = np.argsort(keys)[::-1]
    lam_idx = flat_idx[order[:n_lam]]

    lam_bits = np.zeros(mask.dims, dtype=bool).ravel()
    lam_bits[lam_idx] = True
    lam_bits = lam_bits.reshape(mask.dims)
    theta_bits = mask.bits & ~lam_bits

    theta = SamplingMask(theta_bits, mask.acs, mask.readout_axis)
    lam = SamplingMask(lam_bits, mask.acs, mask.readout_axis)
    split = MaskSplit(theta, lam)
    split.validate()
    return split


@dataclass
class Slab:
    """One extracted sub-volume in full 3D k-space form."""

    kspace: np.ndarray
    mask: SamplingMask
    coils: CoilSet
    ground_truth: Optional[np.ndarray] = None
    slab_index: int = 0
    readout_start: int = 0


def extract_subvolumes(
    kspace: np.ndarray,
    mask: SamplingMask,
    coils: CoilSet,
    slab_len: int,
    stride: Optional[int] = None,
    ground_truth: Optional[np.ndarray] = None,
) -> list:
    """Cut a whole acquisition into readout slabs, each back in 3D k-space.

    The volume is moved to hybrid space with a centered inverse DFT along
    the readout axis, partitioned into slabs of `slab_len` slices with the
    given stride (default non-overlapping), and each slab is transformed
    forward again along the readout. Because the acquisition mask is
    constant along the readout axis, off-mask entries stay exactly zero and
    the sub-volume mask is the same ky-kz pattern on the slab dims. Coil
    maps and the optional ground truth are cropped to the same slices.
    """
    kspace = np.asarray(kspace)
    axis = mask.readout_axis
    extent = mask.dims[axis]
    if not 1 <= slab_len <= extent:
        raise ArgumentError(f"slab_len {slab_len} must be in [1, {extent}]")
    if not mask.is_readout_constant():
        raise ArgumentError("extraction requires a readout-constant acquisition mask")
    if kspace.shape != (coils.n_coils, *mask.dims):
        raise ArgumentError(f"k-space shape {kspace.shape} does not match mask/coils")
    stride = slab_len if stride is None else int(stride)
    if stride < 1:
        raise ArgumentError("stride must be >= 1")

    hybrid = ifft_axis(kspace, axis)
    arr_axis = 1 + axis  # leading coil axis
    slabs = []
    starts = range(0, extent - slab_len + 1, stride)
    for j, s in enumerate(starts):
        sl = [slice(None)] * kspace.ndim
        sl[arr_axis] = slice(s, s + slab_len)
        sub = fft_axis(np.ascontiguousarray(hybrid[tuple(sl)]), axis)

        msl = [slice(None)] * 3
        msl[axis] = slice(s, s + slab_len)
        sub_mask = SamplingMask(mask.bits[tuple(msl)].copy(), mask.acs, axis)

        csl = [slice(None), slice(None), slice(None), slice(None)]
        csl[arr_axis] = slice(s, s + slab_len)
        sub_coils = CoilSet(coils.maps[tuple(csl)].copy())

        gt = None
        if ground_truth is not None:
            gsl = [slice(None)] * 3
            gsl[axis] = slice(s, s + slab_len)
            gt = np.ascontiguousarray(ground_truth[tuple(gsl)])
        slabs.append(Slab(sub, sub_mask, sub_coils, gt, j, s))
    return slabs
