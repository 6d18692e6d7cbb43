"""Synthetic cardiac-like phantom, coil synthesis and acquisition simulation.

Stands in for clinical scans that cannot be redistributed. The simulator
reuses the package's own forward model (noiseless simulation equals
`mri.encode` bitwise), which is a deliberate, documented inverse crime:
the point is to verify the reconstruction machinery, not clinical realism.
"""

from dataclasses import dataclass, field

import numpy as np

from .config import SimSettings, SplitSettings
from .dataio import TrainingSample
from .errors import ArgumentError
from .fft import fft3_centered
from .mri import RSS_FLOOR, CoilSet, EncodingOperator, encode, estimate_coil_maps
from .sampling import (
    SamplingMask,
    Slab,
    SplitConfig,
    extract_subvolumes,
    generate_mask,
    retrospective_subsample,
    split_gaussian,
)


@dataclass
class PhantomSpec:
    dims: tuple = (32, 64, 48)
    n_ellipsoids: int = 12
    background: tuple = (0.15, 0.25)
    myocardium: tuple = (0.45, 0.55)
    blood_pool: tuple = (0.75, 0.9)
    scar_boost: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if min(self.dims) < 8:
            raise ArgumentError(f"phantom dims must be >= 8 per axis, got {self.dims}")


@dataclass
class AcquisitionSpec:
    n_coils: int = 8
    noise_sigma: float = 0.01
    R: float = 3
    acs: tuple = (12, 8)
    readout_axis: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.n_coils < 1:
            raise ArgumentError("n_coils must be >= 1")
        if self.noise_sigma < 0:
            raise ArgumentError("noise_sigma must be >= 0")


def _grid(dims):
    # Normalized coordinates in [-1, 1] per axis.
    axes = [np.linspace(-1.0, 1.0, n) for n in dims]
    return np.meshgrid(*axes, indexing="ij", sparse=True)


def _soft_ellipsoid(grid, center, radii, sharpness=18.0) -> np.ndarray:
    rho = sum(((g - c) / r) ** 2 for g, c, r in zip(grid, center, radii))
    return 1.0 / (1.0 + np.exp(sharpness * (np.sqrt(rho) - 1.0)))


def generate_phantom(spec: PhantomSpec) -> np.ndarray:
    """Sum of smooth ellipsoids: annular myocardium, blood pool, scar lesion.

    Deterministic per seed; magnitude clipped to [0, 1]; a smooth low-order
    phase field makes the volume genuinely complex.
    """
    rng = np.random.default_rng(spec.seed)
    grid = _grid(spec.dims)

    def jitter(x, amount):
        return x + rng.uniform(-amount, amount)

    i_bg = rng.uniform(*spec.background)
    i_myo = rng.uniform(*spec.myocardium)
    i_blood = rng.uniform(*spec.blood_pool)
    heart = (jitter(0.0, 0.1), jitter(-0.1, 0.1), jitter(0.05, 0.1))

    # (center, radii, added intensity); the first entries model the anatomy,
    # the remainder are random low-intensity texture bumps.
    shapes = [
        ((jitter(0.0, 0.05),) * 3, (0.95, 0.9, 0.9), i_bg),
        (heart, (jitter(0.5, 0.05), jitter(0.45, 0.05), jitter(0.45, 0.05)), i_myo - i_bg),
        (heart, (jitter(0.3, 0.03), jitter(0.27, 0.03), jitter(0.27, 0.03)), i_blood - i_myo),
        (
            tuple(c + d for c, d in zip(heart, (jitter(0.38, 0.04), 0.0, jitter(0.1, 0.05)))),
            (0.1, 0.08, 0.08),
            spec.scar_boost * i_myo,
        ),
    ]
    while len(shapes) < spec.n_ellipsoids:
        center = tuple(rng.uniform(-0.6, 0.6) for _ in range(3))
        radii = tuple(rng.uniform(0.08, 0.25) for _ in range(3))
        shapes.append((center, radii, rng.uniform(-0.05, 0.05)))

    mag = np.zeros(spec.dims)
    for center, radii, intensity in shapes[: spec.n_ellipsoids]:
        mag = mag + intensity * _soft_ellipsoid(grid, center, radii)
    mag = np.clip(mag, 0.0, 1.0)

    cx, cy, cz = (rng.uniform(-0.5, 0.5) for _ in range(3))
    phase = 0.4 * (cx * grid[0] + cy * grid[1] + cz * grid[2]) + 0.2 * grid[0] * grid[1]
    return mag * np.exp(1j * phase)


def generate_coils(dims: tuple, n_coils: int, seed: int = 0) -> CoilSet:
    """Smooth synthetic sensitivities: complex low-order polynomial times a
    Gaussian bump centered on a ring around the volume, RSS-normalized."""
    if n_coils < 1:
        raise ArgumentError("n_coils must be >= 1")
    rng = np.random.default_rng(seed)
    grid = _grid(dims)
    maps = np.empty((n_coils, *dims), dtype=np.complex128)
    for c in range(n_coils):
        angle = 2.0 * np.pi * c / n_coils + rng.uniform(-0.15, 0.15)
        center = (rng.uniform(-0.4, 0.4), 1.15 * np.cos(angle), 1.15 * np.sin(angle))
        width = rng.uniform(0.9, 1.2)
        bump = np.exp(-0.5 * sum(((g - cc) / width) ** 2 for g, cc in zip(grid, center)))
        poly = (
            1.0
            + (0.3 * rng.standard_normal() + 0.3j * rng.standard_normal()) * grid[0]
            + (0.3 * rng.standard_normal() + 0.3j * rng.standard_normal()) * grid[1]
            + (0.3 * rng.standard_normal() + 0.3j * rng.standard_normal()) * grid[2]
        )
        maps[c] = poly * bump * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
    rss = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    return CoilSet(maps / np.maximum(rss, RSS_FLOOR))


def simulate_acquisition(
    truth: np.ndarray,
    coils: CoilSet,
    mask: SamplingMask,
    noise_sigma: float,
    seed: int = 0,
) -> np.ndarray:
    """Noisy undersampled multi-coil k-space of a ground-truth volume.

    Noise std is relative to the peak k-space magnitude of the
    coil-combined truth; a zero volume falls back to an absolute scale of 1
    so pure-noise acquisitions remain well defined.
    """
    truth = np.asarray(truth, dtype=np.complex128)
    if truth.shape != coils.dims or mask.dims != coils.dims:
        raise ArgumentError("truth, coils and mask dims must agree")
    op = EncodingOperator(coils, mask.as_float())
    y = encode(op, truth)
    if noise_sigma > 0:
        peak = float(np.max(np.abs(fft3_centered(truth))))
        scale = noise_sigma * (peak if peak > 0 else 1.0)
        rng = np.random.default_rng(seed)
        noise = rng.normal(0.0, scale / np.sqrt(2.0), size=(2, *y.shape))
        y = y + mask.as_float() * (noise[0] + 1j * noise[1])
    return y


@dataclass
class SubjectData:
    """Everything simulated for one subject, before slab extraction."""

    truth: np.ndarray
    coils_true: CoilSet
    coils_est: CoilSet
    mask: SamplingMask
    kspace: np.ndarray
    subject_id: str = ""


def simulate_subject(sim: SimSettings, subject_index: int, master_seed: int) -> SubjectData:
    """Deterministic per-subject simulation at the configured rate.

    The acquisition is drawn prospectively at R=3 and, when ``sim.rate`` is
    higher, retrospectively subsampled exactly as the acquisition protocol
    prescribes. Coil maps are re-estimated from the ACS block unless
    ``sim.use_true_maps`` is set.
    """
    seeds = np.random.SeedSequence([master_seed, subject_index]).generate_state(4)
    spec = PhantomSpec(dims=sim.dims, n_ellipsoids=sim.n_ellipsoids, seed=int(seeds[0]))
    truth = generate_phantom(spec)
    coils_true = generate_coils(sim.dims, sim.n_coils, seed=int(seeds[1]))

    mask = generate_mask(sim.dims, 3, sim.acs_r3, sim.readout_axis, seed=int(seeds[2]))
    kspace = simulate_acquisition(truth, coils_true, mask, sim.noise_sigma, seed=int(seeds[3]))
    if sim.rate != 3:
        mask = retrospective_subsample(mask, sim.rate, sim.acs_r6, seed=int(seeds[2]) + 1)
        kspace = mask.as_float() * kspace

    if sim.use_true_maps:
        coils_est = coils_true
    else:
        acs_only = mask.acs_region() * kspace
        coils_est = estimate_coil_maps(acs_only, sim.dims, mask.acs, sim.readout_axis)
    return SubjectData(truth, coils_true, coils_est, mask, kspace, f"subj{subject_index:03d}")


def build_dataset(
    sim: SimSettings,
    split: SplitSettings,
    n_subjects: int,
    master_seed: int,
    subject_offset: int = 0,
) -> list:
    """Simulate subjects and assemble TrainingSamples (slabs or whole volumes)."""
    samples = []
    for s in range(n_subjects):
        idx = subject_offset + s
        subj = simulate_subject(sim, idx, master_seed)
        if sim.slab_len and sim.slab_len > 0:
            stride = sim.slab_stride if sim.slab_stride > 0 else sim.slab_len
            slabs = extract_subvolumes(
                subj.kspace, subj.mask, subj.coils_est, sim.slab_len, stride, subj.truth
            )
        else:
            slabs = [Slab(subj.kspace, subj.mask, subj.coils_est, subj.truth, 0, 0)]
        for slab in slabs:
            split_seed = int(
                np.random.SeedSequence([master_seed, idx, 7, slab.slab_index]).generate_state(1)[0]
            )
            cfg = SplitConfig(
                rho=split.rho,
                sigma=split.sigma,
                keep_acs_in_theta=split.keep_acs_in_theta,
                weight_lambda_center=split.weight_lambda_center,
                seed=split_seed,
            )
            ms = split_gaussian(slab.mask, cfg)
            samples.append(
                TrainingSample(
                    kspace=slab.kspace.astype(np.complex64),
                    coils=CoilSet(slab.coils.maps.astype(np.complex64)),
                    split=ms,
                    ground_truth=None
                    if slab.ground_truth is None
                    else slab.ground_truth.astype(np.complex64),
                    subject_id=subj.subject_id,
                    slab_index=slab.slab_index,
                )
            )
    return samples
