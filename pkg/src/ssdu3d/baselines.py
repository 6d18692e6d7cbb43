"""Conventional reconstruction baselines.

zero_filled is the no-regularization floor (plain adjoint). cs_recon is
iterative soft-thresholding (proximal gradient on the regularized
least-squares objective with an l1 penalty on transform coefficients).
With the orthonormal 3D Haar transform the shrinkage step is the exact
proximal operator; the finite-difference transform is not orthogonal, so
there the update uses the standard approximate divergence-based shrinkage.
"""

from dataclasses import dataclass, field

import numpy as np

from .config import CsSettings
from .errors import ArgumentError, StepSizeError
from .mri import CoilSet, EncodingOperator, adjoint, encode, normal
from .sampling import SamplingMask


def _as_operator(coils, mask) -> EncodingOperator:
    cs = coils if isinstance(coils, CoilSet) else CoilSet(coils)
    m = mask.as_float() if isinstance(mask, SamplingMask) else np.asarray(mask, dtype=np.float64)
    return EncodingOperator(cs, m)


def zero_filled(y_omega: np.ndarray, coils, mask) -> np.ndarray:
    """Adjoint reconstruction E^H y."""
    op = _as_operator(coils, mask)
    return adjoint(op, np.asarray(y_omega, dtype=np.complex128))


def power_iteration(op: EncodingOperator, iters: int = 30, seed: int = 0) -> float:
    """Largest eigenvalue of E^H E (for the safe ISTA step size)."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.dims) + 1j * rng.standard_normal(op.dims)
    x /= np.linalg.norm(x)
    lam = 1.0
    for _ in range(iters):
        z = normal(op, x)
        lam = float(np.linalg.norm(z))
        if lam == 0.0:
            return 0.0
        x = z / lam
    return lam


# --- sparsifying transforms --------------------------------------------------


def _haar_levels(dims) -> int:
    lv = 0
    while lv < 3 and all(d % (2 ** (lv + 1)) == 0 for d in dims):
        lv += 1
    return lv


def _haar1(a: np.ndarray, axis: int) -> np.ndarray:
    lo = (np.take(a, range(0, a.shape[axis], 2), axis) + np.take(a, range(1, a.shape[axis], 2), axis)) / np.sqrt(2.0)
    hi = (np.take(a, range(0, a.shape[axis], 2), axis) - np.take(a, range(1, a.shape[axis], 2), axis)) / np.sqrt(2.0)
    return np.concatenate([lo, hi], axis=axis)


def _ihaar1(a: np.ndarray, axis: int) -> np.ndarray:
    n = a.shape[axis] // 2
    lo = np.take(a, range(0, n), axis)
    hi = np.take(a, range(n, a.shape[axis]), axis)
    out = np.empty_like(a)
    even = (lo + hi) / np.sqrt(2.0)
    odd = (lo - hi) / np.sqrt(2.0)
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(0, None, 2)
    out[tuple(idx)] = even
    idx[axis] = slice(1, None, 2)
    out[tuple(idx)] = odd
    return out


def haar3_forward(x: np.ndarray, levels: int) -> np.ndarray:
    """Orthonormal multi-level 3D Haar transform (in a same-shape array)."""
    out = x.copy()
    dims = list(x.shape)
    for _ in range(levels):
        region = tuple(slice(0, d) for d in dims)
        sub = out[region]
        for ax in range(3):
            sub = _haar1(sub, ax)
        out[region] = sub
        dims = [d // 2 for d in dims]
    return out


def haar3_inverse(c: np.ndarray, levels: int) -> np.ndarray:
    out = c.copy()
    dims = [d // (2 ** (levels - 1)) for d in c.shape] if levels else list(c.shape)
    for _ in range(levels):
        region = tuple(slice(0, d) for d in dims)
        sub = out[region]
        for ax in range(3):
            sub = _ihaar1(sub, ax)
        out[region] = sub
        dims = [d * 2 for d in dims]
    return out


def finite_differences(x: np.ndarray) -> np.ndarray:
    """Periodic forward differences along each axis, stacked to (3, ...)."""
    return np.stack([np.roll(x, -1, axis=a) - x for a in range(3)])


def finite_differences_adjoint(d: np.ndarray) -> np.ndarray:
    return sum(np.roll(d[a], 1, axis=a) - d[a] for a in range(3))


def soft_threshold(c: np.ndarray, tau: float) -> np.ndarray:
    mag = np.abs(c)
    shrink = np.maximum(mag - tau, 0.0)
    return c * np.divide(shrink, mag, out=np.zeros_like(mag), where=mag > 0)


# --- ISTA reconstruction ------------------------------------------------------


@dataclass
class CsResult:
    image: np.ndarray
    objectives: list = field(default_factory=list)
    step: float = 0.0


def cs_objective(op: EncodingOperator, y: np.ndarray, x: np.ndarray, cfg: CsSettings) -> float:
    resid = float(np.linalg.norm(y - encode(op, x)) ** 2)
    if cfg.transform == "wavelet-haar-3d":
        coeffs = haar3_forward(x, _haar_levels(x.shape))
    else:
        coeffs = finite_differences(x)
    return resid + cfg.lam * float(np.abs(coeffs).sum())


def cs_recon(y_omega: np.ndarray, coils, mask, cfg: CsSettings, full_result: bool = False):
    """Proximal-gradient compressed-sensing reconstruction.

    Each iteration takes a gradient step on the data term and shrinks the
    transform coefficients by lam*step. Raises StepSizeError if the
    objective increases for 5 consecutive iterations.
    """
    op = _as_operator(coils, mask)
    y = np.asarray(y_omega, dtype=np.complex128)
    step = cfg.step if cfg.step > 0 else 1.0 / max(power_iteration(op), 1e-12)
    levels = _haar_levels(op.dims)
    tau = cfg.lam * step

    x = np.zeros(op.dims, dtype=np.complex128)
    result = CsResult(x, [], step)
    bad_streak = 0
    prev = np.inf
    for _ in range(cfg.iterations):
        g = x + step * adjoint(op, y - encode(op, x))
        if cfg.transform == "wavelet-haar-3d":
            x = haar3_inverse(soft_threshold(haar3_forward(g, levels), tau), levels)
        else:
            d = finite_differences(g)
            x = g - finite_differences_adjoint(d - soft_threshold(d, tau)) / 12.0
        obj = cs_objective(op, y, x, cfg)
        result.objectives.append(obj)
        bad_streak = bad_streak + 1 if obj > prev else 0
        if bad_streak >= 5:
            raise StepSizeError(
                f"objective increased for {bad_streak} consecutive iterations; reduce the step"
            )
        prev = obj
        result.image = x
    return result if full_result else result.image
