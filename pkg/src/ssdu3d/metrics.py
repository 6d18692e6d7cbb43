"""Image-quality metrics against a known ground truth."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DegenerateReferenceError

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check(x, ref):
    x = np.asarray(x)
    ref = np.asarray(ref)
    if x.shape != ref.shape:
        raise ArgumentError(f"shape mismatch: {x.shape} vs {ref.shape}")
    return x, ref


def nmse(x: np.ndarray, ref: np.ndarray) -> float:
    """||x - ref||^2 / ||ref||^2 on the complex volumes."""
    x, ref = _check(x, ref)
    denom = float(np.linalg.norm(ref) ** 2)
    if denom == 0.0:
        raise DegenerateReferenceError("reference volume is zero")
    return float(np.linalg.norm(x - ref) ** 2 / denom)


def psnr(x: np.ndarray, ref: np.ndarray) -> float:
    """20*log10(max|ref| / rmse) on magnitude volumes, capped at 99 dB."""
    x, ref = _check(x, ref)
    peak = float(np.max(np.abs(ref)))
    if peak == 0.0:
        raise DegenerateReferenceError("reference volume is zero")
    rmse = float(np.sqrt(np.mean((np.abs(x) - np.abs(ref)) ** 2)))
    if rmse == 0.0:
        return PSNR_CAP_DB
    return min(20.0 * np.log10(peak / rmse), PSNR_CAP_DB)


def _box_sums(a: np.ndarray, w: int) -> np.ndarray:
    """Sums over all w^3 windows fully inside the volume (valid mode)."""
    for ax in range(3):
        c = np.cumsum(a, axis=ax)
        pad_shape = list(c.shape)
        pad_shape[ax] = 1
        c = np.concatenate([np.zeros(pad_shape), c], axis=ax)
        hi = [slice(None)] * 3
        lo = [slice(None)] * 3
        hi[ax] = slice(w, None)
        lo[ax] = slice(0, -w)
        a = c[tuple(hi)] - c[tuple(lo)]
    return a


def ssim(x: np.ndarray, ref: np.ndarray, window: int = SSIM_WINDOW) -> float:
    """Mean 3D SSIM over valid windows; magnitudes scaled by the reference max."""
    x, ref = _check(x, ref)
    peak = float(np.max(np.abs(ref)))
    if peak == 0.0:
        raise DegenerateReferenceError("reference volume is zero")
    if any(d < window for d in x.shape):
        raise ArgumentError(f"volume {x.shape} smaller than the {window}^3 SSIM window")
    a = np.abs(x) / peak
    b = np.abs(ref) / peak

    n = float(window**3)
    mu_a = _box_sums(a, window) / n
    mu_b = _box_sums(b, window) / n
    var_a = _box_sums(a * a, window) / n - mu_a**2
    var_b = _box_sums(b * b, window) / n - mu_b**2
    cov = _box_sums(a * b, window) / n - mu_a * mu_b

    c1 = SSIM_K1**2  # dynamic range is 1 after scaling
    c2 = SSIM_K2**2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass
class VolumeMetrics:
    subject_id: str
    psnr_db: float
    ssim: float
    nmse: float

    def to_dict(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "psnr_db": self.psnr_db,
            "ssim": self.ssim,
            "nmse": self.nmse,
        }


@dataclass
class MethodReport:
    label: str
    R: float
    runtime_seconds: float
    volumes: list = field(default_factory=list)

    def mean(self, key: str) -> float:
        return float(np.mean([getattr(v, key) for v in self.volumes]))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "R": self.R,
            "runtime_seconds": self.runtime_seconds,
            "per_volume": [v.to_dict() for v in self.volumes],
            "mean_psnr_db": self.mean("psnr_db"),
            "mean_ssim": self.mean("ssim"),
            "mean_nmse": self.mean("nmse"),
        }


def score_volume(subject_id: str, x: np.ndarray, ref: np.ndarray) -> VolumeMetrics:
    return VolumeMetrics(subject_id, psnr(x, ref), ssim(x, ref), nmse(x, ref))
