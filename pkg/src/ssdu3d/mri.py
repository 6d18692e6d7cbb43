"""Multi-coil encoding operator and coil-sensitivity estimation.

The forward model maps an image volume to per-coil masked k-space:
``y_c = M * F(s_c * x)`` with ``F`` the centered unitary 3D DFT, ``s_c`` the
coil sensitivity and ``M`` the binary sampling pattern. The adjoint is
``sum_c conj(s_c) * F^H(M * y_c)``. Because F is unitary and masks/maps are
applied pointwise, adjointness holds to rounding error, which is what the
conjugate-gradient data-consistency solver relies on.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ArgumentError
from .fft import fft3_centered, ifft3_centered

RSS_FLOOR = 1e-8


@dataclass
class CoilSet:
    """Per-coil complex sensitivity volumes, stacked as (n_coils, nx, ny, nz)."""

    maps: np.ndarray

    def __post_init__(self):
        self.maps = np.asarray(self.maps)
        if self.maps.ndim != 4:
            raise ArgumentError(f"coil maps must be (n_coils, nx, ny, nz), got {self.maps.shape}")

    @property
    def n_coils(self) -> int:
        return self.maps.shape[0]

    @property
    def dims(self) -> tuple:
        return self.maps.shape[1:]

    def rss(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.maps) ** 2, axis=0))


@dataclass
class EncodingOperator:
    """E = mask o FFT o coil weighting; swap the mask to get E_theta, E_lambda, E_full."""

    coils: CoilSet
    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask)
        if self.mask.shape != self.coils.dims:
            raise ArgumentError(
                f"mask dims {self.mask.shape} do not match coil dims {self.coils.dims}"
            )

    @property
    def dims(self) -> tuple:
        return self.coils.dims


def encode(op: EncodingOperator, x: np.ndarray) -> np.ndarray:
    """Forward model: per-coil masked k-space of image x; exactly zero off-mask.

    Parameters
    ----------
    op : EncodingOperator
    x : (nx, ny, nz) complex image volume

    Returns
    -------
    (n_coils, nx, ny, nz) complex k-space
    """
    x = np.asarray(x)
    if x.shape != op.dims:
        raise ArgumentError(f"image dims {x.shape} do not match operator dims {op.dims}")
    return op.mask * fft3_centered(op.coils.maps * x)


def adjoint(op: EncodingOperator, y: np.ndarray) -> np.ndarray:
    """Adjoint model: coil-combined image from per-coil k-space.

    Parameters
    ----------
    op : EncodingOperator
    y : (n_coils, nx, ny, nz) complex k-space

    Returns
    -------
    (nx, ny, nz) complex image volume
    """
    y = np.asarray(y)
    if y.shape != (op.coils.n_coils, *op.dims):
        raise ArgumentError(f"k-space shape {y.shape} does not match operator")
    return np.sum(np.conj(op.coils.maps) * ifft3_centered(op.mask * y), axis=0)


def normal(op: EncodingOperator, x: np.ndarray) -> np.ndarray:
    """E^H E applied to an image volume."""
    return adjoint(op, encode(op, x))


# --- tape-recorded variants -------------------------------------------------
# encode/adjoint are mutual adjoints, so each one's backward rule is the other.


def encode_t(op: EncodingOperator, x: ad.Tensor) -> ad.Tensor:
    return ad._node(encode(op, x.data), (x,), lambda g: (adjoint(op, g),))


def adjoint_t(op: EncodingOperator, y: ad.Tensor) -> ad.Tensor:
    return ad._node(adjoint(op, y.data), (y,), lambda g: (encode(op, g),))


def normal_t(op: EncodingOperator, x: ad.Tensor, mu: ad.Tensor) -> ad.Tensor:
    """(E^H E + mu I) x as one fused tape op.

    Recomputes E^H E in the backward pass instead of keeping the coil-sized
    intermediates alive, which keeps the unrolled-CG tape small.
    """
    val = normal(op, x.data) + mu.data * x.data
    xd, mud = x.data, mu.data

    def rule(g):
        gx = normal(op, g) + np.conj(mud) * g
        gmu = np.vdot(g, xd).real
        return (gx, gmu)

    return ad._node(val, (x, mu), rule)


# --- coil-map estimation ----------------------------------------------------


def _raised_cosine_taper(n_full: int, extent: int, taper: float = 0.5) -> np.ndarray:
    """Apodization along one axis: 1 over the ACS interior, raised-cosine
    roll-off over the outer `taper` fraction, 0 outside the ACS extent."""
    w = np.zeros(n_full)
    start = n_full // 2 - extent // 2
    edge = max(int(round(extent * taper / 2.0)), 1) if extent > 2 else 0
    block = np.ones(extent)
    if edge:
        ramp = 0.5 * (1.0 - np.cos(np.pi * (np.arange(edge) + 0.5) / edge))
        block[:edge] = ramp
        block[-edge:] = ramp[::-1]
    w[start : start + extent] = block
    return w


def estimate_coil_maps(
    acs_kspace: np.ndarray,
    full_dims: tuple,
    acs: tuple,
    readout_axis: int = 0,
) -> CoilSet:
    """Estimate sensitivities from the autocalibration block.

    The ACS block (full readout extent, centered ``acs = (height, width)``
    in the phase-encode plane) is zero-filled to ``full_dims``, apodized
    with a separable raised cosine to suppress ringing, inverse-transformed
    per coil and normalized by the root-sum-of-squares across coils with a
    small floor.

    Parameters
    ----------
    acs_kspace : (n_coils,) + full_dims complex
        k-space containing at least the ACS block (other entries ignored).
    full_dims : target volume dims
    acs : (height, width) extents in the two non-readout axes
    readout_axis : fully sampled axis (0, 1 or 2)

    Returns
    -------
    CoilSet with unit RSS wherever signal is present.
    """
    acs_kspace = np.asarray(acs_kspace)
    if acs_kspace.ndim != 4 or acs_kspace.shape[1:] != tuple(full_dims):
        raise ArgumentError(
            f"acs_kspace must be (n_coils,) + {tuple(full_dims)}, got {acs_kspace.shape}"
        )
    h, w = acs
    if h < 1 or w < 1:
        raise ArgumentError("ACS extents must be positive")
    plane_axes = [a for a in range(3) if a != readout_axis]
    dims = tuple(full_dims)
    if h > dims[plane_axes[0]] or w > dims[plane_axes[1]]:
        raise ArgumentError(f"ACS block {acs} exceeds plane dims")

    window = np.ones(dims)
    shape_a = [1, 1, 1]
    shape_a[plane_axes[0]] = dims[plane_axes[0]]
    shape_b = [1, 1, 1]
    shape_b[plane_axes[1]] = dims[plane_axes[1]]
    window = window * _raised_cosine_taper(dims[plane_axes[0]], h).reshape(shape_a)
    window = window * _raised_cosine_taper(dims[plane_axes[1]], w).reshape(shape_b)

    low = acs_kspace * window
    if not np.any(low):
        raise ArgumentError("ACS block is empty (all zero)")
    images = ifft3_centered(low)
    rss = np.sqrt(np.sum(np.abs(images) ** 2, axis=0))
    maps = images / np.maximum(rss, RSS_FLOOR)
    return CoilSet(maps)
