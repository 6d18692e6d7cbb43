"""Centered orthonormal Fourier transforms.

One convention is used everywhere: the DC sample sits at index ``n // 2``
on every axis, and all transforms are unitary (``norm="ortho"``), so the
adjoint of the forward transform is the inverse transform. Arrays may carry
leading batch/coil axes; the 3D transforms act on the last three axes.
"""

import numpy as np

from .errors import ArgumentError, SizingError

# Guard against accidentally huge allocations; tests may patch this down.
MAX_ELEMENTS = 1 << 27


def _check_size(v: np.ndarray) -> None:
    if v.ndim < 3:
        raise ArgumentError(f"expected at least 3 axes, got shape {v.shape}")
    if v.size > MAX_ELEMENTS:
        raise SizingError(f"volume of {v.size} elements exceeds limit {MAX_ELEMENTS}")


def fft3_centered(v: np.ndarray) -> np.ndarray:
    """Unitary 3D DFT over the last three axes, DC at the center index."""
    _check_size(v)
    axes = (-3, -2, -1)
    return np.fft.fftshift(
        np.fft.fftn(np.fft.ifftshift(v, axes=axes), axes=axes, norm="ortho"), axes=axes
    )


def ifft3_centered(v: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`fft3_centered`."""
    _check_size(v)
    axes = (-3, -2, -1)
    return np.fft.fftshift(
        np.fft.ifftn(np.fft.ifftshift(v, axes=axes), axes=axes, norm="ortho"), axes=axes
    )


def _resolve_axis(v: np.ndarray, axis: int) -> int:
    # Spatial axes are the last three; axis indices 0..2 address them so the
    # same call works for (nx,ny,nz) volumes and (coil,nx,ny,nz) stacks.
    if axis not in (0, 1, 2):
        raise ArgumentError(f"axis must be 0, 1 or 2, got {axis}")
    return v.ndim - 3 + axis


def fft_axis(v: np.ndarray, axis: int) -> np.ndarray:
    """Centered unitary 1D DFT along one spatial axis."""
    _check_size(v)
    ax = _resolve_axis(v, axis)
    return np.fft.fftshift(
        np.fft.fft(np.fft.ifftshift(v, axes=ax), axis=ax, norm="ortho"), axes=ax
    )


def ifft_axis(v: np.ndarray, axis: int) -> np.ndarray:
    """Centered unitary 1D inverse DFT along one spatial axis."""
    _check_size(v)
    ax = _resolve_axis(v, axis)
    return np.fft.fftshift(
        np.fft.ifft(np.fft.ifftshift(v, axes=ax), axis=ax, norm="ortho"), axes=ax
    )
