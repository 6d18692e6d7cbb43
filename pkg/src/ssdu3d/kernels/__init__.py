"""3D convolution kernels with backend selection at import time.

The compiled Cython extension is preferred when present; otherwise the
NumPy fallback is used. Set ``SSDU3D_KERNELS=fallback`` (or ``compiled``)
to force a backend. Both implement the identical contract: 3x3x3
cross-correlation, stride 1, zero padding 1, float64.
"""

import os

import numpy as np

from ..errors import ArgumentError
from . import _fallback

_choice = os.environ.get("SSDU3D_KERNELS", "auto").lower()
if _choice not in ("auto", "compiled", "fallback"):
    raise ArgumentError(f"SSDU3D_KERNELS must be auto/compiled/fallback, got {_choice!r}")

if _choice == "fallback":
    _impl = _fallback
else:
    try:
        from . import _conv3d as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = _fallback

BACKEND: str = _impl.BACKEND


def get_backends() -> dict:
    """Importable backends keyed by name (used by the benchmark)."""
    out = {"fallback": _fallback}
    try:
        from . import _conv3d

        out["compiled"] = _conv3d
    except ImportError:
        pass
    return out


def _as_f64(a, name):
    a = np.ascontiguousarray(a, dtype=np.float64)
    return a


def _validate(inp, weight, bias):
    if inp.ndim != 4:
        raise ArgumentError(f"input must be (c_in, nx, ny, nz), got shape {inp.shape}")
    if weight.ndim != 5 or weight.shape[2:] != (3, 3, 3):
        raise ArgumentError(f"weights must be (c_out, c_in, 3, 3, 3), got {weight.shape}")
    if weight.shape[1] != inp.shape[0]:
        raise ArgumentError(
            f"channel mismatch: input has {inp.shape[0]} channels, kernels expect {weight.shape[1]}"
        )
    if bias.shape != (weight.shape[0],):
        raise ArgumentError(f"bias must have shape ({weight.shape[0]},), got {bias.shape}")
    if min(inp.shape[1:]) < 1:
        raise ArgumentError("spatial dims must be >= 1")


def conv3d(inp: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-size 3D convolution: out[o] = sum_i inp[i] (star) weight[o,i] + bias[o]."""
    inp = _as_f64(inp, "input")
    weight = _as_f64(weight, "weight")
    bias = _as_f64(bias, "bias")
    _validate(inp, weight, bias)
    return _impl.conv3d_forward(inp, weight, bias)


def conv3d_forward(inp, weight, bias):
    return _impl.conv3d_forward(
        np.ascontiguousarray(inp), np.ascontiguousarray(weight), np.ascontiguousarray(bias)
    )


def conv3d_backward_input(grad_out, weight):
    return _impl.conv3d_backward_input(
        np.ascontiguousarray(grad_out), np.ascontiguousarray(weight)
    )


def conv3d_backward_weight(inp, grad_out):
    return _impl.conv3d_backward_weight(
        np.ascontiguousarray(inp), np.ascontiguousarray(grad_out)
    )
