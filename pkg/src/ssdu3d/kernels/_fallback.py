"""Pure-NumPy 3x3x3 convolution kernels.

Uses ``sliding_window_view`` plus ``tensordot`` so the heavy lifting lands in
BLAS. Shapes follow the compiled extension exactly: input ``(c_in, x, y, z)``,
weights ``(c_out, c_in, 3, 3, 3)``, cross-correlation with stride 1 and zero
padding 1 (same-size output).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND = "fallback"


def _pad1(t: np.ndarray) -> np.ndarray:
    return np.pad(t, ((0, 0), (1, 1), (1, 1), (1, 1)))


def conv3d_forward(inp: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    win = sliding_window_view(_pad1(inp), (3, 3, 3), axis=(1, 2, 3))
    out = np.tensordot(weight, win, axes=([1, 2, 3, 4], [0, 4, 5, 6]))
    return out + bias[:, None, None, None]


def conv3d_backward_input(grad_out: np.ndarray, weight: np.ndarray) -> np.ndarray:
    # Gradient wrt input is a correlation of grad_out with spatially flipped
    # kernels, with the channel axes of the weights swapped.
    wf = weight[:, :, ::-1, ::-1, ::-1].transpose(1, 0, 2, 3, 4)
    win = sliding_window_view(_pad1(grad_out), (3, 3, 3), axis=(1, 2, 3))
    return np.tensordot(wf, win, axes=([1, 2, 3, 4], [0, 4, 5, 6]))


def conv3d_backward_weight(inp: np.ndarray, grad_out: np.ndarray):
    win = sliding_window_view(_pad1(inp), (3, 3, 3), axis=(1, 2, 3))
    grad_w = np.tensordot(grad_out, win, axes=([1, 2, 3], [1, 2, 3]))
    grad_b = grad_out.sum(axis=(1, 2, 3))
    return grad_w, grad_b
