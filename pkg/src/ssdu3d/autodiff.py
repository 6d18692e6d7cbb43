"""Reverse-mode automatic differentiation over whole NumPy tensors.

Losses are real scalars. For a complex tensor ``z = x + iy`` the stored
gradient packs the two real partials as ``dL/dx + i*dL/dy``, so a gradient
step on the real and imaginary parts is plain subtraction and
finite-difference checks perturb the two parts independently. Chain rules
below follow from ``dL = Re(conj(g) * dz)``.

The graph is a tape: nodes are created in execution order and creation
order is a valid topological order, so backward just walks ids downward.
This keeps backward iterative (no recursion limit) and bitwise
deterministic.
"""

import itertools
from contextlib import contextmanager

import numpy as np

from . import fft as _fft
from . import kernels as _kernels
from .errors import ArgumentError

_ids = itertools.count()
_grad_enabled = True


@contextmanager
def no_grad():
    """Disable taping inside the block (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """One tape node: a value, its parents and the rule producing parent grads."""

    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_rule", "tid", "name")

    def __init__(self, data, requires_grad=False, parents=(), backward_rule=None, name=""):
        self.data = np.asarray(data)
        self.grad = None
        self.parents = tuple(parents)
        self.backward_rule = backward_rule
        self.requires_grad = requires_grad or any(p.requires_grad for p in self.parents)
        self.tid = next(_ids)
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(np.real(self.data))

    def __float__(self) -> float:
        return self.item()

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, name={self.name!r})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _node(data, parents, rule, name="") -> Tensor:
    """Create an op output; outside no_grad the parents/rule are recorded."""
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, parents=parents, backward_rule=rule, name=name)
    return Tensor(data, name=name)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum g down to `shape` (inverse of NumPy broadcasting)."""
    g = np.asarray(g)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _accumulate(store: dict, node: Tensor, contrib: np.ndarray) -> None:
    g = _unbroadcast(contrib, node.data.shape)
    if not np.iscomplexobj(node.data) and np.iscomplexobj(g):
        g = g.real
    prev = store.get(node.tid)
    store[node.tid] = g.copy() if prev is None else prev + g


def backward(loss: Tensor, params=None) -> dict:
    """Run the tape backward from a real scalar loss.

    Returns a map from Tensor to gradient array for every requires_grad
    leaf encountered; `params` (optional iterable of Tensors) guarantees an
    entry (zeros if unreachable) and the `.grad` attribute is set on every
    node that received a gradient.
    """
    if loss.data.size != 1 or np.iscomplexobj(loss.data):
        raise ArgumentError("loss must be a real scalar node")
    # Collect the reachable subgraph once, then sweep by descending id.
    nodes = {}
    stack = [loss]
    while stack:
        n = stack.pop()
        if n.tid in nodes:
            continue
        nodes[n.tid] = n
        stack.extend(n.parents)

    grads: dict = {loss.tid: np.ones_like(loss.data, dtype=np.float64)}
    leaves: dict = {}
    for tid in sorted(nodes, reverse=True):
        node = nodes[tid]
        g = grads.pop(tid, None)
        if g is None:
            continue
        node.grad = g
        if node.backward_rule is None:
            if node.requires_grad:
                leaves[node] = g
            continue
        for parent, contrib in zip(node.parents, node.backward_rule(g)):
            if parent.requires_grad and contrib is not None:
                _accumulate(grads, parent, contrib)
    if params is not None:
        for p in params:
            if p not in leaves:
                zero = np.zeros_like(p.data)
                p.grad = zero
                leaves[p] = zero
    return leaves


# ---------------------------------------------------------------------------
# elementwise / scalar ops


def add(a, b):
    a, b = _wrap(a), _wrap(b)
    return _node(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    return _node(a.data - b.data, (a, b), lambda g: (g, -g))


def neg(a):
    a = _wrap(a)
    return _node(-a.data, (a,), lambda g: (-g,))


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    ad, bd = a.data, b.data
    return _node(ad * bd, (a, b), lambda g: (g * np.conj(bd), g * np.conj(ad)))


def div(a, b):
    a, b = _wrap(a), _wrap(b)
    ad, bd = a.data, b.data
    return _node(
        ad / bd,
        (a, b),
        lambda g: (g * np.conj(1.0 / bd), g * np.conj(-ad / (bd * bd))),
    )


def conj(a):
    a = _wrap(a)
    return _node(np.conj(a.data), (a,), lambda g: (np.conj(g),))


def real(a):
    a = _wrap(a)
    return _node(a.data.real.copy(), (a,), lambda g: (g,))


def imag(a):
    a = _wrap(a)
    return _node(a.data.imag.copy(), (a,), lambda g: (1j * g,))


def make_complex(re, im):
    re, im = _wrap(re), _wrap(im)
    return _node(re.data + 1j * im.data, (re, im), lambda g: (g.real, g.imag))


def absolute(a):
    a = _wrap(a)
    ad = a.data
    mag = np.abs(ad)

    def rule(g):
        # Subgradient 0 at exact zeros.
        phase = np.divide(ad, mag, out=np.zeros_like(ad), where=mag > 0)
        return (g * phase,)

    return _node(mag, (a,), rule)


def tsum(a):
    a = _wrap(a)
    shape = a.data.shape
    return _node(np.sum(a.data), (a,), lambda g: (np.broadcast_to(g, shape),))


def vdot_real(a, b):
    """Re(<a, b>) as a real scalar node; grads are g*b and g*a."""
    a, b = _wrap(a), _wrap(b)
    ad, bd = a.data, b.data
    val = np.vdot(ad, bd).real
    return _node(val, (a, b), lambda g: (g * bd, g * ad))


def sqrt(a):
    a = _wrap(a)
    root = np.sqrt(a.data)

    def rule(g):
        d = np.divide(0.5, root, out=np.zeros_like(root), where=root > 0)
        return (g * d,)

    return _node(root, (a,), rule)


def exp(a):
    a = _wrap(a)
    e = np.exp(a.data)
    return _node(e, (a,), lambda g: (g * e,))


def relu(a):
    a = _wrap(a)
    mask = a.data > 0
    return _node(a.data * mask, (a,), lambda g: (g * mask,))


# ---------------------------------------------------------------------------
# structural ops bridging complex volumes and real channel stacks


def channels_from_complex(a):
    """(..., nx, ny, nz) complex -> (2, nx, ny, nz) real channel stack."""
    a = _wrap(a)
    val = np.stack([a.data.real, a.data.imag])
    return _node(val, (a,), lambda g: (g[0] + 1j * g[1],))


def complex_from_channels(a):
    """(2, nx, ny, nz) real -> complex volume."""
    a = _wrap(a)
    if a.data.shape[0] != 2:
        raise ArgumentError(f"expected 2 channels, got {a.data.shape[0]}")
    val = a.data[0] + 1j * a.data[1]
    return _node(val, (a,), lambda g: (np.stack([g.real, g.imag]),))


# ---------------------------------------------------------------------------
# spectral and convolution ops


def fft3c(a):
    a = _wrap(a)
    return _node(_fft.fft3_centered(a.data), (a,), lambda g: (_fft.ifft3_centered(g),))


def ifft3c(a):
    a = _wrap(a)
    return _node(_fft.ifft3_centered(a.data), (a,), lambda g: (_fft.fft3_centered(g),))


def fft_axis(a, axis: int):
    a = _wrap(a)
    return _node(_fft.fft_axis(a.data, axis), (a,), lambda g: (_fft.ifft_axis(g, axis),))


def ifft_axis(a, axis: int):
    a = _wrap(a)
    return _node(_fft.ifft_axis(a.data, axis), (a,), lambda g: (_fft.fft_axis(g, axis),))


def conv3d(inp, weight, bias):
    """Tape wrapper around the selected convolution backend (real tensors)."""
    inp, weight, bias = _wrap(inp), _wrap(weight), _wrap(bias)
    for t in (inp, weight, bias):
        if np.iscomplexobj(t.data):
            raise ArgumentError("conv3d operates on real tensors; bridge complex volumes first")
    val = _kernels.conv3d(inp.data, weight.data, bias.data)
    idata, wdata = inp.data, weight.data

    def rule(g):
        g = np.ascontiguousarray(g, dtype=np.float64)
        gi = _kernels.conv3d_backward_input(g, wdata) if inp.requires_grad else None
        if weight.requires_grad or bias.requires_grad:
            gw, gb = _kernels.conv3d_backward_weight(idata, g)
        else:
            gw = gb = None
        return (gi, gw, gb)

    return _node(val, (inp, weight, bias), rule)
