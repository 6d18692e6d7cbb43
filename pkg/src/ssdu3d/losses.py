"""Training losses: normalized l1-l2 in k-space, self-supervised and supervised."""

import numpy as np

from . import autodiff as ad
from .errors import ArgumentError, DegenerateReferenceError
from .mri import CoilSet, EncodingOperator, encode, encode_t
from .network import UnrolledParams, unrolled_forward


def normalized_l1l2_loss(u: np.ndarray, v: np.ndarray) -> float:
    """||u-v||_2 / ||u||_2 + ||u-v||_1 / ||u||_1 with complex moduli."""
    u = np.asarray(u).ravel()
    v = np.asarray(v).ravel()
    if u.shape != v.shape:
        raise ArgumentError("u and v must have equal lengths")
    n2 = np.linalg.norm(u)
    n1 = np.abs(u).sum()
    if n2 == 0.0:
        raise DegenerateReferenceError("reference vector is zero")
    d = u - v
    return float(np.linalg.norm(d) / n2 + np.abs(d).sum() / n1)


def normalized_l1l2_t(u: np.ndarray, v: ad.Tensor) -> ad.Tensor:
    """Tape version; the reference u is a constant, gradients flow into v."""
    u = np.asarray(u)
    n2 = float(np.linalg.norm(u))
    n1 = float(np.abs(u).sum())
    if n2 == 0.0:
        raise DegenerateReferenceError("reference vector is zero")
    d = ad.sub(ad.Tensor(u), v)
    l2 = ad.sqrt(ad.vdot_real(d, d))
    l1 = ad.tsum(ad.absolute(d))
    return l2 * (1.0 / n2) + l1 * (1.0 / n1)


def _check_sample(sample) -> None:
    if sample.split is None:
        raise ArgumentError("sample carries no mask split")
    if not np.any(sample.split.lam.bits):
        raise ArgumentError("lambda set is empty")


def ssdu_loss(
    sample,
    params: UnrolledParams,
    T: int = 5,
    cg_iters: int = 10,
    cg_tol: float = 1e-6,
) -> ad.Tensor:
    """Self-supervised loss: reconstruct from theta, compare k-space on lambda."""
    _check_sample(sample)
    coils = sample.coils if isinstance(sample.coils, CoilSet) else CoilSet(sample.coils)
    theta = sample.split.theta.as_float()
    lam = sample.split.lam.as_float()
    kspace = np.asarray(sample.kspace, dtype=np.complex128)

    op_theta = EncodingOperator(coils, theta)
    op_lam = EncodingOperator(coils, lam)
    x_hat = unrolled_forward(theta * kspace, op_theta, params, T, cg_iters, cg_tol)
    y_hat_lam = encode_t(op_lam, x_hat)
    return normalized_l1l2_t(lam * kspace, y_hat_lam)


def supervised_loss(
    sample,
    params: UnrolledParams,
    T: int = 5,
    cg_iters: int = 10,
    cg_tol: float = 1e-6,
) -> ad.Tensor:
    """Reference loss against fully sampled k-space of the ground truth.

    Only meaningful on simulated data; the network still sees only the
    acquired samples (omega), the reference covers every k-space location.
    """
    _check_sample(sample)
    if sample.ground_truth is None:
        raise ArgumentError("sample has no ground truth")
    coils = sample.coils if isinstance(sample.coils, CoilSet) else CoilSet(sample.coils)
    omega = sample.split.omega_bits().astype(np.float64)
    kspace = np.asarray(sample.kspace, dtype=np.complex128)

    op_omega = EncodingOperator(coils, omega)
    op_full = EncodingOperator(coils, np.ones_like(omega))
    x_hat = unrolled_forward(omega * kspace, op_omega, params, T, cg_iters, cg_tol)
    y_ref = encode(op_full, np.asarray(sample.ground_truth, dtype=np.complex128))
    y_hat = encode_t(op_full, x_hat)
    return normalized_l1l2_t(y_ref, y_hat)
