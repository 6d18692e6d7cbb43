"""Training loop: per-sample normalization, Adam updates, loss bookkeeping."""

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import autodiff as ad
from .config import CgSettings, NetworkSettings, SplitSettings, TrainSettings
from .dataio import TrainingSample
from .errors import ArgumentError, DivergenceError
from .losses import ssdu_loss, supervised_loss
from .mri import CoilSet, EncodingOperator, adjoint
from .network import ResNetConfig, UnrolledParams
from .optim import AdamState, adam_step
from .sampling import SplitConfig, split_gaussian

DIVERGENCE_LIMIT = 100.0


def sample_scale(sample: TrainingSample) -> float:
    """Per-sample normalization: 99th percentile of |E^H y| maps to 1."""
    omega = sample.omega().as_float()
    op = EncodingOperator(CoilSet(sample.coils.maps.astype(np.complex128)), omega)
    zf = adjoint(op, omega * sample.kspace.astype(np.complex128))
    p99 = float(np.percentile(np.abs(zf), 99.0))
    if p99 <= 0:
        raise ArgumentError(f"sample {sample.subject_id}/{sample.slab_index} has no signal")
    return p99


def _normalized(sample: TrainingSample, scale: float) -> TrainingSample:
    return TrainingSample(
        kspace=sample.kspace.astype(np.complex128) / scale,
        coils=CoilSet(sample.coils.maps.astype(np.complex128)),
        split=sample.split,
        ground_truth=None
        if sample.ground_truth is None
        else sample.ground_truth.astype(np.complex128) / scale,
        subject_id=sample.subject_id,
        slab_index=sample.slab_index,
    )


@dataclass
class TrainReport:
    epoch_losses: list = field(default_factory=list)
    wall_seconds: float = 0.0
    checkpoint_path: str = ""
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "epoch_losses": self.epoch_losses,
            "wall_seconds": self.wall_seconds,
            "checkpoint_path": self.checkpoint_path,
            "config": self.config,
        }


def train(
    dataset: list,
    train_cfg: TrainSettings,
    net_cfg: Optional[NetworkSettings] = None,
    cg_cfg: Optional[CgSettings] = None,
    split_cfg: Optional[SplitSettings] = None,
    seed: int = 0,
    params: Optional[UnrolledParams] = None,
    progress: Optional[Callable[[int, float], None]] = None,
) -> tuple:
    """Train the unrolled network; returns (UnrolledParams, TrainReport).

    Deterministic for a fixed seed: sample order, parameter init and any
    per-epoch re-splitting all derive from it. Aborts with DivergenceError
    when the loss goes non-finite or beyond DIVERGENCE_LIMIT.
    """
    if not dataset:
        raise ArgumentError("dataset is empty")
    net_cfg = net_cfg or NetworkSettings()
    cg_cfg = cg_cfg or CgSettings()

    if params is None:
        params = UnrolledParams.init(
            ResNetConfig(net_cfg.n_blocks, net_cfg.channels, net_cfg.block_scale),
            mu_init=net_cfg.mu_init,
            seed=seed,
        )
    loss_fn = ssdu_loss if train_cfg.loss_mode == "self_supervised" else supervised_loss

    scales = [sample_scale(s) for s in dataset]
    normalized = [_normalized(s, sc) for s, sc in zip(dataset, scales)]

    state = AdamState(lr=train_cfg.lr)
    arrays = params.named_arrays()
    rng = np.random.default_rng(seed)
    report = TrainReport()
    t0 = time.perf_counter()

    for epoch in range(train_cfg.epochs):
        order = rng.permutation(len(normalized))
        if split_cfg is not None and train_cfg.resplit_each_epoch:
            for i, s in enumerate(normalized):
                reseed = int(
                    np.random.SeedSequence([seed, epoch, i]).generate_state(1)[0]
                )
                s.split = split_gaussian(
                    s.omega(),
                    SplitConfig(
                        rho=split_cfg.rho,
                        sigma=split_cfg.sigma,
                        keep_acs_in_theta=split_cfg.keep_acs_in_theta,
                        weight_lambda_center=split_cfg.weight_lambda_center,
                        seed=reseed,
                    ),
                )

        epoch_losses = []
        for start in range(0, len(order), train_cfg.batch_size):
            batch = order[start : start + train_cfg.batch_size]
            grads_acc = {k: np.zeros_like(v) for k, v in arrays.items()}
            batch_loss = 0.0
            for j in batch:
                params.zero_grads()
                loss = loss_fn(
                    normalized[j], params, T=net_cfg.T, cg_iters=cg_cfg.iters, cg_tol=cg_cfg.tol
                )
                value = loss.item()
                if not np.isfinite(value) or value > DIVERGENCE_LIMIT:
                    raise DivergenceError(
                        f"loss diverged at epoch {epoch} sample {j}: {value}"
                    )
                ad.backward(loss, params=params.named_tensors().values())
                for k, t in params.named_tensors().items():
                    grads_acc[k] += t.grad
                batch_loss += value
                epoch_losses.append(value)
            n = len(batch)
            grads = {k: g / n for k, g in grads_acc.items()}
            adam_step(arrays, grads, state)
        report.epoch_losses.append(float(np.mean(epoch_losses)))
        if progress is not None:
            progress(epoch, report.epoch_losses[-1])

    report.wall_seconds = time.perf_counter() - t0
    return params, report
