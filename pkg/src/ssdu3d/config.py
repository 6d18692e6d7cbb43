"""Run configuration: defaults, JSON loading, and hashing.

Defaults are desk scale: a 32x64x48 grid with 8 coils stands in for the
clinical geometry at roughly a fifth of the matrix per axis, and the
prospective/retrospective ACS blocks are scaled the same way.
"""

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional

from .errors import ArgumentError


@dataclass
class SimSettings:
    dims: tuple = (32, 64, 48)
    n_coils: int = 8
    noise_sigma: float = 0.01
    readout_axis: int = 0
    rate: int = 6
    acs_r3: tuple = (12, 8)
    acs_r6: tuple = (8, 8)
    slab_len: int = 0  # 0 keeps whole volumes
    slab_stride: int = 0  # 0 means non-overlapping (stride = slab_len)
    n_ellipsoids: int = 12
    use_true_maps: bool = False


@dataclass
class SplitSettings:
    rho: float = 0.4
    sigma: Optional[tuple] = None  # None: dim/4 per axis
    keep_acs_in_theta: bool = True
    weight_lambda_center: bool = True


@dataclass
class NetworkSettings:
    n_blocks: int = 8
    channels: int = 32
    block_scale: float = 0.1
    mu_init: float = 0.05
    T: int = 5


@dataclass
class CgSettings:
    iters: int = 10
    tol: float = 1e-6


@dataclass
class TrainSettings:
    lr: float = 5e-4
    epochs: int = 100
    batch_size: int = 1
    loss_mode: str = "self_supervised"
    resplit_each_epoch: bool = False

    def __post_init__(self):
        if self.lr < 0 or self.epochs < 1 or self.batch_size < 1:
            raise ArgumentError("lr must be >= 0, epochs and batch_size >= 1")
        if self.loss_mode not in ("self_supervised", "supervised"):
            raise ArgumentError(f"unknown loss mode {self.loss_mode!r}")


@dataclass
class CsSettings:
    transform: str = "wavelet-haar-3d"
    lam: float = 2e-3
    iterations: int = 60
    step: float = 0.0  # 0: use 1 / power-iteration estimate of ||E^H E||

    def __post_init__(self):
        if self.lam < 0 or self.iterations < 1:
            raise ArgumentError("lam must be >= 0 and iterations >= 1")
        if self.transform not in ("wavelet-haar-3d", "finite-differences-3d"):
            raise ArgumentError(f"unknown transform {self.transform!r}")


@dataclass
class RunConfig:
    sim: SimSettings = field(default_factory=SimSettings)
    split: SplitSettings = field(default_factory=SplitSettings)
    network: NetworkSettings = field(default_factory=NetworkSettings)
    cg: CgSettings = field(default_factory=CgSettings)
    train: TrainSettings = field(default_factory=TrainSettings)
    cs: CsSettings = field(default_factory=CsSettings)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(cls, values: dict):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for k, v in values.items():
        if k not in fields:
            raise ArgumentError(f"unknown config key {k!r} for {cls.__name__}")
        if isinstance(v, list):
            v = tuple(v)
        kwargs[k] = v
    return cls(**kwargs)


def config_from_dict(d: dict) -> RunConfig:
    sections = {
        "sim": SimSettings,
        "split": SplitSettings,
        "network": NetworkSettings,
        "cg": CgSettings,
        "train": TrainSettings,
        "cs": CsSettings,
    }
    kwargs = {}
    for name, value in d.items():
        if name not in sections:
            raise ArgumentError(f"unknown config section {name!r}")
        kwargs[name] = _coerce(sections[name], value)
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    with open(path) as f:
        return config_from_dict(json.load(f))
