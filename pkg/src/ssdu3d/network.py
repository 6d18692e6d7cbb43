"""Physics-guided unrolled network: 3D ResNet regularizer + CG data consistency.

One reconstruction is T alternations of

    z_i = resnet(x_{i-1})                   (regularizer proxy)
    x_i = argmin ||y - E x||^2 + mu ||x - z_i||^2   (solved by CG)

with a single ResNet shared across all unrolls and the penalty mu trained
as exp(nu) to stay positive. The CG loop runs on the autodiff tape, so the
backward pass differentiates exactly the truncated solver that executed.
"""

import binascii
import hashlib
import json
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from .errors import ArgumentError, ChecksumError, FormatError, NumericError, VersionError
from .mri import EncodingOperator, adjoint_t, encode_t, normal_t


@dataclass
class ResNetConfig:
    n_blocks: int = 8
    channels: int = 32
    block_scale: float = 0.1

    def __post_init__(self):
        if self.n_blocks < 1 or self.channels < 1:
            raise ArgumentError("n_blocks and channels must be >= 1")


class ResNetParams:
    """Trainable tensors of the regularizer network.

    Layout: input projection (2 -> c), n_blocks residual blocks of two
    3x3x3 convolutions each, output projection (c -> 2). All kernels are
    3x3x3; the per-block residual is scaled by a fixed constant.
    """

    def __init__(self, cfg: ResNetConfig, tensors: dict):
        self.cfg = cfg
        self.tensors = tensors

    @classmethod
    def init(cls, cfg: ResNetConfig, seed: int = 0) -> "ResNetParams":
        rng = np.random.default_rng(seed)
        c = cfg.channels

        def conv_init(c_out, c_in):
            scale = np.sqrt(2.0 / (c_in * 27))
            return rng.normal(0.0, scale, size=(c_out, c_in, 3, 3, 3))

        t = {"conv_in.w": conv_init(c, 2), "conv_in.b": np.zeros(c)}
        for b in range(cfg.n_blocks):
            t[f"block{b}.conv1.w"] = conv_init(c, c)
            t[f"block{b}.conv1.b"] = np.zeros(c)
            t[f"block{b}.conv2.w"] = conv_init(c, c)
            t[f"block{b}.conv2.b"] = np.zeros(c)
        t["conv_out.w"] = conv_init(2, c)
        t["conv_out.b"] = np.zeros(2)
        tensors = {k: ad.Tensor(v, requires_grad=True, name=k) for k, v in t.items()}
        return cls(cfg, tensors)

    @classmethod
    def zeros(cls, cfg: ResNetConfig) -> "ResNetParams":
        p = cls.init(cfg, seed=0)
        for t in p.tensors.values():
            t.data[...] = 0.0
        return p


class UnrolledParams:
    """All trainable quantities: the shared ResNet and the penalty mu = exp(nu)."""

    def __init__(self, resnet: ResNetParams, nu: ad.Tensor):
        self.resnet = resnet
        self.nu = nu

    @classmethod
    def init(cls, cfg: ResNetConfig, mu_init: float = 0.05, seed: int = 0) -> "UnrolledParams":
        if mu_init <= 0:
            raise ArgumentError("mu_init must be positive")
        nu = ad.Tensor(np.float64(np.log(mu_init)), requires_grad=True, name="nu")
        return cls(ResNetParams.init(cfg, seed), nu)

    @property
    def mu(self) -> float:
        return float(np.exp(self.nu.data))

    def named_tensors(self) -> dict:
        out = dict(self.resnet.tensors)
        out["nu"] = self.nu
        return out

    def named_arrays(self) -> dict:
        return {k: t.data for k, t in self.named_tensors().items()}

    def zero_grads(self) -> None:
        for t in self.named_tensors().values():
            t.grad = None


def regularizer_apply(x: ad.Tensor, p: ResNetParams) -> ad.Tensor:
    """ResNet denoising proxy on a complex volume, with global skip."""
    if min(x.data.shape) < 3:
        raise ArgumentError(f"volume dims {x.data.shape} too small for 3x3x3 kernels")
    t = p.tensors
    h = ad.conv3d(ad.channels_from_complex(x), t["conv_in.w"], t["conv_in.b"])
    for b in range(p.cfg.n_blocks):
        r = ad.conv3d(h, t[f"block{b}.conv1.w"], t[f"block{b}.conv1.b"])
        r = ad.conv3d(ad.relu(r), t[f"block{b}.conv2.w"], t[f"block{b}.conv2.b"])
        h = h + p.cfg.block_scale * r
    out = ad.conv3d(h, t["conv_out.w"], t["conv_out.b"])
    return x + ad.complex_from_channels(out)


@dataclass
class DcProblem:
    """One data-consistency subproblem (E^H E + mu I) x = rhs + mu z."""

    rhs: ad.Tensor  # E^H y, constant within a reconstruction
    op: EncodingOperator
    mu: ad.Tensor
    z: ad.Tensor
    cg_iters: int = 10
    cg_tol: float = 1e-6

    def __post_init__(self):
        if self.cg_iters < 1:
            raise ArgumentError("cg_iters must be >= 1")
        if float(np.real(self.mu.data)) <= 0:
            raise ArgumentError("mu must be positive")


@dataclass
class DcInfo:
    residuals: list = field(default_factory=list)
    iterations: int = 0

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else 0.0


def dc_solve(prob: DcProblem) -> tuple:
    """Conjugate gradient on the normal equations, initialized at z.

    Returns (x, DcInfo); DcInfo.residuals holds the relative residual after
    each iteration. The loop is recorded on the tape, so gradients flow
    through the CG coefficients.
    """
    for t in (prob.rhs, prob.z):
        if not np.all(np.isfinite(t.data)):
            raise NumericError("non-finite input to dc_solve")
    if not np.isfinite(prob.mu.data):
        raise NumericError("non-finite mu")

    b = prob.rhs + prob.mu * prob.z
    x = prob.z
    r = b - normal_t(prob.op, x, prob.mu)
    p = r
    rs = ad.vdot_real(r, r)
    b_norm = float(np.sqrt(np.vdot(b.data, b.data).real))
    if b_norm == 0.0:
        b_norm = 1.0

    info = DcInfo()
    for _ in range(prob.cg_iters):
        rel = float(np.sqrt(max(rs.item(), 0.0))) / b_norm
        if rel < prob.cg_tol:
            break
        Ap = normal_t(prob.op, p, prob.mu)
        alpha = rs / ad.vdot_real(p, Ap)
        x = x + alpha * p
        r = r - alpha * Ap
        rs_new = ad.vdot_real(r, r)
        p = r + (rs_new / rs) * p
        rs = rs_new
        info.iterations += 1
        info.residuals.append(float(np.sqrt(max(rs.item(), 0.0))) / b_norm)
    return x, info


def unrolled_forward(
    y_theta: np.ndarray,
    op_theta: EncodingOperator,
    params: UnrolledParams,
    T: int = 5,
    cg_iters: int = 10,
    cg_tol: float = 1e-6,
) -> ad.Tensor:
    """T unrolls of regularize + data-consistency, starting from E^H y."""
    if T < 1:
        raise ArgumentError(f"T must be >= 1, got {T}")
    y = ad.Tensor(np.asarray(y_theta))
    rhs = adjoint_t(op_theta, y)
    mu = ad.exp(params.nu)
    x = rhs
    for _ in range(T):
        z = regularizer_apply(x, params.resnet)
        x, _ = dc_solve(DcProblem(rhs, op_theta, mu, z, cg_iters, cg_tol))
    return x


def reconstruct(
    y: np.ndarray,
    op: EncodingOperator,
    params: UnrolledParams,
    T: int = 5,
    cg_iters: int = 10,
    cg_tol: float = 1e-6,
) -> np.ndarray:
    """Inference-mode reconstruction (no tape) from all acquired samples."""
    with ad.no_grad():
        return unrolled_forward(y, op, params, T, cg_iters, cg_tol).data


# ---------------------------------------------------------------------------
# checkpoint format: little-endian binary tensors + JSON manifest

_CKPT_MAGIC = b"SSDU3DCK"
_CKPT_VERSION = 1


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_checkpoint(path, params: UnrolledParams, T: int, config: Optional[dict] = None) -> None:
    config = config or {}
    names = sorted(params.named_arrays())
    arrays = {k: np.ascontiguousarray(params.named_arrays()[k], dtype="<f8") for k in names}
    manifest = {
        "T": int(T),
        "mu": params.mu,
        "resnet": {
            "n_blocks": params.resnet.cfg.n_blocks,
            "channels": params.resnet.cfg.channels,
            "block_scale": params.resnet.cfg.block_scale,
        },
        "config": config,
        "config_hash": config_hash(config),
        "tensors": [],
    }
    offset = 0
    for k in names:
        a = arrays[k]
        nbytes = a.nbytes
        manifest["tensors"].append(
            {
                "name": k,
                "shape": list(a.shape),
                "offset": offset,
                "nbytes": nbytes,
                "crc32": binascii.crc32(a.tobytes()),
            }
        )
        offset += nbytes
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<H", _CKPT_VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for k in names:
            f.write(arrays[k].tobytes())


def load_checkpoint(path) -> tuple:
    """Load a checkpoint; returns (UnrolledParams, T, config)."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:8] != _CKPT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint file")
    (version,) = struct.unpack_from("<H", raw, 8)
    if version != _CKPT_VERSION:
        raise VersionError(f"{path}: unsupported checkpoint version {version}")
    (hlen,) = struct.unpack_from("<I", raw, 10)
    header_end = 14 + hlen
    manifest = json.loads(raw[14:header_end])
    payload = raw[header_end:]
    tensors = {}
    for rec in manifest["tensors"]:
        start, n = rec["offset"], rec["nbytes"]
        chunk = payload[start : start + n]
        if len(chunk) != n:
            raise FormatError(f"{path}: truncated tensor {rec['name']!r}")
        if binascii.crc32(chunk) != rec["crc32"]:
            raise ChecksumError(f"{path}: CRC mismatch on tensor {rec['name']!r}")
        tensors[rec["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(rec["shape"]).copy()

    cfg = ResNetConfig(
        n_blocks=manifest["resnet"]["n_blocks"],
        channels=manifest["resnet"]["channels"],
        block_scale=manifest["resnet"]["block_scale"],
    )
    nu = ad.Tensor(tensors.pop("nu"), requires_grad=True, name="nu")
    named = {k: ad.Tensor(v, requires_grad=True, name=k) for k, v in tensors.items()}
    params = UnrolledParams(ResNetParams(cfg, named), nu)
    return params, int(manifest["T"]), manifest["config"]
