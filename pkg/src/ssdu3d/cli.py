"""Command-line interface: simulate, train, reconstruct, evaluate, baseline.

Exit codes: 0 success, 2 usage/argument errors, 3 IO or file-format errors,
4 numeric divergence. Failures print one machine-readable JSON line on
stderr.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .baselines import cs_recon, zero_filled
from .config import RunConfig, config_from_dict, load_config
from .dataio import TrainingSample, load_dataset, save_dataset
from .errors import ArgumentError, FormatError, NumericError
from .metrics import MethodReport, score_volume
from .mri import CoilSet, EncodingOperator
from .network import config_hash, load_checkpoint, reconstruct, save_checkpoint
from .phantom import build_dataset
from .training import sample_scale, train


def _load_run_config(path) -> RunConfig:
    return load_config(path) if path else RunConfig()


def _full_kspace(sample: TrainingSample) -> tuple:
    omega = sample.omega().as_float()
    return omega * sample.kspace.astype(np.complex128), omega


def _recon_method(sample: TrainingSample, method: str, cfg: RunConfig, ckpt=None) -> np.ndarray:
    coils = CoilSet(sample.coils.maps.astype(np.complex128))
    y, omega = _full_kspace(sample)
    if method == "zero_filled":
        return zero_filled(y, coils, omega)
    if method == "cs":
        return cs_recon(y, coils, omega, cfg.cs)
    if method == "ssdu":
        if ckpt is None:
            raise ArgumentError("reconstructing with the network requires --ckpt")
        params, T, _ = ckpt
        scale = sample_scale(sample)
        op = EncodingOperator(coils, omega)
        x = reconstruct(y / scale, op, params, T, cfg.cg.iters, cfg.cg.tol)
        return x * scale
    raise ArgumentError(f"unknown method {method!r}")


def _write_volume(out_dir: Path, name: str, volume: np.ndarray) -> None:
    from PIL import Image

    out_dir.mkdir(parents=True, exist_ok=True)
    raw = np.ascontiguousarray(volume, dtype="<c8")
    (out_dir / f"{name}.cplx").write_bytes(raw.tobytes())
    sidecar = {"shape": list(raw.shape), "dtype": "complex64", "byte_order": "little"}
    (out_dir / f"{name}.json").write_text(json.dumps(sidecar, sort_keys=True))

    mag = np.abs(volume)
    mid = mag[mag.shape[0] // 2]
    peak = mid.max()
    img = (mid / peak * 65535.0).astype(np.uint16) if peak > 0 else mid.astype(np.uint16)
    Image.fromarray(img, mode="I;16").save(out_dir / f"{name}.png")


def _cmd_simulate(args) -> int:
    cfg = _load_run_config(args.config)
    sim = cfg.sim
    if args.rate:
        sim.rate = args.rate
    if args.slab_len is not None:
        sim.slab_len = args.slab_len
    samples = build_dataset(
        sim, cfg.split, args.subjects, args.seed, subject_offset=args.subject_offset
    )
    meta = {
        "dims": list(sim.dims),
        "n_coils": sim.n_coils,
        "readout_axis": sim.readout_axis,
        "R": sim.rate,
        "acs": list(sim.acs_r6 if sim.rate != 3 else sim.acs_r3),
        "noise_sigma": sim.noise_sigma,
        "seed": args.seed,
        "subjects": args.subjects,
        "slab_len": sim.slab_len,
    }
    save_dataset(args.out, samples, meta)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_run_config(args.config)
    if args.epochs:
        cfg.train.epochs = args.epochs
    if args.loss:
        cfg.train.loss_mode = args.loss
    samples, _meta = load_dataset(args.data)
    params, report = train(
        samples,
        cfg.train,
        net_cfg=cfg.network,
        cg_cfg=cfg.cg,
        split_cfg=cfg.split,
        seed=args.seed,
        progress=None if args.quiet else lambda e, l: print(f"epoch {e}: loss {l:.6f}"),
    )
    save_checkpoint(args.out, params, cfg.network.T, cfg.to_dict())
    report.checkpoint_path = str(args.out)
    report.config = cfg.to_dict()
    report_path = args.report or str(Path(args.out).with_suffix(".report.json"))
    with open(report_path, "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
    print(f"checkpoint: {args.out}\nreport: {report_path}")
    return 0


def _cmd_reconstruct(args) -> int:
    cfg = _load_run_config(args.config)
    samples, _meta = load_dataset(args.data)
    ckpt = load_checkpoint(args.ckpt) if args.ckpt else None
    out_dir = Path(args.out)
    for s in samples:
        x = _recon_method(s, args.method, cfg, ckpt)
        _write_volume(out_dir, f"{s.subject_id}_slab{s.slab_index}_{args.method}", x)
    print(f"wrote {len(samples)} volumes to {out_dir}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _load_run_config(args.config)
    samples, meta = load_dataset(args.data)
    if any(s.ground_truth is None for s in samples):
        raise ArgumentError("evaluate requires ground truth in the dataset")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    ckpt = load_checkpoint(args.ckpt) if args.ckpt else None

    reports = []
    for method in methods:
        t0 = time.perf_counter()
        vols = []
        for s in samples:
            if method == "ground-truth":
                x = s.ground_truth.astype(np.complex128)
            else:
                x = _recon_method(s, method, cfg, ckpt)
            vols.append(score_volume(f"{s.subject_id}/{s.slab_index}", x, s.ground_truth))
        rep = MethodReport(method, float(meta.get("R", 0) or 0), time.perf_counter() - t0, vols)
        reports.append(rep)

    payload = {
        "schema_version": 1,
        "dataset": str(args.data),
        "config_hash": config_hash(cfg.to_dict()),
        "methods": [r.to_dict() for r in reports],
    }
    with open(args.out, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)

    rows = [f"{'method':<14} {'R':>3} {'PSNR dB':>9} {'SSIM':>7} {'NMSE':>10}"]
    for r in reports:
        rows.append(
            f"{r.label:<14} {r.R:>3.0f} {r.mean('psnr_db'):>9.2f} "
            f"{r.mean('ssim'):>7.4f} {r.mean('nmse'):>10.3e}"
        )
    table = "\n".join(rows)
    print(table)
    if args.table:
        Path(args.table).write_text(table + "\n")
    return 0


def _cmd_baseline(args) -> int:
    cfg = _load_run_config(args.config)
    samples, _meta = load_dataset(args.data)
    out_dir = Path(args.out)
    for s in samples:
        x = _recon_method(s, args.method, cfg, None)
        _write_volume(out_dir, f"{s.subject_id}_slab{s.slab_index}_{args.method}", x)
    print(f"wrote {len(samples)} volumes to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssdu3d",
        description="Self-supervised unrolled reconstruction for simulated 3D multi-coil MRI",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument(
            "--deterministic",
            action="store_true",
            help="force sequential, seed-pinned execution (the default code path already is)",
        )

    p = sub.add_parser("simulate", help="write a synthetic dataset")
    common(p)
    p.add_argument("--subjects", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rate", type=int, choices=(3, 6))
    p.add_argument("--slab-len", type=int, dest="slab_len")
    p.add_argument("--subject-offset", type=int, default=0, dest="subject_offset")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="train the unrolled network")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--epochs", type=int)
    p.add_argument("--loss", choices=("self_supervised", "supervised"))
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("reconstruct", help="write reconstructed volumes and PNGs")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt")
    p.add_argument("--out", required=True)
    p.add_argument("--method", default="ssdu", choices=("ssdu", "zero_filled", "cs"))
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("evaluate", help="score methods against ground truth")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt")
    p.add_argument("--out", required=True)
    p.add_argument("--methods", default="zero_filled,cs,ssdu")
    p.add_argument("--table", help="also write the comparison table to this file")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("baseline", help="run a conventional baseline")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--method", required=True, choices=("zero_filled", "cs"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_baseline)

    return parser


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def cli_main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ArgumentError as e:
        return _fail(2, type(e).__name__, str(e))
    except FormatError as e:
        return _fail(3, type(e).__name__, str(e))
    except OSError as e:
        return _fail(3, type(e).__name__, str(e))
    except NumericError as e:
        return _fail(4, type(e).__name__, str(e))


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
