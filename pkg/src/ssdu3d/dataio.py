"""Dataset file format.

Layout:

    bytes 0..6   magic "SSDU3D\\0"
    bytes 7..8   format version, little-endian u16
    bytes 9..12  header length, little-endian u32
    header       UTF-8 JSON: global metadata plus, per sample, the offset /
                 shape / dtype / crc32 of each tensor record
    payload      tensor records back to back, little-endian; signal tensors
                 are complex64, masks uint8

Offsets are relative to the payload start. Every record's CRC32 is checked
on load, so truncation or corruption fails loudly instead of yielding a
partial dataset.
"""

import binascii
import json
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ArgumentError, ChecksumError, FormatError, VersionError
from .mri import CoilSet
from .sampling import MaskSplit, SamplingMask

MAGIC = b"SSDU3D\x00"
FORMAT_VERSION = 1

_DTYPES = {"c8": "<c8", "u1": "|u1"}


@dataclass
class TrainingSample:
    """One sub-volume: acquired k-space, coil maps, mask split, optional truth."""

    kspace: np.ndarray
    coils: CoilSet
    split: Optional[MaskSplit]
    ground_truth: Optional[np.ndarray] = None
    subject_id: str = ""
    slab_index: int = 0

    @property
    def dims(self) -> tuple:
        return self.kspace.shape[1:]

    def omega(self) -> SamplingMask:
        if self.split is None:
            raise ArgumentError("sample carries no mask split")
        return SamplingMask(
            self.split.omega_bits(), self.split.theta.acs, self.split.theta.readout_axis
        )

    def validate(self) -> None:
        if self.kspace.ndim != 4:
            raise ArgumentError("kspace must be (n_coils, nx, ny, nz)")
        if self.coils.maps.shape != self.kspace.shape:
            raise ArgumentError("coil maps do not match k-space dims")
        if self.split is not None:
            self.split.validate()
            off = ~self.split.omega_bits()
            if np.any(self.kspace[:, off] != 0):
                raise ArgumentError("k-space has nonzero entries off omega")
        if self.ground_truth is not None and self.ground_truth.shape != self.dims:
            raise ArgumentError("ground truth dims mismatch")


def _records_of(sample: TrainingSample) -> dict:
    recs = {
        "kspace": np.ascontiguousarray(sample.kspace, dtype="<c8"),
        "coils": np.ascontiguousarray(sample.coils.maps, dtype="<c8"),
    }
    if sample.split is not None:
        recs["theta"] = np.ascontiguousarray(sample.split.theta.bits, dtype="|u1")
        recs["lam"] = np.ascontiguousarray(sample.split.lam.bits, dtype="|u1")
    if sample.ground_truth is not None:
        recs["ground_truth"] = np.ascontiguousarray(sample.ground_truth, dtype="<c8")
    return recs


def save_dataset(path, samples: list, meta: Optional[dict] = None) -> None:
    """Write TrainingSample list; `meta` lands verbatim in the header."""
    if not samples:
        raise ArgumentError("refusing to write an empty dataset")
    header = {"format_version": FORMAT_VERSION, "meta": meta or {}, "samples": []}
    chunks = []
    offset = 0
    for s in samples:
        entry = {
            "subject_id": s.subject_id,
            "slab_index": s.slab_index,
            "tensors": {},
        }
        if s.split is not None:
            entry["acs"] = list(s.split.theta.acs)
            entry["readout_axis"] = s.split.theta.readout_axis
        for name, arr in _records_of(s).items():
            raw = arr.tobytes()
            entry["tensors"][name] = {
                "offset": offset,
                "shape": list(arr.shape),
                "dtype": "u1" if arr.dtype == np.uint8 else "c8",
                "nbytes": len(raw),
                "crc32": binascii.crc32(raw),
            }
            chunks.append(raw)
            offset += len(raw)
        header["samples"].append(entry)
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<H", FORMAT_VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for c in chunks:
            f.write(c)


def _read_record(payload: bytes, rec: dict, what: str) -> np.ndarray:
    start, n = rec["offset"], rec["nbytes"]
    chunk = payload[start : start + n]
    if len(chunk) != n:
        raise FormatError(f"truncated record {what!r}")
    if binascii.crc32(chunk) != rec["crc32"]:
        raise ChecksumError(f"CRC mismatch on record {what!r}")
    return np.frombuffer(chunk, dtype=_DTYPES[rec["dtype"]]).reshape(rec["shape"]).copy()


def load_dataset(path) -> tuple:
    """Read a dataset file; returns (samples, meta)."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:7] != MAGIC:
        raise FormatError(f"{path}: bad magic, not a dataset file")
    (version,) = struct.unpack_from("<H", raw, 7)
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: unsupported format version {version}")
    (hlen,) = struct.unpack_from("<I", raw, 9)
    header_end = 13 + hlen
    if len(raw) < header_end:
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(raw[13:header_end])
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: corrupt header: {e}") from None
    payload = raw[header_end:]

    samples = []
    for entry in header["samples"]:
        tensors = {
            name: _read_record(payload, rec, name) for name, rec in entry["tensors"].items()
        }
        split = None
        if "theta" in tensors:
            acs = tuple(entry["acs"])
            axis = entry["readout_axis"]
            split = MaskSplit(
                SamplingMask(tensors["theta"].astype(bool), acs, axis),
                SamplingMask(tensors["lam"].astype(bool), acs, axis),
            )
        samples.append(
            TrainingSample(
                kspace=tensors["kspace"],
                coils=CoilSet(tensors["coils"]),
                split=split,
                ground_truth=tensors.get("ground_truth"),
                subject_id=entry["subject_id"],
                slab_index=entry["slab_index"],
            )
        )
    return samples, header["meta"]
