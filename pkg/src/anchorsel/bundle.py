"""Portable feature-bundle files: manifest + binary tensors + sample stream.

A bundle directory holds:

    manifest.json   human-readable description, shapes, checksums
    tensors.bin     fixed tensors (descriptions, base class embeddings)
    samples.bin     per-sample records: id, label, view embeddings
    mask.bin        optional informative-view ground truth (synthetic data)

All floats on disk are little-endian 32-bit, row-major, regardless of
host; they are widened to float64 in memory. Every binary payload is
checksummed and checked before anything is handed to the caller.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .core import AnchorselError

FORMAT_VERSION = 1
DTYPE_TAG = "float32-le"
MANIFEST_NAME = "manifest.json"
TENSOR_FILE = "tensors.bin"
SAMPLE_FILE = "samples.bin"
MASK_FILE = "mask.bin"

_RECORD_HEADER = struct.Struct("<QiI")  # sample_id u64, label i32, view_count u32
_MASK_HEADER = struct.Struct("<I")


class VersionUnsupported(AnchorselError):
    """Manifest declares a format version this reader does not speak."""


class ShapeMismatch(AnchorselError):
    """Declared and actual shapes disagree."""


class ChecksumMismatch(AnchorselError):
    """Stored checksum does not match the bytes on disk."""


class TruncatedRecord(AnchorselError):
    """A binary stream ended mid-record."""


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class TensorEntry:
    name: str
    shape: tuple[int, ...]
    file: str
    byte_offset: int
    byte_length: int
    checksum: str


@dataclass
class BundleManifest:
    format_version: int
    dim: int
    num_classes: int
    num_descriptions: int
    views_per_sample: int
    num_samples: int
    class_names: list[str]
    dtype: str = DTYPE_TAG
    normalized: bool = True
    variable_views: bool = False
    original_index: int = 0
    tensors: list[TensorEntry] = field(default_factory=list)
    sample_checksum: str = ""
    mask_checksum: str | None = None

    def to_json(self) -> str:
        doc = {
            "format_version": self.format_version,
            "dim": self.dim,
            "num_classes": self.num_classes,
            "num_descriptions": self.num_descriptions,
            "views_per_sample": self.views_per_sample,
            "num_samples": self.num_samples,
            "class_names": self.class_names,
            "dtype": self.dtype,
            "normalized": self.normalized,
            "variable_views": self.variable_views,
            "original_index": self.original_index,
            "tensors": [
                {
                    "name": t.name,
                    "shape": list(t.shape),
                    "file": t.file,
                    "byte_offset": t.byte_offset,
                    "byte_length": t.byte_length,
                    "checksum": t.checksum,
                }
                for t in self.tensors
            ],
            "samples": {"file": SAMPLE_FILE, "checksum": self.sample_checksum},
        }
        if self.mask_checksum is not None:
            doc["mask"] = {"file": MASK_FILE, "checksum": self.mask_checksum}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str, path: Path) -> "BundleManifest":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ShapeMismatch(f"{path}: manifest is not valid JSON: {exc}") from exc
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise VersionUnsupported(
                f"{path}: format version {version!r} not supported (reader speaks {FORMAT_VERSION})"
            )
        if doc.get("dtype") != DTYPE_TAG:
            raise VersionUnsupported(f"{path}: unknown dtype tag {doc.get('dtype')!r}")
        tensors = [
            TensorEntry(
                name=t["name"],
                shape=tuple(int(s) for s in t["shape"]),
                file=t["file"],
                byte_offset=int(t["byte_offset"]),
                byte_length=int(t["byte_length"]),
                checksum=t["checksum"],
            )
            for t in doc.get("tensors", [])
        ]
        mask = doc.get("mask")
        return cls(
            format_version=version,
            dim=int(doc["dim"]),
            num_classes=int(doc["num_classes"]),
            num_descriptions=int(doc["num_descriptions"]),
            views_per_sample=int(doc["views_per_sample"]),
            num_samples=int(doc["num_samples"]),
            class_names=[str(n) for n in doc["class_names"]],
            dtype=doc["dtype"],
            normalized=bool(doc.get("normalized", True)),
            variable_views=bool(doc.get("variable_views", False)),
            original_index=int(doc.get("original_index", 0)),
            tensors=tensors,
            sample_checksum=doc.get("samples", {}).get("checksum", ""),
            mask_checksum=mask["checksum"] if mask else None,
        )


@dataclass
class BundleSample:
    sample_id: int
    label: int  # -1 = unlabeled
    views: np.ndarray  # (view_count, D) float64
    mask: np.ndarray | None = None  # (view_count,) bool, synthetic ground truth


@dataclass
class FeatureBundle:
    manifest: BundleManifest
    descriptions: np.ndarray  # (C, N, D) float64
    base_class_embeddings: np.ndarray  # (C, D) float64
    samples: list[BundleSample]

    @property
    def num_samples(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[BundleSample]:
        return iter(self.samples)


def _encode_tensor(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def _decode_tensor(data: bytes, shape: tuple[int, ...]) -> np.ndarray:
    return np.frombuffer(data, dtype="<f4").reshape(shape).astype(np.float64)


def write_bundle(
    path: str | Path,
    descriptions: np.ndarray,
    base_class_embeddings: np.ndarray,
    samples: list[BundleSample],
    class_names: list[str],
    normalized: bool = True,
    variable_views: bool = False,
    original_index: int = 0,
) -> BundleManifest:
    """Write a bundle directory; returns the manifest that was stored."""
    desc = np.asarray(descriptions, dtype=np.float64)
    base = np.asarray(base_class_embeddings, dtype=np.float64)
    if desc.ndim != 3:
        raise ShapeMismatch(f"descriptions must be (C, N, D), got {desc.shape}")
    c, n, d = desc.shape
    if base.shape != (c, d):
        raise ShapeMismatch(
            f"base_class_embeddings shape {base.shape} inconsistent with descriptions {desc.shape}"
        )
    if len(class_names) != c:
        raise ShapeMismatch(f"{len(class_names)} class names for {c} classes")
    view_counts = {s.views.shape[0] for s in samples}
    if not variable_views and len(view_counts) > 1:
        raise ShapeMismatch(
            f"view counts differ {sorted(view_counts)} but variable_views is off"
        )
    b = samples[0].views.shape[0] if samples else 0

    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)

    tensor_blob = b""
    entries: list[TensorEntry] = []
    for name, arr in (("descriptions", desc), ("base_class_embeddings", base)):
        raw = _encode_tensor(arr)
        entries.append(
            TensorEntry(
                name=name,
                shape=arr.shape,
                file=TENSOR_FILE,
                byte_offset=len(tensor_blob),
                byte_length=len(raw),
                checksum=_sha256(raw),
            )
        )
        tensor_blob += raw
    (out / TENSOR_FILE).write_bytes(tensor_blob)

    parts = []
    for s in samples:
        views = np.asarray(s.views, dtype=np.float64)
        if views.ndim != 2 or views.shape[1] != d:
            raise ShapeMismatch(
                f"sample {s.sample_id}: views shape {views.shape} not (*, {d})"
            )
        parts.append(_RECORD_HEADER.pack(s.sample_id, s.label, views.shape[0]))
        parts.append(_encode_tensor(views))
    sample_blob = b"".join(parts)
    (out / SAMPLE_FILE).write_bytes(sample_blob)

    mask_checksum = None
    if any(s.mask is not None for s in samples):
        mask_parts = []
        for s in samples:
            if s.mask is None:
                raise ShapeMismatch(
                    f"sample {s.sample_id}: mask missing while others have one"
                )
            m = np.asarray(s.mask, dtype=bool)
            if m.shape != (s.views.shape[0],):
                raise ShapeMismatch(
                    f"sample {s.sample_id}: mask shape {m.shape} != ({s.views.shape[0]},)"
                )
            mask_parts.append(_MASK_HEADER.pack(m.shape[0]))
            mask_parts.append(m.astype(np.uint8).tobytes())
        mask_blob = b"".join(mask_parts)
        (out / MASK_FILE).write_bytes(mask_blob)
        mask_checksum = _sha256(mask_blob)

    manifest = BundleManifest(
        format_version=FORMAT_VERSION,
        dim=d,
        num_classes=c,
        num_descriptions=n,
        views_per_sample=b,
        num_samples=len(samples),
        class_names=list(class_names),
        normalized=normalized,
        variable_views=variable_views,
        original_index=original_index,
        tensors=entries,
        sample_checksum=_sha256(sample_blob),
        mask_checksum=mask_checksum,
    )
    (out / MANIFEST_NAME).write_text(manifest.to_json())
    return manifest


def _load_tensor(directory: Path, entry: TensorEntry) -> np.ndarray:
    expected = 4 * int(np.prod(entry.shape))
    if expected != entry.byte_length:
        raise ShapeMismatch(
            f"tensor {entry.name}: shape {entry.shape} needs {expected} bytes, "
            f"manifest says {entry.byte_length}"
        )
    blob = (directory / entry.file).read_bytes()
    end = entry.byte_offset + entry.byte_length
    if entry.byte_offset < 0 or end > len(blob):
        raise TruncatedRecord(
            f"tensor {entry.name}: range [{entry.byte_offset}, {end}) exceeds "
            f"{entry.file} size {len(blob)}"
        )
    raw = blob[entry.byte_offset : end]
    if _sha256(raw) != entry.checksum:
        raise ChecksumMismatch(f"tensor {entry.name}: checksum mismatch in {entry.file}")
    return _decode_tensor(raw, entry.shape)


def _parse_samples(blob: bytes, manifest: BundleManifest, path: Path) -> list[BundleSample]:
    samples: list[BundleSample] = []
    offset = 0
    total = len(blob)
    for _ in range(manifest.num_samples):
        if offset + _RECORD_HEADER.size > total:
            raise TruncatedRecord(
                f"{path}: record header at byte {offset} runs past end ({total} bytes)"
            )
        sample_id, label, view_count = _RECORD_HEADER.unpack_from(blob, offset)
        offset += _RECORD_HEADER.size
        if not manifest.variable_views and view_count != manifest.views_per_sample:
            raise ShapeMismatch(
                f"{path}: sample {sample_id} has {view_count} views, "
                f"manifest fixes {manifest.views_per_sample}"
            )
        if label < -1 or label >= manifest.num_classes:
            raise ShapeMismatch(
                f"{path}: sample {sample_id} label {label} outside [-1, {manifest.num_classes})"
            )
        payload = view_count * manifest.dim * 4
        if offset + payload > total:
            raise TruncatedRecord(
                f"{path}: sample {sample_id} payload at byte {offset} needs "
                f"{payload} bytes, only {total - offset} remain"
            )
        views = _decode_tensor(blob[offset : offset + payload], (view_count, manifest.dim))
        offset += payload
        samples.append(BundleSample(sample_id=sample_id, label=label, views=views))
    if offset != total:
        raise TruncatedRecord(
            f"{path}: {total - offset} trailing bytes after last declared record"
        )
    return samples


def _attach_masks(blob: bytes, samples: list[BundleSample], path: Path) -> None:
    offset = 0
    total = len(blob)
    for s in samples:
        if offset + _MASK_HEADER.size > total:
            raise TruncatedRecord(f"{path}: mask header at byte {offset} runs past end")
        (count,) = _MASK_HEADER.unpack_from(blob, offset)
        offset += _MASK_HEADER.size
        if count != s.views.shape[0]:
            raise ShapeMismatch(
                f"{path}: mask for sample {s.sample_id} covers {count} views, "
                f"sample has {s.views.shape[0]}"
            )
        if offset + count > total:
            raise TruncatedRecord(
                f"{path}: mask payload at byte {offset} needs {count} bytes, "
                f"only {total - offset} remain"
            )
        s.mask = np.frombuffer(blob, dtype=np.uint8, count=count, offset=offset).astype(bool)
        offset += count
    if offset != total:
        raise TruncatedRecord(f"{path}: {total - offset} trailing bytes in mask file")


def _normalize_rows(arr: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(arr, axis=-1, keepdims=True)
    return arr / np.where(norms > 0, norms, 1.0)


def read_bundle(path: str | Path) -> FeatureBundle:
    """Load and validate a bundle directory; all checks run before any
    data is returned, so a corrupt bundle never yields a partial load."""
    directory = Path(path)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {directory}")
    manifest = BundleManifest.from_json(manifest_path.read_text(), manifest_path)

    by_name = {t.name: t for t in manifest.tensors}
    for required, dims in (("descriptions", 3), ("base_class_embeddings", 2)):
        if required not in by_name:
            raise ShapeMismatch(f"{manifest_path}: required tensor {required!r} missing")
        if len(by_name[required].shape) != dims:
            raise ShapeMismatch(
                f"{manifest_path}: tensor {required!r} must be {dims}-D, "
                f"declared {by_name[required].shape}"
            )
    desc_entry = by_name["descriptions"]
    base_entry = by_name["base_class_embeddings"]
    expected_desc = (manifest.num_classes, manifest.num_descriptions, manifest.dim)
    if desc_entry.shape != expected_desc:
        raise ShapeMismatch(
            f"{manifest_path}: descriptions declared {desc_entry.shape}, "
            f"manifest header implies {expected_desc}"
        )
    if base_entry.shape != (manifest.num_classes, manifest.dim):
        raise ShapeMismatch(
            f"{manifest_path}: base_class_embeddings declared {base_entry.shape}, "
            f"manifest header implies {(manifest.num_classes, manifest.dim)}"
        )
    if len(manifest.class_names) != manifest.num_classes:
        raise ShapeMismatch(
            f"{manifest_path}: {len(manifest.class_names)} class names for "
            f"{manifest.num_classes} classes"
        )

    descriptions = _load_tensor(directory, desc_entry)
    base = _load_tensor(directory, base_entry)

    sample_path = directory / SAMPLE_FILE
    blob = sample_path.read_bytes() if sample_path.is_file() else b""
    if manifest.num_samples > 0 and not blob:
        raise TruncatedRecord(f"{sample_path}: missing or empty sample file")
    if _sha256(blob) != manifest.sample_checksum:
        raise ChecksumMismatch(f"{sample_path}: sample stream checksum mismatch")
    samples = _parse_samples(blob, manifest, sample_path)

    if manifest.mask_checksum is not None:
        mask_path = directory / MASK_FILE
        mask_blob = mask_path.read_bytes() if mask_path.is_file() else b""
        if _sha256(mask_blob) != manifest.mask_checksum:
            raise ChecksumMismatch(f"{mask_path}: mask checksum mismatch")
        _attach_masks(mask_blob, samples, mask_path)

    if not manifest.normalized:
        descriptions = _normalize_rows(descriptions)
        base = _normalize_rows(base)
        for s in samples:
            s.views = _normalize_rows(s.views)

    return FeatureBundle(
        manifest=manifest,
        descriptions=descriptions,
        base_class_embeddings=base,
        samples=samples,
    )


def bundle_checksum(path: str | Path) -> str:
    """Checksum identifying a bundle: the digest of its manifest bytes
    (the manifest itself pins every payload checksum)."""
    return _sha256((Path(path) / MANIFEST_NAME).read_bytes())
