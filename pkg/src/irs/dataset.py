"""Feature containers, on-disk formats, splits, and the synthetic generator.

A dataset is a features-by-samples matrix (one column per sample) plus an
identity label and a camera label per sample.  On disk it is described by a
small JSON manifest pointing at either a binary payload (magic ``IRSFEAT1``,
little-endian u32 dims, column-major float64) or a CSV payload with one
sample per row, with labels inline or in an ``id,cam`` sidecar.

Randomness always flows through :func:`numpy.random.default_rng` (PCG64), so
every generator output and split is reproducible from its integer seed.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

MATRIX_MAGIC = b"IRSFEAT1"


@dataclass
class FeatureMatrix:
    """Column-per-sample feature matrix with per-sample identity/camera labels."""

    data: np.ndarray
    ids: np.ndarray
    cams: np.ndarray
    name: str = ""

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {self.data.shape}")
        self.ids = np.asarray(self.ids, dtype=np.int64).ravel()
        self.cams = np.asarray(self.cams, dtype=np.int64).ravel()
        n = self.data.shape[1]
        if self.ids.shape[0] != n:
            raise ValueError(
                f"label count mismatch: {self.ids.shape[0]} ids for {n} samples"
            )
        if self.cams.shape[0] != n:
            raise ValueError(
                f"label count mismatch: {self.cams.shape[0]} cams for {n} samples"
            )

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def num_samples(self) -> int:
        return self.data.shape[1]


@dataclass
class SplitSpec:
    """Identity-disjoint train/test partition with fixed probe/gallery views."""

    train_ids: np.ndarray
    test_ids: np.ndarray
    probe_cam: int = 0
    gallery_cam: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        self.train_ids = np.asarray(self.train_ids, dtype=np.int64).ravel()
        self.test_ids = np.asarray(self.test_ids, dtype=np.int64).ravel()


@dataclass(frozen=True)
class SyntheticSpec:
    """Two-camera synthetic dataset: per-identity base vectors, a single
    camera-dependent shift vector shared by all identities, and isotropic
    per-sample noise."""

    num_ids: int
    imgs_per_id_per_cam: int = 1
    d: int = 64
    view_shift_scale: float = 1.0
    noise_scale: float = 0.3
    seed: int = 0


def write_matrix(fp: BinaryIO, arr: np.ndarray) -> None:
    """Append one matrix to a binary stream in the ``IRSFEAT1`` layout.

    Layout: 8-byte magic, u32 rows, u32 columns (little-endian), then
    ``rows * cols`` float64 values little-endian in column-major order, so
    each column (one sample) is contiguous on disk.
    """
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"can only serialize 2-D matrices, got shape {arr.shape}")
    d, n = arr.shape
    fp.write(MATRIX_MAGIC)
    fp.write(struct.pack("<II", d, n))
    fp.write(arr.astype("<f8", copy=False).tobytes(order="F"))


def read_matrix(fp: BinaryIO) -> np.ndarray:
    """Read one ``IRSFEAT1`` matrix from the stream's current position."""
    magic = fp.read(len(MATRIX_MAGIC))
    if magic != MATRIX_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MATRIX_MAGIC!r}")
    header = fp.read(8)
    if len(header) != 8:
        raise ValueError("truncated payload: incomplete dimension header")
    d, n = struct.unpack("<II", header)
    raw = fp.read(8 * d * n)
    if len(raw) != 8 * d * n:
        raise ValueError(
            f"truncated payload: expected {8 * d * n} bytes of data, got {len(raw)}"
        )
    flat = np.frombuffer(raw, dtype="<f8")
    return np.ascontiguousarray(flat.reshape((d, n), order="F"))


def _require_finite(data: np.ndarray) -> None:
    bad = ~np.isfinite(data)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise ValueError(f"non-finite value at ({row}, {col})")


def _read_label_file(path: Path, column: str) -> np.ndarray:
    with open(path, newline="") as fp:
        rows = list(csv.reader(fp))
    if not rows:
        raise ValueError(f"empty label file {path}")
    header = [cell.strip() for cell in rows[0]]
    if header == ["id", "cam"]:
        idx = {"ids": 0, "cams": 1}[column]
        values = [r[idx] for r in rows[1:]]
    else:
        values = [r[0] for r in rows]
    return np.array([int(v) for v in values], dtype=np.int64)


def _load_labels(entry, manifest_dir: Path, column: str) -> np.ndarray:
    if isinstance(entry, str):
        path = manifest_dir / entry
        if not path.exists():
            raise FileNotFoundError(f"label file not found: {path}")
        return _read_label_file(path, column)
    return np.asarray(entry, dtype=np.int64)


def load_features(manifest_path: str | Path) -> FeatureMatrix:
    """Load a dataset described by a JSON manifest.

    The manifest carries ``features`` (payload path), ``format`` (``"f64le"``
    or ``"csv"``), ``d``, ``n``, ``ids`` and ``cams`` (inline arrays or a
    sidecar path), and ``name``.  Relative paths resolve against the manifest
    location.  Data is validated for finiteness and consistent dimensions.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    manifest_dir = manifest_path.parent

    payload = manifest_dir / manifest["features"]
    if not payload.exists():
        raise FileNotFoundError(f"feature payload not found: {payload}")

    fmt = manifest.get("format", "f64le")
    if fmt == "f64le":
        with open(payload, "rb") as fp:
            data = read_matrix(fp)
    elif fmt == "csv":
        data = np.loadtxt(payload, delimiter=",", ndmin=2, dtype=np.float64).T
    else:
        raise ValueError(f"unknown feature format {fmt!r}")

    d, n = int(manifest["d"]), int(manifest["n"])
    if data.shape != (d, n):
        raise ValueError(
            f"payload dimension mismatch: manifest says d={d}, n={n}, "
            f"payload is d={data.shape[0]}, n={data.shape[1]}"
        )
    _require_finite(data)

    ids = _load_labels(manifest["ids"], manifest_dir, "ids")
    cams = _load_labels(manifest["cams"], manifest_dir, "cams")
    return FeatureMatrix(data=data, ids=ids, cams=cams, name=manifest.get("name", ""))


def write_features(
    fm: FeatureMatrix,
    manifest_path: str | Path,
    fmt: str = "f64le",
    inline_labels: bool = False,
) -> Path:
    """Write a dataset as manifest + payload (+ ``id,cam`` sidecar).

    The payload and sidecar are placed next to the manifest and referenced by
    relative path.  The binary format round-trips bit-exactly; the CSV format
    uses shortest round-trip float formatting, so values survive exactly too.
    """
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    stem = manifest_path.stem
    if fmt == "f64le":
        payload_name = f"{stem}.f64le"
        with open(manifest_path.parent / payload_name, "wb") as fp:
            write_matrix(fp, fm.data)
    elif fmt == "csv":
        payload_name = f"{stem}.csv"
        with open(manifest_path.parent / payload_name, "w") as fp:
            for col in range(fm.num_samples):
                fp.write(",".join(repr(v) for v in fm.data[:, col].tolist()))
                fp.write("\n")
    else:
        raise ValueError(f"unknown feature format {fmt!r}")

    manifest = {
        "features": payload_name,
        "format": fmt,
        "d": fm.dim,
        "n": fm.num_samples,
        "name": fm.name,
    }
    if inline_labels:
        manifest["ids"] = fm.ids.tolist()
        manifest["cams"] = fm.cams.tolist()
    else:
        sidecar_name = f"{stem}.labels.csv"
        with open(manifest_path.parent / sidecar_name, "w", newline="") as fp:
            writer = csv.writer(fp)
            writer.writerow(["id", "cam"])
            for ident, cam in zip(fm.ids.tolist(), fm.cams.tolist()):
                writer.writerow([ident, cam])
        manifest["ids"] = sidecar_name
        manifest["cams"] = sidecar_name

    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest_path


def gen_synthetic(spec: SyntheticSpec) -> FeatureMatrix:
    """Generate a two-camera synthetic dataset.

    Each identity gets a base vector drawn from a standard normal; camera 1
    adds one dataset-wide shift vector scaled by ``view_shift_scale``; every
    sample adds isotropic noise scaled by ``noise_scale``.  Draw order (base
    matrix, shift vector, noise matrix) is fixed, so output is a pure
    function of ``spec``.
    """
    rng = np.random.default_rng(spec.seed)
    per_id = 2 * spec.imgs_per_id_per_cam
    n = spec.num_ids * per_id

    bases = rng.standard_normal((spec.d, spec.num_ids))
    shift = rng.standard_normal(spec.d) * spec.view_shift_scale
    noise = rng.standard_normal((spec.d, n)) * spec.noise_scale

    ids = np.repeat(np.arange(spec.num_ids, dtype=np.int64), per_id)
    cams = np.tile(
        np.repeat(np.array([0, 1], dtype=np.int64), spec.imgs_per_id_per_cam),
        spec.num_ids,
    )
    data = bases[:, ids] + np.outer(shift, cams == 1) + noise
    return FeatureMatrix(
        data=data,
        ids=ids,
        cams=cams,
        name=f"synth-{spec.num_ids}id-d{spec.d}-s{spec.seed}",
    )


def make_split(fm: FeatureMatrix, ratio: float = 0.5, seed: int = 0) -> SplitSpec:
    """Partition identities into disjoint train/test sets.

    ``ratio`` is the training fraction of identities; membership is a seeded
    permutation, so the split is reproducible.  Both sides are non-empty.
    """
    unique_ids = np.unique(fm.ids)
    c = unique_ids.shape[0]
    if c < 2:
        raise ValueError(f"need at least 2 identities to split, got {c}")
    n_train = int(round(ratio * c))
    n_train = min(max(n_train, 1), c - 1)
    perm = np.random.default_rng(seed).permutation(unique_ids)
    return SplitSpec(
        train_ids=np.sort(perm[:n_train]),
        test_ids=np.sort(perm[n_train:]),
        seed=seed,
    )


def columns_for(
    fm: FeatureMatrix,
    ids: Sequence[int] | np.ndarray | None = None,
    cam: int | None = None,
) -> np.ndarray:
    """Column indices of samples matching an identity set and/or a camera."""
    mask = np.ones(fm.num_samples, dtype=bool)
    if ids is not None:
        mask &= np.isin(fm.ids, np.asarray(ids, dtype=np.int64))
    if cam is not None:
        mask &= fm.cams == cam
    return np.flatnonzero(mask)
