"""Target codings that turn identity labels into regression target matrices.

Each coding maps ``n`` labeled samples to an ``n x m`` target matrix whose
columns correspond to classes in first-appearance order.  ``m`` defaults to
the number of distinct classes; larger ``m`` pads one-hot style codings with
zero columns and widens random class vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TargetCoding:
    """Target matrix (samples by target dimensions) plus its class registry."""

    targets: np.ndarray
    class_to_col: dict[int, int]
    scheme: str
    seed: int | None = None


def _class_index(ids: np.ndarray) -> tuple[dict[int, int], np.ndarray]:
    """First-appearance class registry and per-sample column index."""
    ids = np.asarray(ids, dtype=np.int64).ravel()
    class_to_col: dict[int, int] = {}
    cols = np.empty(ids.shape[0], dtype=np.int64)
    for i, label in enumerate(ids.tolist()):
        if label not in class_to_col:
            class_to_col[label] = len(class_to_col)
        cols[i] = class_to_col[label]
    return class_to_col, cols


def _check_width(m: int | None, c: int) -> int:
    if m is None:
        return c
    if m < c:
        raise ValueError(f"target width m={m} cannot encode {c} classes")
    return m


def onehot(ids: np.ndarray, m: int | None = None) -> TargetCoding:
    """Indicator coding: row ``i`` is 1 in its class column, 0 elsewhere."""
    class_to_col, cols = _class_index(ids)
    width = _check_width(m, len(class_to_col))
    targets = np.zeros((cols.shape[0], width))
    targets[np.arange(cols.shape[0]), cols] = 1.0
    return TargetCoding(targets=targets, class_to_col=class_to_col, scheme="onehot")


def fda(ids: np.ndarray, m: int | None = None) -> TargetCoding:
    """Scaled membership coding: row ``i`` is ``1/sqrt(n_j)`` in its class
    column, giving orthonormal target columns (``Y'Y = I``)."""
    class_to_col, cols = _class_index(ids)
    width = _check_width(m, len(class_to_col))
    counts = np.bincount(cols, minlength=width).astype(np.float64)
    targets = np.zeros((cols.shape[0], width))
    targets[np.arange(cols.shape[0]), cols] = 1.0 / np.sqrt(counts[cols])
    return TargetCoding(targets=targets, class_to_col=class_to_col, scheme="fda")


def random_coding(ids: np.ndarray, m: int | None = None, seed: int = 0) -> TargetCoding:
    """Random coding: each class draws an ``m``-vector uniform on [0, 1);
    every sample of the class shares that row.  Deterministic in ``seed``."""
    class_to_col, cols = _class_index(ids)
    width = _check_width(m, len(class_to_col))
    rng = np.random.default_rng(seed)
    class_vectors = rng.random((len(class_to_col), width))
    return TargetCoding(
        targets=class_vectors[cols],
        class_to_col=class_to_col,
        scheme="random",
        seed=seed,
    )
