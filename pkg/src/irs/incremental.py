"""Exact incremental maintenance of the closed-form embedding.

The state carries the inverse of the regularized Gram matrix ``T = XX' +
lambda I`` and the projection ``P = T^-1 X Y``.  Absorbing a batch ``X'``
of ``n'`` samples applies the Woodbury identity

    T_new^-1 = T^-1 - T^-1 X' (I + X''T^-1 X')^-1 X'' T^-1

and the matching projection recursion, so the result equals a from-scratch
refit on all data seen so far, at the cost of an ``n' x n'`` solve instead
of a ``d x d`` factorization.  When a batch introduces new identity
classes, the projection first grows that many zero columns; the class
registry records each identity's column in arrival order.

Tiny batches take a specialized rank-one loop (scalar denominators, no
factorization); the pinned policy prefers it when ``n' <= d/50`` and
``n' <= 32``.  The inverse is resymmetrized after every update to stop
asymmetry drift over long sessions.  Updates are pure: they return a new
state and never mutate their input, so a session holds exactly one live
writer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import blas, cho_factor, cho_solve

from irs.coding import TargetCoding
from irs.dataset import read_matrix, write_matrix
from irs.regression import _gram, median_bandwidth


@dataclass
class IncrementalState:
    """Running inverse, projection, and class registry of a growing model."""

    gram_inv: np.ndarray  # d x d, inverse of XX' + lambda I
    projection: np.ndarray  # d x m
    class_to_col: dict[int, int]
    lam: float
    n_seen: int
    update_count: int

    @property
    def dim(self) -> int:
        return self.gram_inv.shape[0]

    @property
    def num_classes(self) -> int:
        return self.projection.shape[1]


@dataclass
class KernelLift:
    """Fixed feature map ``x -> k(anchor_i, x)`` over a frozen anchor set."""

    anchors: np.ndarray  # d x n_anchors
    kernel: str = "rbf"
    bandwidth: float | None = None

    def __call__(self, X: np.ndarray) -> np.ndarray:
        """Lift samples (one per column) to anchor-similarity columns."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        return _gram(self.anchors, X, self.kernel, self.bandwidth)

    @property
    def out_dim(self) -> int:
        return self.anchors.shape[1]


def kernel_lift(
    anchors: np.ndarray,
    kernel: str = "rbf",
    bandwidth: float | str = "median",
) -> KernelLift:
    """Build a fixed-anchor lift; ``"median"`` sizes the width on the anchors."""
    anchors = np.asarray(anchors, dtype=np.float64)
    if kernel == "rbf" and bandwidth == "median":
        bandwidth = median_bandwidth(anchors)
    return KernelLift(
        anchors=anchors.copy(),
        kernel=kernel,
        bandwidth=float(bandwidth) if kernel == "rbf" else None,
    )


def init_state(X0: np.ndarray, Y0, lam: float = 0.1) -> IncrementalState:
    """Initialize from a seed batch: ``T^-1 = (X0 X0' + lambda I)^-1``.

    ``lam`` must be positive so the inverse exists for any seed batch.
    ``Y0`` may be a TargetCoding (its registry is adopted) or a plain
    target matrix (columns become classes 0..m-1).
    """
    X0 = np.asarray(X0, dtype=np.float64)
    if lam <= 0:
        raise ValueError(f"lambda must be positive for incremental updates, got {lam}")
    if isinstance(Y0, TargetCoding):
        targets = np.asarray(Y0.targets, dtype=np.float64)
        class_to_col = dict(Y0.class_to_col)
    else:
        targets = np.asarray(Y0, dtype=np.float64)
        class_to_col = {j: j for j in range(targets.shape[1])}
    if X0.shape[1] != targets.shape[0]:
        raise ValueError(
            f"sample count mismatch: {X0.shape[1]} feature columns vs "
            f"{targets.shape[0]} target rows"
        )
    d = X0.shape[0]
    gram_inv = cho_solve(cho_factor(X0 @ X0.T + lam * np.eye(d)), np.eye(d))
    gram_inv = (gram_inv + gram_inv.T) / 2.0
    return IncrementalState(
        gram_inv=gram_inv,
        projection=gram_inv @ (X0 @ targets),
        class_to_col=class_to_col,
        lam=float(lam),
        n_seen=X0.shape[1],
        update_count=0,
    )


def prefers_per_sample(n_new: int, d: int) -> bool:
    """Pinned path policy: rank-one loop iff ``n' <= d/50`` and ``n' <= 32``."""
    return n_new <= d / 50 and n_new <= 32


def _check_update(
    state: IncrementalState,
    Xp: np.ndarray,
    Yp: np.ndarray,
    new_classes: Sequence[int],
) -> None:
    if Xp.ndim != 2 or Xp.shape[0] != state.dim:
        raise ValueError(
            f"feature dimension mismatch: state is {state.dim}-dimensional, "
            f"batch has shape {Xp.shape}"
        )
    if Yp.ndim != 2 or Yp.shape[0] != Xp.shape[1]:
        raise ValueError(
            f"sample count mismatch: {Xp.shape[1]} feature columns vs "
            f"{Yp.shape[0]} target rows"
        )
    expected = state.num_classes + len(new_classes)
    if Yp.shape[1] != expected:
        raise ValueError(
            f"target width {Yp.shape[1]} does not match registry size "
            f"{state.num_classes} plus {len(new_classes)} new classes"
        )
    for label in new_classes:
        if label in state.class_to_col:
            raise ValueError(f"class {label} is already registered")


def _grow_registry(
    state: IncrementalState, new_classes: Sequence[int]
) -> dict[int, int]:
    registry = dict(state.class_to_col)
    for label in new_classes:
        registry[int(label)] = len(registry)
    return registry


def _pad_projection(projection: np.ndarray, extra: int) -> np.ndarray:
    if extra == 0:
        return projection.copy()
    return np.hstack([projection, np.zeros((projection.shape[0], extra))])


def update(
    state: IncrementalState,
    Xp: np.ndarray,
    Yp: np.ndarray,
    new_classes: Sequence[int] = (),
) -> IncrementalState:
    """Absorb a batch by the chunk Woodbury step; returns a new state.

    ``Yp`` must already be ``n'`` rows by ``registry + new`` columns; the
    zero-padding of the old projection happens before the data term is
    applied, so prior classes keep their columns.
    """
    Xp = np.asarray(Xp, dtype=np.float64)
    Yp = np.asarray(Yp, dtype=np.float64)
    if Xp.ndim == 2 and Xp.shape[1] == 0 and not new_classes:
        return state
    _check_update(state, Xp, Yp, new_classes)

    crossing = state.gram_inv @ Xp  # d x n'
    inner = Xp.T @ crossing
    inner[np.diag_indices_from(inner)] += 1.0
    inner = (inner + inner.T) / 2.0
    factor = cho_factor(inner)

    # (I + X''T^-1 X')^-1 X'' T^-1; its transpose is also T_new^-1 X',
    # which supplies the projection's data term without a d x d product.
    solved = cho_solve(factor, crossing.T)  # n' x d
    gram_inv = state.gram_inv - crossing @ solved
    gram_inv = (gram_inv + gram_inv.T) / 2.0

    projection = _pad_projection(state.projection, len(new_classes))
    projection -= crossing @ cho_solve(factor, Xp.T @ projection)
    projection += solved.T @ Yp

    return IncrementalState(
        gram_inv=gram_inv,
        projection=projection,
        class_to_col=_grow_registry(state, new_classes),
        lam=state.lam,
        n_seen=state.n_seen + Xp.shape[1],
        update_count=state.update_count + 1,
    )


def _update_per_sample(
    state: IncrementalState,
    Xp: np.ndarray,
    Yp: np.ndarray,
    new_classes: Sequence[int],
) -> IncrementalState:
    """Rank-one loop over the batch columns; equivalent to the chunk step."""
    gram_inv = state.gram_inv.copy()
    projection = _pad_projection(state.projection, len(new_classes))
    # dger updates the F-contiguous transposed views in place, avoiding a
    # d x d and a d x m temporary per sample; the loop therefore touches
    # each matrix a minimal number of times, which dominates at large d.
    gram_t = gram_inv.T
    proj_t = projection.T
    for i in range(Xp.shape[1]):
        x = Xp[:, i]
        u = gram_inv @ x
        scaled = u / (1.0 + x @ u)
        # scaled is T_new^-1 x, so one rank-one pass applies both the
        # Sherman-Morrison correction and the new sample's data term.
        residual = x @ projection - Yp[i]
        blas.dger(-1.0, residual, scaled, a=proj_t, overwrite_a=1)
        blas.dger(-1.0, u, scaled, a=gram_t, overwrite_a=1)
    gram_inv = (gram_inv + gram_inv.T) / 2.0
    return IncrementalState(
        gram_inv=gram_inv,
        projection=projection,
        class_to_col=_grow_registry(state, new_classes),
        lam=state.lam,
        n_seen=state.n_seen + Xp.shape[1],
        update_count=state.update_count + 1,
    )


def update_auto(
    state: IncrementalState,
    Xp: np.ndarray,
    Yp: np.ndarray,
    new_classes: Sequence[int] = (),
    force_per_sample: bool = False,
) -> IncrementalState:
    """Absorb a batch, choosing the rank-one loop or the chunk step by policy."""
    Xp = np.asarray(Xp, dtype=np.float64)
    Yp = np.asarray(Yp, dtype=np.float64)
    if Xp.ndim == 2 and Xp.shape[1] == 0 and not new_classes:
        return state
    if force_per_sample or prefers_per_sample(Xp.shape[1], state.dim):
        _check_update(state, Xp, Yp, new_classes)
        return _update_per_sample(state, Xp, Yp, new_classes)
    return update(state, Xp, Yp, new_classes)


def update_with_ids(
    state: IncrementalState,
    Xp: np.ndarray,
    ids: Sequence[int] | np.ndarray,
) -> IncrementalState:
    """Absorb labeled samples, registering unseen identities automatically.

    Target rows are indicator rows against the grown registry, so the
    incremental model always trains on the one-hot coding.
    """
    Xp = np.asarray(Xp, dtype=np.float64)
    ids = np.asarray(ids, dtype=np.int64).ravel()
    if Xp.ndim != 2 or Xp.shape[1] != ids.shape[0]:
        raise ValueError(
            f"sample count mismatch: batch shape {Xp.shape} vs {ids.shape[0]} ids"
        )
    new_classes: list[int] = []
    for label in ids.tolist():
        if label not in state.class_to_col and label not in new_classes:
            new_classes.append(label)
    width = state.num_classes + len(new_classes)
    lookup = dict(state.class_to_col)
    for label in new_classes:
        lookup[label] = len(lookup)
    targets = np.zeros((ids.shape[0], width))
    targets[np.arange(ids.shape[0]), [lookup[i] for i in ids.tolist()]] = 1.0
    return update_auto(state, Xp, targets, new_classes=tuple(new_classes))


def save_state(state: IncrementalState, path: str | Path) -> Path:
    """Checkpoint: one JSON header line, then binary payloads (bit-exact)."""
    path = Path(path)
    header = {
        "lambda": state.lam,
        "n_seen": state.n_seen,
        "update_count": state.update_count,
        "class_to_col": [[int(k), int(v)] for k, v in state.class_to_col.items()],
        "payloads": ["gram_inv", "projection"],
    }
    with open(path, "wb") as fp:
        fp.write((json.dumps(header) + "\n").encode())
        write_matrix(fp, state.gram_inv)
        write_matrix(fp, state.projection)
    return path


def load_state(path: str | Path) -> IncrementalState:
    """Restore a checkpoint saved by :func:`save_state`."""
    with open(path, "rb") as fp:
        header = json.loads(fp.readline().decode())
        matrices = {name: read_matrix(fp) for name in header["payloads"]}
    return IncrementalState(
        gram_inv=matrices["gram_inv"],
        projection=matrices["projection"],
        class_to_col={int(k): int(v) for k, v in header["class_to_col"]},
        lam=header["lambda"],
        n_seen=header["n_seen"],
        update_count=header["update_count"],
    )
