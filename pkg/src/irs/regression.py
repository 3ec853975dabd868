"""Closed-form embedding learning by ridge regression onto identity codings.

The linear model minimizes ``||X'P - Y||_F^2 + lambda ||P||_F^2`` over the
projection ``P`` (features by target dimensions), whose unique stationary
point is ``P = (XX' + lambda I)^+ XY``.  The kernel variant replaces raw
features by kernel evaluations against the training anchors and solves the
analogous system in that space.  Both fits are direct factorizations: a
Cholesky solve for positive ``lambda`` on the primal side, and a spectral
solve with an explicit singular-value cutoff wherever a pseudo-inverse is
required, with the effective rank recorded on the model.

A discriminant-analysis solver is included as an independent cross-check:
it reaches the same metric (``P P'`` equals ``G G'``) through scatter
matrices and a symmetric eigenproblem rather than through regression.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist, pdist

from irs.coding import TargetCoding
from irs.dataset import read_matrix, write_matrix

logger = logging.getLogger("irs.regression")

_EPS = np.finfo(np.float64).eps


@dataclass
class EmbeddingModel:
    """A fitted embedding: linear projection or kernel coefficients."""

    kind: str  # "linear" | "kernel"
    lam: float
    projection: np.ndarray | None = None  # d x m (linear)
    coefficients: np.ndarray | None = None  # n_anchors x m (kernel)
    anchors: np.ndarray | None = None  # d x n_anchors (kernel)
    kernel: str | None = None  # "rbf" | "linear" (kernel)
    bandwidth: float | None = None  # rbf width (kernel)
    effective_rank: int | None = None
    class_to_col: dict[int, int] | None = None

    @property
    def out_dim(self) -> int:
        mat = self.projection if self.kind == "linear" else self.coefficients
        return mat.shape[1]


@dataclass
class FdaSolution:
    """Discriminant basis (features by components) with its eigenvalues."""

    basis: np.ndarray
    eigvals: np.ndarray


def _target_matrix(Y) -> tuple[np.ndarray, dict[int, int] | None]:
    if isinstance(Y, TargetCoding):
        return np.asarray(Y.targets, dtype=np.float64), dict(Y.class_to_col)
    return np.asarray(Y, dtype=np.float64), None


def _check_fit_args(X: np.ndarray, Y: np.ndarray, lam: float) -> None:
    if X.ndim != 2 or Y.ndim != 2:
        raise ValueError(
            f"expected 2-D features and targets, got {X.shape} and {Y.shape}"
        )
    if X.shape[1] != Y.shape[0]:
        raise ValueError(
            f"sample count mismatch: {X.shape[1]} feature columns vs "
            f"{Y.shape[0]} target rows"
        )
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")


def fit_linear(X: np.ndarray, Y, lam: float = 0.1) -> EmbeddingModel:
    """Fit the linear embedding ``P = (XX' + lambda I)^+ XY``.

    Parameters
    ----------
    X : features-by-samples matrix (d x n).
    Y : TargetCoding or target matrix with one row per sample (n x m).
    lam : ridge coefficient.  Positive values solve the SPD system by
        Cholesky factorization; ``lam = 0`` falls back to an SVD
        pseudo-inverse with cutoff ``sigma_max * max(d, n) * eps`` and
        records the effective rank on the model.
    """
    X = np.asarray(X, dtype=np.float64)
    Yt, class_to_col = _target_matrix(Y)
    _check_fit_args(X, Yt, lam)
    d, n = X.shape

    effective_rank = None
    if lam > 0:
        system = X @ X.T + lam * np.eye(d)
        projection = cho_solve(cho_factor(system), X @ Yt)
    else:
        u, s, vt = np.linalg.svd(X, full_matrices=False)
        cutoff = s.max(initial=0.0) * max(d, n) * _EPS
        keep = s > cutoff
        effective_rank = int(keep.sum())
        if effective_rank < min(d, n):
            logger.warning(
                "singular system at lambda=0: effective rank %d of %d",
                effective_rank,
                min(d, n),
            )
        projection = (u[:, keep] / s[keep]) @ (vt[keep] @ Yt)

    return EmbeddingModel(
        kind="linear",
        lam=float(lam),
        projection=projection,
        effective_rank=effective_rank,
        class_to_col=class_to_col,
    )


def rbf_kernel(A: np.ndarray, B: np.ndarray, bandwidth: float) -> np.ndarray:
    """Gaussian kernel matrix ``exp(-||a - b||^2 / (2 bandwidth^2))``.

    ``A`` and ``B`` hold one sample per column; the result has one row per
    column of ``A`` and one column per column of ``B``.
    """
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    sq = cdist(np.asarray(A, dtype=np.float64).T, np.asarray(B, dtype=np.float64).T,
               "sqeuclidean")
    return np.exp(-sq / (2.0 * bandwidth**2))


def median_bandwidth(X: np.ndarray, max_samples: int = 1024) -> float:
    """Median heuristic: median of the non-zero pairwise sample distances.

    Large sets are thinned to ``max_samples`` columns by even striding so the
    value stays deterministic.  Falls back to 1.0 when every pair coincides.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[1]
    if n > max_samples:
        X = X[:, np.linspace(0, n - 1, max_samples).astype(np.int64)]
    dists = pdist(X.T)
    dists = dists[dists > 0]
    if dists.size == 0:
        logger.warning("all samples coincide; median bandwidth falls back to 1.0")
        return 1.0
    return float(np.median(dists))


def _gram(A: np.ndarray, B: np.ndarray, kernel: str, bandwidth: float | None) -> np.ndarray:
    if kernel == "rbf":
        return rbf_kernel(A, B, bandwidth)
    if kernel == "linear":
        return np.asarray(A, dtype=np.float64).T @ np.asarray(B, dtype=np.float64)
    raise ValueError(f"unknown kernel {kernel!r}")


def fit_kernel(
    X: np.ndarray,
    Y,
    lam: float = 0.1,
    kernel: str = "rbf",
    bandwidth: float | str = "median",
) -> EmbeddingModel:
    """Fit the kernelised embedding ``Q = (KK' + lambda K)^+ K Y``.

    ``K`` is the training Gram matrix; the training columns become the
    anchor set.  The solve runs through the eigendecomposition of ``K``:
    on the non-null spectrum the coefficient operator is ``1/(sigma +
    lambda)``, which is algebraically the pseudo-inverse form while keeping
    the condition number un-squared.  Eigenvalues at or below ``sigma_max *
    n * eps`` count as null and set the recorded effective rank.
    """
    X = np.asarray(X, dtype=np.float64)
    Yt, class_to_col = _target_matrix(Y)
    _check_fit_args(X, Yt, lam)

    if kernel == "rbf" and bandwidth == "median":
        bandwidth = median_bandwidth(X)
    bw = float(bandwidth) if kernel == "rbf" else None

    K = _gram(X, X, kernel, bw)
    w, V = np.linalg.eigh(K)
    cutoff = w.max(initial=0.0) * K.shape[0] * _EPS
    keep = w > cutoff
    effective_rank = int(keep.sum())
    if effective_rank < K.shape[0]:
        logger.warning(
            "kernel Gram matrix is rank deficient: effective rank %d of %d",
            effective_rank,
            K.shape[0],
        )
    if lam > 0:
        gain = 1.0 / (w[keep] + lam)
    else:
        gain = 1.0 / w[keep]
    coefficients = (V[:, keep] * gain) @ (V[:, keep].T @ Yt)

    return EmbeddingModel(
        kind="kernel",
        lam=float(lam),
        coefficients=coefficients,
        anchors=X.copy(),
        kernel=kernel,
        bandwidth=bw,
        effective_rank=effective_rank,
        class_to_col=class_to_col,
    )


def embed(model: EmbeddingModel, X: np.ndarray) -> np.ndarray:
    """Map samples (one per column) to embedded coordinates, one row each."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a features-by-samples matrix, got shape {X.shape}")
    if model.kind == "linear":
        if X.shape[0] != model.projection.shape[0]:
            raise ValueError(
                f"feature dimension mismatch: model expects "
                f"{model.projection.shape[0]}, got {X.shape[0]}"
            )
        return X.T @ model.projection
    if X.shape[0] != model.anchors.shape[0]:
        raise ValueError(
            f"feature dimension mismatch: model expects "
            f"{model.anchors.shape[0]}, got {X.shape[0]}"
        )
    return _gram(X, model.anchors, model.kernel, model.bandwidth) @ model.coefficients


def match_distance(model: EmbeddingModel, x1: np.ndarray, x2: np.ndarray) -> float:
    """Squared model distance ``(x1 - x2)' P P' (x1 - x2)`` between two samples.

    Equal to the squared Euclidean distance between the embedded points; the
    unsquared form used for ranking is its square root, so rankings under
    either form coincide.
    """
    e1 = embed(model, np.asarray(x1, dtype=np.float64).reshape(-1, 1))
    e2 = embed(model, np.asarray(x2, dtype=np.float64).reshape(-1, 1))
    gap = (e1 - e2).ravel()
    return float(gap @ gap)


def ridge_objective(X: np.ndarray, Y, lam: float, P: np.ndarray) -> float:
    """Ridge objective ``||X'P - Y||_F^2 + lambda ||P||_F^2`` at ``P``."""
    X = np.asarray(X, dtype=np.float64)
    Yt, _ = _target_matrix(Y)
    resid = X.T @ P - Yt
    return float(np.sum(resid * resid) + lam * np.sum(P * P))


def _inv_sqrt_spd(A: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root with spectral cutoff on the null space."""
    w, V = np.linalg.eigh(A)
    cutoff = w.max(initial=0.0) * A.shape[0] * _EPS
    gain = np.where(w > cutoff, 1.0 / np.sqrt(np.clip(w, cutoff, None)), 0.0)
    return (V * gain) @ V.T


def fda_solve(X: np.ndarray, ids: np.ndarray, lam: float = 0.1) -> FdaSolution:
    """Discriminant-analysis solver used as an independent oracle.

    Builds the between-class scatter from class means and the total scatter
    from the raw features, then solves the regularized eigenproblem
    ``(S_t + lambda I)^+ S_b g = gamma g`` through the symmetric form
    ``W^(1/2) S_b W^(1/2)`` with ``W = (S_t + lambda I)^+``.  Components are
    scaled by ``sqrt(gamma)``, the normalization under which the Gram matrix
    of the returned basis equals that of the ridge projection fitted with
    the scaled membership coding.  Centred inputs yield at most ``c - 1``
    components.
    """
    X = np.asarray(X, dtype=np.float64)
    ids = np.asarray(ids, dtype=np.int64).ravel()
    if X.shape[1] != ids.shape[0]:
        raise ValueError(
            f"sample count mismatch: {X.shape[1]} feature columns vs "
            f"{ids.shape[0]} labels"
        )
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    d = X.shape[0]

    labels, inverse = np.unique(ids, return_inverse=True)
    counts = np.bincount(inverse).astype(np.float64)
    means = np.zeros((d, labels.shape[0]))
    np.add.at(means.T, inverse, X.T)
    means /= counts

    between = (means * counts) @ means.T
    total = X @ X.T

    w_half = _inv_sqrt_spd(total + lam * np.eye(d))
    core = w_half @ between @ w_half
    core = (core + core.T) / 2.0
    gamma, U = np.linalg.eigh(core)
    gamma, U = gamma[::-1], U[:, ::-1]  # descending

    cutoff = gamma.max(initial=0.0) * max(d, labels.shape[0]) * _EPS
    q = int((gamma > cutoff).sum())
    basis = (w_half @ U[:, :q]) * np.sqrt(gamma[:q])
    return FdaSolution(basis=basis, eigvals=gamma[:q].copy())


_MODEL_PAYLOADS = {"linear": ("projection",), "kernel": ("coefficients", "anchors")}


def save_model(model: EmbeddingModel, path: str | Path) -> Path:
    """Serialize a model: one JSON header line, then binary matrix payloads."""
    path = Path(path)
    payloads = _MODEL_PAYLOADS[model.kind]
    header = {
        "kind": model.kind,
        "lambda": model.lam,
        "kernel": model.kernel,
        "bandwidth": model.bandwidth,
        "effective_rank": model.effective_rank,
        "class_to_col": (
            None
            if model.class_to_col is None
            else [[int(k), int(v)] for k, v in model.class_to_col.items()]
        ),
        "payloads": list(payloads),
    }
    with open(path, "wb") as fp:
        fp.write((json.dumps(header) + "\n").encode())
        for name in payloads:
            write_matrix(fp, getattr(model, name))
    return path


def load_model(path: str | Path) -> EmbeddingModel:
    """Load a model saved by :func:`save_model`."""
    with open(path, "rb") as fp:
        header = json.loads(fp.readline().decode())
        matrices = {name: read_matrix(fp) for name in header["payloads"]}
    class_to_col = (
        None
        if header["class_to_col"] is None
        else {int(k): int(v) for k, v in header["class_to_col"]}
    )
    return EmbeddingModel(
        kind=header["kind"],
        lam=header["lambda"],
        projection=matrices.get("projection"),
        coefficients=matrices.get("coefficients"),
        anchors=matrices.get("anchors"),
        kernel=header["kernel"],
        bandwidth=header["bandwidth"],
        effective_rank=header["effective_rank"],
        class_to_col=class_to_col,
    )
