"""Gallery ranking and re-identification metrics.

Ranking uses unsquared Euclidean distance between embedded coordinates
(ranking-equivalent to the squared model distance), sorted ascending with
ties broken by ascending gallery index so results are deterministic.

CMC counts, per rank k, the fraction of probes whose first true match
appears at rank <= k; average precision is the mean of precision-at-hit
over a probe's true-match positions.  All metric sums run through
``math.fsum`` and integer hit counts, so values are exactly reproducible
by brute-force enumeration.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from irs.regression import EmbeddingModel, embed


@dataclass
class RankList:
    """One probe's gallery ordering: indices ascending by distance."""

    probe_index: int
    order: np.ndarray
    distances: np.ndarray


@dataclass
class CmcCurve:
    """Cumulative match characteristic; ``values[k]`` is the rank-(k+1) rate."""

    values: np.ndarray

    @property
    def rank1(self) -> float:
        return float(self.values[0])


def rank_gallery(
    model: EmbeddingModel,
    probe: np.ndarray,
    gallery: np.ndarray,
    probe_index: int = -1,
) -> RankList:
    """Rank gallery columns for one probe column under the model metric."""
    probe = np.asarray(probe, dtype=np.float64).reshape(-1, 1)
    gallery = np.asarray(gallery, dtype=np.float64)
    probe_emb = embed(model, probe)
    gallery_emb = embed(model, gallery)
    dists = np.linalg.norm(gallery_emb - probe_emb, axis=1)
    order = np.lexsort((np.arange(dists.shape[0]), dists))
    return RankList(probe_index=probe_index, order=order, distances=dists[order])


def _first_match_ranks(
    ranklists: Sequence[RankList],
    probe_ids: np.ndarray,
    gallery_ids: np.ndarray,
) -> list[int | None]:
    gallery_ids = np.asarray(gallery_ids)
    ranks: list[int | None] = []
    for rl, pid in zip(ranklists, np.asarray(probe_ids)):
        hits = np.flatnonzero(gallery_ids[rl.order] == pid)
        ranks.append(int(hits[0]) + 1 if hits.size else None)
    missing = sum(1 for r in ranks if r is None)
    if missing:
        warnings.warn(
            f"{missing} probe(s) have no true match in the gallery; "
            "excluded from the metric"
        )
    return ranks


def cmc(
    ranklists: Sequence[RankList],
    probe_ids: np.ndarray,
    gallery_ids: np.ndarray,
) -> CmcCurve:
    """Cumulative match characteristic over a gallery-sized rank axis."""
    gallery_ids = np.asarray(gallery_ids)
    ranks = [r for r in _first_match_ranks(ranklists, probe_ids, gallery_ids)
             if r is not None]
    if not ranks:
        raise ValueError("no probe has a true match in the gallery")
    g = gallery_ids.shape[0]
    counts = np.bincount(np.asarray(ranks), minlength=g + 1)[1:]
    return CmcCurve(values=np.cumsum(counts) / len(ranks))


def mean_ap(
    ranklists: Sequence[RankList],
    probe_ids: np.ndarray,
    gallery_ids: np.ndarray,
) -> float:
    """Mean over probes of average precision at the true-match positions."""
    gallery_ids = np.asarray(gallery_ids)
    aps: list[float] = []
    missing = 0
    for rl, pid in zip(ranklists, np.asarray(probe_ids)):
        positions = np.flatnonzero(gallery_ids[rl.order] == pid)
        if positions.size == 0:
            missing += 1
            continue
        precisions = [(i + 1) / (int(pos) + 1) for i, pos in enumerate(positions)]
        aps.append(math.fsum(precisions) / len(precisions))
    if missing:
        warnings.warn(
            f"{missing} probe(s) have no true match in the gallery; "
            "excluded from the metric"
        )
    if not aps:
        raise ValueError("no probe has a true match in the gallery")
    return math.fsum(aps) / len(aps)


def multishot_distance(
    model: EmbeddingModel, probe_set: np.ndarray, gallery_set: np.ndarray
) -> float:
    """Mean embedded distance over all cross-set sample pairs."""
    probe_set = np.asarray(probe_set, dtype=np.float64)
    gallery_set = np.asarray(gallery_set, dtype=np.float64)
    if probe_set.shape[1] == 0 or gallery_set.shape[1] == 0:
        raise ValueError("multishot distance of an empty sample set is undefined")
    return float(cdist(embed(model, probe_set), embed(model, gallery_set)).mean())


def fuse_scores(
    matrices: Sequence[np.ndarray],
    weights: Sequence[float] | None = None,
) -> np.ndarray:
    """Min-max normalize each probe-by-gallery matrix, then weight and sum.

    A constant matrix carries no ranking signal: it contributes zeros and
    triggers a warning.  Default weights are uniform ``1/k``.
    """
    if not matrices:
        raise ValueError("need at least one score matrix")
    mats = [np.asarray(m, dtype=np.float64) for m in matrices]
    shape = mats[0].shape
    for m in mats:
        if m.shape != shape:
            raise ValueError(
                f"score matrix shape mismatch: {m.shape} vs {shape}"
            )
    if weights is None:
        weights = [1.0 / len(mats)] * len(mats)
    if len(weights) != len(mats):
        raise ValueError(
            f"got {len(weights)} weights for {len(mats)} matrices"
        )

    fused = np.zeros(shape)
    for m, w in zip(mats, weights):
        low, high = m.min(), m.max()
        if high == low:
            warnings.warn("constant score matrix contributes zeros to the fusion")
            continue
        fused += w * ((m - low) / (high - low))
    return fused
