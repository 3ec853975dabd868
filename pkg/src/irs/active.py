"""Active labeling: who to annotate next, and the annotation session loop.

Selection scores every unlabeled probe by three criteria, each a function
of the current model metric (squared embedded distance):

* diversity: distance to the nearest already-labeled probe-view sample —
  explore regions the labeled set does not cover yet;
* discrepancy: distance to the nearest gallery-pool sample — target probes
  the current metric fails to pull near any cross-view candidate;
* uncertainty: entropy of the matching distribution obtained by a softmax
  over negated distances to the gallery pool — target ambiguous rankings.

Each criterion is normalized by its maximum over the pool (an all-zero
criterion stays zero), the three are summed, and the argmax wins with ties
broken toward the lowest dataset index.  Baselines: seeded uniform-random
selection, and a density heuristic (smallest mean squared distance to the
k nearest unlabeled neighbors).

Each accepted annotation verifies one probe-gallery pair, which joins the
model through an incremental update; both samples then leave their pools.
Sessions are replayable: reapplying a recorded (probe, gallery) sequence
to a session built with the same configuration reproduces the model state
bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from irs.coding import onehot
from irs.dataset import FeatureMatrix, columns_for
from irs.evaluation import RankList
from irs.incremental import IncrementalState, KernelLift, init_state, kernel_lift, update_with_ids
from irs.regression import EmbeddingModel


@dataclass
class Annotation:
    """One verified probe-gallery pair and its selection/update metadata."""

    step: int
    probe_index: int
    gallery_index: int
    true_match_rank: int
    chosen_by: str
    epsilon1: float | None
    epsilon2: float | None
    epsilon3: float | None
    update_ms: float


@dataclass
class Selection:
    """The probe chosen for annotation and its raw criterion values."""

    probe_index: int
    chosen_by: str
    epsilon1: float | None
    epsilon2: float | None
    epsilon3: float | None


@dataclass
class JointScores:
    """Raw and max-normalized criterion vectors over the probe pool."""

    diversity: np.ndarray
    discrepancy: np.ndarray
    uncertainty: np.ndarray
    normalized_diversity: np.ndarray
    normalized_discrepancy: np.ndarray
    normalized_uncertainty: np.ndarray
    total: np.ndarray


@dataclass
class LabelingSession:
    """Mutable state of one annotation session over a fixed dataset."""

    features: FeatureMatrix
    state: IncrementalState
    probe_pool: list[int]
    gallery_pool: list[int]
    labeled_probes: list[int]
    labeled_gallery: list[int]
    budget: int
    strategy: str = "jointe2"
    seed: int = 0
    rng: np.random.Generator | None = None
    lift: KernelLift | None = None
    gallery_pool_mode: str = "remaining"
    rank_window: int = 50
    density_neighbors: int = 5
    annotations: list[Annotation] = field(default_factory=list)
    config: dict | None = None

    def __post_init__(self) -> None:
        self.probe_pool = sorted(int(i) for i in self.probe_pool)
        self.gallery_pool = sorted(int(i) for i in self.gallery_pool)
        if self.rng is None:
            self.rng = np.random.default_rng(self.seed)

    @property
    def budget_left(self) -> int:
        return self.budget - len(self.annotations)


def make_session(
    features: FeatureMatrix,
    *,
    lam: float = 0.1,
    strategy: str = "jointe2",
    budget: int = 200,
    seed_identities: int = 10,
    seed: int = 0,
    probe_cam: int = 0,
    gallery_cam: int = 1,
    train_ids: Sequence[int] | np.ndarray | None = None,
    kernel: str = "none",
    bandwidth: float | str = "median",
    gallery_pool_mode: str = "remaining",
    rank_window: int = 50,
    density_neighbors: int = 5,
) -> LabelingSession:
    """Build a session: draw a seed identity set, fit the initial model on
    its samples, and fill the pools with the remaining identities.

    All randomness (the seed-set draw, and any random-strategy picks later)
    comes from one generator seeded with ``seed``, so a session is fully
    reproducible from its configuration.  With ``kernel`` set, the seed
    samples become the fixed anchor set and the whole session runs in
    lifted coordinates.
    """
    candidates = np.unique(
        features.ids if train_ids is None else np.asarray(train_ids, dtype=np.int64)
    )
    if seed_identities < 1 or seed_identities >= candidates.shape[0]:
        raise ValueError(
            f"seed_identities={seed_identities} must be in [1, "
            f"{candidates.shape[0] - 1}] to leave an unlabeled pool"
        )
    rng = np.random.default_rng(seed)
    seed_ids = np.sort(rng.choice(candidates, size=seed_identities, replace=False))

    seed_probe_cols: list[int] = []
    seed_gallery_cols: list[int] = []
    for ident in seed_ids.tolist():
        seed_probe_cols += columns_for(features, ids=[ident], cam=probe_cam).tolist()
        seed_gallery_cols += columns_for(features, ids=[ident], cam=gallery_cam).tolist()
    init_cols = seed_probe_cols + seed_gallery_cols
    if not seed_probe_cols or not seed_gallery_cols:
        raise ValueError("seed identities have no samples in one of the cameras")

    lift = None
    X0 = features.data[:, init_cols]
    if kernel != "none":
        lift = kernel_lift(X0, kernel=kernel, bandwidth=bandwidth)
        X0 = lift(X0)
    state = init_state(X0, onehot(features.ids[init_cols]), lam=lam)

    pool_ids = candidates[~np.isin(candidates, seed_ids)]
    return LabelingSession(
        features=features,
        state=state,
        probe_pool=columns_for(features, ids=pool_ids, cam=probe_cam).tolist(),
        gallery_pool=columns_for(features, ids=pool_ids, cam=gallery_cam).tolist(),
        labeled_probes=seed_probe_cols,
        labeled_gallery=seed_gallery_cols,
        budget=budget,
        strategy=strategy,
        seed=seed,
        rng=rng,
        lift=lift,
        gallery_pool_mode=gallery_pool_mode,
        rank_window=rank_window,
        density_neighbors=density_neighbors,
        config={
            "lambda": lam,
            "strategy": strategy,
            "budget": budget,
            "seed_identities": seed_identities,
            "seed": seed,
            "probe_cam": probe_cam,
            "gallery_cam": gallery_cam,
            "train_ids": None if train_ids is None else
            np.asarray(train_ids, dtype=np.int64).tolist(),
            "kernel": kernel,
            "bandwidth": bandwidth,
            "gallery_pool_mode": gallery_pool_mode,
            "rank_window": rank_window,
            "density_neighbors": density_neighbors,
        },
    )


def session_from_config(features: FeatureMatrix, config: dict) -> LabelingSession:
    """Rebuild a session from a stored configuration (exact twin)."""
    kwargs = dict(config)
    kwargs["lam"] = kwargs.pop("lambda")
    return make_session(features, **kwargs)


def session_model(session: LabelingSession) -> EmbeddingModel:
    """Snapshot the session's current model for ranking and serialization.

    Plain sessions yield a linear model over raw features; kernel sessions
    yield a kernel model whose anchors are the session's fixed lift anchors.
    The arrays are shared with the live state, not copied — treat the
    snapshot as read-only.
    """
    if session.lift is None:
        return EmbeddingModel(
            kind="linear",
            lam=session.state.lam,
            projection=session.state.projection,
            class_to_col=dict(session.state.class_to_col),
        )
    return EmbeddingModel(
        kind="kernel",
        lam=session.state.lam,
        coefficients=session.state.projection,
        anchors=session.lift.anchors,
        kernel=session.lift.kernel,
        bandwidth=session.lift.bandwidth,
        class_to_col=dict(session.state.class_to_col),
    )


def _embed_cols(session: LabelingSession, cols: Sequence[int]) -> np.ndarray:
    """Embedded coordinates (one row per sample) under the current model."""
    X = session.features.data[:, list(cols)]
    if session.lift is not None:
        X = session.lift(X)
    return X.T @ session.state.projection


def _reference_gallery(session: LabelingSession) -> list[int]:
    if session.gallery_pool_mode == "remaining":
        return session.gallery_pool
    if session.gallery_pool_mode == "full":
        return sorted(session.gallery_pool + session.labeled_gallery)
    raise ValueError(f"unknown gallery_pool_mode {session.gallery_pool_mode!r}")


def score_diversity(session: LabelingSession) -> np.ndarray:
    """Per-probe min squared distance to the labeled probe-view samples."""
    if not session.probe_pool:
        return np.zeros(0)
    if not session.labeled_probes:
        return np.zeros(len(session.probe_pool))
    pool = _embed_cols(session, session.probe_pool)
    labeled = _embed_cols(session, session.labeled_probes)
    return cdist(pool, labeled, "sqeuclidean").min(axis=1)


def score_discrepancy(session: LabelingSession) -> np.ndarray:
    """Per-probe min squared distance to the gallery reference pool."""
    if not session.probe_pool:
        return np.zeros(0)
    reference = _reference_gallery(session)
    if not reference:
        return np.zeros(len(session.probe_pool))
    pool = _embed_cols(session, session.probe_pool)
    gallery = _embed_cols(session, reference)
    return cdist(pool, gallery, "sqeuclidean").min(axis=1)


def score_uncertainty(session: LabelingSession) -> np.ndarray:
    """Entropy of the soft matching distribution over the gallery pool.

    Probabilities are a softmax of negated squared distances (shifted by
    the minimum distance for stability); entropy uses the natural log, so
    a uniform ranking over k candidates scores ln k.
    """
    if not session.probe_pool:
        return np.zeros(0)
    reference = _reference_gallery(session)
    if len(reference) < 2:
        return np.zeros(len(session.probe_pool))
    pool = _embed_cols(session, session.probe_pool)
    gallery = _embed_cols(session, reference)
    logits = -cdist(pool, gallery, "sqeuclidean")
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    probs = weights / weights.sum(axis=1, keepdims=True)
    plogp = np.where(probs > 0, probs * np.log(probs, where=probs > 0), 0.0)
    return -plogp.sum(axis=1)


def _normalize(values: np.ndarray) -> np.ndarray:
    top = values.max(initial=0.0)
    return values / top if top > 0 else np.zeros_like(values)


def joint_scores(session: LabelingSession) -> JointScores:
    """All three criteria, their normalizations, and the joint total."""
    diversity = score_diversity(session)
    discrepancy = score_discrepancy(session)
    uncertainty = score_uncertainty(session)
    n1, n2, n3 = map(_normalize, (diversity, discrepancy, uncertainty))
    return JointScores(
        diversity=diversity,
        discrepancy=discrepancy,
        uncertainty=uncertainty,
        normalized_diversity=n1,
        normalized_discrepancy=n2,
        normalized_uncertainty=n3,
        total=n1 + n2 + n3,
    )


def select_next(session: LabelingSession) -> Selection:
    """Choose the next probe under the session's strategy.

    Pools are kept sorted, and argmax/argmin take the first winner, so ties
    resolve to the lowest dataset index deterministically.
    """
    if not session.probe_pool:
        raise ValueError("probe pool is empty")
    pool = np.asarray(session.probe_pool)

    if session.strategy == "jointe2":
        scores = joint_scores(session)
        pos = int(np.argmax(scores.total))
        return Selection(
            probe_index=int(pool[pos]),
            chosen_by="jointe2",
            epsilon1=float(scores.diversity[pos]),
            epsilon2=float(scores.discrepancy[pos]),
            epsilon3=float(scores.uncertainty[pos]),
        )
    if session.strategy == "random":
        pos = int(session.rng.integers(pool.shape[0]))
        return Selection(int(pool[pos]), "random", None, None, None)
    if session.strategy == "density":
        embedded = _embed_cols(session, session.probe_pool)
        gaps = cdist(embedded, embedded, "sqeuclidean")
        np.fill_diagonal(gaps, np.inf)
        k = min(session.density_neighbors, pool.shape[0] - 1)
        if k < 1:
            pos = 0
        else:
            nearest = np.sort(gaps, axis=1)[:, :k]
            pos = int(np.argmin(nearest.mean(axis=1)))
        return Selection(int(pool[pos]), "density", None, None, None)
    raise ValueError(f"unknown strategy {session.strategy!r}")


def rank_session_gallery(session: LabelingSession, probe_index: int) -> RankList:
    """Rank the unlabeled gallery pool for one probe; order holds dataset
    column indices (unsquared embedded distance, ties to the lower index)."""
    if not session.gallery_pool:
        raise ValueError("gallery pool is empty")
    pool = np.asarray(session.gallery_pool)
    probe = _embed_cols(session, [probe_index])
    gallery = _embed_cols(session, session.gallery_pool)
    dists = np.linalg.norm(gallery - probe, axis=1)
    order = np.lexsort((np.arange(pool.shape[0]), dists))
    return RankList(
        probe_index=int(probe_index), order=pool[order], distances=dists[order]
    )


def apply_annotation(
    session: LabelingSession,
    probe_index: int,
    gallery_index: int,
    *,
    chosen_by: str = "replay",
    epsilon1: float | None = None,
    epsilon2: float | None = None,
    epsilon3: float | None = None,
    ranklist: RankList | None = None,
) -> Annotation:
    """Accept one verified pair: update the model incrementally and retire
    both samples from their pools.  This is the single state-advancing
    path — the interactive loop, the HTTP service, and headless replay all
    go through it, which is what makes replay bit-exact."""
    if probe_index not in session.probe_pool:
        raise ValueError(f"probe {probe_index} is not in the probe pool")
    if gallery_index not in session.gallery_pool:
        raise ValueError(f"gallery sample {gallery_index} is not in the gallery pool")
    if ranklist is None:
        ranklist = rank_session_gallery(session, probe_index)
    rank_pos = int(np.flatnonzero(ranklist.order == gallery_index)[0]) + 1
    label = int(session.features.ids[probe_index])

    start = time.perf_counter()
    X = session.features.data[:, [probe_index, gallery_index]]
    if session.lift is not None:
        X = session.lift(X)
    session.state = update_with_ids(session.state, X, np.array([label, label]))
    update_ms = (time.perf_counter() - start) * 1e3

    session.probe_pool.remove(probe_index)
    session.labeled_probes.append(probe_index)
    session.gallery_pool.remove(gallery_index)
    session.labeled_gallery.append(gallery_index)

    annotation = Annotation(
        step=len(session.annotations) + 1,
        probe_index=int(probe_index),
        gallery_index=int(gallery_index),
        true_match_rank=rank_pos,
        chosen_by=chosen_by,
        epsilon1=epsilon1,
        epsilon2=epsilon2,
        epsilon3=epsilon3,
        update_ms=update_ms,
    )
    session.annotations.append(annotation)
    return annotation


def oracle_annotator(features: FeatureMatrix) -> Callable[[int, RankList], int]:
    """Ground-truth annotator: returns the highest-ranked true match."""

    def annotate(probe_index: int, ranklist: RankList) -> int:
        target = features.ids[probe_index]
        for gallery_index in ranklist.order.tolist():
            if features.ids[gallery_index] == target:
                return int(gallery_index)
        raise LookupError(f"no true match in the gallery pool for probe {probe_index}")

    return annotate


def run_session(
    session: LabelingSession,
    annotator: Callable[[int, RankList], int],
    annotator_retries: int = 0,
) -> LabelingSession:
    """Drive the session until the budget is spent or a pool runs dry.

    The annotator receives the chosen probe and the ranked gallery and
    returns the verified gallery index.  Failures are retried up to
    ``annotator_retries`` times and then surface; a step is never skipped
    silently.
    """
    while session.budget_left > 0 and session.probe_pool and session.gallery_pool:
        selection = select_next(session)
        ranklist = rank_session_gallery(session, selection.probe_index)
        for attempt in range(annotator_retries + 1):
            try:
                gallery_index = annotator(selection.probe_index, ranklist)
                break
            except Exception:
                if attempt == annotator_retries:
                    raise
        apply_annotation(
            session,
            selection.probe_index,
            int(gallery_index),
            chosen_by=selection.chosen_by,
            epsilon1=selection.epsilon1,
            epsilon2=selection.epsilon2,
            epsilon3=selection.epsilon3,
            ranklist=ranklist,
        )
    return session


def header_record(session: LabelingSession) -> dict:
    """First line of a session log: enough to rebuild the session's twin."""
    return {
        "type": "header",
        "config": session.config,
        "dataset": {
            "name": session.features.name,
            "d": session.features.dim,
            "n": session.features.num_samples,
        },
    }


def annotation_record(annotation: Annotation) -> dict:
    """One session-log line for an accepted annotation."""
    return {
        "type": "annotation",
        "step": annotation.step,
        "probe_index": annotation.probe_index,
        "gallery_index": annotation.gallery_index,
        "chosen_by": annotation.chosen_by,
        "true_match_rank": annotation.true_match_rank,
        "epsilon1": annotation.epsilon1,
        "epsilon2": annotation.epsilon2,
        "epsilon3": annotation.epsilon3,
        "update_ms": annotation.update_ms,
    }


def replay_records(session: LabelingSession, records: Sequence[dict]) -> LabelingSession:
    """Reapply a recorded annotation sequence (bit-exact model evolution)."""
    for record in records:
        apply_annotation(
            session,
            int(record["probe_index"]),
            int(record["gallery_index"]),
            chosen_by=str(record.get("chosen_by", "replay")),
        )
    return session
