"""Experiment drivers: the model-growth comparison and the
strategy comparison, each producing a JSON-ready report.

The growth driver fits a small seed batch, grows it to the full training
population through incremental updates (one optional chunk step, then one
identity at a time), and compares the result against the single batch fit
of all the same columns — relative projection gap, ranking agreement on a
held-out identity set, and accumulated learning time (optionally against a
from-scratch refit at every step).

The strategy driver replays the annotation loop with the ground-truth
annotator for each selection strategy over several folds (fresh data and
split per fold), snapshotting ranking accuracy at each budget checkpoint.
Both strategies inside a fold share the data, the split, the seed identity
set, and the update path, so accuracy gaps are attributable to selection
alone.

Accumulated learning time (ALT) sums only the training calls — the initial
fit and every subsequent update — never data generation, ranking, or I/O.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from irs.active import make_session, oracle_annotator, run_session, session_model
from irs.coding import onehot
from irs.dataset import (
    FeatureMatrix,
    SyntheticSpec,
    columns_for,
    gen_synthetic,
    make_split,
)
from irs.evaluation import cmc, mean_ap, rank_gallery
from irs.incremental import init_state, update_with_ids
from irs.regression import EmbeddingModel, fit_linear

KNOWN_STRATEGIES = ("jointe2", "random", "density")


@dataclass(frozen=True)
class GrowthProtocol:
    """Configuration of the incremental-growth vs batch-fit comparison."""

    train_identities: int = 200
    test_identities: int = 100
    d: int = 200
    imgs_per_id_per_cam: int = 1
    view_shift_scale: float = 0.5
    noise_scale: float = 0.1
    data_seed: int = 0
    lam: float = 0.1
    seed_identities: int = 10
    first_chunk_identities: int = 49

    def __post_init__(self) -> None:
        if self.train_identities < 2:
            raise ValueError(
                f"need at least 2 training identities, got {self.train_identities}"
            )
        if self.test_identities < 0:
            raise ValueError(f"test_identities must be >= 0, got {self.test_identities}")
        if not 1 <= self.seed_identities <= self.first_chunk_identities:
            raise ValueError(
                f"seed_identities={self.seed_identities} must lie in [1, "
                f"first_chunk_identities={self.first_chunk_identities}]"
            )
        if self.first_chunk_identities > self.train_identities:
            raise ValueError(
                f"first_chunk_identities={self.first_chunk_identities} cannot "
                f"exceed train_identities={self.train_identities}"
            )
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.d < 1 or self.imgs_per_id_per_cam < 1:
            raise ValueError("d and imgs_per_id_per_cam must be positive")


@dataclass(frozen=True)
class StrategyProtocol:
    """Configuration of the selection-strategy comparison over folds."""

    num_ids: int = 300
    d: int = 64
    imgs_per_id_per_cam: int = 1
    view_shift_scale: float = 1.0
    noise_scale: float = 0.4
    train_ratio: float = 0.75
    lam: float = 0.1
    strategies: tuple[str, ...] = ("jointe2", "random")
    budgets: tuple[int, ...] = (50, 100, 150, 200)
    folds: int = 10
    base_seed: int = 0
    seed_identities: int = 10
    kernel: str = "none"
    bandwidth: float | str = "median"

    def __post_init__(self) -> None:
        if self.folds < 1:
            raise ValueError(f"folds must be at least 1, got {self.folds}")
        if not 0.0 < self.train_ratio < 1.0:
            raise ValueError(
                f"train_ratio must lie strictly between 0 and 1, got {self.train_ratio}"
            )
        if not self.strategies:
            raise ValueError("at least one strategy is required")
        for name in self.strategies:
            if name not in KNOWN_STRATEGIES:
                raise ValueError(
                    f"unknown strategy {name!r}; choose from {KNOWN_STRATEGIES}"
                )
        if len(set(self.strategies)) != len(self.strategies):
            raise ValueError(f"duplicate strategy in {self.strategies}")
        if (
            not self.budgets
            or self.budgets[0] < 1
            or any(b >= a for b, a in zip(self.budgets, self.budgets[1:]))
        ):
            raise ValueError(
                f"budgets must be strictly increasing positive counts, "
                f"got {self.budgets}"
            )
        if self.num_ids < 4:
            raise ValueError(f"need at least 4 identities, got {self.num_ids}")
        if self.seed_identities < 1:
            raise ValueError(
                f"seed_identities must be at least 1, got {self.seed_identities}"
            )


def config_digest(config: GrowthProtocol | StrategyProtocol) -> str:
    """Short stable fingerprint of a protocol configuration."""
    payload = json.dumps(asdict(config), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def _identity_columns(fm: FeatureMatrix, identities: np.ndarray) -> list[int]:
    """All columns of each identity in the given order, both cameras."""
    if identities.size == 0:
        return []
    return np.concatenate(
        [columns_for(fm, [ident]) for ident in identities.tolist()]
    ).tolist()


def _rank_test_split(
    model: EmbeddingModel,
    fm: FeatureMatrix,
    probe_cols: np.ndarray,
    gallery_cols: np.ndarray,
) -> list:
    gallery = fm.data[:, gallery_cols]
    return [
        rank_gallery(model, fm.data[:, [col]], gallery, probe_index=int(col))
        for col in probe_cols
    ]


def run_growth_protocol(
    config: GrowthProtocol,
    *,
    batch_timing: bool = False,
    keep_models: bool = False,
) -> dict:
    """Grow a model incrementally and compare it against the batch fit.

    With ``batch_timing`` the batch side is refit from scratch after the
    seed fit and after every update step, and the report carries both
    accumulated learning times plus their ratio.  ``keep_models`` attaches
    the final models under the non-serializable ``"_models"`` key.
    """
    started = time.perf_counter()
    fm = gen_synthetic(
        SyntheticSpec(
            num_ids=config.train_identities + config.test_identities,
            imgs_per_id_per_cam=config.imgs_per_id_per_cam,
            d=config.d,
            view_shift_scale=config.view_shift_scale,
            noise_scale=config.noise_scale,
            seed=config.data_seed,
        )
    )
    rng = np.random.default_rng(config.data_seed)
    perm = rng.permutation(np.unique(fm.ids))
    train_ids = np.sort(perm[: config.train_identities])
    test_ids = np.sort(perm[config.train_identities :])
    order = rng.permutation(train_ids)

    seed_ids = order[: config.seed_identities]
    chunk_ids = order[config.seed_identities : config.first_chunk_identities]
    single_ids = order[config.first_chunk_identities :]

    seen_cols = _identity_columns(fm, seed_ids)
    alt_incremental = 0.0
    alt_batch = 0.0
    update_times_ms: list[float] = []

    def batch_fit() -> tuple[EmbeddingModel, float]:
        X = fm.data[:, seen_cols]
        Y = onehot(fm.ids[seen_cols])
        t0 = time.perf_counter()
        model = fit_linear(X, Y, lam=config.lam)
        return model, time.perf_counter() - t0

    t0 = time.perf_counter()
    state = init_state(
        fm.data[:, seen_cols], onehot(fm.ids[seen_cols]), lam=config.lam
    )
    alt_incremental += time.perf_counter() - t0
    if batch_timing:
        alt_batch += batch_fit()[1]

    steps: list[np.ndarray] = []
    if chunk_ids.size:
        steps.append(chunk_ids)
    steps.extend(single_ids.reshape(-1, 1))

    for step_ids in steps:
        cols = _identity_columns(fm, step_ids)
        X = fm.data[:, cols]
        ids = fm.ids[cols]
        t0 = time.perf_counter()
        state = update_with_ids(state, X, ids)
        elapsed = time.perf_counter() - t0
        alt_incremental += elapsed
        update_times_ms.append(elapsed * 1e3)
        seen_cols += cols
        if batch_timing:
            alt_batch += batch_fit()[1]

    batch_model, final_fit_s = batch_fit()
    incremental_model = EmbeddingModel(
        kind="linear",
        lam=config.lam,
        projection=state.projection,
        class_to_col=dict(state.class_to_col),
    )
    if incremental_model.class_to_col != batch_model.class_to_col:
        raise RuntimeError("class registries diverged between growth modes")
    projection_rel_gap = float(
        np.linalg.norm(incremental_model.projection - batch_model.projection)
        / np.linalg.norm(batch_model.projection)
    )

    rankings_identical: bool | None = None
    mean_cmc: list[float] = []
    map_value: float | None = None
    if config.test_identities > 0:
        probe_cols = columns_for(fm, test_ids, cam=0)
        gallery_cols = columns_for(fm, test_ids, cam=1)
        incremental_ranks = _rank_test_split(
            incremental_model, fm, probe_cols, gallery_cols
        )
        batch_ranks = _rank_test_split(batch_model, fm, probe_cols, gallery_cols)
        rankings_identical = all(
            np.array_equal(a.order, b.order)
            for a, b in zip(incremental_ranks, batch_ranks)
        )
        probe_ids = fm.ids[probe_cols]
        gallery_ids = fm.ids[gallery_cols]
        mean_cmc = cmc(incremental_ranks, probe_ids, gallery_ids).values.tolist()
        map_value = mean_ap(incremental_ranks, probe_ids, gallery_ids)

    report = {
        "protocol": "growth",
        "config": asdict(config),
        "config_digest": config_digest(config),
        "schedule": {
            "seed_identities": int(seed_ids.size),
            "chunk_step_identities": int(chunk_ids.size),
            "single_steps": int(single_ids.size),
            "updates_total": len(update_times_ms),
        },
        "samples_seen": int(state.n_seen),
        "update_times_ms": update_times_ms,
        "alt_seconds": {
            "incremental": alt_incremental,
            "batch": alt_batch if batch_timing else None,
        },
        "speedup": alt_batch / alt_incremental if batch_timing else None,
        "batch_final_fit_s": final_fit_s,
        "projection_rel_gap": projection_rel_gap,
        "rankings_identical": rankings_identical,
        "mean_cmc": mean_cmc,
        "mAP": map_value,
        "elapsed_seconds": time.perf_counter() - started,
    }
    if keep_models:
        report["_models"] = {"incremental": incremental_model, "batch": batch_model}
    return report


def strategy_checkpoints(
    fm: FeatureMatrix,
    split,
    *,
    strategy: str,
    budgets: list[int] | tuple[int, ...],
    lam: float = 0.1,
    seed_identities: int = 10,
    seed: int = 0,
    kernel: str = "none",
    bandwidth: float | str = "median",
) -> dict:
    """Run one oracle-annotated session through ascending budget checkpoints.

    Returns per-budget rank-1, mean average precision, and the CMC curve on
    the split's test identities, plus the finished session itself.
    """
    probe_cols = columns_for(fm, split.test_ids, cam=split.probe_cam)
    gallery_cols = columns_for(fm, split.test_ids, cam=split.gallery_cam)
    probe_ids = fm.ids[probe_cols]
    gallery_ids = fm.ids[gallery_cols]
    budgets = sorted(budgets)
    session = make_session(
        fm,
        lam=lam,
        strategy=strategy,
        budget=budgets[-1],
        seed_identities=seed_identities,
        seed=seed,
        probe_cam=split.probe_cam,
        gallery_cam=split.gallery_cam,
        train_ids=split.train_ids,
        kernel=kernel,
        bandwidth=bandwidth,
    )
    annotate = oracle_annotator(fm)
    rank1: dict[int, float] = {}
    ap: dict[int, float] = {}
    curves: dict[int, np.ndarray] = {}
    for budget in budgets:
        session.budget = budget
        run_session(session, annotate)
        model = session_model(session)
        ranklists = _rank_test_split(model, fm, probe_cols, gallery_cols)
        curve = cmc(ranklists, probe_ids, gallery_ids)
        rank1[budget] = curve.rank1
        ap[budget] = mean_ap(ranklists, probe_ids, gallery_ids)
        curves[budget] = curve.values
    return {"rank1": rank1, "map": ap, "curves": curves, "session": session}


def run_strategy_protocol(config: StrategyProtocol) -> dict:
    """Compare selection strategies with the ground-truth annotator.

    Each fold draws fresh data and an identity-disjoint split from the fold
    seed; each strategy then runs one session through every budget
    checkpoint, with ranking accuracy measured on the held-out identities.
    """
    started = time.perf_counter()
    budgets = list(config.budgets)
    per_seed: list[dict] = []
    curves: dict[str, dict[int, list[np.ndarray]]] = {
        s: {b: [] for b in budgets} for s in config.strategies
    }

    for fold in range(config.folds):
        fold_seed = config.base_seed + fold
        fm = gen_synthetic(
            SyntheticSpec(
                num_ids=config.num_ids,
                imgs_per_id_per_cam=config.imgs_per_id_per_cam,
                d=config.d,
                view_shift_scale=config.view_shift_scale,
                noise_scale=config.noise_scale,
                seed=fold_seed,
            )
        )
        split = make_split(fm, ratio=config.train_ratio, seed=fold_seed)

        entry: dict = {
            "seed": fold_seed,
            "rank1": {},
            "map": {},
            "mean_true_match_rank": {},
            "annotations": {},
            "alt_seconds": {},
            "mean_update_ms": {},
        }
        for strategy in config.strategies:
            result = strategy_checkpoints(
                fm,
                split,
                strategy=strategy,
                budgets=budgets,
                lam=config.lam,
                seed_identities=config.seed_identities,
                seed=fold_seed,
                kernel=config.kernel,
                bandwidth=config.bandwidth,
            )
            session = result["session"]
            for budget in budgets:
                curves[strategy][budget].append(result["curves"][budget])
            entry["rank1"][strategy] = result["rank1"]
            entry["map"][strategy] = result["map"]
            match_ranks = [a.true_match_rank for a in session.annotations]
            update_ms = [a.update_ms for a in session.annotations]
            entry["mean_true_match_rank"][strategy] = (
                float(np.mean(match_ranks)) if match_ranks else None
            )
            entry["annotations"][strategy] = len(session.annotations)
            entry["alt_seconds"][strategy] = float(sum(update_ms)) / 1e3
            entry["mean_update_ms"][strategy] = (
                float(np.mean(update_ms)) if update_ms else None
            )
        per_seed.append(entry)

    def across_folds(metric: str) -> dict[str, dict[int, float]]:
        return {
            s: {
                b: float(np.mean([e[metric][s][b] for e in per_seed]))
                for b in budgets
            }
            for s in config.strategies
        }

    return {
        "protocol": "strategies",
        "config": asdict(config),
        "config_digest": config_digest(config),
        "per_seed": per_seed,
        "mean_rank1": across_folds("rank1"),
        "mean_map": across_folds("map"),
        "mean_cmc": {
            s: {
                b: np.mean(np.stack(curves[s][b]), axis=0).tolist()
                for b in budgets
            }
            for s in config.strategies
        },
        "elapsed_seconds": time.perf_counter() - started,
    }


def run_protocol(config: GrowthProtocol | StrategyProtocol, **kwargs) -> dict:
    """Run whichever comparison the configuration describes."""
    if isinstance(config, GrowthProtocol):
        return run_growth_protocol(config, **kwargs)
    if isinstance(config, StrategyProtocol):
        return run_strategy_protocol(config, **kwargs)
    raise TypeError(
        f"expected a GrowthProtocol or StrategyProtocol, got {type(config).__name__}"
    )


def export_cmc_csv(report: dict, path: str | Path) -> Path:
    """Write a report's CMC curve(s) as ``curve,rank,value`` rows."""
    rows: list[tuple[str, int, float]] = []
    if report.get("protocol") == "growth":
        rows = [
            ("final", rank, value)
            for rank, value in enumerate(report["mean_cmc"], start=1)
        ]
    elif report.get("protocol") == "strategies":
        for strategy, by_budget in report["mean_cmc"].items():
            for budget, curve in by_budget.items():
                rows += [
                    (f"{strategy}@{budget}", rank, value)
                    for rank, value in enumerate(curve, start=1)
                ]
    else:
        raise ValueError("report carries no CMC curves to export")
    path = Path(path)
    with path.open("w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["curve", "rank", "value"])
        writer.writerows(rows)
    return path
