"""Identity regression space: embedding learning for re-identification.

The library learns a linear (optionally kernelised) embedding by regressing
feature vectors onto identity-coded target matrices, supports exact
incremental model updates as labels arrive, drives an active labeling loop
that chooses which probe to annotate next, and evaluates matching quality
with standard re-identification metrics.
"""

from irs.active import (
    Annotation,
    JointScores,
    LabelingSession,
    Selection,
    annotation_record,
    apply_annotation,
    header_record,
    joint_scores,
    make_session,
    oracle_annotator,
    rank_session_gallery,
    replay_records,
    run_session,
    score_discrepancy,
    score_diversity,
    score_uncertainty,
    select_next,
    session_from_config,
    session_model,
)
from irs.coding import TargetCoding, fda, onehot, random_coding
from irs.dataset import (
    FeatureMatrix,
    SplitSpec,
    SyntheticSpec,
    columns_for,
    gen_synthetic,
    load_features,
    make_split,
    write_features,
)
from irs.evaluation import (
    CmcCurve,
    RankList,
    cmc,
    fuse_scores,
    mean_ap,
    multishot_distance,
    rank_gallery,
)
from irs.incremental import (
    IncrementalState,
    KernelLift,
    init_state,
    kernel_lift,
    load_state,
    prefers_per_sample,
    save_state,
    update,
    update_auto,
    update_with_ids,
)
from irs.protocol import (
    GrowthProtocol,
    StrategyProtocol,
    config_digest,
    export_cmc_csv,
    run_growth_protocol,
    run_protocol,
    run_strategy_protocol,
    strategy_checkpoints,
)
from irs.regression import (
    EmbeddingModel,
    FdaSolution,
    embed,
    fda_solve,
    fit_kernel,
    fit_linear,
    load_model,
    match_distance,
    median_bandwidth,
    rbf_kernel,
    ridge_objective,
    save_model,
)
from irs.service import AnnotationService, make_server, serve_forever

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "AnnotationService",
    "CmcCurve",
    "EmbeddingModel",
    "FdaSolution",
    "FeatureMatrix",
    "GrowthProtocol",
    "IncrementalState",
    "JointScores",
    "KernelLift",
    "LabelingSession",
    "RankList",
    "Selection",
    "SplitSpec",
    "StrategyProtocol",
    "SyntheticSpec",
    "TargetCoding",
    "annotation_record",
    "apply_annotation",
    "cmc",
    "columns_for",
    "config_digest",
    "embed",
    "export_cmc_csv",
    "fda",
    "fda_solve",
    "fit_kernel",
    "fit_linear",
    "fuse_scores",
    "gen_synthetic",
    "header_record",
    "init_state",
    "joint_scores",
    "kernel_lift",
    "load_features",
    "load_model",
    "load_state",
    "make_server",
    "make_session",
    "make_split",
    "match_distance",
    "mean_ap",
    "median_bandwidth",
    "multishot_distance",
    "onehot",
    "oracle_annotator",
    "prefers_per_sample",
    "random_coding",
    "rank_gallery",
    "rank_session_gallery",
    "rbf_kernel",
    "replay_records",
    "ridge_objective",
    "run_growth_protocol",
    "run_protocol",
    "run_session",
    "run_strategy_protocol",
    "save_model",
    "save_state",
    "score_discrepancy",
    "score_diversity",
    "score_uncertainty",
    "select_next",
    "serve_forever",
    "session_from_config",
    "session_model",
    "strategy_checkpoints",
    "update",
    "update_auto",
    "update_with_ids",
    "write_features",
]
