"""Command-line interface.

Subcommands: ``gen-synth`` (write a synthetic dataset as manifest +
payload), ``train`` (batch fit + held-out ranking report), ``evaluate``
(re-score a saved model), ``simulate`` (oracle-annotated labeling sessions:
single runs with log/checkpoint output, multi-seed aggregation, strategy
comparison, and headless replay of a recorded log), and ``serve`` (the HTTP
annotation service).

Reports are printed as JSON on stdout; validation and I/O failures exit
with code 2 and a message on stderr.  The ``IRS_LOG`` environment variable
sets the logging level (e.g. ``IRS_LOG=DEBUG``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from irs.active import (
    annotation_record,
    header_record,
    replay_records,
    session_from_config,
)
from irs.coding import fda, onehot, random_coding
from irs.dataset import (
    SyntheticSpec,
    columns_for,
    gen_synthetic,
    load_features,
    make_split,
    write_features,
)
from irs.evaluation import cmc, mean_ap, rank_gallery
from irs.incremental import save_state
from irs.protocol import strategy_checkpoints
from irs.regression import fit_kernel, fit_linear, load_model, save_model
from irs.service import (
    CHECKPOINT_FILENAME,
    LOG_FILENAME,
    AnnotationService,
    serve_forever,
)

logger = logging.getLogger(__name__)


def _bandwidth_arg(text: str) -> float | str:
    if text == "median":
        return text
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"bandwidth must be 'median' or a number, got {text!r}"
        ) from exc


def _budgets_arg(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"budgets must be comma-separated integers, got {text!r}"
        ) from exc


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--lambda", dest="lam", type=float, default=0.1,
        help="ridge coefficient (default 0.1)",
    )
    parser.add_argument(
        "--kernel", choices=["none", "rbf", "linear"], default="none",
        help="feature map: none (raw features), rbf, or linear kernel",
    )
    parser.add_argument(
        "--bandwidth", type=_bandwidth_arg, default="median",
        help="rbf width: 'median' heuristic or a number",
    )


def _add_split_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--ratio", type=float, default=0.5,
        help="fraction of identities used for training (default 0.5)",
    )
    parser.add_argument(
        "--seed", type=int, default=0, help="seed for splits and sessions"
    )


def _write_cmc_csv(values: list[float], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["curve", "rank", "value"])
        writer.writerows(
            ("final", rank, value) for rank, value in enumerate(values, start=1)
        )


def _evaluate_split(model, fm, split) -> dict:
    probe_cols = columns_for(fm, split.test_ids, cam=split.probe_cam)
    gallery_cols = columns_for(fm, split.test_ids, cam=split.gallery_cam)
    gallery = fm.data[:, gallery_cols]
    ranklists = [
        rank_gallery(model, fm.data[:, [col]], gallery, probe_index=int(col))
        for col in probe_cols
    ]
    probe_ids = fm.ids[probe_cols]
    gallery_ids = fm.ids[gallery_cols]
    curve = cmc(ranklists, probe_ids, gallery_ids)
    return {
        "rank1": curve.rank1,
        "mAP": mean_ap(ranklists, probe_ids, gallery_ids),
        "cmc": curve.values.tolist(),
    }


def _print_report(report: dict) -> None:
    print(json.dumps(report, indent=2))


# ----- subcommands --------------------------------------------------------


def cmd_gen_synth(args: argparse.Namespace) -> int:
    fm = gen_synthetic(
        SyntheticSpec(
            num_ids=args.num_ids,
            imgs_per_id_per_cam=args.imgs_per_id,
            d=args.d,
            view_shift_scale=args.shift,
            noise_scale=args.noise,
            seed=args.seed,
        )
    )
    if args.name:
        fm.name = args.name
    path = write_features(fm, args.out, fmt=args.format)
    _print_report({"manifest": str(path), "d": fm.dim, "n": fm.num_samples})
    return 0


_CODINGS = {"onehot": onehot, "fda": fda, "random": random_coding}


def cmd_train(args: argparse.Namespace) -> int:
    fm = load_features(args.manifest)
    split = make_split(fm, ratio=args.ratio, seed=args.seed)
    train_cols = columns_for(fm, split.train_ids)
    X = fm.data[:, train_cols]
    ids = fm.ids[train_cols]
    if args.coding == "random":
        coding = random_coding(ids, seed=args.seed)
    else:
        coding = _CODINGS[args.coding](ids)

    if args.kernel == "none":
        model = fit_linear(X, coding, lam=args.lam)
    else:
        model = fit_kernel(
            X, coding, lam=args.lam, kernel=args.kernel, bandwidth=args.bandwidth
        )

    report = {
        "train_identities": int(split.train_ids.size),
        "test_identities": int(split.test_ids.size),
        "coding": args.coding,
        "kernel": args.kernel,
        "effective_rank": model.effective_rank,
        **_evaluate_split(model, fm, split),
    }
    if args.model_out:
        save_model(model, args.model_out)
        report["model"] = str(args.model_out)
    if args.cmc_csv:
        _write_cmc_csv(report["cmc"], args.cmc_csv)
    _print_report(report)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    fm = load_features(args.manifest)
    split = make_split(fm, ratio=args.ratio, seed=args.seed)
    model = load_model(args.model)
    report = {
        "model": str(args.model),
        "test_identities": int(split.test_ids.size),
        **_evaluate_split(model, fm, split),
    }
    if args.cmc_csv:
        _write_cmc_csv(report["cmc"], args.cmc_csv)
    _print_report(report)
    return 0


def _write_session_log(session, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    ranks = [a.true_match_rank for a in session.annotations]
    records = [header_record(session)]
    records += [annotation_record(a) for a in session.annotations]
    records.append(
        {
            "type": "complete",
            "annotations": len(session.annotations),
            "skipped": 0,
            "mean_true_match_rank": float(np.mean(ranks)) if ranks else None,
            "rank_history": ranks,
        }
    )
    with (out_dir / LOG_FILENAME).open("w") as fp:
        for record in records:
            fp.write(json.dumps(record) + "\n")
    save_state(session.state, out_dir / CHECKPOINT_FILENAME)


def _replay(args: argparse.Namespace, fm) -> int:
    lines = Path(args.replay).read_text().splitlines()
    records = [json.loads(line) for line in lines if line.strip()]
    if not records or records[0].get("type") != "header":
        print(f"error: {args.replay} has no header record", file=sys.stderr)
        return 2
    header = records[0]
    described = header.get("dataset", {})
    if described.get("d") != fm.dim or described.get("n") != fm.num_samples:
        print(
            f"error: replay log was recorded on dataset "
            f"d={described.get('d')}, n={described.get('n')} "
            f"({described.get('name', '?')}); the manifest provides "
            f"d={fm.dim}, n={fm.num_samples}",
            file=sys.stderr,
        )
        return 2
    session = session_from_config(fm, header["config"])
    annotations = [r for r in records if r.get("type") == "annotation"]
    replay_records(session, annotations)
    report = {"mode": "replay", "annotations": len(annotations)}
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        checkpoint = out_dir / CHECKPOINT_FILENAME
        save_state(session.state, checkpoint)
        report["checkpoint"] = str(checkpoint)
    _print_report(report)
    return 0


def _compare(args: argparse.Namespace, fm) -> int:
    budgets = sorted(args.budgets or (50, 100, 150, 200))
    strategies = [s.strip() for s in args.compare.split(",") if s.strip()]
    split = make_split(fm, ratio=args.ratio, seed=args.seed)
    rows = []
    for strategy in strategies:
        result = strategy_checkpoints(
            fm,
            split,
            strategy=strategy,
            budgets=budgets,
            lam=args.lam,
            seed_identities=args.seed_identities,
            seed=args.seed,
            kernel=args.kernel,
            bandwidth=args.bandwidth,
        )
        rows += [
            {
                "strategy": strategy,
                "budget": budget,
                "rank1": result["rank1"][budget],
                "mAP": result["map"][budget],
            }
            for budget in budgets
        ]
    _print_report({"budgets": budgets, "strategies": strategies, "rows": rows})
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    fm = load_features(args.manifest)
    if args.replay:
        return _replay(args, fm)
    if args.compare:
        return _compare(args, fm)

    per_seed = []
    total_annotations = 0
    for fold in range(args.seeds):
        seed = args.seed + fold
        split = make_split(fm, ratio=args.ratio, seed=seed)
        result = strategy_checkpoints(
            fm,
            split,
            strategy=args.strategy,
            budgets=[args.budget],
            lam=args.lam,
            seed_identities=args.seed_identities,
            seed=seed,
            kernel=args.kernel,
            bandwidth=args.bandwidth,
        )
        session = result["session"]
        ranks = [a.true_match_rank for a in session.annotations]
        per_seed.append(
            {
                "seed": seed,
                "rank1": result["rank1"][args.budget],
                "mAP": result["map"][args.budget],
                "annotations": len(session.annotations),
                "mean_true_match_rank": float(np.mean(ranks)) if ranks else None,
            }
        )
        total_annotations += len(session.annotations)
        if args.out_dir:
            out_dir = Path(args.out_dir)
            if args.seeds > 1:
                out_dir = out_dir / f"seed-{seed}"
            _write_session_log(session, out_dir)

    report = {
        "strategy": args.strategy,
        "budget": args.budget,
        "seeds": args.seeds,
        "annotations": total_annotations,
        "per_seed": per_seed,
        "mean_rank1": float(np.mean([e["rank1"] for e in per_seed])),
        "mean_map": float(np.mean([e["mAP"] for e in per_seed])),
    }
    if args.out_dir:
        report["out_dir"] = str(args.out_dir)
    _print_report(report)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    fm = load_features(args.manifest)
    train_ids = None
    if args.ratio is not None:
        train_ids = make_split(fm, ratio=args.ratio, seed=args.seed).train_ids
    session_kwargs = dict(
        lam=args.lam,
        strategy=args.strategy,
        budget=args.budget,
        seed_identities=args.seed_identities,
        seed=args.seed,
        train_ids=train_ids,
        kernel=args.kernel,
        bandwidth=args.bandwidth,
        rank_window=args.rank_window,
    )
    from irs.active import make_session

    session = make_session(fm, **session_kwargs)

    thumbnails = None
    manifest = json.loads(Path(args.manifest).read_text())
    if "thumbnails" in manifest:
        base = Path(args.manifest).parent
        thumbnails = [base / p for p in manifest["thumbnails"]]

    service = AnnotationService(
        session, out_dir=args.out_dir, thumbnails=thumbnails
    )
    serve_forever(service, args.host, args.port)
    return 0


# ----- parser -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irs",
        description=(
            "Identity regression spaces: closed-form embedding for "
            "cross-camera re-identification, with incremental updates and "
            "active annotation."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="write a synthetic two-camera dataset")
    p.add_argument("--out", required=True, help="manifest path to write")
    p.add_argument("--num-ids", type=int, default=100)
    p.add_argument(
        "--imgs-per-id", type=int, default=1,
        help="images per identity per camera",
    )
    p.add_argument("--d", type=int, default=64, help="feature dimension")
    p.add_argument("--noise", type=float, default=0.3, help="noise scale")
    p.add_argument("--shift", type=float, default=1.0, help="camera shift scale")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="", help="dataset name for the manifest")
    p.add_argument("--format", choices=["f64le", "csv"], default="f64le")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="batch fit and held-out ranking report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--coding", choices=["onehot", "fda", "random"], default="onehot")
    _add_model_flags(p)
    _add_split_flags(p)
    p.add_argument("--model-out", help="save the fitted model here")
    p.add_argument("--cmc-csv", help="write the CMC curve as CSV here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="re-score a saved model on a split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True, help="saved model file")
    _add_split_flags(p)
    p.add_argument("--cmc-csv", help="write the CMC curve as CSV here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser(
        "simulate",
        help="run annotation sessions with the ground-truth annotator",
    )
    p.add_argument("--manifest", required=True)
    p.add_argument(
        "--strategy", choices=["jointe2", "random", "density"], default="jointe2"
    )
    p.add_argument("--budget", type=int, default=200)
    p.add_argument(
        "--budgets", type=_budgets_arg, default=None,
        help="comma-separated checkpoints for --compare (default 50,100,150,200)",
    )
    p.add_argument("--seed-identities", type=int, default=10)
    p.add_argument("--seeds", type=int, default=1, help="number of folds")
    _add_model_flags(p)
    _add_split_flags(p)
    p.add_argument("--out-dir", help="write session log and checkpoint here")
    p.add_argument(
        "--replay", help="re-apply a recorded session log instead of selecting"
    )
    p.add_argument(
        "--compare",
        help="comma-separated strategies to run at each checkpoint budget",
    )
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="run the HTTP annotation service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument(
        "--strategy", choices=["jointe2", "random", "density"], default="jointe2"
    )
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--seed-identities", type=int, default=10)
    p.add_argument(
        "--rank-window", type=int, default=50,
        help="ranked candidates shown per probe",
    )
    _add_model_flags(p)
    p.add_argument(
        "--ratio", type=float, default=None,
        help="optionally hold out identities; default annotates all",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", help="write session log and checkpoint here")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    level_name = os.environ.get("IRS_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    logging.basicConfig(
        level=level if isinstance(level, int) else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
