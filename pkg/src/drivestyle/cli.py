"""Command-line interface.

Subcommands cover the full pipeline: ``synth`` makes labeled synthetic
trajectories, ``extract`` turns trajectory CSVs into a feature table,
``describe`` renders features into text, ``embed`` encodes text into
vectors, ``train``/``eval`` fit and score the fusion classifier,
``ablate`` runs the five-variant comparison and ``report`` emits
correlation and distribution summaries.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 remote
service error, 5 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .cache import TextCache
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig, load_run_config
from .embed import embed_text, load_embeddings, save_embeddings
from .errors import (
    ConfigError,
    DataError,
    DriveStyleError,
    EmptyTrainingSetError,
    NumericError,
    ServiceError,
)
from .evaluation import (
    compute_metrics,
    correlation_matrix,
    distribution_report,
    run_ablation,
    stratified_split,
    write_ablation_table,
    write_correlation_csv,
    write_distribution_csv,
)
from .features import (
    FeatureExtractor,
    FeatureVector,
    NormStats,
    read_feature_csv,
    write_feature_csv,
)
from .ingest import clean_segments, load_segments_dir, write_segment
from .model import ModelNet, param_count
from .semantic import describe
from .synth import DEFAULT_STYLE_SPECS, gen_synthetic
from .training import DataBundle, train

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SERVICE = 4
EXIT_NUMERIC = 5


def _ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_json(path: str, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config(args) -> RunConfig:
    return load_run_config(
        path=args.config,
        seed_override=args.seed,
        out_override=args.out,
        offline=args.offline,
    )


def _cache_for(config: RunConfig) -> TextCache:
    directory = config.cache_dir or os.path.join(config.out_dir, "cache")
    return TextCache(directory)


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    config = _load_config(args)
    out = _ensure_dir(config.out_dir)
    segments = gen_synthetic(
        n_per_class=config.synth.n_per_class,
        length=config.synth.length,
        dt=config.synth.dt,
        seed=config.seed,
        tau=config.features.tau,
        margin=config.synth.margin,
    )
    for segment in segments:
        write_segment(segment, os.path.join(out, f"{segment.segment_id}.csv"))
    manifest = {
        "n_segments": len(segments),
        "n_per_class": config.synth.n_per_class,
        "length": config.synth.length,
        "dt": config.synth.dt,
        "seed": config.seed,
        "tau": config.features.tau,
        "styles": [spec.label.display for spec in DEFAULT_STYLE_SPECS],
    }
    _write_json(os.path.join(out, "synth_manifest.json"), manifest)
    print(f"wrote {len(segments)} segments to {out}")
    return 0


def cmd_extract(args) -> int:
    config = _load_config(args)
    out_csv = args.output
    parent = os.path.dirname(os.path.abspath(out_csv))
    _ensure_dir(parent)
    segments, skipped = load_segments_dir(args.input, skip_bad=args.skip_bad)
    kept, report = clean_segments(segments, config.clean)
    drop = report.as_dict()
    drop["unparseable_files"] = skipped
    _write_json(os.path.join(parent, "drop_report.json"), drop)
    if not kept:
        raise EmptyTrainingSetError(
            "no segments remain after parsing and cleaning; see drop_report.json"
        )
    signals = config.features.resolve_signals()
    extractor = FeatureExtractor(signals=signals, tau=config.features.tau)
    matrix = extractor.fit_transform(kept)
    names = tuple(extractor.get_feature_names_out())
    write_feature_csv(
        out_csv,
        ids=[s.segment_id for s in kept],
        labels=[s.label for s in kept],
        matrix=matrix,
        names=names,
    )
    meta = {
        "tau": config.features.tau,
        "signals": list(signals),
        "feature_dim": len(names),
        "n_in": len(segments),
        "n_kept": len(kept),
        "seed": config.seed,
    }
    _write_json(os.path.join(parent, "extract_meta.json"), meta)
    print(
        f"extracted {len(kept)} of {len(segments)} segments "
        f"({report.total_dropped} dropped, {len(skipped)} unparseable) -> {out_csv}"
    )
    return 0


def cmd_describe(args) -> int:
    config = _load_config(args)
    out = _ensure_dir(config.out_dir)
    ids, labels, matrix, names = read_feature_csv(args.features)
    if not ids:
        raise EmptyTrainingSetError("feature file has no rows")
    stats = NormStats.fit(matrix, names)
    stats.save(os.path.join(out, "norm_stats.json"))
    normalized = stats.apply(matrix)
    cache = _cache_for(config)
    remote_calls = 0
    cache_hits = 0
    path = os.path.join(out, "descriptions.jsonl")
    with open(path, "w") as fh:
        for i, segment_id in enumerate(ids):
            fv = FeatureVector(
                values=normalized[i],
                names=names,
                segment_id=segment_id,
                label=labels[i],
            )
            result = describe(fv, config.llm, cache)
            if result.cached:
                cache_hits += 1
            elif result.source == "remote":
                remote_calls += 1
            fh.write(
                json.dumps(
                    {
                        "segment_id": segment_id,
                        "text": result.text,
                        "source": result.source,
                        "model_id": result.model_id,
                        "cached": result.cached,
                    }
                )
                + "\n"
            )
    _write_json(
        os.path.join(out, "describe_meta.json"),
        {
            "n": len(ids),
            "remote_calls": remote_calls,
            "cache_hits": cache_hits,
            "model_id": config.llm.model_id if config.llm.endpoint else "offline",
            "seed": config.seed,
        },
    )
    print(
        f"described {len(ids)} segments ({remote_calls} remote calls, "
        f"{cache_hits} cache hits) -> {path}"
    )
    return 0


def cmd_embed(args) -> int:
    config = _load_config(args)
    parent = os.path.dirname(os.path.abspath(args.output))
    _ensure_dir(parent)
    ids: list[str] = []
    texts: list[str] = []
    with open(args.descriptions) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            ids.append(record["segment_id"])
            texts.append(record["text"])
    if not ids:
        raise EmptyTrainingSetError("descriptions file has no rows")
    cache = _cache_for(config)
    remote_calls = 0
    cache_hits = 0
    rows = []
    encoder_id = ""
    for text in texts:
        emb = embed_text(text, config.embedding, cache)
        rows.append(emb.values)
        encoder_id = emb.encoder_id
        if emb.cached:
            cache_hits += 1
        elif config.embedding.endpoint:
            remote_calls += 1
    save_embeddings(args.output, ids, np.stack(rows), encoder_id)
    _write_json(
        os.path.join(parent, "embed_meta.json"),
        {
            "n": len(ids),
            "remote_calls": remote_calls,
            "cache_hits": cache_hits,
            "encoder_id": encoder_id,
            "seed": config.seed,
        },
    )
    print(
        f"embedded {len(ids)} descriptions ({remote_calls} remote calls, "
        f"{cache_hits} cache hits) -> {args.output}"
    )
    return 0


def _assemble_bundle(features_path: str, embeddings_path: str | None):
    """Join the feature table with embeddings by segment id; labeled rows
    only.  Returns (bundle, names, n_unlabeled)."""
    ids, labels, matrix, names = read_feature_csv(features_path)
    emb_by_id = None
    if embeddings_path is not None:
        emb_ids, emb_matrix, _ = load_embeddings(embeddings_path)
        emb_by_id = {sid: emb_matrix[i] for i, sid in enumerate(emb_ids)}
        missing = [sid for sid in ids if sid not in emb_by_id]
        if missing:
            raise DataError(
                f"{len(missing)} feature rows lack embeddings "
                f"(first missing: {missing[0]})"
            )
    keep = [i for i, label in enumerate(labels) if label is not None]
    n_unlabeled = len(ids) - len(keep)
    if not keep:
        raise EmptyTrainingSetError("no labeled rows in feature file")
    x_num = matrix[keep]
    y = np.array([int(labels[i]) for i in keep], dtype=np.int64)
    kept_ids = [ids[i] for i in keep]
    x_emb = None
    if emb_by_id is not None:
        x_emb = np.stack([emb_by_id[sid] for sid in kept_ids])
    bundle = DataBundle(x_num=x_num, x_emb=x_emb, y=y, ids=kept_ids)
    return bundle, names, n_unlabeled


def _check_model_dim(config: RunConfig, feature_dim: int) -> None:
    if config.model.input_mode == "feature_vector" and config.model.numeric_dim != feature_dim:
        raise ConfigError(
            f"model.numeric_dim is {config.model.numeric_dim} but the feature "
            f"file has {feature_dim} features; align the config with the data"
        )


def cmd_train(args) -> int:
    config = _load_config(args)
    out = _ensure_dir(config.out_dir)
    needs_emb = config.model.variant != "numeric_only"
    if needs_emb and not args.embeddings:
        raise ConfigError(f"variant {config.model.variant!r} requires --embeddings")
    bundle, names, n_unlabeled = _assemble_bundle(
        args.features, args.embeddings if needs_emb else None
    )
    _check_model_dim(config, len(names))

    train_idx, val_idx, test_idx = stratified_split(
        bundle.y, config.split.ratios, config.seed
    )
    stats = NormStats.fit(bundle.x_num[train_idx], names)
    normalized = DataBundle(
        x_num=stats.apply(bundle.x_num),
        x_emb=bundle.x_emb,
        y=bundle.y,
        ids=bundle.ids,
    )
    net = ModelNet(config.model, seed=config.seed)
    result = train(
        net,
        normalized.subset(train_idx),
        normalized.subset(val_idx),
        config.train,
        log_path=os.path.join(out, "train_log.jsonl"),
    )
    net.load_state(result.best_state)
    checkpoint_path = os.path.join(out, "checkpoint.bin")
    save_checkpoint(
        checkpoint_path,
        Checkpoint(
            config=config.model,
            state=result.best_state,
            norm_stats=stats,
            meta={
                "seed": config.seed,
                "train_config": {
                    "learning_rate": config.train.learning_rate,
                    "batch_size": config.train.batch_size,
                    "epochs": config.train.epochs,
                    "patience": config.train.patience,
                    "weight_decay": config.train.weight_decay,
                },
                "split_ratios": list(config.split.ratios),
                "split_sizes": [len(train_idx), len(val_idx), len(test_idx)],
                "n_unlabeled_rows": n_unlabeled,
                "best_epoch": result.best_epoch,
                "epochs_run": len(result.history),
                "stopped_early": result.stopped_early,
            },
        ),
    )
    stats.save(os.path.join(out, "norm_stats.json"))
    val = bundle.subset(val_idx)
    pred = net.predict(
        stats.apply(val.x_num) if config.model.uses_numeric else None,
        val.x_emb if config.model.uses_semantic else None,
    )
    metrics = compute_metrics(val.y, pred, config.model.n_classes)
    _write_json(os.path.join(out, "metrics_val.json"), metrics.as_dict())
    print(
        f"trained {config.model.variant} for {len(result.history)} epochs "
        f"(best epoch {result.best_epoch}, val accuracy "
        f"{result.best_val_accuracy:.4f}, {param_count(config.model)} parameters) "
        f"-> {checkpoint_path}"
    )
    return 0


def cmd_eval(args) -> int:
    config = _load_config(args)
    out = _ensure_dir(config.out_dir)
    checkpoint = load_checkpoint(args.checkpoint)
    needs_emb = checkpoint.config.variant != "numeric_only"
    if needs_emb and not args.embeddings:
        raise ConfigError(
            f"variant {checkpoint.config.variant!r} requires --embeddings"
        )
    bundle, names, _ = _assemble_bundle(
        args.features, args.embeddings if needs_emb else None
    )
    if checkpoint.config.input_mode == "feature_vector" and checkpoint.config.numeric_dim != len(names):
        raise ConfigError(
            f"checkpoint expects {checkpoint.config.numeric_dim} features, "
            f"feature file has {len(names)}"
        )
    net = checkpoint.build_net(seed=config.seed)
    _, _, test_idx = stratified_split(bundle.y, config.split.ratios, config.seed)
    test = bundle.subset(test_idx)
    x_num = None
    if checkpoint.config.uses_numeric:
        x_num = test.x_num
        if checkpoint.norm_stats is not None:
            x_num = checkpoint.norm_stats.apply(x_num)
    pred = net.predict(x_num, test.x_emb if checkpoint.config.uses_semantic else None)
    metrics = compute_metrics(test.y, pred, checkpoint.config.n_classes)
    _write_json(os.path.join(out, "metrics_test.json"), metrics.as_dict())
    print(f"test n={metrics.n} variant={checkpoint.config.variant}")
    print(f"accuracy        {metrics.accuracy:.4f}")
    print(f"precision_micro {metrics.precision_micro:.4f}")
    print(f"recall_micro    {metrics.recall_micro:.4f}")
    print(f"f1_micro        {metrics.f1_micro:.4f}")
    print(f"f1_macro        {metrics.f1_macro:.4f}")
    return 0


def cmd_ablate(args) -> int:
    config = _load_config(args)
    out = _ensure_dir(config.out_dir)
    bundle, names, _ = _assemble_bundle(args.features, args.embeddings)
    _check_model_dim(config, len(names))
    stats = NormStats.fit(bundle.x_num, names)
    normalized = DataBundle(
        x_num=stats.apply(bundle.x_num),
        x_emb=bundle.x_emb,
        y=bundle.y,
        ids=bundle.ids,
    )
    results = run_ablation(config.model, normalized, config.train, config.split.ratios)
    write_ablation_table(os.path.join(out, "ablation.csv"), results, average="micro")
    write_ablation_table(os.path.join(out, "ablation_macro.csv"), results, average="macro")
    _write_json(
        os.path.join(out, "ablation_meta.json"),
        {
            "seed": config.seed,
            "variants": [
                {
                    "variant": r.variant,
                    "label": r.label,
                    "accuracy": r.metrics.accuracy,
                    "f1_micro": r.metrics.f1_micro,
                    "best_epoch": r.train_result.best_epoch,
                    "epochs_run": len(r.train_result.history),
                }
                for r in results
            ],
        },
    )
    for result in results:
        print(f"{result.label:24s} accuracy {result.metrics.accuracy:.4f}")
    print(f"wrote {os.path.join(out, 'ablation.csv')}")
    return 0


DEFAULT_DIST_FEATURES = (
    "speed_mean",
    "acceleration_std",
    "num_hard_accelerations",
    "speed_change_rate",
)


def cmd_report(args) -> int:
    config = _load_config(args)
    out = _ensure_dir(config.out_dir)
    ids, labels, matrix, names = read_feature_csv(args.features)
    if not ids:
        raise EmptyTrainingSetError("feature file has no rows")
    corr = correlation_matrix(matrix, names)
    write_correlation_csv(os.path.join(out, "correlation.csv"), corr, names)
    outputs = [os.path.join(out, "correlation.csv")]

    labeled = [i for i, label in enumerate(labels) if label is not None]
    if args.dist_features:
        subset = tuple(name.strip() for name in args.dist_features.split(","))
    else:
        subset = tuple(name for name in DEFAULT_DIST_FEATURES if name in names)
    if labeled and subset:
        curves = distribution_report(
            matrix[labeled],
            names,
            [int(labels[i]) for i in labeled],
            subset,
        )
        write_distribution_csv(os.path.join(out, "distributions.csv"), curves)
        outputs.append(os.path.join(out, "distributions.csv"))
    print(f"wrote {', '.join(outputs)}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drivestyle",
        description="Driving-style classification from trajectory kinematics.",
    )
    parser.add_argument("--version", action="version", version=f"drivestyle {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON run configuration file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument(
            "--offline",
            action="store_true",
            help="force local describer and embedder; no network use",
        )
        p.add_argument("--out", help="override the output directory")

    p = sub.add_parser("synth", help="generate labeled synthetic trajectories")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract features from trajectory CSVs")
    common(p)
    p.add_argument("--in", dest="input", required=True, help="directory of segment CSVs")
    p.add_argument("--features", dest="output", required=True, help="output feature CSV")
    p.add_argument(
        "--skip-bad",
        action="store_true",
        help="skip unparseable files instead of aborting",
    )
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("describe", help="render feature vectors into text")
    common(p)
    p.add_argument("--features", required=True, help="feature CSV from extract")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("embed", help="embed descriptions into vectors")
    common(p)
    p.add_argument("--descriptions", required=True, help="descriptions.jsonl from describe")
    p.add_argument("--embeddings", dest="output", required=True, help="output .npz path")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("train", help="train the fusion classifier")
    common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--embeddings", help="embeddings .npz (required unless numeric_only)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--embeddings")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and score all model variants")
    common(p)
    p.add_argument("--features", required=True)
    p.add_argument("--embeddings", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="correlation matrix and density curves")
    common(p)
    p.add_argument("--features", required=True)
    p.add_argument(
        "--dist-features",
        help="comma-separated feature names for density curves",
    )
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except ServiceError as err:
        print(f"service error: {err}", file=sys.stderr)
        return EXIT_SERVICE
    except NumericError as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except DriveStyleError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
