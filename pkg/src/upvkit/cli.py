"""Command-line pipeline: validate, stats, prepare, train, tune, eval, sweep,
predict, serve, synth.

Every command is reproducible from (config file, seed): reruns write
identical artifacts apart from manifest timestamps.  Outputs land under
``--out`` together with a manifest listing each file and its digest.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .augment import (
    AugmentConfig,
    LexiconError,
    SynonymLexicon,
    default_stopwords,
    default_synonyms,
    load_stopwords,
    load_synonyms,
)
from .config import ConfigError, RunConfig, load_run_config
from .corpus import Corpus, CorpusError, dump_corpus, filter_by_support, load_corpus, split, stats
from .embeddings import EmbeddingTable, VectorFormatError, load_vectors
from .evaluate import evaluate, ratio_sweep, roc_curves
from .model import CheckpointError, Model, count_params, load_checkpoint, save_checkpoint
from .reports import (
    render_cooccurrence_figure,
    render_history_figure,
    render_roc_figure,
    render_support_figure,
    render_sweep_figure,
    write_cooccurrence_csv,
    write_history_csv,
    write_manifest,
    write_metrics_json,
    write_per_label_csv,
    write_roc_csv,
    write_support_csv,
    write_sweep_csv,
)
from .sampler import dump_instances, generate_training_instances
from .serve import AnnotationService, make_server, predict_document
from .synth import synth_corpus
from .taxonomy import Taxonomy, TaxonomyError, default_taxonomy, load_taxonomy
from .train import TrainingDiverged, train, tune_thresholds

_USAGE_ERROR = 1
_DATA_ERROR = 2
_RUNTIME_ERROR = 3

_DATA_ERRORS = (
    ConfigError,
    CorpusError,
    TaxonomyError,
    VectorFormatError,
    LexiconError,
    CheckpointError,
    FileNotFoundError,
)


def _load_taxonomy(cfg: RunConfig) -> Taxonomy:
    if cfg.taxonomy is None:
        return default_taxonomy()
    return load_taxonomy(cfg.taxonomy)


def _load_table(cfg: RunConfig) -> EmbeddingTable:
    if cfg.vectors is None:
        return EmbeddingTable.empty(dim=cfg.model.emb_dim, oov_policy=cfg.oov_policy)
    with open(cfg.vectors, encoding="utf-8") as fh:
        return load_vectors(fh, oov_policy=cfg.oov_policy)


def _load_lexicon(cfg: RunConfig) -> SynonymLexicon:
    if cfg.synonyms is None:
        return default_synonyms()
    with open(cfg.synonyms, encoding="utf-8") as fh:
        return load_synonyms(fh)


def _augment_config(cfg: RunConfig) -> AugmentConfig:
    if cfg.stopwords is None:
        stopwords = default_stopwords()
    else:
        with open(cfg.stopwords, encoding="utf-8") as fh:
            stopwords = load_stopwords(fh)
    return AugmentConfig(
        strength=cfg.augment.strength,
        kinds=cfg.augment.kinds,
        stacked=cfg.augment.stacked,
        stopwords=stopwords,
    )


def _load_corpus(cfg: RunConfig, tax: Taxonomy) -> Corpus:
    if cfg.corpus is None:
        raise ConfigError("a corpus path is required (corpus = ... or --corpus)")
    with open(cfg.corpus, encoding="utf-8") as fh:
        return load_corpus(fh, tax, lenient=cfg.lenient)


def _prepare_splits(cfg: RunConfig, corpus: Corpus):
    filtered, rejected = filter_by_support(corpus, cfg.min_support)
    if not filtered.samples:
        raise CorpusError("no samples survive the support filter")
    train_c, dev_c, test_c = split(filtered, cfg.split)
    return filtered, rejected, train_c, dev_c, test_c


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands ---------------------------------------------------------------


def cmd_validate(cfg: RunConfig, args) -> int:
    cfg.validate_paths()
    tax = _load_taxonomy(cfg)
    print(f"taxonomy: {len(tax)} t3 labels, {len(tax.t2_ids)} t2 groups, {len(tax.t1_ids)} t1 pillars")
    if cfg.corpus is not None:
        corpus = _load_corpus(cfg, tax)
        print(
            f"corpus: {len(corpus)} samples kept "
            f"({corpus.dropped_short} too short, {corpus.dropped_unlabeled} unlabeled, "
            f"{corpus.skipped_unknown_labels} unknown labels skipped)"
        )
    if cfg.vectors is not None:
        table = _load_table(cfg)
        print(f"vectors: {len(table)} tokens, dim {table.dim}")
    print("ok")
    return 0


def cmd_stats(cfg: RunConfig, args) -> int:
    tax = _load_taxonomy(cfg)
    corpus = _load_corpus(cfg, tax)
    st = stats(corpus)
    out = _out_dir(cfg)
    files = []
    for name, writer in (
        ("label_support.csv", lambda p: write_support_csv(st, p)),
        ("cooccurrence.csv", lambda p: write_cooccurrence_csv(st, p)),
        ("label_support.png", lambda p: render_support_figure(st, tax, p)),
        ("cooccurrence.png", lambda p: render_cooccurrence_figure(st, p)),
    ):
        path = out / name
        writer(path)
        files.append(path)
    summary = out / "summary.json"
    summary.write_text(
        json.dumps(
            {
                "samples": st.n_samples,
                "avg_tokens": st.avg_tokens,
                "multi_label_fraction": st.multi_label_fraction,
                "over_two_label_fraction": st.over_two_label_fraction,
                "labels": len(st.labels),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    files.append(summary)
    write_manifest(out, "stats", cfg.seed, files)
    print(f"wrote stats for {st.n_samples} samples to {out}")
    return 0


def cmd_prepare(cfg: RunConfig, args) -> int:
    tax = _load_taxonomy(cfg)
    corpus = _load_corpus(cfg, tax)
    filtered, rejected, train_c, dev_c, test_c = _prepare_splits(cfg, corpus)
    instances, report = generate_training_instances(
        train_c, tax, cfg.ratios, _augment_config(cfg), _load_lexicon(cfg), seed=cfg.seed
    )
    out = _out_dir(cfg)
    inst_path = out / "instances.jsonl"
    with open(inst_path, "w", encoding="utf-8") as fh:
        dump_instances(instances, fh)
    summary = out / "summary.json"
    tiers = {}
    for inst in instances:
        tiers[inst.tier.value] = tiers.get(inst.tier.value, 0) + 1
    summary.write_text(
        json.dumps(
            {
                "splits": {"train": len(train_c), "dev": len(dev_c), "test": len(test_c)},
                "rejected_labels": rejected,
                "instances": len(instances),
                "tiers": tiers,
                "tier_substitutions": report.substitutions,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    write_manifest(out, "prepare", cfg.seed, [inst_path, summary])
    print(f"wrote {len(instances)} instances to {inst_path}")
    return 0


def _train_pipeline(cfg: RunConfig):
    from .sampler import make_test_set_instances

    tax = _load_taxonomy(cfg)
    table = _load_table(cfg)
    corpus = _load_corpus(cfg, tax)
    filtered, rejected, train_c, dev_c, test_c = _prepare_splits(cfg, corpus)
    trained_labels = train_c.trained_labels()
    instances, _ = generate_training_instances(
        train_c, tax, cfg.ratios, _augment_config(cfg), _load_lexicon(cfg),
        seed=cfg.seed, trained=trained_labels,
    )
    dev_instances, _ = make_test_set_instances(
        dev_c, tax, cfg.ratios, cfg.seed, trained=trained_labels
    )
    model = Model.build(cfg.model, tax, table, trained_labels, seed=cfg.seed)
    return tax, table, model, instances, dev_instances, (train_c, dev_c, test_c), rejected


def cmd_train(cfg: RunConfig, args) -> int:
    tax, table, model, instances, dev_instances, (train_c, dev_c, test_c), rejected = _train_pipeline(cfg)
    history = train(model, instances, dev_instances, cfg.train)
    out = _out_dir(cfg)
    ckpt = out / "checkpoint.ckpt"
    save_checkpoint(model, str(ckpt))
    hist_csv = out / "history.csv"
    write_history_csv(history, hist_csv)
    hist_png = out / "history.png"
    render_history_figure(history, hist_png)
    write_manifest(out, "train", cfg.seed, [ckpt, hist_csv, hist_png])
    counts = count_params(model)
    print(
        f"trained {counts['total']} parameters for {history.stopped_epoch} epochs "
        f"(best {history.best_epoch}); checkpoint at {ckpt}"
    )
    return 0


def cmd_tune(cfg: RunConfig, args) -> int:
    tax = _load_taxonomy(cfg)
    table = _load_table(cfg)
    model = load_checkpoint(args.checkpoint, tax, table)
    corpus = _load_corpus(cfg, tax)
    _, _, train_c, dev_c, test_c = _prepare_splits(cfg, corpus)
    thresholds = tune_thresholds(model, dev_c, tax)
    model.thresholds = thresholds
    out = _out_dir(cfg)
    ckpt = out / "checkpoint.ckpt"
    save_checkpoint(model, str(ckpt))
    csv_path = out / "thresholds.csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("label,threshold\n")
        for label, value in thresholds.items():
            fh.write(f"{label},{value:.2f}\n")
    write_manifest(out, "tune", cfg.seed, [ckpt, csv_path])
    print(f"tuned {len(thresholds)} thresholds; checkpoint at {ckpt}")
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    tax = _load_taxonomy(cfg)
    table = _load_table(cfg)
    model = load_checkpoint(args.checkpoint, tax, table)
    corpus = _load_corpus(cfg, tax)
    _, _, train_c, dev_c, test_c = _prepare_splits(cfg, corpus)
    eval_corpus = {"train": train_c, "dev": dev_c, "test": test_c}[args.split]
    protocols = ("test_set", "real_simulation") if cfg.protocol == "both" else (cfg.protocol,)
    out = _out_dir(cfg)
    files = []
    reports = []
    for protocol in protocols:
        report = evaluate(
            model,
            eval_corpus,
            protocol,
            tax,
            thresholds=model.thresholds,
            ratios=cfg.ratios,
            seed=cfg.seed,
        )
        reports.append(report)
    metrics_path = out / "metrics.json"
    write_metrics_json(reports, metrics_path)
    files.append(metrics_path)
    for report in reports:
        csv_path = out / f"per_label_{report.protocol}.csv"
        write_per_label_csv(report, tax, csv_path)
        files.append(csv_path)
    if "real_simulation" in protocols:
        curves = roc_curves(model, eval_corpus, tax)
        roc_dir = out / "roc"
        roc_dir.mkdir(exist_ok=True)
        for label, curve in curves.items():
            path = roc_dir / f"{label}.csv"
            write_roc_csv(curve, path)
            files.append(path)
        fig_path = out / "roc_curves.png"
        render_roc_figure(curves, tax, fig_path)
        files.append(fig_path)
    write_manifest(out, "eval", cfg.seed, files)
    for report in reports:
        t3 = report.levels["t3"]
        print(
            f"{report.protocol}: t3 micro P/R/F1 = "
            f"{t3.micro[0]:.3f}/{t3.micro[1]:.3f}/{t3.micro[2]:.3f}"
        )
    return 0


def cmd_sweep(cfg: RunConfig, args) -> int:
    tax = _load_taxonomy(cfg)
    table = _load_table(cfg)
    corpus = _load_corpus(cfg, tax)
    _, _, train_c, dev_c, test_c = _prepare_splits(cfg, corpus)
    rows = ratio_sweep(
        train_c,
        dev_c,
        test_c,
        tax,
        cfg.sweep_totals,
        cfg.model,
        table,
        cfg.train,
        _augment_config(cfg),
        _load_lexicon(cfg),
        seed=cfg.seed,
    )
    out = _out_dir(cfg)
    csv_path = out / "sweep.csv"
    write_sweep_csv(rows, csv_path)
    png_path = out / "sweep.png"
    render_sweep_figure(rows, png_path)
    write_manifest(out, "sweep", cfg.seed, [csv_path, png_path])
    for row in rows:
        print(
            f"total {row.total}: test_set t3 F1 {row.test_set.levels['t3'].micro[2]:.3f}, "
            f"real_simulation precision {row.real_simulation.levels['t3'].micro[0]:.3f}"
        )
    return 0


def cmd_predict(cfg: RunConfig, args) -> int:
    tax = _load_taxonomy(cfg)
    table = _load_table(cfg)
    model = load_checkpoint(args.checkpoint, tax, table)
    text = Path(args.text_file).read_text(encoding="utf-8")
    session = predict_document(model, text)
    out = _out_dir(cfg)
    doc_path = out / "document.json"
    payload = {
        "doc_id": session.doc_id,
        "sentences": [
            {
                "idx": idx,
                "text": session.sentences[idx],
                "suggestions": [s.to_json() for s in row if s.suggested],
            }
            for idx, row in enumerate(session.suggestion_rows())
        ],
    }
    doc_path.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    write_manifest(out, "predict", cfg.seed, [doc_path])
    n_sugg = sum(len(s["suggestions"]) for s in payload["sentences"])
    print(f"{len(session.sentences)} sentences, {n_sugg} suggestions -> {doc_path}")
    return 0


def cmd_serve(cfg: RunConfig, args) -> int:
    tax = _load_taxonomy(cfg)
    table = _load_table(cfg)
    model = load_checkpoint(args.checkpoint, tax, table)
    service = AnnotationService(model, cfg.serve_data_dir)
    static_dir = args.static_dir
    if static_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static_dir = str(candidate) if candidate.is_dir() else None
    server = make_server(service, cfg.serve_host, cfg.serve_port, static_dir=static_dir)
    print(f"serving on http://{cfg.serve_host}:{cfg.serve_port} (data in {cfg.serve_data_dir})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_synth(cfg: RunConfig, args) -> int:
    tax = _load_taxonomy(cfg)
    corpus = synth_corpus(
        tax,
        seed=cfg.seed,
        samples_per_label=cfg.synth_samples_per_label,
        multi_label_fraction=cfg.synth_multi_label_fraction,
    )
    out = _out_dir(cfg)
    path = out / "corpus.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        dump_corpus(corpus, fh)
    write_manifest(out, "synth", cfg.seed, [path])
    print(f"wrote {len(corpus)} synthetic samples to {path}")
    return 0


_COMMANDS = {
    "validate": cmd_validate,
    "stats": cmd_stats,
    "prepare": cmd_prepare,
    "train": cmd_train,
    "tune": cmd_tune,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "predict": cmd_predict,
    "serve": cmd_serve,
    "synth": cmd_synth,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(_USAGE_ERROR)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="upvkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"upvkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"{name} step")
        p.add_argument("--config", default=None, help="run configuration file")
        p.add_argument("--taxonomy", default=None, help="taxonomy file (default: bundled)")
        p.add_argument("--corpus", default=None, help="JSON-lines corpus")
        p.add_argument("--vectors", default=None, help="pretrained vector file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master random seed")
        if name in ("tune", "eval", "predict", "serve"):
            p.add_argument("--checkpoint", required=True, help="model checkpoint path")
        if name == "eval":
            p.add_argument("--split", choices=("train", "dev", "test"), default="test")
            p.add_argument("--protocol", choices=("test_set", "real_simulation", "both"), default=None)
        if name == "sweep":
            p.add_argument("--totals", default=None, help="comma-separated sweep totals")
        if name == "predict":
            p.add_argument("--text-file", required=True, help="raw interview text")
        if name == "serve":
            p.add_argument("--port", type=int, default=None)
            p.add_argument("--host", default=None)
            p.add_argument("--data-dir", default=None)
            p.add_argument("--static-dir", default=None, help="serve a built review UI from here")
        if name == "synth":
            p.add_argument("--samples-per-label", type=int, default=None)
    return parser


def _overrides(args) -> dict[str, object]:
    pairs = {
        "taxonomy": args.taxonomy,
        "corpus": args.corpus,
        "vectors": args.vectors,
        "out": args.out,
    }
    out = {k: v for k, v in pairs.items() if v is not None}
    if args.seed is not None:
        out["seed"] = args.seed
    if getattr(args, "protocol", None) is not None:
        out["protocol"] = args.protocol
    if getattr(args, "totals", None) is not None:
        out["sweep.totals"] = args.totals
    if getattr(args, "port", None) is not None:
        out["serve.port"] = args.port
    if getattr(args, "host", None) is not None:
        out["serve.host"] = args.host
    if getattr(args, "data_dir", None) is not None:
        out["serve.data_dir"] = args.data_dir
    if getattr(args, "samples_per_label", None) is not None:
        out["synth.samples_per_label"] = args.samples_per_label
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else _USAGE_ERROR
    try:
        cfg = load_run_config(args.config, _overrides(args))
        cfg.validate_paths()
        return _COMMANDS[args.command](cfg, args)
    except _DATA_ERRORS as exc:
        print(f"upvkit: {exc}", file=sys.stderr)
        return _DATA_ERROR
    except TrainingDiverged as exc:
        print(f"upvkit: training diverged: {exc}", file=sys.stderr)
        return _RUNTIME_ERROR
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"upvkit: runtime failure: {exc}", file=sys.stderr)
        return _RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
