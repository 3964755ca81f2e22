"""Command-line entry point: featurize, train, eval, predict, explain, baselines, compare.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence, TextIO

import numpy as np

from . import baselines as bl
from .config import RunConfig, load_config
from .dataset import apply_stats, ingest_legit_list, ingest_phish_csv, merge_dedupe, split, standardize
from .errors import EmptyUrl, InputError, NumericError
from .explain import BackgroundSet, global_summary, decision_plot_data, shapley_sampled, waterfall_data
from .features import FEATURE_NAMES, SCHEMA_VERSION, Featurizer, Lexicon, StubIndexProvider
from .model import (EvalReport, ModelCheckpoint, ModelConfig, build_model, checkpoint_checksum, evaluate,
                    export_curves, load_checkpoint, save_checkpoint, train)
from .records import FeatureMatrix, read_feature_csv, write_feature_csv

log = logging.getLogger("lexiphish")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class UsageError(InputError):
    pass


# --- helpers --------------------------------------------------------------

def _require(value, what: str):
    if value is None:
        raise UsageError(f"missing {what}")
    return value


def _featurizer(cfg: RunConfig) -> Featurizer:
    return Featurizer(StubIndexProvider(), Lexicon.load(cfg.keywords_path, cfg.shorteners_path))


def _features(cfg: RunConfig) -> FeatureMatrix:
    path = _require(cfg.features_csv, "--features")
    if not Path(path).is_file():
        raise InputError(f"features file not found: {path}")
    return read_feature_csv(path, FEATURE_NAMES, SCHEMA_VERSION)


def _checkpoint(cfg: RunConfig) -> ModelCheckpoint:
    path = _require(cfg.checkpoint, "--checkpoint")
    if not Path(path).is_file():
        raise InputError(f"checkpoint not found: {path}")
    return load_checkpoint(path)


def _split_of(ckpt: ModelCheckpoint, cfg: RunConfig) -> tuple[float, int]:
    """Split parameters a checkpoint was trained with, falling back to ``cfg``."""
    rc = ckpt.run_config or {}
    return rc.get("split_ratio", cfg.split_ratio), rc.get("seed", cfg.seed)


def _std_splits(fm: FeatureMatrix, ckpt: ModelCheckpoint, cfg: RunConfig):
    ratio, seed = _split_of(ckpt, cfg)
    tr, te = split(fm, ratio, seed)
    if ckpt.stats is None:
        raise InputError("checkpoint carries no normalization statistics")
    return apply_stats(tr, ckpt.stats), apply_stats(te, ckpt.stats)


def _emit(out: TextIO, as_json: bool, payload: dict, text: str) -> None:
    if as_json:
        out.write(json.dumps(payload, sort_keys=True) + "\n")
    else:
        out.write(text.rstrip("\n") + "\n")


# --- commands -------------------------------------------------------------

def cmd_featurize(cfg: RunConfig, args, out: TextIO) -> int:
    phish = _require(cfg.phish_csv, "--phish")
    legit = _require(cfg.legit_path, "--legit")
    dest = _require(args.out or cfg.features_csv, "--out")
    ph, lg = ingest_phish_csv(phish), ingest_legit_list(legit)
    for w in ph.warnings + lg.warnings:
        log.warning("%s", w)
    merged = merge_dedupe(ph.records, lg.records)
    fm = _featurizer(cfg).batch(merged.records)
    for i, msg in fm.errors:
        log.warning("row %d skipped: %s", i, msg)
    Path(dest).parent.mkdir(parents=True, exist_ok=True)
    write_feature_csv(fm, dest, FEATURE_NAMES)
    summary = {
        "out": str(dest), "rows": len(fm), "phishing": int(fm.labels.sum()), "legitimate": int(len(fm) - fm.labels.sum()),
        "duplicates": merged.duplicate_count, "conflicts": merged.conflict_count, "row_errors": len(fm.errors),
        "schema_version": fm.schema_version,
    }
    _emit(out, args.json, summary, f"wrote {len(fm)} rows to {dest} "
          f"({summary['phishing']} phishing, {summary['legitimate']} legitimate)")
    return EXIT_OK


def _model_config(cfg: RunConfig) -> ModelConfig:
    return ModelConfig(seed=cfg.seed, epochs=cfg.epochs, batch_size=cfg.batch_size, lr=cfg.lr)


def cmd_train(cfg: RunConfig, args, out: TextIO) -> int:
    fm = _features(cfg)
    tr, te = split(fm, cfg.split_ratio, cfg.seed)
    tr, te, stats = standardize(tr, te)
    mcfg = _model_config(cfg)
    ckpt = build_model(cfg.seed, mcfg)
    ckpt.run_config = cfg.to_dict()
    res = train(ckpt, tr, te, mcfg, stats)

    od = Path(cfg.out_dir)
    od.mkdir(parents=True, exist_ok=True)
    digest = save_checkpoint(res.final, od / "model.ckpt")
    save_checkpoint(res.best, od / "model.best.ckpt")
    export_curves(res.history, od / "curves.csv")
    stats.save(od / "stats.json")
    report = evaluate(res.final, te, cfg.threshold)
    (od / "eval.json").write_text(report.to_json({"subset": "test", "checkpoint_sha256": digest,
                                                   "run_config": cfg.to_dict()}), encoding="utf-8")
    payload = {"checkpoint": str(od / "model.ckpt"), "checkpoint_sha256": digest, "best_epoch": res.final.best_epoch,
               "test": report.to_dict()}
    _emit(out, args.json, payload, f"checkpoint {od / 'model.ckpt'} sha256 {digest}\n"
          f"test acc/prec/rec/f1: {report.row()} (best epoch {res.final.best_epoch})")
    return EXIT_OK


def cmd_eval(cfg: RunConfig, args, out: TextIO) -> int:
    ckpt = _checkpoint(cfg)
    fm = _features(cfg)
    tr, te = _std_splits(fm, ckpt, cfg)
    if args.subset == "all":
        data = apply_stats(fm, ckpt.stats)
    else:
        data = tr if args.subset == "train" else te
    report = evaluate(ckpt, data, cfg.threshold)
    extra = {"subset": args.subset, "checkpoint_sha256": checkpoint_checksum(ckpt), "run_config": cfg.to_dict()}
    if args.out:
        Path(args.out).write_text(report.to_json(extra), encoding="utf-8")
    if args.json:
        out.write(report.to_json(extra))
    else:
        out.write(f"{args.subset} ({report.n} rows, threshold {report.threshold}): acc/prec/rec/f1 {report.row()}\n")
    return EXIT_OK


def _predict_line(url: str, ckpt: ModelCheckpoint, feat: Featurizer, thr: float) -> dict:
    try:
        v = feat.vector(url)
    except (EmptyUrl, InputError) as exc:
        return {"url": url, "error": str(exc) or type(exc).__name__}
    x = ckpt.stats.transform(v) if ckpt.stats is not None else v
    p = float(ckpt.predict_proba(x[None])[0])
    return {"url": url, "probability": p, "verdict": "phishing" if p >= thr else "legitimate"}


def cmd_predict(cfg: RunConfig, args, out: TextIO, stdin: Optional[TextIO] = None) -> int:
    ckpt = _checkpoint(cfg)
    feat = _featurizer(cfg)
    urls = args.urls
    if not urls or urls == ["-"]:
        src = stdin if stdin is not None else sys.stdin
        for line in src:
            url = line.rstrip("\r\n")
            out.write(json.dumps(_predict_line(url, ckpt, feat, cfg.threshold)) + "\n")
            out.flush()
        return EXIT_OK
    for url in urls:
        out.write(json.dumps(_predict_line(url, ckpt, feat, cfg.threshold)) + "\n")
    return EXIT_OK


def cmd_explain(cfg: RunConfig, args, out: TextIO) -> int:
    if args.url is not None and args.row is not None:
        raise UsageError("--url and --row are mutually exclusive")
    if not args.global_ and args.url is None and args.row is None:
        raise UsageError("give --url, --row or --global")
    ckpt = _checkpoint(cfg)
    fm = _features(cfg)
    tr, te = _std_splits(fm, ckpt, cfg)
    bg = BackgroundSet.sample(tr.rows, cfg.background_size, cfg.seed)
    od = Path(cfg.out_dir)
    od.mkdir(parents=True, exist_ok=True)
    payload: dict = {"background_size": len(bg)}
    lines = []

    if args.url is not None or args.row is not None:
        if args.url is not None:
            raw = _featurizer(cfg).vector(args.url)
            label = args.url
        else:
            if not 0 <= args.row < len(fm):
                raise InputError(f"row {args.row} out of range (0..{len(fm) - 1})")
            raw = fm.rows[args.row]
            label = f"row {args.row}"
        a = shapley_sampled(ckpt, ckpt.stats.transform(raw), bg, cfg.n_permutations, seed=cfg.seed)
        a.x_raw = np.asarray(raw, dtype=np.float64)
        waterfall_data(a, od / "waterfall.csv")
        payload.update({
            "target": label, "fx": a.fx, "base_value": a.base_value, "reconstruction_gap": a.reconstruction_gap,
            "phi": dict(zip(FEATURE_NAMES, a.phi.tolist())), "se": dict(zip(FEATURE_NAMES, a.se.tolist())),
            "waterfall": str(od / "waterfall.csv"),
        })
        top = sorted(zip(FEATURE_NAMES, a.phi), key=lambda t: -abs(t[1]))[:5]
        lines.append(f"{label}: f(x)={a.fx:.4f} base={a.base_value:.4f} gap={a.reconstruction_gap:.2e}")
        lines += [f"  {n:<16} {p:+.4f}" for n, p in top]
        lines.append(f"waterfall data: {od / 'waterfall.csv'}")

    if args.global_:
        n = min(cfg.explain_samples, len(te))
        idx = np.sort(np.random.default_rng([cfg.seed, 2]).choice(len(te), size=n, replace=False))
        raw_rows = ckpt.stats.inverse(te.rows[idx])
        gs = global_summary(ckpt, te.rows[idx], bg, cfg.n_permutations, seed=cfg.seed, raw_sample=raw_rows)
        gs.write_csv(od / "summary.csv")
        decision_plot_data(gs.attributions, gs.ranking, od / "decision.csv")
        payload.update({"samples": n, "ranking": gs.ranking, "summary": str(od / "summary.csv"),
                        "decision": str(od / "decision.csv")})
        lines.append(f"global summary over {n} samples: {od / 'summary.csv'}")
        lines += [f"  {r:>2}. {name}" for r, name in enumerate(gs.ranking[:10], start=1)]

    _emit(out, args.json, payload, "\n".join(lines))
    return EXIT_OK


def cmd_baselines(cfg: RunConfig, args, out: TextIO) -> int:
    fm = _features(cfg)
    tr, te = split(fm, cfg.split_ratio, cfg.seed)
    tr, te, stats = standardize(tr, te)
    od = Path(cfg.out_dir)
    od.mkdir(parents=True, exist_ok=True)
    knn = bl.knn_fit(tr, cfg.knn_k)
    knn_rep = evaluate(knn, te, cfg.threshold, model="knn")
    mlp = bl.mlp_train(tr, te, _model_config(cfg), stats=stats).final
    mlp_rep = bl.mlp_evaluate(mlp, te, cfg.threshold)
    for name, rep in (("knn", knn_rep), ("mlp", mlp_rep)):
        (od / f"{name}.json").write_text(rep.to_json({"subset": "test", "run_config": cfg.to_dict()}), encoding="utf-8")
    payload = {"knn": knn_rep.to_dict(), "mlp": mlp_rep.to_dict()}
    _emit(out, args.json, payload, f"knn (k={cfg.knn_k}): {knn_rep.row()}\nmlp: {mlp_rep.row()}")
    return EXIT_OK


def cmd_compare(cfg: RunConfig, args, out: TextIO) -> int:
    reports = []
    for path in args.reports:
        p = Path(path)
        if not p.is_file():
            raise InputError(f"report not found: {path}")
        try:
            d = json.loads(p.read_text(encoding="utf-8"))
            reports.append((d.get("model", p.stem), EvalReport.from_dict(d)))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(f"{path} is not an evaluation report ({exc})") from None
    external = []
    if args.external:
        if not Path(args.external).is_file():
            raise InputError(f"external rows not found: {args.external}")
        external = bl.read_external_rows(args.external)
    dest = args.out or str(Path(cfg.out_dir) / "comparison.csv")
    Path(dest).parent.mkdir(parents=True, exist_ok=True)
    rows = bl.compare_models(reports, external, proposed=args.proposed, out=dest)
    payload = {"out": dest, "rows": [r.__dict__ for r in rows]}
    text = "\n".join(f"{r.model:<10} {'' if r.accuracy is None else f'{r.accuracy:.2f}':>7}  {r.source}"
                     + ("  *" if r.proposed else "") for r in rows)
    _emit(out, args.json, payload, text + f"\nwrote {dest}")
    return EXIT_OK


# --- argument parsing -----------------------------------------------------

def _globals_parser(suppress: bool) -> argparse.ArgumentParser:
    d = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=d)
    g.add_argument("--config", default=d, help="JSON run config; flags override it")
    g.add_argument("--json", action="store_true", default=d if suppress else False, help="machine-readable stdout")
    g.add_argument("--show-config", action="store_true", default=d if suppress else False,
                   help="print the effective config and exit")
    g.add_argument("-v", "--verbose", action="store_true", default=d if suppress else False)
    return p


def build_parser() -> argparse.ArgumentParser:
    sub_globals = _globals_parser(suppress=True)
    parser = argparse.ArgumentParser(prog="lexiphish", parents=[_globals_parser(suppress=False)],
                                     description="Lexical phishing-URL detection with a small 1-D CNN.")
    sp = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add(name, help_):
        return sp.add_parser(name, help=help_, parents=[sub_globals])

    p = add("featurize", "ingest phishing + legitimate sources into a feature CSV")
    p.add_argument("--phish", dest="phish_csv")
    p.add_argument("--legit", dest="legit_path")
    p.add_argument("--out")
    p.add_argument("--keywords", dest="keywords_path")
    p.add_argument("--shorteners", dest="shorteners_path")

    p = add("train", "split, standardize, train, write checkpoint and curves")
    p.add_argument("--features", dest="features_csv")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--split-ratio", type=float, dest="split_ratio")
    p.add_argument("--threshold", type=float)

    p = add("eval", "evaluation report for a checkpoint")
    p.add_argument("--checkpoint")
    p.add_argument("--features", dest="features_csv")
    p.add_argument("--subset", choices=("test", "train", "all"), default="test")
    p.add_argument("--threshold", type=float)
    p.add_argument("--out")

    p = add("predict", "score URLs given as arguments or one per stdin line")
    p.add_argument("--checkpoint")
    p.add_argument("--threshold", type=float)
    p.add_argument("--keywords", dest="keywords_path")
    p.add_argument("--shorteners", dest="shorteners_path")
    p.add_argument("urls", nargs="*")

    p = add("explain", "Shapley attributions: one URL/row (waterfall) or --global (summary + decision)")
    p.add_argument("--checkpoint")
    p.add_argument("--features", dest="features_csv")
    p.add_argument("--url")
    p.add_argument("--row", type=int)
    p.add_argument("--global", dest="global_", action="store_true")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--background-size", type=int, dest="background_size")
    p.add_argument("--permutations", type=int, dest="n_permutations")
    p.add_argument("--samples", type=int, dest="explain_samples")

    p = add("baselines", "train and evaluate the KNN and MLP baselines")
    p.add_argument("--features", dest="features_csv")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--k", type=int, dest="knn_k")
    p.add_argument("--epochs", type=int)
    p.add_argument("--threshold", type=float)

    p = add("compare", "merge evaluation reports and external rows into one table")
    p.add_argument("reports", nargs="*")
    p.add_argument("--external")
    p.add_argument("--out")
    p.add_argument("--proposed", default="cnn")
    return parser


CONFIG_FLAGS = {
    "phish_csv", "legit_path", "features_csv", "out_dir", "checkpoint", "seed", "split_ratio", "epochs",
    "batch_size", "lr", "threshold", "knn_k", "background_size", "n_permutations", "explain_samples",
    "keywords_path", "shorteners_path",
}


COMMANDS = {
    "featurize": cmd_featurize, "train": cmd_train, "eval": cmd_eval, "predict": cmd_predict,
    "explain": cmd_explain, "baselines": cmd_baselines, "compare": cmd_compare,
}


def run(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None, err: Optional[TextIO] = None,
        stdin: Optional[TextIO] = None) -> int:
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INPUT

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=err)
    try:
        overrides = {k: v for k, v in vars(args).items() if k in CONFIG_FLAGS and v is not None}
        cfg = load_config(args.config, overrides)
        if args.show_config:
            out.write(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
            return EXIT_OK
        if args.command is None:
            parser.print_usage(err)
            err.write("lexiphish: error: a command is required\n")
            return EXIT_INPUT
        if args.command == "predict":
            return cmd_predict(cfg, args, out, stdin)
        return COMMANDS[args.command](cfg, args, out)
    except NumericError as exc:
        err.write(f"lexiphish: numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except (InputError, OSError) as exc:
        err.write(f"lexiphish: error: {exc}\n")
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
