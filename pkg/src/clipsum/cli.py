"""Command-line interface.

Subcommands: ``synth``, ``train``, ``eval``, ``summarize``, ``highlight`` and
``ablate-topk``. Every setting of the training, selector, contrastive and
highlight configs can come from a JSON file (``--config``) and be overridden
by a flag: training fields are ``--<field>``, the other sections use
``--<section>-<field>``. All randomness flows from ``--seed``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .highlight import HighlightConfig, default_theta_grid, detect, select_theta
from .io import (
    ConfigError,
    FeatureFileError,
    ManifestError,
    RunConfig,
    config_fields,
    load_manifest,
    load_run_config,
    make_folds,
    save_dataset,
    write_csv,
)
from .metrics import Segment, f1_summary, kendall_tau, mean_ap, spearman_rho
from .pipeline import (
    Checkpoint,
    CheckpointError,
    NumericError,
    TrainingConfig,
    infer_importance_scores,
    summarize,
    summary_length,
    train,
)
from .selector import SelectorConfig, hard_topk, selection_error, soft_topk_halving, soft_topk_iterative
from .synthetic import SynthConfig, generate

log = logging.getLogger("clipsum")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _flag(section: str, name: str) -> str:
    name = name.replace("_", "-")
    return f"--{name}" if section == "train" else f"--{section}-{name}"


def _dest(section: str, name: str) -> str:
    return f"cfg__{section}__{name}"


def _converter(default):
    if isinstance(default, bool):
        return lambda v: {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}[v.lower()]
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    if isinstance(default, list) or default is None:
        return _json_or_str
    return str


def _json_or_str(value: str):
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value


def _add_config_flags(parser: argparse.ArgumentParser, sections) -> None:
    fields = config_fields()
    for section in sections:
        group = parser.add_argument_group(f"{section} settings")
        for name, default in fields[section].items():
            if default is dataclasses.MISSING:
                default = None
            group.add_argument(
                _flag(section, name),
                dest=_dest(section, name),
                type=_converter(default),
                default=None,
                metavar="V",
                help=f"default: {default}",
            )


def _add_verbose(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _add_common(parser: argparse.ArgumentParser) -> None:
    _add_verbose(parser)
    parser.add_argument("--seed", type=int, default=None, help="drives every random choice (default 0)")
    parser.add_argument("--config", type=Path, help="JSON run config; flags override it")


def _run_config(args) -> RunConfig:
    run = load_run_config(args.config) if getattr(args, "config", None) else RunConfig()
    if args.seed is not None:
        run.seed = args.seed
    for key, value in vars(args).items():
        if key.startswith("cfg__") and value is not None:
            _, section, name = key.split("__")
            getattr(run, section)[name] = value
    return run


def _training_config(run: RunConfig) -> TrainingConfig:
    try:
        return run.training_config()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _highlight_config(run: RunConfig) -> HighlightConfig:
    settings = run.highlight_settings()
    grid = settings.theta_grid if settings.theta_grid is not None else default_theta_grid()
    cfg = HighlightConfig(sigma=settings.sigma, theta=settings.theta, theta_grid=[float(t) for t in grid])
    cfg.validate()
    return cfg


def _load_model(path: Path) -> Checkpoint:
    if not path.exists():
        raise ManifestError(f"checkpoint {path} not found")
    return Checkpoint.load(path)


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    run = _run_config(args)
    cfg = SynthConfig(seed=run.seed)
    for f in dataclasses.fields(SynthConfig):
        value = getattr(args, f"synth_{f.name}", None)
        if value is not None and f.name != "seed":
            setattr(cfg, f.name, value)
    records = generate(cfg)
    manifest = save_dataset(records, args.out)
    print(manifest)
    return EXIT_OK


def _train_records(records, folds, holdout):
    if holdout is None:
        return records
    return [r for r in records if folds[r.id] != holdout]


def cmd_train(args) -> int:
    run = _run_config(args)
    cfg = _training_config(run)
    records = load_manifest(args.manifest)
    train_set = records
    if args.holdout_fold is not None:
        train_set = _train_records(records, make_folds(records, args.folds, run.seed), args.holdout_fold)
    ckpt, history = train(train_set, cfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    ckpt.save(args.out)
    loss_csv = args.loss_csv or args.out.with_suffix(".loss.csv")
    write_csv(loss_csv, ["epoch", "loss"], enumerate(history))
    log.info("trained on %d videos; checkpoint %s", len(train_set), args.out)
    return EXIT_OK


def _video_metrics(rec, scores, k_frac, highlight_cfg):
    k = summary_length(rec.frames, k_frac)
    row = {"f1": None, "kendall_tau": None, "spearman_rho": None, "map": None}
    if rec.importance is not None or rec.summary is not None:
        pred = np.zeros(rec.frames, dtype=bool)
        pred[hard_topk(scores, k)] = True
        row["f1"] = f1_summary(pred, rec.truth_mask(k))
    if rec.importance is not None:
        row["kendall_tau"] = kendall_tau(scores, rec.importance)
        row["spearman_rho"] = spearman_rho(scores, rec.importance)
    if rec.highlights:
        row["map"] = mean_ap(detect(scores, highlight_cfg), [Segment(s, e) for s, e in rec.highlights])
    return row


METRIC_COLUMNS = ["f1", "kendall_tau", "spearman_rho", "map"]


def _mean(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def cmd_eval(args) -> int:
    run = _run_config(args)
    cfg = _training_config(run)
    highlight_cfg = _highlight_config(run)
    records = load_manifest(args.manifest)
    folds = make_folds(records, args.folds, run.seed)
    models = {}
    if args.checkpoint is not None:
        shared = _load_model(args.checkpoint).build()
        models = {f: shared for f in set(folds.values())}
    else:
        # cross-validation: one model per fold, trained on the other folds
        for fold in sorted(set(folds.values())):
            fold_cfg = dataclasses.replace(cfg, seed=run.seed + fold)
            log.info("fold %d: training", fold)
            ckpt, _ = train(_train_records(records, folds, fold), fold_cfg)
            models[fold] = ckpt.build()
    rows = []
    for rec in records:
        model = models[folds[rec.id]]
        scores = infer_importance_scores(rec.features, model)
        rows.append({"video_id": rec.id, "fold": folds[rec.id], **_video_metrics(rec, scores, model.config.k_frac, highlight_cfg)})
    write_csv(args.out, ["video_id", "fold", *METRIC_COLUMNS], [[r[c] for c in ["video_id", "fold", *METRIC_COLUMNS]] for r in rows])
    agg_rows = []
    for fold in sorted(set(folds.values())):
        sub = [r for r in rows if r["fold"] == fold]
        agg_rows.append([str(fold), len(sub), *[_mean([r[c] for r in sub]) for c in METRIC_COLUMNS]])
    agg_rows.append(["all", len(rows), *[_mean([r[c] for r in rows]) for c in METRIC_COLUMNS]])
    agg_path = args.aggregate_out or args.out.with_name(args.out.stem + ".folds.csv")
    write_csv(agg_path, ["fold", "videos", *METRIC_COLUMNS], agg_rows)
    return EXIT_OK


def cmd_summarize(args) -> int:
    records = load_manifest(args.manifest)
    model = _load_model(args.checkpoint).build()
    rows = []
    for rec in records:
        scores = infer_importance_scores(rec.features, model)
        for idx in summarize(rec.features, model, args.k):
            rows.append([rec.id, int(idx), float(scores[idx])])
    write_csv(args.out, ["video_id", "clip", "score"], rows)
    return EXIT_OK


def cmd_highlight(args) -> int:
    run = _run_config(args)
    highlight_cfg = _highlight_config(run)
    records = load_manifest(args.manifest)
    model = _load_model(args.checkpoint).build()
    scores = {rec.id: infer_importance_scores(rec.features, model) for rec in records}
    theta = highlight_cfg.theta
    if run.highlight.get("theta_grid") is not None or args.fit_theta:
        folds = make_folds(records, args.folds, run.seed)
        holdout = [
            (scores[r.id], [Segment(s, e) for s, e in r.highlights])
            for r in records
            if r.highlights and (args.holdout_fold is None or folds[r.id] == args.holdout_fold)
        ]
        if not holdout:
            raise ManifestError("fitting the threshold needs videos with highlight annotations")
        theta = select_theta(holdout, highlight_cfg)
        log.info("fitted threshold %.3f on %d videos", theta, len(holdout))
    rows = []
    for rec in records:
        for seg in detect(scores[rec.id], highlight_cfg, theta):
            rows.append([rec.id, seg.start, seg.end, seg.score])
    write_csv(args.out, ["video_id", "start", "end", "score"], rows)
    return EXIT_OK


def selection_error_curve(sizes, k, alpha, trials, dim, seed):
    """Mean relative selection error per (N, method) on i.i.d. standard-normal scores and features."""
    rng = np.random.default_rng(seed)
    rows = []
    for size in sizes:
        errors = {"iterative-soft": [], "successive-halving-soft": []}
        for _ in range(trials):
            x = rng.standard_normal((dim, size))
            s = rng.standard_normal(size)
            cfg = SelectorConfig(k=k, alpha=alpha)
            hard = hard_topk(s, k)
            errors["iterative-soft"].append(selection_error(soft_topk_iterative(x, s, cfg), hard, x).item())
            errors["successive-halving-soft"].append(selection_error(soft_topk_halving(x, s, cfg), hard, x).item())
        for method, errs in errors.items():
            rows.append([size, method, float(np.mean(errs)), float(np.max(errs))])
    return rows


def f1_for_n(records, cfg: TrainingConfig, n: int) -> float:
    cfg = dataclasses.replace(cfg, contrastive=dataclasses.replace(cfg.contrastive, n=n))
    ckpt, _ = train(records, cfg)
    model = ckpt.build()
    f1 = []
    for rec in records:
        k = summary_length(rec.frames, cfg.k_frac)
        pred = np.zeros(rec.frames, dtype=bool)
        pred[hard_topk(infer_importance_scores(rec.features, model), k)] = True
        f1.append(f1_summary(pred, rec.truth_mask(k)))
    return float(np.mean(f1))


def cmd_ablate_topk(args) -> int:
    run = _run_config(args)
    rows = selection_error_curve(args.sizes, args.k, args.alpha, args.trials, args.dim, run.seed)
    out = Path(args.out_prefix)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(f"{out}_selection_error.csv", ["n_frames", "method", "mean_error", "max_error"], rows)
    if args.n_values:
        cfg = _training_config(run)
        records = load_manifest(args.manifest) if args.manifest else generate(SynthConfig(seed=run.seed))
        sweep = [[n, f1_for_n(records, cfg, n)] for n in args.n_values]
        write_csv(f"{out}_f1_vs_n.csv", ["n", "mean_f1"], sweep)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clipsum", description="Contrastive video summarization on precomputed clip features.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a planted synthetic dataset")
    _add_common(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    for f in dataclasses.fields(SynthConfig):
        if f.name != "seed":
            p.add_argument(f"--{f.name.replace('_', '-')}", dest=f"synth_{f.name}", type=type(f.default), default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model; writes a checkpoint and a loss CSV")
    _add_common(p)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="checkpoint path")
    p.add_argument("--loss-csv", type=Path, help="default: <out>.loss.csv")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--holdout-fold", type=int, help="leave this fold out of training")
    _add_config_flags(p, ("train", "selector", "contrastive"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="per-video metrics plus per-fold and overall means")
    _add_common(p)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, help="evaluate this model; without it, cross-validate")
    p.add_argument("--out", type=Path, required=True, help="per-video metrics CSV")
    p.add_argument("--aggregate-out", type=Path, help="default: <out stem>.folds.csv")
    p.add_argument("--folds", type=int, default=5)
    _add_config_flags(p, ("train", "selector", "contrastive", "highlight"))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("summarize", help="selected clip indices per video")
    _add_verbose(p)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--k", type=int, help="clips per summary (default from the model's k_frac)")
    p.set_defaults(func=cmd_summarize, seed=None)

    p = sub.add_parser("highlight", help="highlight segments per video")
    _add_common(p)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--fit-theta", action="store_true", help="fit the threshold on the default grid")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--holdout-fold", type=int, help="fit the threshold on this fold only")
    _add_config_flags(p, ("highlight",))
    p.set_defaults(func=cmd_highlight)

    p = sub.add_parser("ablate-topk", help="selection error versus N and F1 versus n")
    _add_common(p)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--sizes", type=_int_list, default=[64, 256, 1024, 4096])
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--alpha", type=float, default=1000.0)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--n-values", type=_int_list, default=[], help="e.g. 1,2,5,10; empty skips the training sweep")
    p.add_argument("--manifest", type=Path, help="dataset for the n sweep (default: synthetic)")
    _add_config_flags(p, ("train", "selector", "contrastive"))
    p.set_defaults(func=cmd_ablate_topk)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"clipsum: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"clipsum: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FeatureFileError, ManifestError, CheckpointError, FileNotFoundError, ValueError) as exc:
        print(f"clipsum: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
