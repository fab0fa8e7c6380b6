"""Command-line entry point: ``polyset <command> [options]``.

Commands write CSV/JSON tables, JSONL corpora and SVG figures into
``--out-dir`` together with a ``<command>_config.json`` holding the fully
resolved options. Options may also come from ``--config file.json`` (keys
are the option names with dashes replaced by underscores); flags given on
the command line take precedence.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .analyze import (coverage_histogram, degeneracy_report, iso_subset_manifold_check, rows_to_csv,
                      select_iso_subset)
from .dataset import (DatasetConfig, baseline_matrix, generate_corpus, polyset_matrix, read_corpus, read_split,
                      split_records, write_records, write_split)
from .encode import BASELINE, POLYSET, EncoderConfig, write_embeddings
from .ensemble import empirical_moments, sample
from .errors import PolySetError, TrainingError
from .learn import TrainConfig, model_to_dict, train
from .mwd import analytic_moments, fit_mwd

logger = logging.getLogger("polyset")


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_resolved(args, out: Path, extra: dict | None = None) -> None:
    opts = {k: v for k, v in vars(args).items() if k not in ("func",)}
    opts = {k: (str(v) if isinstance(v, Path) else v) for k, v in opts.items()}
    _dump_json({"command": args.command, "options": opts, **(extra or {})}, out / f"{args.command}_config.json")


def _encoder_cfg(args, monomer: str) -> EncoderConfig:
    return EncoderConfig(n_rbf=args.n_rbf, center_lo=args.center_lo, center_hi=args.center_hi,
                         bandwidth=args.bandwidth, monomer_vocab=(monomer,),
                         include_raw_logmass=not args.no_raw_logmass)


def _corpus(path):
    config, records = read_corpus(path)
    if not records:
        raise PolySetError(f"corpus {path} contains no records")
    return config, records


def _histogram_rows(values, bins, name):
    counts, edges = np.histogram(values, bins=bins)
    return [{f"{name}_lo": float(lo), f"{name}_hi": float(hi), "count": int(c)}
            for lo, hi, c in zip(edges[:-1], edges[1:], counts)]


# ---------------------------------------------------------------- commands

def cmd_gen_dataset(args) -> int:
    out = args.out_dir
    if args.records is not None:
        if args.records % args.variants:
            raise PolySetError(f"--records {args.records} is not a multiple of --variants {args.variants}")
        n_groups = args.records // args.variants
    else:
        n_groups = args.groups
    cfg = DatasetConfig(
        n_groups=n_groups,
        variants_per_group=args.variants,
        mn_range=tuple(args.mn_range),
        dispersity_range=tuple(args.disp_range),
        chains_per_ensemble=args.chains,
        m0=args.m0,
        monomer=args.monomer,
        master_seed=args.seed,
        sampling_mode=args.mode,
        truncated_span_range=tuple(args.truncated_span_range),
        family_cycling=not args.no_family_cycling,
    )
    out.mkdir(parents=True, exist_ok=True)
    records = generate_corpus(cfg)
    write_records(records, out / "corpus.jsonl", cfg)

    log_mn = np.log10([r.mn for r in records])
    disp = np.array([r.dispersity for r in records])
    (out / "mn_histogram.csv").write_text(rows_to_csv(_histogram_rows(log_mn, 40, "log10_mn")))
    (out / "dispersity_histogram.csv").write_text(rows_to_csv(_histogram_rows(disp, 40, "dispersity")))
    counts, xe, ye = np.histogram2d(log_mn, disp, bins=20)
    bins2d = [{"log10_mn_lo": float(xe[i]), "log10_mn_hi": float(xe[i + 1]), "dispersity_lo": float(ye[j]),
               "dispersity_hi": float(ye[j + 1]), "count": int(counts[i, j])}
              for i in range(counts.shape[0]) for j in range(counts.shape[1])]
    (out / "mn_dispersity_bins.csv").write_text(rows_to_csv(bins2d))
    scatter = [{"id": r.id, "group_id": r.group_id, "family": r.spec.family.value, "mn": r.mn,
                "dispersity": r.dispersity, "log10_mz": r.target_log10_mz, "log10_mz1": r.target_log10_mz1}
               for r in records]
    (out / "mn_vs_log10_mz1.csv").write_text(
        rows_to_csv(scatter, ["id", "group_id", "family", "mn", "dispersity", "log10_mz1"]))
    (out / "mn_vs_log10_mz.csv").write_text(
        rows_to_csv(scatter, ["id", "group_id", "family", "mn", "dispersity", "log10_mz"]))
    plotting.dataset_overview(records, out / "dataset_overview.svg")
    plotting.moment_scatter(records, out / "mn_vs_log10_mz.svg", "mz")

    cov, _, _ = coverage_histogram(records)
    coverage = {"n_records": len(records), "n_groups": cfg.n_groups, "empty_cells_10x10": int((cov == 0).sum()),
                "mn_min": float(min(r.mn for r in records)), "mn_max": float(max(r.mn for r in records)),
                "dispersity_min": float(disp.min()), "dispersity_max": float(disp.max())}
    _dump_json(coverage, out / "coverage.json")
    _write_resolved(args, out, {"dataset": cfg.to_dict()})
    print(f"wrote {len(records)} records to {out / 'corpus.jsonl'}")
    return 0


def cmd_moments(args) -> int:
    spec = fit_mwd(args.family, args.mn, args.disp, args.m0)
    ana = analytic_moments(spec)
    ens = sample(spec, args.chains, args.mode, args.seed, args.span)
    emp = empirical_moments(ens)
    point = spec.is_point_mass
    print(f"family: {spec.family.value}{' (point mass)' if point else ''}  params: "
          + ", ".join(f"{k}={v:.6g}" for k, v in spec.params.items()))
    print(f"{'moment':<12}{'analytic':>16}{'empirical':>16}{'rel.err':>12}")
    for key, label in (("mn", "Mn"), ("mw", "Mw"), ("mz", "Mz"), ("mz_plus_1", "Mz+1"), ("dispersity", "D")):
        a, e = getattr(ana, key), getattr(emp, key)
        print(f"{label:<12}{a:>16.6g}{e:>16.6g}{(e - a) / a:>12.2e}")
    if args.out_dir is not None:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        _dump_json({"spec": spec.to_dict(), "point_mass": point, "analytic": ana.as_dict(),
                    "empirical": emp.as_dict(), "n_chains": ens.n, "mode": args.mode},
                   args.out_dir / "moments.json")
        _write_resolved(args, args.out_dir)
    return 0


def cmd_embed(args) -> int:
    config, records = _corpus(args.corpus)
    monomer = records[0].monomer
    enc = _encoder_cfg(args, monomer)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    ids = [r.id for r in records]
    kinds = [POLYSET, BASELINE] if args.repr == "both" else [args.repr]
    for kind in kinds:
        matrix = polyset_matrix(records, enc) if kind == POLYSET else baseline_matrix(records, enc)
        write_embeddings(args.out_dir / f"embeddings_{kind}.jsonl", ids, matrix, enc, kind)
        print(f"wrote {matrix.shape[0]} x {matrix.shape[1]} {kind} embeddings")
    _write_resolved(args, args.out_dir, {"encoder": enc.to_dict()})
    return 0


def cmd_train_eval(args) -> int:
    _, records = _corpus(args.corpus)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    enc = _encoder_cfg(args, records[0].monomer)
    if args.split is not None:
        split = read_split(args.split)
    else:
        split = split_records(records, tuple(args.fractions), seed=args.seed, group_aware=not args.record_split)
    write_split(split, out / "split.json")
    tcfg = TrainConfig(learning_rate=args.lr, batch_size=args.batch_size, max_epochs=args.epochs,
                       patience=args.patience, seed=args.seed, hidden=tuple(args.hidden), target=args.target,
                       rbf_log_floor=None if args.no_rbf_log else args.rbf_log_floor)
    reps = [BASELINE, POLYSET] if args.repr == "both" else [args.repr]
    reports, metrics, per_sample = [], {}, {}
    status = 0
    for rep in reps:
        try:
            model, scaler, report = train(records, rep, split, enc, tcfg)
        except TrainingError as exc:
            curve = "epoch,train_mse,val_mse\n" + "".join(
                f"{i + 1},{a!r},{b!r}\n" for i, (a, b) in enumerate(zip(exc.train_curve, exc.val_curve)))
            (out / f"learning_curve_{rep}.csv").write_text(curve)
            print(f"error: {rep}: {exc}", file=sys.stderr)
            status = 1
            continue
        reports.append(report)
        metrics[rep] = report.metrics_dict()
        (out / f"learning_curve_{rep}.csv").write_text(report.learning_curve_csv())
        rows = []
        errs = []
        for i, t, p in zip(report.test_ids, report.test_true, report.test_pred):
            e = 200.0 * abs(10 ** t - 10 ** p) / (10 ** t + 10 ** p)
            errs.append(e)
            rows.append({"id": i, "true_log10": t, "pred_log10": p, "smape_pct": e})
        per_sample[rep] = errs
        (out / f"parity_{rep}.csv").write_text(rows_to_csv(rows, ["id", "true_log10", "pred_log10"]))
        (out / f"smape_{rep}.csv").write_text(rows_to_csv(rows, ["id", "smape_pct"]))
        _dump_json(report.metrics_dict(), out / f"metrics_{rep}.json")
        _dump_json(model_to_dict(model, scaler, tcfg), out / f"model_{rep}.json")
        print(f"{rep:>9} {args.target}: R2={report.metrics['r2']:.4f}  SMAPE={report.metrics['smape']:.3f}%  "
              f"best epoch {report.best_epoch}/{len(report.val_loss)}  ({report.wall_clock:.1f}s)")
    if BASELINE in metrics and POLYSET in metrics:
        b, p = metrics[BASELINE], metrics[POLYSET]
        metrics["comparison"] = {"r2_gap": p["r2"] - b["r2"],
                                 "smape_ratio": b["smape"] / p["smape"] if p["smape"] > 0 else math.inf}
    _dump_json(metrics, out / "metrics.json")
    if reports:
        plotting.learning_curves(reports, out / "learning_curves.svg")
        plotting.parity(reports, out / "parity.svg")
        plotting.smape_distribution(per_sample, out / "smape_distribution.svg")
    _write_resolved(args, out, {"encoder": enc.to_dict(), "train": tcfg.to_dict()})
    return status


def cmd_pca(args) -> int:
    _, records = _corpus(args.corpus)
    if args.groups:
        wanted = set(args.groups)
        subset = [r for r in records if r.group_id in wanted]
    elif args.mn is not None and args.disp is not None:
        subset = select_iso_subset(records, args.mn, args.disp, args.rtol)
    else:
        raise PolySetError("select a subset with --mn and --disp, or with --groups")
    if not subset:
        raise PolySetError("selector matched no records")
    enc = _encoder_cfg(args, subset[0].monomer)
    res = iso_subset_manifold_check(subset, enc, args.repr)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    rows = [{"id": i, "pc1": p[0], "pc2": p[1] if len(p) > 1 else 0.0, "log10_mz1": y}
            for i, p, y in zip(res["ids"], res["projections"], res["log10_mz1"])]
    (out / f"pca_{args.repr}.csv").write_text(rows_to_csv(rows))
    summary = {k: v for k, v in res.items() if k not in ("projections", "log10_mz1", "ids")}
    _dump_json(summary, out / f"pca_{args.repr}_summary.json")
    plotting.pca_scatter(res["projections"], res["log10_mz1"], out / f"pca_{args.repr}.svg",
                         title=f"{args.repr} embeddings, n={len(subset)}")
    curves = []
    for r in subset:
        e = r.ensemble()
        edges = np.linspace(2.0, 8.5, 131)
        h, _ = np.histogram(np.log10(e.m), bins=edges, weights=e.weights)
        curves.append((0.5 * (edges[:-1] + edges[1:]), h / np.diff(edges), r.target_log10_mz1))
    plotting.mwd_curves(curves, out / "iso_subset_mwd.svg")
    _write_resolved(args, out, {"encoder": enc.to_dict()})
    if res["degenerate"]:
        print(f"degenerate embeddings: all {len(subset)} {args.repr} embeddings coincide; no ordering possible")
    else:
        flag = " (low diversity)" if res["low_diversity"] else ""
        print(f"max |spearman(PC, log10 Mz+1)| = {res['spearman_pc_vs_logmz1']:.4f} over {len(subset)} records{flag}")
    return 0


def cmd_degeneracy_report(args) -> int:
    _, records = _corpus(args.corpus)
    rows, summary = degeneracy_report(records)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "degeneracy.csv").write_text(rows_to_csv(rows))
    _dump_json(summary, out / "degeneracy_summary.json")
    plotting.moment_scatter(records, out / "degeneracy_mz1.svg", "mz1")
    _write_resolved(args, out)
    for k, v in summary.items():
        print(f"{k}: {v:.6g}" if isinstance(v, float) else f"{k}: {v}")
    return 0


# ---------------------------------------------------------------- parser

def _add_encoder_opts(p):
    g = p.add_argument_group("encoder")
    g.add_argument("--n-rbf", type=int, default=32)
    g.add_argument("--center-lo", type=float, default=3.0)
    g.add_argument("--center-hi", type=float, default=7.5)
    g.add_argument("--bandwidth", type=float, default=1.0)
    g.add_argument("--no-raw-logmass", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--config", type=Path, default=None, help="JSON file of option defaults")
    common.add_argument("--out-dir", type=Path, default=Path("polyset_out"))
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="polyset", description="Distribution-aware polymer ensembles.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", parents=[common], help="generate the synthetic corpus")
    p.add_argument("--records", type=int, default=None, help="total records (overrides --groups)")
    p.add_argument("--groups", type=int, default=2500)
    p.add_argument("--variants", type=int, default=4)
    p.add_argument("--mn-range", type=float, nargs=2, default=[1e4, 1e6])
    p.add_argument("--disp-range", type=float, nargs=2, default=[1.5, 4.0])
    p.add_argument("--chains", type=int, default=512)
    p.add_argument("--m0", type=float, default=100.0)
    p.add_argument("--monomer", default="A")
    p.add_argument("--mode", choices=["grid", "iid", "literal"], default="grid")
    p.add_argument("--truncated-span-range", type=float, nargs=2, default=[3.0, 4.0])
    p.add_argument("--no-family-cycling", action="store_true")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("moments", parents=[common], help="analytic vs ensemble moments of one distribution")
    p.add_argument("--family", default="lognormal")
    p.add_argument("--mn", type=float, required=True)
    p.add_argument("--disp", type=float, required=True)
    p.add_argument("--m0", type=float, default=100.0)
    p.add_argument("--chains", type=int, default=2048)
    p.add_argument("--span", type=float, default=8.0)
    p.add_argument("--mode", choices=["grid", "iid", "literal"], default="grid")
    p.set_defaults(func=cmd_moments, out_dir=None)

    p = sub.add_parser("embed", parents=[common], help="write embedding matrices for a corpus")
    p.add_argument("corpus", type=Path)
    p.add_argument("--repr", choices=["polyset", "baseline", "both"], default="both")
    _add_encoder_opts(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("train-eval", parents=[common], help="train and evaluate regressors")
    p.add_argument("corpus", type=Path)
    p.add_argument("--repr", choices=["polyset", "baseline", "both"], default="both")
    p.add_argument("--target", choices=["mz1", "mz"], default="mz1")
    p.add_argument("--split", type=Path, default=None, help="existing split JSON")
    p.add_argument("--fractions", type=float, nargs=3, default=[0.7, 0.15, 0.15])
    p.add_argument("--record-split", action="store_true", help="split by record instead of by group")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--patience", type=int, default=25)
    p.add_argument("--hidden", type=int, nargs="+", default=[64, 64])
    p.add_argument("--rbf-log-floor", type=float, default=1e-12)
    p.add_argument("--no-rbf-log", action="store_true", help="feed the RBF block linearly")
    _add_encoder_opts(p)
    p.set_defaults(func=cmd_train_eval)

    p = sub.add_parser("pca", parents=[common], help="PCA of an iso-(Mn, D) subset")
    p.add_argument("corpus", type=Path)
    p.add_argument("--mn", type=float, default=None)
    p.add_argument("--disp", type=float, default=None)
    p.add_argument("--rtol", type=float, default=1e-6)
    p.add_argument("--groups", type=int, nargs="*", default=None)
    p.add_argument("--repr", choices=["polyset", "baseline"], default="polyset")
    _add_encoder_opts(p)
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("degeneracy-report", parents=[common], help="per-group spread of Mz and Mz+1")
    p.add_argument("corpus", type=Path)
    p.set_defaults(func=cmd_degeneracy_report)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        try:
            defaults = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read --config {args.config}: {exc}")
        if not isinstance(defaults, dict):
            parser.error("--config must hold a JSON object")
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = sorted(set(defaults) - known)
        if unknown:
            parser.error(f"unknown keys in --config: {', '.join(unknown)}")
        for key in ("out_dir", "corpus", "split"):
            if isinstance(defaults.get(key), str):
                defaults[key] = Path(defaults[key])
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PolySetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
