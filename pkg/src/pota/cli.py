"""Command-line entry point: ``pota <command> ...``.

Exit codes: 0 success, 2 usage, 3 data/schema error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .classifier import MODES, PoTAModel, TrainConfig
from .classifier import train as train_model
from .errors import ConfigError, PotaError
from .evalharness import (
    ABLATION_MODES,
    evaluate,
    export_latents,
    prepare_pair,
    rank_candidates,
    run_pair,
    scaling_factor_per_doubling,
    scaling_probe,
    transfer_gain_matrix,
    write_candidates_csv,
    write_latents_csv,
    write_metrics_csv,
    write_scaling_csv,
)
from .featurecodec import build_dataset
from .formats import load_run_config, read_region, write_region
from .gradcheck import TOY_TOLERANCE, run_suite
from .gridgraph import build_grid_graph
from .synthgen import SynthConfig, generate_pair, homophily

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("pota")


def _train_config(args) -> TrainConfig:
    if args.config is None and args.seed is None:
        raise ConfigError("give --config or --seed")
    cfg = load_run_config(args.config)[0] if args.config else TrainConfig()
    return cfg if args.seed is None else replace(cfg, seed=args.seed)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _modes(text: str) -> list[str]:
    modes = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in modes if m not in MODES]
    if bad or not modes:
        raise argparse.ArgumentTypeError(f"unknown modes {bad}; choose from {', '.join(ABLATION_MODES)}")
    return modes


def _describe(records, graph) -> str:
    return (f"{records.name}: {records.width}x{records.height}, wetland density "
            f"{records.wetland_fraction:.4f}, homophily {homophily(records, graph):.4f}")


def cmd_synth(args) -> int:
    base = SynthConfig()
    if args.config:
        synth = load_run_config(args.config)[1]
        base = synth if synth is not None else base
    over = {k: v for k, v in {
        "width": args.width, "height": args.height, "wetland_density": args.density,
        "spatial_scale": args.scale, "noise": args.noise, "n_continuous": args.continuous,
        "heterophilic": args.heterophilic or None, "seed": args.seed,
    }.items() if v is not None}
    src_cfg = replace(base, **over)
    tgt_over = {"seed": args.seed + 1}
    if args.target_density is not None:
        tgt_over["wetland_density"] = args.target_density
    if args.shift is not None:
        tgt_over["domain_shift"] = args.shift
    tgt_cfg = replace(src_cfg, **tgt_over)
    src_name = Path(args.out).name
    tgt_name = Path(args.target_out).name if args.target_out else "target"
    src, tgt = generate_pair(src_cfg, tgt_cfg, world_seed=args.seed, names=(src_name, tgt_name))
    graph = build_grid_graph(src.width, src.height)
    for path, rec in ((args.out, src), (args.target_out, tgt)):
        if path is None:
            continue
        mpath, cpath = write_region(rec, path)
        print(_describe(rec, graph))
        print(f"  wrote {mpath} and {cpath}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _train_config(args)
    target = read_region(args.target)
    source = read_region(args.source) if args.source else None
    ds, dt, schema = prepare_pair(source if source is not None else target, target, cfg)
    model, report = train_model(ds if source is not None else None, dt, cfg, schema)
    model.save(args.out)
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_json(), indent=1) + "\n", encoding="utf-8")
    m = report.metrics
    print(f"best epoch {report.best_epoch} of {report.last_epoch + 1}; "
          f"val accuracy {m['best_val_accuracy']:.4f}; test accuracy {m['test_accuracy']:.4f}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _region_dataset(model: PoTAModel, path):
    cfg = model.config
    return build_dataset(read_region(path), model.schema, cfg.seed,
                         connectivity=cfg.connectivity, stratified=cfg.stratified)


def cmd_evaluate(args) -> int:
    model = PoTAModel.load(args.model)
    ds = _region_dataset(model, args.region)
    m = evaluate(model, ds, args.split, args.domain)
    flag = "" if m.recall_defined else " (no wetland cells in split)"
    print(f"accuracy {m.accuracy:.6f}")
    print(f"recall {m.recall:.6f}{flag}")
    print(f"tp {m.tp} fp {m.fp} tn {m.tn} fn {m.fn}")
    if args.out:
        write_metrics_csv([(args.split, model.config.seed, m)], args.out)
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _train_config(args)
    source, target = read_region(args.source), read_region(args.target)
    seeds = args.seeds or [cfg.seed]
    rows = []
    for seed in seeds:
        for mode in args.modes:
            m = run_pair(source, target, replace(cfg, seed=seed).with_mode(mode))[2]
            rows.append((mode, seed, m))
            print(f"{mode:>14} seed {seed}: accuracy {m.accuracy:.4f} recall {m.recall:.4f}")
    write_metrics_csv(rows, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_gain_matrix(args) -> int:
    cfg = _train_config(args)
    regions = [read_region(p) for p in args.regions]
    gm = transfer_gain_matrix(regions, cfg, args.seeds or [0, 1, 2, 3, 4])
    gm.write_csv(args.out)
    for (i, j), msg in gm.failures.items():
        print(f"missing {gm.names[i]} -> {gm.names[j]}: {msg}", file=sys.stderr)
    width = max(len(n) for n in gm.names)
    print(" " * width + "".join(f" {n:>{max(width, 9)}}" for n in gm.names))
    for i, n in enumerate(gm.names):
        print(f"{n:>{width}}" + "".join(f" {gm.gain[i, j]:>+{max(width, 9)}.4f}" for j in range(len(gm.names))))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_rank(args) -> int:
    model = PoTAModel.load(args.model)
    ds = _region_dataset(model, args.region)
    cands = rank_candidates(model, ds, args.top_k, args.domain)
    write_candidates_csv(cands, args.out)
    print(f"{len(cands)} candidate cells; wrote {args.out}")
    return EXIT_OK


def cmd_export_latents(args) -> int:
    model = PoTAModel.load(args.model)
    if model.target_only:
        raise ConfigError("latent export needs a model trained with a source region")
    src, tgt = _region_dataset(model, args.source), _region_dataset(model, args.target)
    rows = export_latents(model, src, tgt, args.sample, args.seed)
    write_latents_csv(rows, model.config.hidden, args.out)
    print(f"{len(rows)} rows; wrote {args.out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = run_suite(seed=args.seed, epsilon=args.epsilon)
    for r in results:
        print(f"{r.name:>20}: max rel. error {r.max_rel_error:.3e} over {r.n_coords} coords "
              f"[{'ok' if r.passed else 'FAIL'}]")
    worst = max(r.max_rel_error for r in results)
    print(f"max rel. error {worst:.3e} (tolerance {TOY_TOLERANCE:g})")
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


def cmd_scaling(args) -> int:
    cfg = _train_config(args)
    rows = scaling_probe(args.sizes, cfg, args.epochs)
    for w, h, e, t in rows:
        print(f"{w}x{h}: {e} edges, {t * 1e3:.2f} ms/epoch")
    print(f"time factor per edge doubling: {scaling_factor_per_doubling(rows):.3f}")
    if args.out:
        write_scaling_csv(rows, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pota", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True)

    def cfg_args(sp, seed_required=False):
        sp.add_argument("--config", help="run-config JSON")
        sp.add_argument("--seed", type=int, required=seed_required, help="overrides the config seed")

    s = sub.add_parser("synth", help="generate a synthetic region (and optionally its paired target)")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, help="region path stem")
    s.add_argument("--target-out", help="also write the shifted target region here")
    s.add_argument("--width", type=int)
    s.add_argument("--height", type=int)
    s.add_argument("--density", type=float)
    s.add_argument("--target-density", type=float)
    s.add_argument("--shift", type=float, help="target domain shift")
    s.add_argument("--scale", type=int, help="spatial correlation radius in cells")
    s.add_argument("--noise", type=float)
    s.add_argument("--continuous", type=int, help="number of continuous features")
    s.add_argument("--heterophilic", action="store_true")
    s.add_argument("--config", help="run-config JSON whose 'synth' object gives defaults")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train a model (omit --source for target-only)")
    s.add_argument("--source")
    s.add_argument("--target", required=True)
    s.add_argument("--out", required=True, help="model JSON path")
    s.add_argument("--report", help="write the training report JSON here")
    cfg_args(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="accuracy and recall of a saved model on a region split")
    s.add_argument("--model", required=True)
    s.add_argument("--region", required=True)
    s.add_argument("--split", default="test", choices=("train", "val", "test", "all"))
    s.add_argument("--domain", default="target", choices=("source", "target"))
    s.add_argument("--out", help="metrics CSV")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("ablate", help="train each ablation mode and write a metrics CSV")
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--modes", type=_modes, default=list(ABLATION_MODES))
    s.add_argument("--seeds", type=_int_list)
    s.add_argument("--out", required=True)
    cfg_args(s)
    s.set_defaults(func=cmd_ablate)

    s = sub.add_parser("gain-matrix", help="transfer gain for every ordered pair of regions")
    s.add_argument("--regions", nargs="+", required=True)
    s.add_argument("--seeds", type=_int_list)
    s.add_argument("--out", required=True)
    cfg_args(s)
    s.set_defaults(func=cmd_gain_matrix)

    s = sub.add_parser("rank", help="non-wetland cells by predicted wetland probability")
    s.add_argument("--model", required=True)
    s.add_argument("--region", required=True)
    s.add_argument("--top-k", type=int, default=100)
    s.add_argument("--domain", default="target", choices=("source", "target"))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rank)

    s = sub.add_parser("export-latents", help="sampled specific/shared latents as CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--sample", type=int, default=500, help="cells per domain")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_export_latents)

    s = sub.add_parser("gradcheck", help="finite-difference check of the full model on a 3x3 toy pair")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--epsilon", type=float, default=1e-5)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("scaling", help="epoch wall time against edge count")
    s.add_argument("--sizes", type=_int_list, default=[32, 64, 128])
    s.add_argument("--epochs", type=int, default=5)
    s.add_argument("--out")
    cfg_args(s)
    s.set_defaults(func=cmd_scaling)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except PotaError as e:
        print(f"pota {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"pota {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA
