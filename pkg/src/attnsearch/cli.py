"""Command-line entry point.

Subcommands: pretrain, search, enumerate, study, baseline {hsp|ga|l1},
verify-thm1, extend-demo, report. Every primary output file carries the
config digest; wall-clock figures go to separate *_timing.json advisory
files so primary outputs stay byte-identical across reruns.

Exit codes: 0 success, 1 validation failure, 2 acceptance-check failure
(verify subcommands).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ExperimentConfig
from .search import (SearchBudget, SupernetEvaluator, all_schemes, ean_search,
                     exhaustive_search, ga_search, hsp_scheme,
                     l1_prune_baseline, random_ratio_study)
from .stats import aggregate_violin
from .supernet import count_params, flop_increment_pct, pretrain_supernet
from .theory import (ResNetChain, Thm1Instance, embed_as_subnetwork,
                     extend_network, min_row_zeroing_error, thm1_monte_carlo,
                     thm1_width_bound)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse reserves exit code 2; we need it for checks
        raise _UsageError(message)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, digest: str, columns, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# config_digest={digest}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path) -> tuple[str, list[dict]]:
    digest = ""
    rows: list[dict] = []
    columns: list[str] | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# config_digest="):
                digest = line.split("=", 1)[1]
                continue
            if not line:
                continue
            if columns is None:
                columns = line.split(",")
                continue
            rows.append(dict(zip(columns, line.split(","))))
    return digest, rows


def write_json(path, digest: str, payload: dict) -> None:
    body = {"config_digest": digest}
    body.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_timing(outdir, name: str, digest: str, elapsed: float) -> None:
    path = os.path.join(outdir, f"{name}_timing.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"config_digest": digest, "elapsed_seconds": elapsed}, fh, indent=2)
        fh.write("\n")


def _prepare(args) -> tuple[ExperimentConfig, str, str]:
    cfg = ExperimentConfig.from_file(args.config)
    outdir = args.output_dir or cfg.output_dir
    os.makedirs(outdir, exist_ok=True)
    return cfg, outdir, cfg.digest()


def _evaluator(cfg: ExperimentConfig, args):
    """Evaluation backend: deterministic synthetic landscape, or the
    weight-shared backbone proxy restored from a checkpoint."""
    backend = getattr(args, "backend", "synthetic")
    if backend == "synthetic":
        return cfg.build_landscape(peaked=getattr(args, "peaked", False)), None
    if backend == "supernet":
        if not getattr(args, "checkpoint", None):
            raise _UsageError("backend 'supernet' needs --checkpoint")
        net = cfg.build_supernet()
        load_checkpoint(args.checkpoint, net, cfg.digest())
        _, val = cfg.build_dataset()
        return SupernetEvaluator(net, val), net
    raise _UsageError(f"unknown backend {backend!r}")


def _pmap(workers: int, fn, items):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_pretrain(args) -> int:
    cfg, outdir, digest = _prepare(args)
    train, _ = cfg.build_dataset()
    net = cfg.build_supernet()
    t0 = time.perf_counter()
    s = cfg.supernet
    pretrain_supernet(net, train, s.beta, s.steps, s.batch_size,
                      cfg.supernet_optimizer(), s.lr_drop_step, s.lr_drop_factor)
    out = args.out or os.path.join(outdir, "supernet.ckpt")
    save_checkpoint(out, net, digest)
    _write_timing(outdir, "pretrain", digest, time.perf_counter() - t0)
    print(f"checkpoint written: {out} ({s.steps} steps, beta={s.beta})")
    return 0


def cmd_search(args) -> int:
    cfg, outdir, digest = _prepare(args)
    net = cfg.build_supernet()
    load_checkpoint(args.checkpoint, net, digest)
    _, val = cfg.build_dataset()
    evaluator = SupernetEvaluator(net, val)
    controller = cfg.build_controller()
    rnd_pair = cfg.build_rnd_pair()
    budget = SearchBudget(cfg.search.iterations, cfg.search.evaluations,
                          cfg.search.wallclock_seconds)
    t0 = time.perf_counter()
    result = ean_search(evaluator, controller, cfg.reward_config(), budget,
                        cfg.rng("controller-sample"), rnd_pair,
                        cfg.backbone.stage_blocks)
    write_csv(os.path.join(outdir, "trace.csv"), digest,
              ["iteration", "scheme", "sparse", "g_val", "g_rnd", "reward", "p_bar"],
              [(r.iteration, r.scheme, r.sparse, r.g_val, r.g_rnd, r.reward, r.p_bar)
               for r in result.trace])
    write_csv(os.path.join(outdir, "pbar.csv"), digest, ["iteration", "p_bar"],
              [(r.iteration, r.p_bar) for r in result.trace])
    write_json(os.path.join(outdir, "schemes.json"), digest, {
        "best": [{"scheme": s.to_string(), "reward": g,
                  "extra_params": count_params(cfg.backbone, s)[1],
                  "flop_increment_pct": flop_increment_pct(cfg.backbone, s)}
                 for s, g in result.best],
    })
    _write_timing(outdir, "search", digest, time.perf_counter() - t0)
    best = result.best[0]
    print(f"best scheme {best[0].to_string()} reward {best[1]:.4f} "
          f"({len(result.trace)} iterations)")
    return 0


def cmd_enumerate(args) -> int:
    cfg, outdir, digest = _prepare(args)
    evaluator, _ = _evaluator(cfg, args)
    m = cfg.backbone.total_blocks
    if args.workers > 1:
        schemes = list(all_schemes(m))
        if m > 20:
            raise _UsageError(f"refusing exhaustive enumeration for m={m}")
        scores = _pmap(args.workers, evaluator, schemes)
        ranked = sorted(zip(schemes, scores), key=lambda sv: (-sv[1], sv[0].to_string()))
    else:
        ranked = exhaustive_search(evaluator, m)
    write_csv(os.path.join(outdir, "ranking.csv"), digest,
              ["rank", "scheme", "ones", "ratio", "score"],
              [(i, s.to_string(), s.ones_count, s.ratio, v)
               for i, (s, v) in enumerate(ranked)])
    print(f"enumerated {len(ranked)} schemes -> {outdir}/ranking.csv")
    return 0


def cmd_study(args) -> int:
    cfg, outdir, digest = _prepare(args)
    evaluator, _ = _evaluator(cfg, args)
    m = cfg.backbone.total_blocks
    t0 = time.perf_counter()
    eval_map = map if args.workers <= 1 else \
        (lambda fn, items: _pmap(args.workers, fn, list(items)))
    rows = random_ratio_study(evaluator, m, cfg.study.ratios,
                              cfg.study.samples_per_ratio, cfg.rng("study"),
                              config=cfg.backbone, eval_map=eval_map)
    write_csv(os.path.join(outdir, "study_rows.csv"), digest,
              ["scheme", "ones", "ratio", "accuracy", "extra_params",
               "flop_increment_pct"],
              [(r["scheme"], r["ones"], r["ratio"], r["accuracy"],
                r["extra_params"], r["flop_increment_pct"]) for r in rows])
    summary = aggregate_violin(rows)
    write_json(os.path.join(outdir, "study_summary.json"), digest, {
        "per_ratio": {str(k): {"max": v[0], "mean": v[1], "min": v[2]}
                      for k, v in summary.items()},
    })
    _write_timing(outdir, "study", digest, time.perf_counter() - t0)
    print(f"study rows: {len(rows)} -> {outdir}/study_rows.csv")
    return 0


def cmd_baseline(args) -> int:
    cfg, outdir, digest = _prepare(args)
    m = cfg.backbone.total_blocks
    payload: dict = {"method": args.method}
    if args.method == "hsp":
        scheme = hsp_scheme(args.period, args.offset, m)
        evaluator, _ = _evaluator(cfg, args)
        payload.update(period=args.period, offset=args.offset,
                       scheme=scheme.to_string(), score=float(evaluator(scheme)))
    elif args.method == "ga":
        evaluator, _ = _evaluator(cfg, args)
        generations = args.generations or max(1, cfg.search.iterations // args.population)
        scheme, fit = ga_search(evaluator, m, args.population, generations,
                                cfg.rng("ga"), cfg.reward_config())
        payload.update(population=args.population, generations=generations,
                       scheme=scheme.to_string(), fitness=fit,
                       score=float(evaluator(scheme)))
    else:  # l1
        if not args.checkpoint:
            raise _UsageError("baseline l1 needs --checkpoint")
        net = cfg.build_supernet()
        load_checkpoint(args.checkpoint, net, digest)
        scheme = l1_prune_baseline(net, args.keep_ratio)
        _, val = cfg.build_dataset()
        payload.update(keep_ratio=args.keep_ratio, scheme=scheme.to_string(),
                       score=SupernetEvaluator(net, val)(scheme))
    write_json(os.path.join(outdir, f"baseline_{args.method}.json"), digest, payload)
    print(f"baseline {args.method}: scheme {payload['scheme']}")
    return 0


def cmd_verify_thm1(args) -> int:
    cfg, outdir, digest = _prepare(args)
    th = cfg.theory
    conventions = ["literal", "corrected"] if th.dof_convention == "both" \
        else [th.dof_convention]
    rng = cfg.rng("theory-mc")
    results = [thm1_monte_carlo(th.d, th.epsilon, th.delta, th.trials, rng, conv)
               for conv in conventions]
    inst_rng = cfg.rng("theory-instances")
    dominance_ok = True
    worst_gap = -np.inf
    for _ in range(th.probes):
        inst = Thm1Instance.draw(th.d, 32, 50, inst_rng)
        _, measured, bound = min_row_zeroing_error(inst)
        dominance_ok &= measured <= bound
        worst_gap = max(worst_gap, measured - bound)
    passed = all(r["passed"] for r in results) and dominance_ok
    write_json(os.path.join(outdir, "thm1_report.json"), digest, {
        "d": th.d, "epsilon": th.epsilon, "delta": th.delta, "trials": th.trials,
        "m_min_literal": thm1_width_bound(th.d, th.epsilon, th.delta, "literal"),
        "m_min_corrected": thm1_width_bound(th.d, th.epsilon, th.delta, "corrected"),
        "monte_carlo": results,
        "zeroing_dominance": {"instances": th.probes, "ok": bool(dominance_ok),
                              "worst_gap": float(worst_gap)},
        "passed": bool(passed),
    })
    for r in results:
        print(f"dof={r['dof_convention']}: m={r['m']} failure_rate={r['failure_rate']:.4f} "
              f"band={r['band']:.4f} {'PASS' if r['passed'] else 'FAIL'}")
    return 0 if passed else 2


def cmd_extend_demo(args) -> int:
    cfg, outdir, digest = _prepare(args)
    rng = cfg.rng("extend-demo")
    narrow = ResNetChain.random(args.dim, [args.width] * args.depth, rng)
    probes = rng.standard_normal((args.probes, args.dim))
    extended = extend_network(narrow, args.extra)
    ext_err = float(np.abs(extended.forward(probes) - narrow.forward(probes)).max())
    wide, masks = embed_as_subnetwork(narrow, args.wide_width, rng)
    emb_err = float(np.abs(wide.forward(probes, masks) - narrow.forward(probes)).max())
    unmasked_gap = float(np.abs(wide.forward(probes) - narrow.forward(probes)).max())
    passed = ext_err == 0.0 and emb_err <= 1e-12 and unmasked_gap > 1e-6
    write_json(os.path.join(outdir, "extend_report.json"), digest, {
        "dim": args.dim, "depth": args.depth, "extra_layers": args.extra,
        "wide_width": args.wide_width, "probes": args.probes,
        "extension_error": ext_err, "embedding_error": emb_err,
        "unmasked_gap": unmasked_gap,
        "extended_depth": extended.depth, "original_depth": narrow.depth,
        "passed": bool(passed),
    })
    print(f"extension error {ext_err:.2e}, embedding error {emb_err:.2e} "
          f"-> {'PASS' if passed else 'FAIL'}")
    return 0 if passed else 2


def cmd_report(args) -> int:
    digest, rows = read_csv(args.rows)
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
        if cfg.digest() != digest:
            raise _UsageError(
                f"rows file digest {digest[:12]}… does not match config "
                f"{cfg.digest()[:12]}…")
    parsed = [{"ratio": float(r["ratio"]), "accuracy": float(r["accuracy"])}
              for r in rows]
    summary = aggregate_violin(parsed)
    out = args.out or os.path.join(os.path.dirname(args.rows) or ".",
                                   "report_summary.json")
    write_json(out, digest, {
        "per_ratio": {str(k): {"max": v[0], "mean": v[1], "min": v[2]}
                      for k, v in summary.items()},
        "rows": len(parsed),
    })
    print(f"report over {len(parsed)} rows -> {out}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="attnsearch",
                     description="sparse attention-connection scheme search")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--output-dir", default=None,
                       help="override the config's output directory")
        p.add_argument("--workers", type=int, default=1,
                       help="parallel evaluation workers where supported")

    p = sub.add_parser("pretrain", help="pre-train the weight-shared backbone")
    common(p)
    p.add_argument("--out", default=None, help="checkpoint path")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("search", help="policy-gradient scheme search")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("enumerate", help="evaluate every scheme exhaustively")
    common(p)
    p.add_argument("--backend", choices=["synthetic", "supernet"], default="synthetic")
    p.add_argument("--checkpoint", default=None)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("study", help="fixed-ratio random sampling study")
    common(p)
    p.add_argument("--backend", choices=["synthetic", "supernet"], default="synthetic")
    p.add_argument("--checkpoint", default=None)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("baseline", help="comparison searchers")
    p.add_argument("method", choices=["hsp", "ga", "l1"])
    common(p)
    p.add_argument("--backend", choices=["synthetic", "supernet"], default="synthetic")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--period", type=int, default=2, help="hsp: connect every N blocks")
    p.add_argument("--offset", type=int, default=0, help="hsp: first connected block")
    p.add_argument("--population", type=int, default=20, help="ga population size")
    p.add_argument("--generations", type=int, default=None,
                   help="ga generations (default: search iterations / population)")
    p.add_argument("--keep-ratio", type=float, default=0.5,
                   help="l1: fraction of connections kept")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("verify-thm1", help="Monte-Carlo check of the width bound")
    common(p)
    p.set_defaults(func=cmd_verify_thm1)

    p = sub.add_parser("extend-demo", help="function-preserving depth extension "
                                           "and subnetwork embedding check")
    common(p)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--width", type=int, default=3)
    p.add_argument("--extra", type=int, default=4)
    p.add_argument("--wide-width", type=int, default=8)
    p.add_argument("--probes", type=int, default=100)
    p.set_defaults(func=cmd_extend_demo)

    p = sub.add_parser("report", help="recompute per-ratio summary from study rows")
    p.add_argument("--rows", required=True, help="study_rows.csv path")
    p.add_argument("--config", default=None, help="verify the digest against this config")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
