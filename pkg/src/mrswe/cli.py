"""Command-line interface: ``mrswe {run,validate,bench,compare}``.

Exit codes: 0 success, 1 validation or comparison failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import engine, io, parallel

log = logging.getLogger("mrswe")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (section prefix optional, e.g. run.L=9); repeatable")
    p.add_argument("--workers", type=int, default=None,
                   help=f"kernel worker count (default: ${parallel.WORKERS_ENV} or the CPU count)")
    p.add_argument("--quiet", action="store_true", help="only print errors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrswe",
        description="Adaptive multiresolution shallow-water solver.",
        epilog=f"Environment: {parallel.WORKERS_ENV} sets the default worker count.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one simulation and write its outputs")
    p.add_argument("--config", required=True, type=Path, help="config file (*.cfg)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    _add_common(p)

    p = sub.add_parser("validate", help="run the acceptance criteria and print PASS/FAIL per criterion")
    p.add_argument("--only", default=None,
                   help="comma-separated criteria by name or key, e.g. wellbalanced,A4")
    p.add_argument("--scale", default="desk",
                   help="problem size: 'desk' (default), 'full' (stated sizes) or 'L=<level>'")
    _add_common(p)

    p = sub.add_parser("bench", help="time adaptive against uniform runs over an epsilon x L matrix")
    p.add_argument("--config", type=Path, default=None,
                   help="base config (default: the pseudo-2D dam-break)")
    p.add_argument("--eps", default="1e-4,1e-3,1e-2", help="comma-separated epsilon values")
    p.add_argument("--levels", default="8,9,10,11", help="comma-separated maximum levels")
    p.add_argument("--out", type=Path, default=Path("bench"), help="output directory (default: ./bench)")
    _add_common(p)

    p = sub.add_parser("compare", help="L1/Linf differences between two run directories")
    p.add_argument("run_a", type=Path)
    p.add_argument("run_b", type=Path)
    p.add_argument("--field", default="h", help="snapshot field to compare (default: h)")
    p.add_argument("--out", type=Path, default=None, help="also write the table to this CSV file")
    p.add_argument("--tolerance", type=float, default=None,
                   help="exit 1 if any L1 difference exceeds this value")
    p.add_argument("--quiet", action="store_true", help="only print errors")
    return parser


def _setup_workers(args) -> None:
    try:
        parallel.set_workers(args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load(path: Path | None, overrides) -> cfgmod.SimConfig:
    if path is None:
        return cfgmod.loads("case = pseudo2d_long", overrides)
    if not path.exists():
        raise UsageError(f"config file {path} does not exist")
    return cfgmod.load_config(path, overrides)


def cmd_run(args) -> int:
    cfg = _load(args.config, args.overrides)
    if args.workers is not None:
        cfg = cfg.replace(workers=args.workers)
    _setup_workers(args)

    def progress(r):
        if r.step % 500 == 0:
            log.info("step %d  t=%.4g  dt=%.3g  leaves=%d", r.step, r.t, r.dt, r.leaves)

    result = engine.run(cfg, progress=progress)
    text = cfgmod.dumps(cfg)
    io.write_run(args.out, result, text, cfg.format)
    last = result.reports[-1] if result.reports else None
    log.info("done: %d steps, %s leaves at the end, compute %.2fs -> %s",
             len(result.reports), last.leaves if last else "-", last.wall if last else 0.0, args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    from . import validation

    try:
        scale = validation.Scale.parse(args.scale)
        names = validation.resolve(args.only.split(",")) if args.only else list(validation.DEFAULT_SELECTION)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.workers is not None:
        _setup_workers(args)
    results = validation.run_criteria(names, scale, report=print)
    failed = [r.key for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_FAIL if failed else EXIT_OK


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--{what}: expected comma-separated numbers, got {text!r}") from None


BENCH_COLUMNS = ("epsilon", "L", "t", "adaptive_wall_s", "uniform_wall_s", "speedup", "leaves", "status")
STAGE_COLUMNS = ("epsilon", "L", "solver", "steps", "encode_s", "decode_s", "traverse_s", "neighbours_s",
                 "update_s", "reduce_s", "total_s")


def _stage_row(eps, L, solver, result):
    sums = {k: sum(getattr(r, k) for r in result.reports)
            for k in ("encode", "decode", "traverse", "neighbours", "update", "reduce")}
    total = result.reports[-1].wall if result.reports else 0.0
    return [eps, L, solver, len(result.reports)] + [sums[k] for k in sums] + [total]


def cmd_bench(args) -> int:
    base = _load(args.config, args.overrides)
    _setup_workers(args)
    eps_list = _floats(args.eps, "eps")
    levels = [int(v) for v in _floats(args.levels, "levels")]
    args.out.mkdir(parents=True, exist_ok=True)
    rows, stage_rows = [], []
    for L in levels:
        try:
            uni = engine.run(base.replace(L=L, solver="uniform"))
            stage_rows.append(_stage_row("", L, "uniform", uni))
        except (MemoryError, FloatingPointError, ValueError) as exc:
            log.error("uniform run at L=%d failed: %s", L, exc)
            rows.extend([e, L, "", "", "", "", "", f"uniform failed: {exc}"] for e in eps_list)
            continue
        for eps in eps_list:
            try:
                ada = engine.run(base.replace(L=L, epsilon=eps, solver="adaptive"))
            except (MemoryError, FloatingPointError, ValueError) as exc:
                log.error("adaptive run eps=%g L=%d failed: %s", eps, L, exc)
                rows.append([eps, L, "", "", "", "", "", f"failed: {exc}"])
                continue
            stage_rows.append(_stage_row(eps, L, "adaptive", ada))
            series = []
            for t in sorted(ada.wall_times):
                wa, wu = ada.wall_times[t], uni.wall_times.get(t, math.nan)
                ratio = wu / wa if wa > 0 else math.nan
                rows.append([eps, L, t, wa, wu, ratio, ada.leaf_counts[t], "ok"])
                series.append([t, wa, wu, ratio, ada.leaf_counts[t]])
            io.write_table(args.out / f"ratio_eps{eps:g}_L{L}.csv",
                           ("t", "adaptive_wall_s", "uniform_wall_s", "speedup", "leaves"), series)
            log.info("eps=%g L=%d: speed-up %.2f at t=%g", eps, L, series[-1][3], series[-1][0])
    io.write_table(args.out / "bench.csv", BENCH_COLUMNS, rows)
    io.write_table(args.out / "stages.csv", STAGE_COLUMNS, stage_rows)
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        idx_a = io.read_run_index(args.run_a)
        idx_b = io.read_run_index(args.run_b)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    times_a = sorted(t for t, f in idx_a if f == args.field)
    times_b = {t for t, f in idx_b if f == args.field}
    rows = []
    for t in times_a:
        if t not in times_b:
            log.warning("t=%g has no %s snapshot in %s; row skipped", t, args.field, args.run_b)
            continue
        ra, rb = idx_a[(t, args.field)], idx_b[(t, args.field)]
        fa, act_a, dxa = io.read_snapshot(args.run_a / ra["file"])
        fb, act_b, dxb = io.read_snapshot(args.run_b / rb["file"])
        if fa.shape != fb.shape or not math.isclose(dxa, dxb) or not np.array_equal(act_a, act_b):
            log.error("grid mismatch at t=%g: %s cells of %g vs %s cells of %g", t, fa.shape, dxa, fb.shape, dxb)
            return EXIT_FAIL
        l1, linf = engine.compare_fields(fa, fb, act_a, dxa)
        wa, wb = float(ra["wall_s"]), float(rb["wall_s"])
        rows.append((t, l1, linf, wa / wb if wb > 0 else math.nan))
    for t in sorted(times_b - set(times_a)):
        log.warning("t=%g has no %s snapshot in %s; row skipped", t, args.field, args.run_a)
    print("t,L1,Linf,runtime_ratio")
    for row in rows:
        print(",".join(io._fmt(v) for v in row))
    if args.out is not None:
        io.write_table(args.out, ("t", "L1", "Linf", "runtime_ratio"), rows)
    if args.tolerance is not None and any(r[1] > args.tolerance for r in rows):
        return EXIT_FAIL
    return EXIT_OK


COMMANDS = {"run": cmd_run, "validate": cmd_validate, "bench": cmd_bench, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, cfgmod.ConfigError, io.RasterError) as exc:
        parser.print_usage(sys.stderr)
        print(f"mrswe {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FloatingPointError, RuntimeError, OSError) as exc:
        print(f"mrswe {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
