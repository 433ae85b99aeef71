"""Acceptance criteria A1 to A9 as runnable checks.

Each check returns a :class:`Criterion` with the measured values and a
verdict. The same functions back ``mrswe validate`` and the acceptance test
module; the ``Scale`` argument only changes problem sizes, never
tolerances.
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cases, engine, mra, traversal, zorder
from .config import SimConfig, dumps
from .parallel import WORKERS_ENV


@dataclass
class Criterion:
    key: str
    name: str
    passed: bool
    summary: str
    runtime: float = 0.0
    budget: float = float("inf")
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{self.key:<3} {self.name:<14} {verdict}  {self.summary}  [{self.runtime:.1f}s / {self.budget:g}s]"


@dataclass(frozen=True)
class Scale:
    """Problem sizes; ``full()`` is the stated size of every criterion."""

    a3_level: int = 6
    a3_steps: int = 2000
    a4_level: int = 6
    a5_levels: tuple = (6, 7, 8)
    a6_level: int = 8
    a7_level: int = 10
    a7_workers: int = 4

    @classmethod
    def full(cls) -> "Scale":
        return cls()

    @classmethod
    def desk(cls) -> "Scale":
        return cls(a7_level=8)

    @classmethod
    def level(cls, L: int) -> "Scale":
        """Every grid-dependent criterion at level ``L`` (A5 uses ``L-2..L``)."""
        return cls(a3_level=L, a4_level=L, a5_levels=(L - 2, L - 1, L), a6_level=L, a7_level=L)

    @classmethod
    def parse(cls, text: str) -> "Scale":
        text = text.strip().lower()
        if text in ("full", "desk"):
            return getattr(cls, text)()
        if text.startswith("l="):
            L = int(text[2:])
            if not 3 <= L <= zorder.MAX_LEVEL:
                raise ValueError(f"scale level {L} outside [3, {zorder.MAX_LEVEL}]")
            return cls.level(L)
        raise ValueError(f"unknown scale {text!r}; use full, desk or L=<level>")


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def _config(case_name: str, L: int, eps: float, solver: str = "adaptive", **changes) -> SimConfig:
    case = cases.preset(case_name)
    if changes:
        case = case.replace(**changes)
    return SimConfig(case=case, L=L, epsilon=eps, solver=solver).validate()


# ---------------------------------------------------------------------------


def check_a1(samples: int = 10_000, seed: int = 1) -> Criterion:
    rng = np.random.default_rng(seed)
    scales = {"h": 1.0, "q": 10.0, "z": 100.0}

    def body():
        worst = {}
        for name, mag in scales.items():
            x = rng.uniform(-mag, mag, size=(samples, 4))
            err = 0.0
            for s0, s1, s2, s3 in x:
                back = mra.decode_children(*mra.encode_children(s0, s1, s2, s3))
                rel = max(abs(b - a) / max(1.0, abs(a)) for a, b in zip((s0, s1, s2, s3), back))
                err = max(err, rel)
            worst[name] = err
        return worst

    worst, rt = _timed(body)
    tol = 1e-12
    ok = all(v <= tol for v in worst.values()) and rt < 1.0
    summary = "max scaled error " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()) + f" (tol {tol:g})"
    return Criterion("A1", "reconstruction", ok, summary, rt, 1.0, worst)


def random_closed_tree(rng, L: int, density: float | None = None) -> np.ndarray:
    """Random ancestor-closed significance flags over levels ``0..L-1``."""
    density = rng.uniform(0.0, 0.6) if density is None else density
    sig = (rng.random(zorder.level_offset(L)) < density).astype(np.uint8)
    return mra.close_ancestors(sig, L)


def check_a2(trees: int = 500, L: int = 6, seed: int = 2) -> Criterion:
    rng = np.random.default_rng(seed)

    def body():
        mismatches = 0
        for _ in range(trees):
            sig = random_closed_tree(rng, L)
            rec = traversal.parallel_tree_traversal(sig, L)
            got = traversal.compact_leaves(rec).tolist()
            if got != traversal.depth_first_leaves(sig, L):
                mismatches += 1
        return mismatches

    bad, rt = _timed(body)
    ok = bad == 0 and rt < 30.0
    return Criterion("A2", "traversal", ok, f"{bad}/{trees} trees differ at L={L}", rt, 30.0, {"mismatches": bad})


def _discharge_history(variant: str, L: int, steps: int) -> np.ndarray:
    cfg = SimConfig(case=cases.case_quiescent(variant), L=L, epsilon=1e-3).validate()
    state = engine.initialise(cfg)
    out = np.empty(steps)
    for k in range(steps):
        r = engine.step_adaptive(state)
        out[k] = max(r.max_qx, r.max_qy)
    return out


def check_a3(L: int = 6, steps: int = 2000) -> Criterion:
    def body():
        return {v: _discharge_history(v, L, steps) for v in ("smooth", "steeper", "rectangular")}

    hist, rt = _timed(body)
    smooth = float(hist["smooth"].max())
    ok = smooth <= 1e-8
    parts = [f"smooth max|q|={smooth:.1e} (tol 1e-08)"]
    values = {"smooth_max": smooth}
    ref_step = min(100, steps) - 1
    for v in ("steeper", "rectangular"):
        h = hist[v]
        at100, final = float(h[ref_step]), float(h[-1])
        mid = steps // 2
        # no growth: the late half never exceeds ten times the early half
        early = float(h[ref_step:mid].max()) if mid > ref_step else at100
        late = float(h[mid:].max())
        bounded = final <= 10 * at100 and late <= 10 * early
        ok &= bounded
        values[v] = {"step100": at100, "final": final, "early_max": early, "late_max": late}
        parts.append(f"{v} step100={at100:.1e} final={final:.1e}")
    ok &= rt < 120.0
    return Criterion("A3", "wellbalanced", ok, "; ".join(parts), rt, 120.0, values)


def check_a4(L: int = 6) -> Criterion:
    times = tuple(np.round(np.arange(0.0, 3.5 + 1e-9, 0.5), 10))

    def body():
        a = engine.run(_config("circular", L, 0.0, output_times=times))
        u = engine.run(_config("circular", L, 0.0, "uniform", output_times=times))
        return max(float(np.abs(a.snapshot(t)["h"] - u.snapshot(t)["h"]).max()) for t in times)

    diff, rt = _timed(body)
    ok = diff <= 1e-8 and rt < 120.0
    return Criterion("A4", "equivalence", ok, f"max |h_a - h_u| = {diff:.1e} over {len(times)} outputs (tol 1e-08)",
                     rt, 120.0, {"max_diff": diff})


def stoker_l1(result: engine.RunResult, t: float, hl: float = 6.0, hr: float = 2.0, x0: float = 10.0) -> float:
    g = result.grid
    x = g.xmin + (np.arange(g.cells) + 0.5) * g.dx
    exact, _ = cases.oracle_stoker(hl, hr, x0, result.config.g, t, x)
    ref = np.broadcast_to(exact, (g.cells, g.cells))
    l1, _ = engine.compare_fields(result.snapshot(t)["h"], ref, g.active, g.dx)
    return l1


def check_a5(levels=(6, 7, 8)) -> Criterion:
    def body():
        uni, ada = {}, {}
        for L in levels:
            uni[L] = stoker_l1(engine.run(_config("pseudo2d", L, 1e-3, "uniform")), 2.5)
            ada[L] = stoker_l1(engine.run(_config("pseudo2d", L, 1e-3)), 2.5)
        return uni, ada

    (uni, ada), rt = _timed(body)
    errs = [uni[L] for L in levels]
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    close = all(abs(ada[L] - uni[L]) <= 0.25 * uni[L] for L in levels)
    ok = monotone and close and rt < 300.0
    summary = ", ".join(f"L{L}: uni={uni[L]:.2e} ada={ada[L]:.2e}" for L in levels)
    return Criterion("A5", "convergence", ok, summary, rt, 300.0, {"uniform": uni, "adaptive": ada})


def check_a6(L: int = 8) -> Criterion:
    def body():
        a = engine.run(_config("hump_dambreak", L, 1e-3))
        u = engine.run(_config("hump_dambreak", L, 1e-3, "uniform"))
        return {t: l1 for t, l1, _, _ in engine.compare(a, u)}

    l1, rt = _timed(body)
    ok = l1[6.0] <= 2e-3 and l1[12.0] <= 4e-3 and rt < 600.0
    summary = f"L1(6 s)={l1[6.0]:.2e} (tol 2e-03), L1(12 s)={l1[12.0]:.2e} (tol 4e-03)"
    return Criterion("A6", "hump_l1", ok, summary, rt, 600.0, {"l1": l1})


def _a7_runs(L: int, workers: int) -> dict:
    cfg = _config("pseudo2d_long", L, 1e-2).replace(workers=workers)
    a = engine.run(cfg)
    u = engine.run(cfg.replace(solver="uniform"))
    return {"leaves_2.5": a.leaf_counts[2.5], "leaves_40": a.leaf_counts[40.0],
            "wall_adaptive": a.wall_times[40.0], "wall_uniform": u.wall_times[40.0], "workers": workers}


def _a7_child(L: int, workers: int) -> None:
    print(json.dumps(_a7_runs(L, workers)))


def check_a7(L: int = 10, workers: int = 4) -> Criterion:
    """Leaf decay and adaptive-versus-uniform wall time on ``workers`` workers.

    When this process's pool is smaller than ``workers`` the runs move to a
    child process started with a large enough pool.
    """
    from . import parallel

    def body():
        if parallel.max_workers() >= workers:
            return _a7_runs(L, workers)
        env = dict(os.environ, NUMBA_NUM_THREADS=str(workers))
        env.pop(WORKERS_ENV, None)
        code = f"from mrswe.validation import _a7_child; _a7_child({L}, {workers})"
        proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            raise RuntimeError(f"adaptivity run failed:\n{proc.stderr}")
        return json.loads(proc.stdout.strip().splitlines()[-1])

    v, rt = _timed(body)
    n_end, n_early = v["leaves_40"], v["leaves_2.5"]
    wa, wu = v["wall_adaptive"], v["wall_uniform"]
    cond_a = n_end <= 0.1 * 4 ** L and n_end < n_early
    cond_b = wa < wu and v["workers"] >= 4
    ok = cond_a and cond_b and rt < 1200.0
    summary = (f"leaves {n_early} -> {n_end} of {4 ** L}; wall adaptive {wa:.1f}s vs uniform {wu:.1f}s "
               f"on {v['workers']} workers")
    return Criterion("A7", "adaptivity", ok, summary, rt, 1200.0, v)


def _cli_run(cfg: SimConfig, outdir: Path, workers: int, threads: int) -> None:
    cfgfile = outdir.with_suffix(".cfg")
    cfgfile.write_text(dumps(cfg))
    env = dict(os.environ, NUMBA_NUM_THREADS=str(threads))
    env.pop(WORKERS_ENV, None)
    cmd = [sys.executable, "-m", "mrswe.cli", "run", "--config", str(cfgfile), "--out", str(outdir),
           "--workers", str(workers), "--quiet"]
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"run with {workers} workers failed:\n{proc.stderr}")


def _snapshot_bytes(rundir: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted((rundir / "snapshots").iterdir())}


def check_a8(a4_level: int = 6, a6_level: int = 8, max_threads: int | None = None) -> Criterion:
    threads = max_threads or max(8, os.cpu_count() or 1)
    counts = sorted({1, 4, threads})
    configs = {
        "A4-adaptive": _config("circular", a4_level, 0.0),
        "A4-uniform": _config("circular", a4_level, 0.0, "uniform"),
        "A6-adaptive": _config("hump_dambreak", a6_level, 1e-3),
        "A6-uniform": _config("hump_dambreak", a6_level, 1e-3, "uniform"),
    }

    def body():
        differing = []
        with tempfile.TemporaryDirectory() as tmp:
            for label, cfg in configs.items():
                ref = None
                for w in counts:
                    out = Path(tmp) / f"{label}-w{w}"
                    _cli_run(cfg, out, w, threads)
                    snaps = _snapshot_bytes(out)
                    if ref is None:
                        ref = snaps
                    elif snaps != ref:
                        differing.append(f"{label}@{w}")
        return differing

    differing, rt = _timed(body)
    ok = not differing
    summary = f"worker counts {counts}: " + ("all snapshots bitwise identical" if ok else "differ: " + ", ".join(differing))
    return Criterion("A8", "determinism", ok, summary, rt, float("inf"), {"differing": differing, "counts": counts})


MORTON_4X4 = [[0, 1, 4, 5], [2, 3, 6, 7], [8, 9, 12, 13], [10, 11, 14, 15]]


def check_a9() -> Criterion:
    def body():
        return [[zorder.morton_encode(i, j, 2) for i in range(4)] for j in range(4)]

    table, rt = _timed(body)
    ok = table == MORTON_4X4 and rt < 1e-3
    return Criterion("A9", "morton", ok, f"rows {table}", rt, 1e-3, {"table": table})


CRITERIA = {
    "reconstruction": ("A1", lambda s: check_a1()),
    "traversal": ("A2", lambda s: check_a2()),
    "wellbalanced": ("A3", lambda s: check_a3(s.a3_level, s.a3_steps)),
    "equivalence": ("A4", lambda s: check_a4(s.a4_level)),
    "convergence": ("A5", lambda s: check_a5(s.a5_levels)),
    "hump_l1": ("A6", lambda s: check_a6(s.a6_level)),
    "adaptivity": ("A7", lambda s: check_a7(s.a7_level, s.a7_workers)),
    "determinism": ("A8", lambda s: check_a8(s.a4_level, s.a6_level)),
    "morton": ("A9", lambda s: check_a9()),
}
DEFAULT_SELECTION = ("reconstruction", "traversal", "wellbalanced", "equivalence", "convergence",
                     "hump_l1", "adaptivity")


def resolve(names) -> list[str]:
    """Accept criterion names or keys (``A3``); keep suite order."""
    keys = {v[0].lower(): k for k, v in CRITERIA.items()}
    chosen = set()
    for n in names:
        n = n.strip().lower()
        if n in CRITERIA:
            chosen.add(n)
        elif n in keys:
            chosen.add(keys[n])
        else:
            raise ValueError(f"unknown criterion {n!r}; choose from {', '.join(CRITERIA)}")
    return [k for k in CRITERIA if k in chosen]


def run_criteria(names, scale: Scale, report=print) -> list[Criterion]:
    results = []
    for name in names:
        crit = CRITERIA[name][1](scale)
        report(crit.line())
        results.append(crit)
    return results

