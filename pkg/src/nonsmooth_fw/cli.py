"""Data loading, synthetic generators, experiment orchestration and trace output.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ProblemInstance
from .lp import LpError
from .problems import (
    build_balanced_dev,
    build_graph_cut,
    build_l1svm,
    build_one_median,
    build_piecewise_linear,
)
from .solver import (
    TRACE_FIELDS,
    IterationRecord,
    SolverConfig,
    SolverError,
    estimate_curvature,
    make_rng,
    run,
    smoothed_fw_baseline,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3
PROBLEMS = ("svm", "median", "graphcut", "balanced", "pwl")
SUMMARY_FIELDS = ("n", "coreset_size", "iterations", "total_ms", "ms_per_iter")


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class UsageError(ValueError):
    """Invalid combination of options."""


# ---------------------------------------------------------------------------
# readers and writers


def _data_lines(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def load_libsvm(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``label idx:val ...`` lines into ``(A_pos, A_neg)``, one example per column.

    Indices are 1-based; the feature dimension is the largest index seen.
    """
    labels, rows = [], []
    dim = 0
    for lineno, line in _data_lines(path):
        tok = line.split()
        try:
            lab = float(tok[0])
        except ValueError:
            raise DataError(f"{path}:{lineno}: bad label {tok[0]!r}") from None
        if lab not in (1.0, -1.0):
            raise DataError(f"{path}:{lineno}: label must be +1 or -1, got {tok[0]!r}")
        feats = {}
        for item in tok[1:]:
            idx_s, sep, val_s = item.partition(":")
            try:
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                idx = val = None
            if not sep or idx is None or idx < 1 or not math.isfinite(val):
                raise DataError(f"{path}:{lineno}: malformed feature {item!r}")
            if idx in feats:
                raise DataError(f"{path}:{lineno}: duplicate index {idx}")
            feats[idx] = val
            dim = max(dim, idx)
        labels.append(lab)
        rows.append(feats)
    if not rows:
        raise DataError(f"{path}: no examples")
    X = np.zeros((dim, len(rows)))
    for j, feats in enumerate(rows):
        for idx, val in feats.items():
            X[idx - 1, j] = val
    lab = np.array(labels)
    return X[:, lab > 0], X[:, lab < 0]


def write_libsvm(path, A_pos, A_neg) -> None:
    """Write the columns of both classes; zeros are omitted, values at full precision."""
    with open(path, "w") as fh:
        for label, M in (("+1", np.asarray(A_pos)), ("-1", np.asarray(A_neg))):
            for col in M.T:
                nz = np.flatnonzero(col)
                feats = " ".join(f"{i + 1}:{float(col[i])!r}" for i in nz)
                fh.write(f"{label} {feats}".rstrip() + "\n")


def load_points_csv(path) -> np.ndarray:
    """Points ``x1,...,xd`` per line; returns a ``d x n`` matrix."""
    pts = []
    for lineno, line in _data_lines(path):
        try:
            row = [float(v) for v in line.split(",")]
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric entry") from None
        if pts and len(row) != len(pts[0]):
            raise DataError(f"{path}:{lineno}: expected {len(pts[0])} coordinates, got {len(row)}")
        if not all(math.isfinite(v) for v in row):
            raise DataError(f"{path}:{lineno}: non-finite coordinate")
        pts.append(row)
    if not pts:
        raise DataError(f"{path}: no points")
    return np.array(pts).T


def write_points_csv(path, P) -> None:
    with open(path, "w") as fh:
        for col in np.asarray(P).T:
            fh.write(",".join(repr(float(v)) for v in col) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    rows = []
    for lineno, line in _data_lines(path):
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric entry") from None
        if len(rows[-1]) != len(rows[0]):
            raise DataError(f"{path}:{lineno}: ragged row")
    if not rows:
        raise DataError(f"{path}: empty matrix")
    return np.array(rows)


def load_graph(path, seeds_path, num_labels: int | None = None) -> ProblemInstance:
    """Edge list ``u v w`` (0-based) and seed lines ``node label``.

    Node count is one more than the largest id in the edge list; the label
    count defaults to one more than the largest seed label.  Duplicate
    edges (in either orientation) have their weights summed.
    """
    edges: dict[tuple[int, int], float] = {}
    max_node = -1
    for lineno, line in _data_lines(path):
        tok = line.split()
        if len(tok) != 3:
            raise DataError(f"{path}:{lineno}: expected 'u v w'")
        try:
            u, v, w = int(tok[0]), int(tok[1]), float(tok[2])
        except ValueError:
            raise DataError(f"{path}:{lineno}: malformed edge") from None
        if u < 0 or v < 0:
            raise DataError(f"{path}:{lineno}: unknown node (negative id)")
        if u == v:
            raise DataError(f"{path}:{lineno}: self-loop at node {u}")
        if not (w >= 0 and math.isfinite(w)):
            raise DataError(f"{path}:{lineno}: negative or non-finite weight {tok[2]}")
        key = (min(u, v), max(u, v))
        if key in edges:
            warnings.warn(f"{path}:{lineno}: duplicate edge {key}, weights summed", stacklevel=2)
        edges[key] = edges.get(key, 0.0) + w
        max_node = max(max_node, u, v)
    seeds: dict[int, int] = {}
    seed_lines = {}
    for lineno, line in _data_lines(seeds_path):
        tok = line.split()
        try:
            node, lab = int(tok[0]), int(tok[1])
        except (ValueError, IndexError):
            raise DataError(f"{seeds_path}:{lineno}: expected 'node label'") from None
        if len(tok) != 2 or node < 0:
            raise DataError(f"{seeds_path}:{lineno}: expected 'node label'")
        if lab < 0:
            raise DataError(f"{seeds_path}:{lineno}: label out of range")
        if node in seeds and seeds[node] != lab:
            raise DataError(f"{seeds_path}:{lineno}: node {node} seeded twice with different labels")
        seeds[node] = lab
        seed_lines[node] = lineno
    if not seeds:
        raise DataError(f"{seeds_path}: no seeds")
    num_nodes = max_node + 1
    for node, lineno in seed_lines.items():
        if node >= num_nodes:
            raise DataError(f"{seeds_path}:{lineno}: unknown node {node}")
    d = num_labels if num_labels is not None else max(seeds.values()) + 1
    for node, lab in seeds.items():
        if lab >= d:
            raise DataError(f"{seeds_path}:{seed_lines[node]}: label {lab} out of range (d = {d})")
    return build_graph_cut(num_nodes, d, [(u, v, w) for (u, v), w in edges.items()], seeds)


# ---------------------------------------------------------------------------
# generators


def generate_gaussian_points(n: int, d: int, seed: int = 0) -> ProblemInstance:
    """1-median instance on ``n`` standard normal points in ``R^d``."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    return build_one_median(gaussian_points(n, d, seed))


def gaussian_points(n: int, d: int, seed: int = 0) -> np.ndarray:
    return make_rng(seed).standard_normal((d, n))


def two_gaussians(m: int, n: int, d: int, shift: float, sigma: float, seed: int = 0):
    """Positive class ``N(0, sigma I)``, negative class ``N(shift e_1, sigma I)``; columns are examples."""
    if min(m, n, d) < 1:
        raise ValueError("m, n and d must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    rng = make_rng(seed)
    A_pos = sigma * rng.standard_normal((d, m))
    A_neg = sigma * rng.standard_normal((d, n))
    A_neg[0] += shift
    return A_pos, A_neg


def generate_two_gaussians(m: int, n: int, d: int, shift: float = 6.0, sigma: float = 1.0, seed: int = 0, R: float = 1.0) -> ProblemInstance:
    return build_l1svm(*two_gaussians(m, n, d, shift, sigma, seed), R)


# ---------------------------------------------------------------------------
# traces


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_trace(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for rec in trace:
            w.writerow([_fmt(getattr(rec, f)) for f in TRACE_FIELDS])


_INT_FIELDS = {"k", "num_vertices", "step_support", "coreset_size"}


def read_trace(path) -> list[IterationRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_FIELDS:
            raise DataError(f"{path}: unexpected trace header {header}")
        out = []
        for row in reader:
            if len(row) != len(TRACE_FIELDS):
                raise DataError(f"{path}:{reader.line_num}: expected {len(TRACE_FIELDS)} fields")
            vals = {f: (int(v) if f in _INT_FIELDS else float(v)) for f, v in zip(TRACE_FIELDS, row)}
            out.append(IterationRecord(**vals))
    return out


def summarize_trace(n: int, trace) -> dict:
    """One sweep-summary row; depends on the trace only."""
    last = trace[-1]
    iters = last.k
    return {
        "n": n,
        "coreset_size": last.coreset_size,
        "iterations": iters,
        "total_ms": last.elapsed_ms,
        "ms_per_iter": last.elapsed_ms / max(iters, 1),
    }


def write_summary(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for r in rows:
            w.writerow([_fmt(r[f]) for f in SUMMARY_FIELDS])


# ---------------------------------------------------------------------------
# SVG charts


def svg_line_chart(series: dict, title: str = "", xlabel: str = "", ylabel: str = "", log_y: bool = False, width: int = 640, height: int = 400) -> str:
    """Plain SVG polyline chart.  ``series`` maps a name to ``(xs, ys)``.

    Non-finite points (and nonpositive ones on a log axis) are skipped.
    """
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    clean = {}
    for name, (xs, ys) in series.items():
        xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
        ok = np.isfinite(xs) & np.isfinite(ys)
        if log_y:
            ok &= ys > 0
        if ok.any():
            clean[name] = (xs[ok], np.log10(ys[ok]) if log_y else ys[ok])
    ml, mr, mt, mb = 70, 20, 30, 50
    pw, ph = width - ml - mr, height - mt - mb
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{_esc(title)}</text>',
    ]
    if clean:
        allx = np.concatenate([v[0] for v in clean.values()])
        ally = np.concatenate([v[1] for v in clean.values()])
        x0, x1 = float(allx.min()), float(allx.max())
        y0, y1 = float(ally.min()), float(ally.max())
        x1 = x1 if x1 > x0 else x0 + 1.0
        y1 = y1 if y1 > y0 else y0 + 1.0

        def px(v):
            return ml + (v - x0) / (x1 - x0) * pw

        def py(v):
            return mt + ph - (v - y0) / (y1 - y0) * ph

        parts.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
        for t in np.linspace(0, 1, 5):
            xv, yv = x0 + t * (x1 - x0), y0 + t * (y1 - y0)
            ylab = f"1e{yv:.1f}" if log_y else f"{yv:.3g}"
            parts.append(f'<text x="{px(xv):.1f}" y="{mt + ph + 15}" text-anchor="middle">{xv:.3g}</text>')
            parts.append(f'<text x="{ml - 5}" y="{py(yv) + 4:.1f}" text-anchor="end">{ylab}</text>')
        for i, (name, (xs, ys)) in enumerate(clean.items()):
            col = colors[i % len(colors)]
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys))
            parts.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{pts}"/>')
            parts.append(f'<text x="{ml + pw - 5}" y="{mt + 14 + 14 * i}" text-anchor="end" fill="{col}">{_esc(name)}</text>')
    parts.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{_esc(xlabel)}</text>')
    parts.append(
        f'<text x="15" y="{mt + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 15 {mt + ph / 2:.1f})">'
        f"{_esc(ylabel + (' (log10)' if log_y else ''))}</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def trace_chart(traces: dict, title: str) -> str:
    series = {}
    for name, tr in traces.items():
        ks = [r.k for r in tr]
        series[f"{name} objective"] = (ks, [r.objective for r in tr])
        series[f"{name} certified"] = (ks, [r.certified_bound for r in tr])
        series[f"{name} gap"] = (ks, [r.gap_surrogate for r in tr])
    return svg_line_chart(series, title, "iteration k", "value", log_y=True)


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run or sweep.

    Exactly one of ``data`` (a file path) and ``generator`` (keyword
    arguments for the synthetic generator of ``problem``) must be given.
    """

    problem: str
    data: str | None = None
    generator: dict | None = None
    seeds: str | None = None
    num_labels: int | None = None
    R: float = 1.0
    max_iters: int = 1000
    tol: float = 0.0
    step_policy: str = "schedule"
    eps_coeff: float = 1.0
    refresh_period: int = 100
    rng_seed: int = 0
    record_time: bool = True
    baseline: bool = False
    out: str = "out"
    sweep_n: list = field(default_factory=list)
    jobs: int = 1
    plot: bool = True

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise UsageError(f"unknown problem {self.problem!r}; choose from {', '.join(PROBLEMS)}")
        if (self.data is None) == (self.generator is None):
            raise UsageError("give exactly one of a data path and a generator spec")
        if self.problem == "graphcut" and self.data is not None and self.seeds is None:
            raise UsageError("graph cuts need a seeds file")
        if self.sweep_n and self.generator is None:
            raise UsageError("a sweep needs a generator spec")
        if self.max_iters < 1:
            raise UsageError("max_iters must be >= 1")
        if self.jobs < 1:
            raise UsageError("jobs must be >= 1")

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            max_iters=self.max_iters,
            tol=self.tol,
            step_policy=self.step_policy,
            eps_coeff=self.eps_coeff,
            refresh_period=self.refresh_period,
            rng_seed=self.rng_seed,
            record_time=self.record_time,
        )

    @classmethod
    def from_json(cls, path, **overrides) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise DataError(f"{path}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from exc
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**raw)


def load_instance(cfg: ExperimentConfig, n: int | None = None) -> ProblemInstance:
    """Build the instance named by ``cfg``; ``n`` overrides the generator size in sweeps."""
    if cfg.data is not None:
        return _load_data(cfg)
    gen = dict(cfg.generator)
    seed = int(gen.pop("seed", cfg.rng_seed))
    try:
        if cfg.problem == "median":
            if n is not None:
                gen["n"] = n
            return generate_gaussian_points(int(gen["n"]), int(gen.get("d", 2)), seed)
        if cfg.problem == "svm":
            m = n if n is not None else int(gen.get("m", 100))
            nn = n if n is not None else int(gen.get("n", m))
            return generate_two_gaussians(
                m, nn, int(gen.get("d", 20)), float(gen.get("shift", 6.0)), float(gen.get("sigma", 1.0)), seed, cfg.R
            )
    except KeyError as exc:
        raise UsageError(f"generator spec is missing {exc.args[0]!r}") from None
    raise UsageError(f"no synthetic generator for problem {cfg.problem!r}")


def _load_data(cfg):
    p = cfg.problem
    if p == "svm":
        A_pos, A_neg = load_libsvm(cfg.data)
        if A_pos.shape[1] == 0 or A_neg.shape[1] == 0:
            raise DataError(f"{cfg.data}: both classes need at least one example")
        return build_l1svm(A_pos, A_neg, cfg.R)
    if p == "median":
        return build_one_median(load_points_csv(cfg.data))
    if p == "graphcut":
        return load_graph(cfg.data, cfg.seeds, cfg.num_labels)
    if p == "pwl":
        M = load_matrix_csv(cfg.data)
        if M.shape[1] < 2:
            raise DataError(f"{cfg.data}: need at least one coefficient column and the offset column")
        return build_piecewise_linear(M[:, :-1], M[:, -1])
    try:
        raw = json.loads(Path(cfg.data).read_text())
        return build_balanced_dev(raw["A"], raw["b"], raw["p"])
    except OSError as exc:
        raise DataError(f"{cfg.data}: {exc.strerror or exc}") from exc
    except (json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"{cfg.data}: expected JSON with keys A, b, p") from exc


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run one instance (or a sweep) and write traces, summary and charts under ``cfg.out``.

    Returns a dict of the written paths and, for sweeps, the summary rows.
    """
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"{out}: cannot create output directory ({exc.strerror or exc})") from exc
    if cfg.sweep_n:
        return _run_sweep(cfg, out)
    inst = load_instance(cfg)
    written = _run_one(cfg, inst, out / cfg.problem)
    return {"paths": written}


def _run_one(cfg, inst, stem: Path) -> list[Path]:
    scfg = cfg.solver_config()
    _, trace, _ = run(inst, scfg)
    paths = []
    traces = {"main": trace}
    main_path = stem.with_name(stem.name + (".main.csv" if cfg.baseline else ".csv"))
    write_trace(main_path, trace)
    paths.append(main_path)
    if cfg.baseline:
        btrace = smoothed_fw_baseline(inst, scfg)
        bpath = stem.with_name(stem.name + ".baseline.csv")
        write_trace(bpath, btrace)
        paths.append(bpath)
        traces["baseline"] = btrace
    if cfg.plot:
        svg = stem.with_name(stem.name + ".svg")
        svg.write_text(trace_chart(traces, f"{inst.name}: convergence"))
        paths.append(svg)
    return paths


def _run_sweep(cfg, out: Path) -> dict:
    ns = [int(n) for n in cfg.sweep_n]

    def one(n):
        inst = load_instance(cfg, n)
        paths = _run_one(cfg, inst, out / f"{cfg.problem}_n{n}")
        return n, paths

    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            results = list(pool.map(one, ns))
    else:
        results = [one(n) for n in ns]
    rows, paths = [], []
    for n, ps in results:
        main = next(p for p in ps if p.suffix == ".csv" and not p.name.endswith(".baseline.csv"))
        rows.append(summarize_trace(n, read_trace(main)))
        paths.extend(ps)
    summary = out / "summary.csv"
    write_summary(summary, rows)
    paths.append(summary)
    if cfg.plot:
        svg = out / "coreset_vs_n.svg"
        svg.write_text(
            svg_line_chart(
                {"coreset size": (ns, [r["coreset_size"] for r in rows]), "iterations": (ns, [r["iterations"] for r in rows])},
                "coreset size and iterations vs n",
                "n",
                "count",
            )
        )
        paths.append(svg)
    return {"paths": paths, "summary": rows}


# ---------------------------------------------------------------------------
# command line


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p, sweep=False):
    p.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--data", help="input file (libsvm, points CSV, edge list, matrix CSV or JSON)")
    p.add_argument("--seeds", help="seed file for graph cuts ('node label' per line)")
    p.add_argument("--labels", type=int, help="number of labels for graph cuts")
    p.add_argument("--gen", metavar="K=V", nargs="+", help="generator spec, e.g. n=1000 d=2")
    p.add_argument("--R", type=float, help="SVM weight cap is 1/R")
    p.add_argument("--iters", type=int, help="maximum number of iterations")
    p.add_argument("--tol", type=float, help="stop once the certified bound is at most this")
    p.add_argument("--step", choices=("schedule", "bisection"))
    p.add_argument("--eps-coeff", type=float, help="c in eps_k = c * sqrt(alpha_k)")
    p.add_argument("--seed", type=int, help="seed for generators and the baseline")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, help="concurrent runs")
    p.add_argument("--no-timing", action="store_true", help="write 0 for elapsed_ms (byte-stable traces)")
    p.add_argument("--no-plot", action="store_true")
    if sweep:
        p.add_argument("--ns", type=int, nargs="+", help="sizes to sweep")
    else:
        p.add_argument("--baseline", action="store_true", help="also run the smoothing baseline")


def _parse_gen(items):
    if not items:
        return None
    spec = {}
    for it in items:
        k, sep, v = it.partition("=")
        if not sep:
            raise UsageError(f"generator item {it!r} is not K=V")
        try:
            spec[k] = float(v) if any(ch in v for ch in ".eE") else int(v)
        except ValueError:
            raise UsageError(f"generator value {v!r} is not a number") from None
    return spec


def _config_from_args(args) -> ExperimentConfig:
    over = {
        "problem": args.problem,
        "data": args.data,
        "seeds": args.seeds,
        "num_labels": args.labels,
        "generator": _parse_gen(args.gen),
        "R": args.R,
        "max_iters": args.iters,
        "tol": args.tol,
        "step_policy": args.step,
        "eps_coeff": args.eps_coeff,
        "rng_seed": args.seed,
        "out": args.out,
        "jobs": args.jobs,
        "baseline": True if getattr(args, "baseline", False) else None,
        "sweep_n": getattr(args, "ns", None),
        "record_time": False if args.no_timing else None,
        "plot": False if args.no_plot else None,
    }
    if args.config:
        return ExperimentConfig.from_json(args.config, **over)
    if args.problem is None:
        raise UsageError("--problem is required without --config")
    return ExperimentConfig(**{k: v for k, v in over.items() if v is not None})


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nsfw", description="Nonsmooth Frank-Wolfe with certified gaps and coresets.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="run the solver and write a trace")
    _add_common(p)

    p = sub.add_parser("compare", help="solver and smoothing baseline side by side")
    _add_common(p)

    p = sub.add_parser("sweep", help="run over several instance sizes and summarize")
    _add_common(p, sweep=True)

    p = sub.add_parser("curvature", help="empirical lower bound on the curvature constant")
    _add_common(p)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--samples", type=int, default=1000)

    p = sub.add_parser("gen", help="write a synthetic data file")
    p.add_argument("--problem", choices=("svm", "median"), required=True)
    p.add_argument("--n", type=int, default=100, help="points (median) or negatives (svm)")
    p.add_argument("--m", type=int, default=100, help="positives (svm)")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--shift", type=float, default=6.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output file")
    return parser


def _cmd_gen(args):
    try:
        if args.problem == "median":
            write_points_csv(args.out, gaussian_points(args.n, args.d, args.seed))
        else:
            write_libsvm(args.out, *two_gaussians(args.m, args.n, args.d, args.shift, args.sigma, args.seed))
    except OSError as exc:
        raise DataError(f"{args.out}: {exc.strerror or exc}") from exc
    print(args.out)


def _cmd_curvature(args, cfg):
    inst = load_instance(cfg)
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    est = estimate_curvature(inst, args.eps, args.samples, cfg.rng_seed, jobs=cfg.jobs)
    bound = inst.curvature_coeff / args.eps if args.eps > 0 else math.inf
    print(f"estimate {est!r}")
    print(f"upper bound D_f/eps {bound!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            _cmd_gen(args)
            return EXIT_OK
        cfg = _config_from_args(args)
        if args.command == "compare":
            cfg.baseline = True
        if args.command == "curvature":
            _cmd_curvature(args, cfg)
            return EXIT_OK
        result = run_experiment(cfg)
        for p in result["paths"]:
            print(p)
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, LpError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DataError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
