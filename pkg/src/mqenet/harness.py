"""Ensemble sweeps over (alpha, N, L/lambda0, p) grids with CSV persistence.

All randomness derives from per-realization seeds fixed before anything
executes, so results are independent of worker count and schedule, and a
rerun of the same configuration reproduces byte-identical output.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import theory
from .geometry import sample_users
from .metrics import betweenness_histogram, fc_capacitance_stats, modified_betweenness, observables
from .optimizer import build_mqe
from .qchannel import capacitance_matrix

RAW_COLUMNS = (
    "alpha", "n", "l_over_lambda", "p", "seed", "realization", "status",
    "q_star", "l_star", "q_min", "rho", "efficiency", "fc_q_mean", "fc_q_min",
)

AGG_OBSERVABLES = ("q_star", "l_star", "q_min", "rho", "efficiency", "fc_q_mean", "fc_q_min")


def derive_seed(base_seed: int, cell_index: int, realization: int) -> int:
    """Per-realization seed from (base seed, cell, realization).

    Spawned through numpy's SeedSequence so distinct coordinates give
    independent, platform-stable streams.
    """
    ss = np.random.SeedSequence([int(base_seed), int(cell_index), int(realization)])
    return int(ss.generate_state(1, np.uint64)[0])


def default_alpha_grid() -> list[float]:
    """60-point alpha grid, denser across the step region 0.25-0.55."""
    coarse_lo = np.linspace(0.0, 0.25, 12, endpoint=False)
    dense = np.linspace(0.25, 0.55, 37, endpoint=False)
    coarse_hi = np.linspace(0.55, 1.0, 11)
    return [float(a) for a in np.concatenate([coarse_lo, dense, coarse_hi])]


@dataclass(frozen=True)
class SweepCell:
    index: int
    alpha: float
    n: int
    l_over_lambda: float
    p: float
    realizations: int
    base_seed: int

    def seed_for(self, realization: int) -> int:
        return derive_seed(self.base_seed, self.index, realization)

    def tag(self) -> str:
        return (
            f"cell{self.index:04d}_a{self.alpha:g}_n{self.n}"
            f"_l{self.l_over_lambda:g}_p{self.p:g}"
        )


@dataclass
class SweepConfig:
    """Grid specification for one sweep.

    ``realizations=None`` applies the size-dependent default: 100 per cell
    up to n = 512 and 10 beyond.
    """

    alphas: list[float]
    ns: list[int]
    l_over_lambdas: list[float]
    ps: list[float]
    realizations: int | None = None
    base_seed: int = 0
    outdir: str = "sweep_out"
    emit_betweenness: bool = False
    emit_theory: bool = False
    workers: int = 1

    def validate(self) -> None:
        if not (self.alphas and self.ns and self.l_over_lambdas and self.ps):
            raise ValueError("every grid axis needs at least one value")
        if any(not 0.0 <= a <= 1.0 for a in self.alphas):
            raise ValueError("alpha values must be in [0, 1]")
        if any(n < 2 for n in self.ns):
            raise ValueError("n values must be >= 2")
        if any(l <= 0 for l in self.l_over_lambdas):
            raise ValueError("l_over_lambda values must be positive")
        if any(not 0.0 <= p <= 1.0 for p in self.ps):
            raise ValueError("p values must be in [0, 1]")
        if self.realizations is not None and self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def realizations_for(self, n: int) -> int:
        if self.realizations is not None:
            return self.realizations
        return 100 if n <= 512 else 10

    def cells(self) -> list[SweepCell]:
        """Grid cells in the fixed (n, l, p, alpha) nesting order."""
        self.validate()
        out = []
        index = 0
        for n, l, p, alpha in itertools.product(self.ns, self.l_over_lambdas, self.ps, self.alphas):
            out.append(SweepCell(
                index=index, alpha=float(alpha), n=int(n), l_over_lambda=float(l),
                p=float(p), realizations=self.realizations_for(int(n)),
                base_seed=self.base_seed,
            ))
            index += 1
        return out

    def semantic_dict(self) -> dict:
        """Fields that affect the numbers (outdir and workers do not)."""
        return {
            "alphas": [float(a) for a in self.alphas],
            "ns": [int(n) for n in self.ns],
            "l_over_lambdas": [float(l) for l in self.l_over_lambdas],
            "ps": [float(p) for p in self.ps],
            "realizations": self.realizations,
            "base_seed": self.base_seed,
            "emit_betweenness": self.emit_betweenness,
            "emit_theory": self.emit_theory,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n")

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        data = json.loads(Path(path).read_text())
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown sweep config fields: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _run_realization(args):
    alpha, n, l_over_lambda, p, seed, realization, want_betweenness = args
    base = {
        "alpha": alpha, "n": n, "l_over_lambda": l_over_lambda, "p": p,
        "seed": seed, "realization": realization,
    }
    try:
        u = sample_users(n, l_over_lambda, seed)
        q0 = capacitance_matrix(u)
        net = build_mqe(u, alpha, p, q0=q0)
        obs = observables(net)
        fc_mean, fc_min = fc_capacitance_stats(q0)
        row = dict(
            base, status="ok",
            q_star=obs.q_star, l_star=obs.l_star, q_min=obs.q_min,
            rho=obs.rho, efficiency=obs.efficiency,
            fc_q_mean=fc_mean, fc_q_min=fc_min,
        )
        bet = modified_betweenness(net) if want_betweenness else None
    except Exception as exc:  # recorded per realization; the cell continues
        row = dict(
            base, status=f"error: {exc}",
            q_star=math.nan, l_star=math.nan, q_min=math.nan,
            rho=math.nan, efficiency=math.nan, fc_q_mean=math.nan, fc_q_min=math.nan,
        )
        bet = None
    return row, bet


def run_cell(cell: SweepCell, workers: int = 1, want_betweenness: bool = False):
    """All realizations of one grid cell, ordered by realization index.

    Rows are bitwise independent of the worker count because every seed is
    fixed up front and workers never share state.
    """
    args = [
        (cell.alpha, cell.n, cell.l_over_lambda, cell.p, cell.seed_for(r), r, want_betweenness)
        for r in range(cell.realizations)
    ]
    if workers > 1 and len(args) > 1:
        # spawn, not fork: the jit kernels hold OpenMP state that does not
        # survive forking
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            results = list(pool.map(_run_realization, args))
    else:
        results = [_run_realization(a) for a in args]
    rows = [row for row, _ in results]
    bets = [b for _, b in results if b is not None]
    return rows, bets


def _write_rows(path: Path, rows) -> None:
    tmp = path.with_suffix(".tmp")
    with tmp.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RAW_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in RAW_COLUMNS])
    tmp.replace(path)


def _read_rows(path: Path):
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for rec in reader:
            row = dict(rec)
            for c in RAW_COLUMNS:
                if c in ("n", "realization"):
                    row[c] = int(rec[c])
                elif c not in ("status", "seed"):
                    row[c] = float(rec[c])
            row["seed"] = int(rec["seed"])
            rows.append(row)
    return rows


def _aggregate(cell: SweepCell, rows) -> dict:
    ok = [r for r in rows if r["status"] == "ok"]
    agg = {
        "index": cell.index, "alpha": cell.alpha, "n": cell.n,
        "l_over_lambda": cell.l_over_lambda, "p": cell.p,
        "realizations": cell.realizations, "n_ok": len(ok), "n_error": len(rows) - len(ok),
    }
    for name in AGG_OBSERVABLES:
        vals = np.array([r[name] for r in ok], dtype=float)
        if vals.size == 0:
            mean = sem = math.nan
        else:
            mean = float(vals.mean())
            sem = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.nan
        agg[f"{name}_mean"] = mean
        agg[f"{name}_sem"] = sem
    return agg


@dataclass
class SweepResult:
    config_hash: str
    outdir: Path
    cells: list[dict] = field(default_factory=list)


def _write_theory_overlay(config: SweepConfig, path: Path) -> None:
    rows = [("kind", "m", "p", "l_over_lambda", "n", "value")]
    for p in config.ps:
        for m in (1, 2, 3):
            rows.append(("alpha_c_step", m, p, "", "", theory.alpha_c_step(m, p)))
    for l in config.l_over_lambdas:
        rows.append(("q_fc", "", "", l, "", theory.q_fc(l)))
        for p in config.ps:
            rows.append(("alpha_bar", "", p, l, "", theory.alpha_bar(l, p)))
        for n in config.ns:
            rows.append(("q_mst", "", "", l, n, theory.q_mst(n, l)))
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])


def run_sweep(config: SweepConfig, workers: int | None = None) -> SweepResult:
    """Execute every cell, aggregate, and persist under the output directory.

    Layout: config.json (verbatim input), manifest.json (hashes), raw/<cell>.csv
    per-realization rows, cells.csv aggregates, optional theory.csv overlays
    and betweenness/<cell>.csv histograms. Finished cells found on disk are
    reused, so an interrupted sweep resumes where it stopped.
    """
    config.validate()
    if workers is None:
        workers = config.workers
    cells = config.cells()
    outdir = Path(config.outdir)
    rawdir = outdir / "raw"
    rawdir.mkdir(parents=True, exist_ok=True)
    chash = config.config_hash()

    manifest_path = outdir / "manifest.json"
    if manifest_path.exists():
        old = json.loads(manifest_path.read_text())
        if old.get("config_hash") != chash:
            raise ValueError(
                f"output directory {outdir} holds a sweep with a different "
                f"configuration (hash {old.get('config_hash')}, expected {chash})"
            )
    else:
        from . import __version__

        manifest_path.write_text(json.dumps(
            {"config_hash": chash, "code_version": __version__, "n_cells": len(cells)},
            indent=2,
        ) + "\n")
    config.to_json(outdir / "config.json")

    if config.emit_betweenness:
        (outdir / "betweenness").mkdir(exist_ok=True)

    aggregates = []
    for cell in cells:
        raw_path = rawdir / f"{cell.tag()}.csv"
        rows = None
        if raw_path.exists():
            cached = _read_rows(raw_path)
            if len(cached) == cell.realizations:
                rows = cached
        if rows is None:
            rows, bets = run_cell(cell, workers=workers, want_betweenness=config.emit_betweenness)
            _write_rows(raw_path, rows)
            if config.emit_betweenness and bets:
                values, freq = betweenness_histogram(np.concatenate(bets))
                with (outdir / "betweenness" / f"{cell.tag()}.csv").open("w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(("value", "count"))
                    w.writerows(zip(values.tolist(), freq.tolist()))
        aggregates.append(_aggregate(cell, rows))

    agg_cols = list(aggregates[0])
    with (outdir / "cells.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(agg_cols)
        for agg in aggregates:
            w.writerow([_fmt(agg[c]) for c in agg_cols])

    if config.emit_theory:
        _write_theory_overlay(config, outdir / "theory.csv")

    return SweepResult(config_hash=chash, outdir=outdir, cells=aggregates)
