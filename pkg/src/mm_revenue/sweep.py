"""Parameter sweeps: solve, simulate, and compare the four policies.

A sweep varies one of mu, lambda, r_s over a grid, runs every requested
policy at each grid point, and writes a CSV plus an SVG revenue chart that
overlays the analytical optimum curve theta*(point).  Points fan out over a
process pool; per-run seeds are derived from (seed, point, policy), so the
output is byte-reproducible regardless of scheduling.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .ctmc import MachineParams
from .policies import POLICIES
from .sim import SimConfig, run
from .solver import SystemParams, solve_theta_star

__all__ = [
    "ExperimentSpec",
    "SweepError",
    "CSV_HEADER",
    "load_experiment_spec",
    "run_sweep",
    "worker_count",
]

SWEEP_VARIABLES = ("mu", "lambda", "r_s")
CSV_HEADER = (
    "sweep_var",
    "value",
    "policy",
    "revenue_per_job",
    "stderr",
    "theta_star",
    "S",
    "D",
    "N",
    "seed",
)


class SweepError(RuntimeError):
    """A sweep point failed; rows finished so far were flushed."""


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: base system, the variable and grid, policies, and sizing."""

    base: SystemParams
    sweep_variable: str
    sweep_grid: Tuple[float, ...]
    policies: Tuple[str, ...]
    arrivals_per_point: int
    seed: int = 0

    def __post_init__(self):
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ValueError(
                f"sweep_variable must be one of {SWEEP_VARIABLES}, got {self.sweep_variable!r}"
            )
        grid = tuple(float(v) for v in self.sweep_grid)
        object.__setattr__(self, "sweep_grid", grid)
        if not grid:
            raise ValueError("sweep_grid must be nonempty")
        if any(v <= 0 for v in grid):
            raise ValueError("sweep_grid values must be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("sweep_grid must be strictly increasing")
        pols = tuple(self.policies)
        object.__setattr__(self, "policies", pols)
        if not pols:
            raise ValueError("policies must be nonempty")
        for p in pols:
            if p not in POLICIES:
                raise ValueError(f"unknown policy {p!r}; expected one of {POLICIES}")
        if self.arrivals_per_point <= 0:
            raise ValueError("arrivals_per_point must be positive")


def _system_at(base: SystemParams, var: str, value: float) -> SystemParams:
    if var == "mu":
        return dataclasses.replace(base, mu=value)
    if var == "lambda":
        return dataclasses.replace(base, lam=value)
    return dataclasses.replace(base, r_s=value)


def _task_seed(base_seed: int, point_idx: int, policy_idx: int) -> int:
    seq = np.random.SeedSequence([base_seed, point_idx, policy_idx])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def worker_count(requested: Optional[int] = None) -> int:
    """Pool size: the MM_REVENUE_THREADS env var caps whatever was requested."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("MM_REVENUE_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def _run_point(args) -> Dict[str, object]:
    cfg, row = args
    stats = run(cfg)
    row = dict(row)
    row.update(
        revenue_per_job=stats.revenue_per_job,
        stderr=stats.revenue_stderr,
        S=stats.submitted_ok,
        D=stats.discarded_penalty,
        N=stats.total_arrivals,
    )
    return row


def run_sweep(
    spec: ExperimentSpec,
    out_path: str | Path,
    max_workers: Optional[int] = None,
    make_chart: bool = True,
) -> List[Dict[str, object]]:
    """Execute the sweep; write CSV (and SVG) to ``out_path``; return the rows.

    On a per-point failure the rows completed so far are still written before
    a :class:`SweepError` is raised.
    """
    out_path = Path(out_path)
    tasks = []
    theta_by_value: Dict[float, float] = {}
    for pi, value in enumerate(spec.sweep_grid):
        sys_at = _system_at(spec.base, spec.sweep_variable, value)
        theta_star, coeffs = solve_theta_star(sys_at)
        theta_by_value[value] = theta_star
        for qi, policy in enumerate(spec.policies):
            seed = _task_seed(spec.seed, pi, qi)
            cfg = SimConfig(
                sys=sys_at,
                policy=policy,
                coeffs=coeffs if policy == "opt_wait" else None,
                max_arrivals=spec.arrivals_per_point,
                seed=seed,
            )
            row = {
                "sweep_var": spec.sweep_variable,
                "value": value,
                "policy": policy,
                "theta_star": theta_star,
                "seed": seed,
                "_order": (pi, qi),
            }
            tasks.append((cfg, row))

    rows: List[Dict[str, object]] = []
    failure: Optional[BaseException] = None
    workers = worker_count(max_workers)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_point, task) for task in tasks]
            for fut in futures:
                try:
                    rows.append(fut.result())
                except BaseException as exc:  # flush what we have, then re-raise
                    failure = exc
                    break
    else:
        for task in tasks:
            try:
                rows.append(_run_point(task))
            except BaseException as exc:
                failure = exc
                break

    rows.sort(key=lambda r: r["_order"])
    for r in rows:
        r.pop("_order")
    _write_csv(rows, out_path)
    if failure is not None:
        raise SweepError(f"sweep point failed: {failure}") from failure
    if make_chart:
        _render_chart(rows, spec, theta_by_value, out_path.with_suffix(".svg"))
    return rows


def _write_csv(rows: Sequence[Dict[str, object]], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_HEADER)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k)) for k in CSV_HEADER})


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _render_chart(rows, spec: ExperimentSpec, theta_by_value, svg_path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "mm-revenue"  # reproducible SVG ids
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    grid = list(spec.sweep_grid)
    ax.plot(
        grid,
        [theta_by_value[v] for v in grid],
        "k--",
        label="analytical optimum",
        linewidth=1.2,
    )
    for policy in spec.policies:
        pts = [r for r in rows if r["policy"] == policy]
        xs = [r["value"] for r in pts]
        ys = [r["revenue_per_job"] for r in pts]
        es = [r["stderr"] for r in pts]
        ax.errorbar(xs, ys, yerr=es, marker="o", markersize=3, capsize=2, label=policy)
    ax.set_xlabel(spec.sweep_variable)
    ax.set_ylabel("revenue per job")
    m = spec.base.machine
    ax.set_title(f"alpha={m.alpha:g}, beta={m.beta:g}")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def load_experiment_spec(path: str | Path, overrides: Optional[Dict[str, object]] = None) -> ExperimentSpec:
    """Read an ExperimentSpec from a TOML or JSON file; ``overrides`` win.

    Expected keys: alpha, beta, mu, lambda, r_s, c_d, sweep_variable,
    sweep_grid, policies, arrivals_per_point, seed.
    """
    path = Path(path)
    raw: Dict[str, object] = {}
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    else:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        base = SystemParams(
            machine=MachineParams(float(raw["alpha"]), float(raw["beta"])),
            mu=float(raw["mu"]),
            lam=float(raw["lambda"]),
            r_s=float(raw["r_s"]),
            c_d=float(raw["c_d"]),
        )
        return ExperimentSpec(
            base=base,
            sweep_variable=str(raw["sweep_variable"]),
            sweep_grid=tuple(float(v) for v in raw["sweep_grid"]),
            policies=tuple(raw["policies"]),
            arrivals_per_point=int(raw["arrivals_per_point"]),
            seed=int(raw.get("seed", 0)),
        )
    except KeyError as exc:
        raise ValueError(f"experiment spec missing field {exc.args[0]!r}") from exc
