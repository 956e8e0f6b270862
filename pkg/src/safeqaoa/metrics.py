"""Run metrics, aggregation, and delimited-table emission.

Quality is reported as the normalized ratio ``(e_max - E) / (e_max - e_min)``
(1 at the ground state, 0 at the worst state). Convergence speed is the first
fine-tuning step reaching 99% of the run's own best ratio, and the
hardware-workload proxy is ``active parameter count * first-hit step``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import DegenerateRatioError, DimensionError
from .problems import EnergyExtremes

FIRST_HIT_LEVEL = 0.99


def approximation_ratio(energy: float, extremes: EnergyExtremes) -> float:
    """Normalized energy quality in [0, 1]; undefined for a flat spectrum."""
    span = extremes.e_max - extremes.e_min
    if span <= 0:
        raise DegenerateRatioError("e_max == e_min, ratio undefined")
    return (extremes.e_max - energy) / span


def first_hit_step(trajectory: list[float] | np.ndarray, level: float = FIRST_HIT_LEVEL) -> int:
    """Earliest step whose ratio reaches ``level`` times the trajectory's best.

    Always defined: the maximizing step itself qualifies. Steps are indexed
    from 0 (the value recorded before any optimizer update).
    """
    traj = np.asarray(trajectory, dtype=np.float64)
    if traj.size == 0:
        raise ValueError("trajectory must be non-empty")
    cut = level * float(traj.max())
    return int(np.nonzero(traj >= cut)[0][0])


def ballpark_cost(n_active: int, tau: int) -> float:
    """Workload proxy: active parameters times first-hit step."""
    if n_active < 0 or tau < 0:
        raise ValueError("inputs must be non-negative")
    return float(n_active * tau)


def circular_cosine_similarity(phi: np.ndarray, psi: np.ndarray) -> float:
    """Mean of cos(phi_k - psi_k); 1 iff all angles agree modulo 2*pi."""
    phi = np.asarray(phi, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    if phi.shape != psi.shape or phi.ndim != 1 or phi.size == 0:
        raise DimensionError(f"angle vectors must share a dimension >= 1, got {phi.shape} and {psi.shape}")
    return float(np.mean(np.cos(phi - psi)))


@dataclass
class RunSummary:
    """Flat per-run record used for persistence and aggregation."""

    run_id: str
    family: str
    n_qubits: int
    depth: int
    method: str
    max_weight: int | None
    threshold: float | None
    instance_index: int
    init_id: str
    alpha_step0: float
    alpha_final: float
    alpha_best: float
    tau_099: int
    n_active: int
    c_ballpark: float
    reduction_fraction: float
    cost_angle_similarity: float | None = None
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @staticmethod
    def from_dict(doc: dict) -> "RunSummary":
        names = {f.name for f in fields(RunSummary)}
        return RunSummary(**{k: v for k, v in doc.items() if k in names})


def summarize_trajectory(
    alphas: list[float],
    n_active: int,
    reduction_fraction: float,
    level: float = FIRST_HIT_LEVEL,
) -> tuple[float, float, float, int, float]:
    """(alpha_step0, alpha_final, alpha_best, tau, c_ballpark) of one run."""
    tau = first_hit_step(alphas, level)
    return (
        float(alphas[0]),
        float(alphas[-1]),
        float(max(alphas)),
        tau,
        ballpark_cost(n_active, tau),
    )


@dataclass
class CellStats:
    """Aggregate over the runs of one (family, size, depth, method, ...) cell."""

    family: str
    n_qubits: int
    depth: int
    method: str
    max_weight: int | None
    threshold: float | None
    n_runs: int
    alpha_step0_mean: float
    alpha_final_mean: float
    alpha_final_best: float
    alpha_best_best: float
    tau_mean: float
    n_active_mean: float
    reduction_fraction_mean: float
    c_ballpark: float = field(init=False)
    c_ballpark_mean_product: float = 0.0
    n_degenerate: int = 0

    def __post_init__(self):
        self.c_ballpark = self.n_active_mean * self.tau_mean

    def key(self) -> tuple:
        return (self.family, self.n_qubits, self.depth, self.method, self.max_weight, self.threshold)


def aggregate(summaries: list[RunSummary]) -> list[CellStats]:
    """Group runs into cells and compute per-cell means and bests.

    The tabulated workload proxy is ``mean(n_active) * mean(tau)``; the mean
    of per-run products is retained alongside it.
    """
    cells: dict[tuple, list[RunSummary]] = {}
    for s in summaries:
        key = (s.family, s.n_qubits, s.depth, s.method, s.max_weight, s.threshold)
        cells.setdefault(key, []).append(s)
    out = []
    order = lambda k: (k[0], k[1], k[2], k[3], k[4] or 0, k[5] if k[5] is not None else -1.0)
    for key in sorted(cells, key=order):
        runs = cells[key]
        out.append(
            CellStats(
                family=key[0],
                n_qubits=key[1],
                depth=key[2],
                method=key[3],
                max_weight=key[4],
                threshold=key[5],
                n_runs=len(runs),
                alpha_step0_mean=float(np.mean([r.alpha_step0 for r in runs])),
                alpha_final_mean=float(np.mean([r.alpha_final for r in runs])),
                alpha_final_best=float(np.max([r.alpha_final for r in runs])),
                alpha_best_best=float(np.max([r.alpha_best for r in runs])),
                tau_mean=float(np.mean([r.tau_099 for r in runs])),
                n_active_mean=float(np.mean([r.n_active for r in runs])),
                reduction_fraction_mean=float(np.mean([r.reduction_fraction for r in runs])),
                c_ballpark_mean_product=float(np.mean([r.c_ballpark for r in runs])),
                n_degenerate=sum(1 for r in runs if r.degenerate),
            )
        )
    return out


# -- delimited output ---------------------------------------------------------

SUMMARY_COLUMNS = [f.name for f in fields(RunSummary)]


def _cell_str(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_summary_csv(path: Path, summaries: list[RunSummary]) -> None:
    rows = sorted(summaries, key=lambda s: s.run_id)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for s in rows:
            doc = s.to_dict()
            writer.writerow([_cell_str(doc[c]) for c in SUMMARY_COLUMNS])


def read_summary_csv(path: Path) -> list[RunSummary]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                RunSummary(
                    run_id=row["run_id"],
                    family=row["family"],
                    n_qubits=int(row["n_qubits"]),
                    depth=int(row["depth"]),
                    method=row["method"],
                    max_weight=int(row["max_weight"]) if row["max_weight"] else None,
                    threshold=float(row["threshold"]) if row["threshold"] else None,
                    instance_index=int(row["instance_index"]),
                    init_id=row["init_id"],
                    alpha_step0=float(row["alpha_step0"]),
                    alpha_final=float(row["alpha_final"]),
                    alpha_best=float(row["alpha_best"]),
                    tau_099=int(row["tau_099"]),
                    n_active=int(row["n_active"]),
                    c_ballpark=float(row["c_ballpark"]),
                    reduction_fraction=float(row["reduction_fraction"]),
                    cost_angle_similarity=float(row["cost_angle_similarity"])
                    if row["cost_angle_similarity"]
                    else None,
                    degenerate=bool(int(row["degenerate"])),
                )
            )
    return out


def load_run_summaries(results_dir: Path) -> list[RunSummary]:
    """Collect summary lines from every per-run JSONL file under a results tree."""
    out = []
    for path in sorted(Path(results_dir).rglob("*.jsonl")):
        with open(path) as fh:
            for line in fh:
                doc = json.loads(line)
                if doc.get("kind") == "summary":
                    out.append(RunSummary.from_dict(doc))
    return out


def write_progression_table(path: Path, cells: list[CellStats]) -> None:
    """Step-0 to final progression per cell (mean start, best final, gain)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["family", "n_qubits", "depth", "method", "max_weight", "threshold",
             "alpha_step0_mean", "alpha_final_best", "gain", "n_runs"]
        )
        for c in cells:
            gain = c.alpha_final_best - c.alpha_step0_mean
            writer.writerow(
                [c.family, c.n_qubits, c.depth, c.method, _cell_str(c.max_weight),
                 _cell_str(c.threshold), repr(c.alpha_step0_mean), repr(c.alpha_final_best),
                 repr(gain), c.n_runs]
            )


def write_cost_table(path: Path, cells: list[CellStats]) -> None:
    """Workload-proxy table with reduction factors against the exact-only cell."""
    exact_ref: dict[tuple, float] = {}
    for c in cells:
        if c.method == "exact-only":
            exact_ref[(c.family, c.n_qubits, c.depth)] = c.c_ballpark
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["family", "n_qubits", "depth", "method", "max_weight", "threshold",
             "n_active_mean", "tau_mean", "c_ballpark", "c_ballpark_mean_product",
             "reduction_factor", "n_runs"]
        )
        for c in cells:
            ref = exact_ref.get((c.family, c.n_qubits, c.depth))
            if c.method == "exact-only" or ref is None or c.c_ballpark == 0.0:
                factor = ""
            else:
                factor = repr(ref / c.c_ballpark)
            writer.writerow(
                [c.family, c.n_qubits, c.depth, c.method, _cell_str(c.max_weight),
                 _cell_str(c.threshold), repr(c.n_active_mean), repr(c.tau_mean),
                 repr(c.c_ballpark), repr(c.c_ballpark_mean_product), factor, c.n_runs]
            )


def write_threshold_table(path: Path, cells: list[CellStats]) -> None:
    """Per-threshold final-ratio overview with exact-only reference columns."""
    exact_mean: dict[tuple, float] = {}
    exact_best: dict[tuple, float] = {}
    for c in cells:
        if c.method == "exact-only":
            exact_mean[(c.family, c.n_qubits, c.depth)] = c.alpha_final_mean
            exact_best[(c.family, c.n_qubits, c.depth)] = c.alpha_final_best
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["family", "n_qubits", "depth", "max_weight", "threshold",
             "alpha_final_mean", "alpha_final_best", "reduction_fraction_mean",
             "exact_only_mean", "exact_only_best", "n_runs"]
        )
        for c in cells:
            if c.method == "exact-only":
                continue
            key = (c.family, c.n_qubits, c.depth)
            writer.writerow(
                [c.family, c.n_qubits, c.depth, _cell_str(c.max_weight), _cell_str(c.threshold),
                 repr(c.alpha_final_mean), repr(c.alpha_final_best),
                 repr(c.reduction_fraction_mean),
                 _cell_str(exact_mean.get(key)), _cell_str(exact_best.get(key)), c.n_runs]
            )


def reduction_statistics(summaries: list[RunSummary]) -> dict:
    """Aggregate parameter / workload / step reductions of distillation.

    Parameter and workload reductions compare the distilled pipeline against
    exact-only; the step reduction compares distilled against non-distilled
    within the surrogate-assisted workflow. Values are fractions in [0, 1]
    when the distilled pipeline wins.
    """
    def collect(method):
        return [s for s in summaries if s.method == method]

    exact = collect("exact-only")
    nodistill = collect("safe-nodistill")
    distill = collect("safe-distill")
    out: dict[str, float | None] = {
        "parameter_reduction": None,
        "workload_reduction": None,
        "step_reduction": None,
    }
    if exact and distill:
        full = float(np.mean([s.n_active for s in exact]))
        reduced = float(np.mean([s.n_active for s in distill]))
        if full > 0:
            out["parameter_reduction"] = 1.0 - reduced / full
        cost_full = float(np.mean([s.c_ballpark for s in exact]))
        cost_red = float(np.mean([s.c_ballpark for s in distill]))
        if cost_full > 0:
            out["workload_reduction"] = 1.0 - cost_red / cost_full
    if nodistill and distill:
        tau_no = float(np.mean([s.tau_099 for s in nodistill]))
        tau_yes = float(np.mean([s.tau_099 for s in distill]))
        if tau_no > 0:
            out["step_reduction"] = 1.0 - tau_yes / tau_no
    return out
