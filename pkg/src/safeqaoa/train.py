"""Three-stage training pipeline and the experiment sweep driver.

A surrogate-assisted run performs: (1) a fixed budget of Adam steps on the
truncated-propagation energy, (2) optional distillation, freezing angles whose
magnitude stayed below the threshold, and (3) a fixed budget of Adam steps on
the exact state-vector energy from a fresh optimizer state. The exact-only
baseline skips (1) and (2) but consumes the identical exact-step budget, so
comparisons isolate the effect of the surrogate-guided start.

Seed discipline: the instance draw depends only on (master seed, family, size,
instance index) and the initialization draw only additionally on (depth, init
id), so every method variant of a cell trains the same instance from the same
start. Everything downstream is deterministic.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics
from .ansatz import (
    DEFAULT_RELAX_STEPS,
    InitSpec,
    ParamSet,
    build_gate_sequence,
    build_layout,
    distill,
    init_roster,
    realize_init,
)
from .errors import ParameterError
from .exact import ExactEngine
from .metrics import RunSummary, approximation_ratio, circular_cosine_similarity
from .optim import (
    DEFAULT_BETA1,
    DEFAULT_BETA2,
    DEFAULT_EPSILON,
    DEFAULT_LEARNING_RATE,
    AdamState,
    adam_step,
)
from .problems import ProblemInstance, generate_instance, instance_seed
from .seeding import derive_seed
from .surrogate import PropagationStructure

METHOD_EXACT_ONLY = "exact-only"
METHOD_SAFE_NODISTILL = "safe-nodistill"
METHOD_SAFE_DISTILL = "safe-distill"
METHODS = (METHOD_EXACT_ONLY, METHOD_SAFE_NODISTILL, METHOD_SAFE_DISTILL)

DEFAULT_PRETRAIN_STEPS = 500
DEFAULT_FINETUNE_STEPS = 100


@dataclass(frozen=True)
class StageConfig:
    """Budgets and hyperparameters of one run."""

    method: str
    max_weight: int | None = None
    distill_threshold: float = 0.0
    pretrain_steps: int = DEFAULT_PRETRAIN_STEPS
    finetune_steps: int = DEFAULT_FINETUNE_STEPS
    learning_rate: float = DEFAULT_LEARNING_RATE
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    epsilon: float = DEFAULT_EPSILON
    relax_steps: int = DEFAULT_RELAX_STEPS

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}")
        if self.method != METHOD_EXACT_ONLY and self.max_weight is None:
            raise ParameterError("surrogate-assisted runs need max_weight")
        if self.distill_threshold < 0:
            raise ParameterError("distillation threshold must be >= 0")

    @property
    def surrogate_assisted(self) -> bool:
        return self.method != METHOD_EXACT_ONLY

    def _adam(self, dim: int) -> AdamState:
        return AdamState(
            dim,
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
        )


@dataclass
class TrajectoryRecord:
    """Per-step energies of one run (exact phase indexed from step 0)."""

    exact_energies: list[float]
    alphas: list[float]
    surrogate_energies: list[float]
    degenerate: bool = False


@dataclass
class RunRecord:
    """Everything persisted for one run."""

    run_id: str
    meta: dict
    trajectory: TrajectoryRecord
    summary: RunSummary
    checkpoints: dict[str, dict]


def threshold_label(threshold: float) -> str:
    return format(threshold, "g")


def make_run_id(
    family: str,
    n: int,
    depth: int,
    method: str,
    max_weight: int | None,
    threshold: float | None,
    instance_index: int,
    init_id: str,
) -> str:
    parts = [family, f"n{n}", f"p{depth}", method]
    if method != METHOD_EXACT_ONLY:
        parts.append(f"w{max_weight}")
    if method == METHOD_SAFE_DISTILL:
        parts.append(f"t{threshold_label(threshold)}")
    parts.append(f"i{instance_index}")
    parts.append(init_id)
    return "-".join(parts)


def init_seed_for(
    master_seed: int, family: str, n: int, depth: int, instance_index: int, init_id: str
) -> int:
    return derive_seed(master_seed, "init", family, n, depth, instance_index, init_id)


def _optimize(objective, params: ParamSet, steps: int, adam: AdamState) -> list[float]:
    """Run ``steps`` Adam updates, returning energies at steps 0..steps."""
    energies = []
    for _ in range(steps):
        energy, grad = objective(params.values)
        energies.append(energy)
        adam_step(adam, params.values, params.active_mask, grad)
    final, _ = objective(params.values)
    energies.append(final)
    return energies


def _cost_angle_similarity(before: ParamSet, after: ParamSet) -> float | None:
    """Circular similarity of cost angles active in both checkpoints."""
    cost_idx = before.layout.cost_indices()
    both = before.active_mask[cost_idx] & after.active_mask[cost_idx]
    idx = cost_idx[both]
    if idx.size == 0:
        return None
    return circular_cosine_similarity(before.values[idx], after.values[idx])


def _all_active(layout) -> ParamSet:
    return ParamSet(layout, np.zeros(layout.dim), np.ones(layout.dim, dtype=bool))


@dataclass
class _PretrainResult:
    params: ParamSet
    surrogate_energies: list[float]
    init_checkpoint: dict
    n_active_before: int


def _pretrain_phase(
    inst: ProblemInstance,
    layout,
    init_spec: InitSpec,
    cfg: StageConfig,
    init_seed: int,
    structure: PropagationStructure | None,
    engine: ExactEngine,
) -> tuple[_PretrainResult, PropagationStructure | None]:
    """Initialization plus (for surrogate-assisted methods) the pre-training loop."""
    if cfg.surrogate_assisted and structure is None:
        structure = PropagationStructure(
            inst.hamiltonian, build_gate_sequence(_all_active(layout)), cfg.max_weight
        )
    if cfg.surrogate_assisted:
        relax_objective = structure.objective()
    else:
        relax_objective = engine.objective(_all_active(layout))

    params = realize_init(
        init_spec,
        layout,
        init_seed,
        objective=relax_objective,
        relax_steps=cfg.relax_steps,
        learning_rate=cfg.learning_rate,
    )
    init_checkpoint = params.to_dict()
    n_active_before = params.n_active
    surrogate_energies: list[float] = []
    if cfg.surrogate_assisted:
        surrogate_energies = _optimize(
            structure.objective(), params, cfg.pretrain_steps, cfg._adam(layout.dim)
        )
    return _PretrainResult(params, surrogate_energies, init_checkpoint, n_active_before), structure


def _finetune_and_summarize(
    inst: ProblemInstance,
    depth: int,
    init_spec: InitSpec,
    cfg: StageConfig,
    init_seed: int,
    instance_index: int,
    pre: _PretrainResult,
    engine: ExactEngine,
) -> RunRecord:
    """Distillation (if configured), the exact phase, and record assembly."""
    layout = pre.params.layout
    extremes = inst.energy_extremes()
    checkpoints: dict[str, dict] = {"init": pre.init_checkpoint}
    params = pre.params.copy()
    reduction_fraction = 0.0
    post_pretrain: ParamSet | None = None
    if cfg.surrogate_assisted:
        post_pretrain = pre.params
        checkpoints["post_pretrain"] = post_pretrain.to_dict()
        if cfg.method == METHOD_SAFE_DISTILL:
            result = distill(params, cfg.distill_threshold)
            params = result.params
            reduction_fraction = result.reduction_fraction
            checkpoints["post_distill"] = params.to_dict()

    degenerate = params.n_active == 0
    gates = build_gate_sequence(params)
    if degenerate:
        step0 = engine.energy(gates, params.values)
        exact_energies = [step0] * (cfg.finetune_steps + 1)
    else:
        exact_energies = _optimize(
            engine.objective(params), params, cfg.finetune_steps, cfg._adam(layout.dim)
        )
    checkpoints["final"] = params.to_dict()

    alphas = [approximation_ratio(e, extremes) for e in exact_energies]
    n_active = params.n_active
    alpha_step0, alpha_final, alpha_best, tau, cost = metrics.summarize_trajectory(
        alphas, n_active, reduction_fraction
    )
    similarity = (
        _cost_angle_similarity(post_pretrain, params) if post_pretrain is not None else None
    )

    run_id = make_run_id(
        inst.family, inst.n_qubits, depth, cfg.method, cfg.max_weight,
        cfg.distill_threshold, instance_index, init_spec.init_id,
    )
    summary = RunSummary(
        run_id=run_id,
        family=inst.family,
        n_qubits=inst.n_qubits,
        depth=depth,
        method=cfg.method,
        max_weight=cfg.max_weight if cfg.surrogate_assisted else None,
        threshold=cfg.distill_threshold if cfg.method == METHOD_SAFE_DISTILL else None,
        instance_index=instance_index,
        init_id=init_spec.init_id,
        alpha_step0=alpha_step0,
        alpha_final=alpha_final,
        alpha_best=alpha_best,
        tau_099=tau,
        n_active=n_active,
        c_ballpark=cost,
        reduction_fraction=reduction_fraction,
        cost_angle_similarity=similarity,
        degenerate=degenerate,
    )
    meta = {
        "kind": "meta",
        "run_id": run_id,
        "family": inst.family,
        "n_qubits": inst.n_qubits,
        "depth": depth,
        "method": cfg.method,
        "max_weight": cfg.max_weight if cfg.surrogate_assisted else None,
        "threshold": cfg.distill_threshold if cfg.method == METHOD_SAFE_DISTILL else None,
        "instance_index": instance_index,
        "instance_seed": inst.seed,
        "init_id": init_spec.init_id,
        "init_seed": init_seed,
        "pretrain_steps": cfg.pretrain_steps if cfg.surrogate_assisted else 0,
        "finetune_steps": cfg.finetune_steps,
        "n_active_before": pre.n_active_before,
        "n_active_after": n_active,
        "degenerate": degenerate,
        "adam_reset_between_phases": True,
        "angle_convention": "coefficient-absorbed",
        "resample_count": inst.resample_count,
    }
    trajectory = TrajectoryRecord(exact_energies, alphas, pre.surrogate_energies, degenerate)
    return RunRecord(run_id, meta, trajectory, summary, checkpoints)


def run_safe(
    inst: ProblemInstance,
    depth: int,
    init_spec: InitSpec,
    cfg: StageConfig,
    init_seed: int,
    instance_index: int = 0,
    structure: PropagationStructure | None = None,
    engine: ExactEngine | None = None,
) -> RunRecord:
    """Execute one full run (pre-train, optional distillation, fine-tune)."""
    layout = build_layout(inst, depth)
    engine = engine or ExactEngine(inst)
    pre, _ = _pretrain_phase(inst, layout, init_spec, cfg, init_seed, structure, engine)
    return _finetune_and_summarize(
        inst, depth, init_spec, cfg, init_seed, instance_index, pre, engine
    )


# -- sweep driver -------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian experiment description with deterministic per-run seeds."""

    families: tuple[str, ...]
    sizes: dict[str, tuple[int, ...]]
    depths: tuple[int, ...]
    max_weights: tuple[int, ...]
    thresholds: tuple[float, ...]
    methods: tuple[str, ...]
    n_instances: int
    master_seed: int
    pretrain_steps: int = DEFAULT_PRETRAIN_STEPS
    finetune_steps: int = DEFAULT_FINETUNE_STEPS
    learning_rate: float = DEFAULT_LEARNING_RATE
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    epsilon: float = DEFAULT_EPSILON
    relax_steps: int = DEFAULT_RELAX_STEPS
    edge_prob: float = 0.3
    init_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class WorkUnit:
    """One worker task: all runs sharing an instance (and pre-training)."""

    family: str
    n_qubits: int
    depth: int
    instance_index: int
    max_weight: int | None
    thresholds: tuple[float, ...]
    surrogate_assisted: bool


def plan_units(spec: SweepSpec) -> list[WorkUnit]:
    units = []
    for family in spec.families:
        for n in spec.sizes.get(family, ()):
            for depth in spec.depths:
                for idx in range(spec.n_instances):
                    if METHOD_EXACT_ONLY in spec.methods:
                        units.append(WorkUnit(family, n, depth, idx, None, (), False))
                    if any(m != METHOD_EXACT_ONLY for m in spec.methods):
                        for w in spec.max_weights:
                            units.append(
                                WorkUnit(family, n, depth, idx, w, tuple(spec.thresholds), True)
                            )
    return units


def _roster(spec: SweepSpec) -> list[InitSpec]:
    roster = init_roster()
    if spec.init_ids:
        roster = tuple(s for s in roster if s.init_id in spec.init_ids)
    return list(roster)


def _stage_kwargs(spec: SweepSpec) -> dict:
    return dict(
        pretrain_steps=spec.pretrain_steps,
        finetune_steps=spec.finetune_steps,
        learning_rate=spec.learning_rate,
        beta1=spec.beta1,
        beta2=spec.beta2,
        epsilon=spec.epsilon,
        relax_steps=spec.relax_steps,
    )


def execute_unit(spec: SweepSpec, unit: WorkUnit) -> list[RunRecord]:
    """Run every (init, threshold) combination of one unit.

    The propagation structure and exact engine are shared across the unit, and
    pre-training runs once per initialization and is reused for every
    distillation threshold; thresholds only act after pre-training, so shared
    and unshared execution produce identical records.
    """
    seed = instance_seed(spec.master_seed, unit.family, unit.n_qubits, unit.instance_index)
    inst = generate_instance(unit.family, unit.n_qubits, seed, edge_prob=spec.edge_prob)
    inst.energy_extremes()
    layout = build_layout(inst, unit.depth)
    engine = ExactEngine(inst)
    common = _stage_kwargs(spec)

    structure = None
    if unit.surrogate_assisted:
        structure = PropagationStructure(
            inst.hamiltonian, build_gate_sequence(_all_active(layout)), unit.max_weight
        )

    records = []
    for init_spec in _roster(spec):
        init_seed = init_seed_for(
            spec.master_seed, unit.family, unit.n_qubits, unit.depth,
            unit.instance_index, init_spec.init_id,
        )
        if not unit.surrogate_assisted:
            cfg = StageConfig(method=METHOD_EXACT_ONLY, **common)
            pre, _ = _pretrain_phase(inst, layout, init_spec, cfg, init_seed, None, engine)
            records.append(
                _finetune_and_summarize(
                    inst, unit.depth, init_spec, cfg, init_seed, unit.instance_index, pre, engine
                )
            )
            continue
        base_cfg = StageConfig(
            method=METHOD_SAFE_NODISTILL, max_weight=unit.max_weight, **common
        )
        pre, structure = _pretrain_phase(
            inst, layout, init_spec, base_cfg, init_seed, structure, engine
        )
        for threshold in unit.thresholds:
            method = METHOD_SAFE_NODISTILL if threshold == 0.0 else METHOD_SAFE_DISTILL
            cfg = StageConfig(
                method=method, max_weight=unit.max_weight, distill_threshold=threshold, **common
            )
            shared = _PretrainResult(
                pre.params.copy(), pre.surrogate_energies, pre.init_checkpoint, pre.n_active_before
            )
            records.append(
                _finetune_and_summarize(
                    inst, unit.depth, init_spec, cfg, init_seed, unit.instance_index, shared, engine
                )
            )
    return records


def _unit_worker(args: tuple[SweepSpec, WorkUnit]) -> list[RunRecord]:
    return execute_unit(*args)


def write_run_record(results_dir: Path, record: RunRecord) -> Path:
    """Persist one run as a JSONL trajectory plus a checkpoint file."""
    run_dir = (
        Path(results_dir)
        / record.meta["family"]
        / str(record.meta["n_qubits"])
        / str(record.meta["depth"])
        / record.meta["method"]
    )
    run_dir.mkdir(parents=True, exist_ok=True)
    path = run_dir / f"{record.run_id}.jsonl"
    with open(path, "w") as fh:
        fh.write(json.dumps(record.meta, sort_keys=True) + "\n")
        for step, energy in enumerate(record.trajectory.surrogate_energies):
            fh.write(json.dumps({"kind": "surrogate_step", "step": step, "energy": energy}) + "\n")
        for step, (energy, alpha) in enumerate(
            zip(record.trajectory.exact_energies, record.trajectory.alphas)
        ):
            fh.write(
                json.dumps({"kind": "exact_step", "step": step, "energy": energy, "alpha": alpha})
                + "\n"
            )
        fh.write(json.dumps({"kind": "summary", **record.summary.to_dict()}, sort_keys=True) + "\n")
    with open(run_dir / f"{record.run_id}.params.json", "w") as fh:
        json.dump({"run_id": record.run_id, "checkpoints": record.checkpoints}, fh, sort_keys=True)
    return path


def run_sweep(
    spec: SweepSpec,
    output_dir: Path | str,
    workers: int = 1,
    progress=None,
) -> tuple[list[RunSummary], list[dict]]:
    """Execute the full sweep, persisting records as units complete.

    Individual unit failures are recorded in a manifest and skipped; the sweep
    always runs to completion. Returns (summaries, failures).
    """
    output_dir = Path(output_dir)
    results_dir = output_dir / "results"
    results_dir.mkdir(parents=True, exist_ok=True)
    units = plan_units(spec)
    summaries: list[RunSummary] = []
    failures: list[dict] = []

    def consume(records: list[RunRecord]) -> None:
        for record in records:
            write_run_record(results_dir, record)
            summaries.append(record.summary)
            if progress is not None:
                progress(record)

    if workers <= 1:
        for unit in units:
            try:
                consume(execute_unit(spec, unit))
            except Exception as exc:  # noqa: BLE001 - sweep must survive bad cells
                failures.append({"unit": unit.__dict__, "error": f"{type(exc).__name__}: {exc}"})
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_unit_worker, (spec, unit)): unit for unit in units}
            for future in futures:
                unit = futures[future]
                try:
                    consume(future.result())
                except Exception as exc:  # noqa: BLE001
                    failures.append({"unit": unit.__dict__, "error": f"{type(exc).__name__}: {exc}"})

    summaries.sort(key=lambda s: s.run_id)
    metrics.write_summary_csv(output_dir / "summary.csv", summaries)
    if failures:
        with open(output_dir / "failures.jsonl", "w") as fh:
            for f in failures:
                fh.write(json.dumps(f, sort_keys=True) + "\n")
    return summaries, failures
