"""Command-line entry point: generate | run | report | verify.

Exit codes: 0 clean, 1 partial failures, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics
from .ansatz import ParamSet, build_gate_sequence, build_layout
from .config import ExperimentConfig
from .errors import ConfigError
from .exact import ExactEngine
from .problems import generate_instance, instance_seed
from .seeding import derive_seed
from .surrogate import PropagationConfig, PropagationStructure, surrogate_energy, tracked_count_bound
from .train import plan_units, run_sweep

EXIT_CLEAN = 0
EXIT_PARTIAL = 1
EXIT_INVALID = 2


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if getattr(args, "family", None):
        cfg.families = [args.family]
    if getattr(args, "n", None):
        cfg.sizes = {fam: [args.n] for fam in cfg.families}
    if getattr(args, "p", None):
        cfg.depths = [args.p]
    if getattr(args, "wmax", None):
        cfg.max_weights = [args.wmax]
    if getattr(args, "threshold", None) is not None:
        cfg.thresholds = [args.threshold]
    if getattr(args, "method", None):
        cfg.methods = [args.method]
    if getattr(args, "instances", None):
        cfg.n_instances = args.instances
    if getattr(args, "seed", None) is not None:
        cfg.master_seed = args.seed
    if getattr(args, "pretrain_steps", None) is not None:
        cfg.pretrain_steps = args.pretrain_steps
    if getattr(args, "finetune_steps", None) is not None:
        cfg.finetune_steps = args.finetune_steps
    if getattr(args, "workers", None):
        cfg.workers = args.workers
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    if getattr(args, "init", None):
        cfg.init_ids = [args.init]
    cfg.validate()
    return cfg


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    out = Path(cfg.output_dir) / "instances"
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create {out}: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    count = 0
    for family in cfg.families:
        for n in cfg.sizes.get(family, []):
            for idx in range(cfg.n_instances):
                seed = instance_seed(cfg.master_seed, family, n, idx)
                inst = generate_instance(family, n, seed, edge_prob=cfg.edge_prob)
                inst.energy_extremes()
                path = out / f"{family}-n{n}-i{idx}.json"
                path.write_text(inst.to_json() + "\n")
                count += 1
    print(f"wrote {count} instance files to {out}")
    return EXIT_CLEAN


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    spec = cfg.sweep_spec()
    units = plan_units(spec)
    n_runs = sum(
        len(u.thresholds) if u.surrogate_assisted else 1 for u in units
    ) * (len(cfg.init_ids) if cfg.init_ids else 11)
    if args.dry_run:
        print(f"planned: {len(units)} work units, {n_runs} runs")
        for u in units:
            print(
                f"  {u.family} n={u.n_qubits} p={u.depth} inst={u.instance_index} "
                + (f"safe wmax={u.max_weight} thresholds={list(u.thresholds)}" if u.surrogate_assisted else "exact-only")
            )
        return EXIT_CLEAN
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    echo = cfg.to_dict()
    echo.pop("output_dir")  # environment-specific, not result-bearing
    echo.pop("workers")
    (out / "config.json").write_text(json.dumps(echo, sort_keys=True, indent=2) + "\n")
    done = {"count": 0}

    def progress(record):
        done["count"] += 1
        print(
            f"[{done['count']}/{n_runs}] {record.run_id} "
            f"alpha_final={record.summary.alpha_final:.4f} tau={record.summary.tau_099}",
            flush=True,
        )

    summaries, failures = run_sweep(spec, out, workers=cfg.resolved_workers(), progress=progress)
    print(f"completed {len(summaries)} runs -> {out / 'summary.csv'}")
    if failures:
        print(f"{len(failures)} unit(s) failed; see {out / 'failures.jsonl'}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_CLEAN


def cmd_report(args: argparse.Namespace) -> int:
    results_dir = Path(args.results_dir)
    search_root = results_dir / "results" if (results_dir / "results").is_dir() else results_dir
    summaries = metrics.load_run_summaries(search_root)
    out = Path(args.out) if args.out else results_dir / "report"
    out.mkdir(parents=True, exist_ok=True)
    if not summaries:
        print(f"warning: no run records under {search_root}; empty report", file=sys.stderr)
    cells = metrics.aggregate(summaries)
    have_exact = {(c.family, c.n_qubits, c.depth) for c in cells if c.method == "exact-only"}
    for c in cells:
        if c.method != "exact-only" and (c.family, c.n_qubits, c.depth) not in have_exact:
            print(
                f"warning: no exact-only reference for {c.family} n={c.n_qubits} p={c.depth}",
                file=sys.stderr,
            )
    metrics.write_progression_table(out / "progression.csv", cells)
    metrics.write_cost_table(out / "cost.csv", cells)
    metrics.write_threshold_table(out / "threshold_summary.csv", cells)
    stats = metrics.reduction_statistics(summaries)
    (out / "reduction_stats.json").write_text(json.dumps(stats, sort_keys=True, indent=2) + "\n")
    metrics.write_summary_csv(out / "runs.csv", summaries)
    print(f"report written to {out} ({len(summaries)} runs, {len(cells)} cells)")
    return EXIT_CLEAN


def _verify_oracle(rng: np.random.Generator) -> tuple[bool, str]:
    worst = 0.0
    for family in ("sk", "grid2d", "maxcut"):
        for n in (4, 6):
            for k in range(2):
                seed = derive_seed("verify", family, n, k)
                inst = generate_instance(family, n, seed, grid_shape=(2, n // 2))
                layout = build_layout(inst, 1)
                engine = ExactEngine(inst)
                for _ in range(2):
                    params = ParamSet(
                        layout, rng.uniform(-1.0, 1.0, layout.dim), np.ones(layout.dim, dtype=bool)
                    )
                    gates = build_gate_sequence(params)
                    e_surr = surrogate_energy(inst, gates, params, PropagationConfig(max_weight=n))
                    e_exact = engine.energy(gates, params.values)
                    worst = max(worst, abs(e_surr - e_exact))
    return worst < 1e-9, f"max |surrogate - exact| at full weight = {worst:.3e}"


def _verify_gradients(rng: np.random.Generator) -> tuple[bool, str]:
    inst = generate_instance("sk", 6, derive_seed("verify", "grad"))
    layout = build_layout(inst, 2)
    engine = ExactEngine(inst)
    params = ParamSet(layout, rng.uniform(-1.0, 1.0, layout.dim), np.ones(layout.dim, dtype=bool))
    gates = build_gate_sequence(params)
    structure = PropagationStructure(inst.hamiltonian, gates, 3)
    step = 1e-5
    ok = True
    detail = []
    for name, value_fn, grad_fn in (
        ("surrogate", structure.evaluate, lambda v: structure.evaluate_with_gradient(v)[1]),
        ("exact", lambda v: engine.energy(gates, v), lambda v: engine.energy_and_gradient(gates, v)[1]),
    ):
        grad = grad_fn(params.values)
        fd = np.zeros_like(grad)
        for k in range(layout.dim):
            delta = np.zeros(layout.dim)
            delta[k] = step
            fd[k] = (value_fn(params.values + delta) - value_fn(params.values - delta)) / (2 * step)
        err = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12)
        ok &= err < 1e-4
        detail.append(f"{name} rel err {err:.2e}")
    return ok, "; ".join(detail)


def _verify_branching() -> tuple[bool, str]:
    from .ansatz import GateSequence
    from .pauli import PauliSum, parse, render

    n = 3
    h = PauliSum(n)
    h.add(parse("Z0 Z1", n), 1.0)
    # propagation visits gates in reverse circuit order: X0 first, then Z0 Z2
    gates = GateSequence(n, ((parse("Z0 Z2", n), 0, 1.0), (parse("X0", n), 1, 1.0)))
    structure = PropagationStructure(h, gates, 2)
    got = {render(s) for s in structure.tracked_strings()}
    discarded = sum(t.n_discarded for t in structure.tapes)
    ok = got == {"Z0 Z1", "Y0 Z1"} and discarded == 1
    return ok, f"tracked={sorted(got)}, discarded={discarded}"


def _verify_bound() -> tuple[bool, str]:
    inst = generate_instance("sk", 12, derive_seed("verify", "bound"))
    layout = build_layout(inst, 4)
    probe = ParamSet(layout, np.zeros(layout.dim), np.ones(layout.dim, dtype=bool))
    structure = PropagationStructure(inst.hamiltonian, build_gate_sequence(probe), 3)
    bound = tracked_count_bound(12, 3)
    max_w = max(s.weight() for s in structure.tracked_strings())
    ok = structure.max_tracked() <= bound and max_w <= 3
    return ok, f"tracked {structure.max_tracked()} <= bound {bound}, max weight {max_w}"


def cmd_verify(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(7)
    suites = [
        ("oracle-equivalence", lambda: _verify_oracle(rng)),
        ("gradient-agreement", lambda: _verify_gradients(rng)),
        ("branch-truncation", _verify_branching),
        ("tracked-count-bound", _verify_bound),
    ]
    all_ok = True
    for name, fn in suites:
        ok, detail = fn()
        all_ok &= ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_CLEAN if all_ok else EXIT_PARTIAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safeqaoa",
        description="Surrogate-assisted multi-angle QAOA training experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file (flags override)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--family", choices=["sk", "grid2d", "maxcut"])
        p.add_argument("--n", type=int, help="qubit count")
        p.add_argument("--instances", type=int, help="instances per cell")
        p.add_argument("--seed", type=int, help="master seed")

    gen = sub.add_parser("generate", help="write instance files with cached extremes")
    add_common(gen)

    run = sub.add_parser("run", help="execute the experiment sweep")
    add_common(run)
    run.add_argument("--p", type=int, help="circuit depth")
    run.add_argument("--wmax", type=int, help="truncation weight")
    run.add_argument("--threshold", type=float, help="distillation threshold")
    run.add_argument(
        "--method",
        choices=["all", "exact-only", "safe", "safe-nodistill", "safe-distill"],
    )
    run.add_argument("--init", help="restrict to one initialization id")
    run.add_argument("--pretrain-steps", type=int, dest="pretrain_steps")
    run.add_argument("--finetune-steps", type=int, dest="finetune_steps")
    run.add_argument("--workers", type=int)
    run.add_argument("--dry-run", action="store_true")

    rep = sub.add_parser("report", help="aggregate run records into tables")
    rep.add_argument("results_dir")
    rep.add_argument("--out", help="report directory (default <results>/report)")

    sub.add_parser("verify", help="run the oracle-equivalence and gradient suites")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "report":
            return cmd_report(args)
        if args.command == "verify":
            return cmd_verify(args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    parser.error(f"unknown command {args.command}")
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
