"""Surrogate-assisted multi-angle QAOA training toolkit.

Builds Ising-type problem instances, pre-trains term-wise circuit angles on a
weight-truncated Heisenberg-propagation surrogate, optionally distills away
near-zero angles, and fine-tunes on the exact state-vector objective.
"""

from .ansatz import (
    AnsatzLayout,
    GateSequence,
    InitSpec,
    ParamSet,
    build_gate_sequence,
    build_layout,
    distill,
    init_constant,
    init_qaoa_relax,
    init_random_uniform,
    init_roster,
)
from .exact import ExactEngine, apply_sequence, exact_energy, exact_gradient, prepare_plus
from .metrics import (
    RunSummary,
    aggregate,
    approximation_ratio,
    ballpark_cost,
    circular_cosine_similarity,
    first_hit_step,
)
from .pauli import (
    PauliString,
    PauliSum,
    WeightedPauli,
    commutes,
    multiply,
    parse,
    plus_state_expectation,
    render,
)
from .problems import (
    EnergyExtremes,
    ProblemInstance,
    brute_force_extremes,
    generate_grid2d,
    generate_instance,
    generate_maxcut,
    generate_sk,
)
from .surrogate import (
    PropagationConfig,
    PropagationStructure,
    propagate,
    surrogate_energy,
    surrogate_gradient,
    tracked_count_bound,
)
from .optim import AdamState, adam_step
from .train import RunRecord, StageConfig, SweepSpec, TrajectoryRecord, run_safe, run_sweep

__version__ = "0.1.0"
