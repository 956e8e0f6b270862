"""Multi-angle ansatz layout, parameter vectors, initializations, distillation.

Every cost term and every single-qubit mixer term in every layer carries its
own trainable angle. The flat parameter vector is ordered layer by layer: for
layer ``l`` first the cost angles in Hamiltonian term order, then the mixer
angles by qubit index, giving dimension ``p * (M_C + n)``.

A trainable value ``v`` drives the gate ``exp(-i v c P)`` where ``c`` is the
term's Hamiltonian coefficient (1 for mixers), i.e. the angle multiplies the
weighted term, not the bare word. Initializations, distillation thresholds,
and checkpoints all live in this raw-value space; the per-gate coefficient is
carried by the gate sequence. Setting every cost value of a layer to a shared
``gamma`` therefore reproduces ``exp(-i gamma H_C)`` exactly, which is what
makes the discretized-annealing start a genuine schedule.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import LayoutError, ParameterError
from .optim import AdamState, adam_step
from .pauli import PauliString, render
from .problems import ProblemInstance
from .seeding import StableRng

ANNEALING_TIME_STEP = 0.5
DEFAULT_RELAX_STEPS = 50

CONSTANT_MAGNITUDES = (0.01, 0.05, 0.1, 0.2, 0.4)
N_RANDOM_SEEDS = 5

# Objective protocol used by the relaxation pass: values -> (energy, gradient).
Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass(frozen=True)
class AnsatzLayout:
    """Fixed gate/parameter ordering for one instance at one depth."""

    n_qubits: int
    depth: int
    cost_terms: tuple[tuple[PauliString, float], ...]
    mixer_terms: tuple[PauliString, ...]

    @property
    def n_cost(self) -> int:
        return len(self.cost_terms)

    @property
    def layer_dim(self) -> int:
        return self.n_cost + self.n_qubits

    @property
    def dim(self) -> int:
        return self.depth * self.layer_dim

    def cost_index(self, layer: int, term: int) -> int:
        return layer * self.layer_dim + term

    def mixer_index(self, layer: int, qubit: int) -> int:
        return layer * self.layer_dim + self.n_cost + qubit

    def cost_indices(self) -> np.ndarray:
        """All cost-angle positions in the flat vector, in order."""
        out = []
        for layer in range(self.depth):
            base = layer * self.layer_dim
            out.extend(range(base, base + self.n_cost))
        return np.asarray(out, dtype=np.int64)

    def descriptor_hash(self) -> str:
        doc = {
            "n": self.n_qubits,
            "p": self.depth,
            "cost": [[render(s), c] for s, c in self.cost_terms],
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def build_layout(inst: ProblemInstance, depth: int) -> AnsatzLayout:
    """Layout from the instance Hamiltonian; dimension ``depth * (M_C + n)``."""
    if depth < 1:
        raise ParameterError(f"depth must be >= 1, got {depth}")
    terms = tuple((s, c) for s, c in inst.hamiltonian.terms.items())
    if not terms:
        raise LayoutError("instance Hamiltonian has no terms")
    mixers = tuple(PauliString(1 << q, 0, inst.n_qubits) for q in range(inst.n_qubits))
    return AnsatzLayout(inst.n_qubits, depth, terms, mixers)


@dataclass
class ParamSet:
    """Angle vector plus the active mask used for distillation.

    Inactive entries are pinned to exactly zero; their gates are skipped when
    the circuit is realized and they receive no optimizer updates.
    """

    layout: AnsatzLayout
    values: np.ndarray
    active_mask: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.active_mask = np.asarray(self.active_mask, dtype=bool)
        if self.values.shape != (self.layout.dim,) or self.active_mask.shape != (self.layout.dim,):
            raise LayoutError(
                f"parameter vectors must have length {self.layout.dim}"
            )
        self.values[~self.active_mask] = 0.0

    @property
    def n_active(self) -> int:
        return int(self.active_mask.sum())

    def copy(self) -> "ParamSet":
        return ParamSet(self.layout, self.values.copy(), self.active_mask.copy())

    def to_dict(self) -> dict:
        return {
            "layout_hash": self.layout.descriptor_hash(),
            "values": self.values.tolist(),
            "active_mask": [int(b) for b in self.active_mask],
        }

    @staticmethod
    def from_dict(doc: dict, layout: AnsatzLayout) -> "ParamSet":
        if doc["layout_hash"] != layout.descriptor_hash():
            raise LayoutError("checkpoint layout hash does not match the supplied layout")
        return ParamSet(layout, np.asarray(doc["values"]), np.asarray(doc["active_mask"], dtype=bool))


@dataclass(frozen=True)
class GateSequence:
    """Active gates of all layers in circuit order, one parameter per gate.

    Each entry is ``(generator, param_index, angle_scale)``; the realized
    rotation is ``exp(-i * value[param_index] * angle_scale * generator)``
    with ``angle_scale`` the term's Hamiltonian coefficient (1 for mixers).
    """

    n_qubits: int
    gates: tuple[tuple[PauliString, int, float], ...]

    def __len__(self) -> int:
        return len(self.gates)


def build_gate_sequence(params: ParamSet) -> GateSequence:
    """Circuit realization of a parameter set; inactive angles yield no gate."""
    layout = params.layout
    gates = []
    for layer in range(layout.depth):
        for t, (string, coeff) in enumerate(layout.cost_terms):
            k = layout.cost_index(layer, t)
            if params.active_mask[k]:
                gates.append((string, k, coeff))
        for q, string in enumerate(layout.mixer_terms):
            k = layout.mixer_index(layer, q)
            if params.active_mask[k]:
                gates.append((string, k, 1.0))
    seen = {k for _, k, _ in gates}
    if len(seen) != len(gates):
        raise LayoutError("duplicate parameter index in gate sequence")
    return GateSequence(layout.n_qubits, tuple(gates))


def init_random_uniform(layout: AnsatzLayout, seed: int) -> ParamSet:
    """All angles i.i.d. uniform on [-0.5, 0.5]."""
    values = StableRng(seed).uniform_range(-0.5, 0.5, layout.dim)
    return ParamSet(layout, values, np.ones(layout.dim, dtype=bool))


def init_constant(layout: AnsatzLayout, magnitude: float) -> ParamSet:
    """Cost angles at +magnitude, mixer angles at -magnitude, all layers."""
    if magnitude <= 0:
        raise ParameterError(f"constant magnitude must be positive, got {magnitude}")
    values = np.empty(layout.dim)
    for layer in range(layout.depth):
        base = layer * layout.layer_dim
        values[base : base + layout.n_cost] = magnitude
        values[base + layout.n_cost : base + layout.layer_dim] = -magnitude
    return ParamSet(layout, values, np.ones(layout.dim, dtype=bool))


def annealing_schedule(layout: AnsatzLayout, time_step: float = ANNEALING_TIME_STEP) -> ParamSet:
    """Term-wise expansion of the discretized annealing schedule.

    Layer ``l`` (1-based) gets every cost value ``(l/p) * dt`` and every mixer
    value ``-(1 - l/p) * dt``. The shared cost value acts through the per-gate
    coefficients, so the layer's cost block is exactly ``exp(-i gamma_l H_C)``.
    """
    p = layout.depth
    values = np.empty(layout.dim)
    for layer in range(p):
        gamma = ((layer + 1) / p) * time_step
        beta = -(1.0 - (layer + 1) / p) * time_step
        base = layer * layout.layer_dim
        values[base : base + layout.n_cost] = gamma
        values[base + layout.n_cost : base + layout.layer_dim] = beta
    return ParamSet(layout, values, np.ones(layout.dim, dtype=bool))


def init_qaoa_relax(
    layout: AnsatzLayout,
    relax_steps: int,
    objective: Objective | None,
    learning_rate: float = 0.02,
) -> ParamSet:
    """Annealing-schedule start, optionally relaxed by a short Adam pass.

    The relaxation runs against whatever objective the subsequent main stage
    will use (surrogate or exact); ``relax_steps=0`` returns the raw schedule.
    """
    if relax_steps < 0:
        raise ParameterError("relax_steps must be >= 0")
    params = annealing_schedule(layout)
    if relax_steps == 0:
        return params
    if objective is None:
        raise ParameterError("relaxation requires an objective")
    state = AdamState(layout.dim, learning_rate=learning_rate)
    for _ in range(relax_steps):
        _energy, grad = objective(params.values)
        adam_step(state, params.values, params.active_mask, grad)
    return params


@dataclass(frozen=True)
class InitSpec:
    """One entry of the initialization roster."""

    init_id: str
    kind: str  # "random" | "constant" | "qaoa-relax"
    magnitude: float | None = None
    draw_index: int | None = None


def init_roster() -> tuple[InitSpec, ...]:
    """The 11 starts applied to every run configuration."""
    roster = [InitSpec(f"rand-{k}", "random", draw_index=k) for k in range(N_RANDOM_SEEDS)]
    roster += [InitSpec(f"const-{m}", "constant", magnitude=m) for m in CONSTANT_MAGNITUDES]
    roster.append(InitSpec("qaoa-relax", "qaoa-relax"))
    return tuple(roster)


def realize_init(
    spec: InitSpec,
    layout: AnsatzLayout,
    seed: int,
    objective: Objective | None = None,
    relax_steps: int = DEFAULT_RELAX_STEPS,
    learning_rate: float = 0.02,
) -> ParamSet:
    if spec.kind == "random":
        return init_random_uniform(layout, seed)
    if spec.kind == "constant":
        return init_constant(layout, spec.magnitude)
    if spec.kind == "qaoa-relax":
        return init_qaoa_relax(layout, relax_steps, objective, learning_rate)
    raise ParameterError(f"unknown init kind {spec.kind!r}")


@dataclass(frozen=True)
class DistillResult:
    params: "ParamSet"
    previous_active: int
    removed: int

    @property
    def reduction_fraction(self) -> float:
        return self.removed / self.previous_active if self.previous_active else 0.0


def distill(params: ParamSet, threshold: float) -> DistillResult:
    """Freeze every active angle with magnitude below ``threshold`` to zero.

    Threshold 0 keeps everything (strict comparison). Indices remain stable so
    checkpoints stay comparable across pipeline stages.
    """
    if threshold < 0:
        raise ParameterError(f"distillation threshold must be >= 0, got {threshold}")
    previous = params.n_active
    keep = params.active_mask & (np.abs(params.values) >= threshold)
    new_values = np.where(keep, params.values, 0.0)
    out = ParamSet(params.layout, new_values, keep)
    return DistillResult(out, previous, previous - out.n_active)
