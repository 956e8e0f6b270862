"""Truncated Heisenberg-picture propagation of the cost operator.

The observable is conjugated backward through the circuit (last gate first).
A tracked word that commutes with a gate generator passes through unchanged;
an anticommuting word under a gate with effective angle ``a`` (the trainable
value times the gate's coefficient scale) splits into ``cos(2a)`` times itself
plus ``sin(2a)`` times the branch word ``-i P G`` (the factor 2 maps the
``exp(-i a P)`` gate convention onto the half-angle rotation convention).
Branch words created with weight above ``max_weight`` are dropped on the spot.

Because commutation and truncation depend only on the words, not the angles,
the branching structure is fixed per (observable, circuit, weight cap). It is
built once as a sequence of index tapes and then re-evaluated per parameter
vector in vectorized form, which is what makes the 500-step pre-training loop
affordable. Anticommuting words at a gate come in mutual partner pairs
``(P, PG)``, so each gate acts as a bank of plane rotations on the coefficient
vector (plus pure ``cos`` decay on words whose partner was truncated); the
rotations are orthogonal, which the gradient pass exploits to recover forward
values by inverse rotation instead of storing them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .ansatz import GateSequence, ParamSet
from .errors import DimensionError, GuardError, LayoutError, ParameterError
from .pauli import PauliString, PauliSum, plus_state_expectation
from .problems import ProblemInstance

_MASK_BITS = 64


@dataclass(frozen=True)
class PropagationConfig:
    """Truncation settings for one propagation."""

    max_weight: int
    coeff_floor: float = 0.0

    def __post_init__(self):
        if self.max_weight < 1:
            raise ParameterError(f"max_weight must be >= 1, got {self.max_weight}")
        if self.coeff_floor < 0:
            raise ParameterError(f"coeff_floor must be >= 0, got {self.coeff_floor}")


def tracked_count_bound(n: int, max_weight: int) -> int:
    """Upper bound on distinct tracked words: sum_r C(n, r) * 3^r for r <= cap."""
    if not 0 <= max_weight <= n:
        raise ParameterError(f"need 0 <= max_weight <= n, got {max_weight}, {n}")
    return sum(math.comb(n, r) * 3**r for r in range(max_weight + 1))


class _GateTape:
    """Index structure of one gate: partner-pair rotations and solo decays."""

    __slots__ = ("param_index", "scale", "pair_a", "pair_b", "pair_sign", "solo", "n_discarded", "n_tracked_after")

    def __init__(self, param_index, scale, pair_a, pair_b, pair_sign, solo, n_discarded, n_tracked_after):
        self.param_index = param_index
        self.scale = scale
        self.pair_a = np.asarray(pair_a, dtype=np.int64)
        self.pair_b = np.asarray(pair_b, dtype=np.int64)
        self.pair_sign = np.asarray(pair_sign, dtype=np.float64)
        self.solo = np.asarray(solo, dtype=np.int64)
        self.n_discarded = n_discarded
        self.n_tracked_after = n_tracked_after


class PropagationStructure:
    """Angle-independent branch structure, reusable across evaluations."""

    def __init__(self, observable: PauliSum, gates: GateSequence, max_weight: int):
        n = observable.n_qubits
        if gates.n_qubits != n:
            raise DimensionError(f"observable on {n} qubits, circuit on {gates.n_qubits}")
        if not 1 <= max_weight <= n:
            raise ParameterError(f"max_weight must be in [1, {n}], got {max_weight}")
        if n > _MASK_BITS:
            raise GuardError(f"propagation supports up to {_MASK_BITS} qubits, got {n}")
        self.n_qubits = n
        self.max_weight = max_weight
        self.param_dim = 1 + max((k for _, k, _ in gates.gates), default=-1)

        xs: list[int] = []
        zs: list[int] = []
        slot_of: dict[int, int] = {}

        def new_slot(x: int, z: int) -> int:
            slot = len(xs)
            xs.append(x)
            zs.append(z)
            slot_of[(x << _MASK_BITS) | z] = slot
            return slot

        init_idx = []
        init_coeff = []
        for string, coeff in observable.terms.items():
            init_idx.append(new_slot(string.x_mask, string.z_mask))
            init_coeff.append(coeff)
        self.init_idx = np.asarray(init_idx, dtype=np.int64)
        self.init_coeff = np.asarray(init_coeff, dtype=np.float64)

        self.tapes: list[_GateTape] = []
        cap = max(1024, 2 * len(xs))
        x_np = np.zeros(cap, dtype=np.uint64)
        z_np = np.zeros(cap, dtype=np.uint64)
        x_np[: len(xs)] = xs
        z_np[: len(zs)] = zs

        for generator, param_index, scale in reversed(gates.gates):
            gx, gz = generator.x_mask, generator.z_mask
            m = len(xs)
            overlap = np.bitwise_count((x_np[:m] & np.uint64(gz)) ^ (z_np[:m] & np.uint64(gx)))
            anti_idx = np.nonzero(overlap & np.uint8(1))[0].tolist()

            pair_a: list[int] = []
            pair_b: list[int] = []
            pair_sign: list[int] = []
            solo: list[int] = []
            discarded = 0
            seen: set[int] = set()
            gxz_pop = (gx & gz).bit_count()
            for i in anti_idx:
                if i in seen:
                    continue
                xi, zi = xs[i], zs[i]
                px, pz = xi ^ gx, zi ^ gz
                j = slot_of.get((px << _MASK_BITS) | pz)
                if j is None:
                    if (px | pz).bit_count() > max_weight:
                        solo.append(i)
                        discarded += 1
                        continue
                    j = new_slot(px, pz)
                    if j >= len(x_np):
                        grown_x = np.zeros(2 * len(x_np), dtype=np.uint64)
                        grown_z = np.zeros(2 * len(z_np), dtype=np.uint64)
                        grown_x[: len(x_np)] = x_np
                        grown_z[: len(z_np)] = z_np
                        x_np, z_np = grown_x, grown_z
                    x_np[j] = px
                    z_np[j] = pz
                # phase exponent of P*G in powers of i; -i folds it to a real sign
                k = (
                    (xi & zi).bit_count()
                    + gxz_pop
                    - (px & pz).bit_count()
                    + 2 * (zi & gx).bit_count()
                ) % 4
                if k == 1:
                    sign = 1
                elif k == 3:
                    sign = -1
                else:
                    raise AssertionError("anticommuting branch produced a non-real phase")
                pair_a.append(i)
                pair_b.append(j)
                pair_sign.append(sign)
                seen.add(i)
                seen.add(j)

            self.tapes.append(
                _GateTape(param_index, scale, pair_a, pair_b, pair_sign, solo, discarded, len(xs))
            )

        self._xs = xs
        self._zs = zs
        self.n_slots = len(xs)
        self.plus_idx = np.asarray([s for s in range(self.n_slots) if zs[s] == 0], dtype=np.int64)

    # -- inspection ---------------------------------------------------------

    def tracked_strings(self) -> list[PauliString]:
        return [PauliString(x, z, self.n_qubits) for x, z in zip(self._xs, self._zs)]

    def max_tracked(self) -> int:
        return self.n_slots

    def trace_rows(self) -> list[dict]:
        """Per-gate tracked-word and discarded-branch counts, in propagation order."""
        rows = []
        for ordinal, tape in enumerate(self.tapes):
            rows.append(
                {
                    "gate": ordinal,
                    "param_index": tape.param_index,
                    "tracked_after": tape.n_tracked_after,
                    "pairs": len(tape.pair_a),
                    "discarded": tape.n_discarded,
                }
            )
        return rows

    def write_trace_csv(self, path) -> None:
        rows = self.trace_rows()
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["gate", "param_index", "tracked_after", "pairs", "discarded"])
            writer.writeheader()
            writer.writerows(rows)

    # -- evaluation ---------------------------------------------------------

    def _check_values(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if len(values) < self.param_dim:
            raise LayoutError(f"parameter vector of length {len(values)} too short")
        return values

    def final_coefficients(self, values: np.ndarray, coeff_floor: float = 0.0) -> np.ndarray:
        """Coefficient of every tracked word after full propagation."""
        values = self._check_values(values)
        c = np.zeros(self.n_slots)
        c[self.init_idx] = self.init_coeff
        for tape in self.tapes:
            theta = 2.0 * values[tape.param_index] * tape.scale
            co, si = np.cos(theta), np.sin(theta)
            if len(tape.pair_a):
                ca = c[tape.pair_a]
                cb = c[tape.pair_b]
                s_si = tape.pair_sign * si
                c[tape.pair_a] = co * ca - s_si * cb
                c[tape.pair_b] = s_si * ca + co * cb
            if len(tape.solo):
                c[tape.solo] *= co
            if coeff_floor > 0.0:
                c[np.abs(c) < coeff_floor] = 0.0
        return c

    def evaluate(self, values: np.ndarray, coeff_floor: float = 0.0) -> float:
        """Plus-state expectation of the propagated observable."""
        c = self.final_coefficients(values, coeff_floor)
        return float(c[self.plus_idx].sum())

    def evaluate_with_gradient(self, values: np.ndarray) -> tuple[float, np.ndarray]:
        """Energy and its exact gradient via reverse accumulation.

        The forward pass stores only the pre-gate values of solo (truncated)
        words; pair inputs are recovered on the way back by applying the
        inverse plane rotation, which is numerically stable because the
        rotations are orthogonal. Requires ``coeff_floor == 0``.
        """
        values = self._check_values(values)
        c = np.zeros(self.n_slots)
        c[self.init_idx] = self.init_coeff
        solo_vals: list[np.ndarray | None] = []
        trig: list[tuple[float, float]] = []
        for tape in self.tapes:
            theta = 2.0 * values[tape.param_index] * tape.scale
            co, si = np.cos(theta), np.sin(theta)
            trig.append((co, si))
            if len(tape.pair_a):
                ca = c[tape.pair_a]
                cb = c[tape.pair_b]
                s_si = tape.pair_sign * si
                c[tape.pair_a] = co * ca - s_si * cb
                c[tape.pair_b] = s_si * ca + co * cb
            if len(tape.solo):
                solo_vals.append(c[tape.solo].copy())
                c[tape.solo] *= co
            else:
                solo_vals.append(None)
        energy = float(c[self.plus_idx].sum())

        grad = np.zeros(len(values))
        adj = np.zeros(self.n_slots)
        adj[self.plus_idx] = 1.0
        for tape, (co, si), solos in zip(reversed(self.tapes), reversed(trig), reversed(solo_vals)):
            g_theta = 0.0
            if len(tape.pair_a):
                s = tape.pair_sign
                ca_out = c[tape.pair_a]
                cb_out = c[tape.pair_b]
                ca = co * ca_out + s * si * cb_out
                cb = -s * si * ca_out + co * cb_out
                c[tape.pair_a] = ca
                c[tape.pair_b] = cb
                aa = adj[tape.pair_a]
                ab = adj[tape.pair_b]
                g_theta += float(np.sum(aa * (-si * ca - s * co * cb)))
                g_theta += float(np.sum(ab * (s * co * ca - si * cb)))
                adj[tape.pair_a] = co * aa + s * si * ab
                adj[tape.pair_b] = -s * si * aa + co * ab
            if solos is not None:
                g_theta += float(np.sum(adj[tape.solo] * (-si) * solos))
                c[tape.solo] = solos
                adj[tape.solo] *= co
            grad[tape.param_index] += 2.0 * tape.scale * g_theta
        return energy, grad

    def objective(self):
        """Value-and-gradient closure for the optimizer loop."""

        def call(values: np.ndarray) -> tuple[float, np.ndarray]:
            return self.evaluate_with_gradient(values)

        return call


def propagate(h: PauliSum, gates: GateSequence, params: ParamSet, cfg: PropagationConfig) -> PauliSum:
    """One-shot propagation returning the evolved observable as a PauliSum."""
    structure = PropagationStructure(h, gates, cfg.max_weight)
    coeffs = structure.final_coefficients(params.values, cfg.coeff_floor)
    out = PauliSum(h.n_qubits)
    for string, value in zip(structure.tracked_strings(), coeffs):
        if value != 0.0:
            out.add(string, float(value))
    return out


def surrogate_energy(inst: ProblemInstance, gates: GateSequence, params: ParamSet, cfg: PropagationConfig) -> float:
    evolved = propagate(inst.hamiltonian, gates, params, cfg)
    return plus_state_expectation(evolved)


def surrogate_gradient(inst: ProblemInstance, gates: GateSequence, params: ParamSet, cfg: PropagationConfig) -> np.ndarray:
    """Exact gradient of the truncated surrogate energy (floor must be 0)."""
    if cfg.coeff_floor != 0.0:
        raise ParameterError("gradients require coeff_floor == 0")
    structure = PropagationStructure(inst.hamiltonian, gates, cfg.max_weight)
    return structure.evaluate_with_gradient(params.values)[1]
