"""Ising instance generators and the brute-force energy oracle.

Three families are supported, all encoded as ``H = sum_i h_i Z_i +
sum_(i,j) J_ij Z_i Z_j``:

* ``sk``      fully connected, couplings ~ Normal(0, 1/n), zero fields;
* ``grid2d``  open-boundary square lattice; nearest-neighbor couplings
              ~ Normal(0, 1), diagonal (next-nearest) couplings
              ~ Normal(0, 0.09), fields ~ Normal(0, 0.01);
* ``maxcut``  Erdos-Renyi graph with unit couplings and zero fields.

Sampling order is fixed (fields by qubit index, then couplings in
lexicographic edge order) so instances are reproducible byte-for-byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GuardError, InvalidSizeError, ParameterError
from .pauli import PauliString, PauliSum
from .seeding import StableRng, derive_seed

FAMILIES = ("sk", "grid2d", "maxcut")

BRUTE_FORCE_GUARD = 30
_CHUNK_BITS = 22

GRID_SHAPES = {12: (3, 4), 16: (4, 4), 20: (4, 5)}


@dataclass(frozen=True)
class EnergyExtremes:
    """Exact classical energy extremes from exhaustive search."""

    e_min: float
    e_max: float
    argmin_bitstring: int

    def __post_init__(self):
        if self.e_min > self.e_max:
            raise ValueError("e_min exceeds e_max")


@dataclass
class ProblemInstance:
    """One generated Ising instance plus its interaction data.

    ``local_fields`` holds only nonzero fields; ``couplings`` maps ordered
    edges ``(i, j)`` with ``i < j`` to coupling strengths. Bit ``i`` of a
    configuration integer encodes qubit ``i`` (0 -> spin +1, 1 -> spin -1).
    """

    family: str
    n_qubits: int
    local_fields: dict[int, float]
    couplings: dict[tuple[int, int], float]
    seed: int
    grid_shape: tuple[int, int] | None = None
    resample_count: int = 0
    extremes: EnergyExtremes | None = field(default=None, repr=False)

    def __post_init__(self):
        for (i, j) in self.couplings:
            if not 0 <= i < j < self.n_qubits:
                raise ValueError(f"coupling edge ({i}, {j}) out of range")
        for i in self.local_fields:
            if not 0 <= i < self.n_qubits:
                raise ValueError(f"field index {i} out of range")

    @property
    def graph_edges(self) -> list[tuple[int, int]]:
        return sorted(self.couplings)

    @cached_property
    def hamiltonian(self) -> PauliSum:
        """Cost operator with fields first (by qubit), then couplings (lex order)."""
        h = PauliSum(self.n_qubits)
        for i in sorted(self.local_fields):
            h.add(PauliString(0, 1 << i, self.n_qubits), self.local_fields[i])
        for (i, j) in self.graph_edges:
            h.add(PauliString(0, (1 << i) | (1 << j), self.n_qubits), self.couplings[(i, j)])
        return h

    def energy_extremes(self) -> EnergyExtremes:
        if self.extremes is None:
            self.extremes = brute_force_extremes(self)
        return self.extremes

    def to_dict(self) -> dict:
        doc = {
            "family": self.family,
            "n_qubits": self.n_qubits,
            "seed": self.seed,
            "grid_shape": list(self.grid_shape) if self.grid_shape else None,
            "resample_count": self.resample_count,
            "fields": [[i, self.local_fields[i]] for i in sorted(self.local_fields)],
            "edges": [[i, j, self.couplings[(i, j)]] for (i, j) in self.graph_edges],
        }
        if self.extremes is not None:
            doc["extremes"] = {
                "e_min": self.extremes.e_min,
                "e_max": self.extremes.e_max,
                "argmin_bitstring": self.extremes.argmin_bitstring,
            }
        return doc

    @staticmethod
    def from_dict(doc: dict) -> "ProblemInstance":
        extremes = None
        if doc.get("extremes") is not None:
            e = doc["extremes"]
            extremes = EnergyExtremes(e["e_min"], e["e_max"], e["argmin_bitstring"])
        return ProblemInstance(
            family=doc["family"],
            n_qubits=doc["n_qubits"],
            local_fields={int(i): v for i, v in doc["fields"]},
            couplings={(int(i), int(j)): v for i, j, v in doc["edges"]},
            seed=doc["seed"],
            grid_shape=tuple(doc["grid_shape"]) if doc.get("grid_shape") else None,
            resample_count=doc.get("resample_count", 0),
            extremes=extremes,
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ProblemInstance":
        return ProblemInstance.from_dict(json.loads(text))


def generate_sk(n: int, seed: int) -> ProblemInstance:
    """Fully connected spin glass with couplings ~ Normal(0, 1/n)."""
    if n < 2:
        raise InvalidSizeError(f"sk instance needs n >= 2, got {n}")
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    draws = StableRng(seed).normal(len(edges), scale=1.0 / np.sqrt(n))
    return ProblemInstance(
        family="sk",
        n_qubits=n,
        local_fields={},
        couplings={e: float(v) for e, v in zip(sorted(edges), draws)},
        seed=seed,
    )


def grid2d_edges(rows: int, cols: int) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Open-boundary lattice edges: (nearest-neighbor, next-nearest-neighbor)."""
    idx = lambda r, c: r * cols + c
    nn, nnn = [], []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                nn.append((idx(r, c), idx(r, c + 1)))
            if r + 1 < rows:
                nn.append((idx(r, c), idx(r + 1, c)))
            if r + 1 < rows and c + 1 < cols:
                nnn.append((idx(r, c), idx(r + 1, c + 1)))
                nnn.append((idx(r, c + 1), idx(r + 1, c)))
    ordered = lambda e: (min(e), max(e))
    return sorted(map(ordered, nn)), sorted(map(ordered, nnn))


def generate_grid2d(rows: int, cols: int, seed: int) -> ProblemInstance:
    """Square-lattice spin glass with diagonal couplings and weak fields."""
    if rows < 2 or cols < 2:
        raise InvalidSizeError(f"grid needs rows, cols >= 2, got {rows}x{cols}")
    n = rows * cols
    nn, nnn = grid2d_edges(rows, cols)
    sigma = {e: 1.0 for e in nn}
    sigma.update({e: 0.3 for e in nnn})
    rng = StableRng(seed)
    fields = rng.normal(n, scale=0.1)
    order = sorted(sigma)
    draws = rng.normal(len(order))
    return ProblemInstance(
        family="grid2d",
        n_qubits=n,
        local_fields={i: float(v) for i, v in enumerate(fields)},
        couplings={e: float(draws[k] * sigma[e]) for k, e in enumerate(order)},
        seed=seed,
        grid_shape=(rows, cols),
    )


def generate_maxcut(n: int, edge_prob: float, seed: int, max_attempts: int = 1000) -> ProblemInstance:
    """Erdos-Renyi unit-coupling instance; resamples degenerate graphs.

    A draw with no edges or with an isolated vertex is discarded and retried
    with a freshly derived seed; the number of resamples is recorded on the
    instance.
    """
    if n < 2:
        raise InvalidSizeError(f"maxcut instance needs n >= 2, got {n}")
    if not 0.0 < edge_prob <= 1.0:
        raise ParameterError(f"edge probability must be in (0, 1], got {edge_prob}")
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for attempt in range(max_attempts):
        attempt_seed = seed if attempt == 0 else derive_seed(seed, "maxcut-resample", attempt)
        u = StableRng(attempt_seed).uniform(len(all_pairs))
        edges = [e for e, v in zip(all_pairs, u) if v < edge_prob]
        degree = [0] * n
        for i, j in edges:
            degree[i] += 1
            degree[j] += 1
        if edges and all(d > 0 for d in degree):
            return ProblemInstance(
                family="maxcut",
                n_qubits=n,
                local_fields={},
                couplings={e: 1.0 for e in edges},
                seed=seed,
                resample_count=attempt,
            )
    raise ParameterError(
        f"no connected-degree maxcut draw in {max_attempts} attempts (n={n}, p={edge_prob})"
    )


def instance_seed(master_seed: int, family: str, n: int, instance_index: int) -> int:
    """Seed for instance ``instance_index`` of a (family, size) cell."""
    return derive_seed(master_seed, "instance", family, n) + instance_index


def generate_instance(
    family: str,
    n: int,
    seed: int,
    edge_prob: float = 0.3,
    grid_shape: tuple[int, int] | None = None,
) -> ProblemInstance:
    if family == "sk":
        return generate_sk(n, seed)
    if family == "grid2d":
        shape = grid_shape or GRID_SHAPES.get(n)
        if shape is None:
            raise InvalidSizeError(f"no canonical grid shape for n={n}; pass rows x cols")
        return generate_grid2d(shape[0], shape[1], seed)
    if family == "maxcut":
        return generate_maxcut(n, edge_prob, seed)
    raise ParameterError(f"unknown family {family!r}")


def classical_energy(inst: ProblemInstance, bits: int) -> float:
    """Energy of one configuration; bit i set means spin i is -1."""
    e = 0.0
    for i, h in inst.local_fields.items():
        e += h * (1.0 - 2.0 * ((bits >> i) & 1))
    for (i, j), jij in inst.couplings.items():
        e += jij * (1.0 - 2.0 * (((bits >> i) ^ (bits >> j)) & 1))
    return e


def energy_table_chunk(inst: ProblemInstance, start: int, stop: int) -> np.ndarray:
    """Classical energies of configurations ``start .. stop-1``."""
    idx = np.arange(start, stop, dtype=np.uint64)
    energies = np.zeros(stop - start)
    for i, h in sorted(inst.local_fields.items()):
        bit = (idx >> np.uint64(i)) & np.uint64(1)
        energies += h * (1.0 - 2.0 * bit.astype(np.float64))
    for (i, j), jij in sorted(inst.couplings.items()):
        par = ((idx >> np.uint64(i)) ^ (idx >> np.uint64(j))) & np.uint64(1)
        energies += jij * (1.0 - 2.0 * par.astype(np.float64))
    return energies


def energy_table(inst: ProblemInstance) -> np.ndarray:
    """Full 2^n table of classical energies (qubit i = bit i)."""
    return energy_table_chunk(inst, 0, 1 << inst.n_qubits)


def brute_force_extremes(inst: ProblemInstance) -> EnergyExtremes:
    """Exhaustive min/max energy sweep, chunked to bound memory."""
    n = inst.n_qubits
    if n > BRUTE_FORCE_GUARD:
        raise GuardError(f"brute force refused for n={n} > {BRUTE_FORCE_GUARD}")
    total = 1 << n
    chunk = min(total, 1 << _CHUNK_BITS)
    e_min = np.inf
    e_max = -np.inf
    argmin = 0
    for start in range(0, total, chunk):
        energies = energy_table_chunk(inst, start, min(start + chunk, total))
        lo = int(np.argmin(energies))
        if energies[lo] < e_min:
            e_min = float(energies[lo])
            argmin = start + lo
        hi = float(energies.max())
        if hi > e_max:
            e_max = hi
    return EnergyExtremes(e_min, e_max, argmin)


def cut_value(inst: ProblemInstance, bits: int) -> int:
    """Number of edges crossing the partition encoded by ``bits``."""
    return sum(1 for (i, j) in inst.couplings if ((bits >> i) ^ (bits >> j)) & 1)
