"""Shared dense-matrix oracles for cross-checking the sparse engines.

Qubit 0 is the least significant bit of the state index, so the full operator
for a word is ``kron(P_{n-1}, ..., P_0)``.
"""

import numpy as np
import pytest

from safeqaoa.pauli import PauliString, PauliSum

SITE = {
    (0, 0): np.eye(2, dtype=complex),
    (1, 0): np.array([[0, 1], [1, 0]], dtype=complex),
    (0, 1): np.array([[1, 0], [0, -1]], dtype=complex),
    (1, 1): np.array([[0, -1j], [1j, 0]], dtype=complex),
}


def dense_pauli(p: PauliString) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for q in range(p.n_qubits):
        xb = (p.x_mask >> q) & 1
        zb = (p.z_mask >> q) & 1
        out = np.kron(SITE[(xb, zb)], out)
    return out


def dense_sum(s: PauliSum) -> np.ndarray:
    dim = 1 << s.n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    for string, coeff in s.terms.items():
        out += coeff * dense_pauli(string)
    return out


def dense_gate(generator: PauliString, angle: float) -> np.ndarray:
    """exp(-i * angle * P) for an involutory generator."""
    dim = 1 << generator.n_qubits
    return np.cos(angle) * np.eye(dim) - 1j * np.sin(angle) * dense_pauli(generator)


def dense_circuit_state(gates, values, n: int) -> np.ndarray:
    """Apply gates in circuit order to the uniform superposition."""
    state = np.full(1 << n, 2.0 ** (-n / 2), dtype=complex)
    for generator, k, scale in gates:
        state = dense_gate(generator, values[k] * scale) @ state
    return state


@pytest.fixture
def rng():
    return np.random.default_rng(20250809)


def random_string(rng, n: int) -> PauliString:
    return PauliString(int(rng.integers(0, 1 << n)), int(rng.integers(0, 1 << n)), n)


def random_sum(rng, n: int, n_terms: int) -> PauliSum:
    s = PauliSum(n)
    for _ in range(n_terms):
        s.add(random_string(rng, n), float(rng.normal()))
    return s
