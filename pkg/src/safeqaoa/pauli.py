"""Sparse Pauli-word algebra in the symplectic bitmask representation.

A Pauli word on ``n`` qubits is a pair of ``n``-bit masks: bit ``i`` of
``x_mask`` is set iff qubit ``i`` carries ``X`` or ``Y``, bit ``i`` of
``z_mask`` is set iff it carries ``Z`` or ``Y``. Qubit 0 is the least
significant bit, matching the state-vector index convention used by the exact
evaluator. Canonically a word ``(x, z)`` denotes ``i**popcount(x & z)`` times
the site-wise product of bare ``X`` and ``Z`` factors, which makes ``(1, 1)``
equal to ``Y`` with no stored phase.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .errors import DimensionError

_I_POWERS = (1 + 0j, 1j, -1 + 0j, -1j)
_SITE_LETTERS = {(1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
_LETTER_MASKS = {"X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_TOKEN_RE = re.compile(r"^([XYZ])(\d+)$")


@dataclass(frozen=True)
class PauliString:
    """Immutable n-qubit Pauli word without phase."""

    x_mask: int
    z_mask: int
    n_qubits: int

    def __post_init__(self):
        if self.n_qubits <= 0:
            raise ValueError(f"n_qubits must be positive, got {self.n_qubits}")
        limit = (1 << self.n_qubits) - 1
        if not 0 <= self.x_mask <= limit or not 0 <= self.z_mask <= limit:
            raise ValueError(
                f"masks ({self.x_mask:#x}, {self.z_mask:#x}) exceed {self.n_qubits} qubits"
            )

    def weight(self) -> int:
        """Number of sites carrying a non-identity operator."""
        return (self.x_mask | self.z_mask).bit_count()

    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def __repr__(self) -> str:
        return f"PauliString({render(self)!r}, n={self.n_qubits})"


@dataclass(frozen=True)
class WeightedPauli:
    """A Pauli word with a real coefficient."""

    string: PauliString
    coeff: float

    def __post_init__(self):
        if not math.isfinite(self.coeff):
            raise ValueError(f"coefficient must be finite, got {self.coeff}")


def identity(n_qubits: int) -> PauliString:
    return PauliString(0, 0, n_qubits)


def single_site(letter: str, qubit: int, n_qubits: int) -> PauliString:
    """A one-site word, e.g. ``single_site("X", 2, 4)`` for X on qubit 2."""
    xb, zb = _LETTER_MASKS[letter]
    return PauliString(xb << qubit, zb << qubit, n_qubits)


def _check_dims(p: PauliString, g: PauliString) -> None:
    if p.n_qubits != g.n_qubits:
        raise DimensionError(f"qubit counts differ: {p.n_qubits} vs {g.n_qubits}")


def commutes(p: PauliString, g: PauliString) -> bool:
    """True iff the two words commute (even symplectic overlap)."""
    _check_dims(p, g)
    overlap = ((p.x_mask & g.z_mask).bit_count() + (p.z_mask & g.x_mask).bit_count()) & 1
    return overlap == 0


def multiply(p: PauliString, g: PauliString) -> tuple[PauliString, complex]:
    """Product ``P * G`` as (canonical word, phase) with phase in {1, i, -1, -i}."""
    _check_dims(p, g)
    x = p.x_mask ^ g.x_mask
    z = p.z_mask ^ g.z_mask
    k = (
        (p.x_mask & p.z_mask).bit_count()
        + (g.x_mask & g.z_mask).bit_count()
        - (x & z).bit_count()
        + 2 * (p.z_mask & g.x_mask).bit_count()
    ) % 4
    return PauliString(x, z, p.n_qubits), _I_POWERS[k]


def rotation_branch(p: PauliString, g: PauliString) -> tuple[PauliString, int]:
    """Anticommuting conjugation branch ``-i * P * G`` as (word, sign).

    For Hermitian Pauli generators the branch phase is always real; a residual
    imaginary phase indicates an internal convention error and is rejected.
    """
    string, phase = multiply(p, g)
    folded = -1j * phase
    if folded == 1:
        return string, 1
    if folded == -1:
        return string, -1
    raise AssertionError(f"branch phase {folded} is not real; P and G likely commute")


def render(p: PauliString) -> str:
    """Text form like ``"Z0 Z1"`` or ``"Y0 Z2"``; the identity renders as ``"I"``."""
    if p.is_identity():
        return "I"
    parts = []
    for q in range(p.n_qubits):
        xb = (p.x_mask >> q) & 1
        zb = (p.z_mask >> q) & 1
        if xb or zb:
            parts.append(f"{_SITE_LETTERS[(xb, zb)]}{q}")
    return " ".join(parts)


def parse(text: str, n_qubits: int) -> PauliString:
    """Inverse of :func:`render`."""
    text = text.strip()
    if text == "I" or text == "":
        return identity(n_qubits)
    x = z = 0
    for token in text.split():
        m = _TOKEN_RE.match(token)
        if m is None:
            raise ValueError(f"malformed Pauli token {token!r}")
        xb, zb = _LETTER_MASKS[m.group(1)]
        q = int(m.group(2))
        if q >= n_qubits:
            raise ValueError(f"qubit {q} out of range for n={n_qubits}")
        x |= xb << q
        z |= zb << q
    return PauliString(x, z, n_qubits)


@dataclass
class PauliSum:
    """Real-weighted sum of Pauli words with accumulated coefficients.

    Terms with an exactly zero coefficient are dropped on insertion, so the
    mapping always holds each distinct word at most once with a nonzero weight.
    Iteration order is insertion order.
    """

    n_qubits: int
    terms: dict[PauliString, float] = field(default_factory=dict)

    def add(self, string: PauliString, coeff: float) -> None:
        if string.n_qubits != self.n_qubits:
            raise DimensionError(
                f"term on {string.n_qubits} qubits added to {self.n_qubits}-qubit sum"
            )
        new = self.terms.get(string, 0.0) + coeff
        if new == 0.0:
            self.terms.pop(string, None)
        else:
            self.terms[string] = new

    def __len__(self) -> int:
        return len(self.terms)

    def copy(self) -> "PauliSum":
        return PauliSum(self.n_qubits, dict(self.terms))

    def __repr__(self) -> str:
        return f"PauliSum(n={self.n_qubits}, {len(self.terms)} terms)"


def plus_state_expectation(s: PauliSum) -> float:
    """Expectation against the uniform superposition on every qubit.

    Only words built from I and X survive (those with an empty z-mask); each
    contributes its coefficient because X and I both have unit expectation in
    the single-qubit plus state.
    """
    return float(sum(c for p, c in s.terms.items() if p.z_mask == 0))
