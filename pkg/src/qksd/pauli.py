"""Sparse Pauli-string algebra on little-endian bitmasks.

Qubit ``q`` corresponds to bit ``1 << q`` of both the masks and the
computational-basis index, so ``index = sum_q b_q 2**q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

_PHASES = (1.0 + 0j, 1j, -1.0 + 0j, -1j)


def _popcount(v: int) -> int:
    return bin(v).count("1")


@lru_cache(maxsize=16)
def _parity_table(n_qubits: int) -> np.ndarray:
    """``table[b]`` is ``popcount(b) mod 2`` for every ``b < 2**n``."""
    table = np.zeros(1, dtype=np.int8)
    for _ in range(n_qubits):
        table = np.concatenate([table, 1 - table])
    return table


@dataclass(frozen=True)
class PauliString:
    """The operator ``i**phase * prod_q X_q**x_q Z_q**z_q``.

    ``phase`` is an exponent of ``i`` (0..3), so it encodes one of
    +1, +i, -1, -i.
    """

    x_mask: int = 0
    z_mask: int = 0
    phase: int = 0

    def __post_init__(self):
        object.__setattr__(self, "phase", self.phase % 4)

    @classmethod
    def from_label(cls, label: str, qubits: Sequence[int] | None = None) -> "PauliString":
        """Build a Hermitian string from letters, e.g. ``from_label("XZ", [0, 3])``."""
        if qubits is None:
            qubits = range(len(label))
        x = z = 0
        n_y = 0
        for letter, q in zip(label.upper(), qubits):
            bit = 1 << q
            if letter == "X":
                x |= bit
            elif letter == "Z":
                z |= bit
            elif letter == "Y":
                x |= bit
                z |= bit
                n_y += 1
            elif letter != "I":
                raise ValueError(f"unknown Pauli letter {letter!r}")
        # Y = i X Z
        return cls(x, z, n_y)

    @property
    def coefficient(self) -> complex:
        return _PHASES[self.phase]

    @property
    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    @property
    def is_hermitian(self) -> bool:
        return (self.phase - _popcount(self.x_mask & self.z_mask)) % 2 == 0

    def hermitian_part(self) -> tuple[complex, "PauliString"]:
        """Split into ``(scalar, hermitian_string)`` with the string's phase canonical."""
        canon = PauliString(self.x_mask, self.z_mask, _popcount(self.x_mask & self.z_mask))
        scalar = _PHASES[(self.phase - canon.phase) % 4]
        return scalar, canon

    def __mul__(self, other: "PauliString") -> "PauliString":
        # Z^a X^b = (-1)^{|a&b|} X^b Z^a
        sign = 2 * (_popcount(self.z_mask & other.x_mask) % 2)
        return PauliString(
            self.x_mask ^ other.x_mask,
            self.z_mask ^ other.z_mask,
            self.phase + other.phase + sign,
        )

    def adjoint(self) -> "PauliString":
        # (X^x Z^z)^dag = Z^z X^x = (-1)^{|x&z|} X^x Z^z
        return PauliString(
            self.x_mask, self.z_mask, -self.phase + 2 * (_popcount(self.x_mask & self.z_mask) % 2)
        )

    def label(self, n_qubits: int) -> str:
        letters = []
        for q in range(n_qubits):
            bx = (self.x_mask >> q) & 1
            bz = (self.z_mask >> q) & 1
            letters.append("IZXY"[bx * 2 + bz])
        return "".join(letters)

    def apply(self, state: np.ndarray) -> np.ndarray:
        """Return ``P @ state`` for a state vector (or stack of column vectors)."""
        n = int(state.shape[0]).bit_length() - 1
        idx = np.arange(state.shape[0])
        signs = 1 - 2 * _parity_table(n)[idx & self.z_mask].astype(np.int64)
        scal = self.coefficient * signs
        out = np.empty_like(state, dtype=complex)
        if state.ndim == 1:
            out[idx ^ self.x_mask] = scal * state
        else:
            out[idx ^ self.x_mask] = scal[:, None] * state
        return out

    def to_matrix(self, n_qubits: int) -> np.ndarray:
        dim = 1 << n_qubits
        idx = np.arange(dim)
        signs = 1 - 2 * _parity_table(n_qubits)[idx & self.z_mask].astype(np.int64)
        mat = np.zeros((dim, dim), dtype=complex)
        mat[idx ^ self.x_mask, idx] = self.coefficient * signs
        return mat


IDENTITY = PauliString()


@dataclass(frozen=True)
class PauliSum:
    """Hermitian operator ``sum_j h_j sigma_j`` with real ``h_j``.

    Strings are stored in canonical Hermitian form (phase ``i**|x&z|``), so the
    coefficient list is exactly the ``h_j`` entering ``h_tot``.
    """

    terms: tuple[tuple[float, PauliString], ...]
    n_qubits: int
    h_tot: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((float(c), p) for c, p in self.terms))
        limit = 1 << self.n_qubits
        for c, p in self.terms:
            if p.x_mask >= limit or p.z_mask >= limit:
                raise ValueError("Pauli string acts outside the register")
            if not p.is_hermitian:
                raise ValueError("PauliSum terms must be Hermitian strings")
        object.__setattr__(self, "h_tot", float(sum(abs(c) for c, _ in self.terms)))

    @classmethod
    def from_terms(
        cls,
        terms: Iterable[tuple[complex, PauliString]],
        n_qubits: int,
        *,
        keep_multiplicity: bool = False,
        atol: float = 1e-14,
    ) -> "PauliSum":
        """Canonicalise arbitrary-phase terms into a real-coefficient sum.

        With ``keep_multiplicity`` repeated strings stay as separate terms (used
        for multi-edge lattices); otherwise equal strings are merged and
        cancelled terms dropped.
        """
        collected: list[tuple[complex, PauliString]] = []
        merged: dict[tuple[int, int], complex] = {}
        for c, p in terms:
            scalar, canon = p.hermitian_part()
            value = complex(c) * scalar
            if keep_multiplicity:
                collected.append((value, canon))
            else:
                key = (canon.x_mask, canon.z_mask)
                merged[key] = merged.get(key, 0.0) + value
        if not keep_multiplicity:
            collected = [
                (v, PauliString(x, z, _popcount(x & z))) for (x, z), v in merged.items()
            ]
        out = []
        for v, p in collected:
            if abs(v.imag) > 1e-10 * max(1.0, abs(v)):
                raise ValueError("operator is not Hermitian: complex coefficient on Hermitian string")
            if abs(v) > atol:
                out.append((v.real, p))
        return cls(tuple(out), n_qubits)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms])

    @property
    def strings(self) -> list[PauliString]:
        return [p for _, p in self.terms]

    def __len__(self) -> int:
        return len(self.terms)

    def scaled(self, factor: float) -> "PauliSum":
        return PauliSum(tuple((c * factor, p) for c, p in self.terms), self.n_qubits)

    def to_matrix(self) -> np.ndarray:
        n = self.n_qubits
        dim = 1 << n
        idx = np.arange(dim)
        parity = _parity_table(n)
        mat = np.zeros((dim, dim), dtype=complex)
        for c, p in self.terms:
            signs = 1 - 2 * parity[idx & p.z_mask].astype(np.int64)
            mat[idx ^ p.x_mask, idx] += c * p.coefficient * signs
        return mat

    def apply(self, state: np.ndarray) -> np.ndarray:
        out = np.zeros_like(state, dtype=complex)
        for c, p in self.terms:
            out += c * p.apply(state)
        return out


def pauli_rotation(p: PauliString, angle: float, state: np.ndarray) -> np.ndarray:
    """Apply ``exp(-i angle P)`` for a Hermitian Pauli string ``P``."""
    return np.cos(angle) * state - 1j * np.sin(angle) * p.apply(state)
