"""Benchmark Hamiltonians, lattices and reference states.

Heisenberg spins map one-to-one onto qubits. Hubbard orbitals use the
Jordan-Wigner encoding with qubit ``2 * site + spin`` (spin up = 0, down = 1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np

from .pauli import IDENTITY, PauliString, PauliSum

LatticeKind = Literal["chain", "ladder", "random_graph"]
ModelKind = Literal["heisenberg", "hubbard"]


@dataclass(frozen=True)
class LatticeSpec:
    kind: LatticeKind
    size: int
    seed: int | None = None
    edges: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        if not self.edges:
            object.__setattr__(self, "edges", _default_edges(self.kind, self.size, self.seed))
        for i, j in self.edges:
            if not (0 <= i < self.size and 0 <= j < self.size) or i == j:
                raise ValueError(f"invalid edge {(i, j)} for {self.size} sites")

    @property
    def label(self) -> str:
        if self.kind == "random_graph":
            return f"random_graph-{self.size}-s{self.seed}"
        return f"{self.kind}-{self.size}"

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.size, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg


def chain(size: int) -> LatticeSpec:
    return LatticeSpec("chain", size)


def ladder(size: int) -> LatticeSpec:
    return LatticeSpec("ladder", size)


def random_graph(n: int, seed: int) -> LatticeSpec:
    """Each vertex draws two random partners ``u != v``; repeats become multi-edges."""
    if n < 2:
        raise ValueError("random graph needs at least two vertices")
    rng = np.random.default_rng(seed)
    edges = []
    for v in range(n):
        for _ in range(2):
            u = int(rng.integers(0, n - 1))
            if u >= v:
                u += 1
            edges.append((v, u))
    return LatticeSpec("random_graph", n, seed, tuple(edges))


def _default_edges(kind: str, size: int, seed: int | None) -> tuple[tuple[int, int], ...]:
    if size < 2:
        raise ValueError("lattice needs at least two sites")
    if kind == "chain":
        return tuple((i, i + 1) for i in range(size - 1))
    if kind == "ladder":
        # site i sits on rung i // 2, leg i % 2
        rungs = [(i, i + 1) for i in range(0, size - 1, 2)]
        legs = [(i, i + 2) for i in range(size - 2)]
        return tuple(sorted(rungs + legs))
    if kind == "random_graph":
        if seed is None:
            raise ValueError("random_graph lattice requires a seed")
        return random_graph(size, seed).edges
    raise ValueError(f"unknown lattice kind {kind!r}")


def build_heisenberg(lattice: LatticeSpec, J: float = 1.0) -> PauliSum:
    """``J * sum_<ij> (XX + YY + ZZ)``; a repeated edge contributes its terms again."""
    if not lattice.edges:
        raise ValueError("lattice has no edges")
    if J <= 0:
        raise ValueError("antiferromagnetic coupling requires J > 0")
    terms = []
    for i, j in lattice.edges:
        for letter in "XYZ":
            terms.append((J, PauliString.from_label(letter * 2, [i, j])))
    return PauliSum.from_terms(terms, lattice.size, keep_multiplicity=True)


def _annihilator(p: int) -> list[tuple[complex, PauliString]]:
    """Jordan-Wigner image of ``a_p``: ``Z_0..Z_{p-1} (X_p + iY_p) / 2``."""
    zs = (1 << p) - 1
    x = PauliString(1 << p, zs)
    y = PauliString(1 << p, zs | (1 << p), 1)
    return [(0.5, x), (0.5j, y)]


def _creator(p: int) -> list[tuple[complex, PauliString]]:
    return [(np.conj(c), s.adjoint()) for c, s in _annihilator(p)]


def _product(*factors: list[tuple[complex, PauliString]]) -> list[tuple[complex, PauliString]]:
    out = [(1.0 + 0j, IDENTITY)]
    for factor in factors:
        out = [(c1 * c2, p1 * p2) for c1, p1 in out for c2, p2 in factor]
    return out


def _number_shifted(p: int) -> list[tuple[complex, PauliString]]:
    # n_p - 1/2 = -Z_p / 2
    return [(-0.5, PauliString(0, 1 << p))]


def hubbard_qubit(site: int, spin: int) -> int:
    return 2 * site + spin


def build_hubbard(lattice: LatticeSpec, J: float = 1.0, U: float | None = None) -> PauliSum:
    """Fermi-Hubbard model with ``(n_up - 1/2)(n_down - 1/2)`` interaction.

    ``U`` defaults to ``J`` (the benchmark configuration).
    """
    if not lattice.edges:
        raise ValueError("lattice has no edges")
    if U is None:
        U = J
    n_qubits = 2 * lattice.size
    if n_qubits % 2:
        raise ValueError("Hubbard encoding needs an even qubit count")
    terms: list[tuple[complex, PauliString]] = []
    for i, j in lattice.edges:
        for s in (0, 1):
            p, q = hubbard_qubit(i, s), hubbard_qubit(j, s)
            for c, op in _product(_creator(p), _annihilator(q)) + _product(_creator(q), _annihilator(p)):
                terms.append((-J * c, op))
    for i in range(lattice.size):
        for c, op in _product(_number_shifted(hubbard_qubit(i, 0)), _number_shifted(hubbard_qubit(i, 1))):
            terms.append((U * c, op))
    return PauliSum.from_terms(terms, n_qubits)


def fermion_operator_matrix(n_modes: int, creators: list[int], annihilators: list[int]) -> np.ndarray:
    """Dense Fock-space matrix of ``a+_{c1}..a+_{ck} a_{a1}..a_{al}`` via explicit sign counting.

    Independent of the Pauli algebra; used as a brute-force oracle.
    """
    dim = 1 << n_modes
    mat = np.zeros((dim, dim))
    ops = [(p, True) for p in creators] + [(p, False) for p in annihilators]
    for b in range(dim):
        state, amp = b, 1.0
        for p, create in reversed(ops):
            occupied = (state >> p) & 1
            if occupied == create:
                amp = 0.0
                break
            amp *= (-1) ** bin(state & ((1 << p) - 1)).count("1")
            state ^= 1 << p
        if amp:
            mat[state, b] += amp
    return mat


def normalise(h: PauliSum, spectral_norm: float) -> PauliSum:
    """Divide every coefficient by ``spectral_norm`` so the spectrum lies in [-1, 1]."""
    if not spectral_norm > 0:
        raise ValueError("spectral norm must be positive")
    if spectral_norm == 1.0:
        return h
    return h.scaled(1.0 / spectral_norm)


@dataclass(frozen=True)
class ReferenceState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        if abs(np.linalg.norm(amps) - 1.0) > 1e-12:
            raise ValueError("reference state must have unit norm")

    @property
    def n_qubits(self) -> int:
        return int(self.amplitudes.size).bit_length() - 1


def singlet_product(n_spins: int) -> ReferenceState:
    """Singlets on pairs (0,1), (2,3), ... with ``(|01> - |10>)/sqrt(2)`` per pair.

    Basis labels list qubit 0 first; qubit q is bit ``2**q`` of the index.
    """
    if n_spins % 2:
        raise ValueError("pairwise singlet needs an even number of spins")
    pair = np.zeros(4, dtype=complex)
    pair[0b10] = 1 / np.sqrt(2)  # qubit0=0, qubit1=1
    pair[0b01] = -1 / np.sqrt(2)  # qubit0=1, qubit1=0
    state = np.ones(1, dtype=complex)
    for _ in range(n_spins // 2):
        # later pairs occupy higher bits
        state = np.kron(pair, state)
    return ReferenceState(state)


def _apply_creator(p: int, state: np.ndarray) -> np.ndarray:
    out = np.zeros_like(state)
    for c, op in _creator(p):
        out += c * op.apply(state)
    return out


def hartree_fock(lattice: LatticeSpec, J: float = 1.0) -> ReferenceState:
    """Slater determinant of the U = 0 ground state at half filling.

    The odd electron (odd site count) goes to spin up.
    """
    n = lattice.size
    hop = np.zeros((n, n))
    for i, j in lattice.edges:
        hop[i, j] -= J
        hop[j, i] -= J
    _, orbitals = np.linalg.eigh(hop)
    n_up, n_down = (n + 1) // 2, n // 2
    state = np.zeros(1 << (2 * n), dtype=complex)
    state[0] = 1.0
    for spin, count in ((0, n_up), (1, n_down)):
        for alpha in range(count):
            phi = orbitals[:, alpha]
            new = np.zeros_like(state)
            for site in range(n):
                if phi[site] != 0:
                    new += phi[site] * _apply_creator(hubbard_qubit(site, spin), state)
            state = new
    state /= np.linalg.norm(state)
    return ReferenceState(state)


def reference_state(model: ModelKind, lattice: LatticeSpec) -> ReferenceState:
    if model == "heisenberg":
        return singlet_product(lattice.size)
    if model == "hubbard":
        return hartree_fock(lattice)
    raise ValueError(f"unknown model {model!r}")


def build_model(model: ModelKind, lattice: LatticeSpec, J: float = 1.0, U: float | None = None) -> PauliSum:
    if model == "heisenberg":
        return build_heisenberg(lattice, J)
    if model == "hubbard":
        return build_hubbard(lattice, J, U)
    raise ValueError(f"unknown model {model!r}")


def lattice_from_config(cfg: dict[str, Any]) -> LatticeSpec:
    kind = cfg["kind"]
    if kind == "random_graph":
        return random_graph(int(cfg["size"]), int(cfg["seed"]))
    return LatticeSpec(kind, int(cfg["size"]))


def model_from_config(cfg: dict[str, Any] | str | Path) -> tuple[ModelKind, LatticeSpec, PauliSum]:
    """Read ``{model, lattice: {kind, size, seed}, J, U}`` (dict, JSON text or path)."""
    if isinstance(cfg, Path) or (isinstance(cfg, str) and not cfg.lstrip().startswith("{")):
        cfg = json.loads(Path(cfg).read_text())
    elif isinstance(cfg, str):
        cfg = json.loads(cfg)
    model = cfg["model"]
    lattice = lattice_from_config(cfg["lattice"])
    J = float(cfg.get("J", 1.0))
    U = cfg.get("U")
    return model, lattice, build_model(model, lattice, J, None if U is None else float(U))
