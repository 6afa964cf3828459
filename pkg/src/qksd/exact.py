"""Dense exact diagonalisation and a classical Lanczos oracle."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import ReferenceState
from .pauli import PauliSum

MAX_QUBITS = 14
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues of ``H`` and the weights ``|<psi_m|phi>|^2`` of the reference state."""

    energies: np.ndarray
    weights: np.ndarray
    vectors: np.ndarray | None = None

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        w = np.clip(np.asarray(self.weights, dtype=float), 0.0, None)
        if e.shape != w.shape:
            raise ValueError("energies and weights differ in length")
        if np.any(np.diff(e) < 0):
            raise ValueError("energies must be sorted ascending")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "weights", w)

    @property
    def ground_energy(self) -> float:
        return float(self.energies[0])

    @property
    def ground_mask(self) -> np.ndarray:
        return self.energies <= self.energies[0] + DEGENERACY_TOL

    @property
    def p_g(self) -> float:
        """Reference weight on the (possibly degenerate) ground level."""
        return float(self.weights[self.ground_mask].sum())

    @property
    def gap(self) -> float:
        """Distance from the ground level to the next distinct level."""
        above = self.energies[~self.ground_mask]
        return float(above[0] - self.energies[0]) if above.size else 0.0

    @property
    def dimension(self) -> int:
        return int(self.energies.size)

    def expectation(self, fn=lambda e: e) -> float:
        return float(np.sum(self.weights * fn(self.energies)))

    def compressed(self, tol: float = 1e-30, merge_tol: float = 1e-12) -> "SpectralDecomposition":
        """Merge levels closer than ``merge_tol`` and drop those with weight ``<= tol``.

        A merged level takes the lowest energy of its cluster and the summed weight.
        The ground level is always kept, so ``ground_energy`` is preserved.
        """
        starts = np.concatenate([[True], np.diff(self.energies) > merge_tol])
        labels = np.cumsum(starts) - 1
        energies = self.energies[starts]
        weights = np.bincount(labels, weights=self.weights)
        keep = weights > tol
        keep[0] = True
        return SpectralDecomposition(energies[keep], weights[keep])


def _dense(h: PauliSum) -> np.ndarray:
    if h.n_qubits > MAX_QUBITS:
        raise ValueError(f"{h.n_qubits} qubits exceeds the dense limit of {MAX_QUBITS}")
    return h.to_matrix()


def diagonalise(h: PauliSum, ref: ReferenceState, keep_vectors: bool = False) -> SpectralDecomposition:
    mat = _dense(h)
    if ref.amplitudes.size != mat.shape[0]:
        raise ValueError("reference state does not match the Hamiltonian register")
    energies, vecs = np.linalg.eigh(mat)
    weights = np.abs(vecs.conj().T @ ref.amplitudes) ** 2
    weights /= weights.sum()
    return SpectralDecomposition(energies, weights, vecs if keep_vectors else None)


def spectral_norm(h: PauliSum) -> float:
    energies = np.linalg.eigvalsh(_dense(h))
    return float(max(abs(energies[0]), abs(energies[-1])))


@dataclass(frozen=True)
class LanczosResult:
    ritz_values: np.ndarray
    dimension: int
    breakdown: bool = False

    @property
    def smallest(self) -> float:
        return float(self.ritz_values[0])


def lanczos_ritz(h: PauliSum | np.ndarray, ref: ReferenceState | np.ndarray, d: int, breakdown_tol: float = 1e-13) -> LanczosResult:
    """``d``-step Lanczos from the reference with full reorthogonalisation."""
    if d < 1:
        raise ValueError("d must be >= 1")
    mat = h if isinstance(h, np.ndarray) else _dense(h)
    v = np.asarray(ref.amplitudes if isinstance(ref, ReferenceState) else ref, dtype=complex)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("reference state has zero norm")
    basis = [v / norm]
    alpha, beta = [], []
    broke = False
    for j in range(d):
        w = mat @ basis[j]
        alpha.append(float(np.real(np.vdot(basis[j], w))))
        Q = np.array(basis).T
        # two passes of classical Gram-Schmidt against the whole basis
        for _ in range(2):
            w = w - Q @ (Q.conj().T @ w)
        if j == d - 1:
            break
        b = float(np.linalg.norm(w))
        if b < breakdown_tol:
            broke = True
            break
        beta.append(b)
        basis.append(w / b)
    m = len(alpha)
    T = np.diag(alpha) + np.diag(beta[: m - 1], 1) + np.diag(beta[: m - 1], -1)
    return LanczosResult(np.linalg.eigvalsh(T), m, broke)


def decomposition_cache_key(h: PauliSum, ref: ReferenceState) -> str:
    digest = hashlib.sha256()
    for c, p in h.terms:
        digest.update(np.array([c]).tobytes())
        digest.update(f"{p.x_mask},{p.z_mask},{p.phase};".encode())
    digest.update(ref.amplitudes.tobytes())
    return digest.hexdigest()[:24]


def cached_diagonalise(h: PauliSum, ref: ReferenceState, cache_dir: str | Path | None) -> SpectralDecomposition:
    """``diagonalise`` with an optional ``.npz`` cache keyed by model and reference."""
    if cache_dir is None:
        return diagonalise(h, ref)
    path = Path(cache_dir) / f"sd-{decomposition_cache_key(h, ref)}.npz"
    if path.exists():
        with np.load(path) as data:
            return SpectralDecomposition(data["energies"], data["weights"])
    sd = diagonalise(h, ref)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, energies=sd.energies, weights=sd.weights)
    return sd
