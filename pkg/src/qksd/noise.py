"""Structured Gaussian noise on Krylov matrices and empirical measurement numbers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal

import numpy as np

from .bases import KrylovMatrices
from .cost import Protocol, m_for_eta, solve_eta
from .solver import solve_regularised, solve_thresholded

EtaRule = Literal["regularised", "thresholded"]
GRID_RATIO = math.sqrt(10.0)
MIN_TRIALS = 100


@dataclass(frozen=True)
class NoiseDraw:
    h_hat: np.ndarray
    s_hat: np.ndarray
    protocol: Protocol
    M: float
    seed: int | tuple

    def matrices(self, km: KrylovMatrices) -> KrylovMatrices:
        return km.with_matrices(self.h_hat, self.s_hat)


def structured_noise(structure: str, d: int, sigma: float, rng: np.random.Generator, collective: bool = True) -> np.ndarray:
    """Zero-mean Hermitian Gaussian matrix with per-part standard deviation ``sigma``.

    Collective draws share one variable per anti-diagonal (real Hankel), per
    unordered pair (real symmetric) or per diagonal offset (Hermitian Toeplitz,
    complex off the main diagonal). Independent draws use one variable per
    upper-triangle entry, complex off-diagonal for complex matrices.
    """
    complex_entries = structure == "hermitian_toeplitz"
    if collective and structure == "real_hankel":
        g = rng.normal(0.0, sigma, 2 * d - 1)
        idx = np.add.outer(np.arange(d), np.arange(d))
        return g[idx]
    if collective and structure == "hermitian_toeplitz":
        g = rng.normal(0.0, sigma, d) + 1j * rng.normal(0.0, sigma, d)
        g[0] = g[0].real
        off = np.subtract.outer(np.arange(d), np.arange(d))  # i - j
        out = np.where(off <= 0, g[np.abs(off)], np.conj(g[np.abs(off)]))
        return out
    # real symmetric (collective) or any independent protocol
    iu = np.triu_indices(d)
    vals = rng.normal(0.0, sigma, iu[0].size).astype(complex if complex_entries else float)
    if complex_entries:
        off_diag = iu[0] != iu[1]
        vals[off_diag] += 1j * rng.normal(0.0, sigma, int(off_diag.sum()))
    out = np.zeros((d, d), dtype=vals.dtype)
    out[iu] = vals
    return out + np.triu(out, 1).conj().T


def draw_noisy(km: KrylovMatrices, protocol: Protocol, M: float, seed) -> NoiseDraw:
    """Add Gaussian noise of std ``C_H/sqrt(M)`` and ``C_S/sqrt(M)`` to ``(H, S)``."""
    if not M > 0:
        raise ValueError("M must be positive")
    protocol.check_structure(km.structure)
    rng = np.random.default_rng(seed)
    d = km.d
    scale = 1.0 / math.sqrt(M)
    dh = structured_noise(km.structure, d, km.C_H * scale, rng, protocol.collective)
    ds = structured_noise(km.structure, d, km.C_S * scale, rng, protocol.collective)
    return NoiseDraw(km.H + dh, km.S + ds, protocol, M, seed)


def _trial_energy(km: KrylovMatrices, protocol: Protocol, M: float, kappa: float, rule: EtaRule, seed) -> float:
    noisy = draw_noisy(km, protocol, M, seed).matrices(km)
    try:
        if rule == "regularised":
            return solve_regularised(noisy, protocol.eta(km.d, M, kappa)).e_min
        return solve_thresholded(noisy, 10 * km.C_S / math.sqrt(M)).e_min
    except np.linalg.LinAlgError:
        return math.nan


@dataclass(frozen=True)
class NecessaryM:
    m_necessary: float
    epsilon: float
    kappa: float
    trials: int
    ceiling_exceeded: bool = False
    grid: tuple[float, ...] = ()
    successes: tuple[int, ...] = ()


def m_grid(m_min: float, m_max: float, ratio: float = GRID_RATIO) -> np.ndarray:
    n = int(math.floor(math.log(m_max / m_min) / math.log(ratio) + 1e-9)) + 1
    return m_min * ratio ** np.arange(n)


def necessary_measurement(
    km: KrylovMatrices,
    protocol: Protocol,
    E_g: float,
    epsilon: float,
    kappa: float,
    trials: int = 100,
    eta_rule: EtaRule = "regularised",
    seed: int = 0,
    m_min: float = 1e2,
    m_max: float = 1e22,
    ratio: float = GRID_RATIO,
    records: list | None = None,
) -> NecessaryM:
    """Smallest grid ``M`` at which ``|E_hat - E_g| <= epsilon`` in at least ``(1-kappa) trials`` runs.

    Trial ``t`` at grid index ``i`` uses the seed ``(seed, i, t)``. Per-trial rows
    are appended to ``records`` when given.
    """
    if trials < MIN_TRIALS:
        raise ValueError(f"trials must be >= {MIN_TRIALS}")
    need = math.ceil((1 - kappa) * trials - 1e-9)
    grid = m_grid(m_min, m_max, ratio)
    hits: list[int] = []
    for i, M in enumerate(grid):
        energies = [_trial_energy(km, protocol, M, kappa, eta_rule, (seed, i, t)) for t in range(trials)]
        err = np.abs(np.asarray(energies) - E_g)
        ok = int(np.sum(err <= epsilon))
        hits.append(ok)
        if records is not None:
            records.extend({"M": M, "trial": t, "e_hat": e, "abs_error": a} for t, (e, a) in enumerate(zip(energies, err)))
        if ok >= need:
            return NecessaryM(float(M), epsilon, kappa, trials, False, tuple(grid[: i + 1]), tuple(hits))
    return NecessaryM(float(grid[-1]), epsilon, kappa, trials, True, tuple(grid), tuple(hits))


@dataclass(frozen=True)
class Sufficiency:
    fraction: float
    variational_fraction: float
    eta: float
    M: float
    trials: int
    energies: np.ndarray = field(repr=False, default_factory=lambda: np.array([]))


def sufficiency_check(km: KrylovMatrices, protocol: Protocol, E_g: float, epsilon: float, kappa: float, trials: int = 100, seed: int = 0) -> Sufficiency:
    """Run the regularised solver at the sufficient ``eta``/``M`` and count successes.

    Success means ``E_g <= E_hat <= E_g + epsilon``; the variational fraction counts
    ``E_hat >= E_g`` alone.
    """
    if km.factor is None:
        raise ValueError("sufficiency check needs noiseless matrices")
    eta = solve_eta(km, E_g, epsilon)
    M = m_for_eta(protocol, km.d, eta, kappa)
    energies = np.array([_trial_energy(km, protocol, M, kappa, "regularised", (seed, t)) for t in range(trials)])
    # tiny tolerance absorbs rounding in the eigensolver
    tol = 1e-12
    inside = (energies >= E_g - tol) & (energies <= E_g + epsilon + tol)
    above = energies >= E_g - tol
    return Sufficiency(float(inside.mean()), float(above.mean()), eta, M, trials, energies)


def write_csv(path: str | Path, rows: Iterable[dict]) -> Path:
    """Write dict rows with the union of keys as header, in first-seen order."""
    rows = list(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields: list[str] = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v
