"""Regularised and thresholded solvers for the noisy Krylov pencil."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .bases import KrylovMatrices, ritz_min

EIG_FLOOR = 1e-12


@dataclass(frozen=True)
class Solution:
    e_min: float
    coefficients: np.ndarray
    eta: float
    method: Literal["regularised", "thresholded", "exact"]
    floor_triggered: bool = False
    retained: int = 0


def _reduced_min(H: np.ndarray, S: np.ndarray, keep_rule) -> tuple[float, np.ndarray, bool, int]:
    """Minimum eigenpair of ``H a = E S a`` restricted to eigendirections of ``S`` kept by ``keep_rule``."""
    S = 0.5 * (S + S.conj().T)
    H = 0.5 * (H + H.conj().T)
    s, V = np.linalg.eigh(S)
    keep, floored = keep_rule(s)
    if not np.any(keep):
        raise np.linalg.LinAlgError("no directions of the overlap matrix retained")
    W = V[:, keep] / np.sqrt(s[keep])
    M = W.conj().T @ H @ W
    vals, vecs = np.linalg.eigh(0.5 * (M + M.conj().T))
    a = W @ vecs[:, 0]
    return float(vals[0]), a / np.linalg.norm(a), floored, int(keep.sum())


def _floor_rule(s: np.ndarray):
    top = s[-1]
    if top <= 0:
        return np.zeros_like(s, dtype=bool), True
    keep = s > EIG_FLOOR * top
    return keep, bool(not keep.all())


def solve_regularised(km: KrylovMatrices, eta: float) -> Solution:
    """Minimum eigenpair of ``(H + C_H eta) a = E (S + C_S eta) a``."""
    if not eta > 0:
        raise ValueError("regularisation needs eta > 0")
    d = km.d
    eye = np.eye(d)
    e, a, floored, kept = _reduced_min(km.H + km.C_H * eta * eye, km.S + km.C_S * eta * eye, _floor_rule)
    return Solution(e, a, eta, "regularised", floored, kept)


def solve_thresholded(km: KrylovMatrices, threshold: float) -> Solution:
    """Discard eigendirections of ``S`` below ``threshold`` and solve without a shift."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    rule = lambda s: (s >= threshold, bool(np.any(s < threshold)))
    e, a, floored, kept = _reduced_min(km.H, km.S, rule)
    return Solution(e, a, 0.0, "thresholded", floored, kept)


def solve_exact(km: KrylovMatrices) -> Solution:
    """Noiseless minimum via the spectral factor (falls back to the floored reduction)."""
    if km.factor is not None:
        e, a = ritz_min(km)
        return Solution(e, a, 0.0, "exact", False, km.d)
    e, a, floored, kept = _reduced_min(km.H, km.S, _floor_rule)
    return Solution(e, a, 0.0, "exact", floored, kept)


def min_e_prime(km: KrylovMatrices, eta: float) -> float:
    """``min_a a^dag(H + 2 C_H eta)a / a^dag(S + 2 C_S eta)a``."""
    if eta < 0:
        raise ValueError("eta must be >= 0")
    if km.factor is not None:
        return ritz_min(km, eta, shift_scale=2.0)[0]
    if eta == 0:
        return solve_exact(km).e_min
    eye = np.eye(km.d)
    return _reduced_min(km.H + 2 * km.C_H * eta * eye, km.S + 2 * km.C_S * eta * eye, _floor_rule)[0]


def rayleigh_quotient(H: np.ndarray, S: np.ndarray, a: np.ndarray) -> float:
    return float(np.real(a.conj() @ H @ a) / np.real(a.conj() @ S @ a))
