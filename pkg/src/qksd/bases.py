"""Krylov basis families, parameter selection and exact Krylov matrices.

Every matrix element is a spectral sum ``sum_m w_m f_k*(x_m) g(E_m) f_q(x_m)``;
no operator functions are ever formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy import integrate

from .exact import SpectralDecomposition

Family = Literal["P", "CP", "GP", "IP", "ITE", "RTE", "F"]
FAMILIES: tuple[str, ...] = ("P", "CP", "GP", "IP", "ITE", "RTE", "F")

STRUCTURE = {
    "P": "real_hankel",
    "GP": "real_hankel",
    "IP": "real_hankel",
    "ITE": "real_hankel",
    "CP": "real_symmetric",
    "F": "real_symmetric",
    "RTE": "hermitian_toeplitz",
}

TAU_FAMILIES = ("GP", "ITE", "F")
GRID_POINTS = 100
E0_UNCERTAINTY = 0.1
ROOT_RTOL = 1e-10
ROOT_MAXITER = 200
# resolution of the eps_K ranking in grid searches, matched to the 1e-9 admission cutoff
GRID_RANK_FLOOR = 1e-10


class SingularBasisError(ValueError):
    """The basis function is singular on the spectrum (IP with x = 0)."""


@dataclass(frozen=True)
class BasisSpec:
    family: Family
    d: int
    E_0: float = 0.0
    tau: float | None = None
    delta_t: float | None = None
    delta_E: float | None = None
    h_tot: float | None = None
    rescale: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown basis family {self.family!r}")
        if self.d < 1:
            raise ValueError("subspace dimension must be >= 1")
        if self.family in TAU_FAMILIES and self.tau is None:
            raise ValueError(f"{self.family} basis requires tau")
        if self.family == "RTE" and self.delta_t is None:
            raise ValueError("RTE basis requires delta_t")
        if self.family == "F" and self.delta_E is None:
            raise ValueError("F basis requires delta_E")
        if self.family == "CP" and self.h_tot is None:
            raise ValueError("CP basis requires h_tot")
        rescale = (1.0,) * self.d if self.rescale is None else tuple(float(c) for c in self.rescale)
        if len(rescale) != self.d or min(rescale) <= 0:
            raise ValueError("rescale must hold d positive factors")
        object.__setattr__(self, "rescale", rescale)

    @property
    def structure(self) -> str:
        return STRUCTURE[self.family]


def basis_values(spec: BasisSpec, energies: np.ndarray) -> np.ndarray:
    """``F[m, k-1] = f_k(E_m - E_0) / rescale[k-1]`` for all eigenvalues at once."""
    E = np.asarray(energies, dtype=float)
    x = E - spec.E_0
    d = spec.d
    ks = np.arange(d)
    fam = spec.family
    if fam == "P":
        F = x[:, None] ** ks
    elif fam == "CP":
        z = E / spec.h_tot
        F = np.empty((E.size, d))
        F[:, 0] = 1.0
        if d > 1:
            F[:, 1] = z
        for k in range(2, d):
            F[:, k] = 2 * z * F[:, k - 1] - F[:, k - 2]
    elif fam == "GP":
        F = x[:, None] ** ks * np.exp(-0.5 * (x * spec.tau) ** 2)[:, None]
    elif fam == "IP":
        if np.any(x == 0):
            raise SingularBasisError("inverse-power basis is singular at x = 0")
        F = (1.0 / x)[:, None] ** ks
    elif fam == "ITE":
        F = np.exp(-spec.tau * np.outer(x, ks))
    elif fam == "RTE":
        offsets = ks + 1 - (d + 1) / 2
        F = np.exp(-1j * spec.delta_t * np.outer(x, offsets))
    elif fam == "F":
        y = (x[:, None] - spec.delta_E * ks) * spec.tau
        F = np.sinc(y / np.pi)
    else:  # pragma: no cover - guarded by BasisSpec
        raise ValueError(fam)
    return F / np.asarray(spec.rescale)


def eval_f(spec: BasisSpec, k: int, x: float) -> complex:
    """Scalar ``f_k(x) / rescale[k]`` where ``x = E - E_0`` is already shifted."""
    if not 1 <= k <= spec.d:
        raise ValueError("k must lie in 1..d")
    return complex(basis_values(spec, np.array([x + spec.E_0]))[0, k - 1])


@dataclass(frozen=True)
class KrylovMatrices:
    """Noiseless or noisy pair ``(H, S)``.

    ``factor`` (rows ``sqrt(w_m) f_k(x_m)``) and ``energies`` are present only for
    exact matrices; solvers then work on the factor instead of the Gram matrix.
    """

    H: np.ndarray
    S: np.ndarray
    structure: str
    C_H: float = 1.0
    C_S: float = 1.0
    factor: np.ndarray | None = field(default=None, repr=False)
    energies: np.ndarray | None = field(default=None, repr=False)

    @property
    def d(self) -> int:
        return self.H.shape[0]

    @property
    def is_real(self) -> bool:
        return self.structure != "hermitian_toeplitz"

    def without_factor(self) -> "KrylovMatrices":
        return replace(self, factor=None, energies=None)

    def with_matrices(self, H: np.ndarray, S: np.ndarray) -> "KrylovMatrices":
        return KrylovMatrices(H, S, self.structure, self.C_H, self.C_S)


def build_matrices(spec: BasisSpec, sd: SpectralDecomposition, C_H: float | None = None, C_S: float = 1.0) -> KrylovMatrices:
    """Exact ``H_kq = <phi|f_k^dag H f_q|phi>`` and ``S_kq = <phi|f_k^dag f_q|phi>``.

    ``C_H`` defaults to ``spec.h_tot`` for the GP basis and 1 otherwise.
    """
    compact = sd.compressed()
    F = basis_values(spec, compact.energies)
    if not np.all(np.isfinite(F)):
        raise SingularBasisError(f"{spec.family} basis is not finite on the spectrum")
    B = np.sqrt(compact.weights)[:, None] * F
    if spec.family != "RTE":
        B = B.real
    S = B.conj().T @ B
    H = B.conj().T @ (compact.energies[:, None] * B)
    S = 0.5 * (S + S.conj().T)
    H = 0.5 * (H + H.conj().T)
    if C_H is None:
        C_H = spec.h_tot if (spec.family == "GP" and spec.h_tot is not None) else 1.0
    return KrylovMatrices(H, S, spec.structure, float(C_H), float(C_S), B, compact.energies)


def ritz_min(km: KrylovMatrices, eta: float = 0.0, shift_scale: float = 2.0, rank_rtol: float = 1e-12) -> tuple[float, np.ndarray]:
    """Minimum of ``a^dag(H + s C_H eta)a / a^dag(S + s C_S eta)a`` from the factor.

    With ``eta > 0`` the augmented factor ``[B; sqrt(s C_S eta) I]`` has full
    column rank and a thin QR reduces the pencil to an orthonormal Rayleigh-Ritz
    problem. At ``eta = 0`` an SVD drops directions with ``sigma < rank_rtol * sigma_max``.
    Returns ``(value, a)`` with ``a`` normalised to unit 2-norm.
    """
    B, E = km.factor, km.energies
    if B is None:
        raise ValueError("exact Rayleigh-Ritz needs the spectral factor")
    d = B.shape[1]
    cS = shift_scale * km.C_S * eta
    cH = shift_scale * km.C_H * eta
    if eta > 0:
        aug = np.vstack([B, math.sqrt(cS) * np.eye(d)])
        Q, R = np.linalg.qr(aug)
        top, bot = Q[: B.shape[0]], Q[B.shape[0]:]
        M = top.conj().T @ (E[:, None] * top) + (cH / cS) * (bot.conj().T @ bot)
        vals, vecs = np.linalg.eigh(0.5 * (M + M.conj().T))
        a = np.linalg.solve(R, vecs[:, 0])
    else:
        U, s, Vh = np.linalg.svd(B, full_matrices=False)
        keep = s > rank_rtol * s[0]
        if not np.any(keep):
            raise np.linalg.LinAlgError("Krylov factor has no retained directions")
        Ur = U[:, keep]
        M = Ur.conj().T @ (E[:, None] * Ur)
        vals, vecs = np.linalg.eigh(0.5 * (M + M.conj().T))
        a = Vh[keep].conj().T @ (vecs[:, 0] / s[keep])
    return float(vals[0]), a / np.linalg.norm(a)


def subspace_error(km: KrylovMatrices, E_g: float, floor: float = 1e-12) -> float:
    """``E_min - E_g`` of the noiseless pencil.

    Uses the spectral factor when present; otherwise projects out eigenvalues of
    ``S`` below ``floor * max`` and solves the reduced Hermitian problem.
    """
    if km.factor is not None:
        e_min, _ = ritz_min(km)
        return e_min - E_g
    s, V = np.linalg.eigh(km.S)
    keep = s > floor * s[-1]
    if s[-1] <= 0 or not np.any(keep):
        raise np.linalg.LinAlgError("overlap matrix is singular")
    W = V[:, keep] / np.sqrt(s[keep])
    M = W.conj().T @ km.H @ W
    return float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0]) - E_g


# --- parameter selection -------------------------------------------------------------


def table_spec(family: Family, sd: SpectralDecomposition, d: int, h_tot: float, **params) -> BasisSpec:
    """Basis with the default energy shift of each family (``E_0`` overridable)."""
    E_g = sd.ground_energy
    E0 = {"P": E_g + 1.0, "CP": 0.0, "GP": E_g, "IP": E_g - 1.0, "ITE": E_g, "RTE": E_g, "F": E_g}[family]
    params.setdefault("E_0", E0)
    return BasisSpec(family, d, h_tot=h_tot, **params)


def power_projector_error(sd: SpectralDecomposition, d: int) -> float:
    """``H_dd / S_dd - E_g`` of the P basis with ``E_0 = E_g + 1``."""
    sd = sd.compressed()
    x = sd.energies - (sd.ground_energy + 1.0)
    p = sd.weights * x ** (2 * (d - 1))
    return float(np.sum(p * sd.energies) / np.sum(p) - sd.ground_energy)


def filter_error(family: str, sd: SpectralDecomposition, d: int, tau: float) -> float:
    """Energy error of the GP/F filter ``f_1`` or the ITE projector ``f_d`` at ``E_0 = E_g``."""
    sd = sd.compressed()
    x = sd.energies - sd.ground_energy
    if family == "GP":
        logw = -((x * tau) ** 2)
        p = sd.weights * np.exp(logw)
    elif family == "F":
        p = sd.weights * np.sinc(x * tau / np.pi) ** 2
    elif family == "ITE":
        p = sd.weights * np.exp(-2.0 * tau * (d - 1) * x)
    else:
        raise ValueError(f"{family} has no tau")
    return float(np.sum(p * x) / np.sum(p))


def tau_bounds(d: int, eps0: float = E0_UNCERTAINTY) -> tuple[float, float]:
    """Admissible GP range ``sqrt((d-1)/e) < tau <= sqrt(d-1)/eps0``."""
    lo = math.sqrt((d - 1) / math.e) * (1 + 1e-6)
    hi = math.sqrt(d - 1) / eps0
    return lo, hi


@dataclass(frozen=True)
class TauChoice:
    tau: float
    degenerate: bool = False
    clipped: bool = False


def select_tau(family: str, sd: SpectralDecomposition, d: int, eps_B: float | None = None, eps0: float = E0_UNCERTAINTY) -> TauChoice:
    """Match the filter (GP, F) or projector (ITE) error to the power projector's."""
    if family not in TAU_FAMILIES:
        raise ValueError(f"{family} has no tau parameter")
    if eps_B is None:
        eps_B = power_projector_error(sd, d)
    lo_bound, hi_bound = tau_bounds(max(d, 2), eps0)
    if eps_B <= 0:
        return TauChoice(lo_bound, degenerate=True)

    def g(tau):
        return filter_error(family, sd, d, tau) - eps_B

    lo, hi = 1e-3, 1.0
    if g(lo) <= 0:
        tau = lo
    else:
        while g(hi) > 0:
            lo, hi = hi, 2 * hi
            if hi > 1e12:
                raise RuntimeError("could not bracket the tau equation")
        for _ in range(ROOT_MAXITER):
            mid = 0.5 * (lo + hi)
            if g(mid) > 0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= ROOT_RTOL * hi:
                break
        tau = 0.5 * (lo + hi)
    if family == "GP" and d > 1:
        clipped = min(max(tau, lo_bound), hi_bound)
        return TauChoice(clipped, clipped=clipped != tau)
    return TauChoice(tau)


def rte_grid() -> np.ndarray:
    return np.arange(1, GRID_POINTS + 1) * (2 * math.pi / GRID_POINTS)


def filter_grid(d: int) -> np.ndarray:
    return np.arange(1, GRID_POINTS + 1) * (2.0 / (GRID_POINTS * d))


def grid_search_param(family: str, sd: SpectralDecomposition, d: int, h_tot: float = 1.0, tau: float | None = None, floor: float | None = GRID_RANK_FLOOR) -> tuple[float, float]:
    """Grid-searched ``delta_t`` (RTE) or ``delta_E`` (F) minimising the subspace error.

    Each candidate is ranked by the error of the floored reduction (directions of
    ``S`` below ``floor * max`` removed), i.e. at the resolution of the solver that
    will consume the matrices. ``floor=None`` ranks by the exact factor route.
    Returns ``(parameter, eps_K)``; ties go to the smaller parameter.
    """
    E_g = sd.ground_energy
    sd = sd.compressed()
    if family == "RTE":
        grid = rte_grid()
        make = lambda v: table_spec("RTE", sd, d, h_tot, delta_t=float(v))
    elif family == "F":
        if tau is None:
            tau = select_tau("F", sd, d).tau
        grid = filter_grid(d)
        make = lambda v: table_spec("F", sd, d, h_tot, tau=tau, delta_E=float(v))
    else:
        raise ValueError(f"{family} has no grid-searched parameter")
    def score(v):
        km = build_matrices(make(v), sd)
        if floor is None:
            return subspace_error(km, E_g)
        return subspace_error(km.without_factor(), E_g, floor)

    errors = np.array([score(v) for v in grid])
    i = int(np.argmin(errors))
    return float(grid[i]), float(errors[i])


# --- Gaussian-power cost integrals --------------------------------------------------------


def hermite(n: int, u):
    """Physicists' Hermite polynomial by ``H_{n+1} = 2u H_n - 2n H_{n-1}``."""
    if n < 0:
        raise ValueError("Hermite degree must be >= 0")
    u = np.asarray(u, dtype=float)
    h_prev, h = np.ones_like(u), 2 * u
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    for m in range(1, n):
        h_prev, h = h, 2 * u * h - 2 * m * h_prev
    return h if h.ndim else float(h)


def lor_cost(dt, h_tot: float):
    """One-step leading-order-rotation cost ``sqrt(1+y^2) + e^y - (1+y)``, ``y = h_tot |dt|``."""
    y = h_tot * np.abs(dt)
    return np.sqrt(1 + y * y) + np.expm1(y) - y


def log_lor_cost(dt, h_tot: float):
    y = h_tot * np.abs(dt)
    # sqrt(1+y^2) - 1 + (e^y - 1 - y), accurate for small y
    small = np.hypot(1.0, y) - 1.0
    tail = np.expm1(y) - y
    return np.log1p(small + tail)


def min_depth(tau: float, h_tot: float) -> int:
    """``N = ceil(4 e h_tot^2 tau^2)``, the depth at which chi = 1/8."""
    return int(math.ceil(4 * math.e * h_tot**2 * tau**2))


def _gaussian_power_scale(k: int, tau: float) -> float:
    return 1.0 / (2 ** ((k - 1) / 2) * tau ** (k - 1))


def _hermite_breaks(k: int) -> np.ndarray:
    """Non-negative roots of ``H_{k-1}(u / sqrt(2))`` in the variable ``u = t / tau``."""
    if k <= 1:
        return np.array([])
    coeffs = np.zeros(k)
    coeffs[-1] = 1.0
    roots = np.polynomial.hermite.hermroots(coeffs).real * math.sqrt(2)
    return np.sort(roots[roots > 1e-12])


def _cutoff(weight, start: float = 10.0, rel: float = 1e-18) -> tuple[float, float]:
    """Upper limit where ``weight`` drops below ``rel`` times its peak, and that peak."""
    grid = np.linspace(0, start, 2001)
    peak = float(np.max(weight(grid)))
    u = start
    while weight(np.array([u]))[0] > rel * peak:
        u *= 1.25
    return u, peak


def cost_integrand(k: int, tau: float, h_tot: float, N: int | None, chi: float | None = None):
    """Return ``p(u)`` with ``c_k = scale * 2 * int_0^inf p(u) du`` in ``u = t / tau``.

    ``N`` selects the exact step cost ``[c(t/N)]^N``; ``chi`` the bound ``e^{chi u^2}``.
    """
    norm = 1 / math.sqrt(2 * math.pi)

    def p(u):
        u = np.asarray(u, dtype=float)
        base = np.abs(hermite(k - 1, u / math.sqrt(2))) * norm
        if chi is not None:
            return base * np.exp(-(0.5 - chi) * u * u)
        if N is None:
            return base * np.exp(-0.5 * u * u)
        return base * np.exp(-0.5 * u * u + N * log_lor_cost(u * tau / N, h_tot))

    return p


def _integrate_even(p, k: int) -> float:
    upper, peak = _cutoff(p)
    pts = np.concatenate([[0.0], _hermite_breaks(k), [upper]])
    pts = pts[pts <= upper]
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(p, a, b, epsabs=1e-15 * peak, epsrel=1e-12, limit=200)
        total += val
    return 2 * total


def gp_cost_ck(k: int, tau: float, h_tot: float, N: int | None = None) -> float:
    """LCU cost ``c_k`` of the Gaussian-power operator at depth ``N``.

    ``N=None`` uses ``ceil(4 e h_tot^2 tau^2)``. Raises when ``chi >= 1/2``
    (``N <= e h_tot^2 tau^2``) where the Gaussian bound diverges.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if N is None:
        N = min_depth(tau, h_tot)
    if N < 1:
        raise ValueError("N must be >= 1")
    if N <= math.e * h_tot**2 * tau**2:
        raise ValueError("depth N too small: chi >= 1/2 and the cost bound diverges")
    return _gaussian_power_scale(k, tau) * _integrate_even(cost_integrand(k, tau, h_tot, N), k)


def gp_cost_bound(k: int, tau: float, chi: float = 0.125) -> float:
    """Upper bound ``c_k^ub`` with ``[c(t/N)]^N`` replaced by ``exp(chi t^2 / tau^2)``."""
    if not 0 <= chi < 0.5:
        raise ValueError("chi must lie in [0, 1/2)")
    return _gaussian_power_scale(k, tau) * _integrate_even(cost_integrand(k, tau, 1.0, None, chi), k)


def gp_norm_bound(k: int, tau: float) -> float:
    """``((k-1)/(e tau^2))^((k-1)/2)``, the sup of ``|x^{k-1} e^{-x^2 tau^2/2}|``."""
    if k == 1:
        return 1.0
    return ((k - 1) / (math.e * tau**2)) ** ((k - 1) / 2)


@lru_cache(maxsize=8)
def _hermgauss(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.hermite.hermgauss(nodes)


def _exp_tail(z: np.ndarray, n: int) -> np.ndarray:
    """``e^{-iz}`` minus its Taylor polynomial of degree ``< n``, without cancellation for small ``z``."""
    big = np.abs(z) >= 1
    out = np.empty(z.shape, dtype=complex)
    zb = z[big]
    head = sum((-1j * zb) ** j / math.factorial(j) for j in range(n)) if n else 0
    out[big] = np.exp(-1j * zb) - head
    zs = z[~big]
    term = (-1j * zs) ** n / math.factorial(n)
    acc = np.zeros(zs.shape, dtype=complex)
    for j in range(n, n + 40):
        acc += term
        term = term * (-1j * zs) / (j + 1)
    out[~big] = acc
    return out


def gp_fourier(k: int, tau: float, x: float, nodes: int = 160) -> complex:
    """Quadrature of the real-time integral representation of ``x^{k-1} e^{-x^2 tau^2/2}``.

    Integrates ``i^{k-1} 2^{-(k-1)/2} tau^{-(k-1)} H_{k-1}(t/(sqrt2 tau)) g_tau(t) e^{-ixt}``
    over ``t``. With ``v = t/(sqrt2 tau)`` the Gaussian becomes the Hermite weight
    ``e^{-v^2}`` and the remaining factor ``H_{k-1}(v) e^{-i sqrt2 x tau v}`` is entire,
    so Gauss-Hermite nodes converge geometrically. For small ``x tau`` the Taylor
    head of the exponential, which the rule integrates to exactly zero against
    ``H_{k-1}``, is removed first so the sum does not cancel.
    """
    n = k - 1
    v, w = _hermgauss(nodes)
    b = math.sqrt(2) * x * tau
    if abs(b) < 1:
        phase = _exp_tail(b * v, n)
    else:
        phase = np.exp(-1j * b * v)
    integral = np.sum(w * hermite(n, v) * phase) / math.sqrt(math.pi)
    return complex((1j) ** n * _gaussian_power_scale(k, tau) * integral)


def gp_rescale(d: int, tau: float, h_tot: float, N: int | None = None) -> tuple[float, ...]:
    """Costs ``(c_1, ..., c_d)`` used to form the rescaled basis ``f_k / c_k``."""
    if N is None:
        N = min_depth(tau, h_tot)
    return tuple(gp_cost_ck(k, tau, h_tot, N) for k in range(1, d + 1))
