"""Measurement-cost model: regularisation parameters, total shot counts and overheads."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .bases import KrylovMatrices, gp_cost_ck, ritz_min
from .exact import SpectralDecomposition
from .solver import min_e_prime

ProtocolKind = Literal["IM_chebyshev", "IM_hoeffding", "CM_real_hankel", "CM_real_symmetric", "CM_complex_toeplitz"]

ETA_RTOL = 1e-10
ETA_FLOOR = 1e-16
ETA_MAXITER = 200

_CM_STRUCTURE = {
    "CM_real_hankel": "real_hankel",
    "CM_real_symmetric": "real_symmetric",
    "CM_complex_toeplitz": "hermitian_toeplitz",
}


class NoSolutionError(ValueError):
    """The bound equation has no root (target error at or below the subspace error)."""


@dataclass(frozen=True)
class Protocol:
    """One row of the regularisation/cost table.

    ``gp_alternative`` switches the real-Hankel row to ``alpha = 16 ln(1/kappa)``
    and ``beta = d(2d-1)``, available for the Gaussian-power basis.
    """

    kind: ProtocolKind
    gp_alternative: bool = False

    def __post_init__(self):
        if self.kind not in ("IM_chebyshev", "IM_hoeffding", *_CM_STRUCTURE):
            raise ValueError(f"unknown protocol {self.kind!r}")
        if self.gp_alternative and self.kind != "CM_real_hankel":
            raise ValueError("the GP alternative applies to the real-Hankel row only")

    @property
    def collective(self) -> bool:
        return self.kind.startswith("CM")

    @property
    def structure(self) -> str | None:
        return _CM_STRUCTURE.get(self.kind)

    def check_structure(self, structure: str) -> None:
        if self.collective and self.structure != structure:
            raise ValueError(f"{self.kind} protocol cannot measure {structure} matrices")

    def eta(self, d: int, M: float, kappa: float) -> float:
        _check_kappa(kappa)
        if not M > 0:
            raise ValueError("M must be positive")
        if self.kind == "IM_chebyshev":
            return 2 * d * d / math.sqrt(M * kappa)
        if self.kind == "IM_hoeffding":
            return math.sqrt(2 * d * d / M * math.log(8 * d * d / kappa))
        if self.kind == "CM_complex_toeplitz":
            return math.sqrt(2 * (2 * d - 1) / M * math.log(4 * d / kappa))
        return math.sqrt(2 * d / M * math.log(4 * d / kappa))

    def alpha(self, kappa: float) -> float:
        _check_kappa(kappa)
        if self.kind == "IM_chebyshev":
            return 256 / kappa
        if self.kind == "IM_hoeffding":
            return 128 * math.log(1 / kappa)
        if self.kind == "CM_real_symmetric":
            return 32 * math.log(1 / kappa)
        if self.gp_alternative:
            return 16 * math.log(1 / kappa)
        return 64 * math.log(1 / kappa)

    def beta(self, d: int) -> float:
        if self.kind == "IM_chebyshev":
            return float(d**6)
        if self.kind == "IM_hoeffding":
            return float(d**4)
        if self.kind == "CM_real_hankel":
            return float(d * (2 * d - 1))
        if self.kind == "CM_real_symmetric":
            return float(d * d * (d + 1))
        return float((2 * d - 1) ** 2)


def default_protocol(structure: str) -> Protocol:
    """Collective-measurement row matching a matrix structure."""
    for kind, s in _CM_STRUCTURE.items():
        if s == structure:
            return Protocol(kind)
    raise ValueError(f"no collective protocol for {structure}")


def _check_kappa(kappa: float) -> None:
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")


def eta_for(protocol: Protocol, d: int, M: float, kappa: float) -> float:
    return protocol.eta(d, M, kappa)


def m_for_eta(protocol: Protocol, d: int, eta: float, kappa: float) -> float:
    """Invert ``eta_for`` in ``M``: the shot count at which the protocol yields ``eta``."""
    ref = protocol.eta(d, 1.0, kappa)
    return (ref / eta) ** 2


def m_tot(protocol: Protocol, d: int, kappa: float, eta: float) -> float:
    """Total shots ``alpha(kappa) beta(d) / (16 eta^2)``."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    return protocol.alpha(kappa) * protocol.beta(d) / (16 * eta * eta)


def gamma(p_g: float, epsilon: float, h_norm: float, eta: float) -> float:
    """Overhead ``p_g^2 eps^2 / (16 ||H||^2 eta^2)``; equals 1 for an ideal projector bound."""
    if min(p_g, epsilon, h_norm, eta) <= 0:
        raise ValueError("gamma needs positive arguments")
    return (p_g * epsilon) ** 2 / (16 * h_norm**2 * eta**2)


def subspace_min(km: KrylovMatrices) -> float:
    return min_e_prime(km, 0.0)


def solve_eta(km: KrylovMatrices, E_g: float, epsilon: float) -> float:
    """Root of ``min E'(eta) = E_g + epsilon`` by bracketed bisection.

    The left side increases strictly on its negative branch, so the root is unique.
    """
    target = E_g + epsilon
    if target >= 0:
        raise ValueError("bound equation needs E_g + epsilon < 0")
    base = min_e_prime(km, 0.0)
    if base >= target:
        raise NoSolutionError(f"epsilon={epsilon:.3e} does not exceed the subspace error {base - E_g:.3e}")
    f = lambda eta: min_e_prime(km, eta) - target
    hi = 1e-3
    while f(hi) < 0:
        hi *= 2
        if hi > 1e12:
            raise NoSolutionError("could not bracket the bound equation")
    lo = hi / 2
    while lo > ETA_FLOOR and f(lo) > 0:
        hi, lo = lo, lo / 2
    if lo <= ETA_FLOOR:
        lo = 0.0
    for _ in range(ETA_MAXITER):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= ETA_RTOL * hi:
            break
    return 0.5 * (lo + hi)


def small_eta_u(km: KrylovMatrices, E_g: float, epsilon: float, h_norm: float = 1.0) -> tuple[float, float, np.ndarray]:
    """Return ``(u, u_bound, a)`` for the first-order expansion of ``E'`` around ``eta = 0``."""
    e_min, a = ritz_min(km) if km.factor is not None else _unshifted_min(km)
    num = abs(km.C_H - km.C_S * e_min)
    u = epsilon * num / (2 * h_norm * abs(E_g + epsilon - e_min))
    eps_k = e_min - E_g
    u_bound = (km.C_H + h_norm * km.C_S) * epsilon / (2 * h_norm * (epsilon - eps_k))
    return u, u_bound, a


def _unshifted_min(km: KrylovMatrices):
    from .solver import solve_exact

    sol = solve_exact(km)
    return sol.e_min, sol.coefficients


def gamma_small_eta(km: KrylovMatrices, E_g: float, epsilon: float, p_g: float, h_norm: float = 1.0) -> float:
    """``u^2 (p_g a^dag a / a^dag S a)^2`` at the unshifted minimiser ``a``."""
    u, _, a = small_eta_u(km, E_g, epsilon, h_norm)
    if km.factor is not None:
        s_aa = float(np.linalg.norm(km.factor @ a) ** 2)
    else:
        s_aa = float(np.real(a.conj() @ km.S @ a))
    aa = float(np.real(a.conj() @ a))
    return u * u * (p_g * aa / s_aa) ** 2


@dataclass(frozen=True)
class CostReport:
    eta: float
    epsilon: float
    kappa: float
    alpha: float
    beta: float
    m_tot: float
    gamma: float
    p_g: float
    spectral_norm: float = 1.0
    factor1: float = 0.0
    protocol: str = ""

    def identity_residuals(self) -> tuple[float, float]:
        """Relative residuals of ``M = alpha beta / 16 eta^2`` and ``M = factor1 beta gamma``."""
        m1 = self.alpha * self.beta / (16 * self.eta**2)
        m2 = self.factor1 * self.beta * self.gamma
        return abs(m1 - self.m_tot) / self.m_tot, abs(m2 - self.m_tot) / self.m_tot

    def consistent(self, rtol: float = 1e-9) -> bool:
        return max(self.identity_residuals()) <= rtol


def cost_report(km: KrylovMatrices, E_g: float, epsilon: float, kappa: float, p_g: float, protocol: Protocol | None = None, h_norm: float = 1.0) -> CostReport:
    """Solve the bound equation and bundle every cost quantity."""
    protocol = protocol or default_protocol(km.structure)
    eta = solve_eta(km, E_g, epsilon)
    d = km.d
    alpha = protocol.alpha(kappa)
    beta = protocol.beta(d)
    g = gamma(p_g, epsilon, h_norm, eta)
    f1 = alpha * h_norm**2 / (p_g * epsilon) ** 2
    return CostReport(eta, epsilon, kappa, alpha, beta, m_tot(protocol, d, kappa, eta), g, p_g, h_norm, f1, protocol.kind)


def factor_cost(report: CostReport) -> tuple[float, float, float]:
    """``(alpha ||H||^2 / (p_g eps)^2, beta, gamma)`` whose product is ``M_tot``."""
    factor1 = report.alpha * report.spectral_norm**2 / (report.p_g * report.epsilon) ** 2
    return factor1, report.beta, report.gamma


# --- Chebyshev projector composition --------------------------------------------------


def chebyshev_t(n: int, z):
    """``T_n(z)``: cosine form inside [-1, 1], ``sgn(z)^n cosh(n arccosh|z|)`` outside."""
    z = np.asarray(z, dtype=float)
    inside = np.abs(z) <= 1
    out = np.empty_like(z)
    out[inside] = np.cos(n * np.arccos(z[inside]))
    zo = z[~inside]
    out[~inside] = np.sign(zo) ** n * np.cosh(n * np.arccosh(np.abs(zo)))
    return out if out.ndim else float(out)


def chebyshev_t_recurrence(n: int, z: float) -> float:
    t_prev, t = 1.0, z
    if n == 0:
        return 1.0
    for _ in range(n - 1):
        t_prev, t = t, 2 * z * t - t_prev
    return t


def chebyshev_power_coefficients(n: int, shift: float) -> np.ndarray:
    """``b_l`` with ``T_n(1 - y + shift) = sum_l b_l y^l`` for ``y = (H - E_0)/||H||``.

    ``shift = (E_2 - E_0)/||H||``; so ``1 - z = y - shift``. Each ``b_l`` is an
    alternating factorial sum accumulated with ``math.fsum``.
    """
    if n < 0:
        raise ValueError("degree must be >= 0")
    if n == 0:
        return np.array([1.0])
    c = -shift  # (E_0 - E_2) / ||H||
    b = np.zeros(n + 1)
    for l in range(n + 1):
        terms = []
        for m in range(l, n + 1):
            coef = (-2) ** m * math.factorial(n + m - 1) / (math.factorial(n - m) * math.factorial(2 * m))
            terms.append(n * coef * math.comb(m, l) * c ** (m - l))
        b[l] = math.fsum(terms)
    return b


@dataclass(frozen=True)
class ProjectorReport:
    n: int
    z1: float
    t_n_z1: float
    b: np.ndarray
    a: np.ndarray
    c: np.ndarray
    omega_norm: float
    omega_bound: float
    gamma: float
    gamma_bound: float
    projector_error: float
    filter_error: float

    def b_bound_ok(self) -> bool:
        """Check ``|b_l| <= n^l T_n(z1)``; this fails for small gaps since ``|b_1| = T_n'(z1) ~ n^2``."""
        bound = np.array([self.n**l * self.t_n_z1 for l in range(self.n + 1)])
        return bool(np.all(np.abs(self.b) <= bound * (1 + 1e-12)))

    def b_bound_corrected(self) -> np.ndarray:
        """Valid majorant ``(n / (z1 - 1))^l T_n(z1)`` of ``|b_l|``."""
        shift = self.z1 - 1
        return np.array([(self.n / shift) ** l * self.t_n_z1 for l in range(self.n + 1)])

    def b_bound_corrected_ok(self) -> bool:
        return bool(np.all(np.abs(self.b) <= self.b_bound_corrected() * (1 + 1e-12)))


def compose_projector(n: int, sd: SpectralDecomposition, tau: float, h_tot: float, h_norm: float = 1.0, N: int | None = None) -> ProjectorReport:
    """Chebyshev projector times the Gaussian filter, expanded in the Gaussian-power basis with ``E_0 = E_g``."""
    if n < 0:
        raise ValueError("degree must be >= 0")
    if n > 30:
        raise ValueError("degree capped at 30: factorial sums lose accuracy beyond")
    delta = sd.gap
    if not delta > 0:
        raise ValueError("projector needs a finite gap")
    ratio = n**3 / (math.e * h_norm**2 * tau**2)
    if ratio >= 1:
        raise ValueError("tau too small: the overhead bound needs tau^2 > n^3 / (e ||H||^2)")
    E_g = sd.ground_energy
    z1 = 1 + delta / h_norm
    t1 = float(chebyshev_t(n, z1))
    b = chebyshev_power_coefficients(n, delta / h_norm)
    c = np.array([gp_cost_ck(k, tau, h_tot, N) for k in range(1, n + 2)])
    a = c * b / (t1 * h_norm ** np.arange(n + 1))

    E = sd.energies
    excited = ~sd.ground_mask
    z = 1 - (E - (E_g + delta)) / h_norm
    omega = float(np.max(np.abs(chebyshev_t(n, z[excited])))) / t1 if np.any(excited) else 0.0

    x = E - E_g
    gauss = np.exp(-0.5 * (x * tau) ** 2)
    proj = chebyshev_t(n, z) / t1 * gauss
    w = sd.weights

    def error(op):
        p = w * op**2
        return float(np.sum(p * x) / np.sum(p))

    aa = float(a @ a)
    return ProjectorReport(
        n=n,
        z1=z1,
        t_n_z1=t1,
        b=b,
        a=a,
        c=c,
        omega_norm=omega,
        omega_bound=2 / (z1**n + z1 ** (-n)),
        gamma=aa * aa,
        gamma_bound=4 / (1 - ratio),
        projector_error=error(proj),
        filter_error=error(gauss),
    )
