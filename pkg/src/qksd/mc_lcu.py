"""Monte Carlo evaluation of LCU expressions with simulated Hadamard tests.

Every sampled term carries its importance-weighted coefficient ``v / P(v)``, so
its magnitude is the cost factor of the sampled expression and only its phase
enters the estimators. Real-time evolution uses the leading-order-rotation
decomposition of each step; Gaussian-power basis operators add a time drawn from
the cost-weighted density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .bases import BasisSpec, cost_integrand, gp_cost_ck, hermite, lor_cost, min_depth, _cutoff
from .models import ReferenceState
from .pauli import PauliString, PauliSum

TIME_GRID = 4096
UNITARITY_TOL = 1e-9


@dataclass(frozen=True)
class Factor:
    """``exp(-i angle P)`` when ``angle`` is set, otherwise the bare string ``P``."""

    pauli: PauliString
    angle: float | None = None

    def apply(self, state: np.ndarray) -> np.ndarray:
        if self.angle is None:
            return self.pauli.apply(state)
        return math.cos(self.angle) * state - 1j * math.sin(self.angle) * self.pauli.apply(state)


@dataclass(frozen=True)
class LcuTerm:
    """One sampled term ``coefficient * F_1 F_2 ... F_n``."""

    coefficient: complex
    factors: tuple[Factor, ...] = ()

    def apply(self, state: np.ndarray) -> np.ndarray:
        out = np.asarray(state, dtype=complex)
        for f in reversed(self.factors):
            out = f.apply(out)
        return out

    def matrix(self, n_qubits: int) -> np.ndarray:
        return self.apply(np.eye(1 << n_qubits, dtype=complex))


@dataclass(frozen=True)
class HadamardOutcome:
    mu_x: int
    mu_y: int
    overlap: complex


@dataclass(frozen=True)
class EntryEstimate:
    """Monte Carlo matrix entry with per-shot statistics.

    ``variance`` is the sample variance ``mean |X - mean X|^2`` of the per-shot
    variable ``X = C_A e^{i theta} (mu_x + i mu_y)``; the standard errors are those
    of the real and imaginary parts of ``value``.
    """

    value: complex
    M: int
    cost_factor: float
    variance: float
    stderr_real: float
    stderr_imag: float


def cost_c(dt, h_tot: float):
    """Per-step cost ``sqrt(1 + h_tot^2 dt^2) + e^{h_tot|dt|} - (1 + h_tot|dt|)``."""
    return lor_cost(dt, h_tot)


def lor_angle(dt: float, h_tot: float) -> float:
    return math.atan(h_tot * dt)


def lor_coefficients(h: PauliSum, dt: float) -> tuple[float, np.ndarray]:
    """Rotation angle ``phi`` and the leading-part coefficients ``beta_j``."""
    phi = lor_angle(dt, h.h_tot)
    absh = np.abs(h.coefficients)
    if phi == 0:
        return 0.0, absh / h.h_tot
    return phi, absh * dt / math.sin(phi)


def branch_probabilities(dt, h_tot: float):
    """``(P_L, P_T)`` of the leading rotation part and the Taylor tail."""
    x = h_tot * np.abs(dt)
    c = cost_c(dt, h_tot)
    p_l = np.sqrt(1 + x * x) / c
    return p_l, 1 - p_l


def _tail_order(x: float, rng: np.random.Generator) -> int:
    """Poisson(``x``) order conditioned on ``k >= 2``, by inverse CDF.

    Equivalent in law to rejecting ``k < 2``, without an attempt budget at small ``x``.
    """
    # weights proportional to x^(k-2) 2 / k!
    r = rng.random()
    total = 2 * (math.expm1(x) - x) / (x * x) if x > 1e-4 else 1 + x / 3 + x * x / 12
    term, k, acc = 1.0, 2, 0.0
    while True:
        acc += term / total
        if r < acc or term < 1e-300:
            return k
        k += 1
        term *= x / k


class _TermTable:
    """Cached sampling data of a Pauli sum."""

    def __init__(self, h: PauliSum):
        if len(h) == 0 or h.h_tot == 0:
            raise ValueError("Hamiltonian has no terms")
        self.h = h
        self.h_tot = h.h_tot
        self.strings = h.strings
        self.signs = np.sign(h.coefficients)
        self.cumulative = np.cumsum(np.abs(h.coefficients)) / h.h_tot
        self.cumulative[-1] = 1.0

    def draw(self, rng: np.random.Generator, size=None):
        return np.searchsorted(self.cumulative, rng.random(size), side="right")


def _rte_batch(table: _TermTable, N: int, t: np.ndarray, states: np.ndarray | None, rng: np.random.Generator, record: list | None = None) -> np.ndarray:
    """Sample ``N`` leading-order-rotation steps of ``e^{-iHt_m}`` for each column ``m``.

    Applies the sampled unitaries in place to ``states`` (columns), returns the
    coefficient of each column, and appends per-column factor lists (in operator
    order) to ``record`` when given. Steps are i.i.d., so applying each one as it
    is drawn gives the same law as the ordered product.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    M = t.size
    dt = t / N
    x = table.h_tot * dt
    c = cost_c(dt, table.h_tot)
    p_l, _ = branch_probabilities(dt, table.h_tot)
    phi = np.arctan(x)
    cphi, sphi = np.cos(phi), np.sin(phi)
    coef = c**N + 0j
    steps: list[list[list[Factor]]] | None = [[] for _ in range(M)] if record is not None else None
    for _ in range(N):
        leading = rng.random(M) < p_l
        j = table.draw(rng, M)
        cols = np.nonzero(leading)[0]
        if states is not None and cols.size:
            order = cols[np.argsort(j[cols], kind="stable")]
            js = j[order]
            bounds = np.flatnonzero(np.diff(js)) + 1
            for group in np.split(order, bounds):
                jj = j[group[0]]
                sub = states[:, group]
                angle_sin = table.signs[jj] * sphi[group]
                states[:, group] = cphi[group] * sub - 1j * angle_sin * table.strings[jj].apply(sub)
        if steps is not None:
            for m in cols:
                steps[m].append([Factor(table.strings[j[m]], float(table.signs[j[m]] * phi[m]))])
        for m in np.nonzero(~leading)[0]:
            k = _tail_order(abs(x[m]), rng)
            picks = table.draw(rng, k)
            sgn = np.prod(table.signs[picks]) * (1 if dt[m] > 0 else -1) ** k
            coef[m] *= (-1j) ** k * sgn
            if states is not None:
                col = states[:, m]
                for jj in picks[::-1]:
                    col = table.strings[jj].apply(col)
                states[:, m] = col
            if steps is not None:
                steps[m].append([Factor(table.strings[jj]) for jj in picks])
    if record is not None:
        for per_shot in steps:
            # first drawn step acts first, so it is the rightmost factor
            record.append([f for step in reversed(per_shot) for f in step])
    return coef


def lor_sample(h: PauliSum, dt: float, rng: np.random.Generator) -> LcuTerm:
    """One importance-sampled term of ``e^{-iH dt}``."""
    return rte_sample(h, 1, dt, rng)


def rte_sample(h: PauliSum, N: int, t: float, rng: np.random.Generator) -> LcuTerm:
    """Product of ``N`` independent leading-order-rotation draws for ``e^{-iHt}``."""
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    rec: list = []
    coef = _rte_batch(_TermTable(h), N, np.array([t]), None, rng, rec)
    return LcuTerm(complex(coef[0]), tuple(rec[0]))


class GaussianPowerSampler:
    """Inverse-CDF sampler of ``p(t) ~ |H_{k-1}(t/(sqrt2 tau))| g_tau(t) c(t/N)^N``."""

    def __init__(self, k: int, tau: float, h_tot: float, N: int, points: int = TIME_GRID):
        if N < min_depth(tau, h_tot):
            raise ValueError(f"N={N} is below ceil(4 e h_tot^2 tau^2) = {min_depth(tau, h_tot)}")
        self.k, self.tau, self.h_tot, self.N = k, tau, h_tot, N
        p = cost_integrand(k, tau, h_tot, N)
        upper, _ = _cutoff(p)
        self.u = np.linspace(-upper, upper, points)
        dens = p(self.u)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(self.u))])
        self.cdf_values = cdf / cdf[-1]
        self.c_k = gp_cost_ck(k, tau, h_tot, N)

    def sample(self, rng: np.random.Generator, size=None):
        return self.tau * np.interp(rng.random(size), self.cdf_values, self.u)

    def cdf(self, t):
        return np.interp(np.asarray(t) / self.tau, self.u, self.cdf_values)

    def phase(self, t, E_0: float):
        """Unit phase of the prefactor ``i^{k-1} H_{k-1}(t/(sqrt2 tau)) e^{i E_0 t}``."""
        t = np.asarray(t, dtype=float)
        sign = np.sign(hermite(self.k - 1, t / (math.sqrt(2) * self.tau)))
        sign = np.where(sign == 0, 1.0, sign)
        return (1j) ** (self.k - 1) * sign * np.exp(1j * E_0 * t)


def _check_gp(spec: BasisSpec, k: int) -> None:
    if spec.family != "GP":
        raise ValueError("Monte Carlo basis generation is implemented for the GP basis")
    if not 1 <= k <= spec.d:
        raise ValueError("k must lie in 1..d")


def basis_gen(spec: BasisSpec, h: PauliSum, k: int, N: int, rng: np.random.Generator, sampler: GaussianPowerSampler | None = None) -> LcuTerm:
    """One sampled term of ``(H - E_0)^{k-1} e^{-(H-E_0)^2 tau^2/2}``; magnitude ``c_k``."""
    _check_gp(spec, k)
    sampler = sampler or GaussianPowerSampler(k, spec.tau, h.h_tot, N)
    t = float(sampler.sample(rng))
    term = rte_sample(h, N, t, rng)
    unit = term.coefficient / abs(term.coefficient)
    return LcuTerm(complex(sampler.c_k * sampler.phase(t, spec.E_0) * unit), term.factors)


def hadamard_test(ref: ReferenceState, term: LcuTerm, rng: np.random.Generator) -> HadamardOutcome:
    """One X-shot and one Y-shot of the Hadamard test of the term's unitary."""
    phi = ref.amplitudes
    out = term.apply(phi)
    if abs(np.linalg.norm(out) - 1.0) > UNITARITY_TOL:
        raise ValueError("sampled operator is not unitary")
    z = complex(np.vdot(phi, out))
    mu_x = 1 if rng.random() < 0.5 * (1 + z.real) else -1
    mu_y = 1 if rng.random() < 0.5 * (1 + z.imag) else -1
    return HadamardOutcome(mu_x, mu_y, z)


def _basis_batch(spec: BasisSpec, table: _TermTable, sampler: GaussianPowerSampler, phi: np.ndarray, M: int, rng: np.random.Generator):
    t = sampler.sample(rng, M)
    states = np.repeat(phi[:, None], M, axis=1).astype(complex)
    coef = _rte_batch(table, sampler.N, t, states, rng)
    return sampler.phase(t, spec.E_0) * coef / np.abs(coef), states


def estimate_entry(
    kind: Literal["H", "S"],
    spec: BasisSpec,
    k: int,
    q: int,
    h: PauliSum,
    ref: ReferenceState,
    M: int,
    N: int | None = None,
    rng: np.random.Generator | None = None,
) -> EntryEstimate:
    """Monte Carlo estimate of ``H_kq`` or ``S_kq`` of the GP basis.

    Each shot samples the two basis operators (and, for ``H``, one string
    ``sigma_j`` with probability ``|h_j|/h_tot``), runs one X-shot and one Y-shot of
    the Hadamard test on ``V_k^dag (sigma_j) V_q`` and accumulates
    ``e^{i arg(v_k^* h_j v_q)} (mu_x + i mu_y)``. The sum is scaled by ``C_A/M``
    with ``C_A = h_tot c_k c_q`` or ``c_k c_q``, then divided by the basis rescale
    factors of ``k`` and ``q``.
    """
    if kind not in ("H", "S"):
        raise ValueError("kind must be 'H' or 'S'")
    _check_gp(spec, k)
    _check_gp(spec, q)
    if M < 1:
        raise ValueError("M must be >= 1")
    rng = rng or np.random.default_rng()
    if N is None:
        N = min_depth(spec.tau, h.h_tot)
    table = _TermTable(h)
    samplers = {kk: GaussianPowerSampler(kk, spec.tau, h.h_tot, N) for kk in {k, q}}
    phi = ref.amplitudes
    ph_k, st_k = _basis_batch(spec, table, samplers[k], phi, M, rng)
    ph_q, st_q = _basis_batch(spec, table, samplers[q], phi, M, rng)
    phase = np.conj(ph_k) * ph_q
    cost = samplers[k].c_k * samplers[q].c_k
    if kind == "H":
        j = table.draw(rng, M)
        for jj in np.unique(j):
            cols = np.nonzero(j == jj)[0]
            st_q[:, cols] = table.strings[jj].apply(st_q[:, cols])
        phase = phase * table.signs[j]
        cost *= h.h_tot
    z = np.sum(np.conj(st_k) * st_q, axis=0)
    mu_x = np.where(rng.random(M) < 0.5 * (1 + z.real), 1.0, -1.0)
    mu_y = np.where(rng.random(M) < 0.5 * (1 + z.imag), 1.0, -1.0)
    scale = spec.rescale[k - 1] * spec.rescale[q - 1]
    shots = (cost / scale) * phase * (mu_x + 1j * mu_y)
    value = complex(shots.mean())
    variance = float(np.mean(np.abs(shots - value) ** 2))
    ddof = max(M - 1, 1)
    se_re = float(np.sqrt(np.var(shots.real) * M / ddof / M))
    se_im = float(np.sqrt(np.var(shots.imag) * M / ddof / M))
    return EntryEstimate(value, M, cost / scale, variance, se_re, se_im)
