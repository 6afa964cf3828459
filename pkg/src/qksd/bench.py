"""Benchmark harness: instance admission, per-family runs and the command implementations.

Every command takes a plain ``dict`` config and returns a list of row dicts; the
CLI writes them to CSV with a JSON sidecar.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Any, Callable, Iterable

import numpy as np

from .bases import (
    FAMILIES,
    BasisSpec,
    build_matrices,
    gp_rescale,
    grid_search_param,
    min_depth,
    select_tau,
    subspace_error,
    table_spec,
)
from .cost import NoSolutionError, Protocol, compose_projector, cost_report, default_protocol, m_tot, solve_eta
from .exact import SpectralDecomposition, diagonalise, spectral_norm
from .mc_lcu import estimate_entry
from .models import LatticeSpec, ReferenceState, build_model, lattice_from_config, normalise, random_graph, reference_state
from .noise import necessary_measurement
from .pauli import PauliSum

EPS_K_MIN = 1e-9
EPS_K_MAX = 1e-2
P_G_MIN = 1e-3
E0_BAND_STEP = 0.002
E0_BAND_INDICES = (-50, *range(-9, 10), 50)


@dataclass(frozen=True)
class Instance:
    model: str
    lattice: LatticeSpec
    d: int
    seed: int = 0

    @property
    def label(self) -> str:
        return f"{self.model}-{self.lattice.label}-d{self.d}"


@dataclass(frozen=True)
class PreparedModel:
    """Normalised Hamiltonian, reference state and its spectral decomposition."""

    model: str
    lattice: LatticeSpec
    h: PauliSum
    ref: ReferenceState
    sd: SpectralDecomposition
    compact: SpectralDecomposition = field(repr=False)

    @property
    def E_g(self) -> float:
        return self.sd.ground_energy

    @property
    def p_g(self) -> float:
        return self.sd.p_g

    @property
    def h_tot(self) -> float:
        return self.h.h_tot


@lru_cache(maxsize=64)
def prepare(model: str, lattice: LatticeSpec) -> PreparedModel:
    raw = build_model(model, lattice)
    h = normalise(raw, spectral_norm(raw))
    ref = reference_state(model, lattice)
    sd = diagonalise(h, ref)
    return PreparedModel(model, lattice, h, ref, sd, sd.compressed())


def power_error(pm: PreparedModel, d: int) -> float:
    """Subspace error ``eps_K`` of the power basis, the admission and target reference."""
    return subspace_error(build_matrices(table_spec("P", pm.compact, d, pm.h_tot), pm.compact), pm.E_g)


def admission(pm: PreparedModel, d: int) -> tuple[bool, str, float]:
    """``(admitted, reason, eps_K)`` for one subspace dimension."""
    if pm.p_g < P_G_MIN:
        return False, "p_g below 1e-3", math.nan
    eps_k = power_error(pm, d)
    if eps_k < EPS_K_MIN:
        return False, "eps_K below 1e-9", eps_k
    if eps_k > EPS_K_MAX:
        return False, "eps_K above 1e-2", eps_k
    return True, "", eps_k


def admitted_dims(pm: PreparedModel, d_values: Iterable[int]) -> list[tuple[int, float]]:
    out = []
    for d in d_values:
        ok, _, eps_k = admission(pm, d)
        if ok:
            out.append((d, eps_k))
    return out


def family_spec(pm: PreparedModel, family: str, d: int, E_0: float | None = None, rescale_gp: bool = True) -> BasisSpec:
    """Basis with the benchmark parameter choices of each family.

    GP takes ``E_0`` (default ``E_g``) and the matched, clipped ``tau``, and is
    rescaled by its LCU costs; ITE and F take matched ``tau``; RTE and F take the
    grid-searched step.
    """
    sd = pm.compact
    if family == "GP":
        tau = select_tau("GP", sd, d).tau
        rescale = gp_rescale(d, tau, pm.h_tot) if rescale_gp else None
        return table_spec("GP", sd, d, pm.h_tot, tau=tau, E_0=pm.E_g if E_0 is None else E_0, rescale=rescale)
    if family == "ITE":
        return table_spec("ITE", sd, d, pm.h_tot, tau=select_tau("ITE", sd, d).tau)
    if family == "RTE":
        dt, _ = grid_search_param("RTE", sd, d, pm.h_tot)
        return table_spec("RTE", sd, d, pm.h_tot, delta_t=dt)
    if family == "F":
        tau = select_tau("F", sd, d).tau
        dE, _ = grid_search_param("F", sd, d, pm.h_tot, tau=tau)
        return table_spec("F", sd, d, pm.h_tot, tau=tau, delta_E=dE)
    return table_spec(family, sd, d, pm.h_tot)


@dataclass(frozen=True)
class RunRecord:
    instance: str
    family: str
    epsilon: float
    eta: float
    gamma: float
    m_tot: float
    epsilon_K: float
    p_g: float
    E_0: float
    tau: float | None
    delta_t: float | None
    delta_E: float | None
    protocol: str
    status: str = "ok"
    identity_ok: bool = True

    def row(self) -> dict[str, Any]:
        return asdict(self)


def run_family(pm: PreparedModel, instance: Instance, spec: BasisSpec, epsilon: float, kappa: float = 0.1, protocol: Protocol | None = None) -> RunRecord:
    """Cost quantities of one family at target error ``epsilon``."""
    km = build_matrices(spec, pm.compact)
    protocol = protocol or default_protocol(spec.structure)
    eps_k = subspace_error(km, pm.E_g)
    common = dict(
        instance=instance.label,
        family=spec.family,
        epsilon=epsilon,
        epsilon_K=eps_k,
        p_g=pm.p_g,
        E_0=spec.E_0,
        tau=spec.tau,
        delta_t=spec.delta_t,
        delta_E=spec.delta_E,
        protocol=protocol.kind,
    )
    try:
        rep = cost_report(km, pm.E_g, epsilon, kappa, pm.p_g, protocol)
    except NoSolutionError:
        return RunRecord(eta=0.0, gamma=math.inf, m_tot=math.inf, status="no_solution", **common)
    return RunRecord(eta=rep.eta, gamma=rep.gamma, m_tot=rep.m_tot, identity_ok=rep.consistent(), **common)


# --- configuration helpers ------------------------------------------------------------


def _lattice(cfg: dict) -> LatticeSpec:
    return lattice_from_config(cfg)


def _families(cfg: dict) -> list[str]:
    fams = cfg.get("families", list(FAMILIES))
    for f in fams:
        if f not in FAMILIES:
            raise ValueError(f"unknown family {f!r}")
    return list(fams)


def _pmap(fn: Callable, items: list, threads: int) -> list:
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, items))


def epsilon_grid(cfg: dict, eps_k: float, E_g: float) -> np.ndarray:
    """``epsilon`` values from ``{"epsilons": [...]}`` or ``{"eps_factors": {min, max, num}}`` times ``eps_K``.

    Targets with ``E_g + epsilon >= 0`` are dropped: the bound equation needs a negative target.
    """
    if "epsilons" in cfg:
        eps = np.asarray(cfg["epsilons"], dtype=float)
    else:
        g = cfg.get("eps_factors", {"min": 1.1, "max": 1e4, "num": 25})
        eps = eps_k * np.geomspace(g["min"], g["max"], int(g["num"]))
    return eps[E_g + eps < 0]


def _instance_header(cfg: dict) -> tuple[PreparedModel, Instance, float]:
    pm = prepare(cfg["model"], _lattice(cfg["lattice"]))
    d = int(cfg["d"])
    ok, reason, eps_k = admission(pm, d)
    if not ok and not cfg.get("force", False):
        raise InadmissibleInstance(f"{cfg['model']} {pm.lattice.label} d={d}: {reason}")
    return pm, Instance(cfg["model"], pm.lattice, d, int(cfg.get("seed", 0))), eps_k


class InadmissibleInstance(ValueError):
    pass


# --- commands -------------------------------------------------------------------------


def cmd_curve(cfg: dict, threads: int = 1, seed: int = 0) -> list[dict]:
    """``(epsilon, gamma)`` rows per family; GP also over the ``E_0`` band."""
    try:
        pm, inst, eps_k = _instance_header(cfg)
    except InadmissibleInstance as exc:
        return [{"instance": "", "status": f"skipped: {exc}", "identity_ok": True}]
    kappa = float(cfg.get("kappa", 0.1))
    eps = epsilon_grid(cfg, eps_k, pm.E_g)
    jobs: list[tuple[str, BasisSpec, float]] = []
    for fam in _families(cfg):
        if fam == "GP":
            offsets = [0.0] + [i * E0_BAND_STEP for i in E0_BAND_INDICES if cfg.get("gp_band", True) and i != 0]
            for off in offsets:
                jobs.append(("GP" if off == 0 else "GP_band", family_spec(pm, "GP", inst.d, pm.E_g + off), off))
        else:
            jobs.append((fam, family_spec(pm, fam, inst.d), 0.0))

    def run(job):
        name, spec, off = job
        return [dict(run_family(pm, inst, spec, float(e), kappa).row(), variant=name, E0_offset=off) for e in eps]

    return [r for rows in _pmap(run, jobs, threads) for r in rows]


def corpus(cfg: dict, seed: int) -> list[tuple[PreparedModel, int, float]]:
    """Admitted ``(model, d, eps_K)`` triples of the distribution corpus."""
    d_lo, d_hi = cfg.get("d_range", [2, 30])
    out = []
    for entry in cfg.get("instances", []):
        pm = prepare(entry["model"], _lattice(entry["lattice"]))
        out.extend((pm, d, e) for d, e in admitted_dims(pm, range(d_lo, d_hi + 1)))
    rg = cfg.get("random_graphs")
    if rg:
        rng = np.random.default_rng([seed, 1])
        for model in rg.get("models", ["heisenberg", "hubbard"]):
            size = int(rg.get("sizes", {}).get(model, 10 if model == "heisenberg" else 5))
            for g in range(int(rg.get("count", 10))):
                pm = prepare(model, random_graph(size, int(rng.integers(2**31))))
                d = int(rng.integers(d_lo, d_hi + 1))
                ok, _, eps_k = admission(pm, d)
                if ok:
                    out.append((pm, d, eps_k))
    return out


def cmd_distribution(cfg: dict, threads: int = 1, seed: int = 0) -> list[dict]:
    """Per-instance, per-family ``gamma`` at ``epsilon = 2 eps_K``; GP with random ``E_0``."""
    kappa = float(cfg.get("kappa", 0.1))
    eps0 = float(cfg.get("e0_uncertainty", 0.1))
    items = corpus(cfg, seed)
    e0_rng = np.random.default_rng([seed, 2])
    offsets = e0_rng.uniform(-eps0, eps0, len(items))
    fams = _families(cfg)

    def run(i):
        pm, d, eps_k = items[i]
        inst = Instance(pm.model, pm.lattice, d, seed)
        rows = []
        for fam in fams:
            E_0 = pm.E_g + offsets[i] if fam == "GP" else None
            rec = run_family(pm, inst, family_spec(pm, fam, d, E_0), 2 * eps_k, kappa)
            rows.append(rec.row())
        return rows

    return [r for rows in _pmap(run, list(range(len(items))), threads) for r in rows]


def summarise_distribution(rows: list[dict]) -> dict[str, dict[str, float]]:
    """Median ``gamma``, fraction ``<= 100`` and fraction ``>= 1e4`` per family."""
    out = {}
    for fam in sorted({r["family"] for r in rows}):
        g = np.array([r["gamma"] for r in rows if r["family"] == fam], dtype=float)
        out[fam] = {
            "n": int(g.size),
            "median": float(np.median(g)),
            "frac_le_100": float(np.mean(g <= 100)),
            "frac_ge_1e4": float(np.mean(g >= 1e4)),
        }
    return out


def cmd_cost(cfg: dict, threads: int = 1, seed: int = 0) -> list[dict]:
    """Cost reports for each family and protocol at ``epsilon = eps_factor * eps_K``."""
    pm, inst, eps_k = _instance_header(cfg)
    kappa = float(cfg.get("kappa", 0.1))
    epsilon = float(cfg.get("epsilon", cfg.get("eps_factor", 2.0) * eps_k))
    rows = []
    for fam in _families(cfg):
        spec = family_spec(pm, fam, inst.d)
        kinds = cfg.get("protocols", {}).get(fam)
        protocols = [Protocol(k) for k in kinds] if kinds else [default_protocol(spec.structure)]
        for prot in protocols:
            try:
                prot.check_structure(spec.structure)
            except ValueError as exc:
                rows.append({"instance": inst.label, "family": fam, "protocol": prot.kind, "status": str(exc), "identity_ok": True})
                continue
            rec = run_family(pm, inst, spec, epsilon, kappa, prot)
            rows.append(dict(rec.row(), alpha=prot.alpha(kappa), beta=prot.beta(inst.d)))
    return rows


def cmd_noise(cfg: dict, threads: int = 1, seed: int = 0) -> list[dict]:
    """Necessary measurement numbers per family under each solver rule."""
    pm, inst, eps_k = _instance_header(cfg)
    kappa = float(cfg.get("kappa", 0.1))
    epsilon = float(cfg.get("epsilon", cfg.get("eps_factor", 2.0) * eps_k))
    trials = int(cfg.get("trials", 100))
    rules = cfg.get("rules", ["regularised", "thresholded"])
    m_max = float(cfg.get("m_max", 1e30))
    jobs = [(fam, rule) for fam in _families(cfg) for rule in rules]
    specs = {fam: family_spec(pm, fam, inst.d) for fam in _families(cfg)}

    def run(job):
        fam, rule = job
        spec = specs[fam]
        km = build_matrices(spec, pm.compact)
        res = necessary_measurement(km, default_protocol(spec.structure), pm.E_g, epsilon, kappa, trials, rule, seed=seed, m_max=m_max)
        return {
            "instance": inst.label,
            "family": fam,
            "rule": rule,
            "epsilon": epsilon,
            "m_necessary": res.m_necessary,
            "ceiling_exceeded": res.ceiling_exceeded,
            "trials": trials,
            "identity_ok": True,
        }

    return _pmap(run, jobs, threads)


def cmd_mc(cfg: dict, threads: int = 1, seed: int = 0) -> list[dict]:
    """Monte Carlo estimates of GP matrix entries against their exact values."""
    pm = prepare(cfg.get("model", "heisenberg"), _lattice(cfg.get("lattice", {"kind": "chain", "size": 4})))
    d = int(cfg.get("d", 3))
    tau = float(cfg.get("tau", select_tau("GP", pm.compact, d).tau))
    spec = table_spec("GP", pm.compact, d, pm.h_tot, tau=tau)
    km = build_matrices(spec, pm.compact)
    M = int(cfg.get("M", 10_000))
    N = int(cfg.get("N", min_depth(tau, pm.h_tot)))
    label = f"{pm.model}-{pm.lattice.label}-d{d}"
    pairs = [(kind, k, q) for kind in ("S", "H") for k in range(1, d + 1) for q in range(k, d + 1)]

    def run(job):
        kind, k, q = job
        est = estimate_entry(kind, spec, k, q, pm.h, pm.ref, M, N, np.random.default_rng([seed, ord(kind), k, q]))
        exact = float((km.H if kind == "H" else km.S)[k - 1, q - 1].real)
        z = (est.value.real - exact) / est.stderr_real if est.stderr_real > 0 else 0.0
        bound = 2 * est.cost_factor**2
        return {
            "instance": label,
            "kind": kind,
            "k": k,
            "q": q,
            "tau": tau,
            "N": N,
            "M": M,
            "estimate_real": est.value.real,
            "estimate_imag": est.value.imag,
            "exact": exact,
            "stderr_real": est.stderr_real,
            "z_score": z,
            "cost_factor": est.cost_factor,
            "variance": est.variance,
            "variance_bound": bound,
            "identity_ok": bool(est.variance <= bound * (1 + 1e-12)),
        }

    return _pmap(run, pairs, threads)


def cmd_projector(cfg: dict, threads: int = 1, seed: int = 0) -> list[dict]:
    """Composed Chebyshev-Gaussian projector reports for each ``(n, tau)``."""
    pm = prepare(cfg.get("model", "heisenberg"), _lattice(cfg.get("lattice", {"kind": "chain", "size": 10})))
    rows = []
    for n in cfg.get("n", [5]):
        taus = cfg.get("taus") or [math.sqrt(n**3 / math.e) * f for f in cfg.get("tau_factors", [1.5, 2.0, 4.0])]
        for tau in taus:
            rep = compose_projector(int(n), pm.sd, float(tau), pm.h_tot)
            # the gamma bound is approximate near the admissibility threshold, so it is reported, not enforced
            ok = bool(rep.omega_norm <= rep.omega_bound * (1 + 1e-12) and rep.b_bound_corrected_ok())
            rows.append(
                {
                    "instance": f"{pm.model}-{pm.lattice.label}",
                    "n": n,
                    "tau": tau,
                    "z1": rep.z1,
                    "omega_norm": rep.omega_norm,
                    "omega_bound": rep.omega_bound,
                    "gamma": rep.gamma,
                    "gamma_bound": rep.gamma_bound,
                    "gamma_bound_ok": bool(rep.gamma <= rep.gamma_bound * (1 + 1e-12)),
                    "max_b_ratio": float(np.max(np.abs(rep.b) / np.array([n**l * rep.t_n_z1 for l in range(n + 1)]))),
                    "b_bound_ok": rep.b_bound_ok(),
                    "max_b_ratio_corrected": float(np.max(np.abs(rep.b) / rep.b_bound_corrected())),
                    "projector_error": rep.projector_error,
                    "filter_error": rep.filter_error,
                    "identity_ok": ok,
                }
            )
    return rows


def scaling_curve(pm: PreparedModel, spec: BasisSpec, eps: np.ndarray, kappa: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """``(epsilon, M_tot)`` along a target-error grid; unreachable targets give ``inf``."""
    km = build_matrices(spec, pm.compact)
    protocol = default_protocol(spec.structure)
    out = []
    for e in eps:
        try:
            out.append(m_tot(protocol, spec.d, kappa, solve_eta(km, pm.E_g, float(e))))
        except NoSolutionError:
            out.append(math.inf)
    return np.asarray(eps, dtype=float), np.asarray(out)


def fitted_slope(eps: np.ndarray, m: np.ndarray) -> float:
    """Least-squares slope of ``log M`` against ``log(1/epsilon)``."""
    ok = np.isfinite(m)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(1 / eps[ok]), np.log(m[ok]), 1)[0])


def cmd_scaling(cfg: dict, threads: int = 1, seed: int = 0) -> list[dict]:
    """``M_tot`` against ``epsilon`` for several ``d`` per family, with the fitted slope."""
    pm = prepare(cfg["model"], _lattice(cfg["lattice"]))
    kappa = float(cfg.get("kappa", 0.1))
    admitted = admitted_dims(pm, range(*cfg.get("d_range", [2, 31])))
    dims = cfg.get("dims") or [d for d, _ in admitted]
    g = cfg.get("eps_range", {"min": 1e-4, "max": 1e-2, "num": 21})
    eps = np.geomspace(g["min"], g["max"], int(g["num"]))
    jobs = [(fam, d) for fam in _families(cfg) for d in dims]

    def run(job):
        fam, d = job
        spec = family_spec(pm, fam, d)
        e, m = scaling_curve(pm, spec, eps, kappa)
        slope = fitted_slope(e, m)
        inst = f"{pm.model}-{pm.lattice.label}-d{d}"
        return [{"instance": inst, "family": fam, "d": d, "epsilon": float(x), "m_tot": float(y), "slope": slope, "identity_ok": True} for x, y in zip(e, m)]

    return [r for rows in _pmap(run, jobs, threads) for r in rows]


COMMANDS: dict[str, Callable[..., list[dict]]] = {
    "curve": cmd_curve,
    "distribution": cmd_distribution,
    "cost": cmd_cost,
    "noise": cmd_noise,
    "mc": cmd_mc,
    "projector": cmd_projector,
    "scaling": cmd_scaling,
}
