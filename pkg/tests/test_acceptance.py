"""Acceptance criteria; each test records one PASS/FAIL line shown in the terminal summary."""

import math

import numpy as np
import pytest

from qksd.bases import FAMILIES, build_matrices, gp_cost_bound, gp_fourier, gp_norm_bound
from qksd.bench import (
    admitted_dims,
    cmd_distribution,
    cmd_mc,
    cmd_noise,
    family_spec,
    fitted_slope,
    power_error,
    prepare,
    scaling_curve,
    summarise_distribution,
)
from qksd.cost import Protocol, compose_projector, solve_eta
from qksd.exact import lanczos_ritz
from qksd.models import random_graph
from qksd.noise import sufficiency_check
from qksd.solver import min_e_prime, solve_exact, solve_regularised

CHAIN10 = {"model": "heisenberg", "lattice": {"kind": "chain", "size": 10}}


def test_c01_lanczos_equivalence(chain10, criterion):
    worst = 0.0
    dims = [d for d, _ in admitted_dims(chain10, range(2, 9))]
    for d in dims:
        km = build_matrices(family_spec(chain10, "P", d), chain10.compact)
        ritz = lanczos_ritz(chain10.h, chain10.ref, d).smallest
        for e in (solve_exact(km).e_min, solve_regularised(km, 1e-14).e_min):
            worst = max(worst, abs(e - ritz))
    assert criterion(1, worst <= 1e-8 and dims == list(range(3, 9)), f"d={dims[0]}..{dims[-1]}, max |E_min - Ritz| = {worst:.1e} (<= 1e-8)")


def test_c02_gp_overhead_distribution(criterion):
    cfg = {
        "instances": [
            dict(CHAIN10),
            {"model": "heisenberg", "lattice": {"kind": "ladder", "size": 10}},
            {"model": "hubbard", "lattice": {"kind": "chain", "size": 5}},
            {"model": "hubbard", "lattice": {"kind": "ladder", "size": 5}},
        ],
        "d_range": [2, 30],
    }
    summary = summarise_distribution(cmd_distribution(cfg, seed=0))
    gp, f = summary["GP"], summary["F"]
    big = [fam for fam in ("P", "CP", "IP", "ITE", "RTE") if summary[fam]["median"] >= 1e4]
    ok = gp["frac_le_100"] >= 0.95 and 1 <= gp["median"] <= 20 and 3 <= f["median"] <= 50 and bool(big)
    detail = (
        f"n={gp['n']}, GP<=100 on {gp['frac_le_100']:.0%}, median GP {gp['median']:.2f}, median F {f['median']:.1f}, "
        f"median >= 1e4: {','.join(big)}"
    )
    assert criterion(2, ok, detail)


def test_c03_sufficiency(chain10, criterion):
    km = build_matrices(family_spec(chain10, "GP", 5), chain10.compact)
    eps = 2 * power_error(chain10, 5)
    res = sufficiency_check(km, Protocol("CM_real_hankel"), chain10.E_g, eps, 0.1, trials=100, seed=0)
    inside, above = round(res.fraction * 100), round(res.variational_fraction * 100)
    ok = inside >= 90 and above >= 90
    assert criterion(3, ok, f"in [E_g, E_g+eps]: {inside}/100, variational: {above}/100, M = {res.M:.2e}")


def test_c04_variance_bound(criterion):
    rows = cmd_mc({"lattice": {"kind": "chain", "size": 4}, "d": 3, "M": 10_000}, seed=0)
    worst_z = max(abs(r["z_score"]) for r in rows)
    worst_ratio = max(r["variance"] / r["variance_bound"] for r in rows)
    ok = len(rows) == 12 and worst_z <= 5 and worst_ratio <= 1
    assert criterion(4, ok, f"{len(rows)} entries, N={rows[0]['N']}, max |z| = {worst_z:.2f}, max variance/(2 C_A^2) = {worst_ratio:.3f}")


def test_c05_cost_integral_bound(criterion):
    ratios = []
    for k in range(1, 31):
        base = math.sqrt(max(k - 1, 1) / math.e)
        for factor in (1.01, 1.2, 1.5, 2.0, 3.0, 5.0, 10.0):
            tau = base * factor
            ratios.append(gp_cost_bound(k, tau) / gp_norm_bound(k, tau))
    lo, hi = min(ratios), max(ratios)
    assert criterion(5, 1.0 <= lo and hi <= 2.0, f"{len(ratios)} (k, tau) points, ratio in [{lo:.3f}, {hi:.3f}]")


def test_c06_fourier_identity(criterion):
    worst = 0.0
    x = np.linspace(-1, 1, 201)
    for k in range(1, 7):
        for tau in (0.5, 1.0, 2.0, 3.0, 5.0):
            target = x ** (k - 1) * np.exp(-0.5 * (x * tau) ** 2)
            got = np.array([gp_fourier(k, tau, xi) for xi in x])
            nonzero = np.abs(target) > 0
            worst = max(worst, float(np.max(np.abs(got[nonzero] - target[nonzero]) / np.abs(target[nonzero]))))
            worst = max(worst, float(np.max(np.abs(got[~nonzero]), initial=0.0)) / np.max(np.abs(target)))
    assert criterion(6, worst <= 1e-6, f"k=1..6, five tau values, max relative error {worst:.1e}")


def test_c07_projector_bounds(chain10, criterion):
    n = 5
    base = math.sqrt(n**3 / math.e)
    omega_ok = b_ok = gamma_ok = True
    failing_gamma = []
    for factor in (1.05, 1.2, 1.5, 2.0, 3.0, 4.0):
        rep = compose_projector(n, chain10.sd, factor * base, chain10.h_tot)
        omega_ok &= rep.omega_norm <= rep.omega_bound
        b_ok &= rep.b_bound_ok()
        if rep.gamma > rep.gamma_bound:
            gamma_ok = False
            failing_gamma.append(f"{factor}x: {rep.gamma:.2f} > {rep.gamma_bound:.2f}")
    ratio_b1 = abs(rep.b[1]) / (n * rep.t_n_z1)
    detail = (
        f"Omega bound {'holds' if omega_ok else 'fails'}; |b_l| <= n^l T_n(z1) {'holds' if b_ok else f'fails (|b_1| is {ratio_b1:.1f}x the bound)'}; "
        f"gamma bound {'holds' if gamma_ok else 'fails at tau = ' + '; '.join(failing_gamma)}"
    )
    assert criterion(7, omega_ok and b_ok and gamma_ok, detail)


def test_c08_monotone_bound_equation(criterion):
    rng = np.random.default_rng(8)
    etas = np.geomspace(1e-9, 1.0, 50)
    checked, worst_res, monotone, continuous = 0, 0.0, True, True
    seeds = iter(rng.integers(2**31, size=200))
    while checked < 10:
        pm = prepare("heisenberg", random_graph(8, int(next(seeds))))
        dims = admitted_dims(pm, range(2, 12)) if pm.p_g >= 1e-3 else []
        if not dims:
            continue
        d, eps_k = dims[int(rng.integers(len(dims)))]
        km = build_matrices(family_spec(pm, "GP", d), pm.compact)
        vals = np.array([min_e_prime(km, e) for e in etas])
        neg = vals < 0
        monotone &= bool(np.all(np.diff(vals[neg]) > 0))
        nudged = np.array([min_e_prime(km, e * (1 + 1e-9)) for e in etas[neg]])
        continuous &= bool(np.all(np.abs(nudged - vals[neg]) <= 1e-6))
        eps = 2 * eps_k
        eta = solve_eta(km, pm.E_g, eps)
        worst_res = max(worst_res, abs(min_e_prime(km, eta) - (pm.E_g + eps)))
        checked += 1
    ok = monotone and continuous and worst_res <= 1e-9
    assert criterion(8, ok, f"10 random graphs, strictly increasing: {monotone}, continuous: {continuous}, max residual {worst_res:.1e}")


def test_c09_scaling_slope(chain10, criterion):
    d = max(d for d, _ in admitted_dims(chain10, range(2, 31)))
    eps = np.geomspace(1e-4, 1e-2, 21)
    slopes = {}
    for fam in FAMILIES:
        e, m = scaling_curve(chain10, family_spec(chain10, fam, d), eps)
        slopes[fam] = fitted_slope(e, m)
    off = [f for f, s in slopes.items() if not abs(s - 2.0) <= 0.2]
    detail = f"d={d}: " + ", ".join(f"{f} {s:.2f}" for f, s in slopes.items()) + (f"; outside 2.0 +/- 0.2: {','.join(off)}" if off else "")
    assert criterion(9, not off, detail)


def test_c10_thresholding_parity(criterion):
    rows = cmd_noise(dict(CHAIN10, d=5, trials=100), seed=0)
    ok, parts = True, []
    for rule in ("regularised", "thresholded"):
        m = {r["family"]: r["m_necessary"] for r in rows if r["rule"] == rule}
        gp_exceeded = any(r["ceiling_exceeded"] for r in rows if r["rule"] == rule and r["family"] == "GP")
        ok &= not gp_exceeded and all(m["GP"] <= v for v in m.values())
        parts.append(f"{rule}: GP {m['GP']:.1e}, next {min(v for f, v in m.items() if f != 'GP'):.1e}")
    assert criterion(10, ok, "; ".join(parts))
