import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from qksd import bench, cli
from qksd.bases import FAMILIES
from qksd.bench import (
    Instance,
    InadmissibleInstance,
    admission,
    admitted_dims,
    cmd_curve,
    cmd_projector,
    corpus,
    family_spec,
    fitted_slope,
    power_error,
    run_family,
    summarise_distribution,
)
from qksd.models import chain

CHAIN10 = {"model": "heisenberg", "lattice": {"kind": "chain", "size": 10}}


@pytest.mark.parametrize("d,eps_k", [(3, 7.5191924748e-3), (5, 3.9020918356e-4), (8, 2.4217091377e-7), (10, 3.4904918955e-9)])
def test_power_error_values(chain10, d, eps_k):
    assert power_error(chain10, d) == pytest.approx(eps_k, rel=1e-6)


def test_admission_window(chain10):
    assert admission(chain10, 2)[:2] == (False, "eps_K above 1e-2")
    assert admission(chain10, 11)[:2] == (False, "eps_K below 1e-9")
    assert [d for d, _ in admitted_dims(chain10, range(2, 31))] == list(range(3, 11))


def test_low_overlap_rejected():
    from qksd.bench import prepare
    from qksd.models import random_graph

    # this graph's ground state lies outside the reference state's symmetry sector
    pm = prepare("hubbard", random_graph(4, 2))
    assert pm.p_g < 1e-3
    ok, reason, _ = admission(pm, 3)
    assert not ok and reason == "p_g below 1e-3"


@pytest.mark.parametrize("family", FAMILIES)
def test_family_specs(chain10, family):
    spec = family_spec(chain10, family, 5)
    assert spec.family == family and spec.d == 5
    rec = run_family(chain10, Instance("heisenberg", chain10.lattice, 5), spec, 2 * power_error(chain10, 5))
    assert rec.identity_ok and rec.status == "ok" and np.isfinite(rec.gamma)
    if family == "GP":
        assert spec.E_0 == chain10.E_g and spec.rescale[0] > 1


def test_unreachable_target_recorded(chain10):
    spec = family_spec(chain10, "P", 5)
    rec = run_family(chain10, Instance("heisenberg", chain10.lattice, 5), spec, 0.5 * power_error(chain10, 5))
    assert rec.status == "no_solution" and rec.gamma == np.inf


@pytest.fixture(scope="module")
def curve_rows():
    return cmd_curve(dict(CHAIN10, d=5))


def test_curve_monotone(curve_rows):
    for fam in FAMILIES:
        rows = [r for r in curve_rows if r["family"] == fam and r["variant"] != "GP_band"]
        g = np.array([r["gamma"] for r in rows])
        assert np.all(np.diff([r["epsilon"] for r in rows]) > 0)
        assert np.all(np.diff(g) <= 1e-9 * g[:-1])


def test_curve_gp_band(curve_rows):
    band = {r["E0_offset"] for r in curve_rows if r["variant"] == "GP_band"}
    assert len(band) == 20 and max(band) == pytest.approx(0.1) and min(band) == pytest.approx(-0.1)


def test_curve_gp_reaches_twice_subspace_error(curve_rows):
    eps_k = curve_rows[0]["epsilon_K"]
    gp = [r for r in curve_rows if r["variant"] == "GP"]
    assert any(r["gamma"] <= 100 and r["epsilon"] <= 2 * eps_k for r in gp)


def test_curve_moderate_target_is_cheap_for_most(curve_rows):
    cheap = 0
    for fam in FAMILIES:
        rows = [r for r in curve_rows if r["family"] == fam and r["variant"] != "GP_band"]
        near = min(rows, key=lambda r: abs(np.log(r["epsilon"] / 0.01)))
        cheap += near["gamma"] <= 10
    assert cheap > len(FAMILIES) / 2


def test_curve_skips_inadmissible():
    rows = cmd_curve(dict(CHAIN10, d=2))
    assert len(rows) == 1 and rows[0]["status"].startswith("skipped")
    with pytest.raises(InadmissibleInstance):
        bench.cmd_cost(dict(CHAIN10, d=2))


def test_projector_rows():
    rows = cmd_projector({"n": [5], "tau_factors": [1.5, 2.0, 4.0]})
    assert len(rows) == 3 and all(r["identity_ok"] for r in rows)
    assert [r["gamma_bound_ok"] for r in rows] == [False, True, True]
    assert not any(r["b_bound_ok"] for r in rows)
    assert all(r["omega_norm"] <= r["omega_bound"] for r in rows)


def test_corpus_random_graphs_seeded():
    cfg = {"random_graphs": {"models": ["heisenberg"], "count": 3, "sizes": {"heisenberg": 6}}, "d_range": [2, 6]}
    a = [(pm.lattice.seed, d) for pm, d, _ in corpus(cfg, 5)]
    b = [(pm.lattice.seed, d) for pm, d, _ in corpus(cfg, 5)]
    assert a == b


def test_summary_and_slope():
    rows = [{"family": "GP", "gamma": g} for g in (1.0, 3.0, 200.0)] + [{"family": "P", "gamma": 1e5}]
    s = summarise_distribution(rows)
    assert s["GP"]["median"] == 3.0 and s["GP"]["frac_le_100"] == pytest.approx(2 / 3)
    assert s["P"]["frac_ge_1e4"] == 1.0
    eps = np.geomspace(1e-4, 1e-2, 5)
    assert fitted_slope(eps, 7 * eps**-2) == pytest.approx(2.0)
    assert np.isnan(fitted_slope(eps, np.full(5, np.inf)))


# --- command line ---------------------------------------------------------------------


def _write(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def test_cli_cost_writes_csv_and_sidecar(tmp_path):
    cfg = _write(tmp_path, "cost.json", dict(CHAIN10, d=5, protocols={"GP": ["CM_real_hankel", "IM_chebyshev"]}))
    assert cli.main(["cost", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    csv_path = tmp_path / "out" / "cost.csv"
    side = json.loads((tmp_path / "out" / "cost.json").read_text())
    assert side["sha256"] == hashlib.sha256(csv_path.read_bytes()).hexdigest()
    assert side["identity_failures"] == 0 and side["rows"] == len(FAMILIES) + 1


def test_cli_deterministic(tmp_path):
    cfg = _write(tmp_path, "mc.json", {"lattice": {"kind": "chain", "size": 2}, "d": 2, "tau": 0.5, "M": 300, "seed": 4})
    outs = []
    for run in ("a", "b"):
        assert cli.main(["mc", "--config", str(cfg), "--out", str(tmp_path / run)]) == 0
        outs.append((tmp_path / run / "mc.csv").read_bytes())
    assert outs[0] == outs[1]
    cli.main(["mc", "--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "5"])
    assert (tmp_path / "c" / "mc.csv").read_bytes() != outs[0]
    assert json.loads((tmp_path / "c" / "mc.json").read_text())["seed"] == 5


def test_cli_threads_do_not_change_output(tmp_path):
    cfg = {"instances": [dict(CHAIN10)], "d_range": [4, 6], "seed": 1}
    one, _ = cli.run("distribution", cfg, tmp_path / "one", threads=1)
    two, _ = cli.run("distribution", cfg, tmp_path / "two", threads=3)
    assert one.read_bytes() == two.read_bytes()
    side = json.loads((tmp_path / "one" / "distribution.json").read_text())
    assert set(side["summary"]) == set(FAMILIES)


def test_cli_exit_code_on_identity_failure(tmp_path, monkeypatch):
    monkeypatch.setitem(bench.COMMANDS, "cost", lambda cfg, threads, seed: [{"identity_ok": False}])
    monkeypatch.setattr(cli, "COMMANDS", bench.COMMANDS)
    cfg = _write(tmp_path, "c.json", {})
    assert cli.main(["cost", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "qksd.cli", "--help"], capture_output=True, text=True, check=True)
    assert "curve" in out.stdout and "--config" in out.stdout
