import math

import numpy as np
import pytest

import wagepanel as wp


def small_config(seed=1):
    cfg = wp.SimConfig()
    cfg.n_workers = 400
    cfg.n_firms = 20
    cfg.n_years = 10
    cfg.seed = seed
    return cfg


def test_simulate_is_deterministic():
    a, truth = wp.simulate(small_config())
    b, _ = wp.simulate(small_config())
    assert len(a) == len(b) > 0
    assert a.person_count == 400
    ca, cb = a.columns(), b.columns()
    assert np.array_equal(ca["annual_earnings"], cb["annual_earnings"])
    assert "EA_PGI" in a.index_names
    assert len(truth["theta"]) == 400
    assert len(truth["psi"]) == 20


def test_invalid_config_raises():
    cfg = small_config()
    cfg.n_firms = 0
    with pytest.raises(ValueError):
        wp.simulate(cfg)


def test_akm_zero_noise_recovery():
    cfg = small_config()
    cfg.noise_sd = 0.0
    cfg.base_mobility_rate = 0.3
    panel, truth = wp.simulate(cfg)
    (fit,) = wp.fit_akm(panel, solver_tol=1e-12, max_iter=20000)
    theta = np.array([truth["theta"][int(i)] for i in fit.person_ids])
    shift = fit.theta - theta
    assert np.max(np.abs(shift - shift.mean())) < 1e-6
    vd = fit.variance_decomposition(panel)
    parts = sum(v for k, v in vd.items() if k not in ("var_y", "n_obs"))
    assert math.isclose(parts, vd["var_y"], rel_tol=1e-8)


def test_growth_identity():
    panel, _ = wp.simulate(small_config(3))
    for row in wp.decompose_growth(panel, max_horizon=6):
        if row["defined"]:
            s = row["stayer"] + row["mover"] + row["entrant"] + row["exiter"]
            assert abs(s - row["total"]) < 1e-12


def test_small_helpers():
    assert wp.holm_adjust([0.01, 0.04, 0.03]) == pytest.approx([0.03, 0.06, 0.06], abs=1e-15)
    assert wp.cci_at_cutoff([(2000, 10, "K70.3"), (2010, 10, "K72.1")], 1970, 50) == 3
    assert wp.cci_at_cutoff([(2021, 10, "I21")], 1970, 50) == 0
    pv = wp.lifetime_income(wp.simulate(small_config())[0], 0.0, 25)
    assert len(pv) == 400


def test_cli_roundtrip(tmp_path):
    code, out, _ = wp.run_cli(["--version"])
    assert code == 0 and out.startswith("wagepanel " + wp.__version__)
    code, _, err = wp.run_cli(["simulate", "--bogus"])
    assert code == 2 and err.startswith("usage error")
    code, _, err = wp.run_cli(["simulate", "--out-dir", str(tmp_path), "--workers", "100", "--firms", "8"])
    assert code == 0, err
    panel = wp.load_panel(tmp_path / "panel.csv", tmp_path / "deflator.csv")
    assert panel.person_count == 100
