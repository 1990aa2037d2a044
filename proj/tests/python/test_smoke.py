import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

import phage_sde as ps


def test_reference_equilibria():
    p = ps.ModelParams()
    rep = ps.equilibria(p, delayed=True)
    S, Q, cls = rep["points"][0]
    assert S == 0.0
    assert Q == pytest.approx(0.1 / 0.1947, rel=1e-14)
    assert cls == "stable"
    assert rep["eigenvalues"][1] == pytest.approx(-0.1947)
    assert ps.decay_rate_eta(p) == pytest.approx(0.1947 / 2)


def test_sigma_identity_and_cap():
    p = ps.ModelParams()
    assert ps.sigma(3.25, p) == 3.25
    assert ps.sigma(50.0, p) == 11.0
    assert 10.0 < ps.sigma(10.5, p) < 11.0
    with pytest.raises(ValueError):
        ps.sigma(-1.0, p)


def test_drift_zero_at_E0():
    p = ps.ModelParams()
    f = ps.drift(p, 0.0, p.d / p.m)
    assert f == (0.0, 0.0)


def test_deterministic_arrays():
    p = ps.ModelParams()
    tr = ps.simulate_deterministic(p, dt=1e-3, t_end=0.5, delayed=False, init="constant", a=1e-4, b=0.6)
    assert isinstance(tr["t"], np.ndarray)
    assert tr["t"].shape == tr["S"].shape == tr["Q"].shape
    assert tr["t"][0] == 0.0
    assert tr["t"][-1] == pytest.approx(0.5)
    assert np.all(np.isfinite(tr["S"]))


def test_stochastic_reproducible():
    p = ps.ModelParams()
    a = ps.simulate(p, 0.5, seed=3, path_index=2, dt=1e-3, t_end=0.2)
    b = ps.simulate(p, 0.5, seed=3, path_index=2, dt=1e-3, t_end=0.2)
    c = ps.simulate(p, 0.5, seed=3, path_index=3, dt=1e-3, t_end=0.2)
    assert np.array_equal(a["S"], b["S"]) and np.array_equal(a["Q"], b["Q"])
    assert not np.array_equal(a["Q"], c["Q"])


def test_wilson_and_estimate():
    lo, hi = ps.wilson_ci(0, 50)
    assert lo == 0.0 and 0.0 < hi < 0.1
    est = ps.estimate_concentration(ps.ModelParams(), 0.2, n_paths=20, seed=1, interval=(2.0, 4.0), threads=1)
    assert est["n_paths"] == 20
    assert 0 <= est["exceed_count"] <= 20
    assert est["ci"][0] <= est["p_hat"] <= est["ci"][1]


def test_hypothesis1():
    ok, clauses = ps.check_hypothesis1(ps.ModelParams(), 1e-4, 0.6)
    assert ok
    bad, clauses = ps.check_hypothesis1(ps.ModelParams(), 1.0, 0.6)
    assert not bad
    assert any(not c["passed"] for c in clauses)


def test_svg_is_xml():
    p = ps.ModelParams()
    tr = ps.simulate_deterministic(p, dt=1e-3, t_end=0.2)
    svg = ps.render_svg(tr["t"], tr["S"], tr["Q"], label="S & Q <det>", title="smoke")
    root = ET.fromstring(svg.encode())
    assert root.tag.endswith("svg")
    assert len([e for e in root.iter() if e.tag.endswith("polyline")]) == 2


def test_invalid_params():
    with pytest.raises(ValueError):
        ps.ModelParams(m=-1.0)
    with pytest.raises(ValueError):
        ps.interval_from_kappas(2.0, 3.0, 0.05, 0.1, 0.1)
