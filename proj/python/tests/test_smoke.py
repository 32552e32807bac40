import math

import numpy as np
import pytest

import svgap


def test_version():
    assert svgap.__version__ == "0.1.0"


def test_singular_values_match_numpy():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((12, 7))
    ours = svgap.singular_values(a)
    ref = np.linalg.svd(a, compute_uv=False)
    assert np.allclose(ours, ref, rtol=0, atol=1e-12 * ref[0])

    values, left, right = svgap.svd(a)
    assert np.allclose(a @ right, left * values, atol=1e-12)


def test_gap_report_on_diagonal():
    g = svgap.gap_report(np.array([4.0, 3.0]))
    assert g["delta_min"] == 1.0
    assert g["argmin"] == 1
    assert g["simple"]


def test_sample_matrix_is_seeded():
    spec = svgap.ensemble(6, 4, seed=11)
    raw1, eff1 = svgap.sample_matrix(spec)
    raw2, _ = svgap.sample_matrix(spec)
    assert raw1.shape == (6, 4)
    assert np.array_equal(raw1, raw2)
    assert set(np.unique(raw1)) <= {-1.0, 1.0}
    assert np.array_equal(raw1, eff1)


def test_bad_spec_raises_value_error():
    with pytest.raises(ValueError):
        svgap.sample_matrix(svgap.ensemble(4, atom="cauchy"))


def test_lcd_of_basis_vector():
    value, at_least = svgap.lcd(np.array([1.0, 0.0, 0.0]))
    assert not at_least
    assert abs(value - 2.0 / 3.0) <= 1e-3


def test_small_ball_gaussian():
    est, ci = svgap.small_ball("gaussian", 0.5, samples=50000, seed=3)
    assert abs(est - math.erf(0.5 / math.sqrt(2.0))) <= 3 * ci


def test_run_experiment_summary():
    config = {"ensemble": svgap.ensemble(20, 15, seed=5), "trials": 20}
    summary = svgap.run_experiment(config)
    assert summary["trials"] == 20
    assert summary["simple_spectrum"]["rate"] == 1.0
    assert summary["interlacing"]["holds"]
    assert len(summary["config_hash"]) == 16


def test_gi_and_cli():
    g = "2 2 1\n0 0\n"
    h = "2 2 1\n1 1\n"
    r = svgap.spectral_match(g, h)
    assert r["verdict"] == "isomorphic"
    assert r["left_map"] == [1, 0]
    assert svgap.brute_force_gi(g, "2 2 2\n0 0\n1 1\n")["verdict"] == "not_isomorphic"

    code, out, _ = svgap.cli("gen", "--n", 3, "--p", 2, "--seed", 1)
    assert code == 0
    assert out.startswith("3 2\n")
    assert svgap.cli("gen", "--bogus")[0] == 3
