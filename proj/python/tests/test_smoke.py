import math

import numpy as np
import pytest

import specuq


@pytest.fixture(scope="module")
def small():
    return specuq.Problem(N=9)


def test_mesh_counts():
    info = specuq.mesh_info(24)
    assert info["nodes"] == 24 * 24 + 23 * 23
    assert info["free_dofs"] == 22 * 22 + 23 * 23


def test_blob_hash_matches_git():
    # `printf 'hello\n' | git hash-object --stdin`
    assert specuq.git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_config_roundtrip_and_unknown_key():
    cfg = specuq.default_config()
    assert specuq.config_hash(cfg) == specuq.config_hash({})
    assert specuq.config_hash({"N": 17}) != specuq.config_hash({})
    with pytest.raises(specuq.SpecuqError):
        specuq.config_hash({"no_such_key": 1})


def test_problem_shapes(small):
    assert small.n == 7 * 7 + 8 * 8
    assert small.m == 2
    assert small.reference_basis.shape == (small.n, small.m)
    # M0-orthonormal reference basis
    g = small.reference_basis.T @ (small.M0 @ small.reference_basis)
    assert np.allclose(g, np.eye(small.m), atol=1e-10)


def test_zero_amplitude_sample_is_reference(small):
    basis, lam = small.solve_sample(3, 0.0, 0.0, dense=True)
    assert np.allclose(np.diag(lam), small.lambda0, rtol=1e-10)
    _, aligned, _, s = specuq.align(basis, lam, small.reference_basis, small.M0)
    assert np.allclose(aligned, small.reference_basis, atol=1e-8)
    assert np.allclose(s, 1.0, atol=1e-10)


def test_perturbation_mean_close_to_mc(small):
    a = b = 0.01
    pred = small.perturb(a, b)
    est = small.mc(256, a, b, antithetic=True)
    err = np.linalg.norm(est["mean_lambda"] - pred["mean_lambda"])
    assert err < 1e-3 * np.linalg.norm(pred["mean_lambda"])
    assert np.allclose(pred["cov_lambda"], pred["cov_lambda_direct"], rtol=1e-8, atol=1e-12)


def test_det_study_table(small):
    p = specuq.Problem(N=9, t_min_exp=-10, t_max_exp=-4, fit_drop_small=0, fit_drop_large=0)
    out = p.study_det()
    assert out["metadata"]["config_hash"] == p.config_hash
    assert len(out["rows"]) == 7
    slope = out["summary"]["slopes"]["err_lambda_polar"]["slope"]
    assert math.isclose(slope, 2.0, abs_tol=0.3)
    assert out["slopes_ok"]


def test_errors_are_exceptions():
    with pytest.raises(specuq.SpecuqError):
        specuq.Problem(N=1)
