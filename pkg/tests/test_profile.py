import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ortho_group, spearmanr

from echocons.errors import DegenerateResponse
from echocons.profile import (TEST_C_C, TEST_C_XX, consistent_component, covariance,
                              cross_covariance, decompose, pairwise_cross_covariance,
                              pc_readout_consistencies, profile, residuals, test_system_audit,
                              test_system_sample, whitening_transform)
from echocons.replica import ReplicaEnsemble, replica_run
from echocons.signals import gaussian_drive

from conftest import standardize

T_BIG = 100_000


@pytest.fixture(scope="module")
def audit():
    return test_system_audit(10**6, seed=0)


# -- covariance ------------------------------------------------------------------


def test_constant_trajectory():
    dec = covariance(np.full((50, 3), 0.2))
    np.testing.assert_array_equal(dec.C, np.zeros((3, 3)))
    np.testing.assert_array_equal(dec.sigma_sq, np.zeros(3))


def test_perfectly_correlated_nodes():
    s = standardize(np.random.default_rng(0).standard_normal(1000))
    dec = covariance(np.column_stack([s, s]))
    np.testing.assert_allclose(dec.C, np.ones((2, 2)), atol=1e-12)
    np.testing.assert_allclose(dec.sigma_sq, [2.0, 0.0], atol=1e-12)


def test_iid_covariance_near_identity():
    X = np.random.default_rng(1).standard_normal((T_BIG, 4))
    assert np.all(np.abs(covariance(X).C - np.eye(4)) <= 5 / math.sqrt(T_BIG))


@given(seed=st.integers(0, 2**32))
@settings(max_examples=20, deadline=None)
def test_decomposition_reconstructs(seed):
    g = np.random.default_rng(seed)
    X = g.standard_normal((200, 6)) @ g.standard_normal((6, 6))
    dec = covariance(X)
    np.testing.assert_allclose(dec.reconstruct(), dec.C, atol=1e-9)
    np.testing.assert_array_equal(dec.C, dec.C.T)
    assert np.all(np.diff(dec.sigma_sq) <= 0) and np.all(dec.sigma_sq >= 0)


def test_cross_covariance_of_self():
    X = np.random.default_rng(2).standard_normal((300, 5))
    np.testing.assert_allclose(cross_covariance(X, X), covariance(X).C, atol=1e-15)


def test_cross_covariance_independent():
    g = np.random.default_rng(3)
    C = cross_covariance(g.standard_normal((T_BIG, 3)), g.standard_normal((T_BIG, 3)))
    assert np.all(np.abs(C) <= 5 / math.sqrt(T_BIG))


def test_components_sum_to_replicas():
    ens = test_system_sample(100, seed=1, K=3)
    np.testing.assert_allclose(consistent_component(ens) + residuals(ens), ens.trajectories)
    np.testing.assert_allclose(residuals(ens).sum(axis=0), 0.0, atol=1e-12)


def test_test_system_moments(audit):
    assert audit["rel_err_C_c"] <= 0.02
    assert audit["rel_err_C_xx"] <= 0.02


# -- whitening ---------------------------------------------------------------------


def test_whitening_identity_matrix():
    np.testing.assert_allclose(whitening_transform(decompose(np.eye(3))), np.eye(3), atol=1e-15)


def test_whitening_diagonal():
    np.testing.assert_allclose(whitening_transform(decompose(np.diag([4.0, 1.0]))),
                               np.diag([0.5, 1.0]), atol=1e-15)


@given(seed=st.integers(0, 2**32), n=st.integers(1, 8))
@settings(max_examples=40, deadline=None)
def test_whitening_identity(seed, n):
    A = np.random.default_rng(seed).standard_normal((n, n))
    C = A @ A.T + 0.1 * np.eye(n)
    T = whitening_transform(decompose(C))
    np.testing.assert_allclose(T @ C @ T.T, np.eye(n), atol=1e-8)


def test_whitening_projects_null_directions():
    C = np.diag([2.0, 1.0, 0.0])
    T = whitening_transform(decompose(C))
    np.testing.assert_allclose(T @ C @ T.T, np.diag([1.0, 1.0, 0.0]), atol=1e-15)


def test_whitening_all_null():
    with pytest.raises(DegenerateResponse, match="degenerate response"):
        whitening_transform(decompose(np.zeros((2, 2))))


def test_test_system_whitened(audit):
    assert audit["rel_err_whitened_full"] <= 0.02


# -- profile ---------------------------------------------------------------------------


def test_test_system_levels():
    prof = profile(test_system_sample(10**6, seed=2))
    mu = scipy.linalg.eigh(TEST_C_C, TEST_C_XX, eigvals_only=True)[::-1]
    np.testing.assert_allclose(prof.levels, mu, atol=0.02)


def test_complementarity():
    prof = profile(test_system_sample(10**6, seed=3))
    m = prof.matrices
    assert np.all(np.abs(m["Cbar_c"] + m["Cbar_n"] - np.eye(2)) <= 0.02)


def test_test_system_axes(audit):
    assert min(audit["axis_abs_cosine"]) >= 0.99
    np.testing.assert_allclose(audit["axis_level_sums"], 1.0, atol=0.02)


def test_ergodicity_identity():
    # replica mean over 16 replicas vs an independent pair driven by the same signal
    ens = test_system_sample(T_BIG, seed=4, K=18)
    Cc_mean = covariance(consistent_component(ens.trajectories[:16])).C
    Cc_pair = cross_covariance(ens[16], ens[17])
    assert np.linalg.norm(Cc_pair - Cc_mean) / np.linalg.norm(Cc_mean) <= 0.05


def test_pairwise_estimator_unbiased():
    ens = test_system_sample(T_BIG, seed=5, K=6)
    C = pairwise_cross_covariance(ens)
    assert np.linalg.norm(C - TEST_C_C) / np.linalg.norm(TEST_C_C) <= 0.02
    prof = profile(ens, ensemble_mean=True)
    assert prof.meta["C_c_estimator"] == "pairwise"


def test_basis_invariance(sparse_net):
    ens = replica_run(sparse_net.scaled(3.0), gaussian_drive(8000, seed=1), 2, 1000)
    sub = ens.trajectories[:, :, :25]
    O = ortho_group.rvs(25, random_state=0)
    a = profile(ReplicaEnsemble(sub))
    b = profile(ReplicaEnsemble(sub @ O.T))
    np.testing.assert_allclose(a.levels, b.levels, atol=1e-8)


def test_levels_bounded(sparse_net):
    ens = replica_run(sparse_net.scaled(3.0), gaussian_drive(8000, seed=2), 2, 1000)
    prof = profile(ens)
    assert np.all(prof.levels >= 0) and np.all(prof.levels <= 1.02)
    assert prof.levels.size == prof.directions.shape[1] == int(prof.retained_mask.sum())


def test_regularization_discards_small_components(sparse_net):
    ens = replica_run(sparse_net, gaussian_drive(6000, seed=3), 2, 1000)
    dims = [profile(ens, lam, seed=1).effective_dimension for lam in (1e-3, 1e-2, 1e-1)]
    assert dims[0] > dims[1] > dims[2]


def test_profile_csv(tmp_path, sparse_net):
    ens = replica_run(sparse_net.scaled(3.0), gaussian_drive(4000, seed=4), 2, 1000)
    prof = profile(ens)
    prof.write_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "direction,sigma_sq,consistency_level,retained"
    assert len(lines) == 201


# -- PC readouts ---------------------------------------------------------------------------


def test_pc_readouts_identical_replicas():
    X = np.random.default_rng(5).standard_normal((500, 4))
    np.testing.assert_array_equal(pc_readout_consistencies(X, X, covariance(X).Q), np.ones(4))


def test_pc_readouts_consistent_network(sparse_net):
    ens = replica_run(sparse_net, gaussian_drive(6000, seed=5), 2, 1000)
    g = pc_readout_consistencies(ens[0], ens[1], covariance(ens[0]).Q)
    assert np.all(g[~np.isnan(g)] >= 0.999)


def test_pc_readouts_rank_with_size(sparse_net):
    # larger principal components tend to be more consistent
    ens = replica_run(sparse_net.scaled(3.0), gaussian_drive(21000, seed=6), 2, 1000)
    dec = covariance(ens[0])
    g = pc_readout_consistencies(ens[0], ens[1], dec.Q)
    ok = ~np.isnan(g)
    assert spearmanr(dec.sigma_sq[ok], g[ok]).statistic > 0
