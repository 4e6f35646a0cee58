import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from echocons.errors import DegenerateConnectivity, InvalidDrive
from echocons.reservoir import (NetworkRealization, NetworkSpec, build_network, from_dict,
                                initial_state, load, run, save, simulate, spectral_radius,
                                step, to_dict)
from echocons.signals import gaussian_drive


def _net(W, V=None, beta=None):
    W = np.asarray(W, dtype=float)
    N = W.shape[0]
    V = np.zeros((N, 1)) if V is None else np.asarray(V, dtype=float).reshape(N, -1)
    beta = np.zeros(N) if beta is None else np.asarray(beta, dtype=float)
    return NetworkRealization(W, V, beta, spectral_radius(W), NetworkSpec(N, 1.0, 0.0))


# -- spectral radius ---------------------------------------------------------


def test_spectral_radius_identity():
    assert spectral_radius(np.eye(2)) == pytest.approx(1.0, abs=1e-15)


def test_spectral_radius_nilpotent_is_zero():
    assert spectral_radius([[0.0, 2.0], [0.0, 0.0]]) == 0.0


def test_spectral_radius_rotation():
    th = 0.7
    R = [[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]]
    assert spectral_radius(R) == pytest.approx(1.0, rel=1e-12)


def test_spectral_radius_rejects_non_square():
    with pytest.raises(ValueError):
        spectral_radius(np.ones((2, 3)))


@given(c=st.floats(0.01, 100.0), seed=st.integers(0, 2**32))
@settings(max_examples=30, deadline=None)
def test_spectral_radius_homogeneous(c, seed):
    W = np.random.default_rng(seed).standard_normal((8, 8))
    assert spectral_radius(c * W) == pytest.approx(c * spectral_radius(W), rel=1e-12)


# -- construction ------------------------------------------------------------


def test_empty_wiring_is_degenerate():
    with pytest.raises(DegenerateConnectivity, match="degenerate connectivity"):
        build_network(NetworkSpec(size=2, p=0.0, rho=1.0))


def test_empty_wiring_at_zero_radius_is_allowed():
    net = build_network(NetworkSpec(size=3, p=0.0, rho=0.0))
    assert not net.W.any() and net.radius == 0.0


def test_reference_network_scaling():
    net = build_network(NetworkSpec(size=200, p=0.025, rho=2.2, bias=1.0, seed=5))
    assert abs(spectral_radius(net.W) - 2.2) / 2.2 <= 1e-9
    assert np.all(np.abs(net.V) <= 1.0)
    np.testing.assert_array_equal(net.beta, np.ones(200))


def test_nonzero_count_binomial():
    # Binomial(N^2, p): mean 25000, sd sqrt(N^2 p (1-p)) = 150
    N, p = 500, 0.10
    net = build_network(NetworkSpec(size=N, p=p, rho=1.0, seed=9))
    mean, sd = N * N * p, math.sqrt(N * N * p * (1 - p))
    assert abs(np.count_nonzero(net.W) - mean) <= 5 * sd


@given(N=st.integers(4, 40), p=st.floats(0.15, 1.0), rho=st.floats(0.05, 5.0),
       seed=st.integers(0, 2**32))
@settings(max_examples=40, deadline=None)
def test_scaling_property(N, p, rho, seed):
    try:
        net = build_network(NetworkSpec(N, p, rho, seed=seed))
    except DegenerateConnectivity:
        assume(False)
    assert abs(spectral_radius(net.W) - rho) / rho <= 1e-9


def test_construction_deterministic():
    a = build_network(NetworkSpec(100, 0.1, 1.3, seed=4))
    b = build_network(NetworkSpec(100, 0.1, 1.3, seed=4))
    np.testing.assert_array_equal(a.W, b.W)
    np.testing.assert_array_equal(a.V, b.V)


def test_rescaling_keeps_wiring():
    a = build_network(NetworkSpec(60, 0.1, 1.0, seed=8))
    b = build_network(NetworkSpec(60, 0.1, 3.0, seed=8))
    np.testing.assert_array_equal(a.W != 0, b.W != 0)
    np.testing.assert_allclose(3.0 * a.W, b.W, rtol=1e-12)
    c = a.scaled(3.0)
    assert abs(c.radius - 3.0) / 3.0 <= 1e-12


def test_invalid_spec():
    with pytest.raises(ValueError):
        NetworkSpec(size=0, p=0.1, rho=1.0)
    with pytest.raises(ValueError):
        NetworkSpec(size=5, p=1.5, rho=1.0)
    with pytest.raises(ValueError):
        NetworkSpec(size=5, p=0.5, rho=-1.0)


# -- single step -------------------------------------------------------------


def test_step_zero_network():
    net = _net(np.zeros((2, 2)))
    np.testing.assert_array_equal(step([0.0, 0.0], 0.0, net), [0.0, 0.0])


def test_step_bias_only():
    net = _net(np.zeros((2, 2)), beta=[1.0, 1.0])
    np.testing.assert_allclose(step([0.3, -0.2], 0.0, net), [0.7615941559557649] * 2, rtol=1e-15)


def test_step_full_noise_mix_zero_noise():
    net = _net(np.ones((2, 2)), V=[1.0, 1.0], beta=[1.0, 1.0])
    np.testing.assert_array_equal(step([0.5, 0.5], 2.0, net, r=1.0, xi=np.zeros(2)), [0.0, 0.0])


def test_step_matches_formula(small_net):
    rng = np.random.default_rng(0)
    x, u = rng.uniform(-1, 1, small_net.size), 0.37
    expect = np.tanh(small_net.W @ x + small_net.V[:, 0] * u + small_net.beta)
    np.testing.assert_allclose(step(x, u, small_net), expect, rtol=1e-13, atol=1e-15)


def test_step_rejects_wrong_width(small_net):
    with pytest.raises(ValueError):
        step(np.zeros(small_net.size + 1), 0.0, small_net)


@given(seed=st.integers(0, 2**32), scale=st.floats(0.0, 5.0), r=st.floats(0.0, 1.0))
@settings(max_examples=40, deadline=None)
def test_step_bounded(seed, scale, r):
    net = build_network(NetworkSpec(20, 0.3, 4.0, seed=3))
    g = np.random.default_rng(seed)
    x = g.uniform(-1, 1, 20)
    xi = g.standard_normal(20)
    out = step(x, scale * g.standard_normal(), net, r=r, xi=xi)
    assert np.all(np.abs(out) < 1.0)


# -- trajectories ------------------------------------------------------------


def test_run_matches_iterated_steps(small_net):
    u = gaussian_drive(40, seed=1).samples
    x0 = initial_state(small_net.size, 0)
    traj = run(small_net, u, x0=x0, washout=0)
    x = x0
    for t in range(40):
        x = step(x, u[t], small_net)
        np.testing.assert_allclose(traj[t], x, rtol=0, atol=1e-13)


def test_run_input_lag_shifts_drive(small_net):
    u = gaussian_drive(200, seed=2).samples
    x0 = initial_state(small_net.size, 0)
    lagged = run(small_net, u, x0=x0, washout=0, input_lag=1)
    shifted = np.vstack([np.zeros((1, 1)), u[:-1]])
    np.testing.assert_array_equal(lagged, run(small_net, shifted, x0=x0, washout=0))


def test_run_length_one_after_washout(small_net):
    u = gaussian_drive(11, seed=0)
    assert run(small_net, u, washout=10).shape == (1, small_net.size)


def test_run_rejects_bad_washout(small_net):
    with pytest.raises(ValueError):
        run(small_net, gaussian_drive(10), washout=10)


def test_run_rejects_nonfinite_drive(small_net):
    u = np.zeros(20)
    u[5] = np.nan
    with pytest.raises(InvalidDrive):
        run(small_net, u, washout=0)


def test_run_deterministic(small_net):
    u = gaussian_drive(3000, seed=3)
    a = run(small_net, u, washout=100, r=0.2, noise_seed=7)
    b = run(small_net, u, washout=100, r=0.2, noise_seed=7)
    assert a.tobytes() == b.tobytes()
    c = run(small_net, u, washout=100, r=0.2, noise_seed=8)
    assert not np.array_equal(a, c)


def test_identical_copies_bit_identical(small_net):
    u = gaussian_drive(5000, seed=4)
    x0 = initial_state(small_net.size, 1)
    tr = simulate(small_net, u, np.stack([x0, x0, x0]), 100)
    assert tr[0].tobytes() == tr[1].tobytes() == tr[2].tobytes()


def test_noise_independent_of_chunking(small_net):
    # a prefix of a longer noisy run equals the shorter run
    long = run(small_net, gaussian_drive(9000, seed=5), washout=0, r=0.1, noise_seed=2)
    short = run(small_net, gaussian_drive(5000, seed=5), washout=0, r=0.1, noise_seed=2)
    np.testing.assert_array_equal(long[:5000], short)


def test_trajectory_bounded(small_net):
    net = small_net.scaled(4.0)
    tr = run(net, 5.0 * gaussian_drive(4000, seed=6).samples, washout=0, r=0.3)
    assert np.all(np.abs(tr) < 1.0)


@pytest.mark.slow
def test_echo_state_convergence(memory_net):
    u = gaussian_drive(1001, seed=12)
    a = run(memory_net, u, x0=initial_state(500, 0, 0), washout=1000)
    b = run(memory_net, u, x0=initial_state(500, 0, 1), washout=1000)
    assert np.max(np.abs(a - b)) <= 1e-6


# -- serialization -------------------------------------------------------------


@pytest.mark.parametrize("p,layout", [(0.025, "triplets"), (0.5, "dense")])
def test_json_round_trip(tmp_path, p, layout):
    net = build_network(NetworkSpec(80, p, 1.7, seed=6))
    doc = to_dict(net)
    assert doc["W"]["layout"] == layout
    back = from_dict(json.loads(json.dumps(doc)))
    assert back.W.tobytes() == net.W.tobytes()
    assert back.V.tobytes() == net.V.tobytes()
    assert back.beta.tobytes() == net.beta.tobytes()
    assert back.spec == net.spec
    save(net, tmp_path / "net.json")
    assert load(tmp_path / "net.json").W.tobytes() == net.W.tobytes()


def test_unknown_format_rejected():
    with pytest.raises(ValueError):
        from_dict({"format": "other"})
