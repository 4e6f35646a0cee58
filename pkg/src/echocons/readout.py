"""Linear readouts, the lagged-input memory task and memory capacity."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import RankDeficientDesign
from .replica import EPS_VAR, ReplicaEnsemble, _correlate, replica_run
from .reservoir import NetworkRealization, _as_samples, run


@dataclass
class Readout:
    weights: np.ndarray
    bias: float
    lam: float
    lag: int | None = None


def _ridge_solve(states, targets, lam):
    X = np.asarray(states, dtype=float)
    Z = np.asarray(targets, dtype=float)
    if X.ndim != 2:
        raise ValueError("states must be a (samples, N) matrix")
    if Z.shape[0] != X.shape[0]:
        raise ValueError("states and target differ in sample count")
    if lam < 0:
        raise ValueError("ridge parameter must be >= 0")
    Ts = X.shape[0]
    mx = X.mean(axis=0)
    mz = Z.mean(axis=0)
    Xc = X - mx
    G = Xc.T @ Xc
    B = Xc.T @ (Z - mz)
    s, U = np.linalg.eigh(G)
    if lam == 0.0:
        if s[0] <= 1e-12 * max(s[-1], np.finfo(float).tiny):
            raise RankDeficientDesign()
        denom = s
    else:
        denom = np.clip(s, 0.0, None) + lam * lam * Ts
    coef = U @ ((U.T @ B) / (denom[:, None] if B.ndim == 2 else denom))
    return coef, mz - mx @ coef


def ridge_fit(states, target, lam: float, lag: int | None = None) -> Readout:
    """Ridge regression of ``target`` on ``states`` with an unpenalized bias.

    Minimizes ``sum_t (y(t) - z(t))**2 + lam**2 * T_s * |R|**2`` where
    ``T_s`` is the number of samples. With this scaling the fit matches, in
    expectation, ordinary least squares on states corrupted by additive white
    noise of standard deviation ``lam``.
    """
    target = np.asarray(target, dtype=float).ravel()
    R, R0 = _ridge_solve(states, target, lam)
    return Readout(R, float(R0), float(lam), lag)


def apply_readout(states, readout: Readout) -> np.ndarray:
    states = np.asarray(states, dtype=float)
    if states.shape[-1] != readout.weights.shape[0]:
        raise ValueError(f"state width {states.shape[-1]} != readout width {readout.weights.shape[0]}")
    return states @ readout.weights + readout.bias


@dataclass
class MemoryProfile:
    lags: np.ndarray
    M: np.ndarray  # held-out accuracy per lag
    gamma_r_sq: np.ndarray  # NaN when no replica was supplied
    M_train: np.ndarray | None = None
    readouts: list = field(default_factory=list, repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def capacity(self) -> float:
        return memory_capacity(self)

    @property
    def gamma_r(self) -> np.ndarray:
        # square root of the readout consistency; negative values clamp to 0
        return np.sqrt(np.clip(self.gamma_r_sq, 0.0, None))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lag", "M", "M_squared", "Gamma_R_squared", "Gamma_R"])
            for k, lag in enumerate(self.lags):
                g = self.gamma_r_sq[k]
                gr = "" if np.isnan(g) else repr(float(self.gamma_r[k]))
                w.writerow([int(lag), repr(float(self.M[k])), repr(float(self.M[k] ** 2)),
                            "" if np.isnan(g) else repr(float(g)), gr])

    def summary(self) -> dict:
        return {"I_MC": self.capacity, "tau_max": int(self.lags[-1]), **self.meta}

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2))


def memory_capacity(profile) -> float:
    """Sum of squared accuracies over lags 1..tau_max."""
    if isinstance(profile, MemoryProfile):
        lags, M = profile.lags, profile.M
    else:
        M = np.asarray(profile, dtype=float)
        lags = np.arange(M.size)
    M = np.asarray(M, dtype=float)
    return float(np.sum(M[lags >= 1] ** 2))


def _corr_or_zero(a, b):
    c, ok = _correlate(a, b, EPS_VAR)
    return np.where(ok, c, 0.0)


def memory_profile(states, inputs, washout: int, tau_max: int = 50, lam: float = 1e-6,
                   replica_states=None, train_fraction: float = 0.5) -> MemoryProfile:
    """Memory profile from a recorded trajectory.

    ``states[s]`` is the state at absolute time ``washout + s`` and
    ``inputs`` the full scalar drive. The first ``train_fraction`` of the
    usable samples trains one readout per lag; accuracies are measured on the
    rest. With ``replica_states`` the same readouts are applied to the replica
    to get the readout consistency per lag.
    """
    X = np.asarray(states, dtype=float)
    u = np.asarray(inputs, dtype=float)
    if u.ndim == 2:
        if u.shape[1] != 1:
            raise ValueError("memory task needs a scalar drive")
        u = u[:, 0]
    s0 = max(0, tau_max - washout)
    n = X.shape[0] - s0
    n_train = int(n * train_fraction)
    if n_train < 2 or n - n_train < 2:
        raise ValueError("too few samples for the train/test split")
    t_abs = washout + np.arange(s0, X.shape[0])
    lags = np.arange(tau_max + 1)
    Z = u[t_abs[:, None] - lags[None, :]]  # (n, tau_max + 1)
    Xu = X[s0:]
    tr, te = slice(0, n_train), slice(n_train, n)
    R, R0 = _ridge_solve(Xu[tr], Z[tr], lam)
    Y = Xu @ R + R0
    M = _corr_or_zero(Z[te], Y[te])
    M_train = _corr_or_zero(Z[tr], Y[tr])
    if replica_states is not None:
        Xr = np.asarray(replica_states, dtype=float)[s0:]
        Yr = Xr[te] @ R + R0
        g, ok = _correlate(Y[te], Yr, EPS_VAR)
        gamma_r_sq = g
    else:
        gamma_r_sq = np.full(lags.size, np.nan)
    readouts = [Readout(R[:, k], float(R0[k]), float(lam), int(k)) for k in lags]
    meta = {"evaluation": "held-out", "train_samples": n_train, "test_samples": n - n_train,
            "lambda": lam, "washout": washout}
    return MemoryProfile(lags, M, gamma_r_sq, M_train, readouts, meta)


def memory_task(net: NetworkRealization, drive, tau_max: int = 50, lam: float = 1e-6,
                washout: int = 1000, replica=False, r: float = 0.0, master_seed: int = 0,
                input_lag: int = 0) -> MemoryProfile:
    """Run ``net`` on ``drive`` and evaluate the lagged-reconstruction task.

    ``replica`` may be False, True (run a second replica with the same drive)
    or a precomputed :class:`ReplicaEnsemble` whose first two members are used.
    """
    u = _as_samples(drive, net.input_dim)
    if u.shape[1] != 1:
        raise ValueError("memory task needs a scalar drive (L = 1)")
    if isinstance(replica, ReplicaEnsemble):
        states, other, washout = replica[0], replica[1], replica.washout
    elif replica:
        ens = replica_run(net, u, 2, washout, r, master_seed, input_lag=input_lag)
        states, other = ens[0], ens[1]
    else:
        states = run(net, u, washout=washout, r=r, noise_seed=master_seed, input_lag=input_lag)
        other = None
    prof = memory_profile(states, u[:, 0], washout, tau_max, lam, other)
    prof.meta.update({"r": r, "rho": net.spec.rho})
    return prof
