"""Replica test: identical drive, different initial conditions or noise.

Consistency correlations are Pearson correlations of replica responses over
time, with population (1/T) moments over the analysed window.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .errors import DegenerateEnsemble, ZeroVarianceReadout
from .reservoir import NetworkRealization, initial_state, simulate

EPS_VAR = 1e-12


@dataclass(frozen=True, eq=False)
class ReplicaEnsemble:
    trajectories: np.ndarray  # (K, T', N)
    drive: object = None
    seed: int | None = None
    r: float = 0.0
    washout: int = 0

    def __post_init__(self):
        tr = np.asarray(self.trajectories, dtype=float)
        if tr.ndim != 3:
            raise ValueError("trajectories must be a (K, T, N) array")
        if tr.shape[0] < 2:
            raise ValueError("a replica ensemble needs K >= 2")
        object.__setattr__(self, "trajectories", tr)

    @property
    def K(self) -> int:
        return self.trajectories.shape[0]

    def __getitem__(self, k) -> np.ndarray:
        return self.trajectories[k]

    def __len__(self):
        return self.K


@dataclass
class ConsistencyReport:
    gamma_sq: np.ndarray  # per node; NaN marks excluded nodes
    global_gamma_sq: float
    excluded: int
    samples: int
    readout_gamma_sq: float | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "global_gamma_sq": self.global_gamma_sq,
            "excluded": self.excluded,
            "samples": self.samples,
            "readout_gamma_sq": self.readout_gamma_sq,
            "gamma_sq": [None if np.isnan(g) else float(g) for g in self.gamma_sq],
            "meta": self.meta,
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "gamma_sq"])
            for i, g in enumerate(self.gamma_sq):
                w.writerow([i, "" if np.isnan(g) else repr(float(g))])


def replica_run(net: NetworkRealization, drive, K: int = 2, washout: int = 1000,
                r: float = 0.0, master_seed: int = 0, x0=None,
                input_lag: int = 0) -> ReplicaEnsemble:
    """Drive ``K`` copies of ``net`` with the same signal.

    Replica ``k`` starts from the INITIAL stream ``(master_seed, k)`` (unless
    ``x0`` gives explicit (K, N) initial states) and, for ``r > 0``, draws its
    own dynamical noise from the NOISE stream ``(master_seed, k)``.
    """
    if K < 2:
        raise ValueError("replica_run needs K >= 2")
    if x0 is None:
        x0 = np.stack([initial_state(net.size, master_seed, k) for k in range(K)])
    else:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (K, net.size):
            raise ValueError(f"x0 must have shape ({K}, {net.size})")
    gens = [rng.stream(master_seed, rng.NOISE, k) for k in range(K)] if r > 0.0 else None
    tr = simulate(net, drive, x0, washout, r, gens, input_lag)
    return ReplicaEnsemble(tr, drive, master_seed, r, washout)


def _correlate(a: np.ndarray, b: np.ndarray, eps_var: float):
    # column-wise Pearson correlation with population moments
    da = a - a.mean(axis=0)
    db = b - b.mean(axis=0)
    va = np.mean(da * da, axis=0)
    vb = np.mean(db * db, axis=0)
    cov = np.mean(da * db, axis=0)
    ok = (va > eps_var) & (vb > eps_var)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = cov / np.sqrt(va * vb)
    c = np.where(ok, np.clip(c, -1.0, 1.0), np.nan)
    return c, ok


def node_consistency(a, b, eps_var: float = EPS_VAR) -> np.ndarray:
    """Per-node consistency correlation of two trajectories of shape (T, N).

    Nodes whose variance falls below ``eps_var`` in either trajectory are
    returned as NaN.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"trajectory shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 1:
        a, b = a[:, None], b[:, None]
    if a.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    return _correlate(a, b, eps_var)[0]


def global_consistency(gamma_sq) -> float:
    """Mean of the included (non-NaN) node consistencies."""
    g = np.asarray(gamma_sq, dtype=float)
    keep = ~np.isnan(g)
    if not keep.any():
        raise DegenerateEnsemble()
    return float(np.mean(g[keep]))


def readout_consistency(y, y2, eps_var: float = EPS_VAR) -> float:
    """Consistency correlation of two scalar readout series."""
    y = np.asarray(y, dtype=float).ravel()
    y2 = np.asarray(y2, dtype=float).ravel()
    if y.shape != y2.shape:
        raise ValueError("readout series differ in length")
    if y.size < 2:
        raise ValueError("need at least 2 samples")
    c, ok = _correlate(y[:, None], y2[:, None], eps_var)
    if not ok[0]:
        raise ZeroVarianceReadout()
    return float(c[0])


def consistency(ensemble: ReplicaEnsemble, pair=(0, 1), eps_var: float = EPS_VAR) -> ConsistencyReport:
    """Consistency report for one replica pair (the first pair by default)."""
    i, j = pair
    a, b = ensemble[i], ensemble[j]
    g = node_consistency(a, b, eps_var)
    excluded = int(np.isnan(g).sum())
    return ConsistencyReport(g, global_consistency(g), excluded, a.shape[0],
                             meta={"pair": [i, j], "r": ensemble.r, "washout": ensemble.washout})


def global_gamma(net: NetworkRealization, drive, washout: int = 1000, r: float = 0.0,
                 master_seed: int = 0, input_lag: int = 0) -> float:
    """Shortcut: global consistency of a two-replica run."""
    ens = replica_run(net, drive, 2, washout, r, master_seed, input_lag=input_lag)
    return consistency(ens).global_gamma_sq
