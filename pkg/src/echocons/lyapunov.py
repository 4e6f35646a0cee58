"""Conditional Lyapunov spectrum of the driven reservoir and Kaplan-Yorke dimension."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .reservoir import NetworkRealization, _as_samples, initial_state, simulate


@dataclass
class LyapunovReport:
    exponents: np.ndarray  # descending, nats per step
    n_steps: int
    reortho_interval: int
    ky_dimension: float
    negative_fraction: float
    drift: float  # spread of the running max-exponent estimate over the final 10%
    converged: bool

    @property
    def max_exponent(self) -> float:
        return float(self.exponents[0])

    @property
    def size(self) -> int:
        return self.exponents.size


def jacobian(a, W) -> np.ndarray:
    """Derivative of ``tanh(W x + V u + beta)`` with respect to ``x`` at preactivation ``a``."""
    a = np.asarray(a, dtype=float)
    W = np.asarray(W, dtype=float)
    return (1.0 - np.tanh(a) ** 2)[:, None] * W


def kaplan_yorke(spectrum) -> float:
    """Kaplan-Yorke dimension of a descending Lyapunov spectrum.

    Zero when the largest exponent is negative; otherwise
    ``j + S_j / |l_{j+1}|`` with ``S_j`` the largest nonnegative partial sum.
    If no partial sum goes negative the full length is returned.
    """
    lam = np.asarray(spectrum, dtype=float)
    if lam.size == 0 or lam[0] < 0:
        return 0.0
    with np.errstate(invalid="ignore"):
        unsorted = np.any(np.diff(lam) > 0)
    if unsorted:
        raise ValueError("spectrum must be sorted in descending order")
    cs = np.cumsum(lam)
    nonneg = np.nonzero(cs >= 0)[0]
    j = int(nonneg[-1]) + 1
    if j >= lam.size:
        return float(lam.size)
    return float(j + cs[j - 1] / abs(lam[j]))


def cle_spectrum(net: NetworkRealization, drive, n_steps: int = 10000, washout: int = 1000,
                 reortho_interval: int = 1, n_exponents: int | None = None, x0=None,
                 seed: int = 0, r: float = 0.0) -> LyapunovReport:
    """Conditional Lyapunov exponents along the trajectory driven by ``drive``.

    An orthonormal frame of ``n_exponents`` tangent vectors (all N by default)
    is pushed through the Jacobians and re-orthonormalized by QR every
    ``reortho_interval`` steps; the exponents are the time-averaged logarithms
    of the diagonal of R. The drive must supply ``washout + n_steps`` samples.
    """
    if r != 0.0:
        raise ValueError("conditional Lyapunov spectra are only defined for r = 0")
    if reortho_interval < 1:
        raise ValueError("reortho_interval must be >= 1")
    u = _as_samples(drive, net.input_dim)
    total = washout + n_steps
    if u.shape[0] < total:
        raise ValueError(f"drive too short: need {total} samples, got {u.shape[0]}")
    u = u[:total]
    N = net.size
    k = N if n_exponents is None else int(n_exponents)
    if not 1 <= k <= N:
        raise ValueError("n_exponents must lie in 1..N")
    if x0 is None:
        x0 = initial_state(N, seed, 0)
    x0 = np.asarray(x0, dtype=float)

    if washout >= 1:
        X = simulate(net, u, x0[None, :], washout - 1)[0]  # states washout-1 .. total-1
    else:
        X = np.vstack([x0, simulate(net, u, x0[None, :], 0)[0]])
    gain = 1.0 - X[1:] ** 2  # sech^2 of each step's preactivation
    Wop = net.csr if net.density < 0.1 else net.W

    Q = np.eye(N, k)
    logsum = np.zeros(k)
    running = []  # (step, estimate of the max exponent)
    tail_start = n_steps - max(1, n_steps // 10)
    with np.errstate(divide="ignore"):
        for t in range(n_steps):
            Q = gain[t][:, None] * (Wop @ Q)
            if (t + 1) % reortho_interval == 0 or t == n_steps - 1:
                if k == 1:
                    nrm = np.linalg.norm(Q[:, 0])
                    diag = np.array([nrm])
                    Q = Q / nrm if nrm > 0 else np.eye(N, 1)
                else:
                    Q, R = np.linalg.qr(Q)
                    diag = np.diag(R)
                logsum += np.log(np.abs(diag))
                if t >= tail_start:
                    running.append(logsum[0] / (t + 1))
    exps = np.sort(logsum / n_steps)[::-1]
    drift = float(np.ptp(running)) if running else 0.0
    neg = float(np.mean(exps < 0))
    ky = kaplan_yorke(exps) if k == N else float("nan")
    return LyapunovReport(exps, n_steps, reortho_interval, ky, neg, drift, drift < 0.005)


def max_exponent(net: NetworkRealization, drive, n_steps: int = 10000, washout: int = 1000,
                 seed: int = 0) -> float:
    """Largest conditional exponent only (single tangent vector)."""
    return cle_spectrum(net, drive, n_steps, washout, 1, n_exponents=1, seed=seed).max_exponent
