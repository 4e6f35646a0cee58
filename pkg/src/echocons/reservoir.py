"""Random echo-state networks and their driven dynamics.

The update map is

    x(t+1) = tanh((1 - r) * (W x(t) + V u + beta) + r * xi(t))

with ``r = 0`` giving the plain deterministic reservoir. ``u`` is the input
sample at the same index as the new state (``input_lag=0``) or the one before
it (``input_lag=1``), see :func:`run`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path

import numba
import numpy as np
import scipy.sparse as sp

from . import rng
from .errors import DegenerateConnectivity, InvalidDrive

# chunk length (steps) for noise generation and kernel calls
_CHUNK = 4096


@dataclass(frozen=True)
class NetworkSpec:
    size: int
    p: float
    rho: float
    input_dim: int = 1
    bias: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("size must be >= 1")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("wiring probability p must lie in [0, 1]")
        if not self.rho >= 0.0:
            raise ValueError("spectral radius rho must be >= 0")
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    def with_rho(self, rho: float) -> "NetworkSpec":
        return NetworkSpec(self.size, self.p, float(rho), self.input_dim, self.bias, self.seed)


@dataclass(frozen=True, eq=False)
class NetworkRealization:
    """A fixed reservoir: internal weights ``W``, input weights ``V``, bias ``beta``."""

    W: np.ndarray
    V: np.ndarray
    beta: np.ndarray
    radius: float
    spec: NetworkSpec

    @property
    def size(self) -> int:
        return self.W.shape[0]

    @property
    def input_dim(self) -> int:
        return self.V.shape[1]

    @cached_property
    def csr(self) -> sp.csr_array:
        return sp.csr_array(self.W)

    @property
    def density(self) -> float:
        return np.count_nonzero(self.W) / self.W.size

    def scaled(self, rho: float) -> "NetworkRealization":
        """Same wiring and weights, rescaled to spectral radius ``rho``."""
        if self.radius == 0.0:
            if rho == 0.0:
                return self
            raise DegenerateConnectivity()
        W = self.W * (rho / self.radius)
        return NetworkRealization(W, self.V, self.beta, spectral_radius(W), self.spec.with_rho(rho))


def spectral_radius(W) -> float:
    """Largest eigenvalue modulus of a square matrix (dense nonsymmetric solve)."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"spectral_radius needs a square matrix, got shape {W.shape}")
    if W.size == 0 or not np.any(W):
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(W))))


def build_network(spec: NetworkSpec) -> NetworkRealization:
    """Draw a random reservoir for ``spec``.

    Every entry of W (diagonal included) is present independently with
    probability ``p`` and carries a standard-normal weight; the matrix is then
    scaled globally to spectral radius ``rho``. Input weights are uniform on
    [-1, 1] and the bias is ``spec.bias`` on every node.

    Raises DegenerateConnectivity when the unscaled draw has zero spectral
    radius but ``rho > 0``; retry with another seed.
    """
    N, L = spec.size, spec.input_dim
    g = rng.stream(spec.seed, rng.WEIGHTS)
    mask = g.random((N, N)) < spec.p
    weights = g.standard_normal((N, N))
    W0 = np.where(mask, weights, 0.0)
    V = rng.stream(spec.seed, rng.INPUT).uniform(-1.0, 1.0, size=(N, L))
    beta = np.full(N, float(spec.bias))

    radius0 = spectral_radius(W0)
    # nilpotent draws come out of the eigensolver as round-off, not exact zero
    if radius0 <= 1e-10 * max(1.0, np.abs(W0).max(initial=0.0)):
        if spec.rho > 0.0:
            raise DegenerateConnectivity()
        W = np.zeros((N, N))
        return NetworkRealization(W, V, beta, 0.0, spec)
    W = W0 * (spec.rho / radius0)
    return NetworkRealization(W, V, beta, spectral_radius(W), spec)


def initial_state(size: int, seed: int, replica: int = 0) -> np.ndarray:
    """Initial condition drawn uniform on (-1, 1) from the INITIAL stream."""
    return rng.stream(seed, rng.INITIAL, replica).uniform(-1.0, 1.0, size=size)


def step(x, u, net: NetworkRealization, r: float = 0.0, xi=None) -> np.ndarray:
    """One update of the reservoir from state ``x`` with input ``u``."""
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if x.shape != (net.size,):
        raise ValueError(f"state has shape {x.shape}, expected ({net.size},)")
    if u.shape != (net.input_dim,):
        raise ValueError(f"input has shape {u.shape}, expected ({net.input_dim},)")
    if not 0.0 <= r <= 1.0:
        raise ValueError("noise mix r must lie in [0, 1]")
    pre = net.W @ x + net.V @ u + net.beta
    if r != 0.0:
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (net.size,):
            raise ValueError(f"noise sample has shape {xi.shape}, expected ({net.size},)")
        pre = (1.0 - r) * pre + r * xi
    return np.tanh(pre)


@numba.njit(cache=True)
def _advance(indptr, indices, data, V, beta, U, X, r, noise, out, skip, pos):
    # X: (K, N) states, updated in place. Every replica runs the same scalar
    # code, so equal inputs give bit-equal outputs regardless of K.
    K, N = X.shape
    C, L = U.shape
    pre = np.empty(N)
    for j in range(C):
        for k in range(K):
            for i in range(N):
                s = 0.0
                for jj in range(indptr[i], indptr[i + 1]):
                    s += data[jj] * X[k, indices[jj]]
                d = 0.0
                for l in range(L):
                    d += V[i, l] * U[j, l]
                pre[i] = s + d + beta[i]
            if r != 0.0:
                for i in range(N):
                    pre[i] = (1.0 - r) * pre[i] + r * noise[k, j, i]
            for i in range(N):
                X[k, i] = np.tanh(pre[i])
            if j >= skip:
                for i in range(N):
                    out[k, pos + j - skip, i] = X[k, i]


def _as_samples(drive, input_dim: int) -> np.ndarray:
    u = getattr(drive, "samples", drive)
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.ndim != 2 or u.shape[1] != input_dim:
        raise ValueError(f"drive has shape {u.shape}, expected (T, {input_dim})")
    if not np.all(np.isfinite(u)):
        raise InvalidDrive()
    return u


def simulate(net: NetworkRealization, drive, x0, washout: int, r: float = 0.0,
             noise_gens=None, input_lag: int = 0) -> np.ndarray:
    """Run ``K`` copies of ``net`` on the same drive; returns (K, T - washout, N).

    ``x0`` is (K, N). ``noise_gens`` holds one generator per copy and is only
    consulted when ``r > 0``.
    """
    u = _as_samples(drive, net.input_dim)
    T = u.shape[0]
    if not 0 <= washout < T:
        raise ValueError(f"washout must satisfy 0 <= washout < T (got {washout}, T={T})")
    if not 0.0 <= r <= 1.0:
        raise ValueError("noise mix r must lie in [0, 1]")
    if input_lag not in (0, 1):
        raise ValueError("input_lag must be 0 or 1")
    X = np.array(x0, dtype=float, ndmin=2, copy=True)
    K, N = X.shape
    if N != net.size:
        raise ValueError(f"initial state width {N} != network size {net.size}")
    if r > 0.0 and (noise_gens is None or len(noise_gens) != K):
        raise ValueError("one noise generator per copy is required when r > 0")
    if input_lag:
        u = np.vstack([np.zeros((1, u.shape[1])), u[:-1]])

    csr = net.csr
    indptr = csr.indptr.astype(np.int64)
    indices = csr.indices.astype(np.int64)
    data = csr.data.astype(float)
    V = np.ascontiguousarray(net.V)
    out = np.empty((K, T - washout, N))
    empty_noise = np.empty((K, 0, N))
    for start in range(0, T, _CHUNK):
        stop = min(start + _CHUNK, T)
        C = stop - start
        if r > 0.0:
            noise = np.stack([g.standard_normal((C, N)) for g in noise_gens])
        else:
            noise = empty_noise
        skip = min(max(washout - start, 0), C)
        pos = max(start - washout, 0)
        _advance(indptr, indices, data, V, net.beta, np.ascontiguousarray(u[start:stop]),
                 X, float(r), noise, out, skip, pos)
    return out


def run(net: NetworkRealization, drive, x0=None, washout: int = 1000, r: float = 0.0,
        noise_seed: int = 0, replica: int = 0, input_lag: int = 0) -> np.ndarray:
    """Drive one reservoir and return the post-washout trajectory, shape (T - washout, N).

    When ``x0`` is omitted it is drawn from the INITIAL stream of
    ``(noise_seed, replica)``; the dynamical noise (``r > 0``) comes from the
    NOISE stream of the same pair.
    """
    if x0 is None:
        x0 = initial_state(net.size, noise_seed, replica)
    gens = [rng.stream(noise_seed, rng.NOISE, replica)] if r > 0.0 else None
    return simulate(net, drive, np.asarray(x0, dtype=float)[None, :], washout, r, gens, input_lag)[0]


# -- serialization -----------------------------------------------------------

FORMAT = "echocons.network/1"


def to_dict(net: NetworkRealization) -> dict:
    """JSON-ready document. W is stored as row/col/value triplets below 10% density."""
    N = net.size
    if net.density < 0.10:
        rows, cols = np.nonzero(net.W)
        W = {"layout": "triplets", "shape": [N, N], "rows": rows.tolist(),
             "cols": cols.tolist(), "values": net.W[rows, cols].tolist()}
    else:
        W = {"layout": "dense", "shape": [N, N], "values": net.W.tolist()}
    return {
        "format": FORMAT,
        "spec": asdict(net.spec),
        "spectral_radius": net.radius,
        "W": W,
        "V": net.V.tolist(),
        "beta": net.beta.tolist(),
    }


def from_dict(doc: dict) -> NetworkRealization:
    if doc.get("format") != FORMAT:
        raise ValueError(f"unsupported network format {doc.get('format')!r}")
    spec = NetworkSpec(**doc["spec"])
    w = doc["W"]
    N = w["shape"][0]
    if w["layout"] == "dense":
        W = np.array(w["values"], dtype=float).reshape(N, N)
    elif w["layout"] == "triplets":
        W = np.zeros((N, N))
        W[np.array(w["rows"], dtype=int), np.array(w["cols"], dtype=int)] = w["values"]
    else:
        raise ValueError(f"unknown W layout {w['layout']!r}")
    V = np.array(doc["V"], dtype=float).reshape(N, -1)
    return NetworkRealization(W, V, np.array(doc["beta"], dtype=float),
                              float(doc["spectral_radius"]), spec)


def save(net: NetworkRealization, path) -> None:
    Path(path).write_text(json.dumps(to_dict(net)))


def load(path) -> NetworkRealization:
    return from_dict(json.loads(Path(path).read_text()))
