"""Driving signals and single-element perturbation families."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import rng


@dataclass(frozen=True, eq=False)
class Drive:
    samples: np.ndarray  # (T, L)
    seed: int | None = None
    distribution: str = "gaussian"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2:
            raise ValueError("drive samples must be a (T, L) matrix")
        if not np.all(np.isfinite(s)):
            raise ValueError("drive samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def length(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    def __len__(self):
        return self.length


def gaussian_drive(T: int, L: int = 1, seed: int = 0) -> Drive:
    """IID standard-normal drive of length ``T``.

    Rows are drawn in time order from the DRIVE stream, so a longer drive with
    the same seed extends a shorter one.
    """
    if T < 1 or L < 1:
        raise ValueError("T and L must be >= 1")
    samples = rng.stream(seed, rng.DRIVE).standard_normal((T, L))
    return Drive(samples, seed, "gaussian")


def perturbed_family(reference: Drive, lag: int, grid) -> list[Drive]:
    """One copy of ``reference`` per grid value, with only element ``T - lag`` replaced.

    The position is 1-indexed, so ``lag=0`` replaces the final sample.
    """
    T = reference.length
    if not 0 <= lag < T:
        raise ValueError(f"lag must satisfy 0 <= lag < T (got {lag}, T={T})")
    idx = T - 1 - lag
    out = []
    for value in grid:
        s = np.array(reference.samples)
        s[idx, :] = value
        out.append(replace(reference, samples=s, distribution=f"{reference.distribution}+perturbed"))
    return out


def write_csv(drive: Drive, path) -> None:
    """One row per time step: ``t, u0, u1, ...``."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"u{j}" for j in range(drive.width)])
        for t, row in enumerate(drive.samples):
            w.writerow([t] + [repr(float(v)) for v in row])


def read_csv(path) -> Drive:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return Drive(data[:, 1:], None, "csv")
