"""Consistency analysis of echo-state networks via the replica test."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("echocons")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .reservoir import NetworkRealization, NetworkSpec, build_network, run, spectral_radius, step
from .signals import Drive, gaussian_drive, perturbed_family
from .replica import (ConsistencyReport, ReplicaEnsemble, consistency, global_consistency,
                      node_consistency, readout_consistency, replica_run)
from .readout import MemoryProfile, Readout, apply_readout, memory_capacity, memory_task, ridge_fit
from .lyapunov import LyapunovReport, cle_spectrum, jacobian, kaplan_yorke
from .profile import (ConsistencyProfile, CovarianceDecomposition, consistent_component,
                      covariance, cross_covariance, pc_readout_consistencies, profile,
                      test_system_sample, whitening_transform)

__all__ = [
    "NetworkSpec", "NetworkRealization", "build_network", "spectral_radius", "step", "run",
    "Drive", "gaussian_drive", "perturbed_family",
    "ReplicaEnsemble", "ConsistencyReport", "replica_run", "node_consistency",
    "global_consistency", "readout_consistency", "consistency",
    "Readout", "MemoryProfile", "ridge_fit", "apply_readout", "memory_task", "memory_capacity",
    "LyapunovReport", "jacobian", "cle_spectrum", "kaplan_yorke",
    "CovarianceDecomposition", "ConsistencyProfile", "covariance", "cross_covariance",
    "consistent_component", "whitening_transform", "profile", "pc_readout_consistencies",
    "test_system_sample",
]
