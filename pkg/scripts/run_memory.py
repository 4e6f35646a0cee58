"""Memory capacity over the rho grid plus chaos-versus-noise matched pairs.

Extra arguments are passed to the CLI, e.g. ``--threads 8`` or ``--set T=20000``.
"""

import sys

from _common import launch

if __name__ == "__main__":
    sys.exit(launch("memory", "memory.json", "out/memory"))
