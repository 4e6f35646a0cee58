"""Conditional Lyapunov spectra, Kaplan-Yorke dimension and consistency over rho.

Extra arguments are passed to the CLI, e.g. ``--threads 8`` or ``--set T=20000``.
"""

import sys

from _common import launch

if __name__ == "__main__":
    sys.exit(launch("lyapunov", "lyapunov.json", "out/lyapunov"))
