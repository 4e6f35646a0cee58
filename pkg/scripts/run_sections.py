"""Input-output sections of perturbed drives at a consistent and a chaotic spectral radius.

Extra arguments are passed to the CLI, e.g. ``--threads 8`` or ``--set T=20000``.
"""

import sys

from _common import launch

if __name__ == "__main__":
    sys.exit(launch("sections", "sections.json", "out/sections"))
