"""PC response profiles, test-system geometry and the consistency profile.

Extra arguments are passed to the CLI, e.g. ``--threads 8`` or ``--set T=20000``.
"""

import sys

from _common import launch

if __name__ == "__main__":
    sys.exit(launch("profile", "profile.json", "out/profile"))
