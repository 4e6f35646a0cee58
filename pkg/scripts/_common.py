"""Shared launcher: run one CLI recipe with a config from scripts/configs."""

import sys
from pathlib import Path

from echocons.cli import main

CONFIGS = Path(__file__).resolve().parent / "configs"


def launch(command: str, config: str, default_out: str) -> int:
    argv = [command, "--config", str(CONFIGS / config)]
    extra = sys.argv[1:]
    if "--out" not in extra:
        argv += ["--out", default_out]
    return main(argv + extra)
