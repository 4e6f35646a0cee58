"""Command-line front end.

Settings resolve in this order, later winning: recipe defaults, ``--config``
JSON file, ``--set KEY=VALUE`` pairs, dedicated flags (``--seed`` etc.).

Exit codes: 0 success, 1 usage error, 2 runtime error, 3 partial sweep failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback

import numpy as np

from . import __version__
from . import experiments as ex

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_PARTIAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_list(text: str) -> list[float]:
    """``"1,2.5,3"`` or an inclusive range ``"start:step:stop"``."""
    text = text.strip()
    try:
        if ":" in text:
            start, stp, stop = (float(t) for t in text.split(":"))
            if stp <= 0:
                raise ValueError
            n = int(np.floor((stop - start) / stp + 1e-9)) + 1
            return [round(start + i * stp, 12) for i in range(n)]
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid list {text!r}; use 'a,b,c' or 'start:step:stop'")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _kv(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    key, val = text.split("=", 1)
    try:
        return key, json.loads(val)
    except json.JSONDecodeError:
        return key, val


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="echocons", description="Replica-test consistency experiments for echo-state networks.")
    parser.add_argument("--version", action="version", version=f"echocons {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "sections": "input-output section portraits for perturbed drives",
        "memory": "memory profiles, capacity and consistency over rho (and noise-matched pairs)",
        "lyapunov": "conditional Lyapunov spectra, Kaplan-Yorke dimension and consistency over rho",
        "profile": "PC response profiles, test-system geometry and the consistency profile",
        "sweep": "generic (rho x noise x lambda x realization) sweep of named metrics",
        "generate-net": "write network realizations as JSON",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--seed", type=_u64, help="master seed (unsigned 64-bit)")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--threads", type=int, help="worker processes (0 = one per core)")
        p.add_argument("--rho", type=parse_list, help="spectral radius list or start:step:stop")
        p.add_argument("--noise", type=parse_list, help="noise mix r list")
        p.add_argument("--lambda", dest="lam", type=parse_list, help="regularization list")
        p.add_argument("--realizations", type=int, help="number of network realizations")
        p.add_argument("--set", dest="sets", type=_kv, action="append", default=[],
                       metavar="KEY=VALUE", help="override any config field (JSON value)")
    return parser


COMMANDS = {
    "sections": ex.cmd_sections,
    "memory": ex.cmd_memory,
    "lyapunov": ex.cmd_lyapunov,
    "profile": ex.cmd_profile,
    "generate-net": ex.cmd_generate_net,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = dict(args.sets)
    for flag in ("seed", "out", "threads", "rho", "noise", "lam", "realizations"):
        val = getattr(args, flag)
        if val is not None:
            overrides[flag] = val
    try:
        cfg = ex.resolve_config(args.command, args.config, overrides)
    except (ex.ConfigError, OSError) as exc:
        print(f"echocons {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "sweep":
            paths, failed = ex.cmd_sweep(cfg)
        else:
            paths, failed = COMMANDS[args.command](cfg), 0
    except Exception as exc:
        traceback.print_exc()
        print(f"echocons {args.command}: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for p in paths:
        print(p)
    if failed:
        print(f"echocons sweep: {failed} cell(s) failed; see sweep.csv", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
