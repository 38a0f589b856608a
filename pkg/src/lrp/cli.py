"""Command-line entry point.

    lrp run <program.lrp> --world <file> [--tick-ms N] [--virtual --ticks N]
            [--trace <file>] [--serve <port>] [--script <file>]
            [--watch | --no-watch]

Exit status: 0 clean stop, 1 unreadable inputs or bad arguments, 2 if
the robot collided during the run. `LRP_LOG` sets the log level.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import SessionSetupError
from .interpreter import DEFAULT_TICK_MS
from .session import VIRTUAL, WALLCLOCK, SessionConfig, run_session


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrp", description="live-programming runtime for robot behaviors")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a behavior program against the simulated robot")
    run_p.add_argument("program", help="path to the .lrp source file (watched for edits)")
    run_p.add_argument("--world", required=True, help="world file: segments plus initial robot pose")
    run_p.add_argument("--tick-ms", type=int, default=DEFAULT_TICK_MS, help="tick period in milliseconds")
    run_p.add_argument("--virtual", action="store_true", help="run in virtual time (requires --ticks)")
    run_p.add_argument("--ticks", type=int, default=None, help="tick budget")
    run_p.add_argument("--trace", default=None, help="write a JSON-lines trace to this path")
    run_p.add_argument("--serve", type=int, default=None, metavar="PORT",
                       help="serve snapshots/commands on this port (0 picks a free one)")
    run_p.add_argument("--script", default=None, help="scripted commands: JSON [{tick, cmd, ...}]")
    run_p.add_argument("--watch", action=argparse.BooleanOptionalAction, default=None,
                       help="watch the program file for edits (default: on in wall-clock mode)")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("LRP_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = SessionConfig(
            program_path=args.program,
            world_path=args.world,
            tick_ms=args.tick_ms,
            mode=VIRTUAL if args.virtual else WALLCLOCK,
            max_ticks=args.ticks,
            trace_path=args.trace,
            serve_port=args.serve,
            script_path=args.script,
            watch=args.watch,
        )
        return run_session(config)
    except SessionSetupError as exc:
        print(f"lrp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
