"""Command line entry point.

    restorer-adapter --exchange-dir DIR [--backend identity|pushpull]
                     [--poll-interval SECONDS] [--once]

Runs the polling service until SIGINT/SIGTERM (clean exit 0); with
--once, serves whatever is pending and exits immediately.  Exit code 2
for usage errors.
"""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading

from .backends import BACKENDS
from .service import AdapterConfig, serve_forever, serve_once

EXIT_OK = 0
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="restorer-adapter",
        description="Serve video restoration requests over an exchange "
                    "directory.",
    )
    p.add_argument("--exchange-dir", required=True,
                   help="directory the requester writes scenes into")
    p.add_argument("--backend", choices=sorted(BACKENDS),
                   default="identity")
    p.add_argument("--poll-interval", type=float, default=0.5,
                   metavar="SECONDS")
    p.add_argument("--once", action="store_true",
                   help="serve pending requests and exit")
    p.add_argument("--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = AdapterConfig(
            exchange_dir=args.exchange_dir,
            backend=args.backend,
            poll_interval=args.poll_interval,
        )
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    if args.once:
        handled = serve_once(cfg)
        print(f"handled {handled} request(s)")
        return EXIT_OK

    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda signum, frame: stop.set())
    serve_forever(cfg, stop=stop)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
