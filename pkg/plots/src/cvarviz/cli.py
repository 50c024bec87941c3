"""cvarviz command line: render benchmark CSVs into figures."""

from __future__ import annotations

import argparse
import sys

from .render import PlotKind, PlotSpec, SchemaError, render


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def build_parser() -> _Parser:
    p = _Parser(prog="cvarviz", description=__doc__)
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    r = sub.add_parser("render", help="render one figure from CSV inputs")
    r.add_argument(
        "--kind",
        choices=[k.value for k in PlotKind],
        default="sensitivity",
        help="figure type",
    )
    r.add_argument(
        "--in",
        dest="inputs",
        action="append",
        required=True,
        help="input CSV (repeat for multi-trace convergence figures)",
    )
    r.add_argument("--out", required=True, help="output PNG path")
    r.add_argument("--eps", type=float, help="epsilon selector for iterations-to-eps figures")
    r.add_argument("--no-log-x", action="store_true", help="linear horizontal axis")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        spec = PlotSpec(
            inputs=tuple(args.inputs),
            kind=PlotKind(args.kind),
            out=args.out,
            log_x=not args.no_log_x,
            eps=args.eps,
        )
        path = render(spec)
        print(f"wrote {path}", file=sys.stderr)
        return 0
    except SystemExit as e:
        return int(e.code or 0)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (SchemaError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def entry() -> None:
    raise SystemExit(main())
