"""Command-line entry points: serve, eval, lint, walk, proxy."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .dsl import ParseError, parse_ruleset
from .fingerprint import from_wire
from .lint import SEVERITY_WARNING, lint_ruleset
from .proxy import ProxyConfig, ProxyServer
from .rules import ValidationError, fire_rules
from .server import DpiServer, ServerConfig, ServerMode, parse_now_param
from .venue import NonMonotonicPath, VenueFormatError, load_path, load_venue, walk


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_rules(path: str):
    return parse_ruleset(_read(path))


def _evaluate_json(ruleset, fp, now: int) -> str:
    result = fire_rules(ruleset, fp, now)
    return json.dumps(
        {
            "fired": list(result.fired_rule_ids),
            "snippets": [{"id": s.id, "title": s.title, "html": s.html} for s in result.snippets],
        },
        ensure_ascii=False,
        separators=(",", ":"),
    )


def cmd_serve(args) -> int:
    venue = load_venue(_read(args.venue)) if args.venue else None
    port = args.port if args.port is not None else int(os.environ.get("SPOTEX_PORT", "8080"))
    config = ServerConfig(
        port=port,
        mode=ServerMode(args.mode),
        rules_path=Path(args.rules),
        venue_path=Path(args.venue) if args.venue else None,
        session_ttl_ms=args.session_ttl_ms,
        timezone_offset_minutes=args.tz_offset_min,
        seed=args.seed,
        static_dir=Path(args.static) if args.static else None,
    )
    try:
        server = DpiServer(config, ruleset_text=_read(args.rules), venue=venue)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({"port": server.port, "mode": args.mode}), flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_eval(args) -> int:
    ruleset = _load_rules(args.rules)
    fp = from_wire(json.loads(_read(args.fingerprint)))
    now = parse_now_param(args.now) if args.now else 0
    print(_evaluate_json(ruleset, fp, now))
    return 0


def cmd_lint(args) -> int:
    ruleset = _load_rules(args.rules)
    venue = load_venue(_read(args.venue)) if args.venue else None
    diagnostics = lint_ruleset(ruleset, venue)
    for diag in diagnostics:
        print(diag.to_json())
    return 1 if any(d.severity == SEVERITY_WARNING for d in diagnostics) else 0


def cmd_walk(args) -> int:
    ruleset = _load_rules(args.rules)
    venue = load_venue(_read(args.venue))
    path = load_path(_read(args.path))
    for (_, t), fp in zip(path, walk(venue, path, args.seed)):
        now = (t // 60_000) % 1440
        result = fire_rules(ruleset, fp, now)
        print(
            json.dumps(
                {"t": t, "fired": list(result.fired_rule_ids)},
                ensure_ascii=False,
                separators=(",", ":"),
            )
        )
    return 0


def cmd_proxy(args) -> int:
    server = ProxyServer(ProxyConfig(listen_port=args.listen, dpi_url=args.dpi, cache_ttl_ms=args.cache_ttl_ms))
    print(json.dumps({"port": server.port}), flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spotex", description="Network-proximity content pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the DPI server")
    serve.add_argument("--rules", required=True, help="ruleset file (.spotex)")
    serve.add_argument("--venue", help="venue JSON file (required in sim mode)")
    serve.add_argument("--port", type=int, default=None, help="listen port (default $SPOTEX_PORT or 8080)")
    serve.add_argument("--mode", choices=["sim", "push"], default="sim")
    serve.add_argument("--seed", type=int, default=0, help="simulator noise seed")
    serve.add_argument("--session-ttl-ms", type=int, default=600_000)
    serve.add_argument("--tz-offset-min", type=int, default=0, help="minutes added to UTC for time rules")
    serve.add_argument("--static", help="directory with the browser shim and console assets")
    serve.set_defaults(func=cmd_serve)

    evalp = sub.add_parser("eval", help="evaluate rules against a fingerprint file")
    evalp.add_argument("--rules", required=True)
    evalp.add_argument("--fingerprint", required=True, help="fingerprint JSON array file")
    evalp.add_argument("--now", help="time of day HH:MM (default 00:00)")
    evalp.set_defaults(func=cmd_eval)

    lintp = sub.add_parser("lint", help="check a ruleset for dead rules and orphans")
    lintp.add_argument("--rules", required=True)
    lintp.add_argument("--venue", help="also check selectors against this venue")
    lintp.set_defaults(func=cmd_lint)

    walkp = sub.add_parser("walk", help="replay a path through the venue, printing fired rules")
    walkp.add_argument("--rules", required=True)
    walkp.add_argument("--venue", required=True)
    walkp.add_argument("--path", required=True, help="JSON array of {x,y,floor,t}")
    walkp.add_argument("--seed", type=int, default=0)
    walkp.set_defaults(func=cmd_walk)

    proxyp = sub.add_parser("proxy", help="run the enriching forward proxy")
    proxyp.add_argument("--listen", type=int, default=8888)
    proxyp.add_argument("--dpi", default="http://127.0.0.1:8080", help="DPI server base URL")
    proxyp.add_argument("--cache-ttl-ms", type=int, default=0)
    proxyp.set_defaults(func=cmd_proxy)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError, VenueFormatError, NonMonotonicPath, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
