"""Command line front door: serve the station, or drive a running one.

    gcs serve --sim --http 127.0.0.1:8080 --data-dir ./data --fps 5
    gcs mission square --side 100
    gcs mission script --file mission.txt
    gcs snap
    gcs process --id snap-000001 --pipeline pipeline.json
    gcs state

`serve` runs the HTTP/WS service (with an embedded simulator under
--sim); the other subcommands are HTTP clients against it. GCS_DATA_DIR
overrides --data-dir.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import httpx


def _addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host, int(port)


def _base_url(args: argparse.Namespace) -> str:
    return f"http://{args.http}"


def _print(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _request(method: str, url: str, **kwargs) -> int:
    try:
        resp = httpx.request(method, url, timeout=120.0, **kwargs)
    except httpx.HTTPError as exc:
        print(f"request failed: {exc}", file=sys.stderr)
        return 2
    try:
        _print(resp.json())
    except ValueError:
        sys.stdout.buffer.write(resp.content)
    return 0 if resp.is_success else 1


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    data_dir = Path(os.environ.get("GCS_DATA_DIR", args.data_dir))
    console_dir = Path(args.console_dir) if args.console_dir else None
    if console_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        console_dir = bundled if bundled.is_dir() else None
    host, port = _addr(args.http)
    cfg = ServiceConfig(
        sim_mode=args.sim,
        drone_addr=_addr(args.drone_addr),
        local_bind=_addr(args.local_bind),
        http_bind=(host, port),
        data_dir=data_dir,
        fps=args.fps,
        settle_ms=args.settle_ms,
        console_dir=console_dir,
    )
    app = create_app(cfg)
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


def cmd_mission(args: argparse.Namespace) -> int:
    if args.shape == "square":
        return _request(
            "POST", f"{_base_url(args)}/mission/square", json={"side_cm": args.side}
        )
    if not args.file:
        print("mission script needs --file", file=sys.stderr)
        return 2
    script = Path(args.file).read_text()
    return _request(
        "POST",
        f"{_base_url(args)}/mission/script",
        json={"script": script, "name": Path(args.file).stem},
    )


def cmd_connect(args: argparse.Namespace) -> int:
    return _request("POST", f"{_base_url(args)}/connect")


def cmd_snap(args: argparse.Namespace) -> int:
    return _request("POST", f"{_base_url(args)}/snap")


def cmd_state(args: argparse.Namespace) -> int:
    return _request("GET", f"{_base_url(args)}/state")


def cmd_process(args: argparse.Namespace) -> int:
    spec = json.loads(Path(args.pipeline).read_text())
    return _request(
        "POST",
        f"{_base_url(args)}/process",
        json={"snapshot_id": args.id, "pipeline": spec},
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the ground control service")
    serve.add_argument("--sim", action="store_true", help="embed a simulated drone")
    serve.add_argument("--http", default="127.0.0.1:8080", help="host:port to serve on")
    serve.add_argument("--data-dir", default="./data")
    serve.add_argument("--fps", type=float, default=5.0)
    serve.add_argument("--settle-ms", type=int, default=500)
    serve.add_argument("--drone-addr", default="192.168.10.1:8889")
    serve.add_argument("--local-bind", default="0.0.0.0:9000")
    serve.add_argument("--console-dir", default=None, help="static console assets")
    serve.set_defaults(func=cmd_serve)

    for name, func, helptext in (
        ("connect", cmd_connect, "open the drone session"),
        ("snap", cmd_snap, "snapshot the latest frame"),
        ("state", cmd_state, "show service state"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--http", default="127.0.0.1:8080")
        p.set_defaults(func=func)

    mission = sub.add_parser("mission", help="fly a scripted mission")
    mission.add_argument("shape", choices=["square", "script"])
    mission.add_argument("--side", type=int, default=100, help="square side in cm")
    mission.add_argument("--file", default=None, help="mission script (one step per line)")
    mission.add_argument("--http", default="127.0.0.1:8080")
    mission.set_defaults(func=cmd_mission)

    process = sub.add_parser("process", help="run an enhancement pipeline on a snapshot")
    process.add_argument("--id", required=True)
    process.add_argument("--pipeline", required=True, help="JSON pipeline file")
    process.add_argument("--http", default="127.0.0.1:8080")
    process.set_defaults(func=cmd_process)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
