"""Command-line interface: a thin client over the service.

Every stage subcommand submits a job and streams its progress lines.
Without --server the service runs in-process, so `seglab all --config c.cfg`
works standalone; with --server URL the same commands drive a remote
instance started via `seglab serve`.

Exit codes: 0 success, 1 configuration or usage error, 2 run failure
(or unreachable server), 3 partial grid.
"""

import argparse
import sys
from pathlib import Path

import httpx

from .client import SegLabClient, ServiceError

STAGES = ("prepare", "weights", "train", "report", "all")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; this CLI reserves 2
    for run failures, so usage problems exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_stage_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="experiment config file")
    parser.add_argument(
        "--seeds", default=None, help="comma-separated seed list overriding train.seeds"
    )
    parser.add_argument("--output-dir", default=None, help="override the artifact directory")
    parser.add_argument("--device", default=None, help="torch device, e.g. cpu")
    parser.add_argument(
        "--deterministic",
        action="store_true",
        default=None,
        help="force reproducible kernels (slower; disables concurrent runs)",
    )
    parser.add_argument("--jobs", type=int, default=None, help="max concurrent runs")
    parser.add_argument(
        "--server", default=None, help="service URL; omitted = run in-process"
    )
    parser.add_argument(
        "--poll", type=float, default=0.5, help="job polling interval in seconds"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="seglab", description="segmentation experiment pipeline")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    descriptions = {
        "prepare": "ingest raw data into the tiled/resized sample cache",
        "weights": "compute class weights for every scheme and freeze them into a config",
        "train": "train every grid cell and seed not yet in results.csv",
        "report": "aggregate results into summary tables and plots",
        "all": "run prepare, weights, train, and report in order",
    }
    for stage in STAGES:
        _add_stage_arguments(subparsers.add_parser(stage, help=descriptions[stage]))

    serve = subparsers.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _parse_seeds(raw: str) -> list:
    try:
        return [int(tok) for tok in raw.split(",") if tok.strip() != ""]
    except ValueError:
        raise ValueError(f"--seeds expects comma-separated integers, got {raw!r}")


def _overrides(args) -> dict:
    overrides = {}
    if args.seeds is not None:
        overrides["seeds"] = _parse_seeds(args.seeds)
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    if args.device is not None:
        overrides["device"] = args.device
    if args.deterministic is not None:
        overrides["deterministic"] = args.deterministic
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    return overrides


def _print_weights_table(result: dict) -> None:
    print("scheme\tw_background\tw_foreground")
    for scheme, pair in result.items():
        print(f"{scheme}\t{pair['w_background']:.4f}\t{pair['w_foreground']:.4f}")


def _run_stage(args) -> int:
    config_path = Path(args.config)
    if not config_path.exists():
        print(f"seglab: error: config file not found: {config_path}", file=sys.stderr)
        return EXIT_USAGE
    try:
        overrides = _overrides(args)
    except ValueError as exc:
        print(f"seglab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        with SegLabClient(args.server) as client:
            job = client.submit_job(args.command, config_path.read_text(), overrides)
            final = client.wait_job(job["id"], poll=args.poll, on_message=print)

            if final.get("error"):
                print(f"seglab: error: {final['error']}", file=sys.stderr)
            elif args.command == "weights" and final.get("result"):
                _print_weights_table(final["result"])
            elif args.command in ("report", "all") and final["state"] != "failed":
                try:
                    print(client.fetch_artifact(job["id"], "tables.txt"), end="")
                except ServiceError:
                    pass  # nothing reported (e.g. training produced no rows)

            code = final.get("exit_code")
            if code is None:
                code = EXIT_OK if final["state"] == "succeeded" else EXIT_FAILURE
            return code
    except ServiceError as exc:
        print(f"seglab: error: {exc.detail}", file=sys.stderr)
        return EXIT_USAGE if exc.status_code == 400 else EXIT_FAILURE
    except httpx.HTTPError as exc:
        print(f"seglab: error: cannot reach server: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service.app import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return EXIT_OK
    return _run_stage(args)


if __name__ == "__main__":
    sys.exit(main())
