# swarmcast/cli.py

"""
Command-line entry point.

Subcommands: ``run`` a scenario, ``compare`` the forwarding modes on one
scenario, ``keygen`` an X25519 key pair and ``inspect`` a hex-encoded frame.
Exit codes: 0 on success, 1 on validation errors, 2 on internal errors.
"""

import argparse
import logging
import secrets
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

from .config import DEFAULT_PROTOCOL_CONFIG
from .core.codec import decode_frame, describe_frame
from .core.crypto import generate_keypair
from .core.forwarding import ForwardingMode
from .exceptions import CodecError, ConfigurationError
from .simulation.metrics import MetricsReport, write_trace
from .simulation.scenario import MAX_SEED, Scenario
from .simulation.simulator import Simulator

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INTERNAL = 2

COMPARE_MODES = (
    ForwardingMode.PER_SOURCE_TREES,
    ForwardingMode.SPANNING_TREE,
    ForwardingMode.NAIVE_FLOOD,
)


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with the validation code instead of argparse's 2."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _seed(value: str) -> int:
    try:
        seed = int(value, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {value!r}") from None
    if not 0 <= seed <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="swarmcast",
        description="Secure multi-hop telemetry broadcast for UAV swarms",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Enable debug logging")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run a scenario and write its metrics report")
    run.add_argument("--scenario", required=True, help="Scenario file (.scn)")
    run.add_argument("--out", required=True, help="Metrics report output path (JSON)")
    run.add_argument("--seed", type=_seed, help="Override the scenario seed (u64)")
    run.add_argument("--trace", help="Optional per-event trace output path (JSON lines)")

    compare = subparsers.add_parser("compare", help="Run a scenario under every forwarding mode")
    compare.add_argument("--scenario", required=True, help="Scenario file (.scn)")

    keygen = subparsers.add_parser("keygen", help="Print an X25519 key pair in hex")
    keygen.add_argument("--seed", help="32-byte seed in hex (default: OS entropy)")

    inspect = subparsers.add_parser("inspect", help="Decode a hex-encoded frame")
    inspect.add_argument("frame", help="Frame bytes in hex")

    return parser


def _configure_logging(verbose: bool) -> None:
    config = DEFAULT_PROTOCOL_CONFIG
    level = logging.DEBUG if verbose else getattr(logging, config.log_level.upper())
    logging.basicConfig(level=level, format=config.log_format, stream=sys.stderr)


# -- Subcommands --------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    scenario = Scenario.from_file(args.scenario)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)

    result = Simulator(scenario, trace=args.trace is not None).run()
    result.report.to_file(args.out)
    if args.trace is not None:
        write_trace(result.trace, args.trace)

    print(result.report.summary_line())
    return EXIT_OK


def _run_mode(scenario: Scenario, mode: ForwardingMode) -> MetricsReport:
    return Simulator(scenario.with_mode(mode)).run().report


def format_comparison(reports: Sequence[MetricsReport]) -> List[str]:
    header = (
        f"{'mode':<18} {'delivery':>9} {'reachable':>10} {'tx/msg':>8} "
        f"{'frames/msg':>11} {'p95 ms':>8} {'mean hops':>10}"
    )
    lines = [header, "-" * len(header)]
    for report in reports:
        p95 = report.latency_ms["p95"]
        hops = report.latency_hops["mean"]
        lines.append(
            f"{report.mode:<18} {report.delivery_ratio:>9.4f} "
            f"{report.reachable_delivery_ratio:>10.4f} "
            f"{report.transmissions_per_message:>8.3f} {report.frames_per_message:>11.3f} "
            f"{'-' if p95 is None else f'{p95:.1f}':>8} "
            f"{'-' if hops is None else f'{hops:.2f}':>10}"
        )
    return lines


def cmd_compare(args: argparse.Namespace) -> int:
    scenario = Scenario.from_file(args.scenario)
    with ThreadPoolExecutor(max_workers=len(COMPARE_MODES)) as executor:
        futures = [executor.submit(_run_mode, scenario, mode) for mode in COMPARE_MODES]
        reports = [future.result() for future in futures]

    print(f"scenario {scenario.name} (seed {scenario.seed})")
    for line in format_comparison(reports):
        print(line)
    return EXIT_OK


def cmd_keygen(args: argparse.Namespace) -> int:
    if args.seed is None:
        seed = secrets.token_bytes(32)
    else:
        try:
            seed = bytes.fromhex(args.seed)
        except ValueError:
            print("error: --seed must be hex", file=sys.stderr)
            return EXIT_VALIDATION
        if len(seed) != 32:
            print("error: --seed must be exactly 32 bytes (64 hex digits)", file=sys.stderr)
            return EXIT_VALIDATION

    keypair = generate_keypair(seed)
    print(f"private {keypair.private_scalar.hex()}")
    print(f"public  {keypair.public_point.hex()}")
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    try:
        raw = bytes.fromhex(args.frame.strip())
    except ValueError:
        print("error: frame must be hex", file=sys.stderr)
        return EXIT_VALIDATION

    try:
        frame = decode_frame(raw, DEFAULT_PROTOCOL_CONFIG.max_ttl)
    except CodecError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_VALIDATION

    print(f"length       {len(raw)}")
    for line in describe_frame(frame):
        print(line)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "keygen": cmd_keygen,
    "inspect": cmd_inspect,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)

    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:
        logger.exception(f"Internal error: {e}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
