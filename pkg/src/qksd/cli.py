"""``qksd`` command line: run a benchmark command from a JSON config."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from .bench import COMMANDS, summarise_distribution
from .noise import write_csv

log = logging.getLogger("qksd")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qksd", description="Krylov subspace measurement-cost benchmarks")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, type=Path, help="JSON config file")
    parser.add_argument("--out", required=True, type=Path, help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def run(command: str, config: dict, out: Path, threads: int = 1, seed: int | None = None) -> tuple[Path, int]:
    """Run one command, write ``<command>.csv`` and its JSON sidecar; return ``(csv, failures)``."""
    seed = int(config.get("seed", 0) if seed is None else seed)
    rows = COMMANDS[command](config, threads=threads, seed=seed)
    csv_path = write_csv(out / f"{command}.csv", rows)
    failures = sum(1 for r in rows if not r.get("identity_ok", True))
    sidecar = {
        "command": command,
        "config": config,
        "seed": seed,
        "rows": len(rows),
        "identity_failures": failures,
        "sha256": hashlib.sha256(csv_path.read_bytes()).hexdigest(),
    }
    if command == "distribution":
        sidecar["summary"] = summarise_distribution(rows)
    (out / f"{command}.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return csv_path, failures


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    config = json.loads(args.config.read_text())
    csv_path, failures = run(args.command, config, args.out, args.threads, args.seed)
    log.info("wrote %s", csv_path)
    if failures:
        log.error("%d records failed identity checks", failures)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
