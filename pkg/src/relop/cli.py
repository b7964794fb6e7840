"""Command line entry point: ``relop <stage> [--config path] [--key value ...]``."""

from __future__ import annotations

import json
import sys

from .config import PipelineConfig, UsageError, apply_overrides, dump_config, load_config
from .pipeline import STAGES, DataError, VerificationFailure, run_stage

USAGE = """usage: relop <stage> [--config PATH] [--KEY VALUE ...]

stages: {stages}, all
        config print   (dump the effective configuration)

Any configuration key can be overridden on the command line, e.g.
  relop all --workdir runs/demo --master_seed 7 --runs 20
Exit codes: 0 ok, 1 usage error, 2 data error, 3 verification failure.
"""


def _parse_args(argv: list[str]):
    if not argv:
        raise UsageError("no stage given")
    stage = argv[0]
    rest = argv[1:]
    config_path = None
    overrides: list[tuple[str, str]] = []
    pos = 0
    while pos < len(rest):
        arg = rest[pos]
        if not arg.startswith("--"):
            if stage == "config" and arg == "print" and pos == 0:
                pos += 1
                continue
            raise UsageError(f"unexpected argument {arg!r}")
        key = arg[2:]
        if pos + 1 >= len(rest):
            raise UsageError(f"missing value for --{key}")
        value = rest[pos + 1]
        pos += 2
        if key == "config":
            config_path = value
        else:
            overrides.append((key, value))
    return stage, config_path, overrides


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if not argv or argv[0] in ("-h", "--help", "help"):
            print(USAGE.format(stages=", ".join(sorted(STAGES))))
            return 0 if argv else 1
        stage, config_path, overrides = _parse_args(argv)
        config = load_config(config_path) if config_path else PipelineConfig()
        apply_overrides(config, overrides)
        if stage == "config":
            if argv[1:2] != ["print"]:
                raise UsageError("the config stage only supports 'config print'")
            sys.stdout.write(dump_config(config))
            return 0
        counts = run_stage(stage, config)
        print(json.dumps({"stage": stage, "counts": counts}, sort_keys=True))
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        print(USAGE.format(stages=", ".join(sorted(STAGES))), file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except VerificationFailure as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
