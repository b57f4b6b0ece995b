"""htype-lab: run a JSON-configured experiment and write CSV plus a JSON summary.

Exit status: 0 when every built-in assertion passes, 1 when one fails (the
failing identities are named on stderr), 2 for an invalid config (reported as
``path:LINE: message``).
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from .errors import ContractError
from .experiments import EXPERIMENTS, ConfigError, run_experiment, validate, write_artifacts

EXIT_OK, EXIT_ASSERTION, EXIT_CONFIG = 0, 1, 2


def _key_line(text: str, key) -> int:
    if key is None:
        return 1
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def _config_error(path, line, msg) -> int:
    print(f"{path}:{line}: {msg}", file=sys.stderr)
    return EXIT_CONFIG


def cmd_run(args) -> int:
    path = Path(args.config)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        return _config_error(path, 1, f"cannot read config: {e.strerror}")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        return _config_error(path, e.lineno, f"invalid JSON: {e.msg}")
    try:
        cfg = validate(obj, args.seed)
    except ConfigError as e:
        return _config_error(path, _key_line(text, e.key), str(e))
    try:
        result = run_experiment(cfg)
    except ContractError as e:
        return _config_error(path, _key_line(text, "experiment"), str(e))
    out = Path(args.out) if args.out else Path(cfg.output or f"results/{cfg.experiment}")
    csv_path, summary_path = write_artifacts(cfg, result, out)
    print(f"wrote {csv_path} and {summary_path}")
    if result.failed:
        for name in result.failed:
            print(f"assertion failed: {name}", file=sys.stderr)
        return EXIT_ASSERTION
    print(f"{cfg.experiment}: all {len(result.assertions)} assertions passed")
    return EXIT_OK


def cmd_list(args) -> int:
    width = max(map(len, EXPERIMENTS))
    for name, desc in EXPERIMENTS.items():
        print(f"{name:<{width}}  {desc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="htype-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by a JSON config")
    run.add_argument("config", help="path to the JSON config")
    run.add_argument("--out", help="output directory (overrides the config's 'output')")
    run.add_argument("--seed", type=int, help="seed (overrides the config's 'seed')")
    run.set_defaults(func=cmd_run)
    ls = sub.add_parser("list-experiments", help="list the available experiments")
    ls.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None and args.seed < 0:
        print("--seed must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
