"""Run every JSON config in configs/ through the CLI and report exit codes."""

import argparse
import sys
from pathlib import Path

from htype_lab.cli import main


def run_all(config_dir: Path, out_root: Path) -> int:
    worst = 0
    for cfg in sorted(config_dir.glob("*.json")):
        code = main(["run", str(cfg), "--out", str(out_root / cfg.stem)])
        print(f"{cfg.name}: exit {code}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--configs", type=Path, default=Path(__file__).resolve().parent.parent / "configs")
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    sys.exit(run_all(args.configs, args.out))
