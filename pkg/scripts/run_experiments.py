"""Run every sweep at a chosen scale and collect the outputs in one directory.

    python3 scripts/run_experiments.py --out runs/small --n 16 --trials 5

Each command is invoked through the same entry point as ``tempered-ot``; the
exit code of every run is written next to its output.
"""
import argparse
import json
from pathlib import Path

from tempered_ot.cli import main as cli_main
from tempered_ot.experiments import COMMANDS


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/default")
    p.add_argument("--n", type=int, default=None, help="override every command's n")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--only", nargs="+", choices=COMMANDS, default=list(COMMANDS))
    return p.parse_args()


def main():
    args = parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    status = {}
    for command in args.only:
        suffix = ".json" if command == "sparsity-map" else ".csv"
        argv = [command, "--seed", str(args.seed), "--out", str(out / (command + suffix))]
        if args.n is not None:
            argv += ["--n", str(args.n)]
        if args.trials is not None and command != "sparsity-map":
            argv += ["--trials", str(args.trials)]
        print("tempered-ot", " ".join(argv))
        status[command] = cli_main(argv)
    (out / "status.json").write_text(json.dumps(status, indent=1) + "\n")
    print(json.dumps(status))


if __name__ == "__main__":
    main()
