#!/usr/bin/env python3
"""End-to-end desk-scale experiment: corpus -> training -> metrics table.

Generates a synthetic corpus, trains both networks, evaluates discrete
classification on the isolated test split, then runs the three monitoring
scenarios and prints one summary table. Everything is seeded, so two runs
of this script produce identical numbers.

Usage:
    python scripts/desk_run.py [--workdir DIR] [--seed N] [--per-class N]
                               [--ae-epochs N] [--rnn-epochs N]
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from breathsentinel import cli  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="desk_run_out")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--per-class", type=int, default=150)
    parser.add_argument("--ae-epochs", type=int, default=200)
    parser.add_argument("--rnn-epochs", type=int, default=300)
    args = parser.parse_args()

    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    corpus = work / "corpus"
    ae_model = work / "ae.bsm"
    model = work / "model.bsm"
    seed = str(args.seed)

    steps = [
        (["synth", "corpus", "--out", str(corpus), "--per-class", str(args.per_class),
          "--seed", seed], "corpus synthesis"),
        (["train-ae", "--corpus", str(corpus), "--out", str(ae_model),
          "--epochs", str(args.ae_epochs), "--seed", seed], "autoencoder training"),
        (["train-rnn", "--corpus", str(corpus), "--model", str(ae_model),
          "--out", str(model), "--epochs", str(args.rnn_epochs), "--seed", seed],
         "classifier training"),
        (["eval", "--model", str(model), "--corpus", str(corpus)], "discrete evaluation"),
    ]
    for argv, label in steps:
        print(f"== {label}")
        started = time.perf_counter()
        code = cli.main(argv)
        print(f"   ({time.perf_counter() - started:.1f} s)")
        if code != 0:
            print(f"step failed with exit code {code}", file=sys.stderr)
            return code

    for kind, duration in (("normal", "300"), ("arrest", "120"), ("decrement", "150")):
        print(f"== simulate {kind}")
        report = work / f"report_{kind}.csv"
        code = cli.main(["simulate", "--model", str(model), "--scenario", kind,
                         "--duration", duration, "--seed", seed,
                         "--report", str(report)])
        expected = 0 if kind == "normal" else 2
        print(report.read_text(), end="")
        if code != expected:
            print(f"simulate {kind} exited {code}, expected {expected}", file=sys.stderr)
            return 1
    print("== all steps finished")
    return 0


if __name__ == "__main__":
    sys.exit(main())
