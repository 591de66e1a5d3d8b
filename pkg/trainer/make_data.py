#!/usr/bin/env python3
"""Generate the synthetic heartbeat corpus used by the bundled configs:
``python3 make_data.py [--dir data] [--seed 7]``."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from mcdtrain.data import write_synthetic_corpus


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dir", default="data")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--train", default="96,12,12,12", help="rows per class in the train split")
    parser.add_argument("--test", default="48,16,16,16", help="rows per class in the test split")
    args = parser.parse_args(argv)
    train_counts = tuple(int(v) for v in args.train.split(","))
    test_counts = tuple(int(v) for v in args.test.split(","))
    train_f, test_f = write_synthetic_corpus(args.dir, train_counts, test_counts, seed=args.seed)
    print(f"wrote {train_f} and {test_f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
