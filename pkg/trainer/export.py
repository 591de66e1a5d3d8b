#!/usr/bin/env python3
"""Export a checkpoint to the accelerator weight format and benchmark it:
``python3 export.py --checkpoint ckpt.pt --out model.bin --table lookup.csv``."""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from mcdtrain.export import export


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--out", required=True, help="weight file to write")
    parser.add_argument("--table", default=None, help="lookup CSV to append the benchmark row to")
    parser.add_argument("--samples", type=int, default=30)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args(argv)

    report = export(args.checkpoint, args.out, args.table, samples=args.samples, seed=args.seed)
    print(json.dumps(report, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
