#!/usr/bin/env python3
"""Train an MCD-LSTM model: ``python3 train.py --config cfg.json [--out ckpt.pt]``."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from mcdtrain.config import TrainConfig
from mcdtrain.training import TrainingDiverged, save_checkpoint, train


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", required=True, help="JSON training configuration")
    parser.add_argument("--out", default=None, help="checkpoint path (derived from config if omitted)")
    args = parser.parse_args(argv)

    cfg = TrainConfig.load(args.config)
    out = args.out or f"{cfg.task}_H{cfg.hidden}_NL{cfg.num_layers}_{cfg.bayes}.pt"
    try:
        checkpoint = train(cfg)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        for entry in exc.log[-5:]:
            print(f"  epoch {entry['epoch']}: loss {entry['loss']}", file=sys.stderr)
        return 1
    save_checkpoint(checkpoint, out)
    final = checkpoint["log"][-1]["loss"]
    print(f"saved {out} (final loss {final:.6f}, {checkpoint['train_seconds']:.1f}s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
