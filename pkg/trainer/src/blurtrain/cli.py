"""blurtrain command line: train a blur-parameter regressor, emit predictions."""

from __future__ import annotations

import argparse
import sys

from .predict import predict
from .train import TrainConfig, apply_preset, train


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="blurtrain", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a regression model on a blurred dataset")
    p.add_argument("--train-manifest", required=True)
    p.add_argument("--train-images", required=True)
    p.add_argument("--val-manifest", required=True)
    p.add_argument("--val-images", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--preset", choices=["toy", "paper"], default="toy")
    p.add_argument("--noise-variance", type=float, default=0.0)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("predict", help="write a predictions CSV for a manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--images-root", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--noise-variance", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            config = TrainConfig(train_manifest=args.train_manifest,
                                 train_images=args.train_images,
                                 val_manifest=args.val_manifest,
                                 val_images=args.val_images,
                                 out_dir=args.out_dir,
                                 noise_variance=args.noise_variance,
                                 seed=args.seed)
            config = apply_preset(config, args.preset)
            for key in ("epochs", "batch_size", "learning_rate", "patience"):
                value = getattr(args, key)
                if value is not None:
                    setattr(config, key, value)
            result = train(config)
            print(f"checkpoint: {result.checkpoint_path}")
            print(f"log: {result.log_path}")
            print(f"best_val_mse: {result.best_val_mse}")
        else:
            written, skipped = predict(args.checkpoint, args.manifest,
                                       args.images_root, args.out,
                                       noise_variance=args.noise_variance,
                                       seed=args.seed)
            print(f"predictions: {args.out} ({written} rows, {skipped} skipped)")
        return 0
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
