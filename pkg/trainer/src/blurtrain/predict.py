"""Prediction: blurred crops in, a `sample_path,r_pred,phi_pred` CSV out.

Rows whose image is smaller than the model's crop are omitted (their count is
reported), mirroring the training-time skip rule.  Values are re-scaled to
the native ranges via the documented affine maps.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import numpy as np
import torch

from .data import VAL_EPOCH, BlurCropDataset, make_loader
from .labels import to_native
from .train import load_checkpoint


def predict(checkpoint_path, manifest_path, images_root, out_path,
            noise_variance: float = 0.0, seed: int = 0,
            batch_size: int = 64, quiet: bool = False) -> tuple[int, int]:
    """Write predictions for every usable manifest row; returns (written, skipped)."""
    model, payload = load_checkpoint(checkpoint_path)
    dataset = BlurCropDataset(manifest_path, images_root, crop=payload["crop"],
                              noise_variance=noise_variance, seed=seed)
    dataset.set_epoch(VAL_EPOCH)
    loader = make_loader(dataset, batch_size, shuffle=False)

    outputs = []
    with torch.no_grad():
        for inputs, _ in loader:
            outputs.append(model(inputs).numpy())
    normalized = np.concatenate(outputs, axis=0)
    if not ((normalized > 0.0).all() and (normalized < 1.0).all()):
        raise RuntimeError("model emitted predictions outside (0, 1)")

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_path", "r_pred", "phi_pred"])
        for row, (r_norm, phi_norm) in zip(dataset.rows, normalized):
            r_pred, phi_pred = to_native(float(r_norm), float(phi_norm))
            writer.writerow([row.output_path, repr(r_pred), repr(phi_pred)])

    if dataset.skipped and not quiet:
        print(f"blurtrain: omitted {dataset.skipped} rows smaller than the "
              f"{payload['crop']} crop", file=sys.stderr)
    return len(dataset.rows), dataset.skipped
