"""Manifest-driven crop loader for blurred images.

Consumes the blurred-dataset manifest CSV
(``output_path,source_id,r,phi,r_norm,phi_norm,sigma2,seed,width,height``)
and the PNG files it references.  Images smaller than the crop are skipped up
front using the manifest's width/height columns.  Crops are sampled
uniformly; Gaussian noise (when enabled) is added after the crop, on the
[0, 1] intensity scale, without clipping.

Randomness is derived per (epoch, record) from the loader seed, so a fixed
seed reproduces crops, noise, and batch order exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch.utils.data import DataLoader, Dataset

MANIFEST_HEADER = ["output_path", "source_id", "r", "phi", "r_norm", "phi_norm",
                   "sigma2", "seed", "width", "height"]

VAL_EPOCH = 1_000_000_007  # fixed epoch key for validation/prediction crops


@dataclass(frozen=True)
class SampleRow:
    output_path: str
    r: int
    phi: int
    r_norm: float
    phi_norm: float
    width: int
    height: int


def read_manifest(path) -> list[SampleRow]:
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise ValueError(f"unexpected manifest header in {path}: {header}")
        rows = []
        for row in reader:
            if not row:
                continue
            rows.append(SampleRow(output_path=row[0], r=int(row[2]), phi=int(row[3]),
                                  r_norm=float(row[4]), phi_norm=float(row[5]),
                                  width=int(row[8]), height=int(row[9])))
    if not rows:
        raise ValueError(f"manifest {path} has no records")
    return rows


def split_by_crop(rows: list[SampleRow], crop: int) -> tuple[list[SampleRow], int]:
    """Usable rows and the count of skipped (too small for the crop) rows."""
    usable = [r for r in rows if r.width >= crop and r.height >= crop]
    return usable, len(rows) - len(usable)


class BlurCropDataset(Dataset):
    """Random crops of blurred images with normalized (length, angle) targets."""

    def __init__(self, manifest_path, images_root, crop: int,
                 noise_variance: float = 0.0, seed: int = 0):
        if noise_variance < 0:
            raise ValueError("noise_variance must be >= 0")
        self.images_root = Path(images_root)
        self.crop = crop
        self.noise_variance = noise_variance
        self.seed = seed
        self.epoch = 0
        rows = read_manifest(manifest_path)
        self.rows, self.skipped = split_by_crop(rows, crop)
        if not self.rows:
            raise ValueError(f"every image in {manifest_path} is smaller than {crop}")
        self._cache: dict[int, np.ndarray] = {}

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __len__(self) -> int:
        return len(self.rows)

    def _image(self, index: int) -> np.ndarray:
        cached = self._cache.get(index)
        if cached is None:
            path = self.images_root / self.rows[index].output_path
            with Image.open(path) as img:
                cached = np.asarray(img.convert("RGB"), dtype=np.uint8)
            self._cache[index] = cached
        return cached

    def _rng(self, index: int) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed,
                                    spawn_key=(self.epoch, index))
        return np.random.Generator(np.random.PCG64(ss))

    def __getitem__(self, index: int):
        row = self.rows[index]
        image = self._image(index)
        rng = self._rng(index)
        h, w = image.shape[:2]
        top = int(rng.integers(0, h - self.crop + 1))
        left = int(rng.integers(0, w - self.crop + 1))
        patch = image[top:top + self.crop, left:left + self.crop].astype(np.float32) / 255.0
        if self.noise_variance > 0:
            patch = patch + rng.normal(0.0, np.sqrt(self.noise_variance),
                                       size=patch.shape).astype(np.float32)
        tensor = torch.from_numpy(np.ascontiguousarray(patch.transpose(2, 0, 1)))
        target = torch.tensor([row.r_norm, row.phi_norm], dtype=torch.float32)
        return tensor, target


def make_loader(dataset: BlurCropDataset, batch_size: int, shuffle: bool,
                seed: int = 0) -> DataLoader:
    generator = torch.Generator()
    generator.manual_seed(seed)
    return DataLoader(dataset, batch_size=batch_size, shuffle=shuffle,
                      generator=generator if shuffle else None, num_workers=0)
