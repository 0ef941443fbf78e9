"""Balanced blurred-dataset generation with manifests and provenance.

A generation run walks lengths in ascending order.  For each length it
repeats full passes over that length's sorted angle list until the per-length
minimum is reached, drawing a fresh source image (without replacement, per
length) for every output; the source pool is reshuffled and reused once
exhausted unless strict mode is on.  No-blur records labeled (1, 0) are
appended after the blurred lengths.

Every record carries full provenance: source id, integer labels, normalized
labels, noise variance, the exact noise seed, and output dimensions.  A run
is a pure function of (seed, sorted source listing, config): manifests are
byte-identical across reruns, regardless of worker count.

Manifest format: CSV with header
``output_path,source_id,r,phi,r_norm,phi_norm,sigma2,seed,width,height``
plus a JSON config sidecar at ``<manifest>.config.json`` holding the catalog
hash, generator settings and a digest of the source listing.

Label normalization is affine over the native ranges r in [1, 100] and
phi in (-90, 90]:  ``r_norm = (r - 1) / 99``, ``phi_norm = (phi + 89) / 179``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

import numpy as np

from . import imaging
from .kernels import KernelCatalog, identity_kernel

R_MIN_NATIVE, R_MAX_NATIVE = 1, 100
PHI_MIN_NATIVE, PHI_MAX_NATIVE = -89, 90

MANIFEST_HEADER = ["output_path", "source_id", "r", "phi", "r_norm", "phi_norm",
                   "sigma2", "seed", "width", "height"]

SOURCE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp"}


class DatasetError(ValueError):
    pass


class SourceShortfallError(DatasetError):
    """Strict-mode failure: not enough unique sources for some length."""

    def __init__(self, shortfalls: dict[int, tuple[int, int]]):
        self.shortfalls = shortfalls
        lines = ", ".join(f"length {r}: needed {need}, pool has {have}"
                          for r, (need, have) in sorted(shortfalls.items()))
        super().__init__(f"source pool exhausted ({lines})")


def normalize_labels(r: int, phi: int) -> tuple[float, float]:
    if not (R_MIN_NATIVE <= r <= R_MAX_NATIVE):
        raise DatasetError(f"length label {r} outside [{R_MIN_NATIVE}, {R_MAX_NATIVE}]")
    if not (PHI_MIN_NATIVE <= phi <= PHI_MAX_NATIVE):
        raise DatasetError(f"angle label {phi} outside [{PHI_MIN_NATIVE}, {PHI_MAX_NATIVE}]")
    return (r - 1) / 99.0, (phi + 89) / 179.0


def denormalize_labels(r_norm: float, phi_norm: float) -> tuple[int, int]:
    r = int(round(r_norm * 99.0 + 1.0))
    phi = int(round(phi_norm * 179.0 - 89.0))
    if not (R_MIN_NATIVE <= r <= R_MAX_NATIVE) or not (PHI_MIN_NATIVE <= phi <= PHI_MAX_NATIVE):
        raise DatasetError(f"normalized labels ({r_norm!r}, {phi_norm!r}) decode out of range")
    return r, phi


@dataclass(frozen=True)
class BlurSampleRecord:
    output_path: str
    source_id: str
    r: int
    phi: int
    r_norm: float
    phi_norm: float
    sigma2: float
    seed: int
    width: int
    height: int

    def to_row(self) -> list[str]:
        return [self.output_path, self.source_id, str(self.r), str(self.phi),
                repr(self.r_norm), repr(self.phi_norm), repr(self.sigma2),
                str(self.seed), str(self.width), str(self.height)]

    @classmethod
    def from_row(cls, row: list[str]) -> "BlurSampleRecord":
        return cls(output_path=row[0], source_id=row[1], r=int(row[2]),
                   phi=int(row[3]), r_norm=float(row[4]), phi_norm=float(row[5]),
                   sigma2=float(row[6]), seed=int(row[7]), width=int(row[8]),
                   height=int(row[9]))


@dataclass
class Manifest:
    records: list[BlurSampleRecord]
    catalog_hash: str = ""
    config: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def write(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="ascii", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(MANIFEST_HEADER)
            for record in self.records:
                writer.writerow(record.to_row())
        sidecar = {"catalog_hash": self.catalog_hash, **self.config}
        with open(self.sidecar_path(path), "w", encoding="ascii") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def sidecar_path(path) -> Path:
        return Path(str(path) + ".config.json")

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        with open(path, "r", encoding="ascii", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != MANIFEST_HEADER:
                raise DatasetError(f"bad manifest header in {path}: {header}")
            records = [BlurSampleRecord.from_row(row) for row in reader if row]
        catalog_hash = ""
        config: dict = {}
        sidecar = cls.sidecar_path(path)
        if sidecar.exists():
            with open(sidecar, "r", encoding="ascii") as fh:
                config = json.load(fh)
            catalog_hash = config.pop("catalog_hash", "")
        return cls(records=records, catalog_hash=catalog_hash, config=config)


def list_sources(source_dir) -> list[str]:
    """Sorted relative paths of candidate source images under a directory."""
    root = Path(source_dir)
    if not root.is_dir():
        raise DatasetError(f"source directory {root} does not exist")
    names = sorted(
        str(PurePosixPath(p.relative_to(root)))
        for p in root.rglob("*")
        if p.is_file() and p.suffix.lower() in SOURCE_EXTENSIONS
    )
    if not names:
        raise DatasetError(f"no decodable source images in {root}")
    return names


def source_digest(source_dir, names: list[str]) -> str:
    root = Path(source_dir)
    digest = hashlib.sha256()
    for name in names:
        digest.update(name.encode())
        digest.update(str((root / name).stat().st_size).encode())
    return digest.hexdigest()


def _length_seed(master_seed: int, length: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(length,))


def _generate_for_length(args) -> tuple[int, list[BlurSampleRecord], tuple[int, int] | None]:
    (length, angles, grids, target, sources, source_root, out_root,
     sigma2, master_seed, strict) = args
    rng = np.random.default_rng(_length_seed(master_seed, length))
    order = list(rng.permutation(len(sources)))
    records: list[BlurSampleRecord] = []
    shortfall = None
    pool_pos = 0
    for idx in range(target):
        angle = angles[idx % len(angles)]
        noise_seed = int(rng.integers(0, 2**63))
        if pool_pos >= len(order):
            if strict:
                shortfall = (target, len(sources))
                break
            order = list(rng.permutation(len(sources)))
            pool_pos = 0
        source_id = sources[order[pool_pos]]
        pool_pos += 1
        image = imaging.load_image(Path(source_root) / source_id)
        blurred = imaging.convolve(image, grids[angle], boundary="reflect", method="fft")
        if sigma2 > 0:
            blurred = imaging.add_gaussian_noise(blurred, sigma2, noise_seed)
        rel_path = f"r{length:03d}/r{length:03d}_phi{angle:+03d}_{idx:04d}.png"
        imaging.save_image(Path(out_root) / rel_path, blurred)
        r_norm, phi_norm = normalize_labels(length, angle)
        records.append(BlurSampleRecord(
            output_path=rel_path, source_id=source_id, r=length, phi=angle,
            r_norm=r_norm, phi_norm=phi_norm, sigma2=sigma2, seed=noise_seed,
            width=blurred.shape[1], height=blurred.shape[0]))
    return length, records, shortfall


def generate_dataset(catalog: KernelCatalog, source_dir, out_dir,
                     min_per_length: int = 175, sigma2: float = 0.0,
                     seed: int = 0, workers: int = 1,
                     no_blur_count: int | None = None,
                     strict: bool = False) -> Manifest:
    """Generate a balanced blurred dataset and its manifest.

    ``no_blur_count`` identity records are appended when the catalog includes
    the (1, 0) entry; it defaults to max(min_per_length, 1).  With ``strict``
    a length that would have to reuse a source image aborts the run with a
    shortfall report instead.
    """
    if min_per_length < 0:
        raise DatasetError("min_per_length must be >= 0")
    sources = list_sources(source_dir)
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    if no_blur_count is None:
        no_blur_count = max(min_per_length, 1)

    jobs = []
    for length in catalog.lengths():
        angles = catalog.angles_for_length(length)
        if length == 1:
            target = no_blur_count if catalog.includes_identity else 0
        else:
            cycles = max(1, math.ceil(min_per_length / len(angles)))
            target = cycles * len(angles)
        if target == 0:
            continue
        grids = {angle: np.asarray(catalog.get(length, angle).grid) for angle in angles}
        jobs.append((length, angles, grids, target, sources, str(source_dir),
                     str(out_root), float(sigma2), int(seed), strict))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_generate_for_length, jobs))
    else:
        results = [_generate_for_length(job) for job in jobs]

    shortfalls = {length: miss for length, _, miss in results if miss is not None}
    if shortfalls:
        raise SourceShortfallError(shortfalls)

    records: list[BlurSampleRecord] = []
    for _, recs, _ in sorted(results, key=lambda item: item[0]):
        records.extend(recs)

    config = {
        "min_per_length": min_per_length,
        "no_blur_count": no_blur_count,
        "sigma2": float(sigma2),
        "seed": int(seed),
        "workers": int(workers),
        "source_dir": str(source_dir),
        "source_digest": source_digest(source_dir, sources),
        "r_min": catalog.r_min,
        "r_max": catalog.r_max,
    }
    return Manifest(records=records, catalog_hash=catalog.content_hash(), config=config)


def reproduce_record(record: BlurSampleRecord, catalog: KernelCatalog,
                     source_dir) -> np.ndarray:
    """Re-run blur + noise for a record from its stored provenance."""
    image = imaging.load_image(Path(source_dir) / record.source_id)
    kernel = catalog.get(record.r, record.phi) if record.r > 1 else identity_kernel()
    blurred = imaging.convolve(image, kernel, boundary="reflect", method="fft")
    if record.sigma2 > 0:
        blurred = imaging.add_gaussian_noise(blurred, record.sigma2, record.seed)
    return blurred


def distribution_report(manifest: Manifest) -> dict:
    """Counts per length/angle plus unique-source counts, JSON-friendly."""
    if not manifest.records:
        raise DatasetError("manifest is empty")
    by_length: dict[int, int] = {}
    by_angle: dict[int, int] = {}
    sources_by_length: dict[int, set] = {}
    sources_by_angle: dict[int, set] = {}
    for record in manifest.records:
        by_length[record.r] = by_length.get(record.r, 0) + 1
        by_angle[record.phi] = by_angle.get(record.phi, 0) + 1
        sources_by_length.setdefault(record.r, set()).add(record.source_id)
        sources_by_angle.setdefault(record.phi, set()).add(record.source_id)
    return {
        "total_records": len(manifest.records),
        "per_length": {str(k): by_length[k] for k in sorted(by_length)},
        "per_angle": {str(k): by_angle[k] for k in sorted(by_angle)},
        "unique_sources_per_length": {str(k): len(sources_by_length[k])
                                      for k in sorted(sources_by_length)},
        "unique_sources_per_angle": {str(k): len(sources_by_angle[k])
                                     for k in sorted(sources_by_angle)},
    }


def subset(manifest: Manifest, axis: str, k: int, seed: int = 0) -> Manifest:
    """Sample k records per distinct axis value ("length" or "angle")."""
    if axis not in ("length", "angle"):
        raise DatasetError(f"axis must be 'length' or 'angle', got {axis!r}")
    if k < 0:
        raise DatasetError("k must be >= 0")
    key = (lambda rec: rec.r) if axis == "length" else (lambda rec: rec.phi)
    groups: dict[int, list[BlurSampleRecord]] = {}
    for record in manifest.records:
        groups.setdefault(key(record), []).append(record)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    picked: list[BlurSampleRecord] = []
    for value in sorted(groups):
        bucket = groups[value]
        if len(bucket) < k:
            warnings.warn(f"{axis} {value} has only {len(bucket)} records, need {k}; taking all")
            picked.extend(bucket)
            continue
        chosen = rng.choice(len(bucket), size=k, replace=False)
        picked.extend(bucket[i] for i in sorted(chosen))
    config = dict(manifest.config)
    config["subset"] = {"axis": axis, "k": k, "seed": seed}
    return Manifest(records=picked, catalog_hash=manifest.catalog_hash, config=config)
