import subprocess
import sys

import numpy as np
import pytest
from PIL import Image


def write_texture(path, size: int, seed: int) -> None:
    """Blur-friendly synthetic source: broadband noise over a wave field."""
    g = np.random.default_rng(seed)
    noise = g.random((size + 2, size + 2))
    smooth = (noise[:-2, :-2] + noise[1:-1, :-2] + noise[2:, :-2] +
              noise[:-2, 1:-1] + noise[1:-1, 1:-1] + noise[2:, 1:-1] +
              noise[:-2, 2:] + noise[1:-1, 2:] + noise[2:, 2:]) / 9.0
    x = np.linspace(0, 6 * np.pi, size)
    waves = np.outer(np.sin(x) * 0.5 + 0.5, np.cos(1.3 * x) * 0.5 + 0.5)
    img = np.clip(0.6 * smooth + 0.4 * waves, 0, 1)
    rgb = (np.stack([img, img * 0.9, img * 0.8], axis=2) * 255).astype(np.uint8)
    Image.fromarray(rgb).save(path)


def run_blurkit(*args) -> None:
    """Drive the dataset toolkit through its public CLI."""
    result = subprocess.run([sys.executable, "-m", "blurkit.cli", *map(str, args)],
                            capture_output=True, text=True)
    if result.returncode != 0:
        raise RuntimeError(f"blurkit {args[0]} failed:\n{result.stderr}")


def make_sources(root, count: int, size: int, seed_base: int):
    root.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        write_texture(root / f"src_{i:03d}.png", size, seed_base + i)
    return root


@pytest.fixture(scope="session")
def mini_data(tmp_path_factory):
    """A small dataset for fast unit tests: lengths 2..4, 72px images."""
    root = tmp_path_factory.mktemp("mini")
    sources = make_sources(root / "sources", 6, 72, 5000)
    images = root / "images"
    manifest = root / "manifest.csv"
    run_blurkit("gen-dataset", "--r-min", 2, "--r-max", 4,
                "--source-dir", sources, "--out-dir", images,
                "--manifest", manifest, "--min-per-length", 2, "--seed", 9)
    return {"manifest": manifest, "images": images}


@pytest.fixture(scope="session")
def toy_data(tmp_path_factory):
    """The r in [1,30] training corpus used by the acceptance tests."""
    root = tmp_path_factory.mktemp("toy")
    splits = {}
    for name, count, seed_base, gen_seed, min_per in [
            ("train", 60, 0, 10, 60),
            ("val", 15, 1000, 11, 8),
            ("test", 15, 2000, 12, 8)]:
        sources = make_sources(root / f"sources_{name}", count, 96, seed_base)
        images = root / f"images_{name}"
        manifest = root / f"{name}.csv"
        run_blurkit("gen-dataset", "--r-min", 2, "--r-max", 30,
                    "--source-dir", sources, "--out-dir", images,
                    "--manifest", manifest, "--min-per-length", min_per,
                    "--seed", gen_seed, "--workers", 2)
        splits[name] = {"manifest": manifest, "images": images}
    # thin the validation split to 5 records per length
    val_l5 = root / "val_l5.csv"
    run_blurkit("subset", "--manifest", splits["val"]["manifest"],
                "--axis", "length", "--k", 5, "--seed", 2, "--out", val_l5)
    splits["val"]["manifest"] = val_l5
    return splits
