import numpy as np
import pytest
from scipy.signal import fftconvolve

import blurkit as bk


def make_texture(size: int, seed: int, channels: int = 1) -> np.ndarray:
    """Synthetic textured image in [0, 1] with energy at many scales."""
    rng = np.random.default_rng(seed)
    base = fftconvolve(rng.random((size, size)), np.ones((3, 3)) / 9.0, mode="same")
    x = np.linspace(0, 6 * np.pi, size)
    waves = np.outer(np.sin(x) * 0.5 + 0.5, np.cos(1.3 * x) * 0.5 + 0.5)
    img = np.clip(0.6 * base + 0.4 * waves, 0.0, 1.0)
    if channels == 1:
        return img[:, :, None]
    return np.stack([np.clip(img * s, 0, 1) for s in (1.0, 0.8, 0.6)], axis=2)


def make_bordered_texture(size: int, seed: int, border: int, channels: int = 1) -> np.ndarray:
    """Texture with a flat zero frame, for exactly invertible blur fixtures."""
    img = make_texture(size, seed, channels)
    out = np.zeros_like(img)
    out[border:-border, border:-border] = img[border:-border, border:-border]
    return out


def interior_psnr(a: np.ndarray, b: np.ndarray, margin: int) -> float:
    da = a[margin:-margin, margin:-margin]
    db = b[margin:-margin, margin:-margin]
    mse = float(np.mean((da - db) ** 2))
    if mse == 0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)


@pytest.fixture(scope="session")
def catalog_small():
    return bk.build_catalog(2, 20)


@pytest.fixture(scope="session")
def catalog_full():
    return bk.build_catalog(2, 100)


@pytest.fixture(scope="session")
def source_corpus(tmp_path_factory):
    """A directory of small PNG sources with varied sizes."""
    root = tmp_path_factory.mktemp("sources")
    rng = np.random.default_rng(7)
    for i in range(12):
        size = int(rng.integers(48, 96))
        img = make_texture(size, seed=100 + i, channels=3)
        bk.save_image(root / f"src_{i:03d}.png", img)
    return root
