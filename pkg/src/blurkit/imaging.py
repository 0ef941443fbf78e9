"""Image blurring primitives: convolution, noise injection, cropping, I/O.

Images are numpy float64 arrays of shape (height, width, channels) with
channels 1 or 3 and samples nominally in [0, 1].  Loading converts 8-bit
files to that range and promotes grayscale to 3 channels; saving clamps to
[0, 1] and quantizes to 8 bits (values may leave the nominal range after
noise injection, by design).

Convolution boundary modes:

* ``reflect``   mirror including the edge sample (numpy ``symmetric``)
* ``replicate`` repeat the edge sample (numpy ``edge``)
* ``zero``      pad with zeros

The convolution centers an ``h x w`` kernel on cell ``((h-1)//2, (w-1)//2)``.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from scipy.signal import fftconvolve

BOUNDARY_TO_PAD = {
    "reflect": "symmetric",
    "replicate": "edge",
    "zero": "constant",
}

DIRECT_METHOD_MAX_TAPS = 64


class ImagingError(ValueError):
    pass


def as_image(data: np.ndarray) -> np.ndarray:
    """Validate and normalize an array to (H, W, C) float64 with C in {1, 3}."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ImagingError(f"expected (H, W) or (H, W, 1|3) samples, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ImagingError(f"empty image of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ImagingError("image contains NaN or Inf samples")
    return arr


def load_image(path) -> np.ndarray:
    """Read a PNG/JPEG file into a [0, 1] float image with 3 channels."""
    with PILImage.open(path) as img:
        rgb = img.convert("RGB")
        arr = np.asarray(rgb, dtype=np.float64) / 255.0
    return as_image(arr)


def save_image(path, image: np.ndarray) -> None:
    """Write an image as 8-bit PNG or JPEG (by extension), clamping to [0, 1]."""
    arr = as_image(image)
    quantized = np.clip(np.rint(np.clip(arr, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
    if quantized.shape[2] == 1:
        pil = PILImage.fromarray(quantized[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(quantized, mode="RGB")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pil.save(path)


def _pad_for_kernel(channel: np.ndarray, kh: int, kw: int, boundary: str) -> np.ndarray:
    # pad split that makes valid-mode convolution center on ((kh-1)//2, (kw-1)//2)
    cr, cc = (kh - 1) // 2, (kw - 1) // 2
    pad = ((kh - 1 - cr, cr), (kw - 1 - cc, cc))
    mode = BOUNDARY_TO_PAD[boundary]
    if mode == "constant":
        return np.pad(channel, pad, mode="constant", constant_values=0.0)
    return np.pad(channel, pad, mode=mode)


def _convolve_direct(padded: np.ndarray, grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    # spatial shifted-accumulate; independent of the FFT path
    kh, kw = grid.shape
    out = np.zeros((out_h, out_w), dtype=np.float64)
    for u in range(kh):
        for v in range(kw):
            weight = grid[u, v]
            if weight == 0.0:
                continue
            r0 = kh - 1 - u
            c0 = kw - 1 - v
            out += weight * padded[r0:r0 + out_h, c0:c0 + out_w]
    return out


def convolve(image: np.ndarray, kernel, boundary: str = "reflect",
             method: str = "auto") -> np.ndarray:
    """Blur an image with a kernel; same-size output, channels independent.

    ``kernel`` is a PixelKernel or a raw 2-D weight array.  ``method`` picks
    the FFT path, the direct spatial path, or ``auto`` (direct for kernels of
    up to 64 taps, FFT beyond); both paths agree to ~1e-12 on [0, 1] data.
    """
    arr = as_image(image)
    grid = np.asarray(getattr(kernel, "grid", kernel), dtype=np.float64)
    if grid.ndim != 2:
        raise ImagingError("kernel must be a 2-D weight grid")
    if boundary not in BOUNDARY_TO_PAD:
        raise ImagingError(f"unknown boundary mode {boundary!r}")
    if method not in ("auto", "fft", "direct"):
        raise ImagingError(f"unknown convolution method {method!r}")
    kh, kw = grid.shape
    h, w = arr.shape[:2]
    if kh > h or kw > w:
        raise ImagingError(f"kernel {grid.shape} larger than image {(h, w)}")
    if method == "auto":
        method = "direct" if grid.size <= DIRECT_METHOD_MAX_TAPS else "fft"
    out = np.empty_like(arr)
    for ch in range(arr.shape[2]):
        padded = _pad_for_kernel(arr[:, :, ch], kh, kw, boundary)
        if method == "fft":
            out[:, :, ch] = fftconvolve(padded, grid, mode="valid")
        else:
            out[:, :, ch] = _convolve_direct(padded, grid, h, w)
    return out


def add_gaussian_noise(image: np.ndarray, variance: float, seed: int) -> np.ndarray:
    """Add zero-mean i.i.d. Gaussian noise of the given variance.

    Deterministic for a fixed seed.  No clipping: out-of-range samples are
    kept so the noise statistics stay exactly Gaussian; writers clamp on
    export instead.
    """
    arr = as_image(image)
    if variance < 0:
        raise ImagingError(f"noise variance must be >= 0, got {variance!r}")
    if variance > 1:
        raise ImagingError(f"noise variance is on the [0, 1] intensity scale, got {variance!r}")
    if variance == 0:
        return arr.copy()
    rng = np.random.Generator(np.random.PCG64(seed))
    return arr + rng.normal(0.0, math.sqrt(variance), size=arr.shape)


def variance_to_snr_db(variance: float) -> float:
    """SNR in dB for unit-scale images: 0.001 -> 30, 0.01 -> 20, 0.1 -> 10."""
    if variance <= 0:
        raise ImagingError(f"variance must be > 0, got {variance!r}")
    return -10.0 * math.log10(variance)


def random_crop(image: np.ndarray, size: tuple[int, int] = (224, 224),
                seed: int = 0) -> np.ndarray | None:
    """Uniformly random crop of the given (height, width); None if too small.

    None is the skip signal for images below the crop size, not an error.
    """
    arr = as_image(image)
    ch, cw = size
    h, w = arr.shape[:2]
    if h < ch or w < cw:
        return None
    rng = np.random.Generator(np.random.PCG64(seed))
    top = int(rng.integers(0, h - ch + 1))
    left = int(rng.integers(0, w - cw + 1))
    return arr[top:top + ch, left:left + cw].copy()
