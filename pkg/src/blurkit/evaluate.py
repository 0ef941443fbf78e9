"""Non-blind deconvolution scoring: error ratios, histograms, R2.

Deconvolvers here accept odd square kernels only; ``deblur`` adapts arbitrary
pixel-line kernels to that contract.  The shorter side is zero padded
symmetrically up to the longer one.  When that square has even size (or a pad
cannot be split evenly), the center sits between cells, so the four
floor/ceil pad splits are enumerated, each deconvolved separately, and the
results averaged; entries of the list may coincide when one axis centers
exactly.  Odd-by-odd kernels pass through as a single exactly-centered
kernel.

The Wiener filter inverts in the frequency domain on a padded copy of the
image (margin 4x the kernel side, boundary-extended, optionally edge-tapered
toward the kernel-blurred image to soften the periodic seam).  With nsr = 0
it degenerates to inverse filtering wherever the kernel spectrum is nonzero.

SSD-based scores exclude an image border of ceil(side / 2) pixels so that
boundary conventions never dominate the comparison; the error ratio divides
the SSD achieved with the estimated kernel by the SSD achieved with the true
kernel under the *same* deconvolver and settings.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imaging
from .kernels import KernelCatalog, canonicalize_prediction, realize_kernel

HIST_EDGES = tuple(1.0 + 0.25 * i for i in range(13))  # 1.00 .. 4.00
HIST_CLAMP = 3.0  # ratios beyond this count as 3.0, ratios below 1.0 as 1.0

PREDICTIONS_HEADER = ["sample_path", "r_pred", "phi_pred"]


class EvalError(ValueError):
    pass


def pad_to_odd_square(kernel) -> list[np.ndarray]:
    """Zero-pad a kernel to one or four odd square kernels (see module doc)."""
    grid = np.asarray(getattr(kernel, "grid", kernel), dtype=np.float64)
    if grid.ndim != 2 or grid.size == 0:
        raise EvalError("kernel must be a nonempty 2-D grid")
    h, w = grid.shape
    side = max(h, w)
    if side % 2 == 1:
        pr = (side - h) // 2
        pc = (side - w) // 2
        return [np.pad(grid, ((pr, side - h - pr), (pc, side - w - pc)))]
    side += 1
    pads_r = [(side - h) // 2, (side - h) - (side - h) // 2]
    pads_c = [(side - w) // 2, (side - w) - (side - w) // 2]
    return [np.pad(grid, ((pr, side - h - pr), (pc, side - w - pc)))
            for pr in pads_r for pc in pads_c]


def _edge_taper(padded: np.ndarray, kernel: np.ndarray, width: int) -> np.ndarray:
    """Blend the border toward the kernel-blurred image over ``width`` pixels."""
    h, w = padded.shape
    blurred = imaging.convolve(padded[:, :, None], kernel, boundary="replicate",
                               method="fft")[:, :, 0]
    ramp = 0.5 - 0.5 * np.cos(np.pi * (np.arange(width) + 0.5) / width)
    wy = np.ones(h)
    wx = np.ones(w)
    wy[:width], wy[-width:] = ramp, ramp[::-1]
    wx[:width], wx[-width:] = ramp, ramp[::-1]
    weight = np.minimum.outer(wy, wx)
    return weight * padded + (1.0 - weight) * blurred


def _check_odd_square(kernel: np.ndarray) -> int:
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1] or kernel.shape[0] % 2 == 0:
        raise EvalError(f"deconvolver needs an odd square kernel, got {kernel.shape}")
    if not np.any(kernel):
        raise EvalError("kernel is all zeros")
    return kernel.shape[0]


def wiener_deconvolve(blurred: np.ndarray, kernel: np.ndarray, nsr: float,
                      boundary: str = "reflect", edge_taper: bool = True,
                      margin: int | None = None) -> np.ndarray:
    """Frequency-domain regularized inverse with an odd square kernel."""
    arr = imaging.as_image(blurred)
    kernel = np.asarray(kernel, dtype=np.float64)
    side = _check_odd_square(kernel)
    if nsr < 0:
        raise EvalError(f"nsr must be >= 0, got {nsr!r}")
    if margin is None:
        margin = max(16, 4 * side)
    pad_mode = imaging.BOUNDARY_TO_PAD.get(boundary)
    if pad_mode is None:
        raise EvalError(f"unknown boundary mode {boundary!r}")

    h, w = arr.shape[:2]
    ph, pw = h + 2 * margin, w + 2 * margin
    psf = np.zeros((ph, pw))
    psf[:side, :side] = kernel
    psf = np.roll(psf, (-(side // 2), -(side // 2)), axis=(0, 1))
    spectrum = np.fft.rfft2(psf)
    power = np.abs(spectrum) ** 2

    out = np.empty_like(arr)
    taper_width = min(2 * side, margin)
    for ch in range(arr.shape[2]):
        if pad_mode == "constant":
            padded = np.pad(arr[:, :, ch], margin, mode="constant", constant_values=0.0)
        else:
            padded = np.pad(arr[:, :, ch], margin, mode=pad_mode)
        if edge_taper and taper_width > 0:
            padded = _edge_taper(padded, kernel, taper_width)
        g = np.fft.rfft2(padded)
        if nsr == 0:
            restored = np.where(power > 1e-24,
                                np.conj(spectrum) * g / np.maximum(power, 1e-300), 0.0)
        else:
            restored = np.conj(spectrum) * g / (power + nsr)
        full = np.fft.irfft2(restored, s=(ph, pw))
        out[:, :, ch] = full[margin:margin + h, margin:margin + w]
    return out


def richardson_lucy(blurred: np.ndarray, kernel: np.ndarray,
                    iterations: int = 30, boundary: str = "reflect") -> np.ndarray:
    """Multiplicative-update deconvolution for nonnegative imagery."""
    arr = imaging.as_image(blurred)
    if np.any(arr < 0):
        raise EvalError("richardson_lucy requires nonnegative input; clamp first")
    kernel = np.asarray(kernel, dtype=np.float64)
    _check_odd_square(kernel)
    if iterations < 0:
        raise EvalError("iterations must be >= 0")
    flipped = kernel[::-1, ::-1]
    eps = 1e-12
    estimate = arr.copy()
    for _ in range(iterations):
        reblurred = imaging.convolve(estimate, kernel, boundary=boundary, method="fft")
        ratio = arr / np.maximum(reblurred, eps)
        estimate = estimate * imaging.convolve(ratio, flipped, boundary=boundary,
                                               method="fft")
        np.maximum(estimate, 0.0, out=estimate)
    return estimate


def deblur(blurred: np.ndarray, kernel, method: str = "wiener",
           nsr: float = 1e-4, iterations: int = 30,
           boundary: str = "reflect", edge_taper: bool = True) -> np.ndarray:
    """Deconvolve with a pixel-line kernel via the odd-square padding protocol.

    Runs the selected deconvolver once per padded kernel variant and returns
    the pixel-wise average of the one or four results.
    """
    results = []
    for padded_kernel in pad_to_odd_square(kernel):
        if method == "wiener":
            results.append(wiener_deconvolve(blurred, padded_kernel, nsr=nsr,
                                             boundary=boundary, edge_taper=edge_taper))
        elif method == "rl":
            safe = np.maximum(imaging.as_image(blurred), 0.0)
            results.append(richardson_lucy(safe, padded_kernel,
                                           iterations=iterations, boundary=boundary))
        else:
            raise EvalError(f"unknown deblur method {method!r}")
    return np.mean(results, axis=0)


@dataclass(frozen=True)
class ErrorRatioRecord:
    sample_path: str
    ratio: float
    ssd_est: float
    ssd_true: float


def ssd(a: np.ndarray, b: np.ndarray, margin: int = 0) -> float:
    """Sum of squared differences over the interior, all channels and pixels."""
    a = imaging.as_image(a)
    b = imaging.as_image(b)
    if a.shape != b.shape:
        raise EvalError(f"shape mismatch {a.shape} vs {b.shape}")
    if margin > 0:
        if 2 * margin >= min(a.shape[0], a.shape[1]):
            raise EvalError(f"margin {margin} leaves no interior for shape {a.shape}")
        a = a[margin:-margin, margin:-margin]
        b = b[margin:-margin, margin:-margin]
    diff = a - b
    return float(np.sum(diff * diff))


def interior_margin(*kernels) -> int:
    """Scoring margin: half the largest padded-kernel side, rounded up."""
    side = 0
    for kernel in kernels:
        side = max(side, max(p.shape[0] for p in pad_to_odd_square(kernel)))
    return math.ceil(side / 2)


def safe_ratio(ssd_est: float, ssd_true: float) -> float:
    """Error ratio with the degenerate-denominator convention.

    A zero true-kernel error with a nonzero estimate error reports +inf;
    two zero errors are identical restorations, ratio 1.
    """
    if ssd_true == 0.0:
        return 1.0 if ssd_est == 0.0 else math.inf
    return ssd_est / ssd_true


def error_ratio(sharp: np.ndarray, blurred: np.ndarray, k_true, k_est,
                method: str = "wiener", sample_path: str = "",
                **params) -> ErrorRatioRecord:
    """SSD ratio of deblurring with the estimated kernel vs the true kernel."""
    sharp = imaging.as_image(sharp)
    blurred = imaging.as_image(blurred)
    if sharp.shape != blurred.shape:
        raise EvalError("sharp and blurred images must have identical dimensions")
    margin = interior_margin(k_true, k_est)
    restored_true = deblur(blurred, k_true, method=method, **params)
    restored_est = deblur(blurred, k_est, method=method, **params)
    ssd_true = ssd(restored_true, sharp, margin)
    ssd_est = ssd(restored_est, sharp, margin)
    return ErrorRatioRecord(sample_path=sample_path,
                            ratio=safe_ratio(ssd_est, ssd_true),
                            ssd_est=ssd_est, ssd_true=ssd_true)


def cumulative_error_histogram(ratios) -> dict:
    """Cumulative counts over edges 1.00..4.00 step 0.25.

    Ratios are clamped into [1.0, 3.0] before counting, so the first bin
    includes everything at or below 1.0 and bins from 3.0 on include every
    overflow; the final bin always equals the sample count.
    """
    values = [r.ratio if isinstance(r, ErrorRatioRecord) else float(r) for r in ratios]
    if not values:
        raise EvalError("no error ratios to bin")
    clamped = np.clip(values, HIST_EDGES[0], HIST_CLAMP)
    counts = [int(np.sum(clamped <= edge + 1e-12)) for edge in HIST_EDGES]
    return {"edges": list(HIST_EDGES), "counts": counts}


def r2_score(actual, predicted) -> float:
    """Coefficient of determination: 1 - SS_residual / SS_total."""
    y = np.asarray(actual, dtype=np.float64)
    x = np.asarray(predicted, dtype=np.float64)
    if y.ndim != 1 or y.shape != x.shape:
        raise EvalError("actual and predicted must be 1-D and equal length")
    if y.size == 0:
        raise EvalError("empty inputs")
    ss_total = float(np.sum((y - y.mean()) ** 2))
    if ss_total == 0.0:
        raise EvalError("actual values are all identical; r2 is undefined")
    ss_residual = float(np.sum((y - x) ** 2))
    return 1.0 - ss_residual / ss_total


@dataclass
class EvalReport:
    r2_length: float
    r2_angle: float
    ratios: list[ErrorRatioRecord] = field(default_factory=list)
    cumulative_hist: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "r2_length": self.r2_length,
            "r2_angle": self.r2_angle,
            "cumulative_hist": self.cumulative_hist,
            "ratios": [
                {"sample_path": r.sample_path, "ratio": r.ratio,
                 "ssd_est": r.ssd_est, "ssd_true": r.ssd_true}
                for r in self.ratios
            ],
        }


def read_predictions(path) -> dict[str, tuple[float, float]]:
    """Read a ``sample_path,r_pred,phi_pred`` CSV into a path-keyed dict."""
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != PREDICTIONS_HEADER:
            raise EvalError(f"bad predictions header: {header}")
        preds = {}
        for row in reader:
            if not row:
                continue
            preds[row[0]] = (float(row[1]), float(row[2]))
    if not preds:
        raise EvalError(f"no predictions in {path}")
    return preds


def write_predictions(path, rows) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PREDICTIONS_HEADER)
        for sample_path, r_pred, phi_pred in rows:
            writer.writerow([sample_path, repr(float(r_pred)), repr(float(phi_pred))])


def r2_from_predictions(manifest, predictions: dict) -> tuple[float, float]:
    """R2 of length and angle predictions against manifest truth labels."""
    actual_r, actual_phi, pred_r, pred_phi = [], [], [], []
    missing = []
    for record in manifest.records:
        pred = predictions.get(record.output_path)
        if pred is None:
            missing.append(record.output_path)
            continue
        actual_r.append(record.r)
        actual_phi.append(record.phi)
        pred_r.append(pred[0])
        pred_phi.append(pred[1])
    if missing:
        raise EvalError(f"{len(missing)} manifest records lack predictions, "
                        f"first: {missing[0]}")
    return r2_score(actual_r, pred_r), r2_score(actual_phi, pred_phi)


def _ratio_job(args) -> ErrorRatioRecord:
    (sample_path, source_path, blurred_path, true_label, est_label,
     method, params) = args
    sharp = imaging.load_image(source_path)
    blurred = imaging.load_image(blurred_path)
    k_true = realize_kernel(*true_label)
    k_est = realize_kernel(*est_label)
    return error_ratio(sharp, blurred, k_true, k_est, method=method,
                       sample_path=sample_path, **params)


def evaluate_predictions(manifest, predictions: dict, catalog: KernelCatalog,
                         source_dir, images_root, method: str = "wiener",
                         workers: int = 1, **params) -> EvalReport:
    """Full harness: R2 scores plus per-image deconvolution error ratios.

    Predicted parameters are canonicalized to realizable catalog kernels
    before deconvolution, so an off-label prediction that rasterizes to the
    true grid scores a ratio of exactly 1.
    """
    r2_length, r2_angle = r2_from_predictions(manifest, predictions)
    jobs = []
    for record in manifest.records:
        r_pred, phi_pred = predictions[record.output_path]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            est_label = canonicalize_prediction(r_pred, phi_pred, catalog)
        jobs.append((record.output_path,
                     str(Path(source_dir) / record.source_id),
                     str(Path(images_root) / record.output_path),
                     (record.r, record.phi), est_label, method, params))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            ratios = list(pool.map(_ratio_job, jobs))
    else:
        ratios = [_ratio_job(job) for job in jobs]
    return EvalReport(r2_length=r2_length, r2_angle=r2_angle, ratios=ratios,
                      cumulative_hist=cumulative_error_histogram(ratios))
