"""Discrete linear motion-blur kernels: construction, quantization, cataloging.

A continuous line segment of Euclidean length ``r`` pixels and orientation
``a`` degrees (measured from the horizontal axis, ``a`` in (-90, 90]) maps to
a binary pixel line on an ``h x w`` grid:

* ``h = ceil(r * |sin a|)``, forced to 1 when ``sin a == 0``
* ``w = ceil(r * cos a)``, forced to 1 when ``cos a == 0``

Grids are row-major with row 0 at the top.  Nonnegative angles are drawn
from the lower-left cell ``(h-1, 0)`` to the upper-right cell ``(0, w-1)``;
negative angles from the upper-left cell ``(0, 0)`` to the lower-right cell
``(h-1, w-1)``.  The rasterization is the classic Bresenham midpoint walk,
so a line always occupies ``max(h, w)`` cells (its Chebyshev length).

Exactness: products ``r*sin(a)`` / ``r*cos(a)`` within ``1e-9`` of an integer
are snapped to that integer before the ceiling.  For integer parameters up to
r = 100 this is exact (the only rational sin/cos values at whole degrees are
at 0, 30, 60 and 90; the nearest any other product comes to an integer is
about 1.5e-4), and it keeps half-integer boundaries such as (2, 60) in the
vertical group instead of letting floating-point slop push them out.

Many continuous angles collapse to one pixel line.  Each unique grid gets a
single integer angle label: 0 if the collapsed set contains 0, 90 if it
contains 90, otherwise the ceiling of the set's median.  Negative-angle
kernels are vertical mirrors of positive-angle ones and carry the negated
label; -90 never appears as a label (it coincides with +90).
"""

from __future__ import annotations

import hashlib
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

EXACT_TOL = 1e-9

GRID_DTYPE = np.float64


class KernelError(ValueError):
    """Invalid kernel parameters or malformed catalog data."""


def _ceil_exact(t: float) -> int:
    """Ceiling with snapping of near-integer inputs (see module docstring)."""
    n = round(t)
    if abs(t - n) < EXACT_TOL:
        return int(n)
    return math.ceil(t)


def _check_line_params(length: float, angle_deg: float) -> None:
    if not (length >= 1.0):
        raise KernelError(f"line length must be >= 1, got {length!r}")
    if not (-90.0 < angle_deg <= 90.0):
        raise KernelError(f"line angle must lie in (-90, 90], got {angle_deg!r}")


def kernel_dims(length: float, angle_deg: float) -> tuple[int, int]:
    """Grid (height, width) for a continuous line of given length and angle."""
    _check_line_params(length, angle_deg)
    rad = math.radians(angle_deg)
    s = abs(math.sin(rad))
    c = math.cos(rad)
    h = 1 if s < EXACT_TOL else max(_ceil_exact(length * s), 1)
    w = 1 if abs(c) < EXACT_TOL else max(_ceil_exact(length * c), 1)
    return h, w


def bresenham_line(r0: int, c0: int, r1: int, c1: int) -> list[tuple[int, int]]:
    """Integer Bresenham walk from (r0, c0) to (r1, c1), endpoints included.

    Tie-breaking matches ``skimage.draw.line`` (verified exhaustively in the
    test suite), which is what freezes the kernel catalog contents.
    """
    dr = abs(r1 - r0)
    dc = abs(c1 - c0)
    sr = 1 if r1 > r0 else -1
    sc = 1 if c1 > c0 else -1

    steep = dr > dc
    r, c = r0, c0
    if steep:
        r, c = c, r
        dr, dc = dc, dr
        sr, sc = sc, sr

    points = []
    d = 2 * dr - dc
    for _ in range(dc):
        points.append((c, r) if steep else (r, c))
        while d >= 0:
            r += sr
            d -= 2 * dc
        c += sc
        d += 2 * dr
    points.append((r1, c1))
    return points


def rasterize_line(length: float, angle_deg: float) -> np.ndarray:
    """Binary (uint8) pixel-line mask for a continuous line."""
    h, w = kernel_dims(length, angle_deg)
    grid = np.zeros((h, w), dtype=np.uint8)
    if angle_deg >= 0:
        points = bresenham_line(h - 1, 0, 0, w - 1)
    else:
        points = bresenham_line(0, 0, h - 1, w - 1)
    for r, c in points:
        grid[r, c] = 1
    return grid


def quantize_angle(angles: Iterable[int]) -> int:
    """Collapse a set of continuous angles in [0, 90] to one integer label.

    0 wins if present, then 90; otherwise the ceiling of the median (the
    median of an even-sized set is the midpoint of the two central values).
    """
    values = sorted(set(int(a) for a in angles))
    if not values:
        raise KernelError("cannot quantize an empty angle set")
    if values[0] < 0 or values[-1] > 90:
        raise KernelError(f"angle set must lie within [0, 90], got {values[0]}..{values[-1]}")
    if 0 in values:
        return 0
    if 90 in values:
        return 90
    n = len(values)
    if n % 2 == 1:
        median = values[n // 2]
    else:
        median = (values[n // 2 - 1] + values[n // 2]) / 2
    return math.ceil(median)


@dataclass(frozen=True)
class PixelKernel:
    """A normalized blur kernel with its integer (length, angle) label.

    ``source_angles`` lists the integer continuous angles that rasterize to
    this grid (empty for kernels loaded from disk or built synthetically).
    """

    grid: np.ndarray
    length: int
    angle: int
    source_angles: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=GRID_DTYPE)
        if grid.ndim != 2 or grid.size == 0:
            raise KernelError("kernel grid must be a nonempty 2-D array")
        if np.any(grid < 0):
            raise KernelError("kernel weights must be nonnegative")
        total = float(grid.sum())
        if abs(total - 1.0) > 1e-12:
            raise KernelError(f"kernel weights must sum to 1, got {total!r}")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    @property
    def chebyshev_length(self) -> int:
        return max(self.grid.shape)

    @property
    def support(self) -> np.ndarray:
        """Binary mask of nonzero cells."""
        return (self.grid > 0).astype(np.uint8)

    def to_text(self) -> str:
        """Plain-text float grid, one row per line, space-separated."""
        lines = [" ".join(repr(float(v)) for v in row) for row in self.grid]
        return "\n".join(lines) + "\n"


def _normalize_mask(mask: np.ndarray, length: int, angle: int,
                    source_angles: tuple[int, ...] = ()) -> PixelKernel:
    count = int(mask.sum())
    return PixelKernel(
        grid=mask.astype(GRID_DTYPE) / count,
        length=length,
        angle=angle,
        source_angles=source_angles,
    )


def identity_kernel() -> PixelKernel:
    """The 1x1 no-blur kernel, labeled (1, 0)."""
    return PixelKernel(grid=np.ones((1, 1)), length=1, angle=0)


def realize_kernel(length: int, angle: int) -> PixelKernel:
    """Rasterize and normalize the (length, angle) pixel line.

    Length 1 collapses to the identity kernel for every angle.
    """
    if length < 1:
        raise KernelError(f"kernel length must be >= 1, got {length}")
    if length == 1:
        return identity_kernel()
    mask = rasterize_line(length, angle)
    return _normalize_mask(mask, length, angle)


def _mask_key(mask: np.ndarray) -> tuple[tuple[int, int], bytes]:
    return (mask.shape, np.ascontiguousarray(mask, dtype=np.uint8).tobytes())


_RLE_SEP = "-"


def _mask_to_rle(mask: np.ndarray) -> str:
    """Run-length encode a binary mask, row-major, starting with a zero run."""
    flat = np.ascontiguousarray(mask, dtype=np.uint8).ravel()
    runs = []
    current = 0
    count = 0
    for v in flat:
        if v == current:
            count += 1
        else:
            runs.append(count)
            current = v
            count = 1
    runs.append(count)
    return _RLE_SEP.join(str(n) for n in runs)


def _rle_to_mask(rle: str, h: int, w: int) -> np.ndarray:
    runs = [int(part) for part in rle.split(_RLE_SEP)]
    flat = np.zeros(h * w, dtype=np.uint8)
    pos = 0
    value = 0
    for n in runs:
        if n < 0 or pos + n > flat.size:
            raise KernelError(f"run-length data does not fit a {h}x{w} mask")
        flat[pos:pos + n] = value
        pos += n
        value ^= 1
    if pos != flat.size:
        raise KernelError(f"run-length data does not fill a {h}x{w} mask")
    return flat.reshape(h, w)


_CATALOG_MAGIC = "# blurkit kernel catalog v1"


class KernelCatalog:
    """All unique (length, angle) pixel-line kernels over a length range.

    Entries are keyed by their integer labels and ordered by (length, angle)
    ascending.  The catalog is immutable after construction and safe for
    concurrent reads.
    """

    def __init__(self, entries: dict[tuple[int, int], PixelKernel],
                 r_min: int, r_max: int, includes_identity: bool,
                 examined_lines: int) -> None:
        self._entries = dict(sorted(entries.items()))
        self.r_min = r_min
        self.r_max = r_max
        self.includes_identity = includes_identity
        self.examined_lines = examined_lines
        self._by_grid: dict[int, dict[tuple, int]] = {}
        self._angles: dict[int, tuple[int, ...]] = {}
        for (length, angle), kernel in self._entries.items():
            self._by_grid.setdefault(length, {})[_mask_key(kernel.support)] = angle
        for length, masks in self._by_grid.items():
            self._angles[length] = tuple(sorted(masks.values()))

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[PixelKernel]:
        return iter(self._entries.values())

    def __contains__(self, label: tuple[int, int]) -> bool:
        return tuple(label) in self._entries

    def get(self, length: int, angle: int) -> PixelKernel:
        try:
            return self._entries[(length, angle)]
        except KeyError:
            raise KeyError(f"no catalog entry for (length={length}, angle={angle})") from None

    def lengths(self) -> list[int]:
        return sorted(self._angles)

    def angles_for_length(self, length: int) -> tuple[int, ...]:
        """Sorted angle labels available at a given length."""
        try:
            return self._angles[length]
        except KeyError:
            raise KeyError(f"length {length} outside catalog range "
                           f"[{self.r_min}, {self.r_max}]") from None

    def label_for_grid(self, length: int, mask: np.ndarray) -> int:
        """Angle label of the catalog entry whose support equals ``mask``."""
        masks = self._by_grid.get(length)
        if masks is None:
            raise KeyError(f"length {length} not in catalog")
        key = _mask_key((np.asarray(mask) > 0).astype(np.uint8))
        try:
            return masks[key]
        except KeyError:
            raise KeyError(f"no catalog entry at length {length} matches the given grid") from None

    def summary(self) -> dict:
        per_length = {str(r): len(self._angles[r]) for r in self.lengths()}
        return {
            "total_entries": len(self),
            "r_min": self.r_min,
            "r_max": self.r_max,
            "includes_identity": self.includes_identity,
            "examined_lines": self.examined_lines,
            "angles_per_length": per_length,
        }

    def to_text(self) -> str:
        """Serialize to the documented plain-text format.

        One record per line: ``r,phi,h,w,rle`` where ``rle`` is the run-length
        encoding of the row-major binary mask as dash-separated run lengths,
        alternating zero-runs and one-runs and always starting with the
        zero-run count (possibly 0).
        """
        buf = io.StringIO()
        buf.write(_CATALOG_MAGIC + "\n")
        buf.write(f"# r_min={self.r_min} r_max={self.r_max} "
                  f"includes_identity={int(self.includes_identity)} "
                  f"examined_lines={self.examined_lines}\n")
        buf.write("r,phi,h,w,rle\n")
        for (length, angle), kernel in self._entries.items():
            mask = kernel.support
            buf.write(f"{length},{angle},{mask.shape[0]},{mask.shape[1]},"
                      f"{_mask_to_rle(mask)}\n")
        return buf.getvalue()

    def save_text(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "KernelCatalog":
        lines = text.splitlines()
        if not lines or lines[0] != _CATALOG_MAGIC:
            raise KernelError("not a blurkit kernel catalog file")
        meta = {}
        for part in lines[1].lstrip("# ").split():
            key, _, value = part.partition("=")
            meta[key] = int(value)
        entries: dict[tuple[int, int], PixelKernel] = {}
        for line in lines[3:]:
            if not line:
                continue
            r_s, phi_s, h_s, w_s, rle = line.split(",")
            length, angle, h, w = int(r_s), int(phi_s), int(h_s), int(w_s)
            mask = _rle_to_mask(rle, h, w)
            entries[(length, angle)] = _normalize_mask(mask, length, angle)
        return cls(entries, r_min=meta["r_min"], r_max=meta["r_max"],
                   includes_identity=bool(meta["includes_identity"]),
                   examined_lines=meta["examined_lines"])

    @classmethod
    def load_text(cls, path) -> "KernelCatalog":
        with open(path, "r", encoding="ascii") as fh:
            return cls.from_text(fh.read())

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("ascii")).hexdigest()


def build_catalog(r_min: int, r_max: int, include_identity: bool = True) -> KernelCatalog:
    """Enumerate every unique pixel-line kernel for lengths in [r_min, r_max].

    For each length, angles 0..90 are rasterized and identical grids merged;
    each merged group gets its quantized label, and every group that is not
    its own vertical mirror contributes a mirrored negative-angle entry.  The
    examined-line count covers the full angle range -89..90 (the negative
    half is implied by symmetry, so it is never rasterized directly).
    """
    if not (1 <= r_min <= r_max):
        raise KernelError(f"need 1 <= r_min <= r_max, got ({r_min}, {r_max})")
    entries: dict[tuple[int, int], PixelKernel] = {}
    for length in range(r_min, r_max + 1):
        groups: dict[tuple, list[int]] = {}
        for theta in range(0, 91):
            mask = rasterize_line(length, theta)
            groups.setdefault(_mask_key(mask), []).append(theta)
        for (shape, raw), thetas in groups.items():
            mask = np.frombuffer(raw, dtype=np.uint8).reshape(shape)
            angle = quantize_angle(thetas)
            label = (length, angle)
            if label in entries:
                raise RuntimeError(f"angle-label collision at {label}")
            entries[label] = _normalize_mask(mask, length, angle, tuple(thetas))
            mirrored = np.flipud(mask)
            if angle != 90 and not np.array_equal(mask, mirrored):
                neg_label = (length, -angle)
                if neg_label in entries:
                    raise RuntimeError(f"angle-label collision at {neg_label}")
                entries[neg_label] = _normalize_mask(
                    mirrored, length, -angle, tuple(-t for t in reversed(thetas)))
    if include_identity and (1, 0) not in entries:
        entries[(1, 0)] = identity_kernel()
    examined = (r_max - r_min + 1) * 180
    return KernelCatalog(entries, r_min=r_min, r_max=r_max,
                         includes_identity=(1, 0) in entries,
                         examined_lines=examined)


def wrap_angle(angle: float) -> float:
    """Fold an arbitrary angle in degrees into (-90, 90]."""
    folded = math.fmod(angle, 180.0)
    if folded <= -90.0:
        folded += 180.0
    elif folded > 90.0:
        folded -= 180.0
    return folded


def canonicalize_prediction(length_pred: float, angle_pred: float,
                            catalog: KernelCatalog) -> tuple[int, int]:
    """Map real-valued (length, angle) predictions to their catalog label.

    Rounds both values, clamps the length into the catalog range (with a
    warning), rasterizes the rounded line and returns the label of the
    catalog entry with that exact grid.  Length 1 absorbs every angle.
    """
    if not (length_pred >= 0.5):
        raise KernelError(f"predicted length must be >= 0.5, got {length_pred!r}")
    length = int(round(length_pred))
    lo = 1 if catalog.includes_identity else catalog.r_min
    if length < lo or length > catalog.r_max:
        clamped = min(max(length, lo), catalog.r_max)
        warnings.warn(f"predicted length {length_pred!r} rounds to {length}, "
                      f"outside catalog range [{lo}, {catalog.r_max}]; "
                      f"clamped to {clamped}", stacklevel=2)
        length = clamped
    if length == 1:
        return (1, 0)
    angle = int(round(wrap_angle(float(angle_pred))))
    if angle == -90:
        angle = 90
    mask = rasterize_line(length, angle)
    return (length, catalog.label_for_grid(length, mask))
