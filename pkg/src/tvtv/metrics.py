"""Reconstruction quality metrics on magnitude images, and the measurement-consistency metric."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidParameterError, ShapeMismatchError
from .image import ComplexImage
from .operators import MeasurementOperator

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class CropRegion:
    """Half-open pixel box ``[row_start, row_end) x [col_start, col_end)``."""

    row_start: int
    row_end: int
    col_start: int
    col_end: int

    def __post_init__(self):
        if not (0 <= self.row_start < self.row_end and 0 <= self.col_start < self.col_end):
            raise InvalidParameterError(f"empty or negative crop {self}")

    @classmethod
    def full(cls, shape) -> "CropRegion":
        return cls(0, shape[0], 0, shape[1])

    @classmethod
    def parse(cls, text: str) -> "CropRegion":
        """Parse ``"r0:r1,c0:c1"``."""
        try:
            rows, cols = text.split(",")
            r0, r1 = (int(v) for v in rows.split(":"))
            c0, c1 = (int(v) for v in cols.split(":"))
        except ValueError as exc:
            raise InvalidParameterError(f"crop must look like 'r0:r1,c0:c1', got {text!r}") from exc
        return cls(r0, r1, c0, c1)

    @classmethod
    def bounding_box(cls, img: ComplexImage, margin: int = 2, threshold: float = 1e-6) -> "CropRegion":
        """Box around pixels with magnitude above ``threshold * max``, grown by ``margin``."""
        mag = img.magnitude()
        rows, cols = np.nonzero(mag > threshold * mag.max())
        if rows.size == 0:
            return cls.full(img.shape)
        return cls(
            max(0, int(rows.min()) - margin),
            min(img.rows, int(rows.max()) + 1 + margin),
            max(0, int(cols.min()) - margin),
            min(img.cols, int(cols.max()) + 1 + margin),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.row_end - self.row_start, self.col_end - self.col_start

    def check(self, shape) -> None:
        if self.row_end > shape[0] or self.col_end > shape[1]:
            raise InvalidParameterError(f"crop {self} out of bounds for image of shape {tuple(shape)}")

    def apply(self, array: np.ndarray) -> np.ndarray:
        self.check(array.shape)
        return array[self.row_start:self.row_end, self.col_start:self.col_end]

    def __str__(self):
        return f"{self.row_start}:{self.row_end},{self.col_start}:{self.col_end}"


def _cropped_magnitudes(reference, test, crop):
    ref = reference.data if isinstance(reference, ComplexImage) else np.asarray(reference)
    tst = test.data if isinstance(test, ComplexImage) else np.asarray(test)
    if ref.shape != tst.shape:
        raise ShapeMismatchError(f"reference {ref.shape} and test {tst.shape} differ in shape")
    crop = crop or CropRegion.full(ref.shape)
    return np.abs(crop.apply(ref)), np.abs(crop.apply(tst))


def consistency(op: MeasurementOperator, x, b) -> float:
    """``||A x - b||_2``."""
    b = np.asarray(b)
    if b.shape != (op.length,):
        raise ShapeMismatchError(f"b length {b.shape} does not match operator ({op.length},)")
    return float(np.linalg.norm(op.forward(x) - b))


def psnr(reference, test, crop: CropRegion | None = None) -> float:
    """Peak signal-to-noise ratio in dB of magnitude images.

    The peak is the largest reference magnitude inside the crop.  Identical
    images give ``inf``.
    """
    ref, tst = _cropped_magnitudes(reference, test, crop)
    mse = float(np.mean((ref - tst) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(float(ref.max()) ** 2 / mse)


def _gaussian_window() -> np.ndarray:
    r = np.arange(SSIM_WINDOW) - SSIM_WINDOW // 2
    g = np.exp(-(r**2) / (2 * SSIM_SIGMA**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(reference, test, crop: CropRegion | None = None) -> float:
    """Mean structural similarity of magnitude images.

    Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), population
    statistics, ``K1 = 0.01``, ``K2 = 0.03``.  Local statistics are taken
    only where the window fits inside the crop.  ``L`` is the dynamic range
    of the cropped reference magnitude; when that is zero (constant
    reference) its peak is used instead, and 1 if the reference is all zero.
    """
    ref, tst = _cropped_magnitudes(reference, test, crop)
    if min(ref.shape) < SSIM_WINDOW:
        raise InvalidParameterError(
            f"crop {ref.shape} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    data_range = float(ref.max() - ref.min()) or float(ref.max()) or 1.0
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    win = _gaussian_window()
    pad = SSIM_WINDOW // 2

    def local_mean(a):
        return ndimage.correlate(a, win, mode="reflect")[pad:-pad, pad:-pad]

    mu1, mu2 = local_mean(ref), local_mean(tst)
    s11 = local_mean(ref * ref) - mu1 * mu1
    s22 = local_mean(tst * tst) - mu2 * mu2
    s12 = local_mean(ref * tst) - mu1 * mu2
    num = (2 * mu1 * mu2 + c1) * (2 * s12 + c2)
    den = (mu1**2 + mu2**2 + c1) * (s11 + s22 + c2)
    return float(np.mean(num / den))
