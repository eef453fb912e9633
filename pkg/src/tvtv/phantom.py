"""Synthetic ground truth and surrogate (stand-in network output) generators."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import InvalidParameterError
from .image import ComplexImage
from .operators import MeasurementOperator

# Modified Shepp-Logan (Toft): intensity, semi-axes a, b, center x0, y0, angle in degrees
_SHEPP_LOGAN = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)

SURROGATE_KINDS = ("blur", "zero-filled", "blur+noise")


def _ellipse_sum(rows, cols, ellipses) -> np.ndarray:
    # y points up: row 0 is the top of the image
    y, x = np.meshgrid(np.linspace(1, -1, rows), np.linspace(-1, 1, cols), indexing="ij")
    img = np.zeros((rows, cols))
    for value, a, b, x0, y0, phi in ellipses:
        t = np.deg2rad(phi)
        xr = (x - x0) * np.cos(t) + (y - y0) * np.sin(t)
        yr = -(x - x0) * np.sin(t) + (y - y0) * np.cos(t)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += value
    return img


def shepp_logan(rows: int, cols: int) -> ComplexImage:
    """The 10-ellipse modified Shepp-Logan phantom with intensities in ``[0, 1]``."""
    if rows < 16 or cols < 16:
        raise InvalidParameterError(f"dimensions too small: {rows}x{cols} (need at least 16x16)")
    img = np.clip(_ellipse_sum(rows, cols, _SHEPP_LOGAN), 0.0, 1.0)
    return ComplexImage(img.astype(np.complex128))


def random_ellipse_phantom(rows: int, cols: int, rng: np.random.Generator, max_ellipses: int = 5) -> np.ndarray:
    """A random piecewise-constant image: a few ellipses with intensities in [0, 1]."""
    count = int(rng.integers(1, max_ellipses + 1))
    ellipses = [
        (
            rng.uniform(0.2, 1.0),
            rng.uniform(0.1, 0.6),
            rng.uniform(0.1, 0.6),
            rng.uniform(-0.4, 0.4),
            rng.uniform(-0.4, 0.4),
            rng.uniform(0.0, 180.0),
        )
        for _ in range(count)
    ]
    return np.clip(_ellipse_sum(rows, cols, ellipses), 0.0, 1.0)


def gaussian_blur(x: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian blur with replicate boundary; sigma below half a pixel is the identity."""
    if not sigma > 0:
        raise InvalidParameterError(f"blur sigma must be > 0, got {sigma}")
    if sigma < 0.5:
        return np.array(x, dtype=np.complex128, copy=True)
    re = ndimage.gaussian_filter(x.real, sigma, mode="nearest")
    im = ndimage.gaussian_filter(x.imag, sigma, mode="nearest")
    return re + 1j * im


def degrade_surrogate(
    x_star: ComplexImage,
    op: MeasurementOperator,
    kind: str,
    sigma: float = 1.5,
    noise: float = 0.0,
    seed: int = 0,
) -> ComplexImage:
    """Produce a measurement-inconsistent approximation ``w`` of ``x_star``.

    ``blur`` blurs the ground truth, ``zero-filled`` returns ``A^H A x_star``
    and ``blur+noise`` adds seeded circular complex Gaussian noise with
    per-pixel standard deviation ``noise`` to the blurred image.
    """
    if kind == "blur":
        return ComplexImage(gaussian_blur(x_star.data, sigma))
    if kind == "zero-filled":
        return ComplexImage(op.adjoint(op.forward(x_star)))
    if kind == "blur+noise":
        if not noise >= 0:
            raise InvalidParameterError(f"noise level must be >= 0, got {noise}")
        rng = np.random.default_rng(seed)
        shape = x_star.shape
        perturb = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * (noise / np.sqrt(2))
        return ComplexImage(gaussian_blur(x_star.data, sigma) + perturb)
    raise InvalidParameterError(f"unknown surrogate kind {kind!r}; expected one of {SURROGATE_KINDS}")
