"""Measurement operators ``A``: masked unitary Fourier, multicoil ``A = S F C``, dense matrix.

All Fourier transforms are orthonormal (scaled by ``1/sqrt(M N)``), so the
single-coil operator satisfies ``A A^H = I``.  Retained frequencies are read
out in row-major order over the (unshifted) frequency grid; multicoil
measurements concatenate coil blocks in coil order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import GramSingularError, InvalidParameterError, ShapeMismatchError
from .image import ComplexImage
from .linalg import conjugate_gradient

MASKED_FOURIER = "masked-fourier"
MULTICOIL = "multicoil-masked-fourier"
MATRIX = "matrix"


def _as_array(img) -> np.ndarray:
    if isinstance(img, ComplexImage):
        return img.data
    return np.asarray(img)


@dataclass(frozen=True, eq=False)
class SamplingMask:
    """Boolean k-space sampling pattern ``S``.

    ``seed``, ``acceleration`` and ``center_lines`` record how the mask was
    generated; they are ``None`` for hand-made masks.
    """

    kept: np.ndarray
    seed: Optional[int] = None
    acceleration: Optional[float] = None
    center_lines: Optional[int] = None

    def __post_init__(self):
        kept = np.array(self.kept, dtype=bool, copy=True)
        if kept.ndim != 2:
            raise ShapeMismatchError(f"mask must be 2-D, got shape {kept.shape}")
        if not kept.any():
            raise InvalidParameterError("mask must keep at least one frequency")
        kept.setflags(write=False)
        object.__setattr__(self, "kept", kept)

    @property
    def rows(self) -> int:
        return self.kept.shape[0]

    @property
    def cols(self) -> int:
        return self.kept.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.kept.shape

    @property
    def m(self) -> int:
        return int(self.kept.sum())

    @property
    def achieved_acceleration(self) -> float:
        return self.kept.size / self.m

    @classmethod
    def full(cls, rows: int, cols: int) -> "SamplingMask":
        return cls(np.ones((rows, cols), dtype=bool), acceleration=1.0, center_lines=rows)

    def __eq__(self, other):
        if not isinstance(other, SamplingMask):
            return NotImplemented
        return np.array_equal(self.kept, other.kept)

    __hash__ = None


def make_cartesian_mask(
    rows: int, cols: int, acceleration: float, center_lines: int, seed: int
) -> SamplingMask:
    """Cartesian row undersampling with a fully sampled low-frequency band.

    The ``center_lines`` rows closest (circularly) to the zero-frequency row
    are always kept; further rows are drawn uniformly at random until at
    least ``round(rows * cols / acceleration)`` samples are kept.
    """
    if rows < 1 or cols < 1:
        raise InvalidParameterError(f"mask dimensions must be positive, got {rows}x{cols}")
    if not np.isfinite(acceleration) or acceleration < 1:
        raise InvalidParameterError(f"acceleration must be >= 1, got {acceleration}")
    if center_lines < 0 or center_lines > rows:
        raise InvalidParameterError(f"center_lines must lie in [0, {rows}], got {center_lines}")
    if center_lines > 0 and acceleration * center_lines > rows:
        raise InvalidParameterError(
            f"acceleration {acceleration} is unreachable with {center_lines} center lines "
            f"on {rows} rows (need acceleration <= {rows / center_lines:g})"
        )

    target = max(1, int(round(rows * cols / acceleration)))
    needed_rows = max(center_lines, -(-target // cols))

    # rows ordered by circular distance from the DC row: 0, 1, -1, 2, -2, ...
    by_distance = sorted(range(rows), key=lambda r: (min(r, rows - r), r > rows // 2))
    center = by_distance[:center_lines]
    rest = np.array(sorted(set(range(rows)) - set(center)), dtype=int)
    rng = np.random.default_rng(seed)
    extra = rng.permutation(rest)[: needed_rows - center_lines]

    kept = np.zeros((rows, cols), dtype=bool)
    kept[center, :] = True
    kept[extra, :] = True
    return SamplingMask(kept, seed=seed, acceleration=float(acceleration), center_lines=center_lines)


@dataclass(frozen=True, eq=False)
class CoilSensitivities:
    """Coil sensitivity maps ``C``, shape ``(coil_count, rows, cols)``.

    ``support`` marks the pixels where the maps must jointly be nonzero;
    ``None`` means the whole grid.
    """

    maps: np.ndarray
    support: Optional[np.ndarray] = None

    def __post_init__(self):
        maps = np.array(self.maps, dtype=np.complex128, copy=True)
        if maps.ndim != 3 or maps.shape[0] < 1:
            raise ShapeMismatchError(f"maps must have shape (coils, rows, cols), got {maps.shape}")
        if not np.all(np.isfinite(maps)):
            raise InvalidParameterError("coil maps contain NaN or Inf")
        support = np.ones(maps.shape[1:], dtype=bool) if self.support is None else np.array(
            self.support, dtype=bool, copy=True
        )
        if support.shape != maps.shape[1:]:
            raise ShapeMismatchError(f"support {support.shape} does not match maps {maps.shape[1:]}")
        energy = (np.abs(maps) ** 2).sum(axis=0)
        if not np.all(energy[support] > 0):
            raise InvalidParameterError("coil maps vanish jointly at some pixel of the support")
        maps.setflags(write=False)
        support.setflags(write=False)
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "support", support)

    @property
    def coil_count(self) -> int:
        return self.maps.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.maps.shape[1:]


def gaussian_coil_maps(rows: int, cols: int, coil_count: int, width: float = 0.6) -> CoilSensitivities:
    """Smooth synthetic sensitivities: complex Gaussian bumps around a ring.

    The maps are normalized so that the sum of squared moduli over coils is
    exactly one at every pixel.
    """
    if coil_count < 1:
        raise InvalidParameterError(f"coil_count must be >= 1, got {coil_count}")
    yy, xx = np.meshgrid(np.linspace(-1, 1, rows), np.linspace(-1, 1, cols), indexing="ij")
    maps = np.empty((coil_count, rows, cols), dtype=np.complex128)
    for k in range(coil_count):
        angle = 2 * np.pi * k / coil_count
        cy, cx = 1.2 * np.sin(angle), 1.2 * np.cos(angle)
        bump = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width**2))
        phase = np.exp(1j * (angle + 0.5 * np.pi * (xx * np.cos(angle) + yy * np.sin(angle))))
        maps[k] = bump * phase
    maps /= np.sqrt((np.abs(maps) ** 2).sum(axis=0))
    return CoilSensitivities(maps)


class MeasurementOperator:
    """Base class: a linear map from ``rows x cols`` images to ``C^length``.

    Subclasses implement :meth:`forward`, :meth:`adjoint` and
    :meth:`gram_solve` (apply ``(A A^H)^{-1}``).  Instances are immutable.
    """

    kind: str
    image_shape: tuple[int, int]
    length: int

    def _check_image(self, x) -> np.ndarray:
        x = _as_array(x)
        if x.shape != self.image_shape:
            raise ShapeMismatchError(f"image shape {x.shape} does not match operator {self.image_shape}")
        return x

    def _check_measurement(self, y) -> np.ndarray:
        y = np.asarray(y)
        if y.shape != (self.length,):
            raise ShapeMismatchError(f"measurement length {y.shape} does not match operator ({self.length},)")
        return y

    def forward(self, x) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, y) -> np.ndarray:
        raise NotImplementedError

    def gram_solve(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def project(self, x, b) -> np.ndarray:
        """Euclidean projection of ``x`` onto ``{z : A z = b}``."""
        x = self._check_image(x)
        b = self._check_measurement(b)
        return x - self.adjoint(self.gram_solve(self.forward(x) - b))


class MaskedFourier(MeasurementOperator):
    """``A = S F``: orthonormal 2-D DFT followed by mask selection."""

    kind = MASKED_FOURIER

    def __init__(self, mask: SamplingMask):
        self.mask = mask
        self.image_shape = mask.shape
        self.length = mask.m

    def forward(self, x) -> np.ndarray:
        x = self._check_image(x)
        return np.fft.fft2(x, norm="ortho")[self.mask.kept]

    def adjoint(self, y) -> np.ndarray:
        y = self._check_measurement(y)
        k = np.zeros(self.image_shape, dtype=np.complex128)
        k[self.mask.kept] = y
        return np.fft.ifft2(k, norm="ortho")

    def gram_solve(self, r):
        return r


class MulticoilFourier(MeasurementOperator):
    """``A = S F C``: per-coil weighting, orthonormal DFT, mask selection.

    Projection onto ``{A z = b}`` needs the pseudo-inverse of ``A``.  When the
    mask keeps whole rows (Cartesian phase-encode undersampling) the problem
    splits into one small dense system per image column after an inverse FFT
    along the readout axis, and the projection is computed exactly from
    per-column pseudo-inverses.  Other masks fall back to
    conjugate gradient on ``A A^H``, which fails with :class:`GramSingularError`
    when the Gram operator is singular or too ill-conditioned.
    """

    kind = MULTICOIL

    def __init__(self, mask: SamplingMask, sens: CoilSensitivities, cg_tol: float = 1e-12,
                 rcond: float = 1e-13):
        if sens.shape != mask.shape:
            raise ShapeMismatchError(f"coil maps {sens.shape} do not match mask {mask.shape}")
        self.mask = mask
        self.sens = sens
        self.image_shape = mask.shape
        self.length = sens.coil_count * mask.m
        self.cg_tol = cg_tol
        self.cg_max_iters = 10 * self.length
        kept = mask.kept
        self.row_structured = bool(np.all(kept == kept[:, :1]))
        self._column_pinv = self._build_column_pinv(rcond) if self.row_structured else None

    def _build_column_pinv(self, rcond: float) -> np.ndarray:
        rows, cols = self.image_shape
        kept_rows = np.flatnonzero(self.mask.kept[:, 0])
        fy = np.fft.fft(np.eye(rows), norm="ortho", axis=0)[kept_rows]  # (k, rows)
        c = self.sens.maps  # (coils, rows, cols)
        # G_j = vstack_i fy @ diag(c_i[:, j]), shape (coils * k, rows) for each column j
        blocks = fy[None, None, :, :] * np.transpose(c, (2, 0, 1))[:, :, None, :]
        blocks = blocks.reshape(cols, -1, rows)
        pinv = np.linalg.pinv(blocks, rcond=rcond)  # (cols, rows, coils * k)
        pinv.setflags(write=False)
        return pinv

    def forward(self, x) -> np.ndarray:
        x = self._check_image(x)
        k = np.fft.fft2(self.sens.maps * x, norm="ortho")
        return k[:, self.mask.kept].reshape(-1)

    def adjoint(self, y) -> np.ndarray:
        y = self._check_measurement(y)
        k = np.zeros((self.sens.coil_count,) + self.image_shape, dtype=np.complex128)
        k[:, self.mask.kept] = y.reshape(self.sens.coil_count, -1)
        return (np.conj(self.sens.maps) * np.fft.ifft2(k, norm="ortho")).sum(axis=0)

    def gram_solve(self, r):
        r = self._check_measurement(r)
        d, info = conjugate_gradient(
            lambda y: self.forward(self.adjoint(y)), r, tol=self.cg_tol, max_iters=self.cg_max_iters
        )
        if not info.converged:
            raise GramSingularError(
                f"CG on A A^H stalled at relative residual {info.residual:.3e} "
                f"after {info.iterations} iterations"
            )
        return d

    def project(self, x, b) -> np.ndarray:
        if not self.row_structured:
            return super().project(x, b)
        x = self._check_image(x)
        b = self._check_measurement(b)
        coils, k = self.sens.coil_count, self.mask.m // self.image_shape[1]
        r = (self.forward(x) - b).reshape(coils, k, self.image_shape[1])
        r = np.fft.ifft(r, norm="ortho", axis=-1)  # undo the readout-axis DFT
        r = np.transpose(r, (2, 0, 1)).reshape(self.image_shape[1], coils * k)
        return x - np.einsum("jab,jb->aj", self._column_pinv, r)


class MatrixOperator(MeasurementOperator):
    """Dense explicit ``A`` (``m x rows*cols``) acting on row-major vectorized images.

    Used for small verification problems, e.g. Gaussian sensing matrices.
    """

    kind = MATRIX

    def __init__(self, matrix, image_shape: tuple[int, int]):
        matrix = np.array(matrix, dtype=np.complex128, copy=True)
        rows, cols = image_shape
        if matrix.ndim != 2 or matrix.shape[1] != rows * cols:
            raise ShapeMismatchError(f"matrix {matrix.shape} incompatible with image {image_shape}")
        matrix.setflags(write=False)
        self.matrix = matrix
        self.image_shape = (rows, cols)
        self.length = matrix.shape[0]
        try:
            self._gram = scipy.linalg.cho_factor(matrix @ matrix.conj().T)
        except np.linalg.LinAlgError as exc:
            raise GramSingularError("A A^H is not positive definite") from exc

    def forward(self, x) -> np.ndarray:
        x = self._check_image(x)
        return self.matrix @ x.reshape(-1)

    def adjoint(self, y) -> np.ndarray:
        y = self._check_measurement(y)
        return (self.matrix.conj().T @ y).reshape(self.image_shape)

    def gram_solve(self, r):
        return scipy.linalg.cho_solve(self._gram, r)


def make_multicoil(mask: SamplingMask, sens: CoilSensitivities) -> MulticoilFourier:
    return MulticoilFourier(mask, sens)


def forward(op: MeasurementOperator, img: ComplexImage) -> np.ndarray:
    return op.forward(img)


def adjoint(op: MeasurementOperator, y) -> ComplexImage:
    return ComplexImage(op.adjoint(y))


def project_consistent(op: MeasurementOperator, img: ComplexImage, b) -> ComplexImage:
    """Closest image to ``img`` (in l2) that reproduces the measurements ``b`` exactly."""
    return ComplexImage(op.project(img, b))
