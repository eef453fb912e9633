"""Complex images, the forward-difference operator D and the anisotropic TV semi-norm.

Images are stored row-major: pixel ``(i, j)`` of an ``M x N`` image sits at
flat index ``i * N + j``.  D stacks all vertical differences (row-major over
pixels) on top of all horizontal differences, so ``D`` has shape ``(2n, n)``.
Differences that would reach outside the image are zero (replicate boundary).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, ShapeMismatchError


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=np.complex128, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ComplexImage:
    """An immutable ``rows x cols`` grid of complex128 samples.

    Parameters
    ----------
    data : array_like
        Two-dimensional array.  Real input is promoted to complex.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ShapeMismatchError(f"image data must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidParameterError(f"image must have rows, cols >= 1, got {arr.shape}")
        arr = _frozen(arr)
        if not np.all(np.isfinite(arr)):
            raise InvalidParameterError("image contains NaN or Inf")
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_vector(cls, rows: int, cols: int, vector) -> "ComplexImage":
        vector = np.asarray(vector)
        if vector.ndim != 1 or vector.size != rows * cols:
            raise ShapeMismatchError(
                f"vector of length {vector.size} cannot fill a {rows}x{cols} image"
            )
        return cls(vector.reshape(rows, cols))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "ComplexImage":
        return cls(np.zeros((rows, cols), dtype=np.complex128))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def vector(self) -> np.ndarray:
        """Row-major vectorization (read-only view)."""
        return self.data.reshape(-1)

    def magnitude(self) -> np.ndarray:
        return np.abs(self.data)

    def __eq__(self, other):
        if not isinstance(other, ComplexImage):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.shape, self.data.tobytes()))


@dataclass(frozen=True, eq=False)
class DiffField:
    """Vertical and horizontal forward differences of an image.

    ``vertical[i, j] = x[i+1, j] - x[i, j]`` (zero on the last row) and
    ``horizontal[i, j] = x[i, j+1] - x[i, j]`` (zero on the last column).
    """

    vertical: np.ndarray
    horizontal: np.ndarray

    def __post_init__(self):
        v = _frozen(self.vertical)
        h = _frozen(self.horizontal)
        if v.ndim != 2 or v.shape != h.shape:
            raise ShapeMismatchError(
                f"vertical {v.shape} and horizontal {h.shape} must be equal 2-D shapes"
            )
        object.__setattr__(self, "vertical", v)
        object.__setattr__(self, "horizontal", h)

    @classmethod
    def from_stacked(cls, rows: int, cols: int, stacked) -> "DiffField":
        stacked = np.asarray(stacked)
        n = rows * cols
        if stacked.shape != (2 * n,):
            raise ShapeMismatchError(f"expected stacked length {2 * n}, got {stacked.shape}")
        return cls(stacked[:n].reshape(rows, cols), stacked[n:].reshape(rows, cols))

    @property
    def rows(self) -> int:
        return self.vertical.shape[0]

    @property
    def cols(self) -> int:
        return self.vertical.shape[1]

    def stacked(self) -> np.ndarray:
        """The length-``2 * rows * cols`` vector ``D x``."""
        return np.concatenate([self.vertical.reshape(-1), self.horizontal.reshape(-1)])


# Array kernels.  The solver calls these directly to avoid wrapping every iterate.


def diff(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences of a 2-D array with zero flux at the far borders."""
    v = np.zeros_like(x)
    h = np.zeros_like(x)
    v[:-1, :] = x[1:, :] - x[:-1, :]
    h[:, :-1] = x[:, 1:] - x[:, :-1]
    return v, h


def diff_adjoint(v: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Apply ``D^T`` to a pair of difference arrays (negative divergence)."""
    out = np.zeros(v.shape, dtype=np.result_type(v, h))
    out[1:, :] += v[:-1, :]
    out[:-1, :] -= v[:-1, :]
    out[:, 1:] += h[:, :-1]
    out[:, :-1] -= h[:, :-1]
    return out


def apply_diff(img: ComplexImage) -> DiffField:
    v, h = diff(img.data)
    return DiffField(v, h)


def apply_diff_adjoint(field: DiffField) -> ComplexImage:
    return ComplexImage(diff_adjoint(field.vertical, field.horizontal))


def tv_seminorm(img: ComplexImage | np.ndarray) -> float:
    """Anisotropic total variation ``||D x||_1`` using the complex modulus."""
    x = img.data if isinstance(img, ComplexImage) else np.asarray(img)
    v, h = diff(x)
    return float(np.abs(v).sum() + np.abs(h).sum())
