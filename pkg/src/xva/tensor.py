"""Dense tensor arithmetic substrate.

All arrays are float64 internally (file export narrows to float32, see
xva.fileio). Every public op validates finiteness on the way in and out;
NaN/Inf raise instead of propagating.
"""

import numpy as np

from . import kernels
from .errors import NumericError, ParameterError, ShapeError


def as_tensor(x) -> np.ndarray:
    """Coerce to a float64 ndarray without copying when already one."""
    return np.asarray(x, dtype=np.float64)


def check_finite(x, what="tensor") -> np.ndarray:
    """Return x if every value is finite, raise NumericError otherwise."""
    x = np.asarray(x)
    if not np.isfinite(x).all():
        raise NumericError(f"{what} contains NaN or Inf")
    return x


def matmul(a, b) -> np.ndarray:
    """Matrix product of two 2D tensors."""
    a = check_finite(as_tensor(a), "matmul lhs")
    b = check_finite(as_tensor(b), "matmul rhs")
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return check_finite(a @ b, "matmul result")


def softmax_t(logits, temperature=1.0) -> np.ndarray:
    """Temperature softmax over a 1D logit vector.

    Larger temperatures flatten the distribution toward uniform; the argmax
    is preserved for any temperature.
    """
    if temperature <= 0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    z = check_finite(as_tensor(logits), "softmax input")
    if z.ndim != 1:
        raise ShapeError(f"softmax expects a vector, got shape {z.shape}")
    z = z / temperature
    z = z - z.max()
    e = np.exp(z)
    return check_finite(e / e.sum(), "softmax result")


def gap(x) -> np.ndarray:
    """Global average pooling: (c,h,w) -> (c,) spatial mean per channel."""
    x = check_finite(as_tensor(x), "gap input")
    if x.ndim != 3:
        raise ShapeError(f"gap expects (c,h,w), got shape {x.shape}")
    return x.mean(axis=(1, 2))


def minmax_normalize(x) -> np.ndarray:
    """Rescale to [0,1]; a constant tensor maps to all zeros."""
    x = check_finite(as_tensor(x), "minmax input")
    lo = x.min()
    hi = x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def bilinear_resize(x, out_h: int, out_w: int) -> np.ndarray:
    """Resize a 2D map with align-corners bilinear interpolation.

    Corner pixels map exactly onto corner pixels, so resizing to the input
    size reproduces the input.
    """
    if out_h < 1 or out_w < 1:
        raise ParameterError(f"target size must be positive, got {out_h}x{out_w}")
    x = check_finite(as_tensor(x), "resize input")
    if x.ndim != 2:
        raise ShapeError(f"bilinear_resize expects a 2D map, got shape {x.shape}")
    x = np.ascontiguousarray(x)
    return check_finite(kernels.bilinear_resize(x, out_h, out_w), "resize result")
