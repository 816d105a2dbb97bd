"""Numpy reference kernels.

Fallback backend for the compiled extension. Convolutions are expressed as
a loop over kernel offsets with vectorised channel contractions, which keeps
them reasonably fast without any compiled code.
"""

import numpy as np

NAME = "numpy"


def conv2d_forward(x, w, b, stride, pad):
    """Cross-correlate x (cin,h,w) with w (cout,cin,kh,kw), add bias per channel."""
    cin, h, win = x.shape
    cout, _, kh, kw = w.shape
    if pad > 0:
        xp = np.zeros((cin, h + 2 * pad, win + 2 * pad), dtype=x.dtype)
        xp[:, pad:pad + h, pad:pad + win] = x
    else:
        xp = x
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (win + 2 * pad - kw) // stride + 1
    y = np.zeros((cout, ho, wo), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            xs = xp[:, i:i + stride * ho:stride, j:j + stride * wo:stride]
            y += np.tensordot(w[:, :, i, j], xs, axes=([1], [0]))
    y += b[:, None, None]
    return y


def conv2d_backward_input(gy, w, stride, pad, h, win):
    """Gradient of conv2d_forward w.r.t. its input, given output grad gy."""
    cout, _, kh, kw = w.shape
    ho, wo = gy.shape[1], gy.shape[2]
    cin = w.shape[1]
    gxp = np.zeros((cin, h + 2 * pad, win + 2 * pad), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            # (cin,cout) @ (cout,ho,wo) scattered back onto the padded grid
            gxp[:, i:i + stride * ho:stride, j:j + stride * wo:stride] += np.tensordot(
                w[:, :, i, j], gy, axes=([0], [0])
            )
    if pad > 0:
        return gxp[:, pad:pad + h, pad:pad + win]
    return gxp


def conv2d_backward_weight(gy, x, kh, kw, stride, pad):
    """Gradient of conv2d_forward w.r.t. the kernel, given output grad gy."""
    cin, h, win = x.shape
    cout, ho, wo = gy.shape
    if pad > 0:
        xp = np.zeros((cin, h + 2 * pad, win + 2 * pad), dtype=x.dtype)
        xp[:, pad:pad + h, pad:pad + win] = x
    else:
        xp = x
    gw = np.empty((cout, cin, kh, kw), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            xs = xp[:, i:i + stride * ho:stride, j:j + stride * wo:stride]
            gw[:, :, i, j] = np.tensordot(gy, xs, axes=([1, 2], [1, 2]))
    return gw


def bilinear_resize(x, out_h, out_w):
    """Align-corners bilinear resize of a 2D map."""
    h, w = x.shape
    sy = (h - 1) / (out_h - 1) if out_h > 1 else 0.0
    sx = (w - 1) / (out_w - 1) if out_w > 1 else 0.0
    yy = np.arange(out_h) * sy
    xx = np.arange(out_w) * sx
    y0 = np.floor(yy).astype(np.intp)
    x0 = np.floor(xx).astype(np.intp)
    y0 = np.minimum(y0, h - 1)
    x0 = np.minimum(x0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (yy - y0)[:, None]
    fx = (xx - x0)[None, :]
    a = x[np.ix_(y0, x0)]
    b = x[np.ix_(y0, x1)]
    c = x[np.ix_(y1, x0)]
    d = x[np.ix_(y1, x1)]
    top = a * (1.0 - fx) + b * fx
    bot = c * (1.0 - fx) + d * fx
    return top * (1.0 - fy) + bot * fy
