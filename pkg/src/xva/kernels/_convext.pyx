# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: conv2d forward/backward and bilinear resize.

Same contracts as xva.kernels.pyref; results agree with it to float64
rounding (summation order differs, so not bit-identical).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "cython"


cdef cnp.ndarray _pad_input(double[:, :, ::1] x, Py_ssize_t pad):
    cdef Py_ssize_t cin = x.shape[0], h = x.shape[1], w = x.shape[2]
    out = np.zeros((cin, h + 2 * pad, w + 2 * pad), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t c, i, j
    with nogil:
        for c in range(cin):
            for i in range(h):
                for j in range(w):
                    o[c, pad + i, pad + j] = x[c, i, j]
    return out


def conv2d_forward(x, w, b, Py_ssize_t stride, Py_ssize_t pad):
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t cin = x.shape[0], h = x.shape[1], win = x.shape[2]
    cdef Py_ssize_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t wo = (win + 2 * pad - kw) // stride + 1

    xp_arr = _pad_input(x, pad) if pad > 0 else x
    cdef double[:, :, ::1] xp = xp_arr
    cdef double[:, :, :, ::1] wv = w
    cdef double[::1] bv = b
    y_arr = np.empty((cout, ho, wo), dtype=np.float64)
    cdef double[:, :, ::1] y = y_arr
    cdef Py_ssize_t co, ci, oy, ox, ky, kx
    cdef double acc
    with nogil:
        for co in range(cout):
            for oy in range(ho):
                for ox in range(wo):
                    acc = bv[co]
                    for ci in range(cin):
                        for ky in range(kh):
                            for kx in range(kw):
                                acc += wv[co, ci, ky, kx] * xp[ci, oy * stride + ky, ox * stride + kx]
                    y[co, oy, ox] = acc
    return y_arr


def conv2d_backward_input(gy, w, Py_ssize_t stride, Py_ssize_t pad, Py_ssize_t h, Py_ssize_t win):
    gy = np.ascontiguousarray(gy, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t cout = gy.shape[0], ho = gy.shape[1], wo = gy.shape[2]
    cdef Py_ssize_t cin = w.shape[1], kh = w.shape[2], kw = w.shape[3]

    gxp_arr = np.zeros((cin, h + 2 * pad, win + 2 * pad), dtype=np.float64)
    cdef double[:, :, ::1] gxp = gxp_arr
    cdef double[:, :, ::1] g = gy
    cdef double[:, :, :, ::1] wv = w
    cdef Py_ssize_t co, ci, oy, ox, ky, kx
    cdef double gv
    with nogil:
        for co in range(cout):
            for oy in range(ho):
                for ox in range(wo):
                    gv = g[co, oy, ox]
                    for ci in range(cin):
                        for ky in range(kh):
                            for kx in range(kw):
                                gxp[ci, oy * stride + ky, ox * stride + kx] += gv * wv[co, ci, ky, kx]
    if pad > 0:
        return gxp_arr[:, pad:pad + h, pad:pad + win].copy()
    return gxp_arr


def conv2d_backward_weight(gy, x, Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t stride, Py_ssize_t pad):
    gy = np.ascontiguousarray(gy, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t cout = gy.shape[0], ho = gy.shape[1], wo = gy.shape[2]
    cdef Py_ssize_t cin = x.shape[0], h = x.shape[1], win = x.shape[2]

    xp_arr = _pad_input(x, pad) if pad > 0 else x
    cdef double[:, :, ::1] xp = xp_arr
    cdef double[:, :, ::1] g = gy
    gw_arr = np.zeros((cout, cin, kh, kw), dtype=np.float64)
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef Py_ssize_t co, ci, oy, ox, ky, kx
    cdef double gv
    with nogil:
        for co in range(cout):
            for oy in range(ho):
                for ox in range(wo):
                    gv = g[co, oy, ox]
                    for ci in range(cin):
                        for ky in range(kh):
                            for kx in range(kw):
                                gw[co, ci, ky, kx] += gv * xp[ci, oy * stride + ky, ox * stride + kx]
    return gw_arr


def bilinear_resize(x, Py_ssize_t out_h, Py_ssize_t out_w):
    x = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t h = x.shape[0], w = x.shape[1]
    cdef double sy = (h - 1.0) / (out_h - 1.0) if out_h > 1 else 0.0
    cdef double sx = (w - 1.0) / (out_w - 1.0) if out_w > 1 else 0.0
    out_arr = np.empty((out_h, out_w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] xv = x
    cdef Py_ssize_t i, j, y0, x0, y1, x1
    cdef double yy, xx, fy, fx, top, bot
    with nogil:
        for i in range(out_h):
            yy = i * sy
            y0 = <Py_ssize_t>yy
            if y0 > h - 1:
                y0 = h - 1
            y1 = y0 + 1 if y0 + 1 < h else h - 1
            fy = yy - y0
            for j in range(out_w):
                xx = j * sx
                x0 = <Py_ssize_t>xx
                if x0 > w - 1:
                    x0 = w - 1
                x1 = x0 + 1 if x0 + 1 < w else w - 1
                fx = xx - x0
                top = xv[y0, x0] * (1.0 - fx) + xv[y0, x1] * fx
                bot = xv[y1, x0] * (1.0 - fx) + xv[y1, x1] * fx
                out[i, j] = top * (1.0 - fy) + bot * fy
    return out_arr
