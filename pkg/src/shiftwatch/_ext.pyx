# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled HOG and warp kernels.

Mirrors the API of ``shiftwatch._fallback`` exactly; ``shiftwatch.kernels``
picks whichever is importable.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, sqrt, floor, fmod, M_PI
from libc.stdlib cimport malloc, free

cnp.import_array()

ctypedef cnp.float64_t f64


cdef inline double _fold(double theta, double span) noexcept nogil:
    theta = fmod(theta, span)
    if theta < 0:
        theta += span
    if theta >= span:
        theta = 0.0
    return theta


cdef void _gradient_at(const f64[:, ::1] img, Py_ssize_t y0, Py_ssize_t x0,
                       Py_ssize_t h, Py_ssize_t w, Py_ssize_t y, Py_ssize_t x,
                       double span, double* mag, double* ori) noexcept nogil:
    # (y, x) are window-local; borders are the window's own borders
    cdef double gx, gy
    if x == 0:
        gx = img[y0 + y, x0 + 1] - img[y0 + y, x0]
    elif x == w - 1:
        gx = img[y0 + y, x0 + x] - img[y0 + y, x0 + x - 1]
    else:
        gx = img[y0 + y, x0 + x + 1] - img[y0 + y, x0 + x - 1]
    if y == 0:
        gy = img[y0 + 1, x0 + x] - img[y0, x0 + x]
    elif y == h - 1:
        gy = img[y0 + y, x0 + x] - img[y0 + y - 1, x0 + x]
    else:
        gy = img[y0 + y + 1, x0 + x] - img[y0 + y - 1, x0 + x]
    mag[0] = sqrt(gx * gx + gy * gy)
    ori[0] = _fold(atan2(gy, gx) * 180.0 / M_PI, span)


cdef void _cell_hist(const f64[:, ::1] img, Py_ssize_t y0, Py_ssize_t x0,
                     Py_ssize_t h, Py_ssize_t w, int cell, int bins, double span,
                     double* hist, const f64[:, ::1] cmag, const f64[:, ::1] cori,
                     bint cached) noexcept nogil:
    # when cached, cmag/cori hold level-wide gradients; they equal the
    # window-local ones everywhere except on the window border
    cdef Py_ssize_t ncx = w // cell
    cdef Py_ssize_t ncy = h // cell
    cdef Py_ssize_t i, y, x, b0, b1, base
    cdef double mag, ori, pos, frac
    cdef double width = span / bins
    for i in range(ncx * ncy * bins):
        hist[i] = 0.0
    for y in range(ncy * cell):
        for x in range(ncx * cell):
            if cached and 0 < x < w - 1 and 0 < y < h - 1:
                mag = cmag[y0 + y, x0 + x]
                ori = cori[y0 + y, x0 + x]
            else:
                _gradient_at(img, y0, x0, h, w, y, x, span, &mag, &ori)
            if mag == 0.0:
                continue
            pos = ori / width - 0.5
            b0 = <Py_ssize_t>floor(pos)
            frac = pos - b0
            b1 = b0 + 1
            if b0 < 0:
                b0 += bins
            if b1 >= bins:
                b1 -= bins
            base = ((y // cell) * ncx + (x // cell)) * bins
            hist[base + b0] += mag * (1.0 - frac)
            hist[base + b1] += mag * frac


cdef Py_ssize_t _blocks(const double* hist, Py_ssize_t ncy, Py_ssize_t ncx, int bins,
                        int block, int stride, double clip, double eps,
                        double* out) noexcept nogil:
    cdef Py_ssize_t nby = (ncy - block) // stride + 1
    cdef Py_ssize_t nbx = (ncx - block) // stride + 1
    cdef Py_ssize_t blen = block * block * bins
    cdef Py_ssize_t by, bx, i, j, k, n = 0, start
    cdef double ss, norm, v
    for by in range(nby):
        for bx in range(nbx):
            start = n
            for i in range(block):
                for j in range(block):
                    for k in range(bins):
                        out[n] = hist[((by * stride + i) * ncx + bx * stride + j) * bins + k]
                        n += 1
            ss = 0.0
            for i in range(start, n):
                ss += out[i] * out[i]
            norm = sqrt(ss + eps * eps)
            ss = 0.0
            for i in range(start, n):
                v = out[i] / norm
                if v > clip:
                    v = clip
                out[i] = v
                ss += v * v
            norm = sqrt(ss + eps * eps)
            for i in range(start, n):
                out[i] = out[i] / norm
    return n


def gradients(const f64[:, ::1] img, bint signed=False):
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1], y, x
    cdef double span = 360.0 if signed else 180.0
    mag = np.empty((h, w), dtype=np.float64)
    ori = np.empty((h, w), dtype=np.float64)
    cdef f64[:, ::1] m = mag
    cdef f64[:, ::1] o = ori
    with nogil:
        for y in range(h):
            for x in range(w):
                _gradient_at(img, 0, 0, h, w, y, x, span, &m[y, x], &o[y, x])
    return mag, ori


def hog_window(const f64[:, ::1] img, int cell_size, int block_size, int block_stride,
               int bins, bint signed, double clip, double eps):
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    cdef Py_ssize_t ncy = h // cell_size, ncx = w // cell_size
    cdef Py_ssize_t nby = (ncy - block_size) // block_stride + 1
    cdef Py_ssize_t nbx = (ncx - block_size) // block_stride + 1
    cdef double span = 360.0 if signed else 180.0
    out = np.empty(nby * nbx * block_size * block_size * bins, dtype=np.float64)
    cdef f64[::1] o = out
    cdef double* hist = <double*>malloc(ncy * ncx * bins * sizeof(double))
    if hist == NULL:
        raise MemoryError()
    try:
        with nogil:
            _cell_hist(img, 0, 0, h, w, cell_size, bins, span, hist, img, img, False)
            _blocks(hist, ncy, ncx, bins, block_size, block_stride, clip, eps, &o[0])
    finally:
        free(hist)
    return out


def scan_windows(const f64[:, ::1] level, const f64[::1] weights, double bias,
                 int win_w, int win_h, int stride, int cell_size, int block_size,
                 int block_stride, int bins, bint signed, double clip, double eps):
    """Linear score of every stride-aligned window; each window is described alone."""
    cdef Py_ssize_t h = level.shape[0], w = level.shape[1]
    if win_w > w or win_h > h:
        return np.empty((0, 0), dtype=np.float64)
    cdef Py_ssize_t ny = (h - win_h) // stride + 1
    cdef Py_ssize_t nx = (w - win_w) // stride + 1
    cdef Py_ssize_t ncy = win_h // cell_size, ncx = win_w // cell_size
    cdef Py_ssize_t dlen = weights.shape[0]
    cdef double span = 360.0 if signed else 180.0
    scores = np.empty((ny, nx), dtype=np.float64)
    cdef f64[:, ::1] s = scores
    lmag, lori = gradients(level, signed)
    cdef f64[:, ::1] cm = lmag
    cdef f64[:, ::1] co = lori
    cdef Py_ssize_t iy, ix, k, n
    cdef double acc
    cdef double* hist = <double*>malloc(ncy * ncx * bins * sizeof(double))
    cdef double* desc = <double*>malloc(dlen * sizeof(double))
    if hist == NULL or desc == NULL:
        free(hist)
        free(desc)
        raise MemoryError()
    try:
        with nogil:
            for iy in range(ny):
                for ix in range(nx):
                    _cell_hist(level, iy * stride, ix * stride, win_h, win_w,
                               cell_size, bins, span, hist, cm, co, True)
                    n = _blocks(hist, ncy, ncx, bins, block_size, block_stride, clip, eps, desc)
                    acc = bias
                    for k in range(n):
                        acc += weights[k] * desc[k]
                    s[iy, ix] = acc
    finally:
        free(hist)
        free(desc)
    return scores


def warp_affine(const f64[:, ::1] src, const f64[:, ::1] m, int out_h, int out_w):
    """Bilinear resample; ``m`` maps output (u, v) to source (x, y). Zero outside."""
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1], u, v, x0, y0, x1, y1
    cdef double x, y, fx, fy
    cdef double a = m[0, 0], b = m[0, 1], c = m[0, 2]
    cdef double d = m[1, 0], e = m[1, 1], f = m[1, 2]
    out = np.zeros((out_h, out_w), dtype=np.float64)
    cdef f64[:, ::1] o = out
    with nogil:
        for v in range(out_h):
            for u in range(out_w):
                x = a * u + b * v + c
                y = d * u + e * v + f
                if x < 0 or y < 0 or x > w - 1 or y > h - 1:
                    continue
                x0 = <Py_ssize_t>floor(x)
                y0 = <Py_ssize_t>floor(y)
                fx = x - x0
                fy = y - y0
                x1 = x0 + 1 if x0 + 1 < w else x0
                y1 = y0 + 1 if y0 + 1 < h else y0
                o[v, u] = ((1 - fy) * ((1 - fx) * src[y0, x0] + fx * src[y0, x1])
                           + fy * ((1 - fx) * src[y1, x0] + fx * src[y1, x1]))
    return out
