"""Vectorized numpy kernels, used when the compiled extension is unavailable.

Same signatures and numerics as the Cython module ``shiftwatch._ext``.
"""
from __future__ import annotations

import numpy as np


def gradients(img: np.ndarray, signed: bool = False) -> tuple[np.ndarray, np.ndarray]:
    img = np.asarray(img, dtype=np.float64)
    gx = np.empty_like(img)
    gy = np.empty_like(img)
    gx[:, 1:-1] = img[:, 2:] - img[:, :-2]
    gx[:, 0] = img[:, 1] - img[:, 0]
    gx[:, -1] = img[:, -1] - img[:, -2]
    gy[1:-1, :] = img[2:, :] - img[:-2, :]
    gy[0, :] = img[1, :] - img[0, :]
    gy[-1, :] = img[-1, :] - img[-2, :]
    span = 360.0 if signed else 180.0
    ori = np.fmod(np.degrees(np.arctan2(gy, gx)), span)
    ori[ori < 0] += span
    ori[ori >= span] = 0.0
    return np.hypot(gx, gy), ori


def _cell_hist(img: np.ndarray, cell_size: int, bins: int, signed: bool) -> np.ndarray:
    mag, ori = gradients(img, signed)
    ncy, ncx = img.shape[0] // cell_size, img.shape[1] // cell_size
    mag = mag[: ncy * cell_size, : ncx * cell_size]
    ori = ori[: ncy * cell_size, : ncx * cell_size]
    width = (360.0 if signed else 180.0) / bins
    pos = ori / width - 0.5
    b0 = np.floor(pos)
    frac = pos - b0
    b0 = b0.astype(np.intp) % bins
    b1 = (b0 + 1) % bins
    cy = np.arange(ncy * cell_size) // cell_size
    cx = np.arange(ncx * cell_size) // cell_size
    cell_idx = (cy[:, None] * ncx + cx[None, :]) * bins
    hist = np.bincount((cell_idx + b0).ravel(), (mag * (1.0 - frac)).ravel(), ncy * ncx * bins)
    hist += np.bincount((cell_idx + b1).ravel(), (mag * frac).ravel(), ncy * ncx * bins)
    return hist.reshape(ncy, ncx, bins)


def _normalize_blocks(hist: np.ndarray, block: int, stride: int, clip: float, eps: float) -> np.ndarray:
    ncy, ncx, bins = hist.shape
    nby = (ncy - block) // stride + 1
    nbx = (ncx - block) // stride + 1
    iy = (np.arange(nby) * stride)[:, None] + np.arange(block)[None, :]
    ix = (np.arange(nbx) * stride)[:, None] + np.arange(block)[None, :]
    # (nby, nbx, block, block, bins)
    blocks = hist[iy[:, None, :, None], ix[None, :, None, :]]
    v = blocks.reshape(nby, nbx, block * block * bins)
    v = v / np.sqrt(np.sum(v * v, axis=-1, keepdims=True) + eps * eps)
    v = np.minimum(v, clip)
    v = v / np.sqrt(np.sum(v * v, axis=-1, keepdims=True) + eps * eps)
    return v.ravel()


def hog_window(img, cell_size, block_size, block_stride, bins, signed, clip, eps):
    hist = _cell_hist(np.asarray(img, dtype=np.float64), cell_size, bins, signed)
    return _normalize_blocks(hist, block_size, block_stride, clip, eps)


def scan_windows(level, weights, bias, win_w, win_h, stride, cell_size, block_size,
                 block_stride, bins, signed, clip, eps):
    level = np.asarray(level, dtype=np.float64)
    h, w = level.shape
    if win_w > w or win_h > h:
        return np.empty((0, 0))
    ny = (h - win_h) // stride + 1
    nx = (w - win_w) // stride + 1
    scores = np.empty((ny, nx))
    weights = np.asarray(weights, dtype=np.float64)
    for iy in range(ny):
        for ix in range(nx):
            y0, x0 = iy * stride, ix * stride
            d = hog_window(level[y0 : y0 + win_h, x0 : x0 + win_w], cell_size, block_size,
                           block_stride, bins, signed, clip, eps)
            scores[iy, ix] = bias + float(weights @ d)
    return scores


def warp_affine(src, m, out_h, out_w):
    src = np.asarray(src, dtype=np.float64)
    h, w = src.shape
    v, u = np.mgrid[0:out_h, 0:out_w].astype(np.float64)
    x = m[0][0] * u + m[0][1] * v + m[0][2]
    y = m[1][0] * u + m[1][1] * v + m[1][2]
    inside = (x >= 0) & (y >= 0) & (x <= w - 1) & (y <= h - 1)
    xs = np.where(inside, x, 0.0)
    ys = np.where(inside, y, 0.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    fx = xs - x0
    fy = ys - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    out = ((1 - fy) * ((1 - fx) * src[y0, x0] + fx * src[y0, x1])
           + fy * ((1 - fx) * src[y1, x0] + fx * src[y1, x1]))
    return np.where(inside, out, 0.0)
