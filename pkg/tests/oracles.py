"""Independent reference implementations, written from the definitions with plain loops.

Nothing here imports the code under test, so agreement is meaningful.
"""
from __future__ import annotations

import math


def naive_gradients(img):
    """img: list of rows. Returns (mag, ang) lists; ang in degrees folded to [0, 180)."""
    h, w = len(img), len(img[0])
    mag = [[0.0] * w for _ in range(h)]
    ang = [[0.0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            if x == 0:
                gx = img[y][1] - img[y][0]
            elif x == w - 1:
                gx = img[y][w - 1] - img[y][w - 2]
            else:
                gx = img[y][x + 1] - img[y][x - 1]
            if y == 0:
                gy = img[1][x] - img[0][x]
            elif y == h - 1:
                gy = img[h - 1][x] - img[h - 2][x]
            else:
                gy = img[y + 1][x] - img[y - 1][x]
            mag[y][x] = math.sqrt(gx * gx + gy * gy)
            a = math.degrees(math.atan2(gy, gx)) % 180.0
            ang[y][x] = 0.0 if a >= 180.0 else a
    return mag, ang


def naive_hog(img, cell=8, block=2, stride=1, bins=9, clip=0.2, eps=1e-6):
    """HOG with per-bin triangular (bilinear) voting on a circular 180-degree axis."""
    h, w = len(img), len(img[0])
    mag, ang = naive_gradients(img)
    width = 180.0 / bins
    centers = [(k + 0.5) * width for k in range(bins)]
    ncy, ncx = h // cell, w // cell
    hist = [[[0.0] * bins for _ in range(ncx)] for _ in range(ncy)]
    for y in range(ncy * cell):
        for x in range(ncx * cell):
            m, a = mag[y][x], ang[y][x]
            for k, c in enumerate(centers):
                d = abs(a - c)
                d = min(d, 180.0 - d)
                wgt = 1.0 - d / width
                if wgt > 0:
                    hist[y // cell][x // cell][k] += m * wgt
    out = []
    for by in range(0, ncy - block + 1, stride):
        for bx in range(0, ncx - block + 1, stride):
            v = []
            for i in range(block):
                for j in range(block):
                    v.extend(hist[by + i][bx + j])
            n = math.sqrt(sum(t * t for t in v) + eps * eps)
            v = [min(t / n, clip) for t in v]
            n = math.sqrt(sum(t * t for t in v) + eps * eps)
            out.extend(t / n for t in v)
    return out


def box_iou(a, b):
    """a, b: (x, y, w, h)."""
    ax1, ay1 = a[0] + a[2], a[1] + a[3]
    bx1, by1 = b[0] + b[2], b[1] + b[3]
    iw = max(0.0, min(ax1, bx1) - max(a[0], b[0]))
    ih = max(0.0, min(ay1, by1) - max(a[1], b[1]))
    inter = iw * ih
    return inter / (a[2] * a[3] + b[2] * b[3] - inter)


def brute_nms(boxes, thr):
    """boxes: list of (x, y, w, h, score). A box survives iff no higher-ranked survivor overlaps it."""
    ranked = sorted(boxes, key=lambda b: (-b[4], b[0], b[1]))
    kept = []
    for b in ranked:
        if all(box_iou(b, k) <= thr for k in kept):
            kept.append(b)
    return kept


def scan_match(query, records, threshold):
    """records: list of (operator_id, vector). Returns (operator_id or None, distance or None)."""
    best_id, best_d = None, None
    for op, vec in records:
        d = math.sqrt(sum((q - v) ** 2 for q, v in zip(query, vec)))
        if best_d is None or d < best_d or (d == best_d and op < best_id):
            best_id, best_d = op, d
    if best_d is None:
        return None, None
    return (best_id, best_d) if best_d <= threshold else (None, best_d)


def rotation_about(points, theta, center):
    c, s = math.cos(theta), math.sin(theta)
    cx, cy = center
    return [(cx + c * (x - cx) - s * (y - cy), cy + s * (x - cx) + c * (y - cy)) for x, y in points]
