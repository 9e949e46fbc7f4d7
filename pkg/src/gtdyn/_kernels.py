"""Compiled inner loop for long runs with the built-in cost models.

Mirrors ``dynamics._advance`` step for step; results agree with the numpy
path to rounding.
"""

import math

import numba as nb
import numpy as np


@nb.njit(cache=True)
def quad_grads(x, curv, centers, unused, out):
    n, m = x.shape
    for i in range(n):
        for a in range(m):
            acc = 0.0
            for b in range(m):
                acc += curv[i, a, b] * (x[i, b] - centers[i, b])
            out[i, a] = acc


@nb.njit(cache=True)
def svm_grads(x, g, mask, params, out):
    mu, c, ridge = params[0], params[1], params[2]
    n, m = x.shape
    width = g.shape[1]
    for i in range(n):
        for a in range(m):
            out[i, a] = 0.0
        for j in range(width):
            if mask[i, j] == 0.0:
                continue
            z = 1.0
            for a in range(m):
                z += g[i, j, a] * x[i, a]
            t = mu * z
            if t >= 0:
                s = 1.0 / (1.0 + math.exp(-t))
            else:
                e = math.exp(t)
                s = e / (1.0 + e)
            w = c * s * mask[i, j]
            for a in range(m):
                out[i, a] += w * g[i, j, a]
        for a in range(3):
            out[i, a] += 2.0 * x[i, a]
        out[i, 3] += ridge * x[i, 3]


@nb.njit(cache=True)
def _consensus(weights, v, out):
    n, m = v.shape
    for i in range(n):
        for a in range(m):
            acc = 0.0
            for j in range(n):
                w = weights[i, j]
                if w != 0.0:
                    acc += w * (v[j, a] - v[i, a])
            out[i, a] = acc


QUADRATIC = 0
SVM = 1


@nb.njit(cache=True)
def _grads(kind, x, p1, p2, p3, out):
    if kind == SVM:
        svm_grads(x, p1, p2, p3, out)
    else:
        quad_grads(x, p1, p2, p3, out)


@nb.njit(cache=True)
def run_loop(kind, p1, p2, p3, x0, y0, weights_w, weights_a, seg_start, seg_snap, k0, k1, n_total, gain, eta, threshold, stride, inv0, max_grad0):
    """Steps ``k0..k1-1``; records after every step ``k`` with ``(k + 1) % stride == 0`` or ``k + 1 == n_total``."""
    n, m = x0.shape
    x = x0.copy()
    y = y0.copy()
    gx = np.empty_like(x)
    _grads(kind, x, p1, p2, p3, gx)
    x_new = np.empty_like(x)
    y_new = np.empty_like(y)
    g_new = np.empty_like(x)
    lx = np.empty_like(x)
    ly = np.empty_like(y)
    max_grad = max_grad0
    drift = 0.0

    n_rec = (k1 - k0) // stride + 2
    rec_k = np.empty(n_rec, dtype=np.int64)
    rec_x = np.empty((n_rec, n, m))
    rec_y = np.empty((n_rec, n, m))
    cnt = 0

    seg = 0
    n_seg = seg_start.shape[0]
    diverged = False
    steps_run = k1
    inv = np.empty(m)
    for k in range(k0, k1):
        while seg + 1 < n_seg and seg_start[seg + 1] <= k:
            seg += 1
        snap = seg_snap[seg]
        _consensus(weights_w[snap], x, lx)
        biggest = 0.0
        ok = True
        for i in range(n):
            for a in range(m):
                v = x[i, a] + eta * lx[i, a] - gain * y[i, a]
                x_new[i, a] = v
                if not math.isfinite(v):
                    ok = False
                elif abs(v) > biggest:
                    biggest = abs(v)
        if not ok or biggest > threshold:
            diverged = True
            steps_run = k
            break
        _grads(kind, x_new, p1, p2, p3, g_new)
        _consensus(weights_a[snap], y, ly)
        for i in range(n):
            for a in range(m):
                v = y[i, a] + eta * ly[i, a] + g_new[i, a] - gx[i, a]
                y_new[i, a] = v
                if not math.isfinite(v):
                    ok = False
        if not ok:
            diverged = True
            steps_run = k
            break
        x, x_new = x_new, x
        y, y_new = y_new, y
        gx, g_new = g_new, gx
        for a in range(m):
            inv[a] = 0.0
        for i in range(n):
            for a in range(m):
                inv[a] += y[i, a] - gx[i, a]
                if abs(gx[i, a]) > max_grad:
                    max_grad = abs(gx[i, a])
        for a in range(m):
            d = abs(inv[a] - inv0[a])
            if d > drift:
                drift = d
        if (k + 1) % stride == 0 or k + 1 == n_total:
            rec_k[cnt] = k + 1
            rec_x[cnt] = x
            rec_y[cnt] = y
            cnt += 1
    return rec_k[:cnt], rec_x[:cnt], rec_y[:cnt], x, y, drift, max_grad, diverged, steps_run
