"""JIT kernels for the row recursion of the continued-fraction solver."""
from __future__ import annotations

import os

import numba
import numpy as np
from numba import njit, prange

# skip probing TBB, whose version check warns on many systems; honour an
# explicit user choice
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

TINY = 1e-16


@njit(cache=True, inline="always")
def _nz(z):
    if z == 0:
        return TINY + 0j
    return z


@njit(cache=True)
def _row_ratios(s, lam2, mu2, q, B, inv_r):
    """``inv_r[k] = Y_{k-1} / Y_k`` (Lentz's ``B_k``) for ``k = 1..B+1``."""
    r = _nz(s + q[0])
    inv_r[1] = 1.0 / r
    for k in range(2, B + 2):
        x = -lam2[k - 2] * mu2[k - 1]
        r = _nz((s + q[k - 1]) + x * inv_r[k - 1])
        inv_r[k] = 1.0 / r


@njit(cache=True)
def _row_green(s, lam2, mu2, q, B, inv_r, dinv):
    """Fill ``1/r_k`` (ratios ``Y_{k-1}/Y_k``) and ``1/(r_{b+1} + T_{b+2})`` for one row."""
    _row_ratios(s, lam2, mu2, q, B, inv_r)
    # tails T_j = x_j / (y_j + T_{j+1}); T_{B+2} = 0 since x_{B+2} = 0
    tail = 0j
    dinv[B] = inv_r[B + 1]
    for j in range(B + 1, 1, -1):
        x = -lam2[j - 2] * mu2[j - 1]
        tail = x / _nz((s + q[j - 1]) + tail)
        b = j - 2
        dinv[b] = 1.0 / _nz(1.0 / inv_r[b + 1] + tail)


@njit(cache=True)
def _row_apply(g, f, lam2, mu2, B, inv_r, dinv):
    """``f[b] = sum_m g[m] phi^{(m)}_b`` with phi built from running products."""
    for b in range(B + 1):
        f[b] = 0j
    for m in range(B + 1):
        gm = g[m]
        if gm == 0:
            continue
        p = gm * dinv[m]
        f[m] += p
        # b < m: prod_{i=b+1}^{m} mu2_i Y_b/Y_m
        for b in range(m - 1, -1, -1):
            p = p * (mu2[b + 1] * inv_r[b + 1])
            if p == 0:
                break
            f[b] += p
        # b > m: prod_{i=m}^{b-1} lambda2_i Y_m/Y_b
        p = gm
        for b in range(m + 1, B + 1):
            p = p * (lam2[b - 1] * inv_r[b])
            if p == 0:
                break
            f[b] += p * dinv[b]


@njit(cache=True)
def _row_solve(g, f, lam2, mu2, B, inv_r):
    """``f = M^{-1} g`` in O(B) using the ratios ``Y_k / Y_{k-1}`` as LU pivots.

    Row ``b`` of the elimination has pivot ``Y_{b+1} / Y_b``, so the forward
    sweep and back substitution reuse ``inv_r``; the result equals the Green's
    function sum of :func:`_row_apply`.
    """
    y = g[0]
    f[0] = y
    for b in range(1, B + 1):
        y = g[b] + lam2[b - 1] * y * inv_r[b]
        f[b] = y
    f[B] = f[B] * inv_r[B + 1]
    for b in range(B - 1, -1, -1):
        f[b] = (f[b] + mu2[b + 1] * f[b + 1]) * inv_r[b + 1]


@njit(cache=True, parallel=True)
def bbd_laplace(s_points, lam1, lam2, mu2, gam, b0, out_re, out_im0, last_only, green=False):
    """Real parts of ``f_ab(s)`` for every row and grid point.

    ``lam1`` etc. have shape ``(n_rows, B + 1)``; row 0 is the initial type-1
    count.  ``out_re`` has shape ``(n_rows, B + 1, K)`` or ``(1, B + 1, K)`` when
    ``last_only``.  ``out_im0`` receives ``max |Im f|`` at ``s_points[0]``.
    """
    n_rows, width = lam1.shape
    B = width - 1
    K = s_points.shape[0]
    q = lam1 + lam2 + mu2 + gam
    for k in prange(K):
        s = s_points[k]
        inv_r = np.empty(B + 2, dtype=np.complex128)
        dinv = np.empty(B + 1, dtype=np.complex128)
        g = np.zeros(B + 1, dtype=np.complex128)
        f = np.zeros(B + 1, dtype=np.complex128)
        g[b0] = 1.0
        im_max = 0.0
        for r in range(n_rows):
            if r > 0:
                for m in range(B + 1):
                    v = lam1[r - 1, m] * f[m]
                    if m < B:
                        v += gam[r - 1, m + 1] * f[m + 1]
                    g[m] = v
            if green:
                _row_green(s, lam2[r], mu2[r], q[r], B, inv_r, dinv)
                _row_apply(g, f, lam2[r], mu2[r], B, inv_r, dinv)
            else:
                _row_ratios(s, lam2[r], mu2[r], q[r], B, inv_r)
                _row_solve(g, f, lam2[r], mu2[r], B, inv_r)
            if (not last_only) or r == n_rows - 1:
                ro = 0 if last_only else r
                for b in range(B + 1):
                    out_re[ro, b, k] = f[b].real
                    if k == 0:
                        a = abs(f[b].imag)
                        if a > im_max:
                            im_max = a
        if k == 0:
            out_im0[0] = im_max
