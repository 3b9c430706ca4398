"""Pure-numpy kernel backend.

Mirrors the compiled Cython backend function-for-function.  Every kernel
works on float64 arrays, holds no global state, and reports failures via
a status index instead of raising, so the two backends stay drop-in
interchangeable behind ``oseledets_lab._kernels``.

System kind codes (shared with the compiled backend):

* 0 — toral automorphism: x -> A x (mod 1)
* 1 — perturbed toral:    x -> A x + (delta/2pi) sin(2 pi x_2) e_1 (mod 1)
* 2 — Henon plane map:    (x1, x2) -> (1 - a x1^2 + x2, b x1)
"""

from __future__ import annotations

import numpy as np

KIND_TORAL = 0
KIND_PERTURBED = 1
KIND_HENON = 2

ESCAPE_NORM = 1.0e6
_TWO_PI = 2.0 * np.pi
_RANK_FLOOR = 1.0e-154

BACKEND = "python"


def _mod1(x):
    y = x - np.floor(x)
    # floor-based reduction can land exactly on 1.0 for tiny negatives
    y[y >= 1.0] = y[y >= 1.0] - 1.0
    return y


def _apply(kind, mat, delta, ha, hb, x):
    if kind == KIND_TORAL:
        return _mod1(mat @ x)
    if kind == KIND_PERTURBED:
        y = mat @ x
        y[0] += (delta / _TWO_PI) * np.sin(_TWO_PI * x[1])
        return _mod1(y)
    return np.array([1.0 - ha * x[0] * x[0] + x[1], hb * x[0]])


def _apply_inverse_henon(ha, hb, x):
    u = x[1] / hb
    return np.array([u, x[0] - 1.0 + ha * u * u])


def jacobian(kind, mat, delta, ha, hb, x):
    """Jacobian of the map at a point (2-d array, freshly allocated)."""
    if kind == KIND_TORAL:
        return mat.copy()
    if kind == KIND_PERTURBED:
        jac = mat.copy()
        jac[0, 1] += delta * np.cos(_TWO_PI * x[1])
        return jac
    return np.array([[-2.0 * ha * x[0], 1.0], [hb, 0.0]])


def orbit_forward(kind, mat, delta, ha, hb, x0, n):
    """Iterate the map n times.  Returns (points (n+1, d), status).

    status is -1 on success; for the plane map it is the first index at
    which the orbit escaped ``ESCAPE_NORM``.
    """
    d = x0.shape[0]
    pts = np.empty((n + 1, d))
    pts[0] = _mod1(x0.copy()) if kind != KIND_HENON else x0
    x = pts[0].copy()
    for k in range(1, n + 1):
        x = _apply(kind, mat, delta, ha, hb, x)
        pts[k] = x
        if kind == KIND_HENON and (np.abs(x) > ESCAPE_NORM).any():
            return pts, k
    return pts, -1


def orbit_backward(kind, mat, matinv, delta, ha, hb, x0, n):
    """Iterate the inverse map n times: points[j] = f^{-j} x0."""
    d = x0.shape[0]
    pts = np.empty((n + 1, d))
    pts[0] = _mod1(x0.copy()) if kind != KIND_HENON else x0
    x = pts[0].copy()
    scale = delta / _TWO_PI
    for k in range(1, n + 1):
        if kind == KIND_TORAL:
            x = _mod1(matinv @ x)
        elif kind == KIND_PERTURBED:
            # solve f(y) = x by fixed-point iteration on the torus
            y = _mod1(matinv @ x)
            ok = False
            for _ in range(100):
                ynew = x.copy()
                ynew[0] -= scale * np.sin(_TWO_PI * y[1])
                ynew = _mod1(matinv @ ynew)
                err = ynew - y
                err -= np.round(err)
                y = ynew
                if np.max(np.abs(err)) < 1.0e-15:
                    ok = True
                    break
            if not ok:
                return pts, k
            x = y
        else:
            x = _apply_inverse_henon(ha, hb, x)
            if (np.abs(x) > ESCAPE_NORM).any():
                return pts, k
        pts[k] = x
    return pts, -1


def _mgs(work):
    """In-place modified Gram-Schmidt of a (d, p) frame.

    Returns (rdiag, rfull) with positive diagonal; columns of ``work``
    become orthonormal.
    """
    d, p = work.shape
    rfull = np.zeros((p, p))
    for j in range(p):
        v = work[:, j]
        for i in range(j):
            rij = work[:, i] @ v
            rfull[i, j] = rij
            v -= rij * work[:, i]
        rjj = np.linalg.norm(v)
        rfull[j, j] = rjj
        if rjj < _RANK_FLOOR:
            return None, None
        work[:, j] = v / rjj
    return np.diag(rfull).copy(), rfull


def qr_log_history(kind, mat, delta, ha, hb, x0, n, renorm, warmup):
    """Per-step QR cocycle along the forward orbit of x0.

    The frame is re-orthonormalized after every step; log|diag R| values
    are accumulated into windows of ``renorm`` steps.  Returns
    (hist (nwin, d), x_end, status) where status (-1 ok) reports orbit
    escape as in orbit_forward.
    """
    d = x0.shape[0]
    x = _mod1(x0.copy()) if kind != KIND_HENON else x0.copy()
    q = np.eye(d)
    for _ in range(warmup):
        q = jacobian(kind, mat, delta, ha, hb, x) @ q
        rd, _ = _mgs(q)
        if rd is None:
            return None, x, 0
        x = _apply(kind, mat, delta, ha, hb, x)
        if kind == KIND_HENON and (np.abs(x) > ESCAPE_NORM).any():
            return None, x, 0
    nwin = (n + renorm - 1) // renorm
    hist = np.zeros((nwin, d))
    for k in range(n):
        q = jacobian(kind, mat, delta, ha, hb, x) @ q
        rd, _ = _mgs(q)
        if rd is None:
            return None, x, k
        hist[k // renorm] += np.log(np.abs(rd))
        x = _apply(kind, mat, delta, ha, hb, x)
        if kind == KIND_HENON and (np.abs(x) > ESCAPE_NORM).any():
            return None, x, k
    return hist, x, -1


def _step_matrix(kind, mat, delta, ha, hb, point, inverse):
    jac = jacobian(kind, mat, delta, ha, hb, point)
    if inverse:
        return np.linalg.inv(jac)
    return jac


def push_frame(kind, mat, delta, ha, hb, base_points, frame, inverse):
    """Push a (d, p) frame through the Jacobians at ``base_points``.

    Applies J(base_points[k]) (or its inverse) in order k = 0..m-1,
    re-orthonormalizing after every application.  Returns
    (frame_out, col_logs (p,), status): col_logs[i] is the accumulated
    log of the i-th R diagonal, so the level-j restricted log-volume
    growth is col_logs[:j].sum().  status -1 ok, else the failing step.
    """
    work = np.array(frame, dtype=float, copy=True)
    p = work.shape[1]
    col_logs = np.zeros(p)
    for k in range(base_points.shape[0]):
        step = _step_matrix(kind, mat, delta, ha, hb, base_points[k], inverse)
        work = step @ work
        rd, _ = _mgs(work)
        if rd is None:
            return work, col_logs, k
        col_logs += np.log(np.abs(rd))
    return work, col_logs, -1


def push_frame_steps(kind, mat, delta, ha, hb, base_points, frame, inverse):
    """Like push_frame but records every intermediate frame and R factor.

    Returns (frames (m+1, d, p), rfacs (m, p, p), status).  frames[k] is
    the orthonormal frame before step k (frames[m] the final one);
    rfacs[k] is the triangular factor of step k, so restricted norms over
    [a, b) are singular values of rfacs[b-1] @ ... @ rfacs[a].
    """
    m = base_points.shape[0]
    work = np.array(frame, dtype=float, copy=True)
    d, p = work.shape
    frames = np.empty((m + 1, d, p))
    rfacs = np.empty((m, p, p))
    frames[0] = work
    for k in range(m):
        step = _step_matrix(kind, mat, delta, ha, hb, base_points[k], inverse)
        work = step @ work
        rd, rfull = _mgs(work)
        if rd is None:
            return frames, rfacs, k
        rfacs[k] = rfull
        frames[k + 1] = work
    return frames, rfacs, -1
