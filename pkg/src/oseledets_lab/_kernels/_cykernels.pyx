# cython: language_level=3
"""Compiled kernel backend.

Function-for-function mirror of ``_pykernels``; see that module for the
kind codes and the status-index error convention.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport cos, fabs, floor, log, sin, sqrt

cnp.import_array()

KIND_TORAL = 0
KIND_PERTURBED = 1
KIND_HENON = 2

ESCAPE_NORM = 1.0e6
BACKEND = "cython"

cdef double _C_ESCAPE = 1.0e6
cdef double _C_TWO_PI = 6.283185307179586476925286766559
cdef double _C_RANK_FLOOR = 1.0e-154


cdef inline void _c_mod1(double* x, Py_ssize_t d) nogil:
    cdef Py_ssize_t i
    cdef double y
    for i in range(d):
        y = x[i] - floor(x[i])
        if y >= 1.0:
            y -= 1.0
        x[i] = y


cdef inline void _c_matvec(double[:, ::1] mat, double* x, double* out,
                           Py_ssize_t d) nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += mat[i, j] * x[j]
        out[i] = acc


cdef inline void _c_apply(int kind, double[:, ::1] mat, double delta,
                          double ha, double hb, double* x, double* out,
                          Py_ssize_t d) nogil:
    cdef double u0, u1
    if kind == 2:
        u0 = 1.0 - ha * x[0] * x[0] + x[1]
        u1 = hb * x[0]
        out[0] = u0
        out[1] = u1
        return
    _c_matvec(mat, x, out, d)
    if kind == 1:
        out[0] += (delta / _C_TWO_PI) * sin(_C_TWO_PI * x[1])
    _c_mod1(out, d)


cdef inline void _c_jacobian(int kind, double[:, ::1] mat, double delta,
                             double ha, double hb, double* x,
                             double[:, ::1] jac, Py_ssize_t d) nogil:
    cdef Py_ssize_t i, j
    if kind == 2:
        jac[0, 0] = -2.0 * ha * x[0]
        jac[0, 1] = 1.0
        jac[1, 0] = hb
        jac[1, 1] = 0.0
        return
    for i in range(d):
        for j in range(d):
            jac[i, j] = mat[i, j]
    if kind == 1:
        jac[0, 1] += delta * cos(_C_TWO_PI * x[1])


cdef inline bint _c_escaped(double* x, Py_ssize_t d) nogil:
    cdef Py_ssize_t i
    for i in range(d):
        if fabs(x[i]) > _C_ESCAPE:
            return True
    return False


@cython.boundscheck(False)
@cython.wraparound(False)
cdef int _c_mgs(double[:, ::1] work, double* rdiag, double[:, ::1] rfull,
                Py_ssize_t d, Py_ssize_t p, bint keep_full) nogil:
    # modified Gram-Schmidt, positive diagonal; returns failing column or -1
    cdef Py_ssize_t i, j, k
    cdef double rij, rjj
    for j in range(p):
        for i in range(j):
            rij = 0.0
            for k in range(d):
                rij += work[k, i] * work[k, j]
            if keep_full:
                rfull[i, j] = rij
            for k in range(d):
                work[k, j] -= rij * work[k, i]
        rjj = 0.0
        for k in range(d):
            rjj += work[k, j] * work[k, j]
        rjj = sqrt(rjj)
        rdiag[j] = rjj
        if keep_full:
            rfull[j, j] = rjj
        if rjj < _C_RANK_FLOOR:
            return <int> j
        for k in range(d):
            work[k, j] /= rjj
    return -1


@cython.boundscheck(False)
@cython.wraparound(False)
cdef int _c_lu_solve(double[:, ::1] jac, double[:, ::1] scratch,
                     double[:, ::1] rhs, double[:, ::1] out,
                     Py_ssize_t* piv, Py_ssize_t d, Py_ssize_t p) nogil:
    # out = jac^{-1} @ rhs via LU with partial pivoting (jac preserved)
    cdef Py_ssize_t i, j, k, pr
    cdef double best, val, factor
    for i in range(d):
        for j in range(d):
            scratch[i, j] = jac[i, j]
        piv[i] = i
    for k in range(d):
        pr = k
        best = fabs(scratch[k, k])
        for i in range(k + 1, d):
            val = fabs(scratch[i, k])
            if val > best:
                best = val
                pr = i
        if best < _C_RANK_FLOOR:
            return 1
        if pr != k:
            for j in range(d):
                val = scratch[k, j]
                scratch[k, j] = scratch[pr, j]
                scratch[pr, j] = val
            i = piv[k]
            piv[k] = piv[pr]
            piv[pr] = i
        for i in range(k + 1, d):
            factor = scratch[i, k] / scratch[k, k]
            scratch[i, k] = factor
            for j in range(k + 1, d):
                scratch[i, j] -= factor * scratch[k, j]
    for j in range(p):
        for i in range(d):
            out[i, j] = rhs[piv[i], j]
        for i in range(1, d):
            for k in range(i):
                out[i, j] -= scratch[i, k] * out[k, j]
        for i in range(d - 1, -1, -1):
            for k in range(i + 1, d):
                out[i, j] -= scratch[i, k] * out[k, j]
            out[i, j] /= scratch[i, i]
    return 0


def jacobian(int kind, mat_in, double delta, double ha, double hb, x_in):
    """See _pykernels.jacobian."""
    cdef double[:, ::1] mat = np.ascontiguousarray(mat_in, dtype=np.float64)
    cdef double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef Py_ssize_t d = x.shape[0]
    jac_arr = np.empty((d, d))
    cdef double[:, ::1] jac = jac_arr
    _c_jacobian(kind, mat, delta, ha, hb, &x[0], jac, d)
    return jac_arr


def orbit_forward(int kind, mat_in, double delta, double ha, double hb,
                  x0_in, Py_ssize_t n):
    """See _pykernels.orbit_forward."""
    cdef double[:, ::1] mat = np.ascontiguousarray(mat_in, dtype=np.float64)
    x0 = np.ascontiguousarray(x0_in, dtype=np.float64)
    cdef Py_ssize_t d = x0.shape[0]
    pts_arr = np.empty((n + 1, d))
    cdef double[:, ::1] pts = pts_arr
    cdef double[::1] x = x0.copy()
    cdef double[::1] buf = np.empty(d)
    cdef Py_ssize_t i, k
    cdef int status = -1
    if kind != 2:
        _c_mod1(&x[0], d)
    for i in range(d):
        pts[0, i] = x[i]
    with nogil:
        for k in range(1, n + 1):
            _c_apply(kind, mat, delta, ha, hb, &x[0], &buf[0], d)
            for i in range(d):
                x[i] = buf[i]
                pts[k, i] = buf[i]
            if kind == 2 and _c_escaped(&x[0], d):
                status = <int> k
                break
    return pts_arr, status


def orbit_backward(int kind, mat_in, matinv_in, double delta, double ha,
                   double hb, x0_in, Py_ssize_t n):
    """See _pykernels.orbit_backward."""
    cdef double[:, ::1] mat = np.ascontiguousarray(mat_in, dtype=np.float64)
    cdef double[:, ::1] matinv = np.ascontiguousarray(matinv_in, dtype=np.float64)
    x0 = np.ascontiguousarray(x0_in, dtype=np.float64)
    cdef Py_ssize_t d = x0.shape[0]
    pts_arr = np.empty((n + 1, d))
    cdef double[:, ::1] pts = pts_arr
    cdef double[::1] x = x0.copy()
    cdef double[::1] y = np.empty(d)
    cdef double[::1] ynew = np.empty(d)
    cdef double[::1] buf = np.empty(d)
    cdef double scale = delta / _C_TWO_PI
    cdef Py_ssize_t i, k, it
    cdef int status = -1
    cdef double err, e
    cdef bint ok
    if kind != 2:
        _c_mod1(&x[0], d)
    for i in range(d):
        pts[0, i] = x[i]
    with nogil:
        for k in range(1, n + 1):
            if kind == 0:
                _c_matvec(matinv, &x[0], &buf[0], d)
                _c_mod1(&buf[0], d)
                for i in range(d):
                    x[i] = buf[i]
            elif kind == 1:
                # solve f(y) = x by fixed-point iteration on the torus
                _c_matvec(matinv, &x[0], &y[0], d)
                _c_mod1(&y[0], d)
                ok = False
                for it in range(100):
                    for i in range(d):
                        buf[i] = x[i]
                    buf[0] -= scale * sin(_C_TWO_PI * y[1])
                    _c_matvec(matinv, &buf[0], &ynew[0], d)
                    _c_mod1(&ynew[0], d)
                    err = 0.0
                    for i in range(d):
                        e = ynew[i] - y[i]
                        e -= floor(e + 0.5)
                        if fabs(e) > err:
                            err = fabs(e)
                        y[i] = ynew[i]
                    if err < 1.0e-15:
                        ok = True
                        break
                if not ok:
                    status = <int> k
                    break
                for i in range(d):
                    x[i] = y[i]
            else:
                buf[0] = x[1] / hb
                buf[1] = x[0] - 1.0 + ha * buf[0] * buf[0]
                for i in range(d):
                    x[i] = buf[i]
                if _c_escaped(&x[0], d):
                    status = <int> k
                    break
            for i in range(d):
                pts[k, i] = x[i]
    return pts_arr, status


def qr_log_history(int kind, mat_in, double delta, double ha, double hb,
                   x0_in, Py_ssize_t n, Py_ssize_t renorm, Py_ssize_t warmup):
    """See _pykernels.qr_log_history."""
    cdef double[:, ::1] mat = np.ascontiguousarray(mat_in, dtype=np.float64)
    x0 = np.ascontiguousarray(x0_in, dtype=np.float64)
    cdef Py_ssize_t d = x0.shape[0]
    x_arr = x0.copy()
    cdef double[::1] x = x_arr
    cdef double[::1] buf = np.empty(d)
    cdef double[:, ::1] q = np.eye(d)
    cdef double[:, ::1] jac = np.empty((d, d))
    cdef double[:, ::1] tmp = np.empty((d, d))
    cdef double[::1] rdiag = np.empty(d)
    cdef double[:, ::1] rdummy = np.empty((1, 1))
    cdef Py_ssize_t nwin = (n + renorm - 1) // renorm
    hist_arr = np.zeros((nwin, d))
    cdef double[:, ::1] hist = hist_arr
    cdef Py_ssize_t i, j, k, t
    cdef int status = -1
    cdef int fail
    cdef bint degen = False
    if kind != 2:
        _c_mod1(&x[0], d)
    with nogil:
        for k in range(warmup):
            _c_jacobian(kind, mat, delta, ha, hb, &x[0], jac, d)
            for i in range(d):
                for j in range(d):
                    tmp[i, j] = 0.0
                    for t in range(d):
                        tmp[i, j] += jac[i, t] * q[t, j]
            for i in range(d):
                for j in range(d):
                    q[i, j] = tmp[i, j]
            fail = _c_mgs(q, &rdiag[0], rdummy, d, d, False)
            if fail >= 0:
                status = 0
                degen = True
                break
            _c_apply(kind, mat, delta, ha, hb, &x[0], &buf[0], d)
            for i in range(d):
                x[i] = buf[i]
            if kind == 2 and _c_escaped(&x[0], d):
                status = 0
                degen = True
                break
        if not degen:
            for k in range(n):
                _c_jacobian(kind, mat, delta, ha, hb, &x[0], jac, d)
                for i in range(d):
                    for j in range(d):
                        tmp[i, j] = 0.0
                        for t in range(d):
                            tmp[i, j] += jac[i, t] * q[t, j]
                for i in range(d):
                    for j in range(d):
                        q[i, j] = tmp[i, j]
                fail = _c_mgs(q, &rdiag[0], rdummy, d, d, False)
                if fail >= 0:
                    status = <int> k
                    degen = True
                    break
                for i in range(d):
                    hist[k // renorm, i] += log(fabs(rdiag[i]))
                _c_apply(kind, mat, delta, ha, hb, &x[0], &buf[0], d)
                for i in range(d):
                    x[i] = buf[i]
                if kind == 2 and _c_escaped(&x[0], d):
                    status = <int> k
                    degen = True
                    break
    if degen:
        return None, x_arr, status
    return hist_arr, x_arr, -1


def push_frame(int kind, mat_in, double delta, double ha, double hb,
               base_points_in, frame_in, bint inverse):
    """See _pykernels.push_frame."""
    cdef double[:, ::1] mat = np.ascontiguousarray(mat_in, dtype=np.float64)
    cdef double[:, ::1] base = np.ascontiguousarray(base_points_in, dtype=np.float64)
    work_arr = np.array(frame_in, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] work = work_arr
    cdef Py_ssize_t d = work.shape[0]
    cdef Py_ssize_t p = work.shape[1]
    cdef Py_ssize_t m = base.shape[0]
    col_arr = np.zeros(p)
    cdef double[::1] col_logs = col_arr
    cdef double[:, ::1] jac = np.empty((d, d))
    cdef double[:, ::1] scratch = np.empty((d, d))
    cdef double[:, ::1] tmp = np.empty((d, p))
    cdef double[::1] rdiag = np.empty(p)
    cdef double[:, ::1] rdummy = np.empty((1, 1))
    cdef double[::1] pt = np.empty(d)
    piv_arr = np.empty(d, dtype=np.intp)
    cdef Py_ssize_t[::1] piv = piv_arr
    cdef Py_ssize_t i, j, k, t
    cdef int status = -1
    cdef int fail
    with nogil:
        for k in range(m):
            for i in range(d):
                pt[i] = base[k, i]
            _c_jacobian(kind, mat, delta, ha, hb, &pt[0], jac, d)
            if inverse:
                fail = _c_lu_solve(jac, scratch, work, tmp, &piv[0], d, p)
                if fail != 0:
                    status = <int> k
                    break
            else:
                for i in range(d):
                    for j in range(p):
                        tmp[i, j] = 0.0
                        for t in range(d):
                            tmp[i, j] += jac[i, t] * work[t, j]
            for i in range(d):
                for j in range(p):
                    work[i, j] = tmp[i, j]
            fail = _c_mgs(work, &rdiag[0], rdummy, d, p, False)
            if fail >= 0:
                status = <int> k
                break
            for j in range(p):
                col_logs[j] += log(fabs(rdiag[j]))
    return work_arr, col_arr, status


def push_frame_steps(int kind, mat_in, double delta, double ha, double hb,
                     base_points_in, frame_in, bint inverse):
    """See _pykernels.push_frame_steps."""
    cdef double[:, ::1] mat = np.ascontiguousarray(mat_in, dtype=np.float64)
    cdef double[:, ::1] base = np.ascontiguousarray(base_points_in, dtype=np.float64)
    work_arr = np.array(frame_in, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] work = work_arr
    cdef Py_ssize_t d = work.shape[0]
    cdef Py_ssize_t p = work.shape[1]
    cdef Py_ssize_t m = base.shape[0]
    frames_arr = np.empty((m + 1, d, p))
    rfacs_arr = np.empty((m, p, p))
    cdef double[:, :, ::1] frames = frames_arr
    cdef double[:, :, ::1] rfacs = rfacs_arr
    cdef double[:, ::1] jac = np.empty((d, d))
    cdef double[:, ::1] scratch = np.empty((d, d))
    cdef double[:, ::1] tmp = np.empty((d, p))
    cdef double[::1] rdiag = np.empty(p)
    cdef double[:, ::1] rfull = np.zeros((p, p))
    cdef double[::1] pt = np.empty(d)
    piv_arr = np.empty(d, dtype=np.intp)
    cdef Py_ssize_t[::1] piv = piv_arr
    cdef Py_ssize_t i, j, k, t
    cdef int status = -1
    cdef int fail
    with nogil:
        for i in range(d):
            for j in range(p):
                frames[0, i, j] = work[i, j]
        for k in range(m):
            for i in range(d):
                pt[i] = base[k, i]
            _c_jacobian(kind, mat, delta, ha, hb, &pt[0], jac, d)
            if inverse:
                fail = _c_lu_solve(jac, scratch, work, tmp, &piv[0], d, p)
                if fail != 0:
                    status = <int> k
                    break
            else:
                for i in range(d):
                    for j in range(p):
                        tmp[i, j] = 0.0
                        for t in range(d):
                            tmp[i, j] += jac[i, t] * work[t, j]
            for i in range(d):
                for j in range(p):
                    work[i, j] = tmp[i, j]
            for i in range(p):
                for j in range(p):
                    rfull[i, j] = 0.0
            fail = _c_mgs(work, &rdiag[0], rfull, d, p, True)
            if fail >= 0:
                status = <int> k
                break
            for i in range(p):
                for j in range(p):
                    rfacs[k, i, j] = rfull[i, j]
            for i in range(d):
                for j in range(p):
                    frames[k + 1, i, j] = work[i, j]
    return frames_arr, rfacs_arr, status
