# cython: language_level=3, boundscheck=False, wraparound=False
# cython: cdivision=True, initializedcheck=False
"""Compiled numerical kernels.

Same signatures and algorithms as ``proxcat._pykernels``.  Matrices are
limited to order 16 so every SPD routine works on stack buffers.
"""

import numpy as np

from libc.math cimport asinh, exp, log, pow, sinh, sqrt

cdef enum:
    MAXN = 16
    MAXN2 = 256

cdef double JACOBI_TOL = 1e-13
cdef int MAX_SWEEPS = 100


# --------------------------------------------------------------------------
# Euclidean
# --------------------------------------------------------------------------

cdef inline double _edist(const double* p, const double* q, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0, d
    for i in range(n):
        d = p[i] - q[i]
        s += d * d
    return sqrt(s)


def euclid_dist(const double[::1] p, const double[::1] q):
    if p.shape[0] != q.shape[0]:
        raise ValueError("dimension mismatch")
    if p.shape[0] == 0:
        return 0.0
    return _edist(&p[0], &q[0], p.shape[0])


def euclid_geodesic(const double[::1] a, const double[::1] b, double t):
    cdef Py_ssize_t i, n = a.shape[0]
    if b.shape[0] != n:
        raise ValueError("dimension mismatch")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    if t == 0.0:
        for i in range(n):
            y[i] = a[i]
    elif t == 1.0:
        for i in range(n):
            y[i] = b[i]
    else:
        for i in range(n):
            y[i] = a[i] + t * (b[i] - a[i])
    return out


def euclid_sqdist_power(const double[::1] x, const double[::1] a, double t, long n):
    """Apply ``y <- y + t (a - y)`` n times."""
    cdef Py_ssize_t i, k = x.shape[0]
    cdef long it
    if a.shape[0] != k:
        raise ValueError("dimension mismatch")
    out = np.array(x, dtype=np.float64, copy=True)
    cdef double[::1] y = out
    with nogil:
        for it in range(n):
            for i in range(k):
                y[i] = y[i] + t * (a[i] - y[i])
    return out


def euclid_dist_power(const double[::1] x, const double[::1] a, double step, long n):
    """Move toward ``a`` by ``step`` n times, stopping on arrival."""
    cdef Py_ssize_t i, k = x.shape[0]
    cdef long it
    cdef double d, t
    if a.shape[0] != k:
        raise ValueError("dimension mismatch")
    out = np.array(x, dtype=np.float64, copy=True)
    cdef double[::1] y = out
    if k == 0:
        return out
    with nogil:
        for it in range(n):
            d = _edist(&y[0], &a[0], k)
            if d == 0.0:
                break
            if step >= d:
                for i in range(k):
                    y[i] = a[i]
                break
            t = step / d
            if t == 1.0:
                for i in range(k):
                    y[i] = a[i]
            elif t != 0.0:
                for i in range(k):
                    y[i] = y[i] + t * (a[i] - y[i])
    return out


def euclid_sqsum_power(const double[::1] x, const double[:, ::1] anchors,
                       const double[::1] weights, double h, long n):
    """Apply the resolvent of ``sum_i w_i/2 |. - a_i|^2`` with step h, n times."""
    cdef Py_ssize_t i, j, m = anchors.shape[0], k = x.shape[0]
    cdef long it
    cdef double total = 0.0, denom
    if anchors.shape[1] != k or weights.shape[0] != m:
        raise ValueError("shape mismatch")
    s_arr = np.zeros(k, dtype=np.float64)
    cdef double[::1] s = s_arr
    for i in range(m):
        total += weights[i]
        for j in range(k):
            s[j] += weights[i] * anchors[i, j]
    denom = 1.0 + h * total
    out = np.array(x, dtype=np.float64, copy=True)
    cdef double[::1] y = out
    with nogil:
        for it in range(n):
            for j in range(k):
                y[j] = (y[j] + h * s[j]) / denom
    return out


# --------------------------------------------------------------------------
# Hyperboloid
# --------------------------------------------------------------------------

cdef inline double _hdist(const double* p, const double* q, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double d0 = p[0] - q[0], di
    cdef double s = -d0 * d0
    for i in range(1, n):
        di = p[i] - q[i]
        s += di * di
    if s < 0.0:
        s = 0.0
    return 2.0 * asinh(sqrt(s) / 2.0)


def hyp_dist(const double[::1] p, const double[::1] q):
    if p.shape[0] != q.shape[0] or p.shape[0] < 2:
        raise ValueError("dimension mismatch")
    return _hdist(&p[0], &q[0], p.shape[0])


def hyp_geodesic(const double[::1] a, const double[::1] b, double t):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double d, sd, ca, cb, m, r
    if b.shape[0] != n or n < 2:
        raise ValueError("dimension mismatch")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    if t == 0.0:
        for i in range(n):
            y[i] = a[i]
        return out
    if t == 1.0:
        for i in range(n):
            y[i] = b[i]
        return out
    d = _hdist(&a[0], &b[0], n)
    if d == 0.0:
        for i in range(n):
            y[i] = a[i]
        return out
    sd = sinh(d)
    ca = sinh((1.0 - t) * d) / sd
    cb = sinh(t * d) / sd
    for i in range(n):
        y[i] = ca * a[i] + cb * b[i]
    m = -y[0] * y[0]
    for i in range(1, n):
        m += y[i] * y[i]
    r = sqrt(-m)
    for i in range(n):
        y[i] = y[i] / r
    return out


# --------------------------------------------------------------------------
# Symmetric / SPD matrices (row-major n x n buffers, n <= MAXN)
# --------------------------------------------------------------------------

cdef int _jacobi(double* A, double* w, double* V, int n) noexcept nogil:
    """Cyclic Jacobi on A (destroyed).  Eigenvalues ascending in w."""
    cdef int i, j, p, q, k, sweep
    cdef double off, norm, x, apq, theta, t, c, s, u, v, tmp
    for i in range(n * n):
        V[i] = 0.0
    for i in range(n):
        V[i * n + i] = 1.0
    for sweep in range(MAX_SWEEPS):
        off = 0.0
        norm = 0.0
        for i in range(n):
            for j in range(n):
                x = A[i * n + j]
                norm += x * x
                if i != j:
                    off += x * x
        if off == 0.0 or off <= JACOBI_TOL * JACOBI_TOL * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p * n + q]
                if apq == 0.0:
                    continue
                theta = (A[q * n + q] - A[p * n + p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    u = A[k * n + p]
                    v = A[k * n + q]
                    A[k * n + p] = c * u - s * v
                    A[k * n + q] = s * u + c * v
                for k in range(n):
                    u = A[p * n + k]
                    v = A[q * n + k]
                    A[p * n + k] = c * u - s * v
                    A[q * n + k] = s * u + c * v
                A[p * n + q] = 0.0
                A[q * n + p] = 0.0
                for k in range(n):
                    u = V[k * n + p]
                    v = V[k * n + q]
                    V[k * n + p] = c * u - s * v
                    V[k * n + q] = s * u + c * v
    for i in range(n):
        w[i] = A[i * n + i]
    # insertion sort, carrying eigenvector columns
    for i in range(1, n):
        j = i
        while j > 0 and w[j - 1] > w[j]:
            tmp = w[j - 1]
            w[j - 1] = w[j]
            w[j] = tmp
            for k in range(n):
                tmp = V[k * n + j - 1]
                V[k * n + j - 1] = V[k * n + j]
                V[k * n + j] = tmp
            j -= 1
    return 0


cdef int _chol(const double* A, double* L, int n) noexcept nogil:
    cdef int i, j, k
    cdef double s
    for i in range(n * n):
        L[i] = 0.0
    for j in range(n):
        s = A[j * n + j]
        for k in range(j):
            s -= L[j * n + k] * L[j * n + k]
        if not (s > 0.0):
            return -1
        L[j * n + j] = sqrt(s)
        for i in range(j + 1, n):
            s = A[i * n + j]
            for k in range(j):
                s -= L[i * n + k] * L[j * n + k]
            L[i * n + j] = s / L[j * n + j]
    return 0


cdef void _whiten(const double* L, const double* B, double* C, int n) noexcept nogil:
    """C = L^{-1} B L^{-T}, symmetrized."""
    cdef double Y[MAXN2]
    cdef double Z[MAXN2]
    cdef int i, j, k
    cdef double s
    for j in range(n):
        for i in range(n):
            s = B[i * n + j]
            for k in range(i):
                s -= L[i * n + k] * Y[k * n + j]
            Y[i * n + j] = s / L[i * n + i]
    # Z = L^{-1} Y^T
    for j in range(n):
        for i in range(n):
            s = Y[j * n + i]
            for k in range(i):
                s -= L[i * n + k] * Z[k * n + j]
            Z[i * n + j] = s / L[i * n + i]
    for i in range(n):
        for j in range(n):
            C[i * n + j] = 0.5 * (Z[i * n + j] + Z[j * n + i])


cdef void _unwhiten(const double* L, const double* M, double* out, int n) noexcept nogil:
    """out = L M L^T, symmetrized."""
    cdef double T[MAXN2]
    cdef int i, j, k
    cdef double s
    for i in range(n):
        for j in range(n):
            s = 0.0
            for k in range(i + 1):
                s += L[i * n + k] * M[k * n + j]
            T[i * n + j] = s
    for i in range(n):
        for j in range(n):
            s = 0.0
            for k in range(j + 1):
                s += T[i * n + k] * L[j * n + k]
            out[i * n + j] = s
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.5 * (out[i * n + j] + out[j * n + i])
            out[i * n + j] = s
            out[j * n + i] = s


cdef void _recompose(const double* V, const double* g, double* M, int n) noexcept nogil:
    """M = V diag(g) V^T."""
    cdef int i, j, k
    cdef double s
    for i in range(n):
        for j in range(i, n):
            s = 0.0
            for k in range(n):
                s += V[i * n + k] * g[k] * V[j * n + k]
            M[i * n + j] = s
            M[j * n + i] = s


cdef int _load(object arr, double* buf) except -1:
    cdef const double[:, ::1] m = np.ascontiguousarray(arr, dtype=np.float64)
    cdef int n = m.shape[0]
    cdef int i, j
    if m.shape[1] != n:
        raise ValueError("matrix must be square")
    if n < 1 or n > MAXN:
        raise ValueError(f"matrix order {n} outside [1, {MAXN}]")
    for i in range(n):
        for j in range(n):
            buf[i * n + j] = m[i, j]
    return n


cdef object _dump(const double* buf, int n):
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] m = out
    cdef int i, j
    for i in range(n):
        for j in range(n):
            m[i, j] = buf[i * n + j]
    return out


def jacobi_eigh(A):
    """Cyclic Jacobi eigendecomposition; ascending eigenvalues, column vectors."""
    cdef double a[MAXN2]
    cdef double V[MAXN2]
    cdef double w[MAXN]
    cdef int n = _load(A, a)
    cdef int i
    with nogil:
        _jacobi(a, w, V, n)
    wout = np.empty(n, dtype=np.float64)
    for i in range(n):
        wout[i] = w[i]
    return wout, _dump(V, n)


cdef int _prepare(object A, object B, double* L, double* C) except -1:
    cdef double a[MAXN2]
    cdef double b[MAXN2]
    cdef int n = _load(A, a)
    cdef int nb = _load(B, b)
    if nb != n:
        raise ValueError("order mismatch")
    if _chol(a, L, n) != 0:
        raise ValueError("matrix is not positive definite")
    _whiten(L, b, C, n)
    return n


def spd_dist(A, B):
    cdef double L[MAXN2]
    cdef double C[MAXN2]
    cdef double V[MAXN2]
    cdef double w[MAXN]
    cdef int n = _prepare(A, B, L, C)
    cdef int i
    cdef double s = 0.0, lw
    _jacobi(C, w, V, n)
    for i in range(n):
        if not (w[i] > 0.0):
            raise ValueError("matrix is not positive definite")
        lw = log(w[i])
        s += lw * lw
    return sqrt(s)


def spd_geodesic(A, B, double t):
    if t == 0.0:
        return np.array(A, dtype=np.float64)
    if t == 1.0:
        return np.array(B, dtype=np.float64)
    cdef double L[MAXN2]
    cdef double C[MAXN2]
    cdef double V[MAXN2]
    cdef double M[MAXN2]
    cdef double out[MAXN2]
    cdef double w[MAXN]
    cdef int n = _prepare(A, B, L, C)
    cdef int i
    _jacobi(C, w, V, n)
    for i in range(n):
        if not (w[i] > 0.0):
            raise ValueError("matrix is not positive definite")
        w[i] = pow(w[i], t)
    _recompose(V, w, M, n)
    _unwhiten(L, M, out, n)
    return _dump(out, n)


def spd_log(A, B):
    """Tangent vector log_A(B) in ambient (symmetric matrix) coordinates."""
    cdef double L[MAXN2]
    cdef double C[MAXN2]
    cdef double V[MAXN2]
    cdef double M[MAXN2]
    cdef double out[MAXN2]
    cdef double w[MAXN]
    cdef int n = _prepare(A, B, L, C)
    cdef int i
    _jacobi(C, w, V, n)
    for i in range(n):
        if not (w[i] > 0.0):
            raise ValueError("matrix is not positive definite")
        w[i] = log(w[i])
    _recompose(V, w, M, n)
    _unwhiten(L, M, out, n)
    return _dump(out, n)


def spd_exp(A, X):
    """exp_A(X) for a symmetric tangent matrix X at A."""
    cdef double L[MAXN2]
    cdef double C[MAXN2]
    cdef double V[MAXN2]
    cdef double M[MAXN2]
    cdef double out[MAXN2]
    cdef double w[MAXN]
    cdef int n = _prepare(A, X, L, C)
    cdef int i
    _jacobi(C, w, V, n)
    for i in range(n):
        w[i] = exp(w[i])
    _recompose(V, w, M, n)
    _unwhiten(L, M, out, n)
    return _dump(out, n)


def spd_inner(A, U, X):
    """Affine-invariant inner product tr(A^-1 U A^-1 X)."""
    cdef double L[MAXN2]
    cdef double Cu[MAXN2]
    cdef double Cx[MAXN2]
    cdef double x[MAXN2]
    cdef int n = _prepare(A, U, L, Cu)
    cdef int nx = _load(X, x)
    cdef int i
    cdef double s = 0.0
    if nx != n:
        raise ValueError("order mismatch")
    _whiten(L, x, Cx, n)
    for i in range(n * n):
        s += Cu[i] * Cx[i]
    return s


# --------------------------------------------------------------------------
# Weighted Frechet (Karcher) mean on SPD
# --------------------------------------------------------------------------

cdef int _karcher_state(const double[:, :, ::1] anchors, const double[::1] weights,
                        const double* Y, double* L, double* G, double* F, int n) noexcept nogil:
    """Objective and whitened descent direction sum_i w_i log(L^-1 A_i L^-T) at Y."""
    cdef double a[MAXN2]
    cdef double C[MAXN2]
    cdef double V[MAXN2]
    cdef double M[MAXN2]
    cdef double w[MAXN]
    cdef Py_ssize_t i, m = anchors.shape[0]
    cdef int j, k
    cdef double s
    if _chol(Y, L, n) != 0:
        return -1
    for k in range(n * n):
        G[k] = 0.0
    F[0] = 0.0
    for i in range(m):
        for j in range(n):
            for k in range(n):
                a[j * n + k] = anchors[i, j, k]
        _whiten(L, a, C, n)
        _jacobi(C, w, V, n)
        s = 0.0
        for j in range(n):
            if not (w[j] > 0.0):
                return -1
            w[j] = log(w[j])
            s += w[j] * w[j]
        F[0] += 0.5 * weights[i] * s
        _recompose(V, w, M, n)
        for k in range(n * n):
            G[k] += weights[i] * M[k]
    return 0


def spd_karcher(Y0, const double[:, :, ::1] anchors, const double[::1] weights,
                double tol, long max_iter):
    """Minimize sum_i w_i/2 d(Y, A_i)^2 from Y0 by damped fixed-point steps.

    Returns ``(Y, iterations, gradient_norm, objective, status)``; status 0
    means ``gradient_norm / sum(w) <= tol``, 1 the iteration cap, 2 a step
    that could not decrease the objective.
    """
    cdef double Y[MAXN2]
    cdef double L[MAXN2]
    cdef double G[MAXN2]
    cdef double Yn[MAXN2]
    cdef double Ln[MAXN2]
    cdef double Gn[MAXN2]
    cdef double C[MAXN2]
    cdef double V[MAXN2]
    cdef double M[MAXN2]
    cdef double w[MAXN]
    cdef double F, Fn, mu = 0.0, gnorm, step
    cdef int n = _load(Y0, Y)
    cdef int k, status = 1
    cdef long it = 0
    cdef Py_ssize_t i, m = anchors.shape[0]
    if m < 1 or weights.shape[0] != m or anchors.shape[1] != n or anchors.shape[2] != n:
        raise ValueError("shape mismatch")
    for i in range(m):
        mu += weights[i]
    with nogil:
        if _karcher_state(anchors, weights, Y, L, G, &F, n) != 0:
            status = -1
        else:
            while True:
                gnorm = 0.0
                for k in range(n * n):
                    gnorm += G[k] * G[k]
                gnorm = sqrt(gnorm)
                if gnorm / mu <= tol:
                    status = 0
                    break
                if it >= max_iter:
                    status = 1
                    break
                it += 1
                step = 1.0
                while True:
                    for k in range(n * n):
                        C[k] = step * G[k] / mu
                    _jacobi(C, w, V, n)
                    for k in range(n):
                        w[k] = exp(w[k])
                    _recompose(V, w, M, n)
                    _unwhiten(L, M, Yn, n)
                    if (_karcher_state(anchors, weights, Yn, Ln, Gn, &Fn, n) == 0
                            and Fn <= F + 4.0 * 2.220446049250313e-16 * F):
                        break
                    step *= 0.5
                    if step < 1e-12:
                        status = 2
                        break
                if status == 2:
                    break
                for k in range(n * n):
                    Y[k] = Yn[k]
                    L[k] = Ln[k]
                    G[k] = Gn[k]
                F = Fn
    if status == -1:
        raise ValueError("matrix is not positive definite")
    return _dump(Y, n), it, gnorm, F, status
