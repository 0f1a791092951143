"""Pure-Python numerical kernels.

This module is the fallback used when the compiled ``_ckernels`` extension is
not importable.  Each function mirrors its compiled twin: same signature, same
algorithm, same order of floating point operations for the Euclidean
kernels (so the two backends agree bitwise there).
"""

import math

import numpy as np

JACOBI_TOL = 1e-13
MAX_SWEEPS = 100
MAX_ORDER = 16


# --------------------------------------------------------------------------
# Euclidean
# --------------------------------------------------------------------------

def euclid_dist(p, q):
    s = 0.0
    for a, b in zip(p.tolist(), q.tolist()):
        d = a - b
        s += d * d
    return math.sqrt(s)


def euclid_geodesic(a, b, t):
    if t == 0.0:
        return np.array(a, dtype=float)
    if t == 1.0:
        return np.array(b, dtype=float)
    return np.array([x + t * (y - x) for x, y in zip(a.tolist(), b.tolist())])


def euclid_sqdist_power(x, a, t, n):
    """Apply ``y <- y + t (a - y)`` n times."""
    y = x.tolist()
    av = a.tolist()
    k = len(y)
    for _ in range(n):
        for i in range(k):
            y[i] = y[i] + t * (av[i] - y[i])
    return np.array(y, dtype=float)


def euclid_dist_power(x, a, step, n):
    """Move toward ``a`` by ``step`` n times, stopping on arrival."""
    y = np.array(x, dtype=float)
    for _ in range(n):
        d = euclid_dist(y, a)
        if d == 0.0:
            break
        if step >= d:
            y = np.array(a, dtype=float)
            break
        y = euclid_geodesic(y, a, step / d)
    return y


def euclid_sqsum_power(x, anchors, weights, h, n):
    """Apply the resolvent of ``sum_i w_i/2 |. - a_i|^2`` with step h, n times."""
    m, k = anchors.shape
    s = [0.0] * k
    total = 0.0
    av = anchors.tolist()
    wv = weights.tolist()
    for i in range(m):
        total += wv[i]
        for j in range(k):
            s[j] += wv[i] * av[i][j]
    denom = 1.0 + h * total
    y = x.tolist()
    for _ in range(n):
        for j in range(k):
            y[j] = (y[j] + h * s[j]) / denom
    return np.array(y, dtype=float)


# --------------------------------------------------------------------------
# Hyperboloid
# --------------------------------------------------------------------------

def _mdot(p, q):
    s = -p[0] * q[0]
    for i in range(1, len(p)):
        s += p[i] * q[i]
    return s


def hyp_dist(p, q):
    pv = p.tolist()
    qv = q.tolist()
    d0 = pv[0] - qv[0]
    s = -d0 * d0
    for i in range(1, len(pv)):
        di = pv[i] - qv[i]
        s += di * di
    if s < 0.0:
        s = 0.0
    return 2.0 * math.asinh(math.sqrt(s) / 2.0)


def hyp_geodesic(a, b, t):
    if t == 0.0:
        return np.array(a, dtype=float)
    if t == 1.0:
        return np.array(b, dtype=float)
    d = hyp_dist(a, b)
    if d == 0.0:
        return np.array(a, dtype=float)
    sd = math.sinh(d)
    ca = math.sinh((1.0 - t) * d) / sd
    cb = math.sinh(t * d) / sd
    y = [ca * x + cb * z for x, z in zip(a.tolist(), b.tolist())]
    m = _mdot(y, y)
    r = math.sqrt(-m)
    return np.array([v / r for v in y], dtype=float)


# --------------------------------------------------------------------------
# Symmetric / SPD matrices
# --------------------------------------------------------------------------

def jacobi_eigh(A):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(w, V)`` with ascending eigenvalues ``w`` and orthonormal
    eigenvector columns ``V``.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if n > MAX_ORDER:
        raise ValueError(f"matrix order {n} exceeds {MAX_ORDER}")
    V = np.eye(n)
    for _ in range(MAX_SWEEPS):
        sq = A * A
        norm = sq.sum()
        # summed directly: norm - trace(sq) cancels and can stop the sweeps early
        off = 2.0 * float(np.triu(sq, 1).sum())
        if off == 0.0 or off <= JACOBI_TOL * JACOBI_TOL * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                colp = A[:, p].copy()
                colq = A[:, q].copy()
                A[:, p] = c * colp - s * colq
                A[:, q] = s * colp + c * colq
                rowp = A[p, :].copy()
                rowq = A[q, :].copy()
                A[p, :] = c * rowp - s * rowq
                A[q, :] = s * rowp + c * rowq
                A[p, q] = 0.0
                A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def _sym(M):
    return 0.5 * (M + M.T)


def _chol(A):
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise ValueError("matrix is not positive definite") from None


def _whiten(L, B):
    Y = np.linalg.solve(L, B)
    Z = np.linalg.solve(L, Y.T)
    return _sym(Z)


def _funm(C, g):
    w, V = jacobi_eigh(C)
    return _sym((V * g(w)) @ V.T), w


def spd_dist(A, B):
    L = _chol(A)
    w, _ = jacobi_eigh(_whiten(L, B))
    if np.any(w <= 0.0):
        raise ValueError("matrix is not positive definite")
    lw = np.log(w)
    return math.sqrt(float(np.dot(lw, lw)))


def spd_geodesic(A, B, t):
    if t == 0.0:
        return np.array(A, dtype=float)
    if t == 1.0:
        return np.array(B, dtype=float)
    L = _chol(A)
    Ct, w = _funm(_whiten(L, B), lambda w: w ** t)
    if np.any(w <= 0.0):
        raise ValueError("matrix is not positive definite")
    return _sym(L @ Ct @ L.T)


def spd_log(A, B):
    L = _chol(A)
    M, w = _funm(_whiten(L, B), lambda w: np.log(np.maximum(w, 1e-300)))
    if np.any(w <= 0.0):
        raise ValueError("matrix is not positive definite")
    return _sym(L @ M @ L.T)


def spd_exp(A, V):
    L = _chol(A)
    M, _ = _funm(_whiten(L, V), np.exp)
    return _sym(L @ M @ L.T)


def spd_inner(A, U, V):
    L = _chol(A)
    return float(np.sum(_whiten(L, U) * _whiten(L, V)))


# --------------------------------------------------------------------------
# Weighted Frechet (Karcher) mean on SPD
# --------------------------------------------------------------------------

def _karcher_state(anchors, weights, Y):
    L = _chol(Y)
    G = np.zeros_like(Y)
    F = 0.0
    for A, wt in zip(anchors, weights):
        lw_mat, w = _funm(_whiten(L, A), lambda w: np.log(np.maximum(w, 1e-300)))
        if np.any(w <= 0.0):
            raise ValueError("matrix is not positive definite")
        lw = np.log(w)
        F += 0.5 * wt * float(np.dot(lw, lw))
        G += wt * lw_mat
    return L, G, F


def spd_karcher(Y0, anchors, weights, tol, max_iter):
    """Minimize sum_i w_i/2 d(Y, A_i)^2 from Y0 by damped fixed-point steps.

    Returns ``(Y, iterations, gradient_norm, objective, status)``; status 0
    means ``gradient_norm / sum(w) <= tol``, 1 the iteration cap, 2 a step
    that could not decrease the objective.
    """
    anchors = np.asarray(anchors, dtype=float)
    weights = np.asarray(weights, dtype=float)
    Y = np.array(Y0, dtype=float)
    if len(anchors) < 1 or len(weights) != len(anchors) or anchors.shape[1:] != Y.shape:
        raise ValueError("shape mismatch")
    mu = float(weights.sum())
    L, G, F = _karcher_state(anchors, weights, Y)
    it = 0
    while True:
        gnorm = math.sqrt(float(np.sum(G * G)))
        if gnorm / mu <= tol:
            return Y, it, gnorm, F, 0
        if it >= max_iter:
            return Y, it, gnorm, F, 1
        it += 1
        step = 1.0
        while True:
            M, _ = _funm(step * G / mu, np.exp)
            Yn = _sym(L @ M @ L.T)
            try:
                Ln, Gn, Fn = _karcher_state(anchors, weights, Yn)
                ok = Fn <= F + 4.0 * 2.220446049250313e-16 * F
            except ValueError:
                ok = False
            if ok:
                break
            step *= 0.5
            if step < 1e-12:
                return Y, it, gnorm, F, 2
        Y, L, G, F = Yn, Ln, Gn, Fn
