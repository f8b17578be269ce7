# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled closed-loop stepping.

Mirrors ``modcoord._loop.run_steps`` operation for operation on flat arrays.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, exp, fabs, sqrt
from scipy.linalg.cython_lapack cimport dgesv

cnp.import_array()

# status codes returned by the inner loop
cdef enum:
    OK = 0
    BOUNDARY = 1
    INFEASIBLE = 2
    SINGULAR = 3


cdef int _balance(double[:, ::1] A, double[:, ::1] Ap, double[::1] b, double[::1] ahat,
                  double lo, double hi, double tol, int max_iter, double[::1] out,
                  double[::1] x, double[::1] p, double[::1] q, double[::1] w,
                  double[::1] r) nogil:
    """Projection of ``ahat`` onto ``{A x = b, lo <= x <= hi}``."""
    cdef Py_ssize_t ns = A.shape[0], ne = A.shape[1], k, e, it
    cdef double s, change, res, xn
    cdef bint inside = True
    # affine projection y = ahat - Ap (A ahat - b)
    for k in range(ns):
        s = -b[k]
        for e in range(ne):
            s += A[k, e] * ahat[e]
        r[k] = s
    for e in range(ne):
        s = ahat[e]
        for k in range(ns):
            s -= Ap[e, k] * r[k]
        out[e] = s
        if s < lo or s > hi:
            inside = False
    if inside:
        return OK
    for e in range(ne):
        x[e] = ahat[e]
        p[e] = 0.0
        q[e] = 0.0
    for it in range(max_iter):
        for e in range(ne):
            w[e] = x[e] + p[e]
        for k in range(ns):
            s = -b[k]
            for e in range(ne):
                s += A[k, e] * w[e]
            r[k] = s
        for e in range(ne):
            s = w[e]
            for k in range(ns):
                s -= Ap[e, k] * r[k]
            p[e] = w[e] - s
            w[e] = s + q[e]
        change = 0.0
        for e in range(ne):
            xn = w[e]
            if xn < lo:
                xn = lo
            elif xn > hi:
                xn = hi
            q[e] = w[e] - xn
            if fabs(xn - x[e]) > change:
                change = fabs(xn - x[e])
            x[e] = xn
        if change <= tol:
            res = 0.0
            for k in range(ns):
                s = -b[k]
                for e in range(ne):
                    s += A[k, e] * x[e]
                if fabs(s) > res:
                    res = fabs(s)
            if res <= tol:
                for e in range(ne):
                    out[e] = x[e]
                return OK
    return INFEASIBLE


def run_steps(P):
    """Run the closed loop described by a ``StepProblem``; returns ``(rows, snapshots)``."""
    cdef int ns = P.n_s, ne = P.n_e, N = P.N, dim = P.dim
    cdef int n_steps = P.n_steps, every = P.snap_every, ncol = P.n_cols
    cdef int ni = ns + ne, nz = N * (ns + ne), m = 2 * ns
    cdef double dt = P.dt, eps = P.eps, tau = P.tau, gamma = P.gamma
    cdef double btol = P.balance_tol
    cdef int bmax_iter = P.balance_max_iter
    cdef double c_min = P.c_min, c_max = P.c_max, lift = P.lift, ratio = P.ratio
    cdef int kind = P.kind
    cdef double rate = P.rate, gain = P.gain

    cdef double[:, ::1] A = P.A
    cdef double[:, ::1] Ap = P.A_pinv
    cdef double[:, ::1] B = P.B
    cdef double[:, ::1] R = P.R
    cdef double[:, ::1] Apos = P.A_pos
    cdef double[::1] f_lin = P.f_lin
    cdef double[::1] f_quad = P.f_quad
    cdef double[::1] zup = P.z_upper
    cdef double[:, ::1] off = P.jm_offdiag
    cdef double[:, ::1] JN = P.J_N
    cdef double[::1] klo = P.k_lo
    cdef double[::1] khi = P.k_hi
    cdef double[::1] alo = P.alpha_lo
    cdef double[::1] ahi = P.alpha_hi
    cdef double[::1] qbar = P.q_bar
    cdef double[::1] amp = P.amp
    cdef double[::1] omega = P.omega
    cdef double[::1] phase = P.phase
    cdef double[::1] bps = P.breakpoints
    cdef double[:, ::1] levels = P.levels
    cdef int nbp = bps.shape[0]
    cdef double[::1] p_lin = P.p_lin
    cdef double[::1] p_quad = P.p_quad
    cdef double[::1] c_lin = P.c_lin
    cdef double[::1] c_quad = P.c_quad

    rows_np = np.empty((n_steps + 1, ncol))
    snaps_np = np.empty((n_steps // every + 1, dim))
    cdef double[:, ::1] rows = rows_np
    cdef double[:, ::1] snaps = snaps_np

    cdef double[::1] Q = np.array(P.Q0, dtype=np.float64)
    cdef double[::1] c = np.array(P.c0, dtype=np.float64)
    cdef double[:, ::1] v = np.array(P.v0, dtype=np.float64)
    cdef double[::1] eta = np.array(P.eta0, dtype=np.float64)

    cdef double[::1] zeta = np.empty(ns)
    cdef double[::1] dudq = np.empty(ns)
    cdef double[::1] qdot = np.empty(ns)
    cdef double[::1] cdot = np.empty(ns)
    cdef double[::1] u = np.empty(ns)
    cdef double[:, ::1] beta = np.empty((N, ns))
    cdef double[:, ::1] alpha = np.empty((N, ne))
    cdef double[::1] bvec = np.empty(ns)
    cdef double[::1] ahat = np.empty(ne)
    cdef double[::1] arow = np.empty(ne)
    cdef double[::1] sx = np.empty(ne)
    cdef double[::1] sp = np.empty(ne)
    cdef double[::1] sq = np.empty(ne)
    cdef double[::1] sw = np.empty(ne)
    cdef double[::1] sr = np.empty(ns)
    cdef double[::1] F = np.empty(dim)
    cdef double[::1] rhs = np.empty(dim)
    cdef double[::1] svec = np.empty(ns)
    cdef double[::1] vnew = np.empty(ns)
    # column-major copy of the constant off-diagonal part of J_M
    off_f_np = np.asfortranarray(P.jm_offdiag)
    cdef double[::1, :] off_f = off_f_np
    cdef double[::1, :] M = np.empty((dim, dim), order="F")
    cdef int[::1] ipiv = np.empty(dim, dtype=np.intc)

    cdef int k, i, j, e, l, col, info, nrhs = 1, status = OK, jseg
    cdef double t, w, s, zj, gap, resid, err_g, err_b, cost, target, mult

    with nogil:
        for k in range(n_steps + 1):
            t = k * dt
            # regulation target and its slope
            for j in range(ns):
                w = ratio * exp(-(Q[j] - qbar[j]))
                zeta[j] = c[j] - c_min / 2.0 + lift / (1.0 + w)
                dudq[j] = lift * w / ((1.0 + w) * (1.0 + w))
            # applied controls
            for j in range(ns):
                u[j] = 0.0
            for i in range(N):
                for j in range(ns):
                    beta[i, j] = eta[i * ni + j]
                    u[j] += beta[i, j]
                for j in range(ns):
                    s = 0.0
                    for l in range(ns):
                        s += B[j, l] * beta[i, l]
                    bvec[j] = s
                for e in range(ne):
                    ahat[e] = eta[i * ni + ns + e]
                status = _balance(A, Ap, bvec, ahat, alo[i], ahi[i], btol, bmax_iter,
                                  arow, sx, sp, sq, sw, sr)
                if status != OK:
                    break
                for e in range(ne):
                    alpha[i, e] = arow[e]
            if status != OK:
                break
            # plant derivatives
            for j in range(ns):
                s = c[j] - u[j]
                if Q[j] <= 0.0 and s < 0.0:
                    s = 0.0
                qdot[j] = s
                if kind == 0:
                    s = 0.0
                elif kind == 1:
                    s = amp[j] * omega[j] * cos(omega[j] * t + phase[j])
                else:
                    jseg = 0
                    while jseg < nbp and bps[jseg] <= t:
                        jseg += 1
                    s = gain * (levels[jseg, j] - c[j])
                    if s > rate:
                        s = rate
                    elif s < -rate:
                        s = -rate
                if c[j] >= c_max and s > 0.0:
                    s = 0.0
                if c[j] <= c_min and s < 0.0:
                    s = 0.0
                cdot[j] = s
            # trace row
            col = 0
            rows[k, col] = t
            col += 1
            for j in range(ns):
                rows[k, col + j] = Q[j]
                rows[k, col + ns + j] = c[j]
            col += 2 * ns
            for i in range(N):
                for j in range(ns):
                    rows[k, col] = v[i, j]
                    col += 1
            for j in range(ns):
                rows[k, col + j] = u[j]
            col += ns
            for i in range(N):
                for j in range(ns):
                    rows[k, col] = beta[i, j]
                    col += 1
            for i in range(N):
                for e in range(ne):
                    rows[k, col] = alpha[i, e]
                    col += 1
            for l in range(nz, dim):
                rows[k, col] = eta[l]
                col += 1
            err_g = 0.0
            for j in range(ns):
                if fabs(u[j] - zeta[j]) > err_g:
                    err_g = fabs(u[j] - zeta[j])
            err_b = 0.0
            for i in range(N):
                for j in range(ns):
                    resid = 0.0
                    for e in range(ne):
                        resid += A[j, e] * alpha[i, e]
                    for l in range(ns):
                        resid -= B[j, l] * beta[i, l]
                    if fabs(resid) > err_b:
                        err_b = fabs(resid)
            rows[k, col] = err_g
            rows[k, col + 1] = err_b
            col += 2
            for i in range(N):
                cost = 0.0
                for e in range(ne):
                    cost += c_lin[i] * alpha[i, e] + c_quad[i] * alpha[i, e] * alpha[i, e]
                for j in range(ns):
                    cost += -p_lin[i] * beta[i, j] + p_quad[i] * beta[i, j] * beta[i, j]
                rows[k, col] = cost
                col += 1
            if k % every == 0:
                for l in range(dim):
                    snaps[k // every, l] = eta[l]
            if k == n_steps:
                break

            # game map F and the diagonal of J_M
            for l in range(dim):
                for col in range(dim):
                    M[l, col] = off_f[l, col]
            for l in range(dim):
                s = 0.0
                for col in range(dim):
                    s += off[l, col] * eta[col]
                F[l] = s
            for l in range(nz):
                zj = eta[l]
                gap = zup[l] - zj
                F[l] += f_lin[l] + 2.0 * f_quad[l] * zj
                M[l, l] += 2.0 * f_quad[l]
                if tau > 0.0:
                    if zj <= 0.0 or gap <= 0.0:
                        status = BOUNDARY
                        break
                    F[l] += tau / gap - tau / zj
                    M[l, l] += tau / (zj * zj) + tau / (gap * gap)
            if status != OK:
                break
            for l in range(nz, dim):
                mult = eta[l]
                F[l] += eps * mult
                M[l, l] += eps
                if tau > 0.0:
                    if mult <= 0.0:
                        status = BOUNDARY
                        break
                    F[l] -= tau / mult
                    M[l, l] += tau / (mult * mult)
            if status != OK:
                break
            for j in range(ns):
                F[nz + j] += zeta[j]
                F[nz + ns + j] -= zeta[j]
            # prediction v = J_M^{-1} J_N (dU/dxi) xi_dot
            for j in range(ns):
                svec[j] = dudq[j] * qdot[j] + cdot[j]
            for l in range(dim):
                s = 0.0
                for j in range(ns):
                    s += JN[l, j] * svec[j]
                rhs[l] = s
            dgesv(&dim, &nrhs, &M[0, 0], &dim, &ipiv[0], &rhs[0], &dim, &info)
            if info != 0:
                status = SINGULAR
                break
            for l in range(dim):
                target = eta[l] - gamma * F[l] + rhs[l]
                if target < klo[l]:
                    target = klo[l]
                elif target > khi[l]:
                    target = khi[l]
                eta[l] = eta[l] + dt * (target - eta[l])
            # plant Euler step
            for i in range(N):
                for j in range(ns):
                    if v[i, j] > 0.0:
                        s = 0.0
                        for e in range(ne):
                            s += A[j, e] * alpha[i, e]
                        for l in range(ns):
                            s -= B[j, l] * beta[i, l]
                    else:
                        s = 0.0
                        for l in range(ns):
                            s += R[l, j] * beta[i, l]
                        for e in range(ne):
                            s += Apos[j, e] * alpha[i, e]
                    vnew[j] = v[i, j] + dt * s
                    if vnew[j] < 0.0:
                        vnew[j] = 0.0
                for j in range(ns):
                    v[i, j] = vnew[j]
            for j in range(ns):
                Q[j] = Q[j] + dt * qdot[j]
                if Q[j] < 0.0:
                    Q[j] = 0.0
                c[j] = c[j] + dt * cdot[j]
                if c[j] < c_min:
                    c[j] = c_min
                elif c[j] > c_max:
                    c[j] = c_max

    if status == BOUNDARY:
        from .errors import BoundaryState
        raise BoundaryState(f"coordinator state left the barrier domain at step {k}")
    if status == INFEASIBLE:
        from .errors import Infeasible
        raise Infeasible(f"balanced transfer set appears empty at step {k}")
    if status == SINGULAR:
        from .errors import SingularJM
        raise SingularJM(f"singular Jacobian at step {k}")
    return rows_np, snaps_np
