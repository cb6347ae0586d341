# cython: boundscheck=False, wraparound=False, cdivision=True
"""Loop-fused C implementations of the per-iteration hot kernels.

Mirrors ``_kernels_py``; see there for the documented semantics.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt

cnp.import_array()

COMPILED = True


def rt0_vertex_values(double[::1] coeffs,
                      cnp.int64_t[:, ::1] tri_edges,
                      double[:, :, :, ::1] psi):
    cdef Py_ssize_t nt = tri_edges.shape[0]
    cdef Py_ssize_t t, l, j, k
    cdef double c
    out = np.zeros((nt, 3, 2))
    cdef double[:, :, ::1] vals = out
    for t in range(nt):
        for l in range(3):
            c = coeffs[tri_edges[t, l]]
            for j in range(3):
                for k in range(2):
                    vals[t, j, k] += c * psi[t, l, j, k]
    return out


def qb_local_system(double[::1] coeffs,
                    cnp.int64_t[:, ::1] tri_edges,
                    double[:, :, :, ::1] psi,
                    double[::1] areas,
                    double[:, ::1] dvec,
                    double[::1] mcell,
                    double[::1] g,
                    double tau,
                    double delta,
                    double r):
    cdef Py_ssize_t nt = tri_edges.shape[0]
    cdef Py_ssize_t t, l, m, j, k
    cdef double half_rm2 = 0.5 * (r - 2.0)
    cdef double d2 = delta * delta
    cdef double vx, vy, q2, qn, wd, mag, acc, third, dscale
    cdef double vals[3][2]
    cdef double w[3]
    cdef double cv[3][2]
    mat_out = np.empty((nt, 3, 3))
    rhs_out = np.empty((nt, 3))
    cdef double[:, :, ::1] mat = mat_out
    cdef double[:, ::1] rhs = rhs_out
    for t in range(nt):
        for j in range(3):
            vx = 0.0
            vy = 0.0
            for l in range(3):
                vx += coeffs[tri_edges[t, l]] * psi[t, l, j, 0]
                vy += coeffs[tri_edges[t, l]] * psi[t, l, j, 1]
            vals[j][0] = vx
            vals[j][1] = vy
            q2 = vx * vx + vy * vy
            wd = exp(half_rm2 * log(q2 + d2))
            w[j] = mcell[t] * wd
            if q2 > 0.0:
                qn = sqrt(q2)
                mag = exp((r - 1.0) * log(qn))
                cv[j][0] = mcell[t] * (wd * vx - mag * vx / qn)
                cv[j][1] = mcell[t] * (wd * vy - mag * vy / qn)
            else:
                cv[j][0] = 0.0
                cv[j][1] = 0.0
        third = areas[t] / 3.0
        dscale = tau / areas[t]
        for l in range(3):
            for m in range(3):
                acc = 0.0
                for j in range(3):
                    acc += w[j] * (psi[t, l, j, 0] * psi[t, m, j, 0]
                                   + psi[t, l, j, 1] * psi[t, m, j, 1])
                mat[t, l, m] = third * acc + dscale * dvec[t, l] * dvec[t, m]
            acc = 0.0
            for j in range(3):
                acc += cv[j][0] * psi[t, l, j, 0] + cv[j][1] * psi[t, l, j, 1]
            rhs[t, l] = third * acc + g[t] * dvec[t, l]
    return mat_out, rhs_out


def alg2_cell_update(double[::1] w,
                     cnp.int64_t[:, ::1] triangles,
                     double[:, :, ::1] grad_geom,
                     double[:, ::1] q_prev,
                     double[::1] mh,
                     double rho):
    cdef Py_ssize_t nt = triangles.shape[0]
    cdef Py_ssize_t t, j
    cdef double gx, gy, hx, hy, nrm, s, px, py, wv
    grad_out = np.empty((nt, 2))
    phi_out = np.empty((nt, 2))
    q_out = np.empty((nt, 2))
    cdef double[:, ::1] grad = grad_out
    cdef double[:, ::1] phi = phi_out
    cdef double[:, ::1] q_new = q_out
    for t in range(nt):
        gx = 0.0
        gy = 0.0
        for j in range(3):
            wv = w[triangles[t, j]]
            gx += grad_geom[t, j, 0] * wv
            gy += grad_geom[t, j, 1] * wv
        grad[t, 0] = gx
        grad[t, 1] = gy
        hx = gx - q_prev[t, 0] / rho
        hy = gy - q_prev[t, 1] / rho
        nrm = sqrt(hx * hx + hy * hy)
        if nrm > mh[t]:
            s = mh[t] / nrm
            px = hx * s
            py = hy * s
        else:
            px = hx
            py = hy
        phi[t, 0] = px
        phi[t, 1] = py
        q_new[t, 0] = q_prev[t, 0] - rho * (gx - px)
        q_new[t, 1] = q_prev[t, 1] - rho * (gy - py)
    return grad_out, phi_out, q_out
