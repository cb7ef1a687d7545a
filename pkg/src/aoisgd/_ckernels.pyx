# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def markov_walk(double[:, ::1] latent_cdf, double[:, :, ::1] channel_cdf,
                long latent0, states0, double[:, ::1] u):
    cdef Py_ssize_t T = u.shape[0]
    cdef Py_ssize_t C = u.shape[1] - 1
    cdef Py_ssize_t L = latent_cdf.shape[0]
    cdef Py_ssize_t S = channel_cdf.shape[1]
    latent_arr = np.empty(T, dtype=np.int64)
    states_arr = np.empty((T, C), dtype=np.int64)
    cdef cnp.int64_t[::1] latent = latent_arr
    cdef cnp.int64_t[:, ::1] states = states_arr
    cur_arr = np.array(states0, dtype=np.int64)
    cdef cnp.int64_t[::1] cur = cur_arr
    cdef long l = latent0
    cdef Py_ssize_t t, c, k
    cdef double x
    for t in range(T):
        x = u[t, 0]
        k = 0
        while k < L - 1 and not (x < latent_cdf[l, k]):
            k += 1
        l = k
        latent[t] = l
        for c in range(C):
            x = u[t, c + 1]
            k = 0
            while k < S - 1 and not (x < channel_cdf[l, cur[c], k]):
                k += 1
            cur[c] = k
            states[t, c] = k
    return latent_arr, states_arr


def error_prob_points(double[:, ::1] positions, double[:, ::1] points, double xi):
    cdef Py_ssize_t D = positions.shape[0]
    cdef Py_ssize_t K = points.shape[0]
    out_arr = np.empty(K, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k, i
    cdef double dx, dy, pe
    for k in range(K):
        pe = 1.0
        for i in range(D):
            dx = positions[i, 0] - points[k, 0]
            dy = positions[i, 1] - points[k, 1]
            pe *= 1.0 - exp(-xi * (dx * dx + dy * dy))
        out[k] = pe
    return out_arr


cdef inline void _agent_terms(double[:, ::1] positions, Py_ssize_t i, double xi,
                              double px, double py, double* pi_out,
                              double* others_out, double* pe_out) noexcept nogil:
    cdef Py_ssize_t D = positions.shape[0]
    cdef Py_ssize_t j
    cdef double dx, dy, p, others = 1.0, pii = 0.0
    for j in range(D):
        dx = positions[j, 0] - px
        dy = positions[j, 1] - py
        p = exp(-xi * (dx * dx + dy * dy))
        if j == i:
            pii = p
        else:
            others *= 1.0 - p
    pi_out[0] = pii
    others_out[0] = others
    pe_out[0] = others * (1.0 - pii)


def agent_objective_grad(double[:, ::1] positions, Py_ssize_t i, double xi,
                         double[:, ::1] points):
    cdef Py_ssize_t K = points.shape[0]
    cdef Py_ssize_t k
    cdef double pii, others, pe, w, gx = 0.0, gy = 0.0
    for k in range(K):
        _agent_terms(positions, i, xi, points[k, 0], points[k, 1], &pii, &others, &pe)
        w = 2.0 * xi * pii * others
        gx += w * (positions[i, 0] - points[k, 0])
        gy += w * (positions[i, 1] - points[k, 1])
    return np.array([gx / K, gy / K])


def agent_penalty_grad(double[:, ::1] positions, Py_ssize_t i, double xi,
                       double[:, ::1] targets, double delta):
    cdef Py_ssize_t T = targets.shape[0]
    cdef Py_ssize_t k
    cdef double pii, others, pe, viol, w, gx = 0.0, gy = 0.0
    for k in range(T):
        _agent_terms(positions, i, xi, targets[k, 0], targets[k, 1], &pii, &others, &pe)
        viol = pe - delta
        if viol <= 0.0:
            continue
        w = 4.0 * viol * xi * pii * others
        gx += w * (positions[i, 0] - targets[k, 0])
        gy += w * (positions[i, 1] - targets[k, 1])
    return np.array([gx, gy])


def penalty_value(double[:, ::1] positions, double xi, double[:, ::1] targets,
                  double delta):
    pe = error_prob_points(positions, targets, xi)
    cdef double[::1] v = pe
    cdef double acc = 0.0, d
    cdef Py_ssize_t k
    for k in range(v.shape[0]):
        d = v[k] - delta
        if d > 0.0:
            acc += d * d
    return acc


def objective_penalty_eval(double[:, ::1] positions, double[:, ::1] points,
                           double[::1] weights, xis, xi_weights,
                           double[:, ::1] targets, double delta, bint with_penalty):
    cdef Py_ssize_t K = points.shape[0]
    cdef Py_ssize_t T = targets.shape[0]
    cdef Py_ssize_t k
    cdef double obj = 0.0, pen = 0.0, acc, d, xi, wx
    tpe_arr = np.zeros(T, dtype=np.float64)
    cdef double[::1] tpe = tpe_arr
    cdef double[::1] pe
    cdef double[::1] te
    for xi, wx in zip(xis, xi_weights):
        pe = error_prob_points(positions, points, xi)
        acc = 0.0
        for k in range(K):
            acc += pe[k] * weights[k]
        obj += wx * acc
        te = error_prob_points(positions, targets, xi)
        acc = 0.0
        for k in range(T):
            tpe[k] += wx * te[k]
            d = te[k] - delta
            if d > 0.0:
                acc += d * d
        if with_penalty:
            pen += wx * acc
    return obj, pen, tpe_arr
