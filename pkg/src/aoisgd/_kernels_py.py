"""Pure-NumPy implementations of the hot kernels.

Signatures and results match ``_ckernels`` up to floating-point summation
order in the coverage kernels; ``markov_walk`` agrees exactly because it
only compares uniforms against precomputed CDFs.
"""

import numpy as np


def markov_walk(latent_cdf, channel_cdf, latent0, states0, u):
    T = u.shape[0]
    C = u.shape[1] - 1
    latent = np.empty(T, dtype=np.int64)
    states = np.empty((T, C), dtype=np.int64)
    l = int(latent0)
    s = np.array(states0, dtype=np.int64)
    for t in range(T):
        l = int(np.searchsorted(latent_cdf[l], u[t, 0], side="right"))
        rows = channel_cdf[l][s]  # (C, S)
        s = (rows > u[t, 1:, None]).argmax(axis=1)
        latent[t] = l
        states[t] = s
    return latent, states


def _detect(positions, points, xi):
    # (K, D) detection probabilities and displacements x_i - y
    diff = positions[None, :, :] - points[:, None, :]
    d2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    return np.exp(-xi * d2), diff


def error_prob_points(positions, points, xi):
    p, _ = _detect(positions, points, xi)
    return np.prod(1.0 - p, axis=1)


def _others_product(p, i):
    return np.prod(np.delete(1.0 - p, i, axis=1), axis=1)


def agent_objective_grad(positions, i, xi, points):
    """Mean over ``points`` of d p_e / d x_i."""
    p, diff = _detect(positions, points, xi)
    w = 2.0 * xi * p[:, i] * _others_product(p, i)
    return (w[:, None] * diff[:, i, :]).mean(axis=0)


def agent_penalty_grad(positions, i, xi, targets, delta):
    p, diff = _detect(positions, targets, xi)
    pe = np.prod(1.0 - p, axis=1)
    viol = np.maximum(pe - delta, 0.0)
    w = 2.0 * viol * 2.0 * xi * p[:, i] * _others_product(p, i)
    return (w[:, None] * diff[:, i, :]).sum(axis=0)


def penalty_value(positions, xi, targets, delta):
    pe = error_prob_points(positions, targets, xi)
    return float(np.sum(np.maximum(pe - delta, 0.0) ** 2))


def objective_penalty_eval(positions, points, weights, xis, xi_weights, targets, delta,
                           with_penalty):
    """Quadrature estimates of E_xi[mean p_e] and E_xi[P] plus per-target
    E_xi[p_e]."""
    obj = 0.0
    pen = 0.0
    tpe = np.zeros(len(targets))
    for xi, wx in zip(xis, xi_weights):
        pe = error_prob_points(positions, points, xi)
        obj += wx * float(pe @ weights)
        te = error_prob_points(positions, targets, xi)
        tpe += wx * te
        if with_penalty:
            pen += wx * float(np.sum(np.maximum(te - delta, 0.0) ** 2))
    return obj, pen, tpe
