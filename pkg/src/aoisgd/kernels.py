"""Backend selection for the hot kernels.

The compiled extension ``_ckernels`` is used when it imports; otherwise the
NumPy fallback ``_kernels_py`` is used. Setting ``AOISGD_PURE_PYTHON=1``
forces the fallback.
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("AOISGD_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"


def _pts(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def markov_walk(latent_cdf, channel_cdf, latent0, states0, u):
    return _impl.markov_walk(_pts(latent_cdf), _pts(channel_cdf), int(latent0),
                             np.asarray(states0, dtype=np.int64), _pts(u))


def error_prob_points(positions, points, xi):
    return _impl.error_prob_points(_pts(positions), _pts(points), float(xi))


def agent_objective_grad(positions, i, xi, points):
    return _impl.agent_objective_grad(_pts(positions), int(i), float(xi), _pts(points))


def agent_penalty_grad(positions, i, xi, targets, delta):
    return _impl.agent_penalty_grad(_pts(positions), int(i), float(xi), _pts(targets),
                                    float(delta))


def penalty_value(positions, xi, targets, delta):
    return float(_impl.penalty_value(_pts(positions), float(xi), _pts(targets), float(delta)))


def objective_penalty_eval(positions, points, weights, xis, xi_weights, targets, delta,
                           with_penalty=True):
    return _impl.objective_penalty_eval(_pts(positions), _pts(points), _pts(weights),
                                        [float(x) for x in xis],
                                        [float(w) for w in xi_weights],
                                        _pts(targets), float(delta), bool(with_penalty))
