"""Batch kernels for grid scans and offline estimators.

The compiled extension is preferred; the numpy implementation is used when it
is missing or when ``ISSAKIT_PURE_PYTHON=1`` is set before import.
"""
import os

import numpy as np

from issakit import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("ISSAKIT_PURE_PYTHON", "").lower() not in ("1", "true", "yes"):
    try:
        from issakit import _kernels as _impl  # noqa: F811

        BACKEND = "compiled"
    except ImportError:  # extension not built
        pass


def _c(a, cols):
    return np.ascontiguousarray(np.asarray(a, dtype=float).reshape(-1, cols))


def step_toy(states, controls, dt):
    return _impl.step_toy(_c(states, 4), _c(controls, 2), float(dt))


def step_second_order(states, controls, dt, v_max, a_min, a_max, w_min, w_max):
    return _impl.step_second_order(
        _c(states, 4), _c(controls, 2), float(dt),
        float(v_max), float(a_min), float(a_max), float(w_min), float(w_max),
    )


def phi_index(states, obstacles, sigma, n, k, d_min):
    """Per-row ``max_i (sigma + d_min^n - d_i^n - k d_dot_i)``; ``-1e18`` with no obstacles."""
    return _impl.phi_index(_c(states, 4), _c(obstacles, 4), float(sigma), float(n), float(k), float(d_min))


def phi_toy(states, ox, oy, rr):
    return _impl.phi_toy(_c(states, 4), float(ox), float(oy), float(rr))


__all__ = ["BACKEND", "step_toy", "step_second_order", "phi_index", "phi_toy"]
