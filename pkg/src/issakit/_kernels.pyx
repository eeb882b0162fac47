# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch kernels. Operation order mirrors the scalar models so results agree bitwise."""
import numpy as np
from libc.math cimport cos, sin, hypot, pow, fmod, M_PI

cdef double TWO_PI = 2.0 * M_PI


cdef inline double _pymod(double x, double m) nogil:
    cdef double r = fmod(x, m)
    if r != 0.0 and ((r < 0.0) != (m < 0.0)):
        r += m
    return r


cdef inline double _wrap(double theta) nogil:
    if -M_PI <= theta < M_PI:
        return theta
    return _pymod(theta + M_PI, TWO_PI) - M_PI


cdef inline double _clip(double x, double lo, double hi) nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def step_toy(const double[:, ::1] states, const double[:, ::1] controls, double dt):
    cdef Py_ssize_t i, n = states.shape[0]
    out = np.empty((n, 4))
    cdef double[:, ::1] o = out
    cdef double th, vc, wc
    with nogil:
        for i in range(n):
            th = states[i, 2]
            vc = controls[i, 0]
            wc = controls[i, 1]
            o[i, 0] = states[i, 0] + cos(th) * vc * dt
            o[i, 1] = states[i, 1] + sin(th) * vc * dt
            o[i, 2] = _wrap(th + wc * dt)
            o[i, 3] = 0.0
    return out


def step_second_order(const double[:, ::1] states, const double[:, ::1] controls, double dt,
                      double v_max, double a_min, double a_max, double w_min, double w_max):
    cdef Py_ssize_t i, n = states.shape[0]
    out = np.empty((n, 4))
    cdef double[:, ::1] o = out
    cdef double th, v, a, w
    with nogil:
        for i in range(n):
            th = states[i, 2]
            v = states[i, 3]
            a = _clip(controls[i, 0], a_min, a_max)
            w = _clip(controls[i, 1], w_min, w_max)
            o[i, 0] = states[i, 0] + cos(th) * v * dt
            o[i, 1] = states[i, 1] + sin(th) * v * dt
            o[i, 2] = _wrap(th + w * dt)
            o[i, 3] = _clip(v + a * dt, 0.0, v_max)
    return out


def phi_index(const double[:, ::1] states, const double[:, ::1] obstacles,
              double sigma, double n_exp, double k, double d_min):
    cdef Py_ssize_t i, j, n = states.shape[0], m = obstacles.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double c, s, rx, ry, d, vx, vy, d_dot, val, best
    cdef double base = sigma + pow(d_min, n_exp)
    with nogil:
        for i in range(n):
            best = -1e18
            c = cos(states[i, 2])
            s = sin(states[i, 2])
            for j in range(m):
                rx = obstacles[j, 0] - states[i, 0]
                ry = obstacles[j, 1] - states[i, 1]
                d = hypot(rx, ry)
                vx = states[i, 3] * c - obstacles[j, 2]
                vy = states[i, 3] * s - obstacles[j, 3]
                d_dot = -(rx * vx + ry * vy) / d
                val = base - pow(d, n_exp) - k * d_dot
                if j == 0 or val > best:
                    best = val
            o[i] = best
    return out


def phi_toy(const double[:, ::1] states, double ox, double oy, double rr):
    cdef Py_ssize_t i, n = states.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double p
    with nogil:
        for i in range(n):
            p = (ox - states[i, 0]) * sin(states[i, 2]) - (oy - states[i, 1]) * cos(states[i, 2])
            o[i] = rr * rr - p * p
    return out
