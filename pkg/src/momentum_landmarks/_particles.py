"""Compiled RK4 integrator for the conic kernel ``exp(-r/a) / (2 pi a^2)``."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _conic_rhs(q, p, a, cutoff, dq, dp):
    n = q.shape[0]
    c0 = 1.0 / (2.0 * math.pi * a * a)
    for i in range(n):
        dq[i, 0] = c0 * p[i, 0]
        dq[i, 1] = c0 * p[i, 1]
        dp[i, 0] = 0.0
        dp[i, 1] = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dx = q[i, 0] - q[j, 0]
            dy = q[i, 1] - q[j, 1]
            r = math.sqrt(dx * dx + dy * dy)
            g = c0 * math.exp(-r / a)
            dq[i, 0] += g * p[j, 0]
            dq[i, 1] += g * p[j, 1]
            dq[j, 0] += g * p[i, 0]
            dq[j, 1] += g * p[i, 1]
            if r > cutoff:
                # -(p_i.p_j) G'(r) / r with G' = -g / a
                f = (p[i, 0] * p[j, 0] + p[i, 1] * p[j, 1]) * g / (a * r)
                dp[i, 0] += f * dx
                dp[i, 1] += f * dy
                dp[j, 0] -= f * dx
                dp[j, 1] -= f * dy


@njit(cache=True)
def _conic_hamiltonian(q, p, a):
    n = q.shape[0]
    c0 = 1.0 / (2.0 * math.pi * a * a)
    h = 0.0
    for i in range(n):
        h += 0.5 * c0 * (p[i, 0] * p[i, 0] + p[i, 1] * p[i, 1])
        for j in range(i + 1, n):
            dx = q[i, 0] - q[j, 0]
            dy = q[i, 1] - q[j, 1]
            r = math.sqrt(dx * dx + dy * dy)
            h += c0 * math.exp(-r / a) * (p[i, 0] * p[j, 0] + p[i, 1] * p[j, 1])
    return h


@njit(cache=True, nogil=True)
def conic_rk4(q0, p0, a, cutoff, steps):
    """Integrate on ``[0, 1]``; returns (qs, ps, failed_step) with failed_step=-1 on success."""
    n = q0.shape[0]
    dt = 1.0 / steps
    qs = np.empty((steps + 1, n, 2))
    ps = np.empty((steps + 1, n, 2))
    qs[0] = q0
    ps[0] = p0
    k1q = np.empty((n, 2))
    k1p = np.empty((n, 2))
    k2q = np.empty((n, 2))
    k2p = np.empty((n, 2))
    k3q = np.empty((n, 2))
    k3p = np.empty((n, 2))
    k4q = np.empty((n, 2))
    k4p = np.empty((n, 2))
    tq = np.empty((n, 2))
    tp = np.empty((n, 2))
    for s in range(steps):
        q = qs[s]
        p = ps[s]
        _conic_rhs(q, p, a, cutoff, k1q, k1p)
        for i in range(n):
            for d in range(2):
                tq[i, d] = q[i, d] + 0.5 * dt * k1q[i, d]
                tp[i, d] = p[i, d] + 0.5 * dt * k1p[i, d]
        _conic_rhs(tq, tp, a, cutoff, k2q, k2p)
        for i in range(n):
            for d in range(2):
                tq[i, d] = q[i, d] + 0.5 * dt * k2q[i, d]
                tp[i, d] = p[i, d] + 0.5 * dt * k2p[i, d]
        _conic_rhs(tq, tp, a, cutoff, k3q, k3p)
        for i in range(n):
            for d in range(2):
                tq[i, d] = q[i, d] + dt * k3q[i, d]
                tp[i, d] = p[i, d] + dt * k3p[i, d]
        _conic_rhs(tq, tp, a, cutoff, k4q, k4p)
        finite = True
        for i in range(n):
            for d in range(2):
                qs[s + 1, i, d] = q[i, d] + dt / 6.0 * (
                    k1q[i, d] + 2.0 * k2q[i, d] + 2.0 * k3q[i, d] + k4q[i, d]
                )
                ps[s + 1, i, d] = p[i, d] + dt / 6.0 * (
                    k1p[i, d] + 2.0 * k2p[i, d] + 2.0 * k3p[i, d] + k4p[i, d]
                )
                if not (math.isfinite(qs[s + 1, i, d]) and math.isfinite(ps[s + 1, i, d])):
                    finite = False
        if not finite:
            return qs, ps, s + 1
    return qs, ps, -1


@njit(cache=True)
def conic_hamiltonians(qs, ps, a):
    out = np.empty(qs.shape[0])
    for t in range(qs.shape[0]):
        out[t] = _conic_hamiltonian(qs[t], ps[t], a)
    return out
