# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled grid-stepping kernels; the hot inner loop of every grid run.

Mirrors ``_kernels_py`` function for function.  Kept free of Python-object
work inside the loops: one fused pass per kernel.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

BACKEND_NAME = "compiled"


def cn_diffuse(cnp.ndarray[cnp.float64_t, ndim=1] u, double alpha):
    """One Crank-Nicolson diffusion step (zero-flux ends), Thomas solve."""
    cdef Py_ssize_t n = u.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cp = np.empty(n, dtype=np.float64)
    cdef double[::1] uu = u
    cdef double[::1] res = out
    cdef double[::1] cprime = cp
    cdef double h = 0.5 * alpha
    cdef double diag_in = 1.0 + alpha
    cdef double diag_edge = 1.0 + h
    cdef double off = -h
    cdef double denom
    cdef Py_ssize_t i

    # right-hand side (I + h K) u, stored in res
    res[0] = uu[0] + h * (uu[1] - uu[0])
    for i in range(1, n - 1):
        res[i] = uu[i] + h * (uu[i - 1] - 2.0 * uu[i] + uu[i + 1])
    res[n - 1] = uu[n - 1] + h * (uu[n - 2] - uu[n - 1])

    # forward sweep of the Thomas algorithm on (I - h K)
    cprime[0] = off / diag_edge
    res[0] = res[0] / diag_edge
    for i in range(1, n - 1):
        denom = diag_in - off * cprime[i - 1]
        cprime[i] = off / denom
        res[i] = (res[i] - off * res[i - 1]) / denom
    denom = diag_edge - off * cprime[n - 2]
    res[n - 1] = (res[n - 1] - off * res[n - 2]) / denom

    # back substitution
    for i in range(n - 2, -1, -1):
        res[i] = res[i] - cprime[i] * res[i + 1]
    return out


def decay_inplace(cnp.ndarray[cnp.float64_t, ndim=1] u, double x0, double dx,
                  double bid, double ask, double lam0, double a, double dt):
    """Multiply by exp(-(lam(ask - x) + lam(x - bid) - 2) dt) in place."""
    cdef Py_ssize_t n = u.shape[0]
    cdef double[::1] uu = u
    cdef double x, pot
    cdef Py_ssize_t i
    for i in range(n):
        x = x0 + dx * i
        pot = lam0 * (exp(-a * (ask - x)) + exp(-a * (x - bid))) - 2.0
        uu[i] *= exp(-pot * dt)


def trade_inplace(cnp.ndarray[cnp.float64_t, ndim=1] u, double x0, double dx,
                  double price, double lam0, double a, bint ask_side):
    """Multiply by the trade likelihood lam(price - x) or lam(x - price).

    The exponent is capped at 700 so that zeroed-out far tails are never
    multiplied by inf (0 * inf would poison the grid with NaNs).
    """
    cdef Py_ssize_t n = u.shape[0]
    cdef double[::1] uu = u
    cdef double x, d, e
    cdef Py_ssize_t i
    for i in range(n):
        x = x0 + dx * i
        d = (price - x) if ask_side else (x - price)
        e = -a * d
        if e > 700.0:
            e = 700.0
        uu[i] *= lam0 * exp(e)


def filter_step(cnp.ndarray[cnp.float64_t, ndim=1] u, double alpha,
                cnp.ndarray[cnp.float64_t, ndim=1] exp_ax,
                cnp.ndarray[cnp.float64_t, ndim=1] inv_exp_ax,
                double coef_ask, double coef_bid, double dt,
                double x0, double dx):
    """One continuous filter step in place; returns trapezoid (mass, mean).

    CN diffusion (when alpha > 0) with negative-undershoot clip, then the
    exact decay ``exp(-(lam_ask(x) + lam_bid(x) - 2) dt)`` written as
    ``exp(2 dt - dt (coef_ask e^{a(x-c)} + coef_bid e^{-a(x-c)}))`` over
    cached exponential tables, so each node costs a single exp().
    """
    cdef Py_ssize_t n = u.shape[0]
    cdef double[::1] uu = u
    cdef double[::1] eax = exp_ax
    cdef double[::1] iax = inv_exp_ax
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work
    cdef double[::1] rhs
    cdef double[::1] cprime
    cdef double h, diag_in, diag_edge, off, denom
    cdef Py_ssize_t i
    if alpha > 0.0:
        work = np.empty(2 * n, dtype=np.float64)
        rhs = work[:n]
        cprime = work[n:]
        h = 0.5 * alpha
        diag_in = 1.0 + alpha
        diag_edge = 1.0 + h
        off = -h
        rhs[0] = uu[0] + h * (uu[1] - uu[0])
        for i in range(1, n - 1):
            rhs[i] = uu[i] + h * (uu[i - 1] - 2.0 * uu[i] + uu[i + 1])
        rhs[n - 1] = uu[n - 1] + h * (uu[n - 2] - uu[n - 1])
        cprime[0] = off / diag_edge
        rhs[0] = rhs[0] / diag_edge
        for i in range(1, n - 1):
            denom = diag_in - off * cprime[i - 1]
            cprime[i] = off / denom
            rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom
        denom = diag_edge - off * cprime[n - 2]
        rhs[n - 1] = (rhs[n - 1] - off * rhs[n - 2]) / denom
        for i in range(n - 2, -1, -1):
            rhs[i] = rhs[i] - cprime[i] * rhs[i + 1]
        for i in range(n):
            uu[i] = rhs[i] if rhs[i] > 0.0 else 0.0

    cdef double c = x0 + 0.5 * dx * (n - 1)
    cdef double two_dt = 2.0 * dt
    cdef double s0 = 0.0, s1 = 0.0
    cdef double arg, w
    for i in range(n):
        arg = two_dt - dt * (coef_ask * eax[i] + coef_bid * iax[i])
        uu[i] *= exp(arg)
        w = uu[i] if 0 < i < n - 1 else 0.5 * uu[i]
        s0 += w
        s1 += w * (x0 + dx * i - c)
    cdef double mass = s0 * dx
    if mass == 0.0:
        return 0.0, c
    return mass, c + s1 * dx / mass


def moments(cnp.ndarray[cnp.float64_t, ndim=1] u, double x0, double dx):
    """Trapezoid (mass, mean, variance), accumulated around the grid center."""
    cdef Py_ssize_t n = u.shape[0]
    cdef double[::1] uu = u
    cdef double c = x0 + 0.5 * dx * (n - 1)
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0
    cdef double w, xc
    cdef Py_ssize_t i
    for i in range(n):
        w = uu[i] if 0 < i < n - 1 else 0.5 * uu[i]
        xc = x0 + dx * i - c
        s0 += w
        s1 += w * xc
        s2 += w * xc * xc
    cdef double mass = s0 * dx
    if mass == 0.0:
        return 0.0, c, 0.0
    cdef double m1 = s1 * dx / mass
    cdef double m2 = s2 * dx / mass
    return mass, c + m1, m2 - m1 * m1
