"""NumPy implementation of the grid-stepping kernels.

This is the fallback backend used when the compiled extension is not
available; see ``_kernels.pyx`` for the compiled twin.  Both expose the
same four functions and must stay numerically interchangeable (tested to
tight tolerances, not bit-for-bit: the linear solves differ in operation
order).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

BACKEND_NAME = "python"


def cn_diffuse(u: np.ndarray, alpha: float) -> np.ndarray:
    """One Crank-Nicolson step of ``du/dt = D uxx`` with zero-flux ends.

    ``alpha = D * dt / dx**2``.  Returns a new array; conserves uniform
    grid mass exactly up to solver roundoff.
    """
    n = u.shape[0]
    h = 0.5 * alpha
    rhs = u.copy()
    rhs[1:-1] += h * (u[:-2] - 2.0 * u[1:-1] + u[2:])
    rhs[0] += h * (u[1] - u[0])
    rhs[-1] += h * (u[-2] - u[-1])
    ab = np.empty((3, n))
    ab[0, :] = -h
    ab[1, :] = 1.0 + alpha
    ab[1, 0] = ab[1, -1] = 1.0 + h
    ab[2, :] = -h
    return solve_banded((1, 1), ab, rhs, overwrite_ab=True, check_finite=False)


def decay_inplace(
    u: np.ndarray,
    x0: float,
    dx: float,
    bid: float,
    ask: float,
    lam0: float,
    a: float,
    dt: float,
) -> None:
    """Multiply by ``exp(-(lam(ask - x) + lam(x - bid) - 2) * dt)`` in place.

    Exact for any ``dt`` while the quotes are frozen, so it can cover a
    whole inter-event interval in one call when there is no diffusion.
    """
    x = x0 + dx * np.arange(u.shape[0])
    pot = lam0 * (np.exp(-a * (ask - x)) + np.exp(-a * (x - bid))) - 2.0
    u *= np.exp(-pot * dt)


def trade_inplace(
    u: np.ndarray,
    x0: float,
    dx: float,
    price: float,
    lam0: float,
    a: float,
    ask_side: bool,
) -> None:
    """Multiply by the trade likelihood ``lam(price - x)`` or ``lam(x - price)``.

    The exponent is capped at 700 so that zeroed-out far tails are never
    multiplied by inf (0 * inf would poison the grid with NaNs).
    """
    x = x0 + dx * np.arange(u.shape[0])
    d = (price - x) if ask_side else (x - price)
    u *= lam0 * np.exp(np.minimum(-a * d, 700.0))


def filter_step(
    u: np.ndarray,
    alpha: float,
    exp_ax: np.ndarray,
    inv_exp_ax: np.ndarray,
    coef_ask: float,
    coef_bid: float,
    dt: float,
    x0: float,
    dx: float,
) -> tuple[float, float]:
    """One continuous filter step in place; returns trapezoid (mass, mean).

    Mirrors the compiled twin: CN diffusion when ``alpha > 0`` (with the
    undershoot clip), then the exact decay written over the cached
    exponential tables ``exp(+-a (x - c))``.
    """
    if alpha > 0.0:
        u[:] = cn_diffuse(u, alpha)
        np.maximum(u, 0.0, out=u)
    arg = 2.0 * dt - dt * (coef_ask * exp_ax + coef_bid * inv_exp_ax)
    u *= np.exp(arg)
    mass, mean, _ = moments(u, x0, dx)
    return mass, mean


def moments(u: np.ndarray, x0: float, dx: float) -> tuple[float, float, float]:
    """Trapezoid mass, mean and variance of a grid density.

    Moments are accumulated around the grid center so that prices of
    order 100 do not wash out variances of order 1e-3.
    """
    n = u.shape[0]
    c = x0 + 0.5 * dx * (n - 1)
    xc = x0 + dx * np.arange(n) - c
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    wu = w * u
    mass = float(np.sum(wu) * dx)
    if mass == 0.0:
        return 0.0, c, 0.0
    m1 = float(np.sum(wu * xc) * dx) / mass
    m2 = float(np.sum(wu * xc * xc) * dx) / mass
    return mass, c + m1, m2 - m1 * m1
