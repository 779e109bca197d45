"""Safeguarded scalar Newton iteration used by the quote-feedback solvers."""

from __future__ import annotations

from typing import Callable

from .errors import NoConvergence


def bracket_by_doubling(
    f: Callable[[float], float],
    x0: float,
    step: float,
    max_doublings: int = 200,
) -> tuple[float, float, float, float]:
    """Expand an interval around ``x0`` by doubling until ``f`` changes sign.

    Returns ``(lo, hi, f_lo, f_hi)`` with ``f_lo`` and ``f_hi`` of opposite
    sign (one may be zero).  ``f`` must be monotone for the bracket to be
    meaningful.
    """
    f0 = f(x0)
    if f0 == 0.0:
        return x0, x0, 0.0, 0.0
    h = abs(step) if step != 0.0 else 1.0
    lo = hi = x0
    f_lo = f_hi = f0
    for _ in range(max_doublings):
        lo, hi = x0 - h, x0 + h
        f_lo, f_hi = f(lo), f(hi)
        if f_lo == 0.0 or f_hi == 0.0 or (f_lo > 0.0) != (f_hi > 0.0):
            return lo, hi, f_lo, f_hi
        h *= 2.0
    raise NoConvergence(
        f"no sign change within {max_doublings} doublings around {x0} (h={h})"
    )


def newton_in_bracket(
    f: Callable[[float], float],
    fprime: Callable[[float], float],
    lo: float,
    hi: float,
    f_lo: float,
    f_hi: float,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> float:
    """Newton iteration confined to a sign-change bracket.

    Steps that leave the bracket (or stall) fall back to bisection, so the
    iteration cannot escape even when the function has steep ``sinh``-type
    growth.  Converges on the step size: ``|dx| <= tol * max(1, |x|)``.

    Raises:
        NoConvergence: After ``max_iter`` iterations.
    """
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0.0) == (f_hi > 0.0):
        raise ValueError("bracket does not enclose a sign change")
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = f(x)
        if fx == 0.0:
            return x
        if (fx > 0.0) == (f_lo > 0.0):
            lo, f_lo = x, fx
        else:
            hi, f_hi = x, fx
        d = fprime(x)
        if d != 0.0:
            step = fx / d
            x_new = x - step
        else:
            x_new = lo  # force the bisection branch below
        if not (lo < x_new < hi) and not (hi < x_new < lo):
            x_new = 0.5 * (lo + hi)
            step = x - x_new
        if abs(step) <= tol * max(1.0, abs(x_new)):
            return x_new
        x = x_new
    raise NoConvergence(f"newton did not converge in {max_iter} iterations")


def solve_monotone(
    f: Callable[[float], float],
    fprime: Callable[[float], float],
    x0: float,
    step: float,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> float:
    """Root of a monotone scalar function: bracket by doubling, then Newton."""
    lo, hi, f_lo, f_hi = bracket_by_doubling(f, x0, step, max_doublings=max_iter)
    if lo == hi:
        return lo
    return newton_in_bracket(f, fprime, lo, hi, f_lo, f_hi, tol=tol, max_iter=max_iter)
