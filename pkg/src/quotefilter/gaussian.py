"""Small-spread approximate filter: exact Gaussian state dynamics.

Replacing the cosh decay potential by its quadratic Taylor truncation
keeps a Gaussian prior Gaussian.  The posterior variance then follows the
Riccati equation

    d(sigma_t^2)/dt = sigma^2 - (a^2 / t1) * (sigma_t^2)^2,

whose fixed point ``sigma_inf^2 = sigma sqrt(t1) / a`` is the observer's
asymptotic confidence, and the posterior mean relaxes toward the mid-price
between trades and jumps by ``a sigma_t^2`` at each trade (up for buys,
down for sells).  A meta-order only perturbs the mean: the variance
dynamics are unchanged.

``variance_at`` defaults to the exact Riccati solution

    sigma_t^2 = sigma_inf^2 (1 + C e^{-2kt}) / (1 - C e^{-2kt}),
    C = (sigma_0^2 - sigma_inf^2) / (sigma_0^2 + sigma_inf^2),
    k = a sigma / sqrt(t1),

which matches direct ODE integration to full precision.  A commonly
quoted near-equilibrium form ``sigma_inf^2 sqrt(1 +/- e^{-kt/4 + C0})``
is kept behind ``paper_form=True`` for comparison; it is *not* a solution
of the variance equation away from the fixed point (its decay rate is off
fourfold) and is excluded from the exact-agreement checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .model import ExpIntensity, GaussianPrior, TradeEvent, characteristic_time


@dataclass(frozen=True)
class GaussianState:
    """Gaussian posterior summary: mean, variance and current time."""

    mean: float
    variance: float
    t: float = 0.0

    def __post_init__(self) -> None:
        if not (self.variance > 0):
            raise ValueError(f"variance must be > 0, got {self.variance}")


def stationary_variance(
    intensity: ExpIntensity, half_spread: float, sigma: float
) -> float:
    """Asymptotic posterior variance ``sigma sqrt(t1) / a`` (0 when sigma=0)."""
    t1 = characteristic_time(intensity, half_spread)
    return sigma * math.sqrt(t1) / intensity.a


def variance_ode_rhs(
    y: float, intensity: ExpIntensity, half_spread: float, sigma: float
) -> float:
    """Right-hand side of the variance equation, for independent integration."""
    t1 = characteristic_time(intensity, half_spread)
    return sigma * sigma - (intensity.a ** 2 / t1) * y * y


def _advance_variance(
    y: float, intensity: ExpIntensity, half_spread: float, sigma: float, dt: float
) -> float:
    """Exact variance transition over ``dt`` starting from variance ``y``."""
    t1 = characteristic_time(intensity, half_spread)
    a = intensity.a
    if sigma == 0.0:
        return 1.0 / (1.0 / y + a * a * dt / t1)
    sinf2 = sigma * math.sqrt(t1) / a
    c = (y - sinf2) / (y + sinf2)
    k = a * sigma / math.sqrt(t1)
    e = c * math.exp(-2.0 * k * dt)
    return sinf2 * (1.0 + e) / (1.0 - e)


def variance_at(
    prior: GaussianPrior,
    intensity: ExpIntensity,
    half_spread: float,
    sigma: float,
    t: float,
    paper_form: bool = False,
) -> float:
    """Posterior variance at time ``t``.

    With ``sigma = 0``: ``1 / (1/sigma0^2 + a^2 t / t1)`` (both forms agree).
    With ``sigma > 0`` the default is the exact Riccati solution; see the
    module docstring for the ``paper_form`` alternative.  At
    ``sigma0^2 = sigma_inf^2`` both forms are the constant fixed point.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if sigma == 0.0 or not paper_form:
        return _advance_variance(prior.variance, intensity, half_spread, sigma, t)
    t1 = characteristic_time(intensity, half_spread)
    a = intensity.a
    sinf2 = sigma * math.sqrt(t1) / a
    ratio = prior.variance ** 2 * a * a / (sigma * sigma * t1)  # (sigma0^2/sigma_inf^2)^2
    if ratio == 1.0:
        return sinf2
    r = a * sigma / (2.0 * math.sqrt(t1))
    if ratio > 1.0:
        return sinf2 * math.sqrt(1.0 + math.exp(-r * t + math.log(ratio - 1.0)))
    return sinf2 * math.sqrt(1.0 - math.exp(-r * t + math.log(1.0 - ratio)))


def _log_learning_factor(
    y0: float, intensity: ExpIntensity, half_spread: float, sigma: float, dt: float
) -> float:
    """``(a^2 / t1) * integral_0^dt sigma_s^2 ds`` starting from variance ``y0``.

    The mean relaxes toward the mid by exactly ``exp(-this)`` over the
    interval; closed form in both volatility branches.
    """
    t1 = characteristic_time(intensity, half_spread)
    a = intensity.a
    if sigma == 0.0:
        return math.log1p(y0 * a * a * dt / t1)
    sinf2 = sigma * math.sqrt(t1) / a
    c = (y0 - sinf2) / (y0 + sinf2)
    k = a * sigma / math.sqrt(t1)
    return k * dt + math.log((1.0 - c * math.exp(-2.0 * k * dt)) / (1.0 - c))


def variance_integral(
    prior: GaussianPrior,
    intensity: ExpIntensity,
    half_spread: float,
    sigma: float,
    t: float,
) -> float:
    """``integral_0^t sigma_s^2 ds`` under the exact variance law."""
    t1 = characteristic_time(intensity, half_spread)
    a = intensity.a
    return _log_learning_factor(prior.variance, intensity, half_spread, sigma, t) * t1 / (a * a)


def advance_state(
    state: GaussianState,
    intensity: ExpIntensity,
    half_spread: float,
    sigma: float,
    duration: float,
    mid: float | None = None,
) -> GaussianState:
    """Evolve between events for ``duration`` under frozen quotes.

    ``mid=None`` means the market maker pegs the mid-price to the current
    mean, in which case the drift vanishes and the mean is constant;
    otherwise the mean relaxes toward ``mid`` with the exact integrating
    factor.
    """
    if duration < 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    if duration == 0.0:
        return state
    y_new = _advance_variance(state.variance, intensity, half_spread, sigma, duration)
    if mid is None:
        mean = state.mean
    else:
        log_g = _log_learning_factor(state.variance, intensity, half_spread, sigma, duration)
        mean = mid + (state.mean - mid) * math.exp(-log_g)
    return GaussianState(mean=mean, variance=y_new, t=state.t + duration)


def apply_event(state: GaussianState, intensity: ExpIntensity, sign: int) -> GaussianState:
    """Jump the mean by ``sign * a * sigma_t^2``; the variance is untouched."""
    if sign not in (-1, 1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    return GaussianState(
        mean=state.mean + sign * intensity.a * state.variance,
        variance=state.variance,
        t=state.t,
    )


def evolve_mean(
    state: GaussianState,
    intensity: ExpIntensity,
    half_spread: float,
    sigma: float,
    events: Sequence[TradeEvent],
    until: float,
    mid: float | None = None,
) -> GaussianState:
    """Integrate the mean through a time-ordered event stream up to ``until``.

    Exact between events (closed-form relaxation and variance transition),
    with a jump of ``+/- a sigma_t^2`` applied at each event time (buy
    events up, sell events down; meta orders count as buys).

    Args:
        mid: Fixed mid-price between events, or None for the
            mid-pegged-to-mean policy (zero drift).
    """
    cur = state
    for ev in sorted(events, key=lambda e: e.time):
        if ev.time > until:
            break
        if ev.time < cur.t:
            raise ValueError(f"event at {ev.time} is before state time {cur.t}")
        cur = advance_state(cur, intensity, half_spread, sigma, ev.time - cur.t, mid=mid)
        cur = apply_event(cur, intensity, ev.sign)
    return advance_state(cur, intensity, half_spread, sigma, until - cur.t, mid=mid)


def trajectory(
    state: GaussianState,
    intensity: ExpIntensity,
    half_spread: float,
    sigma: float,
    events: Sequence[TradeEvent],
    times: Sequence[float],
    mid: float | None = None,
) -> list[tuple[float, float, float]]:
    """Sampled ``(t, mean, variance)`` rows along :func:`evolve_mean`."""
    rows = []
    cur = state
    evs = sorted((e for e in events), key=lambda e: e.time)
    idx = 0
    for t in times:
        while idx < len(evs) and evs[idx].time <= t:
            ev = evs[idx]
            cur = advance_state(cur, intensity, half_spread, sigma, ev.time - cur.t, mid=mid)
            cur = apply_event(cur, intensity, ev.sign)
            idx += 1
        cur = advance_state(cur, intensity, half_spread, sigma, t - cur.t, mid=mid)
        rows.append((t, cur.mean, cur.variance))
    return rows


# ---------------------------------------------------------------------------
# Meta-order impact formulas (mid pegged to the mean, constant half-spread)
# ---------------------------------------------------------------------------

def impact_no_info(
    prior: GaussianPrior,
    intensity: ExpIntensity,
    half_spread: float,
    sigma: float,
    beta: float,
    t: float,
    T: float = math.inf,
    paper_form: bool = False,
) -> float:
    """Mean displacement when no opportunistic trades arrive (large beta).

    The mean accumulates the meta-order jumps without reversion:
    ``x_t - x_0 ~ beta a integral_0^{t^T} sigma_s^2 ds``.  With sigma = 0
    this is ``(beta t1 / a) log(1 + a^2 sigma0^2 (t^T) / t1)`` (logarithmic
    impact); with sigma > 0 it grows like ``beta sigma sqrt(t1) t`` once
    the variance has settled (linear impact).

    ``paper_form`` integrates the near-equilibrium variance form instead,
    for comparison against its own quadrature.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    te = min(t, T)
    a = intensity.a
    if sigma == 0.0 or not paper_form:
        return beta * a * variance_integral(prior, intensity, half_spread, sigma, te)
    # antiderivative of the near-equilibrium form sinf2 * q_s
    t1 = characteristic_time(intensity, half_spread)
    sinf2 = sigma * math.sqrt(t1) / a
    ratio = prior.variance ** 2 / sinf2 ** 2
    if ratio == 1.0:
        return beta * sigma * math.sqrt(t1) * te
    r = a * sigma / (2.0 * math.sqrt(t1))

    def q(s: float) -> float:
        if ratio > 1.0:
            return math.sqrt(1.0 + (ratio - 1.0) * math.exp(-r * s))
        return math.sqrt(1.0 - (1.0 - ratio) * math.exp(-r * s))

    def antider(s: float) -> float:
        qs = q(s)
        return -qs + 0.5 * math.log(abs((1.0 + qs) / (1.0 - qs)))

    return (4.0 * beta * t1 / a) * (antider(te) - antider(0.0))


def average_impact(
    prior: GaussianPrior,
    intensity: ExpIntensity,
    half_spread: float,
    sigma: float,
    beta: float,
    s0: float,
    t: float,
    T: float = math.inf,
) -> tuple[float, float]:
    """Average learning and impact split of the expected mean.

    ``E[x_t | S0] = A_t + B_t`` where

    * ``A_t = x0 + (S0 - x0) (1 - 1/G(t))`` is the learning of the true
      price and does not depend on the meta-order;
    * ``B_t = (beta t1 / a) (G(t^T) - 1) / G(t)`` is the meta-order impact
      in the large-beta limit, concave in time and bounded by
      ``beta t1 / a`` when T is infinite;

    with the learning factor ``G(t) = exp((a^2/t1) integral_0^t sigma_s^2 ds)``.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    t1 = characteristic_time(intensity, half_spread)
    a = intensity.a
    log_g_t = _log_learning_factor(prior.variance, intensity, half_spread, sigma, t)
    log_g_te = _log_learning_factor(prior.variance, intensity, half_spread, sigma, min(t, T))
    a_t = prior.x0 + (s0 - prior.x0) * (1.0 - math.exp(-log_g_t))
    b_t = (beta * t1 / a) * (math.exp(log_g_te - log_g_t) - math.exp(-log_g_t))
    return a_t, b_t


def impact_overlay_jumpsum(
    prior: GaussianPrior,
    intensity: ExpIntensity,
    half_spread: float,
    sigma: float,
    beta: float,
    s0: float,
    T: float,
    times: Sequence[float],
) -> list[float]:
    """Expected mean minus ``s0`` with the meta-order kept as actual jumps.

    Same averaging as :func:`average_impact` but the impact term sums the
    discrete jumps ``a sigma^2(k/beta)`` with their exact relaxation
    weights, so the overlay has the same staircase timing as a simulation.
    """
    a = intensity.a

    def log_g(t: float) -> float:
        return _log_learning_factor(prior.variance, intensity, half_spread, sigma, t)

    n_jumps = int(math.floor(beta * T * (1.0 + 1e-9)))
    jump_times = [k / beta for k in range(1, n_jumps + 1)]
    jump_logg = [log_g(tk) for tk in jump_times]
    jump_size = [
        a * variance_at(prior, intensity, half_spread, sigma, tk) for tk in jump_times
    ]
    out = []
    for t in times:
        lg = log_g(t)
        a_t = prior.x0 + (s0 - prior.x0) * (1.0 - math.exp(-lg))
        b_t = 0.0
        for tk, lgk, jk in zip(jump_times, jump_logg, jump_size):
            if tk > t:
                break
            b_t += jk * math.exp(lgk - lg)
        out.append(a_t + b_t - s0)
    return out
