"""Grid solver for the filtering equation of the latent efficient price.

The unnormalized posterior density evolves three ways:

* it diffuses with the price model (Crank-Nicolson, zero-flux ends);
* between trades it decays under the potential
  ``lam(ask - x) + lam(x - bid) - 2``, which is exact pointwise, so the
  continuous step is operator splitting (diffusion, then decay);
* at each trade it is multiplied by the trade likelihood.

Constant-in-x factors are irrelevant once the density is renormalized,
which the driver does after every trade and every ``renorm_every``
continuous steps.

For a fixed price (no diffusion) the whole evolution is multiplicative
and has a closed form (``closed_form_fixed_price``); the long-run shape
between trades concentrates at the mid-price with a known profile
(``asymptotic_between_trades``).  Both serve as oracles for the stepping
pipeline.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _backend
from .errors import Underflow, ZeroMass
from .model import (
    ExpIntensity,
    GaussianPrior,
    PriceModel,
    Quotes,
    Side,
    TradeEvent,
    characteristic_time,
)


@dataclass(eq=False)
class GridDensity:
    """A (possibly unnormalized) density sampled on a uniform grid.

    Attributes:
        x_min: Coordinate of the first node.
        dx: Node spacing (> 0).
        values: Non-negative node values; treated as immutable.
        normalized: True when the trapezoid mass is 1 (within 1e-10).
    """

    x_min: float
    dx: float
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.dx <= 0:
            raise ValueError(f"dx must be > 0, got {self.dx}")
        if self.values.ndim != 1 or self.values.shape[0] < 3:
            raise ValueError("values must be a 1-D array with at least 3 nodes")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("density values must be finite")
        if np.any(self.values < 0):
            raise ValueError("density values must be >= 0")
        if self.normalized and abs(self.mass() - 1.0) > 1e-10:
            raise ValueError("normalized flag set but trapezoid mass is not 1")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def x_max(self) -> float:
        return self.x_min + self.dx * (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    def mass(self) -> float:
        mass, _, _ = _backend.moments(self.values, self.x_min, self.dx)
        return mass

    @classmethod
    def from_gaussian(
        cls,
        prior: GaussianPrior,
        x_min: float,
        dx: float,
        n: int,
    ) -> "GridDensity":
        """Sample a Gaussian prior on the grid and renormalize it there."""
        x = x_min + dx * np.arange(n)
        vals = prior.density(x)
        dens = cls(x_min=x_min, dx=dx, values=vals, normalized=False)
        return normalize(dens)


def default_grid(
    prior: GaussianPrior,
    model: PriceModel | None = None,
    horizon: float = 0.0,
    n: int = 4001,
    prior_sigmas: float = 12.0,
    vol_sigmas: float = 6.0,
) -> tuple[float, float, int]:
    """Grid span wide enough that boundary mass stays negligible.

    Covers ``prior_sigmas`` prior standard deviations plus ``vol_sigmas``
    standard deviations of the price diffusion over the horizon.

    Returns:
        ``(x_min, dx, n)``.
    """
    sigma = model.sigma if model is not None else 0.0
    half = prior_sigmas * prior.sigma0 + vol_sigmas * sigma * math.sqrt(max(horizon, 0.0))
    x_min = prior.x0 - half
    dx = 2.0 * half / (n - 1)
    return x_min, dx, n


@dataclass(frozen=True)
class FilterDiagnostics:
    """Posterior summary: mean, variance, interpolated mode, raw mass."""

    mean: float
    variance: float
    argmax: float
    mass: float


def normalize(density: GridDensity) -> GridDensity:
    """Rescale to unit trapezoid mass.

    Raises:
        ZeroMass: If the mass is zero or not finite.
    """
    mass = density.mass()
    if not np.isfinite(mass) or mass <= 0.0:
        raise ZeroMass(f"cannot normalize density with mass {mass}")
    return GridDensity(
        x_min=density.x_min,
        dx=density.dx,
        values=density.values / mass,
        normalized=True,
    )


def _argmax_parabolic(values: np.ndarray, x_min: float, dx: float) -> float:
    i = int(np.argmax(values))
    if i == 0 or i == values.shape[0] - 1:
        return x_min + dx * i
    um, u0, up = values[i - 1], values[i], values[i + 1]
    denom = um - 2.0 * u0 + up
    if denom == 0.0:
        return x_min + dx * i
    shift = 0.5 * (um - up) / denom
    shift = min(0.5, max(-0.5, shift))
    return x_min + dx * (i + shift)


def diagnostics(density: GridDensity) -> FilterDiagnostics:
    """Trapezoid mean/variance and parabolically interpolated argmax.

    Raises:
        ZeroMass: If the density has no mass.
    """
    mass, mean, var = _backend.moments(density.values, density.x_min, density.dx)
    if not np.isfinite(mass) or mass <= 0.0:
        raise ZeroMass(f"cannot summarize density with mass {mass}")
    return FilterDiagnostics(
        mean=mean,
        variance=max(var, 0.0),
        argmax=_argmax_parabolic(density.values, density.x_min, density.dx),
        mass=mass,
    )


def default_dt(
    intensity: ExpIntensity,
    quotes_half_spread: float,
    dx: float,
    sigma: float,
) -> float:
    """Step-size bound resolving the learning and diffusion scales.

    ``min(0.1 t1, dx^2 / sigma^2)``; the decay substep is exact so the
    intensity magnitude itself does not constrain the step.
    """
    t1 = characteristic_time(intensity, quotes_half_spread)
    dt = 0.1 * t1
    if sigma > 0:
        dt = min(dt, dx * dx / (sigma * sigma))
    return dt


def step_continuous(
    density: GridDensity,
    quotes: Quotes,
    model: PriceModel,
    intensity: ExpIntensity,
    dt: float,
    strang: bool = False,
) -> GridDensity:
    """One operator-split step between trades; returns an unnormalized density.

    Diffusion first (Crank-Nicolson with zero-flux boundaries, skipped when
    sigma = 0), then the exact multiplicative decay
    ``exp(-(lam(ask - x) + lam(x - bid) - 2) dt)``.  The decay factor is
    exact under frozen quotes, so the splitting error is O(dt) from
    non-commutation with the diffusion only; ``strang=True`` symmetrizes
    the split (half decay, diffusion, half decay) for O(dt^2) at the cost
    of one extra decay pass.

    Raises:
        Underflow: If the result's max value drops below 1e-300; the caller
            should renormalize more often.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    u = density.values.copy()
    decay_args = (
        density.x_min, density.dx, quotes.bid, quotes.ask,
        intensity.lambda0, intensity.a,
    )
    symmetric = strang and model.sigma > 0
    if symmetric:
        _backend.decay_inplace(u, *decay_args, 0.5 * dt)
    if model.sigma > 0:
        alpha = 0.5 * model.sigma ** 2 * dt / density.dx ** 2
        u = _backend.cn_diffuse(u, alpha)
        np.maximum(u, 0.0, out=u)  # CN can undershoot by roundoff in the tails
    _backend.decay_inplace(u, *decay_args, 0.5 * dt if symmetric else dt)
    if not np.any(u >= 1e-300):
        raise Underflow("density decayed below 1e-300 everywhere")
    return GridDensity(density.x_min, density.dx, u, normalized=False)


def apply_trade(
    density: GridDensity,
    quotes: Quotes,
    intensity: ExpIntensity,
    side: Side,
) -> GridDensity:
    """Multiply by the trade likelihood; returns an unnormalized density."""
    u = density.values.copy()
    _backend.trade_inplace(
        u, density.x_min, density.dx,
        quotes.ask if side is Side.ASK else quotes.bid,
        intensity.lambda0, intensity.a, side is Side.ASK,
    )
    return GridDensity(density.x_min, density.dx, u, normalized=False)


# ---------------------------------------------------------------------------
# Fixed-price closed form and its long-run shape
# ---------------------------------------------------------------------------

class QuoteHistory:
    """Piecewise-constant quotes: segment k holds on [start_k, start_{k+1})."""

    def __init__(self, segments: Sequence[tuple[float, Quotes]]):
        if not segments:
            raise ValueError("need at least one quote segment")
        starts = [s for s, _ in segments]
        if starts[0] != 0.0:
            raise ValueError("first quote segment must start at time 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("segment start times must be strictly increasing")
        self.starts = starts
        self.quotes = [q for _, q in segments]

    @classmethod
    def constant(cls, quotes: Quotes) -> "QuoteHistory":
        return cls([(0.0, quotes)])

    def at(self, t: float) -> Quotes:
        """Quotes in effect at time t (right-continuous)."""
        return self.quotes[max(bisect_right(self.starts, t) - 1, 0)]

    def before(self, t: float) -> Quotes:
        """Left limit at time t: the quotes a trade at t executes against."""
        i = bisect_left(self.starts, t)
        if i < len(self.starts) and self.starts[i] == t:
            i -= 1
        else:
            i -= 1
        return self.quotes[max(i, 0)]

    def segments_until(self, t: float) -> Iterable[tuple[float, float, Quotes]]:
        """Yield ``(start, end, quotes)`` covering [0, t]."""
        for k, start in enumerate(self.starts):
            if start >= t:
                return
            end = self.starts[k + 1] if k + 1 < len(self.starts) else math.inf
            yield start, min(end, t), self.quotes[k]


def closed_form_log_factor(
    grid_x: np.ndarray,
    quote_history: QuoteHistory,
    trade_history: Sequence[TradeEvent],
    intensity: ExpIntensity,
    t: float,
) -> np.ndarray:
    """Log of the fixed-price multiplicative update relative to the prior.

    ``2t - integral(lam(ask_s - x) + lam(x - bid_s)) ds`` plus
    ``sum(log lam(distance))`` over trades up to ``t``; the time integral
    is a finite sum because the quotes are piecewise constant.
    """
    x = np.asarray(grid_x, dtype=float)
    log_u = np.full_like(x, 2.0 * t)
    for start, end, q in quote_history.segments_until(t):
        span = end - start
        log_u -= span * (intensity.evaluate(q.ask - x) + intensity.evaluate(x - q.bid))
    log_lam0 = math.log(intensity.lambda0)
    for ev in trade_history:
        if ev.time > t:
            continue
        q = quote_history.before(ev.time)
        if ev.side is Side.ASK:
            log_u += log_lam0 - intensity.a * (q.ask - x)
        else:
            log_u += log_lam0 - intensity.a * (x - q.bid)
    return log_u


def closed_form_fixed_price(
    prior: GridDensity,
    quote_history: QuoteHistory,
    trade_history: Sequence[TradeEvent],
    intensity: ExpIntensity,
    t: float,
) -> GridDensity:
    """Exact unnormalized posterior at time ``t`` for a fixed efficient price.

    Evaluates ``m0(x) * exp(closed_form_log_factor(...))`` nodewise.  When
    the exponent is large the result is rescaled by a constant to stay in
    floating-point range (harmless: the filter is defined up to scale).
    """
    log_f = closed_form_log_factor(prior.x, quote_history, trade_history, intensity, t)
    peak = float(np.max(log_f))
    shift = peak - 600.0 if peak > 600.0 else 0.0
    values = prior.values * np.exp(log_f - shift)
    return GridDensity(prior.x_min, prior.dx, values, normalized=False)


def asymptotic_between_trades(
    prior: GridDensity,
    quotes: Quotes,
    intensity: ExpIntensity,
    t: float,
    literal: bool = False,
) -> GridDensity:
    """Long-run posterior profile between trades, for fixed quotes.

    The renormalized fixed-price posterior concentrates at the mid-price
    like ``a sqrt(t / (2 pi t1)) * (m0(x) / m0(mid)) *
    exp(-(t / t1) (cosh(a (x - mid)) - 1))``; this evaluates that profile
    on the prior's grid.  With ``literal=True`` the scale factor
    ``sqrt(t / (pi t1))`` is used and the ``a`` inside the cosh is dropped,
    reproducing a common misprinted form of the profile (kept only for
    comparison; it is not asymptotically normalized).
    """
    if t <= 0:
        raise ValueError(f"t must be > 0, got {t}")
    t1 = characteristic_time(intensity, quotes.half_spread)
    mid = quotes.mid
    x = prior.x
    if not (x[0] < mid < x[-1]):
        raise ValueError("mid-price must lie inside the grid")
    # prior value at the mid, linearly interpolated between nodes
    j = int(np.searchsorted(x, mid))
    j = min(max(j, 1), prior.n - 1)
    w = (mid - x[j - 1]) / prior.dx
    m0_mid = (1.0 - w) * prior.values[j - 1] + w * prior.values[j]
    if m0_mid <= 0:
        raise ZeroMass("prior density vanishes at the mid-price")
    if literal:
        pref = math.sqrt(t / (math.pi * t1))
        arg = x - mid
    else:
        pref = intensity.a * math.sqrt(t / (2.0 * math.pi * t1))
        arg = intensity.a * (x - mid)
    values = pref * (prior.values / m0_mid) * np.exp(-(t / t1) * (np.cosh(arg) - 1.0))
    return GridDensity(prior.x_min, prior.dx, values, normalized=False)


# ---------------------------------------------------------------------------
# Stepping driver
# ---------------------------------------------------------------------------

class GridFilter:
    """Single-writer driver advancing a grid density through time.

    Events are applied at their exact timestamps (continuous steps are
    split around them).  The density is renormalized after every trade and
    every ``renorm_every`` continuous steps; diagnostics stay valid either
    way because they divide by the running mass.
    """

    def __init__(
        self,
        prior: GridDensity,
        model: PriceModel,
        intensity: ExpIntensity,
        dt: float,
        renorm_every: int = 100,
    ):
        if dt <= 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        self.model = model
        self.intensity = intensity
        self.dt = dt
        self.renorm_every = renorm_every
        self.x_min = prior.x_min
        self.dx = prior.dx
        self.values = prior.values.copy()
        self.t = 0.0
        self._steps_since_renorm = 0
        # decay tables exp(+-a (x - c)); the +-600 clamp only bites where
        # the decay factor underflows to zero anyway
        self._x_center = prior.x_min + 0.5 * prior.dx * (prior.n - 1)
        ax = np.clip(intensity.a * (prior.x - self._x_center), -600.0, 600.0)
        self._exp_ax = np.exp(ax)
        self._inv_exp_ax = np.exp(-ax)

    def _continuous_chunk(self, quotes: Quotes, dt: float) -> tuple[float, float]:
        alpha = 0.0
        if self.model.sigma > 0:
            alpha = 0.5 * self.model.sigma ** 2 * dt / self.dx ** 2
        a = self.intensity.a
        coef_ask = self.intensity.lambda0 * math.exp(
            max(-600.0, min(600.0, -a * (quotes.ask - self._x_center)))
        )
        coef_bid = self.intensity.lambda0 * math.exp(
            max(-600.0, min(600.0, a * (quotes.bid - self._x_center)))
        )
        mass, mean = _backend.filter_step(
            self.values, alpha, self._exp_ax, self._inv_exp_ax,
            coef_ask, coef_bid, dt, self.x_min, self.dx,
        )
        self.t += dt
        self._steps_since_renorm += 1
        if not np.isfinite(mass) or mass < 1e-250:
            raise Underflow(f"filter mass decayed to {mass}; renormalize more often")
        if self._steps_since_renorm >= self.renorm_every or not 1e-8 < mass < 1e8:
            self.values /= mass
            self._steps_since_renorm = 0
            mass = 1.0
        return mass, mean

    def advance(self, quotes: Quotes, duration: float) -> tuple[float, float]:
        """Run the continuous dynamics for ``duration`` under frozen quotes.

        With sigma = 0 the decay is exact over any interval, so the whole
        duration is covered in renormalization-sized chunks; otherwise the
        interval is split into steps of at most ``self.dt``.  Returns the
        final (mass, mean), so feedback policies get the post-step mean
        without a second pass.
        """
        if duration < 0:
            if duration > -1e-9:
                duration = 0.0
            else:
                raise ValueError(f"duration must be >= 0, got {duration}")
        if duration == 0.0:
            mass, mean, _ = _backend.moments(self.values, self.x_min, self.dx)
            return mass, mean
        if self.model.sigma == 0:
            t1 = characteristic_time(self.intensity, quotes.half_spread)
            chunk = max(50.0 * t1, self.dt)
        else:
            chunk = self.dt
        remaining = duration
        mass = mean = math.nan
        while remaining > 1e-15 * max(1.0, self.t):
            step = min(chunk, remaining)
            mass, mean = self._continuous_chunk(quotes, step)
            remaining -= step
        return mass, mean

    def apply_trade(self, quotes: Quotes, side: Side) -> None:
        """Multiply by the trade likelihood and renormalize."""
        _backend.trade_inplace(
            self.values, self.x_min, self.dx,
            quotes.ask if side is Side.ASK else quotes.bid,
            self.intensity.lambda0, self.intensity.a, side is Side.ASK,
        )
        self.renormalize()

    def renormalize(self) -> None:
        mass, _, _ = _backend.moments(self.values, self.x_min, self.dx)
        if not np.isfinite(mass) or mass <= 0.0:
            raise ZeroMass(f"filter mass is {mass}")
        self.values /= mass
        self._steps_since_renorm = 0

    def diagnostics(self) -> FilterDiagnostics:
        mass, mean, var = _backend.moments(self.values, self.x_min, self.dx)
        if not np.isfinite(mass) or mass <= 0.0:
            raise ZeroMass(f"filter mass is {mass}")
        return FilterDiagnostics(
            mean=mean,
            variance=max(var, 0.0),
            argmax=_argmax_parabolic(self.values, self.x_min, self.dx),
            mass=mass,
        )

    def density(self) -> GridDensity:
        """Snapshot of the current (unnormalized) density."""
        return GridDensity(self.x_min, self.dx, self.values.copy(), normalized=False)


def run_fixed_step_filter(
    prior: GridDensity,
    model: PriceModel,
    intensity: ExpIntensity,
    quote_history: QuoteHistory,
    trade_history: Sequence[TradeEvent],
    horizon: float,
    dt: float,
) -> GridDensity:
    """Fixed-step pipeline with events binned to step boundaries.

    Both trades and quote changes take effect only at multiples of ``dt``
    (using the quotes sampled at the bin start), which carries a first-order
    time-binning error.  This is the variant whose error shrinks under
    space-time grid refinement; `GridFilter` handles events exactly instead.
    Returns the final normalized density.
    """
    filt = GridFilter(prior, model, intensity, dt=dt)
    n_steps = int(round(horizon / dt))
    trades = sorted(trade_history, key=lambda e: e.time)
    next_trade = 0
    for k in range(n_steps):
        t_start = k * dt
        quotes = quote_history.at(t_start)
        filt._continuous_chunk(quotes, dt)
        t_end = (k + 1) * dt
        while next_trade < len(trades) and trades[next_trade].time <= t_end:
            filt.apply_trade(quotes, trades[next_trade].side)
            next_trade += 1
    filt.renormalize()
    return GridDensity(filt.x_min, filt.dx, filt.values.copy(), normalized=True)
