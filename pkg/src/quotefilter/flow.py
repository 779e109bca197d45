"""Simulation of the latent price path and the aggressive order flow.

Opportunistic trades are sampled by thinning: propose times from a
constant-rate envelope, then accept ask- or bid-side events with
probabilities proportional to the state-dependent intensities.  This is
exact (no time discretization of the point process) as long as the
envelope dominates the true rates, which the clip guarantees; proposals
where the raw intensity exceeds the cap raise instead of silently
distorting the law.

Meta-orders are a deterministic stream of ask-side events at times k/beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import EnvelopeViolation
from .model import (
    ExpIntensity,
    IntensityClip,
    PriceModel,
    Quotes,
    Side,
    Source,
    TradeEvent,
)


def replica_rng(master_seed: int, replica_index: int = 0) -> np.random.Generator:
    """Counter-based stream keyed by (master seed, replica index).

    Distinct replicas get statistically independent Philox streams and any
    (seed, index) pair reproduces its stream exactly.
    """
    key = np.array(
        [np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF), np.uint64(replica_index)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class PricePath:
    """Efficient-price samples on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("price values must be finite")


def simulate_price(
    model: PriceModel,
    dt: float,
    horizon: float,
    rng: np.random.Generator,
) -> PricePath:
    """Constant-coefficient Euler path on a regular grid.

    Exact for constant drift and volatility: increments are
    ``mu dt + sigma sqrt(dt) N(0,1)``.  With ``sigma = 0`` the path is the
    deterministic ``s0 + mu t``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if horizon < dt:
        raise ValueError(f"horizon must be >= dt, got {horizon} < {dt}")
    n_steps = int(math.floor(horizon / dt + 1e-12))
    times = dt * np.arange(n_steps + 1)
    increments = model.mu * dt + model.sigma * math.sqrt(dt) * rng.standard_normal(n_steps)
    values = model.s0 + np.concatenate(([0.0], np.cumsum(increments)))
    return PricePath(times=times, values=values)


class BrownianSampler:
    """Sequential exact sampler of the price at arbitrary increasing times.

    Used by the thinning loop so the price at a proposal time is drawn from
    the exact Gaussian transition rather than interpolated.
    """

    def __init__(self, model: PriceModel, rng):
        self.model = model
        self.rng = rng
        self.t = 0.0
        self.s = model.s0

    def at(self, t: float) -> float:
        if t < self.t:
            raise ValueError(f"sampler time went backwards: {t} < {self.t}")
        dt = t - self.t
        if dt > 0.0:
            self.s += self.model.mu * dt
            if self.model.sigma > 0.0:
                self.s += self.model.sigma * math.sqrt(dt) * self.rng.standard_normal()
            self.t = t
        return self.s


class FrozenPath:
    """Price lookup on a precomputed path (nearest earlier sample).

    Only safe when the path is constant or sampled at every lookup time;
    the constructor enforces the constant case unless told otherwise.
    """

    def __init__(self, path: PricePath, allow_varying: bool = False):
        values = path.values
        if not allow_varying and np.any(values != values[0]):
            raise ValueError(
                "FrozenPath on a non-constant path would interpolate; "
                "use BrownianSampler for exact sampling"
            )
        self.path = path

    def at(self, t: float) -> float:
        idx = int(np.searchsorted(self.path.times, t, side="right")) - 1
        return float(self.path.values[max(idx, 0)])


@dataclass(frozen=True)
class MetaOrderSchedule:
    """Deterministic buy pressure: ``beta`` orders per second until ``horizon_T``."""

    beta: float
    horizon_T: float = math.inf

    def __post_init__(self) -> None:
        if not (self.beta > 0):
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.horizon_T < 0:
            raise ValueError(f"horizon_T must be >= 0, got {self.horizon_T}")


def meta_events(
    schedule: MetaOrderSchedule,
    horizon: float | None = None,
) -> list[TradeEvent]:
    """Ask-side events at times k/beta for k = 1..floor(beta T).

    ``horizon`` truncates an infinite schedule.  Boundary times are kept
    when k/beta equals the bound up to a relative 1e-9 guard, so float
    noise in ``beta * T`` cannot drop the final order.
    """
    bound = schedule.horizon_T
    if horizon is not None:
        bound = min(bound, horizon)
    if not math.isfinite(bound):
        raise ValueError("cannot enumerate an unbounded meta-order; pass horizon")
    k_max = int(math.floor(schedule.beta * bound * (1.0 + 1e-9)))
    out = []
    for k in range(1, k_max + 1):
        t = k / schedule.beta
        if t <= bound * (1.0 + 1e-9):
            out.append(TradeEvent(time=t, side=Side.ASK, source=Source.META))
    return out


def merge_events(*streams: Sequence[TradeEvent]) -> list[TradeEvent]:
    """Time-ordered merge; meta events win ties so they are processed first."""
    events = [e for stream in streams for e in stream]
    events.sort(key=lambda e: (e.time, 0 if e.source is Source.META else 1))
    return events


def simulate_market(
    model: PriceModel,
    quote_process: Callable[[float], Quotes],
    intensity: ExpIntensity,
    horizon: float,
    rng: np.random.Generator,
    clip: IntensityClip | None = None,
    schedule: MetaOrderSchedule | None = None,
    path_dt: float | None = None,
):
    """Joint simulation of the price path and the full event stream.

    Like :func:`simulate_trades` but also records the efficient price and
    quotes seen by every event (for export) and merges in a deterministic
    meta-order.  The price is sampled exactly at every proposal and meta
    time plus a regular ``path_dt`` grid.

    Returns:
        ``(path, events, event_quotes, event_prices)``.
    """
    if clip is None:
        clip = IntensityClip()
    lam_max = clip.lam_max(intensity)
    envelope = 2.0 * lam_max
    sampler = BrownianSampler(model, rng)
    metas = meta_events(schedule, horizon=horizon) if schedule is not None else []
    if path_dt is None:
        path_dt = horizon / 1000.0

    grid_times: list[float] = []
    grid_values: list[float] = []
    events: list[TradeEvent] = []
    event_quotes: list[Quotes] = []
    event_prices: list[float] = []

    t_grid = 0.0
    im = 0
    prop_t = rng.exponential(1.0 / envelope)
    while True:
        t_meta = metas[im].time if im < len(metas) else math.inf
        t_next = min(t_grid, t_meta, prop_t)
        if t_next > horizon:
            break
        s = sampler.at(t_next)
        if t_next == t_grid:
            grid_times.append(t_grid)
            grid_values.append(s)
            t_grid = min(t_grid + path_dt, horizon) if t_grid < horizon else math.inf
            continue
        q = quote_process(t_next)
        if t_next == t_meta:
            events.append(metas[im])
            event_quotes.append(q)
            event_prices.append(s)
            im += 1
            continue
        u = rng.uniform()
        lam_ask = float(intensity.evaluate(q.ask - s))
        lam_bid = float(intensity.evaluate(s - q.bid))
        if max(lam_ask, lam_bid) > lam_max * (1.0 + 1e-12):
            raise EnvelopeViolation(
                f"intensity {max(lam_ask, lam_bid):.6g} exceeds cap {lam_max:.6g} "
                f"at t={t_next:.6g}; raise the clip"
            )
        p_ask = max(lam_ask, clip.lam_min) / envelope
        p_bid = max(lam_bid, clip.lam_min) / envelope
        if u < p_ask:
            events.append(TradeEvent(time=t_next, side=Side.ASK))
            event_quotes.append(q)
            event_prices.append(s)
        elif u < p_ask + p_bid:
            events.append(TradeEvent(time=t_next, side=Side.BID))
            event_quotes.append(q)
            event_prices.append(s)
        prop_t += rng.exponential(1.0 / envelope)
    path = PricePath(times=np.asarray(grid_times), values=np.asarray(grid_values))
    order = sorted(
        range(len(events)),
        key=lambda i: (events[i].time, 0 if events[i].source is Source.META else 1),
    )
    return (
        path,
        [events[i] for i in order],
        [event_quotes[i] for i in order],
        [event_prices[i] for i in order],
    )


def simulate_trades(
    price: PricePath | BrownianSampler | FrozenPath,
    quote_process: Callable[[float], Quotes],
    intensity: ExpIntensity,
    horizon: float,
    rng: np.random.Generator,
    clip: IntensityClip | None = None,
) -> list[TradeEvent]:
    """Thinning sampler for the two-sided aggressive order flow.

    Proposals arrive at rate ``2 lam_max``; each is accepted as an ask-side
    event with probability ``lam(ask - S) / (2 lam_max)``, as a bid-side
    event with probability ``lam(S - bid) / (2 lam_max)``, and rejected
    otherwise (the accept regions are disjoint by construction).

    Args:
        price: Price lookup; a constant :class:`PricePath` is wrapped in a
            :class:`FrozenPath`, a varying one must be a sampler already.
        quote_process: Quotes in effect at each proposal time.
        intensity: Arrival intensity of distance to the efficient price.
        horizon: Simulation end time.
        rng: Stream from :func:`replica_rng`.
        clip: Intensity bounds; the cap is the thinning envelope.

    Raises:
        EnvelopeViolation: A proposal saw a raw one-sided intensity above
            the cap; raise the clip rather than trust the output.
    """
    if clip is None:
        clip = IntensityClip()
    lam_max = clip.lam_max(intensity)
    if isinstance(price, PricePath):
        price = FrozenPath(price)
    envelope = 2.0 * lam_max
    events: list[TradeEvent] = []
    t = 0.0
    while True:
        t += rng.exponential(1.0 / envelope)
        if t > horizon:
            break
        u = rng.uniform()
        s = price.at(t)
        q = quote_process(t)
        lam_ask = float(intensity.evaluate(q.ask - s))
        lam_bid = float(intensity.evaluate(s - q.bid))
        if max(lam_ask, lam_bid) > lam_max * (1.0 + 1e-12):
            raise EnvelopeViolation(
                f"intensity {max(lam_ask, lam_bid):.6g} exceeds cap {lam_max:.6g} "
                f"at t={t:.6g}; raise the clip"
            )
        p_ask = max(lam_ask, clip.lam_min) / envelope
        p_bid = max(lam_bid, clip.lam_min) / envelope
        if u < p_ask:
            events.append(TradeEvent(time=t, side=Side.ASK))
        elif u < p_ask + p_bid:
            events.append(TradeEvent(time=t, side=Side.BID))
    return events
