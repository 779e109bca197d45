"""Meta-order impact experiments and the analytic limit regimes.

``run_experiment`` closes the full loop per Monte-Carlo replica: simulate
the efficient price, thin the opportunistic order flow against the live
quotes, inject the deterministic meta-order (which the filter cannot tell
apart from ordinary buys), run the chosen filter, and set the quotes from
the posterior.  Replica streams are independent and keyed by
(seed, replica index), and the aggregation is an index-ordered fold, so a
given (seed, config) pair always produces the same curve.

The analytic side collects the closed-form limits: the averaged overlay,
the no-information impact, the arcsinh recursion, the slow-limit system
residual and the fixed-quote long-run levels.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import gaussian as ga
from .errors import DomainError, EnvelopeViolation
from .flow import MetaOrderSchedule, meta_events, replica_rng
from .grid import GridDensity, GridFilter, default_dt, default_grid
from .maker import ArgmaxMMState, argmax_jump, impact_recursion
from .model import (
    ExpIntensity,
    GaussianPrior,
    IntensityClip,
    PriceModel,
    Quotes,
    Side,
    characteristic_time,
)


@dataclass(frozen=True)
class ImpactExperiment:
    """Full configuration of one meta-order study."""

    intensity: ExpIntensity
    half_spread: float
    sigma: float
    prior: GaussianPrior
    s0: float
    beta: float
    horizon_T: float
    horizon: float
    replicas: int
    seed: int
    policy: str = "mid-mean"
    filter_kind: str = "grid"  # "grid" or "gaussian"
    grid_n: int = 4001
    dt: float | None = None
    w_clip: float | None = 3.0  # in units of 1/a; None = model default (10/a)
    n_output_times: int = 26
    workers: int = 1

    def __post_init__(self) -> None:
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if math.isfinite(self.horizon_T) and self.horizon < self.horizon_T:
            raise ValueError("horizon must cover the meta-order when T is finite")
        if self.replicas < 1:
            raise ValueError(f"replicas must be >= 1, got {self.replicas}")
        if self.policy not in ("fixed", "mid-mean", "mid-argmax"):
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.filter_kind not in ("grid", "gaussian"):
            raise ValueError(f"unknown filter {self.filter_kind!r}")

    @property
    def clip(self) -> IntensityClip:
        w = None if self.w_clip is None else self.w_clip / self.intensity.a
        return IntensityClip(w_clip=w)

    def output_times(self) -> np.ndarray:
        """Sampling times offset from the meta-order grid to avoid ties."""
        k = np.arange(self.n_output_times)
        inner = (k + 0.5) * (self.horizon / self.n_output_times)
        return np.concatenate((inner, [self.horizon]))


@dataclass(frozen=True)
class ImpactCurve:
    """Monte-Carlo mean impact with its standard error and analytic overlay."""

    times: np.ndarray
    mean_impact: np.ndarray
    stderr: np.ndarray
    overlay: np.ndarray
    readout: str
    replicas: int
    seed: int

    def __post_init__(self) -> None:
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(self.stderr < 0):
            raise ValueError("standard errors must be >= 0")


def _replica_impacts(exp: ImpactExperiment, idx: int) -> np.ndarray:
    """One replica's impact readout at the output times.

    The proposal stream, its acceptance uniforms and the efficient price
    at the proposal times are pre-drawn as arrays (the proposal process is
    state-independent, so this is still exact thinning); the feedback loop
    then only decides acceptances and advances the filter.
    """
    rng = replica_rng(exp.seed, idx)
    intensity = exp.intensity
    model = PriceModel(mu=0.0, sigma=exp.sigma, s0=exp.s0)
    clip = exp.clip
    lam_max = clip.lam_max(intensity)
    envelope = 2.0 * lam_max
    outputs = exp.output_times()
    horizon = exp.horizon

    metas = (
        meta_events(MetaOrderSchedule(exp.beta, exp.horizon_T), horizon=horizon)
        if exp.beta > 0
        else []
    )

    # pre-drawn thinning stream: gap blocks, then uniforms, then normals
    blocks = []
    total = 0.0
    while total <= horizon:
        cs = total + np.cumsum(rng.exponential(1.0 / envelope, size=4096))
        blocks.append(cs)
        total = float(cs[-1])
    prop_times = np.concatenate(blocks)
    prop_times = prop_times[prop_times <= horizon]
    n_props = prop_times.shape[0]
    u01s = rng.uniform(size=n_props)
    if exp.sigma > 0 and n_props > 0:
        dts = np.diff(prop_times, prepend=0.0)
        incs = model.mu * dts + exp.sigma * np.sqrt(dts) * rng.standard_normal(n_props)
        s_at_prop = exp.s0 + np.cumsum(incs)
    else:
        s_at_prop = np.full(n_props, exp.s0)

    use_grid = exp.filter_kind == "grid"
    if use_grid:
        x_min, dx, n = default_grid(exp.prior, model, horizon, n=exp.grid_n)
        dens = GridDensity.from_gaussian(exp.prior, x_min, dx, n)
        dt = exp.dt or default_dt(intensity, exp.half_spread, dx, exp.sigma)
        filt = GridFilter(dens, model, intensity, dt=dt)
        mm_state = None
        gstate = None
    else:
        dt = exp.dt or 0.1 * characteristic_time(intensity, exp.half_spread)
        filt = None
        gstate = ga.GaussianState(mean=exp.prior.x0, variance=exp.prior.variance, t=0.0)
        mm_state = ArgmaxMMState.initial(exp.prior) if exp.policy == "mid-argmax" else None

    fixed_policy = exp.policy == "fixed"
    argmax_policy = exp.policy == "mid-argmax"
    half_spread = exp.half_spread

    def posterior_mid() -> float:
        """Mid implied by the current posterior under the active policy."""
        if fixed_policy:
            return exp.prior.x0
        if use_grid:
            d = filt.diagnostics()
            return d.argmax if argmax_policy else d.mean
        return mm_state.xhat if argmax_policy else gstate.mean

    def advance_to(t_from: float, t_to: float, mid: float) -> float:
        """Advance the filter under frozen quotes; returns the new mid."""
        nonlocal gstate
        if t_to <= t_from:
            return mid
        if use_grid:
            _, mean = filt.advance(Quotes.around(mid, half_spread), t_to - t_from)
            if fixed_policy or argmax_policy:
                return mid  # mode is constant between events; fixed is fixed
            return mean
        drift_mid = mid if fixed_policy else None
        gstate = ga.advance_state(
            gstate, intensity, half_spread, exp.sigma, t_to - t_from, mid=drift_mid
        )
        return mid if (fixed_policy or argmax_policy) else gstate.mean

    def apply_event(t_ev: float, side: Side, mid: float) -> float:
        nonlocal gstate
        sign = 1 if side is Side.ASK else -1
        if use_grid:
            filt.apply_trade(Quotes.around(mid, half_spread), side)
        else:
            if mm_state is not None:
                argmax_jump(mm_state, exp.prior, intensity, half_spread, t_ev, sign)
            gstate = ga.apply_event(gstate, intensity, sign)
        return posterior_mid()

    out = np.empty(outputs.shape[0])
    t = 0.0
    mid = posterior_mid()
    ip = 0
    im = 0
    io = 0
    # bin-boundary guard: must exceed the ulp error of t/dt at the last
    # bin index, and stay far below one bin
    eps = 1e-9
    mexp = math.exp
    a_ = intensity.a
    lam0_ = intensity.lambda0
    lam_floor = clip.lam_min
    lam_cap = lam_max * (1.0 + 1e-12)
    while io < outputs.shape[0]:
        t_meta = metas[im].time if im < len(metas) else math.inf
        prop_t = prop_times[ip] if ip < n_props else math.inf
        t_out = outputs[io]
        t_bin = min((math.floor(t / dt + eps) + 1) * dt, horizon)
        if t_bin <= t:  # never stall on a boundary
            t_bin = min(t + dt, horizon)
        t_stop = min(t_meta, prop_t, t_out, t_bin)

        if t_meta == t_stop:
            mid = advance_to(t, t_meta, mid)
            t = t_meta
            mid = apply_event(t, Side.ASK, mid)
            im += 1
            continue
        if prop_t == t_stop:
            s = s_at_prop[ip]
            lam_ask = lam0_ * mexp(-a_ * (mid + half_spread - s))
            lam_bid = lam0_ * mexp(-a_ * (s - mid + half_spread))
            if lam_ask > lam_cap or lam_bid > lam_cap:
                raise EnvelopeViolation(
                    f"intensity exceeds cap {lam_max:.6g} at t={prop_t:.6g}"
                )
            u01 = u01s[ip]
            p_ask = max(lam_ask, lam_floor) / envelope
            p_bid = max(lam_bid, lam_floor) / envelope
            side = None
            if u01 < p_ask:
                side = Side.ASK
            elif u01 < p_ask + p_bid:
                side = Side.BID
            if side is not None:
                mid = advance_to(t, prop_t, mid)
                t = prop_t
                mid = apply_event(t, side, mid)
            ip += 1
            continue
        if t_out == t_stop:
            mid = advance_to(t, t_out, mid)
            t = t_out
            if argmax_policy:
                out[io] = mid - exp.s0
            elif use_grid:
                out[io] = filt.diagnostics().mean - exp.s0
            else:
                out[io] = gstate.mean - exp.s0
            io += 1
            continue
        mid = advance_to(t, t_bin, mid)
        t = t_bin
    return out


def _replica_worker(args: tuple) -> np.ndarray:
    exp, idx = args
    try:
        return _replica_impacts(exp, idx)
    except Exception as e:  # annotate with the replica index, keep the type
        raise type(e)(f"replica {idx}: {e}") from e


def run_experiment(exp: ImpactExperiment) -> ImpactCurve:
    """Monte-Carlo mean impact curve with the averaged analytic overlay.

    The observer treats meta trades as ordinary buys; the overlay is the
    averaged-mean formula evaluated with the meta-order kept as discrete
    jumps, so both sides share the same staircase timing.
    """
    times = exp.output_times()
    if exp.workers > 1:
        with ProcessPoolExecutor(max_workers=exp.workers) as pool:
            rows = list(pool.map(_replica_worker, ((exp, i) for i in range(exp.replicas))))
    else:
        rows = [_replica_worker((exp, i)) for i in range(exp.replicas)]
    stacked = np.vstack(rows)
    mean = stacked.mean(axis=0)
    if exp.replicas > 1:
        stderr = stacked.std(axis=0, ddof=1) / math.sqrt(exp.replicas)
    else:
        stderr = np.zeros_like(mean)
    if exp.beta > 0:
        overlay = np.asarray(
            ga.impact_overlay_jumpsum(
                exp.prior, exp.intensity, exp.half_spread, exp.sigma,
                exp.beta, exp.s0, min(exp.horizon_T, exp.horizon), times,
            )
        )
    else:
        lg = [
            ga.average_impact(
                exp.prior, exp.intensity, exp.half_spread, exp.sigma,
                0.0, exp.s0, float(t), exp.horizon_T,
            )
            for t in times
        ]
        overlay = np.asarray([a + b - exp.s0 for a, b in lg])
    readout = "mid_minus_s0" if exp.policy == "mid-argmax" else "posterior_mean_minus_s0"
    return ImpactCurve(
        times=times,
        mean_impact=mean,
        stderr=stderr,
        overlay=overlay,
        readout=readout,
        replicas=exp.replicas,
        seed=exp.seed,
    )


# ---------------------------------------------------------------------------
# Analytic limit regimes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlowLimitResult:
    """Residual of the slow-meta-order system and the implied impact."""

    residual: float
    impact_log: float
    impact_linear: float


def slow_limit_residual(beta: float, t1: float, a: float) -> SlowLimitResult:
    """Check the constant solution of the slow-meta-order system.

    Substitutes ``u = 1 + beta t1`` and ``v = 1 - beta t1`` into both
    equations of the reduced system

        (1/t1)(u v + t u' v) = (beta + (v-u)/(2 t1)) + (v+u)/(2 t1)
                               + beta (v-u)/(v+u),
        (1/t1)(u v + t u v') = -(beta + (v-u)/(2 t1)) + (v+u)/(2 t1)
                               + beta (v-u)/(v+u),

    (the derivative terms vanish for constants, so the residual is
    time-independent) and reports the max absolute residual, analytically
    zero, together with the impact ``log(1 + beta t1) / a`` and its
    small-``beta t1`` limit ``beta t1 / a``.

    Raises:
        DomainError: If ``beta t1 >= 1`` (the sell-side factor must stay
            positive).
    """
    bt1 = beta * t1
    if not (0.0 < bt1 < 1.0):
        raise DomainError(f"beta*t1 must be in (0, 1), got {bt1}")
    u = 1.0 + bt1
    v = 1.0 - bt1
    lhs = u * v / t1
    shared = (v + u) / (2.0 * t1) + beta * (v - u) / (v + u)
    signed = beta + (v - u) / (2.0 * t1)
    res1 = lhs - (signed + shared)
    res2 = lhs - (-signed + shared)
    return SlowLimitResult(
        residual=max(abs(res1), abs(res2)),
        impact_log=math.log1p(bt1) / a,
        impact_linear=bt1 / a,
    )


@dataclass(frozen=True)
class FixedQuoteLimits:
    """Long-run mode levels when the quotes never move."""

    intensity: ExpIntensity
    quotes: Quotes
    s: float
    beta: float
    horizon_T: float

    @property
    def t1(self) -> float:
        return characteristic_time(self.intensity, self.quotes.half_spread)

    def long_time(self) -> float:
        """Mode limit as t grows: the true price if the meta-order ends,
        otherwise shifted by arcsinh of the extra flow ``beta t1``."""
        if math.isfinite(self.horizon_T):
            return self.s
        a = self.intensity.a
        mid = self.quotes.mid
        return mid + math.asinh(math.sinh(a * (self.s - mid)) + self.beta * self.t1) / a

    def weak_prior(self, t: float, net_trades: int) -> float:
        """Mode for a flat prior: arcsinh of the time-averaged net flow."""
        if t <= 0:
            raise ValueError(f"t must be > 0, got {t}")
        a = self.intensity.a
        filled = math.floor(self.beta * min(t, self.horizon_T) * (1.0 + 1e-9))
        return self.quotes.mid + math.asinh((self.t1 / t) * (net_trades + filled)) / a


def fixed_quote_limits(
    prior: GaussianPrior,  # noqa: ARG001  (limits are prior-free; kept for symmetry)
    intensity: ExpIntensity,
    quotes: Quotes,
    s: float,
    beta: float,
    horizon_T: float,
) -> FixedQuoteLimits:
    """Closed-form mode limits under frozen quotes; see :class:`FixedQuoteLimits`."""
    return FixedQuoteLimits(
        intensity=intensity, quotes=quotes, s=s, beta=beta, horizon_T=horizon_T
    )


def analytic_overlays(exp: ImpactExperiment, times: Sequence[float]) -> dict:
    """All analytic impact curves for an experiment, keyed by regime.

    Pure delegation to the formula operations, so entries are bitwise
    identical to calling those directly.
    """
    t1 = characteristic_time(exp.intensity, exp.half_spread)
    out: dict = {
        "no_info": [
            ga.impact_no_info(
                exp.prior, exp.intensity, exp.half_spread, exp.sigma,
                exp.beta, float(t), exp.horizon_T,
            )
            for t in times
        ],
        "average": [
            ga.average_impact(
                exp.prior, exp.intensity, exp.half_spread, exp.sigma,
                exp.beta, exp.s0, float(t), exp.horizon_T,
            )
            for t in times
        ],
    }
    if exp.beta > 0:
        k_max = int(math.floor(exp.beta * min(exp.horizon_T, exp.horizon) * (1 + 1e-9)))
        out["recursion"] = impact_recursion(
            exp.prior, exp.intensity, exp.half_spread, exp.beta, k_max
        )
        out["slow"] = (
            slow_limit_residual(exp.beta, t1, exp.intensity.a)
            if exp.beta * t1 < 1.0
            else None
        )
    return out
