"""Core domain types and the intensity-function algebra.

The market model is built around an exponential arrival intensity for
aggressive orders: the closer a quote sits to the latent efficient price,
the more often it gets hit.  Everything downstream (filtering, quote
feedback, impact formulas) leans on two structural facts about that
exponential shape, exposed here as numeric residual checks:

* a trade moves the posterior in a way that does not depend on where the
  quotes are (``property_a_residual``);
* between trades the decay potential splits into a mid-price well whose
  depth is set only by the spread (``property_b_residual``).

Both residuals vanish only for exponential intensities; the companion
helper ``decomposition_misfit`` quantifies the failure for any other
intensity shape.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import NonFiniteIntegral


class Side(enum.Enum):
    """Side of an aggressive order: ASK = buy trade, BID = sell trade."""

    ASK = "ask"
    BID = "bid"


class Source(enum.Enum):
    """Origin of a trade: random market taker or deterministic meta-order."""

    OPPORTUNISTIC = "opportunistic"
    META = "meta"


@dataclass(frozen=True)
class ExpIntensity:
    """Order-arrival intensity ``lambda0 * exp(-a * d)``.

    Args:
        lambda0: Base rate at zero distance (events per unit time, > 0).
        a: Inverse-distance scale (1/price units, > 0).
    """

    lambda0: float
    a: float

    def __post_init__(self) -> None:
        if not (self.lambda0 > 0):
            raise ValueError(f"lambda0 must be > 0, got {self.lambda0}")
        if not (self.a > 0):
            raise ValueError(f"a must be > 0, got {self.a}")

    def evaluate(self, d):
        """Arrival rate at signed distance ``d`` (quote minus efficient price).

        Negative ``d`` is allowed: the rate grows when the quote crosses
        the efficient price.  Accepts scalars or arrays.
        """
        return self.lambda0 * np.exp(-self.a * d)


def evaluate(intensity: ExpIntensity, d):
    """Functional form of :meth:`ExpIntensity.evaluate`."""
    return intensity.evaluate(d)


def characteristic_time(intensity: ExpIntensity, half_spread: float) -> float:
    """Relaxation time of the posterior toward the mid-price between trades.

    Equals ``exp(a * half_spread) / (2 * lambda0)``: a wide spread or a low
    base rate means trades are rare and learning from their absence is slow.
    """
    if half_spread < 0:
        raise ValueError(f"half_spread must be >= 0, got {half_spread}")
    return math.exp(intensity.a * half_spread) / (2.0 * intensity.lambda0)


@dataclass(frozen=True)
class IntensityClip:
    """Bounds applied to the intensity inside simulation modules.

    ``lam_max`` doubles as the thinning envelope.  The default cap sits
    ``w_clip`` price units into the money, ten e-folds by default, so the
    clip never binds at distances a simulation actually visits.
    """

    lam_min: float = 1e-8
    w_clip: float | None = None

    def lam_max(self, intensity: ExpIntensity) -> float:
        w = self.w_clip if self.w_clip is not None else 10.0 / intensity.a
        return intensity.lambda0 * math.exp(intensity.a * w)

    def clip(self, intensity: ExpIntensity, rate):
        return np.clip(rate, self.lam_min, self.lam_max(intensity))


@dataclass(frozen=True)
class PriceModel:
    """Diffusion model for the latent efficient price.

    ``mu`` is kept for completeness but the learning formulas assume it is
    zero; ``sigma`` is the (known) volatility and ``s0`` the starting price.
    """

    mu: float = 0.0
    sigma: float = 0.0
    s0: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class Quotes:
    """Best bid and ask."""

    bid: float
    ask: float

    def __post_init__(self) -> None:
        if self.ask < self.bid:
            raise ValueError(f"ask ({self.ask}) must be >= bid ({self.bid})")

    @property
    def mid(self) -> float:
        return 0.5 * (self.ask + self.bid)

    @property
    def half_spread(self) -> float:
        return 0.5 * (self.ask - self.bid)

    @classmethod
    def around(cls, mid: float, half_spread: float) -> "Quotes":
        return cls(bid=mid - half_spread, ask=mid + half_spread)


@dataclass(frozen=True)
class TradeEvent:
    """One aggressive order: time, side and whether it came from a meta-order."""

    time: float
    side: Side
    source: Source = Source.OPPORTUNISTIC

    def __post_init__(self) -> None:
        if self.time < 0:
            raise ValueError(f"event time must be >= 0, got {self.time}")

    @property
    def sign(self) -> int:
        """+1 for ask-side (buy) events, -1 for bid-side (sell) events."""
        return 1 if self.side is Side.ASK else -1


@dataclass(frozen=True)
class GaussianPrior:
    """Initial belief about the efficient price: N(x0, sigma0^2)."""

    x0: float
    sigma0: float

    def __post_init__(self) -> None:
        if not (self.sigma0 > 0):
            raise ValueError(f"sigma0 must be > 0, got {self.sigma0}")

    @property
    def variance(self) -> float:
        return self.sigma0 ** 2

    def density(self, x):
        z = (np.asarray(x, dtype=float) - self.x0) / self.sigma0
        return np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * self.sigma0)


def property_a_residual(
    intensity: Callable[[np.ndarray], np.ndarray] | ExpIntensity,
    density,
    z_values: Sequence[float],
) -> float:
    """How much the post-trade posterior depends on the trade price.

    For each quote level ``z`` the post-trade density is
    ``lam(z - x) m(x) / integral(lam(z - y) m(y) dy)``.  Returns the max
    over grid nodes of the max pairwise deviation across ``z`` values;
    zero (up to roundoff) exactly when the intensity is exponential, so a
    trade carries the same information whatever the quotes were.

    Args:
        intensity: Positive decreasing rate function of distance, or an
            :class:`ExpIntensity`.
        density: A normalized, strictly positive grid density (any object
            with ``x`` and ``values`` array attributes).
        z_values: Quote levels to compare.

    Raises:
        NonFiniteIntegral: If a normalizing integral overflows or vanishes.
    """
    lam = intensity.evaluate if isinstance(intensity, ExpIntensity) else intensity
    x = np.asarray(density.x, dtype=float)
    m = np.asarray(density.values, dtype=float)
    zs = list(z_values)
    if len(zs) < 2:
        return 0.0
    posteriors = []
    for z in zs:
        w = lam(z - x) * m
        denom = np.trapezoid(w, x)
        if not np.isfinite(denom) or denom <= 0:
            raise NonFiniteIntegral(f"post-trade normalizer at z={z} is {denom}")
        posteriors.append(w / denom)
    q = np.stack(posteriors)
    return float(np.max(np.abs(q[:, None, :] - q[None, :, :])))


def property_b_residual(
    intensity: ExpIntensity,
    triples: Iterable[tuple[float, float, float]],
) -> float:
    """Residual of the mid/spread split of the between-trades potential.

    Checks ``-(lam(s_a - x) + lam(x - s_b) - 2)`` against
    ``h(s_a, s_b) - g(x - mid) * f(delta)`` with the exponential
    decomposition ``h = -2 (lambda0 e^{-a delta} - 1)``,
    ``f = 2 lambda0 e^{-a delta}`` and ``g(y) = cosh(a y) - 1``.
    Returns the max absolute residual over the triples; an algebraic
    identity (so roundoff-level) for exponential intensities.
    """
    lam0, a = intensity.lambda0, intensity.a
    worst = 0.0
    for x, s_a, s_b in triples:
        if s_a < s_b:
            raise ValueError(f"triple has s_a < s_b: ({x}, {s_a}, {s_b})")
        mid = 0.5 * (s_a + s_b)
        delta = 0.5 * (s_a - s_b)
        lhs = -(intensity.evaluate(s_a - x) + intensity.evaluate(x - s_b) - 2.0)
        h = -2.0 * (lam0 * math.exp(-a * delta) - 1.0)
        f = 2.0 * lam0 * math.exp(-a * delta)
        g = math.cosh(a * (x - mid)) - 1.0
        worst = max(worst, abs(lhs - (h - g * f)))
    return worst


def decomposition_misfit(
    lam: Callable[[float], float],
    mid: float,
    y1: float,
    y2: float,
    d1: float,
    d2: float,
) -> float:
    """Fit the mid/spread decomposition on three points; test it on a fourth.

    At spread ``d1`` the decomposition is anchored exactly (``h`` from the
    potential at the mid, ``g`` at offsets ``y1`` and ``y2`` with the scale
    convention ``f(d1) = 1``); at spread ``d2`` the remaining freedom
    ``f(d2)`` is fit at offset ``y1``.  Returns the absolute prediction
    error at the fourth point ``(y2, d2)``: zero only when the potential
    actually separates, which forces an exponential intensity.
    """

    def potential(y: float, d: float) -> float:
        return -(lam(mid + d - (mid + y)) + lam((mid + y) - (mid - d)) - 2.0)

    g1 = potential(0.0, d1) - potential(y1, d1)
    g2 = potential(0.0, d1) - potential(y2, d1)
    if g1 == 0.0:
        raise ValueError("degenerate stencil: potential flat at (y1, d1)")
    f2 = (potential(0.0, d2) - potential(y1, d2)) / g1
    predicted = potential(0.0, d2) - g2 * f2
    return abs(potential(y2, d2) - predicted)
