"""Quote policies and the argmax market maker's jump equation.

Three policies close the feedback loop between the filter and the quotes:
fixed quotes, mid at the posterior mean, and mid at the posterior mode.
For the mode policy with a fixed efficient price, the mode is a pure jump
process: between events the quotes are stable, and at each event the jump
solves a one-dimensional equation

    0 = -(xhat + dz - x0)/sigma0^2
        - (a / 2 t1) (e^{a(xhat+dz)} V - e^{-a(xhat+dz)} U)
        + a * net_jumps,

where U and V accumulate ``exp(+- a xhat_s)`` in time.  The left side is
strictly decreasing in the jump size, so the root is unique; it is found
by doubling out a bracket and running Newton safeguarded by bisection.

With meta-orders only (buys and sells cancelling), the same equation
becomes a deterministic recursion whose k-th term needs the sinh of the
impact: the arcsinh impact shape, with logarithmic (fast) and linear/flat
(slow) limits.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from ._rootfind import solve_monotone
from .errors import PolicyStateMismatch
from .gaussian import GaussianState
from .grid import FilterDiagnostics
from .model import ExpIntensity, GaussianPrior, Quotes, characteristic_time


class PolicyKind(enum.Enum):
    FIXED = "fixed"
    MID_AT_MEAN = "mid-mean"
    MID_AT_ARGMAX = "mid-argmax"


@dataclass(frozen=True)
class QuotePolicy:
    """How the market maker turns his posterior into quotes."""

    kind: PolicyKind
    half_spread: float = 0.0
    fixed: Quotes | None = None

    def __post_init__(self) -> None:
        if self.half_spread < 0:
            raise ValueError(f"half_spread must be >= 0, got {self.half_spread}")
        if (self.kind is PolicyKind.FIXED) != (self.fixed is not None):
            raise ValueError("fixed quotes are required exactly when kind is FIXED")

    @classmethod
    def fixed_quotes(cls, quotes: Quotes) -> "QuotePolicy":
        return cls(kind=PolicyKind.FIXED, half_spread=quotes.half_spread, fixed=quotes)

    @classmethod
    def mid_at_mean(cls, half_spread: float) -> "QuotePolicy":
        return cls(kind=PolicyKind.MID_AT_MEAN, half_spread=half_spread)

    @classmethod
    def mid_at_argmax(cls, half_spread: float) -> "QuotePolicy":
        return cls(kind=PolicyKind.MID_AT_ARGMAX, half_spread=half_spread)

    @classmethod
    def from_string(
        cls,
        name: str,
        half_spread: float = 0.0,
        fixed: Quotes | None = None,
    ) -> "QuotePolicy":
        kind = PolicyKind(name)
        if kind is PolicyKind.FIXED:
            if fixed is None:
                raise ValueError("policy 'fixed' needs explicit quotes")
            return cls.fixed_quotes(fixed)
        return cls(kind=kind, half_spread=half_spread)


def quotes_from_posterior(policy: QuotePolicy, state) -> Quotes:
    """Quotes implied by the policy and a posterior summary.

    ``state`` may be a :class:`FilterDiagnostics`, a :class:`GaussianState`
    (whose mode equals its mean) or an :class:`ArgmaxMMState`.

    Raises:
        PolicyStateMismatch: When the state does not carry the statistic
            the policy needs.
    """
    if policy.kind is PolicyKind.FIXED:
        assert policy.fixed is not None
        return policy.fixed
    if policy.kind is PolicyKind.MID_AT_MEAN:
        if isinstance(state, (FilterDiagnostics, GaussianState)):
            return Quotes.around(state.mean, policy.half_spread)
        raise PolicyStateMismatch(f"mid-mean policy cannot read {type(state).__name__}")
    if isinstance(state, ArgmaxMMState):
        return Quotes.around(state.xhat, policy.half_spread)
    if isinstance(state, FilterDiagnostics):
        return Quotes.around(state.argmax, policy.half_spread)
    if isinstance(state, GaussianState):
        return Quotes.around(state.mean, policy.half_spread)
    raise PolicyStateMismatch(f"mid-argmax policy cannot read {type(state).__name__}")


_SINH_CAP = 700.0


def _sinh(w: float) -> float:
    return math.sinh(max(-_SINH_CAP, min(_SINH_CAP, w)))


def _cosh(w: float) -> float:
    return math.cosh(max(-_SINH_CAP, min(_SINH_CAP, w)))


@dataclass
class ArgmaxMMState:
    """Running state of the mid-at-mode market maker (single owner).

    The exponential time integrals are stored relative to the prior mean
    (``u_integral = integral exp(+a (xhat_s - x0)) ds`` and ``v_integral``
    its mirror); the centering constants cancel in the jump equation and
    keep ``exp`` in range for prices far from zero.
    """

    xhat: float
    t: float = 0.0
    u_integral: float = 0.0
    v_integral: float = 0.0
    net_jumps: int = 0

    @classmethod
    def initial(cls, prior: GaussianPrior) -> "ArgmaxMMState":
        return cls(xhat=prior.x0)

    def accumulate(self, until: float, prior: GaussianPrior, intensity: ExpIntensity) -> None:
        """Extend the time integrals to ``until`` (xhat is constant between events)."""
        if until < self.t:
            raise ValueError(f"cannot accumulate backwards: {until} < {self.t}")
        span = until - self.t
        z = intensity.a * (self.xhat - prior.x0)
        self.u_integral += span * math.exp(min(z, _SINH_CAP))
        self.v_integral += span * math.exp(min(-z, _SINH_CAP))
        self.t = until


def jump_equation(
    state: ArgmaxMMState,
    prior: GaussianPrior,
    intensity: ExpIntensity,
    half_spread: float,
    net: int,
):
    """Stationarity function of the mode and its derivative, in jump offset.

    Returns ``(f, fprime)`` with ``f(z) = 0`` characterizing
    ``xhat_new = x0 + z`` given cumulative net order flow ``net``.
    ``fprime`` is strictly negative everywhere, so the root is unique.
    """
    a = intensity.a
    t1 = characteristic_time(intensity, half_spread)
    inv_var = 1.0 / prior.variance
    u, v = state.u_integral, state.v_integral

    def f(z: float) -> float:
        az = a * z
        ez = math.exp(min(az, _SINH_CAP))
        emz = math.exp(min(-az, _SINH_CAP))
        return -z * inv_var - (a / (2.0 * t1)) * (ez * v - emz * u) + a * net

    def fprime(z: float) -> float:
        az = a * z
        ez = math.exp(min(az, _SINH_CAP))
        emz = math.exp(min(-az, _SINH_CAP))
        return -inv_var - (a * a / (2.0 * t1)) * (ez * v + emz * u)

    return f, fprime


def argmax_jump(
    state: ArgmaxMMState,
    prior: GaussianPrior,
    intensity: ExpIntensity,
    half_spread: float,
    t: float,
    sign: int,
) -> ArgmaxMMState:
    """Process one event at time ``t`` and return the post-jump state.

    Accumulates the exponential integrals up to ``t``, then solves the
    stationarity equation with the event added to the net order flow.

    Raises:
        NoConvergence: If the safeguarded Newton fails (pathological
            parameters).
    """
    if sign not in (-1, 1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    state.accumulate(t, prior, intensity)
    net = state.net_jumps + sign
    f, fprime = jump_equation(state, prior, intensity, half_spread, net)
    z0 = state.xhat - prior.x0
    z = solve_monotone(f, fprime, x0=z0, step=1.0 / intensity.a, tol=1e-12)
    state.xhat = prior.x0 + z
    state.net_jumps = net
    return state


def impact_recursion(
    prior: GaussianPrior,
    intensity: ExpIntensity,
    half_spread: float,
    beta: float,
    k_max: int,
) -> list[float]:
    """Deterministic mode path under a pure meta-order (buys = sells otherwise).

    Solves, for each k = 1..k_max, the scalar equation

        k = (xhat_k - x0) / (a sigma0^2)
            + (1 / (beta t1)) sum_{i<k} sinh(a (xhat_k - xhat_i))

    whose left side is strictly increasing in ``xhat_k``.  Returns the
    mode values right after each meta order, i.e. at times k/beta.
    """
    if k_max < 0:
        raise ValueError(f"k_max must be >= 0, got {k_max}")
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    a = intensity.a
    t1 = characteristic_time(intensity, half_spread)
    bt1 = beta * t1
    inv = 1.0 / (a * prior.variance)
    zs: list[float] = [0.0]  # z_0 = 0: the mode starts at the prior mean
    out: list[float] = []
    for k in range(1, k_max + 1):
        def f(z: float, _k=k) -> float:
            return z * inv + sum(_sinh(a * (z - zi)) for zi in zs) / bt1 - _k

        def fprime(z: float) -> float:
            return inv + a * sum(_cosh(a * (z - zi)) for zi in zs) / bt1

        guess = zs[-1]
        step = (math.asinh(2.0 * k * bt1) + 1.0) / a
        z = solve_monotone(f, fprime, x0=guess, step=step, tol=1e-12)
        zs.append(z)
        out.append(prior.x0 + z)
    return out
