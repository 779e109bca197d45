"""Self-verification suite: every release criterion as one runnable check.

Each check returns a :class:`CheckResult` with the measured value and its
tolerance; ``run_verify`` runs them all against a :class:`RunConfig`
(respecting overrides such as a forced grid size or a zero volatility,
in which case volatility-dependent checks report as skipped), prints one
line per criterion and fails the process if any check fails.

The same functions back ``tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import gaussian as ga
from .config import RunConfig
from .flow import MetaOrderSchedule, PricePath, meta_events, replica_rng, simulate_trades
from .grid import (
    GridDensity,
    GridFilter,
    QuoteHistory,
    apply_trade,
    asymptotic_between_trades,
    closed_form_fixed_price,
    diagnostics,
    normalize,
    run_fixed_step_filter,
)
from .impact import ImpactCurve, ImpactExperiment, run_experiment, slow_limit_residual
from .maker import impact_recursion
from .model import (
    ExpIntensity,
    GaussianPrior,
    IntensityClip,
    PriceModel,
    Quotes,
    Side,
    TradeEvent,
    characteristic_time,
)

DEFAULT_VERIFY_SEED = 20260810
_DEFAULTS = RunConfig()


@dataclass(frozen=True)
class CheckResult:
    criterion: int
    name: str
    status: str  # "pass" | "fail" | "skip"
    measured: str
    tolerance: str
    detail: str = ""
    seconds: float = 0.0


@dataclass(frozen=True)
class VerifyReport:
    results: tuple[CheckResult, ...]

    @property
    def ok(self) -> bool:
        return all(r.status != "fail" for r in self.results)


def _result(criterion, name, passed, measured, tolerance, detail="", t0=None):
    return CheckResult(
        criterion=criterion,
        name=name,
        status="pass" if passed else "fail",
        measured=measured,
        tolerance=tolerance,
        detail=detail,
        seconds=0.0 if t0 is None else time.perf_counter() - t0,
    )


def _skip(criterion, name, why):
    return CheckResult(criterion, name, "skip", "-", "-", why)


# ---------------------------------------------------------------------------
# 1. Fixed-price oracle equivalence + grid refinement
# ---------------------------------------------------------------------------

def _random_sequence(rng: np.random.Generator, horizon: float):
    """Random piecewise-constant quotes and a random two-sided trade stream."""
    n_changes = 4
    starts = np.concatenate(([0.0], np.sort(rng.uniform(0.0, horizon, n_changes))))
    mid = 0.0
    segments = []
    for s in starts:
        delta = rng.uniform(0.06, 0.14)
        segments.append((float(s), Quotes.around(mid, delta)))
        mid += rng.normal(0.0, 0.008)
    qh = QuoteHistory(segments)
    n_trades = rng.poisson(40.0 * horizon)
    times = np.sort(rng.uniform(1e-6, horizon, n_trades))
    sides = rng.uniform(size=n_trades) < 0.5
    trades = [
        TradeEvent(time=float(t), side=Side.ASK if up else Side.BID)
        for t, up in zip(times, sides)
    ]
    return qh, trades


def _oracle_l1(intensity, prior, qh, trades, horizon, dx, dt, x_ref, oracle_ref):
    half = 0.6
    n = int(round(2 * half / dx)) + 1
    dens = GridDensity.from_gaussian(prior, -half, 2 * half / (n - 1), n)
    final = run_fixed_step_filter(
        dens, PriceModel(sigma=0.0), intensity, qh, trades, horizon, dt
    )
    interp = np.interp(x_ref, final.x, final.values)
    return float(np.trapezoid(np.abs(interp - oracle_ref), x_ref))


def check_closed_form_oracle(
    n_sequences: int = 20,
    seed: int = DEFAULT_VERIFY_SEED,
    grid_n_override: int | None = None,
) -> CheckResult:
    """Criterion 1: stepping pipeline vs the exact fixed-price solution.

    L1 on a 8x-refined reference grid must be < 1e-3 for every random
    sequence at (dx, dt) = (1e-3, 1e-4), and halving the space-time grid
    must reduce the mean L1 by a factor in [0.2, 0.8].
    """
    t0 = time.perf_counter()
    intensity = ExpIntensity(50.0, 5.0)
    prior = GaussianPrior(0.0, 0.05)
    horizon = 0.25
    half = 0.6
    dx = 1e-3 if grid_n_override is None else 2 * half / (grid_n_override - 1)
    dt = 1e-4
    dx_ref = 1e-3 / 8.0
    n_ref = int(round(2 * half / dx_ref)) + 1
    x_ref = -half + dx_ref * np.arange(n_ref)
    ref_prior = GridDensity.from_gaussian(prior, -half, dx_ref, n_ref)

    l1_base, l1_half = [], []
    for i in range(n_sequences):
        rng = replica_rng(seed, 1000 + i)
        qh, trades = _random_sequence(rng, horizon)
        oracle = normalize(
            closed_form_fixed_price(ref_prior, qh, trades, intensity, horizon)
        ).values
        l1_base.append(
            _oracle_l1(intensity, prior, qh, trades, horizon, dx, dt, x_ref, oracle)
        )
        l1_half.append(
            _oracle_l1(intensity, prior, qh, trades, horizon, dx / 2, dt / 2, x_ref, oracle)
        )
    worst = max(l1_base)
    ratio = float(np.mean(l1_half) / np.mean(l1_base))
    passed = worst < 1e-3 and 0.2 <= ratio <= 0.8
    return _result(
        1, "closed-form oracle", passed,
        f"max L1={worst:.3e}, refine ratio={ratio:.2f}",
        "L1 < 1e-3, ratio in [0.2, 0.8]",
        f"{n_sequences} random quote/trade sequences", t0,
    )


# ---------------------------------------------------------------------------
# 2. Gaussian jump law
# ---------------------------------------------------------------------------

def check_gaussian_jump(a: float = 5.0, sigma_bar: float = 0.05) -> CheckResult:
    """Criterion 2: an ask trade shifts a Gaussian posterior mean by a*sigma^2."""
    t0 = time.perf_counter()
    intensity = ExpIntensity(50.0, a)
    prior = GaussianPrior(100.0, sigma_bar)
    half = 12 * sigma_bar
    n = 4001
    dens = GridDensity.from_gaussian(prior, 100.0 - half, 2 * half / (n - 1), n)
    quotes = Quotes.around(100.0, 0.1)
    post = normalize(apply_trade(dens, quotes, intensity, Side.ASK))
    shift = diagnostics(post).mean - 100.0
    expected = a * sigma_bar ** 2
    tol = 3 * dens.dx
    err = abs(shift - expected)
    return _result(
        2, "gaussian jump law", err < tol,
        f"shift={shift:.6f} vs {expected:.6f} (err={err:.2e})",
        f"|err| < 3 dx = {tol:.1e}", "", t0,
    )


# ---------------------------------------------------------------------------
# 3. Dirac concentration between trades
# ---------------------------------------------------------------------------

def check_dirac_profile() -> CheckResult:
    """Criterion 3: posterior matches the concentration profile at 50 t1
    (L1 < 0.01) and its variance has collapsed to < 5% of the t1 value."""
    t0 = time.perf_counter()
    intensity = ExpIntensity(50.0, 5.0)
    prior = GaussianPrior(0.0, 0.5)
    quotes = Quotes.around(0.0, 0.1)
    t1 = characteristic_time(intensity, quotes.half_spread)
    half = 12 * prior.sigma0
    n = 4001
    dens = GridDensity.from_gaussian(prior, -half, 2 * half / (n - 1), n)
    filt = GridFilter(dens, PriceModel(sigma=0.0), intensity, dt=0.1 * t1)
    filt.advance(quotes, t1)
    var_t1 = filt.diagnostics().variance
    filt.advance(quotes, 49.0 * t1)
    filt.renormalize()
    var_t50 = filt.diagnostics().variance
    posterior = filt.density()
    profile = asymptotic_between_trades(dens, quotes, intensity, 50.0 * t1)
    l1 = float(np.trapezoid(np.abs(posterior.values - profile.values), posterior.x))
    var_ratio = var_t50 / var_t1
    passed = l1 < 0.01 and var_ratio < 0.05
    return _result(
        3, "dirac concentration", passed,
        f"L1={l1:.4f}, var ratio={var_ratio:.4f}",
        "L1 < 0.01, var ratio < 0.05", "", t0,
    )


# ---------------------------------------------------------------------------
# 4. Brownian-price posterior variance
# ---------------------------------------------------------------------------

def check_variance_law(sigma: float = 0.06) -> CheckResult:
    """Criterion 4: closed-form variance vs direct ODE integration
    (max relative error < 1e-8) and the stationary value sigma sqrt(t1)/a."""
    t0 = time.perf_counter()
    if sigma == 0.0:
        return _skip(4, "variance law", "sigma = 0: Brownian-variance check not applicable")
    intensity = ExpIntensity(50.0, 5.0)
    delta = 0.1
    t1 = characteristic_time(intensity, delta)
    worst = 0.0
    for sigma0 in (0.05, 0.02):  # one start above, one below the fixed point
        prior = GaussianPrior(0.0, sigma0)
        sol = solve_ivp(
            lambda _t, y: [ga.variance_ode_rhs(y[0], intensity, delta, sigma)],
            [0.0, 3.0],
            [prior.variance],
            rtol=1e-12,
            atol=1e-16,
            dense_output=True,
            method="RK45",
        )
        ts = np.linspace(0.0, 3.0, 301)
        ode_vals = sol.sol(ts)[0]
        closed = np.array(
            [ga.variance_at(prior, intensity, delta, sigma, float(t)) for t in ts]
        )
        worst = max(worst, float(np.max(np.abs(closed - ode_vals) / ode_vals)))
    sinf2 = ga.stationary_variance(intensity, delta, sigma)
    sinf_err = abs(sinf2 / 1.54083e-3 - 1.0)
    passed = worst < 1e-8 and sinf_err < 1e-5
    return _result(
        4, "variance law", passed,
        f"max rel err={worst:.2e}, sigma_inf^2={sinf2:.6e}",
        "rel err < 1e-8, sigma_inf^2 ~ 1.54083e-3", "", t0,
    )


# ---------------------------------------------------------------------------
# 5. Quote stability
# ---------------------------------------------------------------------------

def check_quote_stability() -> CheckResult:
    """Criterion 5: mean-pegged mid does not move between trades (sigma=0)."""
    t0 = time.perf_counter()
    intensity = ExpIntensity(50.0, 5.0)
    prior = GaussianPrior(100.0, 0.05)
    delta = 0.1
    t1 = characteristic_time(intensity, delta)
    half = 12 * prior.sigma0
    n = 4001
    dens = GridDensity.from_gaussian(prior, 100.0 - half, 2 * half / (n - 1), n)
    filt = GridFilter(dens, PriceModel(sigma=0.0), intensity, dt=0.1 * t1)
    worst = 0.0
    for _ in range(100):  # 100 steps of 0.1 t1 -> [0, 10 t1]
        mid = filt.diagnostics().mean
        worst = max(worst, abs(mid - 100.0))
        filt.advance(Quotes.around(mid, delta), 0.1 * t1)
    worst = max(worst, abs(filt.diagnostics().mean - 100.0))
    tol = 5 * dens.dx
    return _result(
        5, "quote stability", worst < tol,
        f"max |mid - mid0| = {worst:.2e}",
        f"< 5 dx = {tol:.1e}", "", t0,
    )


# ---------------------------------------------------------------------------
# 6. Impact regimes: slow, fast, arcsinh
# ---------------------------------------------------------------------------

def check_impact_regimes() -> CheckResult:
    """Criterion 6: slow-limit residual and impact limit; fast-regime log
    law within 5% for k <= 10; first/second jump arcsinh values to 1e-6."""
    t0 = time.perf_counter()
    fails: list[str] = []

    # (i) slow limit: exact constant solution, impact -> beta t1 / a
    res = slow_limit_residual(beta=0.1, t1=1.0, a=5.0)
    if not res.residual < 1e-14:
        fails.append(f"slow residual {res.residual:.2e}")
    res_small = slow_limit_residual(beta=1e-4, t1=1.0, a=5.0)
    if not abs(res_small.impact_log / res_small.impact_linear - 1.0) < 1e-4:
        fails.append("slow impact does not tend to beta t1 / a")

    # (ii) fast regime: beta t1 = 1e3, a^2 sigma0^2 / (beta t1) = 1e4
    intensity = ExpIntensity(50.0, 5.0)
    delta = 0.1
    t1 = characteristic_time(intensity, delta)
    beta_fast = 1e3 / t1
    sigma0 = math.sqrt(1e4 * 1e3) / intensity.a
    fast = impact_recursion(GaussianPrior(0.0, sigma0), intensity, delta, beta_fast, 10)
    worst_fast = 0.0
    for k, xk in enumerate(fast, start=1):
        target = math.log(2.0 * k * 1e3) / intensity.a
        worst_fast = max(worst_fast, abs(xk - target) / target)
    if not worst_fast < 0.05:
        fails.append(f"fast regime off by {worst_fast:.3f}")

    # (iii) arcsinh steps at sigma0 = 1e6
    beta = 10.0
    bt1 = beta * t1
    steps = impact_recursion(GaussianPrior(0.0, 1e6), intensity, delta, beta, 2)
    first_err = abs(steps[0] - math.asinh(bt1) / intensity.a)
    p = 1.0 + math.sqrt(1.0 + bt1 * bt1)
    second_target = math.asinh(bt1 * (1.0 + math.sqrt(1.0 - 1.5 / p))) / intensity.a
    second_err = abs(steps[1] - second_target)
    if not first_err < 1e-6:
        fails.append(f"first jump err {first_err:.2e}")
    if not second_err < 1e-6:
        fails.append(f"second jump err {second_err:.2e}")

    return _result(
        6, "impact regimes", not fails,
        f"slow res={res.residual:.1e}, fast err={worst_fast:.4f}, "
        f"jump errs=({first_err:.1e}, {second_err:.1e})",
        "res < 1e-14; 5%; 1e-6",
        "; ".join(fails), t0,
    )


# ---------------------------------------------------------------------------
# 7. Fixed-quote long-run mode
# ---------------------------------------------------------------------------

def check_fixed_quote_limit(replicas: int = 64, seed: int = DEFAULT_VERIFY_SEED) -> CheckResult:
    """Criterion 7: Monte-Carlo mode at t = 100 t1 vs the arcsinh limit."""
    t0 = time.perf_counter()
    intensity = ExpIntensity(50.0, 5.0)
    delta = 0.1
    beta = 10.0
    quotes = Quotes.around(0.0, delta)
    s = 0.0  # efficient price at the mid
    t1 = characteristic_time(intensity, delta)
    horizon = 100.0 * t1
    limit = quotes.mid + math.asinh(math.sinh(0.0) + beta * t1) / intensity.a

    prior = GaussianPrior(0.0, 10.0)  # weak prior: the limit is prior-free
    half, n = 0.5, 1001
    dens = GridDensity.from_gaussian(prior, -half, 2 * half / (n - 1), n)
    qh = QuoteHistory.constant(quotes)
    metas = meta_events(MetaOrderSchedule(beta, math.inf), horizon=horizon)
    frozen = PricePath(times=np.array([0.0, horizon]), values=np.array([s, s]))
    clip = IntensityClip(w_clip=1.0 / intensity.a)  # tight envelope: distances are frozen
    modes = []
    for i in range(replicas):
        rng = replica_rng(seed, 2000 + i)
        trades = simulate_trades(frozen, lambda _t: quotes, intensity, horizon, rng, clip=clip)
        posterior = closed_form_fixed_price(
            dens, qh, list(trades) + metas, intensity, horizon
        )
        modes.append(diagnostics(posterior).argmax)
    err = abs(float(np.mean(modes)) - limit)
    return _result(
        7, "fixed-quote limit", err < 1e-2,
        f"mode={float(np.mean(modes)):.5f} vs limit={limit:.5f} (err={err:.2e})",
        "err < 1e-2", f"{replicas} replicas", t0,
    )


# ---------------------------------------------------------------------------
# 8. Meta-order figure study (structural)
# ---------------------------------------------------------------------------

def _figure_experiment(a: float, replicas: int, seed: int, sigma: float,
                       grid_n: int, workers: int) -> ImpactExperiment:
    return ImpactExperiment(
        intensity=ExpIntensity(50.0, a),
        half_spread=0.1,
        sigma=sigma,
        prior=GaussianPrior(100.0, 0.05),
        s0=100.0,
        beta=10.0,
        horizon_T=2.5,
        horizon=2.5,
        replicas=replicas,
        seed=seed,
        policy="mid-mean",
        filter_kind="grid",
        grid_n=grid_n,
        w_clip=5.0,
        n_output_times=25,
        workers=workers,
    )


def check_figure_study(
    replicas: int = 200,
    seed: int = DEFAULT_VERIFY_SEED,
    sigma: float = 0.06,
    grid_n: int = 1601,
    workers: int = 1,
) -> tuple[CheckResult, ImpactCurve | None, ImpactCurve | None]:
    """Criterion 8: simulated mean impact within 3 stderr of the averaged
    overlay for a = 5 at all output times; the a = 20 run deviates more.

    Both claims are about the Brownian-price experiment: with the
    volatility forced to zero the a = 20 approximation error no longer
    dominates (measured 0.0035 vs 0.0038 at 200 replicas), so a zero
    sigma reports a skip rather than a spurious failure.
    """
    t0 = time.perf_counter()
    if sigma == 0.0:
        return (
            _skip(8, "figure study", "sigma = 0: the two-regime study needs a Brownian price"),
            None,
            None,
        )
    curve5 = run_experiment(_figure_experiment(5.0, replicas, seed, sigma, grid_n, workers))
    curve20 = run_experiment(_figure_experiment(20.0, replicas, seed, sigma, grid_n, workers))

    dev5 = np.abs(curve5.mean_impact - curve5.overlay)
    dev20 = np.abs(curve20.mean_impact - curve20.overlay)
    bands = np.maximum(3.0 * curve5.stderr, 1e-12)
    worst_sigmas = float(np.max(dev5 / bands)) * 3.0
    ordered = float(np.max(dev20)) > float(np.max(dev5))
    passed = bool(np.all(dev5 <= bands)) and ordered
    result = _result(
        8, "figure study", passed,
        f"max dev (a=5) = {worst_sigmas:.2f} stderr; "
        f"max|dev| a=20/a=5 = {np.max(dev20):.4f}/{np.max(dev5):.4f}",
        "<= 3 stderr; a=20 exceeds a=5",
        f"{replicas} replicas each", t0,
    )
    return result, curve5, curve20


# ---------------------------------------------------------------------------
# 9. Boundedness and linearity of the averaged impact
# ---------------------------------------------------------------------------

def check_impact_shape(sigma: float = 0.06) -> CheckResult:
    """Criterion 9: averaged impact concave increasing and bounded by
    beta t1 / a; overlays exactly linear in the trading speed."""
    t0 = time.perf_counter()
    if sigma == 0.0:
        return _skip(9, "impact shape", "sigma = 0: stationary-variance start undefined")
    intensity = ExpIntensity(50.0, 5.0)
    delta = 0.1
    beta = 10.0
    t1 = characteristic_time(intensity, delta)
    sinf2 = ga.stationary_variance(intensity, delta, sigma)
    prior = GaussianPrior(100.0, math.sqrt(sinf2))
    ts = np.linspace(0.0, 3.0, 121)
    b = np.array(
        [
            ga.average_impact(prior, intensity, delta, sigma, beta, 100.0, float(t))[1]
            for t in ts
        ]
    )
    bound = beta * t1 / intensity.a
    increasing = bool(np.all(np.diff(b) > 0))
    concave = bool(np.all(np.diff(b, 2) < 1e-12))
    bounded = bool(np.all(b <= bound * (1 + 1e-12)))

    linear_ok = True
    for t in (0.3, 1.0, 2.7):
        base = ga.average_impact(prior, intensity, delta, sigma, beta, 100.0, t)[1]
        double = ga.average_impact(prior, intensity, delta, sigma, 2 * beta, 100.0, t)[1]
        ni_base = ga.impact_no_info(prior, intensity, delta, sigma, beta, t)
        ni_double = ga.impact_no_info(prior, intensity, delta, sigma, 2 * beta, t)
        if double != 2.0 * base or ni_double != 2.0 * ni_base:
            linear_ok = False
    passed = increasing and concave and bounded and linear_ok
    return _result(
        9, "impact shape", passed,
        f"increasing={increasing}, concave={concave}, bounded={bounded}, "
        f"linear={linear_ok}, B_inf/{{beta t1/a}}={b[-1] / bound:.4f}",
        "all true", "", t0,
    )


# ---------------------------------------------------------------------------
# 10. Reproducibility
# ---------------------------------------------------------------------------

def check_reproducibility(seed: int = DEFAULT_VERIFY_SEED) -> CheckResult:
    """Criterion 10: identical seed + config give bit-identical curves."""
    t0 = time.perf_counter()
    exp = ImpactExperiment(
        intensity=ExpIntensity(50.0, 5.0),
        half_spread=0.1,
        sigma=0.06,
        prior=GaussianPrior(100.0, 0.05),
        s0=100.0,
        beta=10.0,
        horizon_T=0.4,
        horizon=0.4,
        replicas=3,
        seed=seed,
        grid_n=801,
        n_output_times=8,
    )
    c1 = run_experiment(exp)
    c2 = run_experiment(exp)
    identical = (
        np.array_equal(c1.mean_impact, c2.mean_impact)
        and np.array_equal(c1.stderr, c2.stderr)
        and np.array_equal(c1.overlay, c2.overlay)
    )
    return _result(
        10, "reproducibility", identical,
        "bit-identical" if identical else "runs differ",
        "bit-identical", "", t0,
    )


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

def run_verify(cfg: RunConfig | None = None) -> VerifyReport:
    """Run every criterion under the given config's overrides."""
    if cfg is None:
        cfg = RunConfig()
    seed = cfg.seed if cfg.seed is not None else DEFAULT_VERIFY_SEED
    grid_override = cfg.grid_n if cfg.grid_n != _DEFAULTS.grid_n else None
    replicas = cfg.replicas
    results = [
        check_closed_form_oracle(seed=seed, grid_n_override=grid_override),
        check_gaussian_jump(),
        check_dirac_profile(),
        check_variance_law(sigma=cfg.sigma),
        check_quote_stability(),
        check_impact_regimes(),
        check_fixed_quote_limit(replicas=max(8, replicas // 3), seed=seed),
        check_figure_study(
            replicas=replicas, seed=seed, sigma=cfg.sigma,
            grid_n=grid_override or 1601, workers=cfg.workers,
        )[0],
        check_impact_shape(sigma=cfg.sigma),
        check_reproducibility(seed=seed),
    ]
    return VerifyReport(results=tuple(results))


def format_report(report: VerifyReport) -> str:
    lines = [
        f"{'#':>2}  {'criterion':<22} {'status':<6} {'time':>7}  measured  (tolerance)",
        "-" * 100,
    ]
    for r in report.results:
        lines.append(
            f"{r.criterion:>2}  {r.name:<22} {r.status.upper():<6} {r.seconds:>6.1f}s"
            f"  {r.measured}  ({r.tolerance})"
            + (f"  [{r.detail}]" if r.detail and r.status == "fail" else "")
        )
    lines.append("-" * 100)
    n_pass = sum(r.status == "pass" for r in report.results)
    n_fail = sum(r.status == "fail" for r in report.results)
    n_skip = sum(r.status == "skip" for r in report.results)
    lines.append(f"{n_pass} passed, {n_fail} failed, {n_skip} skipped")
    return "\n".join(lines)
