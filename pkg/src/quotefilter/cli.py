"""Command-line entry point.

Subcommands:
    simulate     price path + order flow under fixed quotes -> events.csv
    impact       meta-order Monte-Carlo study -> impact.csv
    filter-demo  run one filter on a simulated stream -> densities/trajectory
    verify       run the self-verification suite -> pass/fail table

Every subcommand accepts ``--config FILE`` (JSON) plus per-parameter
override flags; flags win.  Outputs land in ``--out`` (or the directory
named by the QUOTEFILTER_OUT environment variable) together with a
``manifest.json`` that reproduces the run exactly.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from . import acceptance
from .config import RunConfig, parse_config
from .errors import QuoteFilterError
from .flow import MetaOrderSchedule, replica_rng, simulate_market
from .gaussian import GaussianState, advance_state, apply_event
from .grid import GridDensity, GridFilter, default_dt, default_grid, normalize
from .impact import ImpactExperiment, run_experiment
from .model import ExpIntensity, GaussianPrior, IntensityClip, PriceModel, Quotes
from .output import (
    write_density_csv,
    write_events_csv,
    write_impact_csv,
    write_manifest,
    write_trajectory_csv,
)


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="master RNG seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--lambda0", type=float, help="base arrival rate")
    p.add_argument("--a", type=float, help="intensity distance scale")
    p.add_argument("--sigma", type=float, help="efficient-price volatility")
    p.add_argument("--mu", type=float, help="efficient-price drift")
    p.add_argument("--s0", type=float, help="initial efficient price")
    p.add_argument("--delta", dest="half_spread", type=float, help="half-spread")
    p.add_argument("--x0", type=float, help="prior mean")
    p.add_argument("--sigma0", type=float, help="prior standard deviation")
    p.add_argument("--policy", choices=("fixed", "mid-mean", "mid-argmax"))
    p.add_argument("--beta", type=float, help="meta-order speed (orders/second)")
    p.add_argument("--T", dest="horizon_T", help="meta-order end time or 'inf'")
    p.add_argument("--horizon", type=float, help="simulation horizon")
    p.add_argument("--replicas", type=int, help="Monte-Carlo replicas")
    p.add_argument("--filter", dest="filter_kind", choices=("grid", "gaussian"))
    p.add_argument("--grid-n", dest="grid_n", type=int, help="grid nodes")
    p.add_argument("--dt", type=float, help="filter time step (default: auto)")
    p.add_argument("--w-clip", dest="w_clip_over_a", type=float,
                   help="intensity clip distance in units of 1/a")
    p.add_argument("--output-times", dest="output_times", type=int)
    p.add_argument("--workers", type=int, help="replica worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quotefilter",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "simulate the price path and order flow under fixed quotes"),
        ("impact", "run the meta-order impact Monte-Carlo study"),
        ("filter-demo", "run one filter on a simulated event stream"),
        ("verify", "run the self-verification suite"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common_flags(p)
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    flags = {
        k: v
        for k, v in vars(args).items()
        if k not in ("config",) and v is not None
    }
    if "horizon_T" in flags:
        raw = flags["horizon_T"]
        flags["horizon_T"] = math.inf if str(raw).lower() in ("inf", "infinity") else float(raw)
    return parse_config(file=args.config, flags=flags)


def _build_parts(cfg: RunConfig):
    intensity = ExpIntensity(cfg.lambda0, cfg.a)
    model = PriceModel(mu=cfg.mu, sigma=cfg.sigma, s0=cfg.s0)
    prior = GaussianPrior(cfg.x0, cfg.sigma0)
    clip = IntensityClip(
        lam_min=cfg.lam_min,
        w_clip=None if cfg.w_clip_over_a is None else cfg.w_clip_over_a / cfg.a,
    )
    return intensity, model, prior, clip


def _cmd_simulate(cfg: RunConfig) -> int:
    intensity, model, prior, clip = _build_parts(cfg)
    quotes = Quotes.around(cfg.x0, cfg.half_spread)
    rng = replica_rng(cfg.seed, 0)
    schedule = MetaOrderSchedule(cfg.beta, cfg.horizon_T) if cfg.beta > 0 else None
    path, events, event_quotes, event_prices = simulate_market(
        model, lambda t: quotes, intensity, cfg.horizon, rng,
        clip=clip, schedule=schedule,
    )
    write_events_csv(os.path.join(cfg.out, "events.csv"), events, event_quotes, event_prices)
    write_manifest(os.path.join(cfg.out, "manifest.json"), cfg,
                   extra={"n_events": len(events), "n_path_samples": int(path.times.shape[0])})
    print(f"wrote {len(events)} events to {cfg.out}/events.csv")
    return 0


def _cmd_filter_demo(cfg: RunConfig) -> int:
    intensity, model, prior, clip = _build_parts(cfg)
    quotes = Quotes.around(cfg.x0, cfg.half_spread)
    rng = replica_rng(cfg.seed if cfg.seed is not None else 0, 0)
    schedule = MetaOrderSchedule(cfg.beta, cfg.horizon_T) if cfg.beta > 0 else None
    _, events, event_quotes, _ = simulate_market(
        model, lambda t: quotes, intensity, cfg.horizon, rng,
        clip=clip, schedule=schedule,
    )
    snapshot_times = [cfg.horizon * k / 4.0 for k in range(1, 5)]
    if cfg.filter_kind == "grid":
        x_min, dx, n = default_grid(prior, model, cfg.horizon, n=cfg.grid_n)
        dens = GridDensity.from_gaussian(prior, x_min, dx, n)
        dt = cfg.dt or default_dt(intensity, cfg.half_spread, dx, cfg.sigma)
        filt = GridFilter(dens, model, intensity, dt=dt)
        idx = 0
        for snap_no, t_snap in enumerate(snapshot_times):
            while idx < len(events) and events[idx].time <= t_snap:
                filt.advance(quotes, events[idx].time - filt.t)
                filt.apply_trade(quotes, events[idx].side)
                idx += 1
            filt.advance(quotes, t_snap - filt.t)
            write_density_csv(
                os.path.join(cfg.out, f"density_{snap_no}.csv"),
                normalize(filt.density()), t=t_snap, quotes=quotes,
            )
        print(f"wrote {len(snapshot_times)} density snapshots to {cfg.out}")
    else:
        state = GaussianState(mean=cfg.x0, variance=cfg.sigma0 ** 2, t=0.0)
        rows: list[tuple[float, float, float, str]] = [(0.0, state.mean, state.variance, "")]
        for ev in events:
            state = advance_state(state, intensity, cfg.half_spread, cfg.sigma,
                                  ev.time - state.t, mid=quotes.mid)
            state = apply_event(state, intensity, ev.sign)
            rows.append((state.t, state.mean, state.variance,
                         f"{ev.side.value}:{ev.source.value}"))
        state = advance_state(state, intensity, cfg.half_spread, cfg.sigma,
                              cfg.horizon - state.t, mid=quotes.mid)
        rows.append((state.t, state.mean, state.variance, ""))
        write_trajectory_csv(os.path.join(cfg.out, "trajectory.csv"), rows)
        print(f"wrote trajectory with {len(rows)} rows to {cfg.out}/trajectory.csv")
    write_manifest(os.path.join(cfg.out, "manifest.json"), cfg)
    return 0


def _cmd_impact(cfg: RunConfig) -> int:
    intensity, model, prior, clip = _build_parts(cfg)
    exp = ImpactExperiment(
        intensity=intensity,
        half_spread=cfg.half_spread,
        sigma=cfg.sigma,
        prior=prior,
        s0=cfg.s0,
        beta=cfg.beta,
        horizon_T=cfg.horizon_T,
        horizon=cfg.horizon,
        replicas=cfg.replicas,
        seed=cfg.seed,
        policy=cfg.policy,
        filter_kind=cfg.filter_kind,
        grid_n=cfg.grid_n,
        dt=cfg.dt,
        w_clip=cfg.w_clip_over_a,
        n_output_times=cfg.output_times,
        workers=cfg.workers,
    )
    curve = run_experiment(exp)
    write_impact_csv(os.path.join(cfg.out, "impact.csv"), curve)
    write_manifest(os.path.join(cfg.out, "manifest.json"), cfg,
                   extra={"readout": curve.readout})
    print(f"wrote impact curve ({curve.readout}, {cfg.replicas} replicas) to "
          f"{cfg.out}/impact.csv")
    return 0


def _cmd_verify(cfg: RunConfig) -> int:
    report = acceptance.run_verify(cfg)
    print(acceptance.format_report(report))
    return 0 if report.ok else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "simulate":
            return _cmd_simulate(cfg)
        if args.command == "impact":
            return _cmd_impact(cfg)
        if args.command == "filter-demo":
            return _cmd_filter_demo(cfg)
        return _cmd_verify(cfg)
    except QuoteFilterError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
