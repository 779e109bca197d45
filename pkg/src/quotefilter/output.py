"""File outputs: CSV tables and JSON manifests, written atomically.

Floats are rendered with ``repr`` (shortest round-trip form), so a rerun
with the same seed and config produces byte-identical files.
"""

from __future__ import annotations

import json
import os
import subprocess
import tempfile
from typing import Iterable, Sequence

from . import __version__ as _version
from .config import RunConfig
from .errors import IoError
from .grid import GridDensity
from .impact import ImpactCurve
from .model import Quotes, TradeEvent


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename.

    Raises:
        IoError: Naming the destination path on any OS failure.
    """
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_events_csv(
    path: str,
    events: Sequence[TradeEvent],
    quotes: Sequence[Quotes],
    efficient_prices: Sequence[float],
) -> None:
    """Event log: one row per trade with the quotes and price it saw."""
    rows = (
        (e.time, e.side.value, e.source.value, q.bid, q.ask, s)
        for e, q, s in zip(events, quotes, efficient_prices)
    )
    atomic_write_text(
        path, _csv(("time", "side", "source", "bid", "ask", "efficient_price"), rows)
    )


def write_density_csv(
    path: str,
    density: GridDensity,
    t: float,
    quotes: Quotes | None = None,
) -> None:
    """Density snapshot as (x, value) rows plus a JSON sidecar.

    The sidecar (same path with ``.json`` appended) records the snapshot
    time, the quotes in effect, the normalized flag and the trapezoid mass.
    """
    rows = zip(density.x.tolist(), density.values.tolist())
    atomic_write_text(path, _csv(("x", "value"), rows))
    sidecar = {
        "t": t,
        "quotes": None if quotes is None else {"bid": quotes.bid, "ask": quotes.ask},
        "normalized": density.normalized,
        "mass": density.mass(),
        "x_min": density.x_min,
        "dx": density.dx,
        "n": density.n,
    }
    atomic_write_text(path + ".json", json.dumps(sidecar, sort_keys=True) + "\n")


def write_trajectory_csv(path: str, rows: Sequence[tuple[float, float, float, str]]) -> None:
    """Gaussian-filter trajectory: t, mean, variance and an event marker."""
    atomic_write_text(path, _csv(("t", "x_t", "sigma_t2", "event"), rows))


def write_impact_csv(path: str, curve: ImpactCurve) -> None:
    rows = zip(
        curve.times.tolist(),
        curve.mean_impact.tolist(),
        curve.stderr.tolist(),
        curve.overlay.tolist(),
    )
    atomic_write_text(path, _csv(("t", "mean_impact", "stderr", "overlay"), rows))


def build_describe() -> str:
    """Version of the build: git describe when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True,
            text=True,
            timeout=10,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{_version}"


def write_manifest(path: str, config: RunConfig, extra: dict | None = None) -> None:
    """Full run manifest; re-parsing it reproduces the RunConfig exactly."""
    doc = {
        "config": config.to_dict(),
        "build": build_describe(),
    }
    if extra:
        doc["extra"] = extra
    atomic_write_text(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")


def read_manifest_config(path: str) -> RunConfig:
    """Parse a manifest back into its RunConfig (round-trip contract)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return RunConfig.from_dict(doc["config"])
