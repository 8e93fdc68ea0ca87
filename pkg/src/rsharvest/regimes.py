"""Discharge series ingestion, regime assignment and Markov-chain estimation.

Rates are estimated from the embedded chain of the sampled series: with
``N_ij`` the number of consecutive sample pairs going from regime i to j,
``p_ij = N_ij / sum_k N_ik`` and ``w_ij = p_ij / dt`` for i != j. Pairs
touching a gap are never counted.
"""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass, field

import numpy as np

from .model import RegimeChain
from .simulator import sample_regime_path


@dataclass(frozen=True)
class DischargeSeries:
    """Sampled discharge; NaN marks a missing sample."""

    times: np.ndarray  # days
    discharge: np.ndarray  # m^3/s
    dt: float  # nominal sampling interval, days

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        q = np.asarray(self.discharge, dtype=float).reshape(-1)
        if t.shape != q.shape:
            raise ValueError("times and discharge differ in length")
        if t.size and np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if np.any(q[~np.isnan(q)] < 0):
            raise ValueError("discharge must be nonnegative")
        if not self.dt > 0:
            raise ValueError("sampling interval must be positive")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "discharge", q)

    def __len__(self):
        return self.times.size

    @property
    def valid(self) -> np.ndarray:
        return ~np.isnan(self.discharge)

    def pair_mask(self) -> np.ndarray:
        """Consecutive pairs usable as transitions: both present, one interval apart."""
        gaps = np.diff(self.times)
        ok = np.abs(gaps - self.dt) <= 0.5 * self.dt
        return ok & self.valid[:-1] & self.valid[1:]


@dataclass(frozen=True)
class RegimeSpec:
    """Regime grid ``Q_i = q0 + step * i`` for i = 0..I."""

    I: int = 40
    q0: float = 0.5
    step: float = 1.25

    @property
    def discharges(self) -> np.ndarray:
        return self.q0 + self.step * np.arange(self.I + 1)


def assign_regimes(series: DischargeSeries, spec: RegimeSpec) -> np.ndarray:
    """Nearest-discharge regime per sample (ties to the lower index); -1 for gaps."""
    if len(series) == 0:
        raise ValueError("empty discharge series")
    q = series.discharge
    pos = (q - spec.q0) / spec.step
    # nearest integer with halves rounded down
    idx = np.ceil(pos - 0.5)
    idx = np.clip(idx, 0, spec.I)
    out = np.where(np.isnan(q), -1, np.nan_to_num(idx, nan=-1)).astype(np.int64)
    return out


@dataclass
class ChainEstimate:
    transition: np.ndarray  # embedded p_ij
    rates: np.ndarray  # w_ij, 1/day
    occupancy: np.ndarray
    counts: np.ndarray
    unvisited: np.ndarray  # rows with no outgoing pair
    dt: float
    spec: RegimeSpec = field(default_factory=RegimeSpec)

    @property
    def entropy(self) -> float:
        return entropy(self)

    def chain(self) -> RegimeChain:
        return RegimeChain(self.spec.discharges, self.rates)


def estimate_chain(series: DischargeSeries, spec: RegimeSpec) -> ChainEstimate:
    regimes = assign_regimes(series, spec)
    pairs = series.pair_mask()
    if pairs.sum() < 2:
        raise ValueError("need at least 2 usable consecutive sample pairs")
    n = spec.I + 1
    counts = np.zeros((n, n))
    np.add.at(counts, (regimes[:-1][pairs], regimes[1:][pairs]), 1.0)
    rows = counts.sum(axis=1)
    unvisited = rows == 0
    p = np.divide(counts, rows[:, None], out=np.zeros_like(counts), where=rows[:, None] > 0)
    w = p / series.dt
    np.fill_diagonal(w, 0.0)
    occ = np.bincount(regimes[regimes >= 0], minlength=n).astype(float)
    occ /= occ.sum()
    return ChainEstimate(p, w, occ, counts, unvisited, series.dt, spec)


def entropy(est: ChainEstimate) -> float:
    """Occupancy-weighted row entropy (nats) of the embedded chain."""
    p = est.transition
    logs = np.log(p, out=np.zeros_like(p), where=p > 0)
    return float(-(est.occupancy * (p * logs).sum(axis=1)).sum())


def synthesize_series(chain: RegimeChain, duration: float, dt: float, seed: int, start: int = 0) -> DischargeSeries:
    """Sample the chain every ``dt`` days and emit the regime discharges."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    regimes = sample_regime_path(chain, start, duration, dt, seed)
    times = dt * np.arange(regimes.size)
    return DischargeSeries(times, chain.discharges[regimes], dt)


# -- text formats -----------------------------------------------------------------


def _parse_time(text: str) -> float:
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    stamp = _dt.datetime.fromisoformat(text.replace("Z", "+00:00"))
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=_dt.timezone.utc)
    return stamp.timestamp() / 86400.0


def read_discharge_file(path, dt=None) -> DischargeSeries:
    """Read ``timestamp, discharge`` lines; blank or NA discharge marks a gap.

    Timestamps are ISO-8601 (or plain day numbers) and are shifted so the
    first sample sits at day 0. The interval defaults to the median spacing.
    """
    times, values = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) < 1 or not parts[0]:
                raise ValueError(f"{path}:{lineno}: missing timestamp")
            try:
                t = _parse_time(parts[0])
            except ValueError as exc:
                if lineno == 1:
                    continue  # header line
                raise ValueError(f"{path}:{lineno}: bad timestamp {parts[0]!r}") from exc
            raw = parts[1] if len(parts) > 1 else ""
            q = math.nan if raw in ("", "NA", "na", "NaN", "nan") else float(raw)
            times.append(t)
            values.append(q)
    if not times:
        raise ValueError(f"{path}: no samples")
    t = np.array(times)
    t -= t[0]
    if dt is None:
        dt = float(np.median(np.diff(t))) if t.size > 1 else 1.0 / 24.0
    return DischargeSeries(t, np.array(values), dt)


def write_chain(path, est: ChainEstimate, header: dict | None = None):
    """Rate matrix as I+1 space-separated rows, with a '#' metadata block."""
    meta = {
        "I": est.spec.I,
        "Q_rule": f"Q_i = {est.spec.q0!r} + {est.spec.step!r} * i",
        "dt_days": est.dt,
        "entropy_nats": entropy(est),
        "unvisited_regimes": " ".join(str(i) for i in np.nonzero(est.unvisited)[0]) or "none",
    }
    meta.update(header or {})
    with open(path, "w") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}: {v}\n")
        for row in est.rates:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_chain(path, spec: RegimeSpec | None = None) -> RegimeChain:
    """Load a rate-matrix file written by :func:`write_chain` (or by hand)."""
    rates = np.loadtxt(path, comments="#", ndmin=2)
    meta = {}
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") and ":" in line:
                k, v = line[1:].split(":", 1)
                meta[k.strip()] = v.strip()
    if spec is None:
        spec = RegimeSpec(I=rates.shape[0] - 1)
        rule = meta.get("Q_rule", "")
        if rule.startswith("Q_i ="):
            a, b = rule[len("Q_i ="):].split("+")
            spec = RegimeSpec(I=rates.shape[0] - 1, q0=float(a), step=float(b.split("*")[0]))
    return RegimeChain(spec.discharges, rates)
