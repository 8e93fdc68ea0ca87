"""Run configuration: flat ``section.key = value`` text with a JSON mirror.

Sections are ``model`` (every :class:`ModelParams` field), ``chain`` (where
the regime chain comes from), ``grid``, ``run`` (mode, seed, output), ``sim``
(Monte Carlo settings), ``sweep``, ``reduced`` (oracle-check parameters) and
``estimate`` (discharge-file ingestion). Unknown keys are rejected so typos
fail loudly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .closed_form import ReducedParams
from .model import ModelParams, RegimeChain, field_discharges, synthetic_river_chain
from .regimes import RegimeSpec, read_chain
from .simulator import SimConfig
from .solver import Grid

MODES = ("solve-flexible", "solve-inflexible", "voi", "simulate", "estimate-chain", "oracle-check", "sweep")
CHAIN_SOURCES = ("synthetic", "file", "inline")
POLICIES = ("optimal-flexible", "optimal-inflexible", "never-harvest-low", "always-harvest-high")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ChainSource:
    source: str = "synthetic"
    I: int = 40
    q0: float = 0.5
    step: float = 1.25
    path: str = ""
    rates: list = field(default_factory=list)  # inline rate rows
    flood_rate: float = 0.05
    rise_speed: float = 0.25
    recession_base: float = 0.5
    recession_slope: float = 0.25

    @property
    def spec(self) -> RegimeSpec:
        return RegimeSpec(I=self.I, q0=self.q0, step=self.step)

    def build(self) -> RegimeChain:
        q = field_discharges(self.I + 1, self.q0, self.step)
        if self.source == "synthetic":
            return synthetic_river_chain(
                self.I + 1, self.q0, float(q[-1]), self.flood_rate, self.rise_speed,
                (self.recession_base, self.recession_slope),
            )
        if self.source == "file":
            chain = read_chain(self.path, self.spec)
            return chain
        return RegimeChain(q, np.array(self.rates, dtype=float))


@dataclass
class RunSettings:
    mode: str = "voi"
    seed: int = 0
    out: str = "out"
    threads: int = 1


@dataclass
class SimSettings:
    policy: str = "optimal-flexible"
    i0: int = 0
    x0: float = 0.5
    n_paths: int = 1000
    T_sim: float = 0.0  # 0 selects the default truncation horizon
    quad_tol: float = 1e-10
    event_log: bool = False


@dataclass
class SweepSettings:
    axis: str = "P"
    values: list = field(default_factory=lambda: [5.0, 50.0, 200.0, 500.0])
    kind: str = "voi"  # voi | flexible | inflexible


@dataclass
class EstimateSettings:
    input: str = ""
    dt: float = 1.0 / 24.0


@dataclass
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    chain: ChainSource = field(default_factory=ChainSource)
    grid: Grid = field(default_factory=Grid)
    run: RunSettings = field(default_factory=RunSettings)
    sim: SimSettings = field(default_factory=SimSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    reduced: dict = field(default_factory=lambda: dict(
        f0=0.05, f1=-0.3, w01=0.1, w10=0.5, delta=0.2, r=0.5, zbar=0.5, K=0.5, P=5.0, N=401))
    estimate: EstimateSettings = field(default_factory=EstimateSettings)

    def sim_config(self) -> SimConfig:
        s = self.sim
        return SimConfig(i0=s.i0, x0=s.x0, T_sim=s.T_sim or None, n_paths=s.n_paths,
                         seed=self.run.seed, quad_tol=s.quad_tol)

    def reduced_params(self) -> ReducedParams:
        kw = {k: v for k, v in self.reduced.items() if k != "N"}
        return ReducedParams(**kw)

    def to_flat(self) -> dict:
        out = {}
        for section in SECTIONS:
            obj = getattr(self, section)
            items = obj.items() if isinstance(obj, dict) else dataclasses.asdict(obj).items()
            for k, v in items:
                out[f"{section}.{k}"] = v
        return out

    def digest(self) -> str:
        """Hash of every setting that can change a result (not the output path or thread count)."""
        flat = {k: v for k, v in self.to_flat().items() if k not in ("run.out", "run.threads")}
        text = json.dumps(flat, sort_keys=True, default=float)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


SECTIONS = ("model", "chain", "grid", "run", "sim", "sweep", "reduced", "estimate")
_REDUCED_KEYS = ("f0", "f1", "w01", "w10", "delta", "r", "zbar", "K", "P", "N")


def default_config() -> RunConfig:
    """Field study defaults: 41 regimes, N = 401, dt = 3e-4, T = 365/4."""
    return RunConfig()


# -- text format ------------------------------------------------------------------


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        if v and isinstance(v[0], (list, tuple)):
            return "; ".join(" ".join(_format(float(a)) for a in row) for row in v)
        return ", ".join(_format(float(a)) for a in v)
    return str(v)


def dumps(cfg: RunConfig) -> str:
    lines = []
    current = None
    for key, v in cfg.to_flat().items():
        section = key.split(".")[0]
        if section != current:
            if current is not None:
                lines.append("")
            lines.append(f"# [{section}]")
            current = section
        lines.append(f"{key} = {_format(v)}")
    return "\n".join(lines) + "\n"


def _coerce(path, raw, like):
    """Convert ``raw`` (str or JSON value) to the type of the default ``like``."""
    try:
        if isinstance(like, bool):
            if isinstance(raw, bool):
                return raw
            s = str(raw).strip().lower()
            if s in ("true", "1", "yes"):
                return True
            if s in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if isinstance(like, int):
            v = float(raw)
            if v != int(v):
                raise ValueError(raw)
            return int(v)
        if isinstance(like, float):
            return _number(raw)
        if isinstance(like, list):
            if isinstance(raw, list):
                return [[float(a) for a in r] if isinstance(r, list) else float(r) for r in raw]
            s = str(raw).strip()
            if not s:
                return []
            if ";" in s:
                return [[_number(a) for a in row.split()] for row in s.split(";") if row.strip()]
            return [_number(a) for a in s.replace(",", " ").split()]
        return str(raw).strip()
    except (TypeError, ValueError):
        raise ConfigError(path, f"cannot interpret {raw!r} as {type(like).__name__}") from None


def _number(raw) -> float:
    if isinstance(raw, (int, float)):
        return float(raw)
    s = str(raw).strip()
    if "/" in s:  # allow 1/3 style fractions
        a, b = s.split("/", 1)
        return float(a) / float(b)
    return float(s)


def parse_pairs(pairs: dict, base: RunConfig | None = None, required=()) -> RunConfig:
    """Apply ``{"section.key": value}`` overrides on top of ``base``."""
    cfg = base or RunConfig()
    updates = {s: {} for s in SECTIONS}
    for key, raw in pairs.items():
        if "." not in key:
            raise ConfigError(key, "expected a sectioned key such as model.delta")
        section, name = key.split(".", 1)
        if section not in SECTIONS:
            raise ConfigError(key, f"unknown section {section!r}")
        current = getattr(cfg, section)
        if section == "reduced":
            if name not in _REDUCED_KEYS:
                raise ConfigError(key, "unknown field")
            like = 1 if name == "N" else 1.0
        else:
            names = {f.name for f in dataclasses.fields(current)}
            if name not in names:
                raise ConfigError(key, "unknown field")
            like = getattr(current, name)
        updates[section][name] = _coerce(key, raw, like)
    for name in required:
        if name not in pairs:
            raise ConfigError(name, "required field missing")

    model_kw = dataclasses.asdict(cfg.model) | updates["model"]
    try:
        model = ModelParams(**model_kw)
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from None
    try:
        grid = Grid(**(dataclasses.asdict(cfg.grid) | updates["grid"]))
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from None
    out = RunConfig(
        model=model,
        chain=dataclasses.replace(cfg.chain, **updates["chain"]),
        grid=grid,
        run=dataclasses.replace(cfg.run, **updates["run"]),
        sim=dataclasses.replace(cfg.sim, **updates["sim"]),
        sweep=dataclasses.replace(cfg.sweep, **updates["sweep"]),
        reduced=dict(cfg.reduced) | updates["reduced"],
        estimate=dataclasses.replace(cfg.estimate, **updates["estimate"]),
    )
    validate(out)
    return out


def model_keys():
    return tuple(f"model.{f.name}" for f in dataclasses.fields(ModelParams))


def loads(text: str, base: RunConfig | None = None, required=None) -> RunConfig:
    """Parse the flat text format, or its JSON mirror if the text is a JSON object.

    Every ``model.*`` field must be given explicitly unless ``required`` says
    otherwise; the other sections fall back to their defaults.
    """
    required = model_keys() if required is None else required
    stripped = text.strip()
    if stripped.startswith("{"):
        data = json.loads(stripped)
        pairs = {}
        for k, v in data.items():
            if isinstance(v, dict):
                pairs.update({f"{k}.{kk}": vv for kk, vv in v.items()})
            else:
                pairs[k] = v
        return parse_pairs(pairs, base, required)
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        k, v = line.split("=", 1)
        k = k.strip()
        if k in pairs:
            raise ConfigError(k, f"duplicate key on line {lineno}")
        pairs[k] = v.strip()
    return parse_pairs(pairs, base, required)


def load(path) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError("--config", f"file not found: {path}")
    with open(path) as fh:
        return loads(fh.read())


def to_json(cfg: RunConfig) -> str:
    nested = {}
    for key, v in cfg.to_flat().items():
        s, k = key.split(".", 1)
        nested.setdefault(s, {})[k] = v
    return json.dumps(nested, indent=2, sort_keys=False)


def validate(cfg: RunConfig):
    """Cross-field checks; raises ConfigError naming the field."""
    r = cfg.run
    if r.mode not in MODES:
        raise ConfigError("run.mode", f"must be one of {', '.join(MODES)}")
    if r.threads < 1:
        raise ConfigError("run.threads", "must be at least 1")
    c = cfg.chain
    if c.source not in CHAIN_SOURCES:
        raise ConfigError("chain.source", f"must be one of {', '.join(CHAIN_SOURCES)}")
    if c.I < 0:
        raise ConfigError("chain.I", "must be nonnegative")
    if c.step <= 0:
        raise ConfigError("chain.step", "must be positive")
    if c.source == "file" and not os.path.exists(c.path):
        raise ConfigError("chain.path", f"file not found: {c.path!r}")
    if c.source == "inline":
        rows = np.array(c.rates, dtype=float) if c.rates else np.zeros((0, 0))
        if rows.shape != (c.I + 1, c.I + 1):
            raise ConfigError("chain.rates", f"expected {c.I + 1} rows of {c.I + 1} rates")
    if cfg.sim.policy not in POLICIES:
        raise ConfigError("sim.policy", f"must be one of {', '.join(POLICIES)}")
    if not 0.0 <= cfg.sim.x0 <= 1.0:
        raise ConfigError("sim.x0", "must lie in [0, 1]")
    if not 0 <= cfg.sim.i0 <= c.I:
        raise ConfigError("sim.i0", f"must lie in 0..{c.I}")
    if cfg.sim.n_paths < 1:
        raise ConfigError("sim.n_paths", "must be positive")
    if r.mode == "sweep":
        axis = cfg.sweep.axis
        names = {f.name for f in dataclasses.fields(ModelParams)}
        if axis not in names:
            raise ConfigError("sweep.axis", f"not a model parameter: {axis!r}")
        if not cfg.sweep.values:
            raise ConfigError("sweep.values", "at least one value required")
        if cfg.sweep.kind not in ("voi", "flexible", "inflexible"):
            raise ConfigError("sweep.kind", "must be voi, flexible or inflexible")
        for v in cfg.sweep.values:
            kw = dataclasses.asdict(cfg.model) | {axis: v}
            try:
                ModelParams(**kw)
            except ValueError as exc:
                raise ConfigError("sweep.values", f"{axis}={v}: {exc}") from None
    if r.mode == "estimate-chain":
        if not cfg.estimate.input:
            raise ConfigError("estimate.input", "required for estimate-chain")
        if not os.path.exists(cfg.estimate.input):
            raise ConfigError("estimate.input", f"file not found: {cfg.estimate.input!r}")
        if not cfg.estimate.dt > 0:
            raise ConfigError("estimate.dt", "must be positive")
    if r.mode == "oracle-check":
        try:
            cfg.reduced_params()
        except (TypeError, ValueError) as exc:
            raise ConfigError("reduced", str(exc)) from None
    if not math.isfinite(cfg.grid.dt):
        raise ConfigError("grid.dt", "must be finite")
    return cfg
