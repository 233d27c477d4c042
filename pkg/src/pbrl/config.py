"""Run configuration: flat ``key = value`` files and random-source specs."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional

from .agent import PBRL_TABLE1, PbrlParams
from .cartpole import EnvConfig
from .qlearning import Q_TABLE1, QParams
from .sequences import DEFAULT_BASE_PERIOD_PS, DEFAULT_SIGMA

AGENTS = ("pbrl", "qlearning")
SHARED_KINDS = ("chaos-file", "synthetic-chaos", "surrogate")
FRESH_KINDS = ("normal", "uniform")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class SourceSpec:
    """Where decision samples come from.

    ``normal`` and ``uniform`` draw a fresh pseudorandom stream per round.
    The other kinds share one series across rounds, each round starting its
    cursor at a different offset.
    """

    kind: str
    sigma: float = DEFAULT_SIGMA
    lag: int = 5
    path: str = ""
    inner: Optional["SourceSpec"] = None

    @classmethod
    def parse(cls, text: str) -> "SourceSpec":
        text = text.strip()
        kind, _, arg = text.partition(":")
        if kind == "uniform" and not arg:
            return cls("uniform")
        if kind == "normal":
            sigma = float(arg) if arg else DEFAULT_SIGMA
            if not sigma > 0:
                raise ValueError(f"sigma must be > 0, got {sigma}")
            return cls("normal", sigma=sigma)
        if kind == "synthetic-chaos":
            lag = int(arg) if arg else 5
            if lag < 1:
                raise ValueError(f"lag must be >= 1, got {lag}")
            return cls("synthetic-chaos", lag=lag)
        if kind == "chaos-file" and arg:
            return cls("chaos-file", path=arg)
        if kind == "surrogate" and arg:
            inner = cls.parse(arg)
            if inner.kind in FRESH_KINDS:
                raise ValueError("surrogate needs a chaos-file or synthetic-chaos source")
            return cls("surrogate", inner=inner)
        raise ValueError(f"unrecognized source {text!r}")

    def __str__(self) -> str:
        if self.kind == "normal":
            return f"normal:{self.sigma:g}"
        if self.kind == "synthetic-chaos":
            return f"synthetic-chaos:{self.lag}"
        if self.kind == "chaos-file":
            return f"chaos-file:{self.path}"
        if self.kind == "surrogate":
            return f"surrogate:{self.inner}"
        return self.kind

    @property
    def shared(self) -> bool:
        return self.kind in SHARED_KINDS

    @property
    def family(self) -> str:
        """Key into the per-distribution parameter table."""
        if self.kind in FRESH_KINDS:
            return self.kind
        if self.kind == "surrogate":
            return "surrogate"
        return "chaos"

    def referenced_paths(self) -> Iterable[str]:
        if self.kind == "chaos-file":
            yield self.path
        if self.inner is not None:
            yield from self.inner.referenced_paths()


def _env_keys() -> Dict[str, dataclasses.Field]:
    return {f"env.{f.name}": f for f in dataclasses.fields(EnvConfig)}


@dataclass(frozen=True)
class RunConfig:
    agent: str = "pbrl"
    source: SourceSpec = field(default_factory=lambda: SourceSpec("normal"))
    stride: int = 1
    rounds: int = 200
    episodes: int = 1000
    max_steps: int = 150
    seed: int = 0
    chaos_length: int = 2**21
    base_period: float = DEFAULT_BASE_PERIOD_PS
    delta_th: Optional[float] = None
    a0: Optional[float] = None
    pbrl_gamma: Optional[float] = None
    r_penalty: float = Q_TABLE1.r_penalty
    q_gamma: float = Q_TABLE1.gamma
    alpha: float = Q_TABLE1.alpha
    epsilon0: float = Q_TABLE1.epsilon0
    env: EnvConfig = field(default_factory=EnvConfig)

    def __post_init__(self) -> None:
        if self.agent not in AGENTS:
            raise ConfigError("agent", f"must be one of {AGENTS}, got {self.agent!r}")
        if self.stride < 1:
            raise ConfigError("stride", f"must be >= 1, got {self.stride}")
        for key in ("rounds", "episodes", "max_steps", "chaos_length"):
            if getattr(self, key) < 1:
                raise ConfigError(key, f"must be >= 1, got {getattr(self, key)}")
        if self.seed < 0:
            raise ConfigError("seed", "must be >= 0")
        if self.source.kind == "synthetic-chaos" and self.chaos_length <= self.source.lag:
            raise ConfigError("chaos_length", "must exceed the synthetic-chaos lag")
        for key in ("delta_th", "a0", "pbrl_gamma", "r_penalty", "q_gamma", "alpha", "epsilon0"):
            value = getattr(self, key)
            if value is not None and not math.isfinite(value):
                raise ConfigError(key, "must be finite")

    @property
    def pbrl_params(self) -> PbrlParams:
        base = PBRL_TABLE1[self.source.family]
        return PbrlParams(
            base.delta_th if self.delta_th is None else self.delta_th,
            base.a0 if self.a0 is None else self.a0,
            base.gamma if self.pbrl_gamma is None else self.pbrl_gamma,
        )

    @property
    def q_params(self) -> QParams:
        return QParams(self.r_penalty, self.q_gamma, self.alpha, self.epsilon0)

    def resolved(self) -> "RunConfig":
        """Copy with the distribution-dependent defaults filled in."""
        p = self.pbrl_params
        return dataclasses.replace(self, delta_th=p.delta_th, a0=p.a0, pbrl_gamma=p.gamma)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def with_pbrl(self, params: PbrlParams) -> "RunConfig":
        return self.replace(delta_th=params.delta_th, a0=params.a0, pbrl_gamma=params.gamma)

    def with_q(self, params: QParams) -> "RunConfig":
        return self.replace(
            r_penalty=params.r_penalty,
            q_gamma=params.gamma,
            alpha=params.alpha,
            epsilon0=params.epsilon0,
        )

    def to_items(self) -> Dict[str, str]:
        items: Dict[str, str] = {}
        for f in dataclasses.fields(self):
            if f.name == "env":
                continue
            value = getattr(self, f.name)
            items[f.name] = "" if value is None else _fmt(value)
        for key, f in _env_keys().items():
            items[key] = _fmt(getattr(self.env, f.name))
        return items

    def dumps(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_items().items())

    @classmethod
    def from_items(cls, items: Mapping[str, str]) -> "RunConfig":
        own = {f.name: f for f in dataclasses.fields(cls) if f.name != "env"}
        env_fields = _env_keys()
        kwargs: Dict[str, object] = {}
        env_kwargs: Dict[str, object] = {}
        for key, raw in items.items():
            raw = raw.strip()
            if key in env_fields:
                env_kwargs[env_fields[key].name] = _convert(key, raw, float)
            elif key == "source":
                try:
                    kwargs["source"] = SourceSpec.parse(raw)
                except ValueError as exc:
                    raise ConfigError(key, str(exc)) from None
            elif key == "agent":
                kwargs["agent"] = raw
            elif key in own:
                kind = int if key in ("stride", "rounds", "episodes", "max_steps", "seed", "chaos_length") else float
                if raw == "" and key in ("delta_th", "a0", "pbrl_gamma"):
                    kwargs[key] = None
                else:
                    kwargs[key] = _convert(key, raw, kind)
            else:
                raise ConfigError(key, "unknown configuration key")
        if env_kwargs:
            try:
                kwargs["env"] = EnvConfig(**env_kwargs)
            except ValueError as exc:
                raise ConfigError("env", str(exc)) from None
        return cls(**kwargs)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        return cls.from_items(parse_kv(text))

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.loads(Path(path).read_text())


def parse_kv(text: str) -> Dict[str, str]:
    items: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        items[key.strip()] = value.strip()
    return items


def _fmt(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(key: str, raw: str, kind: type):
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {kind.__name__}") from None
