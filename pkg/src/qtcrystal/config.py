"""Scenario files: YAML parsed into validated pydantic models.

Validation errors carry the line of the offending YAML node, so a bad
value is reported as ``scenario.yaml:12: ring.grid.points: ...``.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .numerics import GridSpec, PeriodicFunction

MODELS = ("spin", "ring", "many-ring")

OBSERVABLES = {
    "spin": {"sigma_x_av", "sigma_x_av_analytic"},
    "ring": {"V", "U"},
    "many-ring": {"p_f", "F"},
}

ANALYSES = {
    "spin": {"period", "deficit", "variance_scaling", "cluster", "ed_check"},
    "ring": {"period", "deficit", "phase", "spectrum_shift", "central_element", "rho_theta", "zassenhaus"},
    "many-ring": {"period", "deficit", "ehrenfest", "variance_scaling", "cluster", "pair_potential", "p_av"},
}


class ConfigError(ValueError):
    """Invalid scenario; ``messages`` holds one line-tagged diagnostic per problem."""

    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("\n".join(self.messages))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TimeGrid(_Strict):
    start: float = 0.0
    stop: float
    num: int = Field(ge=2)

    @model_validator(mode="after")
    def _ordered(self):
        if not self.stop > self.start:
            raise ValueError("stop must exceed start")
        return self

    def values(self):
        import numpy as np

        return np.linspace(self.start, self.stop, self.num)


class Fourier(_Strict):
    const: float = 0.0
    cos: dict[int, float] = {}
    sin: dict[int, float] = {}

    @field_validator("cos", "sin")
    @classmethod
    def _positive_modes(cls, v):
        if any(m <= 0 for m in v):
            raise ValueError("harmonic indices must be positive integers")
        return v

    def function(self) -> PeriodicFunction:
        return PeriodicFunction(self.const, self.cos, self.sin)


class GridConfig(_Strict):
    half_length: float = 32 * math.pi
    points: int = 4096
    dt: float = 1e-3
    t_max: float = 10.0

    @model_validator(mode="after")
    def _valid(self):
        self.spec()
        return self

    def spec(self) -> GridSpec:
        return GridSpec(self.half_length, self.points, self.dt, self.t_max)


class PacketConfig(_Strict):
    center: float = 0.0
    width: float = Field(1.0, gt=0)
    momentum: float = 0.0


class SpinConfig(_Strict):
    sites: int = Field(8, ge=2, le=12)
    J: float = Field(1.0, ge=0)
    h: float = Field(1.0, ge=0)
    boundary: Literal["periodic", "open"] = "periodic"


class RingConfig(_Strict):
    alpha: float = 0.0
    h: float = 1.0
    theta: float = Field(0.0, ge=0, lt=2 * math.pi)
    truncation: int = Field(16, ge=1)
    grid: GridConfig = GridConfig()
    packet: PacketConfig = PacketConfig()


class ManyRingConfig(_Strict):
    rings: int = Field(4, ge=1)
    alpha: float = 0.25
    potential: Fourier = Fourier(cos={1: 1.0})
    window: Fourier = Fourier(const=1.0, sin={1: 1.0})
    pair_potential: Optional[Fourier] = None
    test_function: Fourier = Fourier(cos={1: 1.0})
    truncation: int = Field(16, ge=4)

    @model_validator(mode="after")
    def _window(self):
        from .many_ring import ManyRingSpec

        ManyRingSpec(self.rings, self.alpha, self.potential.function(), self.window.function())
        return self


class ObservableConfig(_Strict):
    kind: str
    id: Optional[str] = None
    beta: Optional[float] = None
    n: Optional[int] = None
    function: Optional[Fourier] = None

    @model_validator(mode="after")
    def _params(self):
        if self.kind == "V" and self.beta is None:
            raise ValueError("observable V needs beta")
        if self.kind == "U" and self.n is None:
            raise ValueError("observable U needs an integer n")
        if self.kind == "F" and self.function is None:
            raise ValueError("observable F needs a function")
        return self

    @property
    def label(self) -> str:
        if self.id:
            return self.id
        if self.kind == "V":
            return f"V({self.beta:.17g})"
        if self.kind == "U":
            return f"U({self.n})"
        return self.kind


class AnalysisConfig(_Strict):
    name: str
    tolerance: Optional[float] = Field(None, gt=0)
    t: Optional[float] = None
    sizes: Optional[list[int]] = None
    separation: int = Field(1, ge=1)


class Scenario(_Strict):
    model: Literal["spin", "ring", "many-ring"]
    seed: int = 0
    output: Optional[str] = None
    times: TimeGrid
    spin: Optional[SpinConfig] = None
    ring: Optional[RingConfig] = None
    many_ring: Optional[ManyRingConfig] = None
    observables: list[ObservableConfig] = []
    analyses: list[Union[str, AnalysisConfig]] = []

    @field_validator("analyses")
    @classmethod
    def _normalize(cls, v):
        return [AnalysisConfig(name=a) if isinstance(a, str) else a for a in v]

    @model_validator(mode="after")
    def _consistent(self):
        section = self.model.replace("-", "_")
        for name in ("spin", "ring", "many_ring"):
            if name != section and getattr(self, name) is not None:
                raise ValueError(f"section {name!r} does not belong to model {self.model!r}")
        if getattr(self, section) is None:
            object.__setattr__(self, section, _DEFAULT_SECTIONS[section]())
        for obs in self.observables:
            if obs.kind not in OBSERVABLES[self.model]:
                raise ValueError(
                    f"observable kind {obs.kind!r} is not available for model {self.model!r}; "
                    f"choose from {sorted(OBSERVABLES[self.model])}"
                )
        for a in self.analyses:
            if a.name not in ANALYSES[self.model]:
                raise ValueError(
                    f"analysis {a.name!r} is not available for model {self.model!r}; "
                    f"choose from {sorted(ANALYSES[self.model])}"
                )
        labels = [o.label for o in self.observables]
        if len(set(labels)) != len(labels):
            raise ValueError("observable ids must be unique")
        if self.model == "ring":
            t_max = self.ring.grid.t_max
            if max(abs(self.times.start), abs(self.times.stop)) > t_max:
                raise ValueError(f"time grid exceeds ring.grid.t_max = {t_max}")
        return self

    @property
    def section(self):
        return getattr(self, self.model.replace("-", "_"))

    def hash(self) -> str:
        """SHA-256 of the canonical JSON of everything except the output path."""
        data = self.model_dump(mode="json", exclude={"output"})
        text = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


_DEFAULT_SECTIONS = {"spin": SpinConfig, "ring": RingConfig, "many_ring": ManyRingConfig}


# ---------------------------------------------------------------------------
# loading with line numbers


def _node_line(root, loc) -> int | None:
    node, line = root, None
    if node is not None:
        line = node.start_mark.line + 1
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if str(k.value) == str(key):
                    nxt, line = v, k.start_mark.line + 1
                    break
            if nxt is None:
                break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
    return line


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark else source
        raise ConfigError([f"{where}: YAML syntax error: {getattr(exc, 'problem', exc)}"]) from None
    return validate_data(data, source, root)


def validate_data(data, source: str = "<scenario>", root=None) -> Scenario:
    """Validate an already-parsed mapping; ``root`` is its YAML node tree if known."""
    if not isinstance(data, dict):
        raise ConfigError([f"{source}:1: scenario must be a mapping"])
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        messages = []
        for err in exc.errors():
            loc = tuple(p for p in err["loc"] if not (isinstance(p, str) and p in ("str", "AnalysisConfig")))
            line = _node_line(root, loc)
            path = ".".join(str(p) for p in loc) or "<root>"
            msg = err["msg"]
            if err["type"] == "extra_forbidden":
                msg = "unknown key"
            messages.append(f"{source}:{line or '?'}: {path}: {msg}")
        raise ConfigError(messages) from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read scenario: {exc.strerror}"]) from None
    return parse_scenario(text, str(path))


def apply_overrides(data: dict, overrides: dict) -> dict:
    """Set dotted-path keys (``ring.h``) in a nested mapping, returning a copy."""
    data = json.loads(json.dumps(data))
    for dotted, value in overrides.items():
        node = data
        parts = dotted.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError([f"grid parameter {dotted!r} does not address a mapping"])
        node[parts[-1]] = value
    return data
