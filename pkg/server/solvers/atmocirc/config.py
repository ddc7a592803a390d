"""
Run configuration: `key = value` text with [section] headers and # comments
"""

import logging
import os
import re
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

from .errors import ConfigError, ParameterError
from .grid import Grid
from .operators import OperatorConfig
from .params import (
    DimensionlessParams,
    HumiditySourceScaling,
    PhysicalParams,
    nondimensionalize,
    scale_forcing,
    scale_time,
)
from .stepper import StepConfig

logger = logging.getLogger(__name__)


class InitialKind(str, Enum):
    ZERO = "zero"
    SINGLE_MODE = "single_mode"
    FILE = "file"


class ForcingKind(str, Enum):
    ZERO = "zero"
    CONSTANT = "constant"
    SINGLE_MODE = "single_mode"
    FILE = "file"


@dataclass(frozen=True)
class InitialSpec:
    """Initial fields; single_mode uses ψ = a·cos(k·x1)·sin²(mπx2) and b·cos(k·x1)·sin(mπx2) for T, q"""

    kind: str = InitialKind.ZERO.value
    psi_amplitude: float = 0.0
    T_amplitude: float = 0.0
    q_amplitude: float = 0.0
    k: int = 1
    m: int = 1
    path: Optional[str] = None


@dataclass(frozen=True)
class ForcingSpec:
    """Heat/humidity sources; dimensional when the run uses a [physical] block"""

    kind: str = ForcingKind.ZERO.value
    Q0: float = 0.0
    G0: float = 0.0
    Q_amplitude: float = 0.0
    G_amplitude: float = 0.0
    k: int = 0
    m: int = 1
    path: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    step: StepConfig
    dimensionless: Optional[DimensionlessParams] = None
    physical: Optional[PhysicalParams] = None
    humidity_source_scaling: str = HumiditySourceScaling.PAPER.value
    operators: OperatorConfig = field(default_factory=OperatorConfig)
    initial: InitialSpec = field(default_factory=InitialSpec)
    forcing: ForcingSpec = field(default_factory=ForcingSpec)
    output_directory: Optional[str] = None
    seed: int = 0

    def params(self) -> DimensionlessParams:
        if self.dimensionless is not None:
            return self.dimensionless
        return nondimensionalize(self.physical)

    def nondimensional_step(self) -> StepConfig:
        """Step settings in dimensionless time (dt and t_end are seconds under a [physical] block)"""
        if self.physical is None:
            return self.step
        return replace(
            self.step,
            dt=float(scale_time(self.physical, self.step.dt)),
            t_end=float(scale_time(self.physical, self.step.t_end)),
        )

    def nondimensional_forcing(self) -> ForcingSpec:
        if self.physical is None:
            return self.forcing
        f = self.forcing
        Q0, G0 = scale_forcing(self.physical, f.Q0, f.G0, self.humidity_source_scaling)
        Qa, Ga = scale_forcing(self.physical, f.Q_amplitude, f.G_amplitude, self.humidity_source_scaling)
        return replace(f, Q0=float(Q0), G0=float(G0), Q_amplitude=float(Qa), G_amplitude=float(Ga))


_PHYSICAL_KEYS = [f.name for f in fields(PhysicalParams)]
_DIMENSIONLESS_KEYS = [f.name for f in fields(DimensionlessParams)]

SCHEMA: Dict[str, Dict[str, Callable]] = {
    "dimensionless": {k: float for k in _DIMENSIONLESS_KEYS},
    "physical": {**{k: float for k in _PHYSICAL_KEYS}, "humidity_source_scaling": str},
    "grid": {"n1": int, "n2": int},
    "time": {
        "dt": float,
        "t_end": float,
        "diffusion_scheme": str,
        "explicit_scheme": str,
        "snapshot_interval": int,
        "coriolis_sign": str,
    },
    "operators": {"advection_form": str, "x1_method": str},
    "initial": {
        "kind": str,
        "psi_amplitude": float,
        "T_amplitude": float,
        "q_amplitude": float,
        "k": int,
        "m": int,
        "path": str,
    },
    "forcing": {
        "kind": str,
        "Q0": float,
        "G0": float,
        "Q_amplitude": float,
        "G_amplitude": float,
        "k": int,
        "m": int,
        "path": str,
    },
    "output": {"directory": str, "seed": int},
}

REQUIRED: Dict[str, List[str]] = {
    "dimensionless": _DIMENSIONLESS_KEYS,
    "physical": _PHYSICAL_KEYS,
    "grid": ["n1", "n2"],
    "time": ["dt", "t_end"],
}

Parsed = Dict[str, Dict[str, Tuple[object, int]]]


# "#" starts a comment only at line start or after whitespace
COMMENT = re.compile(r"(?:^|\s)#.*$")


def _tokenize(text: str) -> Tuple[Parsed, Dict[str, int]]:
    sections: Parsed = {}
    headers: Dict[str, int] = {}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = COMMENT.sub("", raw).strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", line=lineno)
            name = line[1:-1].strip()
            if name not in SCHEMA:
                raise ConfigError(f"unknown section [{name}]", line=lineno)
            if name in sections:
                raise ConfigError(f"duplicate section [{name}]", line=lineno)
            sections[name] = {}
            headers[name] = lineno
            current = name
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        if current is None:
            raise ConfigError(f"key {key!r} appears before any section header", line=lineno)
        schema = SCHEMA[current]
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} in [{current}]", line=lineno, field=f"{current}.{key}")
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r} in [{current}]", line=lineno, field=f"{current}.{key}")
        if not value:
            raise ConfigError(f"empty value for {key!r}", line=lineno, field=f"{current}.{key}")
        try:
            converted = schema[key](value)
        except ValueError:
            expected = schema[key].__name__
            raise ConfigError(
                f"{current}.{key} must be {expected}, got {value!r}", line=lineno, field=f"{current}.{key}"
            ) from None
        sections[current][key] = (converted, lineno)
    return sections, headers


def _line_of(sections: Parsed, name: str) -> Optional[int]:
    for entries in sections.values():
        if name in entries:
            return entries[name][1]
    return None


def _values(sections: Parsed, name: str) -> Dict[str, object]:
    return {k: v for k, (v, _) in sections.get(name, {}).items()}


def _check_enum(sections: Parsed, section: str, key: str, enum) -> None:
    entry = sections.get(section, {}).get(key)
    if entry is None:
        return
    try:
        enum(entry[0])
    except ValueError:
        allowed = ", ".join(e.value for e in enum)
        raise ConfigError(f"{section}.{key} must be one of {allowed}, got {entry[0]!r}", line=entry[1],
                          field=f"{section}.{key}") from None


def _check_file(sections: Parsed, section: str, kind: str) -> None:
    if kind != "file":
        return
    entry = sections[section].get("path")
    if entry is None:
        raise ConfigError(f"[{section}] kind = file requires a path", field=f"{section}.path")
    if not os.path.exists(entry[0]):
        raise ConfigError(f"{section}.path {entry[0]!r} does not exist", line=entry[1], field=f"{section}.path")


def parse_config(text: str) -> RunConfig:
    """Validated RunConfig from configuration text; raises ConfigError with a line number where known"""
    sections, headers = _tokenize(text)

    blocks = [name for name in ("physical", "dimensionless") if name in sections]
    if len(blocks) != 1:
        line = headers.get("dimensionless") if len(blocks) == 2 else None
        raise ConfigError("exactly one parameter block ([physical] or [dimensionless]) is required", line=line)
    for section, keys in REQUIRED.items():
        if section in ("physical", "dimensionless") and section not in blocks:
            continue
        if section not in sections:
            raise ConfigError(f"missing section [{section}]", field=section)
        for key in keys:
            if key not in sections[section]:
                raise ConfigError(f"missing key {key!r} in [{section}]", line=headers[section],
                                  field=f"{section}.{key}")

    _check_enum(sections, "physical", "humidity_source_scaling", HumiditySourceScaling)
    _check_enum(sections, "initial", "kind", InitialKind)
    _check_enum(sections, "forcing", "kind", ForcingKind)

    try:
        physical_values = _values(sections, "physical")
        scaling = physical_values.pop("humidity_source_scaling", HumiditySourceScaling.PAPER.value)
        physical = None
        dimensionless = None
        if "physical" in sections:
            physical = PhysicalParams(**physical_values)
            physical.validate()
        else:
            dimensionless = DimensionlessParams(**_values(sections, "dimensionless"))

        grid = Grid(**_values(sections, "grid"))
        step = StepConfig(**_values(sections, "time"))
        operators = OperatorConfig(**_values(sections, "operators"))
        initial = InitialSpec(**_values(sections, "initial"))
        forcing = ForcingSpec(**_values(sections, "forcing"))
        for spec, section in ((initial, "initial"), (forcing, "forcing")):
            if spec.k < 0:
                raise ParameterError("k", f"[{section}] wavenumber must be >= 0, got {spec.k}")
            if spec.m < 1:
                raise ParameterError("m", f"[{section}] wall-normal mode must be >= 1, got {spec.m}")
        output = _values(sections, "output")
        if "seed" in output and output["seed"] < 0:
            raise ParameterError("seed", f"must be >= 0, got {output['seed']}")
    except ParameterError as e:
        raise ConfigError(str(e), line=_line_of(sections, e.field), field=e.field) from e

    _check_file(sections, "initial", initial.kind)
    _check_file(sections, "forcing", forcing.kind)

    config = RunConfig(
        grid=grid,
        step=step,
        dimensionless=dimensionless,
        physical=physical,
        humidity_source_scaling=scaling,
        operators=operators,
        initial=initial,
        forcing=forcing,
        output_directory=output.get("directory"),
        seed=output.get("seed", 0),
    )
    if physical is not None:
        try:
            config.params()
            config.nondimensional_forcing()
        except ParameterError as e:
            raise ConfigError(str(e), line=_line_of(sections, e.field), field=e.field) from e
    return config


def _format(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _render_section(name: str, values: Dict[str, object]) -> List[str]:
    lines = [f"[{name}]"]
    for key in SCHEMA[name]:
        if key in values and values[key] is not None:
            lines.append(f"{key} = {_format(values[key])}")
    return lines + [""]


def render_config(config: RunConfig) -> str:
    """Text that parse_config maps back to an equal RunConfig"""
    lines: List[str] = []
    if config.physical is not None:
        values = asdict(config.physical)
        values["humidity_source_scaling"] = config.humidity_source_scaling
        lines += _render_section("physical", values)
    else:
        lines += _render_section("dimensionless", asdict(config.dimensionless))
    lines += _render_section("grid", {"n1": config.grid.n1, "n2": config.grid.n2})
    lines += _render_section("time", asdict(config.step))
    lines += _render_section("operators", asdict(config.operators))
    lines += _render_section("initial", asdict(config.initial))
    lines += _render_section("forcing", asdict(config.forcing))
    lines += _render_section("output", {"directory": config.output_directory, "seed": config.seed})
    return "\n".join(lines)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config(text)
