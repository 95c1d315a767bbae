"""Run configuration: YAML text, schema validation, round-trip emission.

Units: lengths in the spatial unit of the equation, times in its time unit;
every field name below carries its unit in the schema description.
"""
import re
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional

import jsonschema
import yaml

from .errors import ConfigError
from .grid import make_grid
from .solitons import MultiSolitonConfig, SolitonParams

class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot (1e-3)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))

VERIFIERS = ("interactt", "interpol", "interaction", "growth")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "k": {**_pos, "description": "nonlinearity power (|psi|^{2k} psi), dimensionless"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "out": {"type": "string"},
        "grid": {
            "type": "object", "additionalProperties": False, "required": ["L", "N"],
            "properties": {
                "L": {**_pos, "description": "half box length, length units"},
                "N": {"type": "integer", "minimum": 8, "multipleOf": 2,
                      "description": "number of nodes"},
            },
        },
        "integrator": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "dt": {**_pos, "description": "time step, time units"},
                "t_end": {**_pos, "description": "final time, time units"},
                "sponge": {"type": "boolean"},
                "sponge_width": {"anyOf": [_pos, {"type": "null"}],
                                 "description": "absorbing layer width, length units"},
                "sponge_strength": {**_pos, "description": "absorption rate, 1/time units"},
                "record_every": {**_pos, "description": "diagnostic interval, time units"},
                "snapshot_every": {"type": "number", "minimum": 0,
                                   "description": "snapshot interval, time units (0 = none)"},
            },
        },
        "solitons": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "additionalProperties": False,
                "required": ["alpha"],
                "properties": {"v": _num, "y": _num, "alpha": _pos, "gamma": _num},
            },
        },
        "perturbation": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "shape": {"enum": ["none", "gaussian", "random", "unstable"]},
                "amplitude": {"type": "number", "minimum": 0,
                              "description": "L2 norm of the perturbation"},
                "width": {**_pos, "description": "envelope width, length units"},
                "center": {"anyOf": [_num, {"type": "null"}]},
            },
        },
        "shooting": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "T": {**_pos, "description": "terminal time, time units"},
                "tol": _pos,
                "solver": {"enum": ["secant", "newton"]},
                "ladder": {"type": "array", "items": _num},
                "window": {"anyOf": [_pos, {"type": "null"}]},
                "segment": _pos,
                "scan": {"type": "array", "items": {"type": "number", "minimum": 0},
                         "description": "multipliers of the perturbation for the manifold scan"},
                "dichotomy_offset": {"type": "number", "minimum": 0},
                "dichotomy_time": _pos,
            },
        },
        "spectrum": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "alpha": _pos,
                "tolerance": _pos,
                "lambda0_reference": {"anyOf": [_pos, {"type": "null"}],
                                      "description": "lambda0 at alpha = 1, 1/time units"},
            },
        },
        "verify": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "verifiers": {"type": "array", "items": {"enum": list(VERIFIERS)}},
                "tolerances": {"type": "object", "additionalProperties": {
                    "anyOf": [_num, {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}]}},
            },
        },
    },
}


@dataclass
class GridSection:
    L: float = 40.0
    N: int = 2048


@dataclass
class IntegratorSection:
    dt: float = 1e-3
    t_end: float = 10.0
    sponge: bool = False
    sponge_width: Optional[float] = None
    sponge_strength: float = 5.0
    record_every: float = 0.1
    snapshot_every: float = 0.0


@dataclass
class PerturbationSection:
    shape: str = "none"
    amplitude: float = 0.0
    width: float = 1.0
    center: Optional[float] = None


@dataclass
class ShootingSection:
    T: float = 20.0
    tol: float = 1e-8
    solver: str = "secant"
    ladder: List[float] = field(default_factory=lambda: [-3.0, -2.0, -1.0, 0.0])
    window: Optional[float] = None
    segment: float = 1.0
    scan: List[float] = field(default_factory=list)
    dichotomy_offset: float = 0.0
    dichotomy_time: float = 10.0


@dataclass
class SpectrumSection:
    alpha: float = 1.0
    tolerance: float = 1e-7
    # pinned alpha = 1 value; compared after alpha^2 scaling
    lambda0_reference: Optional[float] = 2.9050883778


@dataclass
class VerifySection:
    verifiers: List[str] = field(default_factory=lambda: ["interactt", "interpol"])
    tolerances: dict = field(default_factory=dict)


_SECTIONS = {"grid": GridSection, "integrator": IntegratorSection,
             "perturbation": PerturbationSection, "shooting": ShootingSection,
             "spectrum": SpectrumSection, "verify": VerifySection}


def _default_solitons():
    return [{"v": 0.0, "y": 0.0, "alpha": 1.0, "gamma": 0.0}]


@dataclass
class RunConfig:
    k: float = 3.0
    seed: int = 0
    out: str = "out"
    grid: GridSection = field(default_factory=GridSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    solitons: list = field(default_factory=_default_solitons)
    perturbation: PerturbationSection = field(default_factory=PerturbationSection)
    shooting: ShootingSection = field(default_factory=ShootingSection)
    spectrum: SpectrumSection = field(default_factory=SpectrumSection)
    verify: VerifySection = field(default_factory=VerifySection)

    def to_dict(self) -> dict:
        return asdict(self)

    def make_grid(self):
        return make_grid(self.grid.L, self.grid.N)

    def multi_soliton(self) -> MultiSolitonConfig:
        ps = [SolitonParams(s.get("v", 0.0), s.get("y", 0.0), s["alpha"], s.get("gamma", 0.0))
              for s in self.solitons]
        return MultiSolitonConfig(ps, self.k)


def validate(data: dict) -> None:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None


def from_dict(data: dict) -> RunConfig:
    data = {} if data is None else data
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    validate(data)
    kw = {}
    for f in fields(RunConfig):
        if f.name not in data:
            continue
        val = data[f.name]
        if f.name in _SECTIONS:
            val = _SECTIONS[f.name](**val)
        elif f.name == "solitons":
            val = [{"v": float(s.get("v", 0.0)), "y": float(s.get("y", 0.0)),
                    "alpha": float(s["alpha"]), "gamma": float(s.get("gamma", 0.0))} for s in val]
        kw[f.name] = val
    cfg = RunConfig(**kw)
    # semantic checks beyond the schema
    cfg.make_grid()
    cfg.multi_soliton()
    if cfg.integrator.t_end < cfg.integrator.dt:
        raise ConfigError("integrator.t_end must be at least one time step")
    return cfg


def loads(text: str) -> RunConfig:
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    return from_dict(data)


def load(path) -> RunConfig:
    try:
        with open(path) as fh:
            return loads(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def dumps(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=False)
