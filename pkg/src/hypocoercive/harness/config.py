"""Scenario files: one TOML document per scenario."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import tomlkit

from ..curvature import Box, HessianBounds
from ..polyexpr import Polynomial, kinetic_names, parse_poly
from ..semigroup.quadrature import QuadSpec
from ..vecfield import OperatorSpec, VectorField, format_field, kinetic_spec, parse_field


class ConfigError(ValueError):
    pass


@dataclass
class IdentitySettings:
    trials: int = 20
    degree: int = 4
    intertwining_trials: int = 10
    intertwining_degree: int = 3


@dataclass
class DecaySettings:
    times: list = field(default_factory=lambda: [0.5 * k for k in range(21)])
    test_functions: list = field(default_factory=lambda: ["x1 + v1"])
    pointwise_times: list = field(default_factory=lambda: [0.1, 1.0, 5.0])
    pointwise_grid: int = 5
    pointwise_half_width: float = 2.0
    pointwise_random: int = 10
    pointwise_degree: int = 3
    entropy: bool = True
    entropy_times: list = field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0])
    entropy_p: str = "x1 + v1"
    entropy_c: float = 0.5


@dataclass
class SimulateSettings:
    particles: int = 100_000
    dt: float = 1e-3
    T: float = 10.0
    record: list = field(default_factory=list)
    init: str = "equilibrium"  # or "gaussian"
    init_mean: list = field(default_factory=list)
    init_cov: list = field(default_factory=list)
    test_functions: list = field(default_factory=lambda: ["x1^2", "v1^2"])


@dataclass
class ScenarioConfig:
    name: str
    mode: str  # "kinetic" or "general"
    seed: int = 0
    description: str = ""
    # kinetic
    n: int = 1
    V: str = ""
    hessian_bounds: list | None = None
    # general frame: names and field texts keyed X1.., X0, Y
    names: list = field(default_factory=list)
    frame: dict = field(default_factory=dict)
    # vertical frame: [] means the kinetic default; "auto-epsilon"; or field texts
    Z: list | str = field(default_factory=list)
    epsilon_candidates: list = field(default_factory=lambda: [2.0 ** -k for k in range(7)])
    region_lo: list = field(default_factory=list)
    region_hi: list = field(default_factory=list)
    grid: int = 5
    eta: float | str = "optimize"
    kappa: float | str = "gaussian-auto"
    kappa_classical: float = 1.0
    identities: IdentitySettings = field(default_factory=IdentitySettings)
    decay: DecaySettings = field(default_factory=DecaySettings)
    quadrature: QuadSpec = field(default_factory=QuadSpec)
    simulate: SimulateSettings = field(default_factory=SimulateSettings)

    def __post_init__(self):
        self.validate()

    # derived objects

    @property
    def dim(self) -> int:
        return 2 * self.n if self.mode == "kinetic" else len(self.names)

    @property
    def variable_names(self) -> tuple:
        return kinetic_names(self.n) if self.mode == "kinetic" else tuple(self.names)

    @property
    def region(self) -> Box:
        return Box(self.region_lo, self.region_hi)

    def potential(self) -> Polynomial:
        return parse_poly(self.V, kinetic_names(self.n))

    def hessian_bounds_obj(self) -> HessianBounds | None:
        if self.hessian_bounds is None:
            return None
        a, b = self.hessian_bounds
        return HessianBounds(float(a), float(b))

    @property
    def auto_epsilon(self) -> bool:
        return self.Z == "auto-epsilon"

    def build_spec(self) -> OperatorSpec:
        """Operator with its configured vertical frame (none yet when auto-epsilon)."""
        names = self.variable_names
        if self.mode == "kinetic":
            spec = kinetic_spec(self.V, self.n)
        else:
            xs = sorted((k for k in self.frame if k[0] == "X" and k[1:].isdigit() and k != "X0"),
                        key=lambda k: int(k[1:]))
            X = [parse_field(self.frame[k], names) for k in xs]
            Y = parse_field(self.frame.get("Y", "0"), names)
            X0 = parse_field(self.frame["X0"], names) if "X0" in self.frame else None
            spec = OperatorSpec(len(names), X, Y, (), X0, names)
        if isinstance(self.Z, list) and self.Z:
            spec = spec.with_Z([parse_field(t, names) for t in self.Z])
        return spec

    def validate(self) -> None:
        if self.mode not in ("kinetic", "general"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "kinetic":
            if self.n < 1 or not self.V:
                raise ConfigError("kinetic mode needs n >= 1 and a potential V")
        elif not self.names or not any(k != "X0" and k.startswith("X") for k in self.frame):
            raise ConfigError("general mode needs variable names and at least one X field")
        if not (self.Z == "auto-epsilon" or isinstance(self.Z, list)):
            raise ConfigError("Z must be a list of fields or 'auto-epsilon'")
        if isinstance(self.eta, str) and self.eta != "optimize":
            raise ConfigError("eta must be a number or 'optimize'")
        if isinstance(self.kappa, str) and self.kappa not in ("gaussian-auto", "frame-gram"):
            raise ConfigError("kappa must be a number, 'gaussian-auto' or 'frame-gram'")
        if not self.region_lo:
            self.region_lo = [-2.0] * self.dim
            self.region_hi = [2.0] * self.dim
        try:
            box = self.region
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if box.dim != self.dim:
            raise ConfigError(f"region has dimension {box.dim}, operator has {self.dim}")
        try:
            self.build_spec()
            for text in self.decay.test_functions + self.simulate.test_functions + [self.decay.entropy_p]:
                parse_poly(text, self.variable_names)
        except ValueError as exc:
            raise ConfigError(f"scenario {self.name}: {exc}") from exc

    # serialization

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if dataclasses.is_dataclass(val):
                out[f.name] = dataclasses.asdict(val)
            elif val is None:
                continue
            else:
                out[f.name] = val
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = _plain(data)
        nested = {"identities": IdentitySettings, "decay": DecaySettings,
                  "quadrature": QuadSpec, "simulate": SimulateSettings}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}")
        kw = {}
        for key, val in data.items():
            if key in nested:
                sub = nested[key]
                sub_known = {f.name for f in dataclasses.fields(sub)}
                if set(val) - sub_known:
                    raise ConfigError(f"unknown keys in [{key}]: {sorted(set(val) - sub_known)}")
                kw[key] = sub(**val)
            else:
                kw[key] = val
        if "name" not in kw or "mode" not in kw:
            raise ConfigError("scenario needs 'name' and 'mode'")
        return cls(**kw)

    def to_toml(self) -> str:
        doc = tomlkit.document()
        data = self.to_dict()
        tables = {}
        for key, val in data.items():
            if isinstance(val, dict):
                tables[key] = val
            else:
                doc[key] = val
        for key, val in tables.items():
            t = tomlkit.table()
            for k, v in val.items():
                t[k] = v
            doc[key] = t
        return tomlkit.dumps(doc)

    @classmethod
    def from_toml(cls, text: str) -> "ScenarioConfig":
        try:
            data = tomlkit.parse(text)
        except Exception as exc:  # tomlkit raises its own ParseError hierarchy
            raise ConfigError(f"TOML parse error: {exc}") from exc
        return cls.from_dict(data)


def _plain(obj):
    """tomlkit containers to builtin types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_plain(v) for v in obj]
    if isinstance(obj, bool):
        return bool(obj)
    if isinstance(obj, int):
        return int(obj)
    if isinstance(obj, float):
        return float(obj)
    if isinstance(obj, str):
        return str(obj)
    return obj


def shipped_scenarios() -> list[str]:
    root = resources.files("hypocoercive") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_scenario(ref: str) -> ScenarioConfig:
    """Load by shipped name (``kfp-quadratic``) or by file path."""
    path = Path(ref)
    if path.suffix == ".toml" or path.exists():
        if not path.exists():
            raise ConfigError(f"scenario file {ref} not found")
        return ScenarioConfig.from_toml(path.read_text())
    res = resources.files("hypocoercive") / "scenarios" / f"{ref}.toml"
    if not res.is_file():
        raise ConfigError(f"unknown scenario {ref!r}; shipped: {', '.join(shipped_scenarios())}")
    return ScenarioConfig.from_toml(res.read_text())


def frame_to_text(fields: list[VectorField], names) -> list[str]:
    return [format_field(F, names) for F in fields]
