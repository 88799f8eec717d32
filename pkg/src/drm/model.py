"""Model parameters, derived resonance geometry, and config parsing.

Dimensionless units throughout (G, V of order 1), driving period T = 2*pi/omega.
Config files are TOML with sections [model], [classical], [quantum], [run]; every
key is optional and falls back to the defaults documented in the dataclasses below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


class ConfigError(ValueError):
    """Raised for malformed or invalid configuration input."""


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the driven dissipative rotor.

    g: nonlinearity; v_plus / v_minus: strengths of the two counter-rotating
    waves; omega: driving frequency; gamma: relaxation constant; hbar:
    effective Planck constant (quantum modules only).
    """

    g: float = 1.0
    v_plus: float = 1.0
    v_minus: float = 1.0
    omega: float = 4.0
    gamma: float = 0.0
    hbar: float = 0.5

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"G must be > 0, got {self.g}")
        if self.v_plus < 0:
            raise ValueError(f"V_plus must be >= 0, got {self.v_plus}")
        if self.v_minus < 0:
            raise ValueError(f"V_minus must be >= 0, got {self.v_minus}")
        if not self.omega > 0:
            raise ValueError(f"omega must be > 0, got {self.omega}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be > 0, got {self.hbar}")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega


@dataclass(frozen=True)
class ResonanceGeometry:
    """Derived classical quantities: resonance centers/widths, limit-cycle phase.

    theta0 is the magnitude of the locked phase, arcsin(gamma*I+/V+) in
    [0, pi/2]; the co-rotating coordinate of the stable cycle is -theta0 and
    theta0_unstable = pi - theta0 is the repelling partner.  Both are None when
    |gamma*I+/V+| > 1 (no limit cycle).
    """

    i_plus: float
    i_minus: float
    delta_i_plus: float
    delta_i_minus: float
    gamma_critical: float
    theta0: float | None
    theta0_unstable: float | None


def derive_geometry(params: ModelParams) -> ResonanceGeometry:
    """Resonance centers I = +/- omega/G, widths 4*sqrt(V/G), cycle phase."""
    i_plus = params.omega / params.g
    ratio = math.inf
    if params.v_plus > 0:
        ratio = params.gamma * i_plus / params.v_plus
    elif params.gamma == 0.0:
        ratio = 0.0
    if abs(ratio) <= 1.0:
        theta0 = math.asin(ratio)
        theta0_unstable = math.pi - theta0
    else:
        theta0 = theta0_unstable = None
    return ResonanceGeometry(
        i_plus=i_plus,
        i_minus=-i_plus,
        delta_i_plus=4.0 * math.sqrt(params.v_plus / params.g),
        delta_i_minus=4.0 * math.sqrt(params.v_minus / params.g),
        gamma_critical=params.v_plus * params.g / params.omega,
        theta0=theta0,
        theta0_unstable=theta0_unstable,
    )


@dataclass
class ClassicalSettings:
    steps_per_period: int = 512
    t_final_periods: int = 300
    horizon_periods: int = 400
    grid_theta: int = 200
    grid_action: int = 200
    n_particles: int = 10_000
    bins: int = 120
    tol: float | None = None  # None -> 0.1 * delta_i_plus


@dataclass
class QuantumSettings:
    n_max: int | None = None  # None -> default_n_max(params)
    steps_per_period: int = 512
    t_final_periods: int = 300
    sample_every_periods: int = 10
    snapshots: bool = False


@dataclass
class RunSettings:
    out_dir: str | None = None
    seed: int = 0
    workers: int = 1
    top_k: int = 100
    sweep: str | None = None
    label: str = ""


_SECTIONS = {
    "model": {
        "G": ("g", float), "V_plus": ("v_plus", float), "V_minus": ("v_minus", float),
        "omega": ("omega", float), "gamma": ("gamma", float), "hbar": ("hbar", float),
    },
}


@dataclass
class RunConfig:
    params: ModelParams
    classical: ClassicalSettings = field(default_factory=ClassicalSettings)
    quantum: QuantumSettings = field(default_factory=QuantumSettings)
    run: RunSettings = field(default_factory=RunSettings)


# expected types for fields whose default is None
_OPTIONAL_TYPES = {"n_max": int, "tol": float, "out_dir": str, "sweep": str}


def _fill_section(cls, data: dict, section: str):
    known = {f.name for f in fields(cls)}
    out = cls()
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key '{key}' in [{section}]")
        default = getattr(out, key)
        want = _OPTIONAL_TYPES.get(key, type(default) if default is not None else None)
        ok = True
        if want is bool:
            ok = isinstance(value, bool)
        elif want is int:
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif want is float:
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            value = float(value) if ok else value
        elif want is str:
            ok = isinstance(value, str)
        if not ok:
            raise ConfigError(f"key '{key}' in [{section}] has wrong type: {value!r}")
        setattr(out, key, value)
    return out


def load_config(source) -> RunConfig:
    """Parse a TOML config (path or string) into params + run directives.

    Unknown keys and constraint violations raise ConfigError naming the key.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        try:
            with open(source, "rb") as fh:
                text = fh.read().decode()
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {source}")
        except (OSError, IsADirectoryError) as exc:
            raise ConfigError(f"cannot read config {source}: {exc}")
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}")

    unknown = set(doc) - {"model", "classical", "quantum", "run"}
    if unknown:
        raise ConfigError(f"unknown section '{sorted(unknown)[0]}'")

    kwargs = {}
    for key, value in doc.get("model", {}).items():
        if key not in _SECTIONS["model"]:
            raise ConfigError(f"unknown key '{key}' in [model]")
        name, cast = _SECTIONS["model"][key]
        try:
            kwargs[name] = cast(value)
        except (TypeError, ValueError):
            raise ConfigError(f"key '{key}' in [model] has wrong type: {value!r}")
    try:
        params = ModelParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc))

    return RunConfig(
        params=params,
        classical=_fill_section(ClassicalSettings, doc.get("classical", {}), "classical"),
        quantum=_fill_section(QuantumSettings, doc.get("quantum", {}), "quantum"),
        run=_fill_section(RunSettings, doc.get("run", {}), "run"),
    )
