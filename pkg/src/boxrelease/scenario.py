"""Units, constants and the scenario record shared by every computation.

Internal units are kg, micrometres and milliseconds throughout, so hbar is
of order 1e-25 and hbar/m of order one for rubidium.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

HBAR_SI = 1.054571817e-34  # J s (CODATA 2018, exact in SI 2019)
RB_MASS_KG = 1.42e-25

# 1 J s = 1 kg m^2 / s = 1e12 kg um^2 / 1e3 ms
_JS_TO_KG_UM2_PER_MS = 1e12 / 1e3


def unit_hbar() -> float:
    """Reduced Planck constant in kg um^2 / ms."""
    return HBAR_SI * _JS_TO_KG_UM2_PER_MS


class ScenarioError(ValueError):
    """Raised by :func:`validate`; ``errors`` lists every violated invariant."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = field(default_factory=unit_hbar)
    mass: float = RB_MASS_KG

    @property
    def hbar_over_m(self) -> float:
        return self.hbar / self.mass


@dataclass(frozen=True)
class BoxGeometry:
    L: float = 1.0


@dataclass(frozen=True)
class Eigenstate:
    """Box eigenstate sqrt(2/L) sin(n pi x / L)."""

    n: int

    def spec(self) -> str:
        return f"n:{self.n}"


@dataclass(frozen=True)
class TruncatedGaussian:
    """Motionless Gaussian of rms width ``sigma0`` cut to the box."""

    x0: float
    sigma0: float

    def spec(self) -> str:
        return f"gaussian:{self.x0!r},{self.sigma0!r}"


@dataclass(frozen=True)
class FreeGaussian:
    """Untruncated Gaussian with the same parameters, for comparison runs."""

    x0: float
    sigma0: float

    def spec(self) -> str:
        return f"free-gaussian:{self.x0!r},{self.sigma0!r}"


InitialState = Union[Eigenstate, TruncatedGaussian, FreeGaussian]


def parse_state(text: str) -> InitialState:
    """Parse ``n:<int>``, ``gaussian:<x0>,<sigma0>`` or ``free-gaussian:<x0>,<sigma0>``."""
    kind, sep, rest = text.strip().partition(":")
    if not sep:
        raise ValueError(f"bad state spec {text!r}")
    kind = kind.strip().lower()
    try:
        if kind == "n":
            return Eigenstate(int(rest))
        if kind in ("gaussian", "free-gaussian"):
            x0, sigma0 = (float(v) for v in rest.split(","))
            cls = TruncatedGaussian if kind == "gaussian" else FreeGaussian
            return cls(x0, sigma0)
    except ValueError as exc:
        raise ValueError(f"bad state spec {text!r}: {exc}") from None
    raise ValueError(f"unknown state kind {kind!r} in {text!r}")


@dataclass(frozen=True)
class GridSpec:
    min: float
    max: float
    count: int

    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.count)

    def spec(self) -> str:
        return f"{self.min!r}:{self.max!r}:{self.count}"

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        lo, hi, count = text.split(":")
        return cls(float(lo), float(hi), int(count))


@dataclass(frozen=True)
class Scenario:
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    geometry: BoxGeometry = field(default_factory=BoxGeometry)
    state: InitialState = field(default_factory=lambda: Eigenstate(1))
    detector_x: float = 2.0
    t_start: float = 1e-6
    t_max: float = 0.15
    x_grid: GridSpec = field(default_factory=lambda: GridSpec(-1.0, 2.0, 301))
    t_count: int = 301

    @property
    def L(self) -> float:
        return self.geometry.L

    @property
    def t_grid(self) -> GridSpec:
        return GridSpec(self.t_start, self.t_max, self.t_count)

    def with_state(self, state: InitialState) -> "Scenario":
        return replace(self, state=state)

    def to_dict(self) -> dict:
        return {
            "mass_kg": self.constants.mass,
            "hbar_kg_um2_per_ms": self.constants.hbar,
            "box_length_um": self.L,
            "state": self.state.spec(),
            "detector_x_um": self.detector_x,
            "t_start_ms": self.t_start,
            "t_max_ms": self.t_max,
            "x_grid": self.x_grid.spec(),
            "t_count": self.t_count,
        }


def wavenumber(n: int, L: float) -> float:
    """k_n = n pi / L in 1/um."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if L <= 0:
        raise ValueError("L must be > 0")
    return n * math.pi / L


def semiclassical_time(n: int, scenario: Scenario) -> float:
    """Time m L^2 / (2 n pi hbar), in ms, after which the two packets separate."""
    if n < 1:
        raise ValueError("n must be >= 1")
    c = scenario.constants
    return c.mass * scenario.L**2 / (2 * n * math.pi * c.hbar)


def semiclassical_velocity(n: int, scenario: Scenario) -> float:
    """v_n = hbar k_n / m in um/ms."""
    return scenario.constants.hbar_over_m * wavenumber(n, scenario.L)


def _finite(v) -> bool:
    return isinstance(v, (int, float)) and math.isfinite(v)


def validate(scenario: Scenario) -> Scenario:
    """Check every invariant; raise :class:`ScenarioError` listing all failures.

    A Gaussian whose +-2 sigma band leaves the box only triggers a warning,
    since truncation by the walls is part of the model.
    """
    errors: list[str] = []
    c = scenario.constants
    if not (_finite(c.hbar) and c.hbar > 0):
        errors.append("hbar must be > 0")
    if not (_finite(c.mass) and c.mass > 0):
        errors.append("mass must be > 0")
    L = scenario.L
    if not (_finite(L) and L > 0):
        errors.append("L must be > 0")

    st = scenario.state
    if isinstance(st, Eigenstate):
        if not isinstance(st.n, (int, np.integer)) or st.n < 1:
            errors.append("n must be ≥ 1")
    elif isinstance(st, (TruncatedGaussian, FreeGaussian)):
        if not (_finite(st.sigma0) and st.sigma0 > 0):
            errors.append("sigma0 must be > 0")
        if not _finite(st.x0):
            errors.append("x0 must be finite")
        elif isinstance(st, TruncatedGaussian) and _finite(L) and not 0 < st.x0 < L:
            errors.append("x0 outside box")
        elif (
            isinstance(st, TruncatedGaussian)
            and _finite(st.sigma0)
            and _finite(L)
            and (st.x0 - 2 * st.sigma0 < -1e-12 or st.x0 + 2 * st.sigma0 > L + 1e-12)
        ):
            warnings.warn(
                "gaussian x0 +- 2 sigma0 extends past the walls; truncation is significant",
                stacklevel=2,
            )
    else:
        errors.append(f"unknown initial state {st!r}")

    if not _finite(scenario.detector_x):
        errors.append("detector_x must be finite")
    if not (_finite(scenario.t_start) and _finite(scenario.t_max)):
        errors.append("t_start and t_max must be finite")
    elif not 0 < scenario.t_start < scenario.t_max:
        errors.append("need 0 < t_start < t_max")
    g = scenario.x_grid
    if g.count < 2:
        errors.append("x_grid count must be ≥ 2")
    if not (_finite(g.min) and _finite(g.max) and g.min < g.max):
        errors.append("x_grid needs finite min < max")
    if scenario.t_count < 2:
        errors.append("t_count must be ≥ 2")
    if errors:
        raise ScenarioError(errors)
    return scenario


# Flat key=value config --------------------------------------------------------

CONFIG_KEYS = (
    "mass_kg",
    "box_length_um",
    "state",
    "detector_x_um",
    "t_start_ms",
    "t_max_ms",
    "x_min_um",
    "x_max_um",
    "x_count",
    "t_count",
)


def read_config(path) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value.strip()
    return out


def scenario_from_mapping(values: dict[str, str], base: Scenario | None = None) -> Scenario:
    """Build a scenario from config-style string values layered over ``base``."""
    sc = base or Scenario()
    constants, geometry = sc.constants, sc.geometry
    if "mass_kg" in values:
        constants = replace(constants, mass=float(values["mass_kg"]))
    if "box_length_um" in values:
        geometry = BoxGeometry(float(values["box_length_um"]))
    x_grid = sc.x_grid
    if any(k in values for k in ("x_min_um", "x_max_um", "x_count")):
        x_grid = GridSpec(
            float(values.get("x_min_um", x_grid.min)),
            float(values.get("x_max_um", x_grid.max)),
            int(values.get("x_count", x_grid.count)),
        )
    return replace(
        sc,
        constants=constants,
        geometry=geometry,
        state=parse_state(values["state"]) if "state" in values else sc.state,
        detector_x=float(values.get("detector_x_um", sc.detector_x)),
        t_start=float(values.get("t_start_ms", sc.t_start)),
        t_max=float(values.get("t_max_ms", sc.t_max)),
        x_grid=x_grid,
        t_count=int(values.get("t_count", sc.t_count)),
    )
