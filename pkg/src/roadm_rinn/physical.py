"""Power ledger along lightpaths and the failure taxonomy.

Power is tracked in dB: the source transponder launches at its (possibly
degraded) power, amplifiers add gain, WSSs and fiber spans subtract loss.
The running value never drops below the noise floor.  A break, or excessive
filtering of the lightpath's own wavelength, forces the output of that
component to the floor and the signal is lost for the rest of the path;
downstream amplifiers still lift the floor-level power they receive.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, KindMismatch, NotEnoughComponents
from .provisioning import Lightpath
from .topology import CATEGORIES, Component, ComponentGraph


class FailureType(str, Enum):
    TRANSPONDER_BREAK = "transponder_break"
    LAUNCH_POWER_DEGRADATION = "launch_power_degradation"
    AMPLIFIER_BREAK = "amplifier_break"
    GAIN_DEGRADATION = "gain_degradation"
    WSS_BREAK = "wss_break"
    EXCESSIVE_FILTERING = "excessive_filtering"
    EXTRA_ATTENUATION = "extra_attenuation"
    FIBER_BREAK = "fiber_break"
    LOSS_DEGRADATION = "loss_degradation"

    @property
    def is_hard(self) -> bool:
        return self in _HARD


_HARD = {
    FailureType.TRANSPONDER_BREAK,
    FailureType.AMPLIFIER_BREAK,
    FailureType.WSS_BREAK,
    FailureType.EXCESSIVE_FILTERING,
    FailureType.FIBER_BREAK,
}

TYPES_BY_CATEGORY = {
    "transponder": (FailureType.TRANSPONDER_BREAK, FailureType.LAUNCH_POWER_DEGRADATION),
    "amplifier": (FailureType.AMPLIFIER_BREAK, FailureType.GAIN_DEGRADATION),
    "wss": (
        FailureType.WSS_BREAK,
        FailureType.EXCESSIVE_FILTERING,
        FailureType.EXTRA_ATTENUATION,
    ),
    "fiber": (FailureType.FIBER_BREAK, FailureType.LOSS_DEGRADATION),
}

# soft-failure magnitude ranges, dB
MAGNITUDE_RANGES = {
    FailureType.LAUNCH_POWER_DEGRADATION: (2.0, 6.0),
    FailureType.GAIN_DEGRADATION: (3.0, 10.0),
    FailureType.EXTRA_ATTENUATION: (2.0, 8.0),
    FailureType.LOSS_DEGRADATION: (2.0, 8.0),
}


@dataclass(frozen=True)
class Failure:
    component: int
    type: FailureType
    magnitude: float = 0.0
    wavelength: int | None = None  # excessive filtering only

    def to_dict(self) -> dict:
        return {
            "component": self.component,
            "type": self.type.value,
            "magnitude": round(self.magnitude, 4),
            "wavelength": self.wavelength,
        }

    @classmethod
    def from_dict(cls, doc) -> "Failure":
        return cls(doc["component"], FailureType(doc["type"]), doc["magnitude"], doc["wavelength"])


@dataclass(frozen=True)
class FailureScenario:
    failures: tuple[Failure, ...] = ()

    def __post_init__(self):
        ids = [f.component for f in self.failures]
        if len(set(ids)) != len(ids):
            raise ConfigError("failure scenario lists a component twice")

    @property
    def components(self) -> frozenset[int]:
        return frozenset(f.component for f in self.failures)

    def by_component(self) -> dict[int, Failure]:
        return {f.component: f for f in self.failures}


@dataclass(frozen=True)
class PowerModel:
    jitter_sigma_db: float = 0.1
    noise_floor_dbm: float = -60.0
    sensitivity_dbm: float = -25.0

    def __post_init__(self):
        if self.jitter_sigma_db < 0:
            raise ConfigError("jitter_sigma_db must be >= 0")


@dataclass(frozen=True)
class Effective:
    """Operating point of one component under a scenario.

    ``value`` is launch power (dBm) for transponders, gain (dB) for
    amplifiers and loss (dB) for WSSs and spans.
    """

    value: float
    broken: bool = False
    blocked: frozenset[int] = field(default_factory=frozenset)


def check_applicable(component: Component, ftype: FailureType) -> None:
    if ftype not in TYPES_BY_CATEGORY[component.category]:
        raise KindMismatch(f"{ftype.value} does not apply to {component.kind.value}")


def effective_params(component: Component, scenario: FailureScenario | None) -> Effective:
    failure = scenario.by_component().get(component.id) if scenario else None
    if failure is None:
        return Effective(component.nominal)
    check_applicable(component, failure.type)
    t = failure.type
    if t in (FailureType.LAUNCH_POWER_DEGRADATION, FailureType.GAIN_DEGRADATION):
        return Effective(component.nominal - failure.magnitude)
    if t in (FailureType.EXTRA_ATTENUATION, FailureType.LOSS_DEGRADATION):
        return Effective(component.nominal + failure.magnitude)
    if t is FailureType.EXCESSIVE_FILTERING:
        return Effective(component.nominal, blocked=frozenset({failure.wavelength}))
    return Effective(component.nominal, broken=True)


def ledger(
    lp: Lightpath,
    graph: ComponentGraph,
    scenario: FailureScenario | None,
    model: PowerModel,
) -> tuple[np.ndarray, int]:
    """Jitter-free readings after components 1..p-1 and the reception flag."""
    comps = graph.components
    failures = scenario.by_component() if scenario else {}
    floor = model.noise_floor_dbm
    out = np.empty(lp.length - 1)
    alive = True
    power = 0.0
    for idx in range(lp.length - 1):
        comp = comps[lp.components[idx]]
        eff = effective_params(comp, scenario) if comp.id in failures else Effective(comp.nominal)
        if eff.broken or lp.wavelength in eff.blocked:
            power = floor
            alive = False
        elif idx == 0:
            power = eff.value
        elif comp.kind.is_amplifier:
            power = power + eff.value
        else:
            power = power - eff.value
        power = max(power, floor)
        out[idx] = power
    flag = int(alive and power >= model.sensitivity_dbm)
    return out, flag


def propagate(
    lp: Lightpath,
    graph: ComponentGraph,
    scenario: FailureScenario | None,
    model: PowerModel,
    rng: np.random.Generator | int | None = None,
) -> tuple[np.ndarray, int]:
    """Readings at every OPM slot of ``lp`` plus the terminal flag.

    Gaussian jitter of ``model.jitter_sigma_db`` is added per reading when a
    generator or seed is given.
    """
    readings, flag = ledger(lp, graph, scenario, model)
    if model.jitter_sigma_db > 0 and rng is not None:
        rng = np.random.default_rng(rng)
        readings = readings + rng.normal(0.0, model.jitter_sigma_db, size=readings.shape)
    return readings, flag


def candidate_components(graph: ComponentGraph, lightpaths: list[Lightpath]) -> list[int]:
    """Traversed components that can show a failure on some lightpath.

    Transponder failures only change launch power, so a transponder counts
    only if it is the source of at least one lightpath.
    """
    traversed = set()
    for lp in lightpaths:
        traversed.add(lp.components[0])
        traversed.update(lp.components[1:-1])
    return sorted(traversed)


def sample_failure_scenario(
    graph: ComponentGraph,
    lightpaths: list[Lightpath],
    n_f_set,
    type_filter: str | None,
    rng: np.random.Generator,
) -> FailureScenario:
    n_f_set = list(n_f_set)
    if not n_f_set:
        raise ConfigError("n_f_set must not be empty")
    if type_filter is not None and type_filter not in CATEGORIES:
        raise ConfigError(f"unknown failure type filter {type_filter!r}")
    candidates = candidate_components(graph, lightpaths)
    if type_filter is not None:
        candidates = [c for c in candidates if graph.components[c].category == type_filter]
    n_f = int(n_f_set[rng.integers(len(n_f_set))])
    if n_f > len(candidates):
        raise NotEnoughComponents(f"{n_f} failures requested, {len(candidates)} candidates")
    picked = rng.choice(len(candidates), size=n_f, replace=False)
    failures = []
    for k in picked:
        comp = graph.components[candidates[int(k)]]
        types = TYPES_BY_CATEGORY[comp.category]
        ftype = types[int(rng.integers(len(types)))]
        magnitude = 0.0
        wavelength = None
        if ftype in MAGNITUDE_RANGES:
            lo, hi = MAGNITUDE_RANGES[ftype]
            magnitude = float(rng.uniform(lo, hi))
        elif ftype is FailureType.EXCESSIVE_FILTERING:
            waves = sorted({lp.wavelength for lp in lightpaths if comp.id in lp.components})
            wavelength = int(waves[int(rng.integers(len(waves)))])
        failures.append(Failure(comp.id, ftype, magnitude, wavelength))
    return FailureScenario(tuple(failures))
