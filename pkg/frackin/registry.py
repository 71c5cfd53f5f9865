import logging
from typing import Callable, Mapping, Optional

import numpy as np
from fuzzywuzzy import process
from scipy.integrate import trapezoid

from frackin.errors import UnknownRegistryNameError
from frackin.phase import PhaseGrid

log = logging.getLogger(__name__)

SUGGESTION_CUTOFF = 75

# Scenario slots a named rule can fill
SLOTS = (
    "hamiltonian",
    "external_force",
    "pair_force",
    "electric",
    "magnetic",
    "initial",
    "background",
)

Builder = Callable[[Mapping, PhaseGrid], object]


def suggest(name: str, choices: list) -> Optional[str]:
    """Closest choice to `name`, or None if nothing scores above the cutoff."""
    match_info = process.extractOne(name, choices, score_cutoff=SUGGESTION_CUTOFF)
    log.trace(f"Match info for `{name}`: {match_info}")
    return match_info[0] if match_info else None


class RuleRegistry:
    """Named analytic field, force and initial-state rules, grouped by slot."""

    def __init__(self):
        self._builders: dict = {slot: {} for slot in SLOTS}

    def register(self, name: str, *slots: str) -> Callable[[Builder], Builder]:
        """Register the decorated builder under `name` for every slot given."""

        def decorator(builder: Builder) -> Builder:
            for slot in slots:
                self._builders[slot][name] = builder
            return builder

        return decorator

    def names(self, slot: Optional[str] = None) -> list:
        """Sorted rule names, for one slot or across all of them."""
        if slot is not None:
            return sorted(self._builders[slot])
        return sorted({name for rules in self._builders.values() for name in rules})

    def resolve(self, slot: str, name: str) -> Builder:
        try:
            return self._builders[slot][name]
        except KeyError:
            raise UnknownRegistryNameError(
                f"rules.{slot}",
                f"no `{slot}` rule named `{name}` "
                + f"(known: {', '.join(self.names(slot))})",
                suggest(name, self.names(slot)),
            ) from None

    def build(self, slot: str, name: str, physics: Mapping, grid: PhaseGrid) -> object:
        """Build the rule `name` for `slot` from the physics parameters."""
        rule = self.resolve(slot, name)(physics, grid)
        log.trace(f"Built `{name}` for slot `{slot}`")
        return rule


rules = RuleRegistry()


# Hamiltonians H(qs, ps)
@rules.register("harmonic", "hamiltonian")
def _harmonic_hamiltonian(physics: Mapping, grid: PhaseGrid) -> Callable:
    mass, omega = physics["mass"], physics["omega"]

    def hamiltonian(qs: list, ps: list) -> np.ndarray:
        kinetic = sum(p**2 for p in ps) / (2.0 * mass)
        return kinetic + 0.5 * mass * omega**2 * sum(q**2 for q in qs)

    return hamiltonian


@rules.register("zero", "hamiltonian")
def _zero_hamiltonian(physics: Mapping, grid: PhaseGrid) -> Callable:
    return lambda qs, ps: 0.0


# Forces F(q, p, t) on one particle and pair forces F_12(q1, p1, q2, p2)
@rules.register("harmonic", "external_force")
def _harmonic_force(physics: Mapping, grid: PhaseGrid) -> Callable:
    stiffness = physics["mass"] * physics["omega"] ** 2
    return lambda q, p, t: -stiffness * q


@rules.register("zero", "external_force")
def _zero_force(physics: Mapping, grid: PhaseGrid) -> Callable:
    return lambda q, p, t: np.zeros(np.broadcast(q, p).shape)


@rules.register("linear-coupling", "pair_force")
def _linear_coupling(physics: Mapping, grid: PhaseGrid) -> Callable:
    kappa = physics["kappa"]
    return lambda q1, p1, q2, p2: kappa * (q2 - q1)


@rules.register("zero", "pair_force")
def _zero_pair_force(physics: Mapping, grid: PhaseGrid) -> Callable:
    return lambda q1, p1, q2, p2: 0.0


# External electromagnetic fields
@rules.register("constant-E", "electric")
def _constant_electric(physics: Mapping, grid: PhaseGrid) -> Callable:
    strength, axis = physics["e_field"], physics["e_axis"] - 1

    def electric(qs: list) -> list:
        return [strength if k == axis else 0.0 for k in range(len(qs))]

    return electric


@rules.register("zero", "electric")
def _zero_electric(physics: Mapping, grid: PhaseGrid) -> None:
    return None


@rules.register("uniform-B", "magnetic")
def _uniform_magnetic(physics: Mapping, grid: PhaseGrid) -> tuple:
    axis = physics["b_axis"] - 1
    return tuple(physics["b_field"] if k == axis else 0.0 for k in range(3))


@rules.register("zero", "magnetic")
def _zero_magnetic(physics: Mapping, grid: PhaseGrid) -> tuple:
    return (0.0, 0.0, 0.0)


# Initial states and backgrounds
@rules.register("gaussian", "initial")
def _gaussian(physics: Mapping, grid: PhaseGrid) -> Callable:
    q0, p0, sigma = physics["q0"], physics["p0"], physics["sigma"]

    def gaussian(qs: list, ps: list) -> np.ndarray:
        distance = sum((q - q0) ** 2 for q in qs) + sum((p - p0) ** 2 for p in ps)
        return np.exp(-distance / (2.0 * sigma**2))

    return gaussian


def _momentum_gaussian(grid: PhaseGrid, p0: float, sigma: float) -> list:
    """Per-axis Gaussians in p, each with unit trapezoid mass on its axis."""
    profiles = []
    for k, axis in enumerate(grid.p_axes):
        profile = np.exp(-((axis.nodes - p0) ** 2) / (2.0 * sigma**2))
        profile = profile / trapezoid(profile, dx=axis.h)
        shape = [1] * len(grid.axes)
        shape[grid.p_axis(k)] = -1
        profiles.append(profile.reshape(shape))
    return profiles


@rules.register("point-bump", "initial")
def _point_bump(physics: Mapping, grid: PhaseGrid) -> Callable:
    """Discrete delta 1/h at the q node nearest q0, Gaussian in p."""
    bump = np.ones([1] * len(grid.axes))
    for k, axis in enumerate(grid.q_axes):
        spike = np.zeros(axis.count)
        spike[int(np.argmin(np.abs(axis.nodes - physics["q0"])))] = 1.0 / axis.h
        shape = [1] * len(grid.axes)
        shape[grid.q_axis(k)] = -1
        bump = bump * spike.reshape(shape)
    for profile in _momentum_gaussian(grid, physics["p0"], physics["sigma"]):
        bump = bump * profile
    return lambda qs, ps: bump


@rules.register("maxwellian", "background")
def _maxwellian(physics: Mapping, grid: PhaseGrid) -> Callable:
    width = np.sqrt(physics["mass"] * physics["temperature"])
    profile = np.ones([1] * len(grid.axes))
    for factor in _momentum_gaussian(grid, 0.0, width):
        profile = profile * factor
    return lambda ps: profile


@rules.register("zero", "background")
def _zero_background(physics: Mapping, grid: PhaseGrid) -> None:
    return None
