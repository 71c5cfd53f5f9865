import enum
import functools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from frackin.checks import check_finite, check_positive, check_same_grid
from frackin.constants import Gates
from frackin.diagnostics import Diagnostics, DiagnosticsRecord
from frackin.errors import (
    DomainError,
    GridError,
    GridMismatchError,
    NumericalInstabilityError,
    StabilityError,
)
from frackin.fraccore import (
    FractionalOrder,
    Grid1D,
    caputo_along,
    classical_along,
    fractional_cell_measure,
    scaled_caputo_along,
    volume_scale_factor,
)

log = logging.getLogger(__name__)

MAX_DEGREES_OF_FREEDOM = 3


# Domain types
@dataclass(frozen=True)
class PhaseGrid:
    """
    Tensor-product grid over (q_1, ..., q_n, p_1, ..., p_n).

    Field values are stored with the q axes first, then the p axes.
    """

    q_axes: tuple
    p_axes: tuple

    def __post_init__(self):
        object.__setattr__(self, "q_axes", tuple(self.q_axes))
        object.__setattr__(self, "p_axes", tuple(self.p_axes))
        if len(self.q_axes) != len(self.p_axes):
            raise GridError("a phase grid needs as many momentum as coordinate axes")
        if not 1 <= len(self.q_axes) <= MAX_DEGREES_OF_FREEDOM:
            raise GridError(
                f"phase grids support 1 to {MAX_DEGREES_OF_FREEDOM} degrees of "
                + f"freedom, got {len(self.q_axes)}"
            )

    @classmethod
    def uniform(cls, n: int, lower: float, h: float, count: int) -> "PhaseGrid":
        """Grid with the same 1-D axis in every direction."""
        axis = Grid1D(lower, h, count)
        return cls((axis,) * n, (axis,) * n)

    @property
    def n(self) -> int:
        return len(self.q_axes)

    @property
    def axes(self) -> tuple:
        return self.q_axes + self.p_axes

    @property
    def shape(self) -> tuple:
        return tuple(axis.count for axis in self.axes)

    @property
    def cell_volume(self) -> float:
        return math.prod(axis.h for axis in self.axes)

    def q_axis(self, k: int) -> int:
        """Array axis holding q_k (0-based k)."""
        return k

    def p_axis(self, k: int) -> int:
        """Array axis holding p_k (0-based k)."""
        return self.n + k

    def mesh(self) -> tuple:
        """Broadcastable coordinate arrays `(qs, ps)`."""
        nodes = (axis.nodes for axis in self.axes)
        grids = np.meshgrid(*nodes, indexing="ij", sparse=True)
        return list(grids[: self.n]), list(grids[self.n :])

    def fractional_measure(self, order: FractionalOrder) -> np.ndarray:
        """Cell measure of the fractional volume element at every node."""
        measure = np.ones(self.shape)
        for index, axis in enumerate(self.axes):
            shape = [1] * len(self.axes)
            shape[index] = -1
            measure = measure * fractional_cell_measure(axis, order).reshape(shape)
        return measure


@dataclass(frozen=True, eq=False)
class PhaseField:
    """Real field sampled on every node of a `PhaseGrid`."""

    grid: PhaseGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridError(f"expected shape {self.grid.shape}, got {values.shape}")
        check_finite("phase field", values)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(
        cls, grid: PhaseGrid, function: Callable[[list, list], np.ndarray]
    ) -> "PhaseField":
        """Sample `function(qs, ps)` on the grid mesh; scalars broadcast."""
        qs, ps = grid.mesh()
        values = np.broadcast_to(np.asarray(function(qs, ps), dtype=float), grid.shape)
        return cls(grid, values)

    @classmethod
    def zeros(cls, grid: PhaseGrid) -> "PhaseField":
        return cls(grid, np.zeros(grid.shape))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


class Weighting(str, enum.Enum):
    """Measure used to normalize a density."""

    PLAIN = "plain"
    FRACTIONAL = "fractional"


def plain_mass(field: PhaseField) -> float:
    """Riemann sum with the plain cell volume."""
    return float(np.sum(field.values) * field.grid.cell_volume)


def fractional_mass(field: PhaseField, order: FractionalOrder) -> float:
    """Riemann sum with the fractional cell measure of every axis."""
    return float(np.sum(field.values * field.grid.fractional_measure(order)))


def l2_norm(field: PhaseField) -> float:
    return float(np.sqrt(np.sum(np.square(field.values)) * field.grid.cell_volume))


@dataclass(frozen=True, eq=False)
class PhaseDensity:
    """Probability density on a phase grid together with its normalizing measure."""

    field: PhaseField
    weighting: Weighting = Weighting.PLAIN
    order: Optional[FractionalOrder] = None

    def __post_init__(self):
        if self.weighting is Weighting.FRACTIONAL and self.order is None:
            raise DomainError("fractional weighting needs an order")

    @classmethod
    def normalized(
        cls,
        field: PhaseField,
        weighting: Weighting = Weighting.PLAIN,
        order: Optional[FractionalOrder] = None,
    ) -> "PhaseDensity":
        """Scale a non-negative field to unit mass in the requested measure."""
        if np.any(field.values < 0):
            raise DomainError("a density must be non-negative")
        unnormalized = cls(field, weighting, order)
        mass = unnormalized.mass()
        check_positive("density mass", mass)
        return cls(PhaseField(field.grid, field.values / mass), weighting, order)

    @property
    def grid(self) -> PhaseGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    def mass(self) -> float:
        if self.weighting is Weighting.FRACTIONAL:
            return fractional_mass(self.field, self.order)
        return plain_mass(self.field)

    def with_values(self, values: np.ndarray) -> "PhaseDensity":
        return PhaseDensity(PhaseField(self.grid, values), self.weighting, self.order)


@dataclass(frozen=True)
class HamiltonianSpec:
    """A sampled Hamiltonian H(q, p) or an explicit pair of field lists (V, F)."""

    hamiltonian: Optional[PhaseField] = None
    velocities: Optional[tuple] = None
    forces: Optional[tuple] = None

    def __post_init__(self):
        explicit = self.velocities is not None and self.forces is not None
        if (self.hamiltonian is None) == (not explicit):
            raise DomainError("give either a Hamiltonian or both field lists")
        if explicit:
            object.__setattr__(self, "velocities", tuple(self.velocities))
            object.__setattr__(self, "forces", tuple(self.forces))
            _check_field_lists(self.velocities, self.forces)

    @classmethod
    def analytic(
        cls, grid: PhaseGrid, function: Callable[[list, list], np.ndarray]
    ) -> "HamiltonianSpec":
        return cls(hamiltonian=PhaseField.sample(grid, function))

    @classmethod
    def from_fields(cls, velocities: Sequence, forces: Sequence) -> "HamiltonianSpec":
        return cls(velocities=tuple(velocities), forces=tuple(forces))

    @property
    def is_analytic(self) -> bool:
        return self.hamiltonian is not None

    @property
    def grid(self) -> PhaseGrid:
        if self.hamiltonian is not None:
            return self.hamiltonian.grid
        return self.velocities[0].grid


class EvolutionForm(str, enum.Enum):
    """Right-hand side used by `liouville_evolve`."""

    CONTINUITY = "continuity"
    BRACKET = "bracket"
    ADVECTIVE = "advective"


def _check_field_lists(velocities: Sequence, forces: Sequence) -> None:
    if len(velocities) != len(forces) or not velocities:
        raise GridMismatchError(
            f"need matching non-empty V and F lists, got {len(velocities)} "
            + f"and {len(forces)}"
        )
    check_same_grid(*velocities, *forces)
    if len(velocities) != velocities[0].grid.n:
        raise GridMismatchError(
            f"{len(velocities)} field components for {velocities[0].grid.n} "
            + "degrees of freedom"
        )


# Derivatives along phase axes
def d_q(
    values: np.ndarray, grid: PhaseGrid, k: int, order: FractionalOrder
) -> np.ndarray:
    """Scale-factored Caputo derivative along q_k."""
    return scaled_caputo_along(values, grid.q_axes[k], order, grid.q_axis(k))


def d_p(
    values: np.ndarray, grid: PhaseGrid, k: int, order: FractionalOrder
) -> np.ndarray:
    """Scale-factored Caputo derivative along p_k."""
    return scaled_caputo_along(values, grid.p_axes[k], order, grid.p_axis(k))


def _raw_d_q(
    values: np.ndarray, grid: PhaseGrid, k: int, order: FractionalOrder
) -> np.ndarray:
    return caputo_along(values, grid.q_axes[k], order, grid.q_axis(k))


def _raw_d_p(
    values: np.ndarray, grid: PhaseGrid, k: int, order: FractionalOrder
) -> np.ndarray:
    return caputo_along(values, grid.p_axes[k], order, grid.p_axis(k))


def _scale(
    axis: Grid1D, index: int, grid: PhaseGrid, order: FractionalOrder
) -> np.ndarray:
    shape = [1] * len(grid.axes)
    shape[index] = -1
    return np.reshape(volume_scale_factor(axis.nodes, order), shape)


# Brackets and fields
def _bracket_values(
    a: np.ndarray, b: np.ndarray, grid: PhaseGrid, order: FractionalOrder
) -> np.ndarray:
    result = np.zeros(grid.shape)
    for k in range(grid.n):
        result += d_q(a, grid, k, order) * _raw_d_p(b, grid, k, order)
        result -= _raw_d_q(b, grid, k, order) * d_p(a, grid, k, order)
    return result


def fractional_bracket(
    A: PhaseField, B: PhaseField, order: FractionalOrder
) -> PhaseField:
    """
    Fractional bracket {A, B}_α.

    Each term pairs the scale factor of one axis with derivatives along both:
    Σ_k a(q_k) D_q A D_p B - a(p_k) D_q B D_p A, where a(x) = Γ(2-α) x^(α-1).
    At α = 1 this is the Poisson bracket.
    """
    check_same_grid(A, B)
    return PhaseField(A.grid, _bracket_values(A.values, B.values, A.grid, order))


def bracket_antisymmetry_residual(
    A: PhaseField, B: PhaseField, order: FractionalOrder
) -> float:
    """Max-norm of {A,B} + {B,A}; vanishes in general only at α = 1."""
    forward = fractional_bracket(A, B, order).values
    total = forward + fractional_bracket(B, A, order).values
    residual = float(np.max(np.abs(total)))
    if order.alpha != 1.0:
        log.trace(f"Bracket antisymmetry residual at alpha={order.alpha}: {residual}")
    return residual


def bracket_jacobi_residual(
    A: PhaseField, B: PhaseField, C: PhaseField, order: FractionalOrder
) -> float:
    """Max-norm of the cyclic Jacobi sum {A,{B,C}} + {B,{C,A}} + {C,{A,B}}."""
    total = (
        fractional_bracket(A, fractional_bracket(B, C, order), order).values
        + fractional_bracket(B, fractional_bracket(C, A, order), order).values
        + fractional_bracket(C, fractional_bracket(A, B, order), order).values
    )
    return float(np.max(np.abs(total)))


def hamiltonian_fields(hamiltonian: HamiltonianSpec, order: FractionalOrder) -> tuple:
    """Return `(V, F)` with V_k = D_{p_k} H and F_k = -D_{q_k} H."""
    if not hamiltonian.is_analytic:
        return list(hamiltonian.velocities), list(hamiltonian.forces)

    H = hamiltonian.hamiltonian
    grid = H.grid
    velocities = [
        PhaseField(grid, _raw_d_p(H.values, grid, k, order)) for k in range(grid.n)
    ]
    forces = [
        PhaseField(grid, -_raw_d_q(H.values, grid, k, order)) for k in range(grid.n)
    ]
    return velocities, forces


def helmholtz_residual(velocities: Sequence, forces: Sequence) -> float:
    """Max-norm of the three classical Helmholtz conditions over all index pairs."""
    _check_field_lists(velocities, forces)
    grid = velocities[0].grid

    def dq(field: PhaseField, i: int) -> np.ndarray:
        return classical_along(field.values, grid.q_axes[i], 1, grid.q_axis(i))

    def dp(field: PhaseField, i: int) -> np.ndarray:
        return classical_along(field.values, grid.p_axes[i], 1, grid.p_axis(i))

    residual = 0.0
    for i in range(grid.n):
        for j in range(grid.n):
            conditions = (
                dp(velocities[i], j) - dp(velocities[j], i),
                dq(velocities[j], i) + dp(forces[i], j),
                dq(forces[i], j) - dq(forces[j], i),
            )
            residual = max(residual, *(float(np.max(np.abs(c))) for c in conditions))
    return residual


# Liouville right-hand sides
def liouville_rhs(
    rho: PhaseDensity, velocities: Sequence, forces: Sequence, order: FractionalOrder
) -> PhaseField:
    """
    Continuity form -Σ D_q[ρ V_k] - Σ D_p[ρ F_k] with scale-factored derivatives.

    Products are formed before differentiating; the fractional derivative of a
    product is not the product rule.
    """
    _check_field_lists(velocities, forces)
    check_same_grid(rho.field, velocities[0])
    values = _continuity(rho.values, rho.grid, velocities, forces, order)
    return PhaseField(rho.grid, values)


def _continuity(
    values: np.ndarray,
    grid: PhaseGrid,
    velocities: Sequence,
    forces: Sequence,
    order: FractionalOrder,
) -> np.ndarray:
    result = np.zeros(grid.shape)
    for k in range(grid.n):
        result -= d_q(values * velocities[k].values, grid, k, order)
        result -= d_p(values * forces[k].values, grid, k, order)
    return result


def liouville_reduced_rhs(
    rho: PhaseDensity, velocities: Sequence, forces: Sequence, order: FractionalOrder
) -> PhaseField:
    """Advective form -Σ V_k D_q ρ - Σ F_k D_p ρ, valid for F_k(q), V_k(p)."""
    _check_field_lists(velocities, forces)
    check_same_grid(rho.field, velocities[0])
    values = _advective(rho.values, rho.grid, velocities, forces, order)
    return PhaseField(rho.grid, values)


def _advective(
    values: np.ndarray,
    grid: PhaseGrid,
    velocities: Sequence,
    forces: Sequence,
    order: FractionalOrder,
) -> np.ndarray:
    result = np.zeros(grid.shape)
    for k in range(grid.n):
        result -= velocities[k].values * d_q(values, grid, k, order)
        result -= forces[k].values * d_p(values, grid, k, order)
    return result


def bracket_rhs(
    rho: PhaseDensity, hamiltonian: HamiltonianSpec, order: FractionalOrder
) -> PhaseField:
    """Bracket form -{ρ, H}_α."""
    if not hamiltonian.is_analytic:
        raise DomainError("the bracket form needs a sampled Hamiltonian")
    bracket = fractional_bracket(rho.field, hamiltonian.hamiltonian, order)
    return PhaseField(rho.grid, -bracket.values)


def evolution_form_gap(
    rho: PhaseDensity, hamiltonian: HamiltonianSpec, order: FractionalOrder
) -> dict:
    """Max-norm differences between the continuity form and the other forms."""
    velocities, forces = hamiltonian_fields(hamiltonian, order)
    continuity = liouville_rhs(rho, velocities, forces, order).values
    advective = liouville_reduced_rhs(rho, velocities, forces, order).values
    gaps = {"advective_gap": float(np.max(np.abs(continuity - advective)))}
    if hamiltonian.is_analytic:
        gaps["bracket_gap"] = float(
            np.max(np.abs(continuity - bracket_rhs(rho, hamiltonian, order).values))
        )
    return gaps


# Time stepping
def rk4_step(
    rhs: Callable[[np.ndarray], np.ndarray], values: np.ndarray, dt: float
) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of dy/dt = rhs(y)."""
    k1 = rhs(values)
    k2 = rhs(values + 0.5 * dt * k1)
    k3 = rhs(values + 0.5 * dt * k2)
    k4 = rhs(values + dt * k3)
    return values + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def absorb_boundary(values: np.ndarray) -> np.ndarray:
    """Return a copy with every outermost layer set to zero."""
    values = np.array(values, dtype=float)
    for axis in range(values.ndim):
        index = [slice(None)] * values.ndim
        for edge in (0, -1):
            index[axis] = edge
            values[tuple(index)] = 0.0
    return values


def max_scaled_speed(
    velocities: Sequence, forces: Sequence, order: FractionalOrder
) -> float:
    """Largest scale-factored field magnitude, per axis it transports along."""
    grid = velocities[0].grid
    speed = 0.0
    for k in range(grid.n):
        q_scale = _scale(grid.q_axes[k], grid.q_axis(k), grid, order)
        p_scale = _scale(grid.p_axes[k], grid.p_axis(k), grid, order)
        speed = max(
            speed,
            float(np.max(np.abs(q_scale * velocities[k].values))),
            float(np.max(np.abs(p_scale * forces[k].values))),
        )
    return speed


def check_time_step(dt: float, grid: PhaseGrid, speed: float) -> None:
    """Enforce dt <= factor * min(h) / max speed."""
    check_positive("time step", dt)
    if speed == 0.0:
        return
    bound = Gates.stability_factor * min(axis.h for axis in grid.axes) / speed
    if dt > bound:
        raise StabilityError(f"time step {dt} exceeds the stability bound {bound:.6g}")


def density_record(
    time: float, density: PhaseDensity, order: FractionalOrder, **metrics: float
) -> DiagnosticsRecord:
    """Diagnostics of a density at one instant."""
    return DiagnosticsRecord(
        time=time,
        plain_mass=plain_mass(density.field),
        fractional_mass=fractional_mass(density.field, order),
        min_value=float(np.min(density.values)),
        l2_norm=l2_norm(density.field),
        metrics=metrics,
    )


def _evolution_rhs(
    hamiltonian: HamiltonianSpec,
    order: FractionalOrder,
    form: EvolutionForm,
    velocities: Sequence,
    forces: Sequence,
) -> Callable[[np.ndarray], np.ndarray]:
    grid = velocities[0].grid
    if form is EvolutionForm.BRACKET:
        H = hamiltonian.hamiltonian

        def rhs(values: np.ndarray) -> np.ndarray:
            return -_bracket_values(values, H.values, grid, order)

    elif form is EvolutionForm.ADVECTIVE:
        rhs = functools.partial(
            _advective, grid=grid, velocities=velocities, forces=forces, order=order
        )
    else:
        rhs = functools.partial(
            _continuity, grid=grid, velocities=velocities, forces=forces, order=order
        )
    return rhs


def liouville_evolve(
    rho0: PhaseDensity,
    hamiltonian: HamiltonianSpec,
    order: FractionalOrder,
    dt: float,
    steps: int,
    form: Optional[EvolutionForm] = None,
    absorbing: bool = True,
) -> tuple:
    """
    Advance a density with RK4 and return `(density, diagnostics)`.

    The bracket form is used by default when a Hamiltonian is given, the
    continuity form otherwise. Diagnostics hold one record per step, starting
    with the initial state.
    """
    if steps < 0:
        raise DomainError(f"steps must be non-negative, got {steps}")
    if form is None:
        form = (
            EvolutionForm.BRACKET
            if hamiltonian.is_analytic
            else EvolutionForm.CONTINUITY
        )
    if form is EvolutionForm.BRACKET and not hamiltonian.is_analytic:
        raise DomainError("the bracket form needs a sampled Hamiltonian")
    if hamiltonian.grid != rho0.grid:
        raise GridMismatchError("density and Hamiltonian live on different grids")

    velocities, forces = hamiltonian_fields(hamiltonian, order)
    check_time_step(dt, rho0.grid, max_scaled_speed(velocities, forces, order))
    rhs = _evolution_rhs(hamiltonian, order, form, velocities, forces)
    log.debug(f"Evolving {steps} steps of dt={dt} in {form.value} form")

    diagnostics = Diagnostics()
    diagnostics.append(density_record(0.0, rho0, order))
    values = np.array(rho0.values)
    for step in range(1, steps + 1):
        values = rk4_step(rhs, values, dt)
        if absorbing:
            values = absorb_boundary(values)
        if not np.all(np.isfinite(values)):
            raise NumericalInstabilityError(step)
        diagnostics.append(density_record(step * dt, rho0.with_values(values), order))

    if steps == 0:
        return rho0, diagnostics
    return rho0.with_values(values), diagnostics
