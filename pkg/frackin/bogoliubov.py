import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.integrate import trapezoid

from frackin.checks import check_finite, check_positive
from frackin.constants import Gates
from frackin.errors import (
    DomainError,
    GateFailure,
    GridError,
    NumericalInstabilityError,
)
from frackin.fraccore import (
    FractionalOrder,
    Grid1D,
    along_axis,
    scaled_caputo_along,
    volume_scale_factor,
)
from frackin.phase import (
    PhaseField,
    PhaseGrid,
    absorb_boundary,
    check_time_step,
    rk4_step,
)

log = logging.getLogger(__name__)

MAX_PARTICLES = 3

PairRule = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
ExternalRule = Callable[[np.ndarray, np.ndarray, float], np.ndarray]
VelocityRule = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _no_external_force(q: np.ndarray, p: np.ndarray, t: float) -> np.ndarray:
    return np.zeros(np.broadcast(q, p).shape)


def free_velocity(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Velocity p / m with unit mass."""
    return np.broadcast_to(p, np.broadcast(q, p).shape)


@dataclass(frozen=True)
class PairForceKernel:
    """Binary force F_12(q1, p1, q2, p2) on particle 1 plus an external force."""

    pair: PairRule
    external: ExternalRule = _no_external_force
    name: str = "custom"

    def pair_values(
        self, q1: np.ndarray, p1: np.ndarray, q2: np.ndarray, p2: np.ndarray
    ) -> np.ndarray:
        shape = np.broadcast(q1, p1, q2, p2).shape
        values = np.broadcast_to(np.asarray(self.pair(q1, p1, q2, p2), float), shape)
        check_finite(f"pair force `{self.name}`", values)
        return values

    def external_values(
        self, q: np.ndarray, p: np.ndarray, t: float = 0.0
    ) -> np.ndarray:
        shape = np.broadcast(q, p).shape
        values = np.broadcast_to(np.asarray(self.external(q, p, t), float), shape)
        check_finite(f"external force `{self.name}`", values)
        return values

    def reciprocity_residual(self, grid: PhaseGrid) -> float:
        """Max-norm of F_12 + F_21; zero for forces obeying action and reaction."""
        q1, p1, q2, p2 = _mesh(grid, 2)
        forward = self.pair_values(q1, p1, q2, p2)
        backward = self.pair_values(q2, p2, q1, p1)
        return float(np.max(np.abs(forward + backward)))


# N-body densities
def _mesh(grid: PhaseGrid, N: int) -> list:
    """Coordinate arrays q1, p1, q2, p2, ... broadcastable over 2N interleaved axes."""
    arrays = []
    for axis, grid1d in enumerate((grid.q_axes[0], grid.p_axes[0]) * N):
        shape = [1] * (2 * N)
        shape[axis] = -1
        arrays.append(grid1d.nodes.reshape(shape))
    return arrays


def _check_particle_grid(grid: PhaseGrid) -> None:
    if grid.n != 1:
        raise GridError("particle grids carry one (q, p) pair per particle")


@dataclass(frozen=True, eq=False)
class NBodyDensity:
    """
    Density of N identical particles on a shared one-particle phase grid.

    Array axes are interleaved per particle: (q1, p1, q2, p2, ...).
    """

    grid: PhaseGrid
    values: np.ndarray

    def __post_init__(self):
        _check_particle_grid(self.grid)
        values = np.array(self.values, dtype=float)
        if values.ndim % 2 or not 1 <= values.ndim // 2 <= MAX_PARTICLES:
            raise GridError(f"unsupported N-body tensor rank {values.ndim}")
        if values.shape != self.grid.shape * (values.ndim // 2):
            raise GridError(f"shape {values.shape} does not match the particle grid")
        check_finite("N-body density", values)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(
        cls, grid: PhaseGrid, N: int, function: Callable[..., np.ndarray]
    ) -> "NBodyDensity":
        """Sample `function(q1, p1, ..., qN, pN)` and normalize to unit mass."""
        mesh = _mesh(grid, N)
        values = np.broadcast_to(np.asarray(function(*mesh), float), grid.shape * N)
        return cls(grid, values).normalized()

    @classmethod
    def product(cls, *fields: PhaseField) -> "NBodyDensity":
        """Independent density ρ_a(1) ρ_b(2) ... built from one-particle fields."""
        values = fields[0].values
        for other in fields[1:]:
            values = np.multiply.outer(values, other.values)
        return cls(fields[0].grid, values)

    @property
    def N(self) -> int:
        return self.values.ndim // 2

    def mass(self) -> float:
        """Plain-measure total by the trapezoid rule on every axis."""
        return float(integrate_particles(self.values, self.grid, range(self.N)))

    def normalized(self) -> "NBodyDensity":
        if np.any(self.values < 0):
            raise DomainError("a density must be non-negative")
        mass = self.mass()
        check_positive("density mass", mass)
        return NBodyDensity(self.grid, self.values / mass)

    def swapped(self, i: int, j: int) -> np.ndarray:
        """Values with particles i and j (1-based) exchanged."""
        order = list(range(self.values.ndim))
        a, b = 2 * (i - 1), 2 * (j - 1)
        order[a : a + 2], order[b : b + 2] = order[b : b + 2], order[a : a + 2]
        return np.transpose(self.values, order)

    def symmetry_residual(self) -> float:
        """Largest change of the density under any exchange of two particles."""
        residual = 0.0
        for i, j in itertools.combinations(range(1, self.N + 1), 2):
            change = np.max(np.abs(self.values - self.swapped(i, j)))
            residual = max(residual, float(change))
        return residual

    def to_phase_field(self) -> PhaseField:
        if self.N != 1:
            raise GridError(f"only one-particle densities are phase fields, N={self.N}")
        return PhaseField(self.grid, self.values)


def integrate_particles(
    values: np.ndarray,
    grid: PhaseGrid,
    particles: Iterable[int],
    order: Optional[FractionalOrder] = None,
) -> np.ndarray:
    """
    Trapezoid integral over the (q, p) axes of the given 0-based particles.

    With `order`, every integrated axis is weighted by Γ(α)Γ(2-α) x^(α-1)/Γ(α),
    which is the scale factor Γ(2-α) x^(α-1).
    """
    for particle in sorted(particles, reverse=True):
        p_axis = (2 * particle + 1, grid.p_axes[0])
        q_axis = (2 * particle, grid.q_axes[0])
        for axis, grid1d in (p_axis, q_axis):
            if order is not None and order.alpha != 1.0:
                if grid1d.lower <= 0:
                    raise DomainError("fractional reduction needs positive axes")
                weight = volume_scale_factor(grid1d.nodes, order)
                values = values * along_axis(weight, axis, values.ndim)
            values = trapezoid(values, dx=grid1d.h, axis=axis)
    return values


def reduce(
    rhoN: NBodyDensity,
    keep: Iterable[int],
    order: Optional[FractionalOrder] = None,
) -> NBodyDensity:
    """
    Integrate out every particle not in `keep` (1-based indices).

    Pass `order` for the fractional reduction; the default is the plain measure.
    """
    keep = sorted(set(keep))
    if not keep:
        raise DomainError("reduce needs at least one particle to keep")
    if keep[0] < 1 or keep[-1] > rhoN.N:
        raise DomainError(f"particles to keep must lie in 1..{rhoN.N}, got {keep}")
    if len(keep) == rhoN.N:
        return rhoN
    dropped = [i for i in range(rhoN.N) if i + 1 not in keep]
    values = integrate_particles(rhoN.values, rhoN.grid, dropped, order)
    return NBodyDensity(rhoN.grid, values)


# Boundary gate
@dataclass
class BoundaryReport:
    """Largest density magnitude on every outer face of the domain."""

    tolerance: float
    faces: dict = field(default_factory=dict)

    @property
    def max_face(self) -> float:
        return max(self.faces.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_face <= self.tolerance


def _axis_names(ndim: int) -> list:
    return [f"{kind}{i + 1}" for i in range(ndim // 2) for kind in ("q", "p")]


def boundary_vanishing_check(
    rhoN: "NBodyDensity | PhaseField", tol: Optional[float] = None
) -> BoundaryReport:
    """Report the max density on every face; passes iff all are within `tol`."""
    tol = Gates.boundary_tolerance if tol is None else tol
    values = rhoN.values
    report = BoundaryReport(tolerance=tol)
    for axis, name in enumerate(_axis_names(values.ndim)):
        for side, index in (("lower", 0), ("upper", -1)):
            face = np.take(values, index, axis=axis)
            report.faces[f"{name}-{side}"] = float(np.max(np.abs(face)))
    log.trace(f"Boundary faces: {report.faces}")
    return report


def _require_boundary(rhoN: NBodyDensity) -> None:
    report = boundary_vanishing_check(rhoN)
    if not report.passed:
        log.error(
            f"Boundary gate failed: face value {report.max_face:.3g} exceeds "
            + f"{report.tolerance:.3g}"
        )
        raise GateFailure(
            f"density does not vanish on the boundary (max face {report.max_face:.3g})"
        )


# Collision term and the first hierarchy equation
def _d_p1(values: np.ndarray, grid: PhaseGrid, order: FractionalOrder) -> np.ndarray:
    return scaled_caputo_along(values, grid.p_axes[0], order, axis=1)


def _d_q1(values: np.ndarray, grid: PhaseGrid, order: FractionalOrder) -> np.ndarray:
    return scaled_caputo_along(values, grid.q_axes[0], order, axis=0)


def _pair_flux(rho2: NBodyDensity, kernel: PairForceKernel) -> np.ndarray:
    q1, p1, q2, p2 = _mesh(rho2.grid, 2)
    return kernel.pair_values(q1, p1, q2, p2) * rho2.values


def collision_term(
    rho2: NBodyDensity,
    kernel: PairForceKernel,
    order: FractionalOrder,
    N_total: int,
    check_boundary: bool = True,
) -> PhaseField:
    """
    Collision term I(ρ2) = -(N-1) D_p1 Î[2]{F_12 ρ2}.

    The pair flux is integrated over particle 2 before the p1 derivative is
    taken. The density must pass the boundary gate unless `check_boundary` is
    off.
    """
    if rho2.N != 2:
        raise GridError(f"the collision term needs a two-particle density, N={rho2.N}")
    if check_boundary:
        _require_boundary(rho2)
    if N_total <= 1:
        return PhaseField.zeros(rho2.grid)
    integrated = integrate_particles(_pair_flux(rho2, kernel), rho2.grid, [1])
    return PhaseField(rho2.grid, -(N_total - 1) * _d_p1(integrated, rho2.grid, order))


def order_exchange_residual(
    rho2: NBodyDensity, kernel: PairForceKernel, order: FractionalOrder
) -> float:
    """Max-norm difference of D_p1 Î[2] and Î[2] D_p1 applied to F_12 ρ2."""
    flux = _pair_flux(rho2, kernel)
    grid = rho2.grid
    integrate_first = _d_p1(integrate_particles(flux, grid, [1]), grid, order)
    differentiate_first = integrate_particles(_d_p1(flux, grid, order), grid, [1])
    return float(np.max(np.abs(integrate_first - differentiate_first)))


def interaction_terms(
    rho3: NBodyDensity, kernel: PairForceKernel, order: FractionalOrder
) -> tuple:
    """
    Return `(summed, single)` pair contributions for particle 1 of a three-body density.

    `summed` is Σ_{k=2,3} Î[2,3] D_p1(F_1k ρ3) and `single` is
    Î[2,3] D_p1(F_12 ρ3); permutation symmetry makes summed = 2 single.
    """
    if rho3.N != 3:
        raise GridError(f"interaction terms need a three-particle density, N={rho3.N}")
    q1, p1, q2, p2, q3, p3 = _mesh(rho3.grid, 3)
    terms = []
    for qk, pk in ((q2, p2), (q3, p3)):
        flux = kernel.pair_values(q1, p1, qk, pk) * rho3.values
        derivative = _d_p1(flux, rho3.grid, order)
        terms.append(integrate_particles(derivative, rho3.grid, [1, 2]))
    return (
        PhaseField(rho3.grid, terms[0] + terms[1]),
        PhaseField(rho3.grid, terms[0]),
    )


def surface_term(
    rhoN: NBodyDensity,
    velocity: VelocityRule,
    order: FractionalOrder,
    particle: int = 1,
) -> float:
    """Max-norm of the q_k integral of D_{q_k}(V_k ρ_N), the surface contribution."""
    mesh = _mesh(rhoN.grid, rhoN.N)
    qk, pk = mesh[2 * (particle - 1)], mesh[2 * particle - 1]
    flux = np.broadcast_to(velocity(qk, pk), rhoN.values.shape) * rhoN.values
    axis = 2 * (particle - 1)
    derivative = scaled_caputo_along(flux, rhoN.grid.q_axes[0], order, axis=axis)
    integrated = trapezoid(derivative, dx=rhoN.grid.q_axes[0].h, axis=axis)
    return float(np.max(np.abs(integrated)))


def first_bogoliubov_residual(
    rho1: PhaseField,
    rho2: NBodyDensity,
    kernel: PairForceKernel,
    velocity: VelocityRule,
    order: FractionalOrder,
    N_total: int,
    drho1_dt: PhaseField,
    t: float = 0.0,
) -> float:
    """
    Max-norm over interior nodes of the first hierarchy equation's residual.

    The residual is ∂ρ1/∂t + D_q1(V1 ρ1) + D_p1(F^e ρ1) - I(ρ2).
    """
    if rho1.grid != rho2.grid or drho1_dt.grid != rho1.grid:
        raise GridError("ρ1, ρ2 and ∂ρ1/∂t must share the particle grid")
    grid = rho1.grid
    q, p = grid.mesh()
    q, p = q[0], p[0]
    flux = np.broadcast_to(velocity(q, p), grid.shape) * rho1.values
    transport = _d_q1(flux, grid, order)
    forcing = _d_p1(kernel.external_values(q, p, t) * rho1.values, grid, order)
    collision = collision_term(rho2, kernel, order, N_total).values
    residual = drho1_dt.values + transport + forcing - collision
    return float(np.max(np.abs(residual[1:-1, 1:-1])))


# N-body Liouville dynamics
class _NBodyGenerator:
    """N-body Liouville right-hand side with fields fixed at construction."""

    def __init__(
        self,
        grid: PhaseGrid,
        N: int,
        kernel: PairForceKernel,
        velocity: VelocityRule,
        order: FractionalOrder,
        t: float,
    ):
        self.grid = grid
        self.order = order
        mesh = _mesh(grid, N)
        shape = grid.shape * N
        self.velocities = []
        self.forces = []
        for k in range(N):
            qk, pk = mesh[2 * k], mesh[2 * k + 1]
            self.velocities.append(np.broadcast_to(velocity(qk, pk), shape))
            force = np.broadcast_to(kernel.external_values(qk, pk, t), shape)
            for other in range(N):
                if other != k:
                    partner = mesh[2 * other], mesh[2 * other + 1]
                    force = force + kernel.pair_values(qk, pk, *partner)
            self.forces.append(np.broadcast_to(force, shape))

    def max_speed(self) -> float:
        q_scale = _scale_factor(self.grid.q_axes[0], self.order)
        p_scale = _scale_factor(self.grid.p_axes[0], self.order)
        speed = 0.0
        ndim = self.velocities[0].ndim
        for k, (velocity, force) in enumerate(zip(self.velocities, self.forces)):
            speed = max(
                speed,
                float(np.max(np.abs(velocity * along_axis(q_scale, 2 * k, ndim)))),
                float(np.max(np.abs(force * along_axis(p_scale, 2 * k + 1, ndim)))),
            )
        return speed

    def __call__(self, values: np.ndarray) -> np.ndarray:
        result = np.zeros(values.shape)
        q_axis, p_axis = self.grid.q_axes[0], self.grid.p_axes[0]
        for k, (velocity, force) in enumerate(zip(self.velocities, self.forces)):
            result -= scaled_caputo_along(values * velocity, q_axis, self.order, 2 * k)
            result -= scaled_caputo_along(values * force, p_axis, self.order, 2 * k + 1)
        return result


def _scale_factor(grid1d: Grid1D, order: FractionalOrder) -> np.ndarray:
    return np.asarray(volume_scale_factor(grid1d.nodes, order))


def nbody_liouville_step(
    rhoN: NBodyDensity,
    kernel: PairForceKernel,
    order: FractionalOrder,
    dt: float,
    velocity: VelocityRule = free_velocity,
    t: float = 0.0,
    absorbing: bool = True,
) -> NBodyDensity:
    """One RK4 step of the N-body fractional Liouville equation."""
    generator = _NBodyGenerator(rhoN.grid, rhoN.N, kernel, velocity, order, t)
    check_time_step(dt, rhoN.grid, generator.max_speed())
    values = rk4_step(generator, np.array(rhoN.values), dt)
    if absorbing:
        values = absorb_boundary(values)
    if not np.all(np.isfinite(values)):
        raise NumericalInstabilityError(1)
    return NBodyDensity(rhoN.grid, values)


def nbody_evolve(
    rhoN: NBodyDensity,
    kernel: PairForceKernel,
    order: FractionalOrder,
    dt: float,
    steps: int,
    velocity: VelocityRule = free_velocity,
) -> list:
    """Return the N-body states at t = 0, dt, ..., steps * dt."""
    check_positive("time step", dt)
    states = [rhoN]
    for step in range(1, steps + 1):
        try:
            states.append(
                nbody_liouville_step(
                    states[-1], kernel, order, dt, velocity, t=(step - 1) * dt
                )
            )
        except NumericalInstabilityError:
            raise NumericalInstabilityError(step) from None
    return states


def evolved_residual(
    rhoN: NBodyDensity,
    kernel: PairForceKernel,
    order: FractionalOrder,
    dt: float,
    velocity: VelocityRule = free_velocity,
) -> float:
    """
    First hierarchy residual along an actual N-body trajectory.

    Evolves ρN for two steps, reduces every state to ρ1 and the middle one to
    ρ2, and checks the hierarchy equation at t = dt with N_total = N. The
    centred difference (ρ1(2 dt) - ρ1(0)) / (2 dt) stands in for ∂ρ1/∂t.
    """
    if rhoN.N < 2:
        raise GridError(f"the residual run needs two or more particles, N={rhoN.N}")
    states = nbody_evolve(rhoN, kernel, order, dt, 2, velocity)
    rho1 = [reduce(state, [1]).to_phase_field() for state in states]
    rho2 = reduce(states[1], [1, 2])
    drho1_dt = PhaseField(rhoN.grid, (rho1[2].values - rho1[0].values) / (2.0 * dt))
    return first_bogoliubov_residual(
        rho1[1], rho2, kernel, velocity, order, rhoN.N, drho1_dt, t=dt
    )
