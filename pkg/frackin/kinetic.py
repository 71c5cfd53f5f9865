import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import trapezoid

from frackin.bogoliubov import PairForceKernel, free_velocity, integrate_particles
from frackin.checks import check_positive, check_same_grid, is_power_of_two
from frackin.constants import Numerics
from frackin.diagnostics import Diagnostics, DiagnosticsRecord
from frackin.errors import (
    DomainError,
    GridError,
    LeibnizTruncationError,
    NumericalInstabilityError,
    PowerOfTwoError,
)
from frackin.fraccore import (
    FractionalOrder,
    Grid1D,
    SampledField,
    along_axis,
    caputo_along,
    classical_along,
    integral_along,
    riesz_along,
    volume_scale_factor,
)
from frackin.levy import LevyProfile, free_streaming_profile
from frackin.phase import (
    PhaseDensity,
    PhaseField,
    PhaseGrid,
    absorb_boundary,
    check_time_step,
    d_p,
    d_q,
    density_record,
    fractional_mass,
    l2_norm,
    liouville_rhs,
    max_scaled_speed,
    plain_mass,
    rk4_step,
)

log = logging.getLogger(__name__)

# Rows of q1 handled at once when integrating the pair force over the partner.
EFFECTIVE_FORCE_CHUNK = 16

ElectricRule = Callable[[list], list]
MomentumRule = Callable[[list], np.ndarray]
PhaseRule = Callable[[list, list], np.ndarray]


# Mean-field closure
def _one_particle_field(rho1: "PhaseDensity | PhaseField") -> PhaseField:
    one = rho1.field if isinstance(rho1, PhaseDensity) else rho1
    if one.grid.n != 1:
        raise GridError("the mean-field closure works on one-particle densities")
    return one


def effective_force(
    rho1: "PhaseDensity | PhaseField", kernel: PairForceKernel
) -> PhaseField:
    """Mean force F^eff(q1, p1) = Î[2]{F_12 ρ1(q2, p2)} by trapezoid quadrature."""
    density = _one_particle_field(rho1)
    grid = density.grid
    q_nodes, p_nodes = grid.q_axes[0].nodes, grid.p_axes[0].nodes
    p1 = p_nodes.reshape(1, -1, 1, 1)
    q2 = q_nodes.reshape(1, 1, -1, 1)
    p2 = p_nodes.reshape(1, 1, 1, -1)
    partner = density.values[np.newaxis, np.newaxis]

    result = np.empty(grid.shape)
    for start in range(0, q_nodes.size, EFFECTIVE_FORCE_CHUNK):
        q1 = q_nodes[start : start + EFFECTIVE_FORCE_CHUNK].reshape(-1, 1, 1, 1)
        flux = kernel.pair_values(q1, p1, q2, p2) * partner
        result[start : start + q1.shape[0]] = integrate_particles(flux, grid, [1])
    return PhaseField(grid, result)


def _vlasov_fields(
    density: PhaseField,
    kernel: PairForceKernel,
    N_total: int,
    velocity: Callable,
    t: float,
) -> tuple:
    grid = density.grid
    qs, ps = grid.mesh()
    q, p = qs[0], ps[0]
    force = kernel.external_values(q, p, t)
    if N_total > 1:
        force = force + (N_total - 1) * effective_force(density, kernel).values
    velocities = [PhaseField(grid, np.broadcast_to(velocity(q, p), grid.shape))]
    forces = [PhaseField(grid, np.broadcast_to(force, grid.shape))]
    return velocities, forces


def vlasov_rhs(
    rho1: "PhaseDensity | PhaseField",
    kernel: PairForceKernel,
    order: FractionalOrder,
    N_total: int,
    velocity: Callable = free_velocity,
    t: float = 0.0,
) -> PhaseField:
    """
    Right-hand side of the fractional Vlasov equation.

    Evaluates -D_q1(V1 ρ1) - D_p1[(F^e + (N-1) F^eff) ρ1] through
    `liouville_rhs`, so the closure shares the Liouville code path.
    """
    density = _one_particle_field(rho1)
    velocities, forces = _vlasov_fields(density, kernel, N_total, velocity, t)
    return liouville_rhs(PhaseDensity(density), velocities, forces, order)


class _VlasovGenerator:
    """Vlasov right-hand side on raw arrays at a fixed time."""

    def __init__(self, grid, kernel, order, N_total, velocity, t):
        self.grid = grid
        self.kernel = kernel
        self.order = order
        self.N_total = N_total
        self.velocity = velocity
        self.t = t

    def __call__(self, values: np.ndarray) -> np.ndarray:
        rhs = vlasov_rhs(
            PhaseField(self.grid, values),
            self.kernel,
            self.order,
            self.N_total,
            self.velocity,
            self.t,
        )
        return rhs.values


def vlasov_evolve(
    rho0: PhaseDensity,
    kernel: PairForceKernel,
    order: FractionalOrder,
    N_total: int,
    dt: float,
    steps: int,
    velocity: Callable = free_velocity,
) -> tuple:
    """RK4 evolution of the Vlasov equation; F^eff is recomputed at every stage."""
    if steps < 0:
        raise DomainError(f"steps must be non-negative, got {steps}")
    grid = rho0.grid
    diagnostics = Diagnostics()
    diagnostics.append(density_record(0.0, rho0, order))
    values = np.array(rho0.values)

    for step in range(1, steps + 1):
        t = (step - 1) * dt
        velocities, forces = _vlasov_fields(
            PhaseField(grid, values), kernel, N_total, velocity, t
        )
        check_time_step(dt, grid, max_scaled_speed(velocities, forces, order))
        generator = _VlasovGenerator(grid, kernel, order, N_total, velocity, t)
        try:
            values = absorb_boundary(rk4_step(generator, values, dt))
        except DomainError:
            # a stage produced a non-finite field
            raise NumericalInstabilityError(step) from None
        if not np.all(np.isfinite(values)):
            raise NumericalInstabilityError(step)
        diagnostics.append(density_record(step * dt, rho0.with_values(values), order))

    log.debug(f"Vlasov run finished after {steps} steps of dt={dt}")
    return rho0.with_values(values), diagnostics


# Fractional Leibniz rule
def leibniz_weight(alpha: float, r: int) -> float:
    """Generalized binomial coefficient C(α, r) = Γ(α+1) / (Γ(r+1) Γ(α-r+1))."""
    weight = 1.0
    for i in range(r):
        weight *= (alpha - i) / (i + 1)
    return weight


def _shifted_operator(
    values: np.ndarray, grid: Grid1D, order: float, axis: int
) -> np.ndarray:
    """D^order along `axis`: Caputo above 0, identity at 0, integral below 0."""
    if order > 0:
        return caputo_along(values, grid, FractionalOrder(order), axis)
    if order == 0:
        return values
    return integral_along(values, grid, -order, axis)


def leibniz_along(
    f: np.ndarray,
    g: np.ndarray,
    grid: Grid1D,
    order: FractionalOrder,
    R: int,
    axis: int = -1,
) -> np.ndarray:
    """Σ_{r<=R} C(α, r) D^(α-r) f · d^r g / dx^r along one axis of `f` and `g`."""
    if R < 0:
        raise DomainError(f"R must be non-negative, got {R}")
    f, g = np.broadcast_arrays(np.asarray(f, float), np.asarray(g, float))
    if R + 1 < g.shape[axis]:
        scale = max(1.0, float(np.max(np.abs(g))))
        excess = float(np.max(np.abs(np.diff(g, n=R + 1, axis=axis))))
        if excess > Numerics.leibniz_degree_tolerance * scale:
            raise LeibnizTruncationError(
                f"g is not a polynomial of degree <= {R} (difference {excess:.3g})"
            )

    result = np.zeros(f.shape)
    g_derivative = g
    for r in range(R + 1):
        if r:
            g_derivative = classical_along(g_derivative, grid, 1, axis)
        weight = leibniz_weight(order.alpha, r)
        if weight == 0.0:
            continue
        shifted = _shifted_operator(f, grid, order.alpha - r, axis)
        result += weight * shifted * g_derivative
    return result


def fractional_leibniz(
    f: SampledField, g: SampledField, order: FractionalOrder, R: int
) -> SampledField:
    """
    Fractional derivative of the product f g by the generalized Leibniz rule.

    `g` has to be a polynomial of degree at most R, so the series terminates.
    """
    check_same_grid(f, g)
    return SampledField(f.grid, leibniz_along(f.values, g.values, f.grid, order, R))


# Kinetic equation
@dataclass(frozen=True)
class KineticScenario:
    """Physical setup of the fractional kinetic equation for one species."""

    order: FractionalOrder
    grid: PhaseGrid
    mass: float = 1.0
    charge: float = 1.0
    light_speed: float = 1.0
    electric: Optional[ElectricRule] = None
    magnetic: tuple = (0.0, 0.0, 0.0)
    background: Optional[MomentumRule] = None
    perturbation: Optional[PhaseRule] = None
    transport: Optional[tuple] = None

    def __post_init__(self):
        check_positive("mass", self.mass)
        check_positive("light speed", self.light_speed)
        if len(self.magnetic) != 3:
            raise DomainError("the magnetic field has three components")
        transport = self.transport or (1.0,) * self.grid.n
        if len(transport) != self.grid.n:
            raise DomainError(f"need {self.grid.n} transport coefficients")
        for g in transport:
            check_positive("transport coefficient", g)
        object.__setattr__(self, "magnetic", tuple(float(b) for b in self.magnetic))
        object.__setattr__(self, "transport", tuple(float(g) for g in transport))

    @property
    def has_magnetic(self) -> bool:
        return any(b != 0.0 for b in self.magnetic)

    def electric_components(self) -> Optional[list]:
        """E_k on the grid, or None for a field-free setup."""
        if self.electric is None:
            return None
        qs, _ = self.grid.mesh()
        components = [
            np.broadcast_to(np.asarray(e, float), self.grid.shape)
            for e in self.electric(qs)
        ]
        if len(components) != self.grid.n:
            raise DomainError(f"E needs {self.grid.n} components")
        if not any(np.any(e != 0.0) for e in components):
            return None
        return components

    def velocities(self) -> list:
        """v_k = p_k / m on the grid."""
        _, ps = self.grid.mesh()
        return [np.broadcast_to(p / self.mass, self.grid.shape) for p in ps]

    def background_field(self) -> PhaseField:
        if self.background is None:
            return PhaseField.zeros(self.grid)
        _, ps = self.grid.mesh()
        values = np.asarray(self.background(ps), float)
        return PhaseField(self.grid, np.broadcast_to(values, self.grid.shape))

    def initial_perturbation(self) -> PhaseField:
        if self.perturbation is None:
            return PhaseField.zeros(self.grid)
        return PhaseField.sample(self.grid, self.perturbation)


def _levi_civita(i: int, j: int, k: int) -> int:
    return (i - j) * (j - k) * (k - i) // 2


def _lorentz(ps: tuple, B: tuple) -> list:
    """Components (p × B)_i on the momentum mesh."""
    return [
        sum(
            _levi_civita(i, j, k) * ps[j] * B[k]
            for j in range(3)
            for k in range(3)
        )
        for i in range(3)
    ]


class MagneticForm(str, enum.Enum):
    LEIBNIZ = "leibniz"
    CONTRACTED = "contracted"


def magnetic_term(
    f: PhaseField,
    B: tuple,
    scenario: KineticScenario,
    order: FractionalOrder,
    form: MagneticForm = MagneticForm.CONTRACTED,
) -> PhaseField:
    """
    Magnetic contribution (e/mc) Σ ε_ijk B_k D_{p_i}(p_j f).

    The Leibniz form expands every D_{p_i}(p_j f) with the fractional
    Leibniz rule and then contracts with ε; the α D^(α-1) f terms sit on the
    diagonal i = j and drop out. The contracted form evaluates
    Σ_i (p × B)_i D_{p_i} f directly. Both use scale-factored derivatives.
    """
    grid = f.grid
    if grid.n != 3:
        raise DomainError(f"the magnetic term needs 3 momentum axes, got {grid.n}")
    B = tuple(float(b) for b in B)
    if len(B) != 3:
        raise DomainError("the magnetic field has three components")
    if not any(B):
        return PhaseField.zeros(grid)
    prefactor = scenario.charge / (scenario.mass * scenario.light_speed)

    _, ps = grid.mesh()
    result = np.zeros(grid.shape)
    if MagneticForm(form) is MagneticForm.CONTRACTED:
        for i, lorentz in enumerate(_lorentz(ps, B)):
            result += lorentz * d_p(f.values, grid, i, order)
        return PhaseField(grid, prefactor * result)

    for i in range(3):
        axis = grid.p_axis(i)
        scale = volume_scale_factor(grid.p_axes[i].nodes, order)
        scale = along_axis(np.asarray(scale), axis, f.values.ndim)
        for j in range(3):
            expanded = scale * leibniz_along(
                f.values, ps[j], grid.p_axes[i], order, R=1, axis=axis
            )
            for k in range(3):
                if B[k]:
                    result += _levi_civita(i, j, k) * B[k] * expanded
    return PhaseField(grid, prefactor * result)


def magnetic_speed(scenario: KineticScenario, order: FractionalOrder) -> float:
    """Largest scale-factored rotation speed (e/mc) |(p × B)_i| along any p_i."""
    if not scenario.has_magnetic:
        return 0.0
    grid = scenario.grid
    if grid.n != 3:
        raise DomainError(f"the magnetic term needs 3 momentum axes, got {grid.n}")
    _, ps = grid.mesh()
    speed = 0.0
    for i, lorentz in enumerate(_lorentz(ps, scenario.magnetic)):
        scale = volume_scale_factor(grid.p_axes[i].nodes, order)
        scale = along_axis(np.asarray(scale), grid.p_axis(i), len(grid.axes))
        speed = max(speed, float(np.max(np.abs(lorentz * scale))))
    return abs(scenario.charge) / (scenario.mass * scenario.light_speed) * speed


def _streaming(
    values: np.ndarray, scenario: KineticScenario, order: FractionalOrder
) -> np.ndarray:
    result = np.zeros(values.shape)
    for k, v in enumerate(scenario.velocities()):
        result -= v * d_q(values, scenario.grid, k, order)
    return result


def _electric_drive(
    values: np.ndarray,
    electric: Optional[list],
    scenario: KineticScenario,
    order: FractionalOrder,
) -> np.ndarray:
    result = np.zeros(values.shape)
    if electric is None:
        return result
    for k, e in enumerate(electric):
        result -= scenario.charge * e * d_p(values, scenario.grid, k, order)
    return result


def _magnetic_values(
    values: np.ndarray, scenario: KineticScenario, order: FractionalOrder
) -> np.ndarray:
    if not scenario.has_magnetic:
        return np.zeros(values.shape)
    state = PhaseField(scenario.grid, values)
    return magnetic_term(state, scenario.magnetic, scenario, order).values


def kinetic_rhs(
    f: PhaseField, scenario: KineticScenario, order: FractionalOrder
) -> PhaseField:
    """-(v, D_q f) - e (E, D_p f) - magnetic term, with scale-factored derivatives."""
    if f.grid != scenario.grid:
        raise GridError("the field and the scenario live on different grids")
    electric = scenario.electric_components()
    values = _streaming(f.values, scenario, order)
    values += _electric_drive(f.values, electric, scenario, order)
    values -= _magnetic_values(f.values, scenario, order)
    return PhaseField(f.grid, values)


def linear_rhs(
    delta: PhaseField,
    scenario: KineticScenario,
    order: FractionalOrder,
    background: Optional[PhaseField] = None,
) -> PhaseField:
    """
    Linearized right-hand side for the first perturbation δf.

    -(v, D_q δf) - e (E, D_p f0), plus the magnetic term acting on δf.
    """
    if background is None:
        background = scenario.background_field()
    electric = scenario.electric_components()
    values = _streaming(delta.values, scenario, order)
    values += _electric_drive(background.values, electric, scenario, order)
    values -= _magnetic_values(delta.values, scenario, order)
    return PhaseField(delta.grid, values)


def linearization_residual(
    delta: PhaseField, scenario: KineticScenario, order: FractionalOrder
) -> tuple:
    """
    Compare the full equation at f0 + δf with the linearized one.

    Returns `(residual, bound)`: the max-norm of
    kinetic_rhs(f0 + δf) - linear_rhs(δf) and the bound
    |e| Σ_k max|E_k| max|D_{p_k} δf| set by the dropped cross term. With a
    magnetic field the bound also carries the magnetic term of f0, which
    vanishes for an isotropic background.
    """
    background = scenario.background_field()
    total = PhaseField(delta.grid, background.values + delta.values)
    full = kinetic_rhs(total, scenario, order).values
    linear = linear_rhs(delta, scenario, order, background).values
    residual = float(np.max(np.abs(full - linear)))

    magnetic = _magnetic_values(background.values, scenario, order)
    bound = float(np.max(np.abs(magnetic)))
    electric = scenario.electric_components()
    for k, e in enumerate(electric or []):
        derivative = d_p(delta.values, delta.grid, k, order)
        bound += (
            abs(scenario.charge)
            * float(np.max(np.abs(e)))
            * float(np.max(np.abs(derivative)))
        )
    return residual, bound


class LinearSolver(str, enum.Enum):
    CAPUTO_GRID = "caputo-grid"
    RIESZ_SPECTRAL = "riesz-spectral"


@dataclass
class LinearRun:
    """Output of `linear_evolve`: sampled states and their diagnostics."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    @property
    def final(self) -> PhaseField:
        return self.states[-1]


def q_marginal(delta: PhaseField) -> np.ndarray:
    """Integrate a one-degree-of-freedom field over p."""
    if delta.grid.n != 1:
        raise GridError("marginals are taken for one degree of freedom")
    return trapezoid(delta.values, dx=delta.grid.p_axes[0].h, axis=1)


def center_of_mass(delta: PhaseField) -> float:
    marginal = q_marginal(delta)
    q_nodes = delta.grid.q_axes[0].nodes
    return float(np.sum(q_nodes * marginal) / np.sum(marginal))


def profile_error(
    delta: PhaseField, scenario: KineticScenario, order: FractionalOrder, t: float
) -> float:
    """L∞ distance of the q-marginal from the free-streaming profile at time t."""
    profile = LevyProfile(order, scenario.transport[0], t)
    q_nodes = delta.grid.q_axes[0].nodes
    exact = np.array([free_streaming_profile(profile, q) for q in q_nodes])
    return float(np.max(np.abs(q_marginal(delta) - exact)))


def _compares_to_profile(scenario: KineticScenario) -> bool:
    return scenario.grid.n == 1 and scenario.electric_components() is None


def _record(
    t: float,
    delta: PhaseField,
    scenario: KineticScenario,
    whole_line: bool,
) -> DiagnosticsRecord:
    order = scenario.order
    metrics = {}
    if t > 0 and _compares_to_profile(scenario):
        metrics["profile_linf_error"] = profile_error(delta, scenario, order, t)
    return DiagnosticsRecord(
        time=t,
        plain_mass=plain_mass(delta),
        fractional_mass=None if whole_line else fractional_mass(delta, order),
        min_value=float(np.min(delta.values)),
        l2_norm=l2_norm(delta),
        metrics=metrics,
    )


class _SpectralPropagator:
    """
    Exact integrating-factor step for ∂δf/∂t = -Σ g_s |k_s|^α δf + S.

    A magnetic field is split off: half an RK4 step of the magnetic term on
    the p axes runs before and after the exact q step.
    """

    def __init__(self, scenario: KineticScenario, dt: float):
        grid = scenario.grid
        self.scenario = scenario
        self.dt = dt
        if scenario.has_magnetic:
            check_time_step(dt, grid, magnetic_speed(scenario, scenario.order))
        for axis in grid.q_axes:
            if not is_power_of_two(axis.count):
                raise PowerOfTwoError(
                    f"spectral q axes need 2**n nodes, got {axis.count}"
                )
        self.axes = tuple(range(grid.n))
        ndim = len(grid.axes)
        rate = np.zeros(grid.shape[: grid.n] + (1,) * grid.n)
        for s, axis in enumerate(grid.q_axes):
            k = 2.0 * np.pi * np.fft.fftfreq(axis.count, d=axis.h)
            symbol = scenario.transport[s] * np.abs(k) ** scenario.order.alpha
            rate = rate + along_axis(symbol, s, ndim)
        self.decay = np.exp(-rate * dt)
        # (1 - e^(-λ dt)) / λ, which tends to dt for the λ = 0 mode
        safe_rate = np.where(rate > 0, rate, 1.0)
        self.gain = np.where(rate > 0, -np.expm1(-rate * dt) / safe_rate, dt)
        self.source = self._source(scenario)

    def _source(self, scenario: KineticScenario) -> Optional[np.ndarray]:
        electric = scenario.electric_components()
        if electric is None:
            return None
        grid = scenario.grid
        alpha = scenario.order.alpha
        background = scenario.background_field().values
        source = np.zeros(grid.shape)
        for k, e in enumerate(electric):
            riesz = riesz_along(background, grid.p_axes[k], alpha, grid.p_axis(k))
            source -= scenario.charge * e * riesz
        return np.fft.fftn(source, axes=self.axes)

    def _rotate(self, values: np.ndarray) -> np.ndarray:
        scenario = self.scenario

        def rhs(state: np.ndarray) -> np.ndarray:
            return -_magnetic_values(state, scenario, scenario.order)

        return rk4_step(rhs, values, 0.5 * self.dt)

    def __call__(self, values: np.ndarray) -> np.ndarray:
        if self.scenario.has_magnetic:
            values = self._rotate(values)
        spectrum = np.fft.fftn(values, axes=self.axes) * self.decay
        if self.source is not None:
            spectrum = spectrum + self.gain * self.source
        values = np.fft.ifftn(spectrum, axes=self.axes).real
        if self.scenario.has_magnetic:
            values = self._rotate(values)
        return values


class _GridStepper:
    """RK4 step of `linear_rhs` on the Caputo half-line grid."""

    def __init__(self, scenario: KineticScenario, dt: float):
        self.scenario = scenario
        self.dt = dt
        order = scenario.order
        grid = scenario.grid
        speed = 0.0
        for k, v in enumerate(scenario.velocities()):
            scale = volume_scale_factor(grid.q_axes[k].nodes, order)
            scale = along_axis(np.asarray(scale), grid.q_axis(k), len(grid.axes))
            speed = max(speed, float(np.max(np.abs(v * scale))))
        speed += magnetic_speed(scenario, order)
        check_time_step(dt, grid, speed)
        background = scenario.background_field()
        electric = scenario.electric_components()
        self.drive = _electric_drive(background.values, electric, scenario, order)

    def rhs(self, values: np.ndarray) -> np.ndarray:
        scenario = self.scenario
        result = _streaming(values, scenario, scenario.order) + self.drive
        return result - _magnetic_values(values, scenario, scenario.order)

    def __call__(self, values: np.ndarray) -> np.ndarray:
        return absorb_boundary(rk4_step(self.rhs, values, self.dt))


def linear_evolve(
    scenario: KineticScenario,
    dt: float,
    steps: int,
    solver: LinearSolver = LinearSolver.RIESZ_SPECTRAL,
    stride: int = 1,
) -> LinearRun:
    """
    Evolve the linearized equation for δf and sample every `stride` steps.

    The Riesz branch treats the q axes as one period of the whole line and
    steps the Fourier modes exactly; with E != 0 the p axes must hold 2**n
    nodes too. A magnetic field is applied by Strang splitting on the p
    axes. The Caputo branch advances `linear_rhs` with RK4 on the
    half-line grid. With E = 0 and one degree of freedom, every sample after
    t = 0 records its L∞ distance from the free-streaming profile.
    """
    check_positive("time step", dt)
    if steps < 0 or stride < 1:
        raise DomainError(f"need steps >= 0 and stride >= 1, got {steps}, {stride}")
    solver = LinearSolver(solver)
    whole_line = solver is LinearSolver.RIESZ_SPECTRAL
    delta = scenario.initial_perturbation()

    run = LinearRun()
    run.times.append(0.0)
    run.states.append(delta)
    run.diagnostics.append(_record(0.0, delta, scenario, whole_line))
    if steps == 0:
        return run

    if whole_line:
        advance = _SpectralPropagator(scenario, dt)
    else:
        advance = _GridStepper(scenario, dt)
    log.debug(f"Linear {solver.value} run: {steps} steps of dt={dt}")

    values = np.array(delta.values)
    for step in range(1, steps + 1):
        values = advance(values)
        if not np.all(np.isfinite(values)):
            raise NumericalInstabilityError(step)
        if step % stride == 0 or step == steps:
            t = step * dt
            state = PhaseField(scenario.grid, values)
            run.times.append(t)
            run.states.append(state)
            run.diagnostics.append(_record(t, state, scenario, whole_line))
            log.trace(f"Linear run sampled at t={t}")
    return run
