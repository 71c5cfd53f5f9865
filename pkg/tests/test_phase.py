import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from frackin.diagnostics import Diagnostics, DiagnosticsRecord
from frackin.errors import (
    DomainError,
    GridError,
    GridMismatchError,
    StabilityError,
)
from frackin.fraccore import FractionalOrder, Grid1D, gamma
from frackin.phase import (
    EvolutionForm,
    HamiltonianSpec,
    PhaseDensity,
    PhaseField,
    PhaseGrid,
    Weighting,
    absorb_boundary,
    bracket_antisymmetry_residual,
    bracket_jacobi_residual,
    check_time_step,
    d_p,
    d_q,
    evolution_form_gap,
    fractional_bracket,
    hamiltonian_fields,
    helmholtz_residual,
    liouville_evolve,
    liouville_rhs,
    plain_mass,
    rk4_step,
)

ORDER_ONE = FractionalOrder(1.0)


def harmonic(qs, ps):
    return 0.5 * (qs[0] ** 2 + ps[0] ** 2)


def blob(center: float = 1.2, sigma: float = 0.7):
    def function(qs, ps):
        return np.exp(-((qs[0] - center) ** 2 + ps[0] ** 2) / (2.0 * sigma**2))

    return function


@pytest.fixture
def positive_grid() -> PhaseGrid:
    axis = Grid1D(0.25, 0.25, 8)
    return PhaseGrid((axis,), (axis,))


def test_phase_grid_layout():
    axis = Grid1D(-1.0, 0.5, 5)
    grid = PhaseGrid((axis, axis), (axis, axis))
    assert grid.n == 2
    assert grid.shape == (5, 5, 5, 5)
    assert grid.cell_volume == pytest.approx(0.0625)
    assert (grid.q_axis(1), grid.p_axis(1)) == (1, 3)
    qs, ps = grid.mesh()
    assert len(qs) == len(ps) == 2
    assert np.broadcast(*qs, *ps).shape == grid.shape


def test_phase_grid_validation():
    axis = Grid1D(0.0, 1.0, 3)
    with pytest.raises(GridError):
        PhaseGrid((axis,), (axis, axis))
    with pytest.raises(GridError):
        PhaseGrid((axis,) * 4, (axis,) * 4)
    with pytest.raises(GridError):
        PhaseGrid((), ())


def test_normalized_density(particle_grid):
    field = PhaseField.sample(particle_grid, blob(0.0))
    density = PhaseDensity.normalized(field)
    assert density.mass() == pytest.approx(1.0, rel=1e-12)
    assert plain_mass(density.field) == pytest.approx(1.0, rel=1e-12)

    with pytest.raises(DomainError):
        PhaseDensity.normalized(PhaseField.sample(particle_grid, lambda q, p: -1.0))


def test_fractional_weighting(offset_particle_grid):
    order = FractionalOrder(0.5)
    field = PhaseField.sample(offset_particle_grid, blob(5.0))
    density = PhaseDensity.normalized(field, Weighting.FRACTIONAL, order)
    assert density.mass() == pytest.approx(1.0, rel=1e-12)
    assert plain_mass(density.field) != pytest.approx(1.0, rel=1e-3)

    with pytest.raises(DomainError):
        PhaseDensity(field, Weighting.FRACTIONAL)


def test_poisson_bracket_of_canonical_pair():
    grid = PhaseGrid.uniform(1, -2.0, 0.25, 17)
    q = PhaseField.sample(grid, lambda qs, ps: qs[0])
    p = PhaseField.sample(grid, lambda qs, ps: ps[0])
    assert_allclose(fractional_bracket(q, p, ORDER_ONE).values, 1.0, atol=1e-12)
    assert_allclose(fractional_bracket(p, q, ORDER_ONE).values, -1.0, atol=1e-12)


def test_fractional_bracket_of_canonical_pair(positive_grid):
    order = FractionalOrder(0.5)
    q = PhaseField.sample(positive_grid, lambda qs, ps: qs[0])
    p = PhaseField.sample(positive_grid, lambda qs, ps: ps[0])
    bracket = fractional_bracket(q, p, order).values

    nodes = positive_grid.p_axes[0].nodes
    assert_allclose(bracket, np.broadcast_to(nodes**0.5 / gamma(1.5), (8, 8)))
    assert bracket[0, 3] == pytest.approx(1.1283791671, rel=1e-9)


def test_bracket_antisymmetry(positive_grid):
    grid = PhaseGrid.uniform(1, -2.0, 0.25, 17)
    A = PhaseField.sample(grid, lambda qs, ps: qs[0] ** 2 + ps[0] ** 2)
    B = PhaseField.sample(grid, lambda qs, ps: qs[0] * ps[0])
    assert bracket_antisymmetry_residual(A, B, ORDER_ONE) <= 1e-12

    q = PhaseField.sample(positive_grid, lambda qs, ps: qs[0])
    p = PhaseField.sample(positive_grid, lambda qs, ps: ps[0])
    assert bracket_antisymmetry_residual(q, p, FractionalOrder(0.5)) > 0.1


def test_jacobi_identity_at_order_one():
    grid = PhaseGrid.uniform(1, -2.0, 0.25, 17)
    q = PhaseField.sample(grid, lambda qs, ps: qs[0])
    p = PhaseField.sample(grid, lambda qs, ps: ps[0])
    qp = PhaseField.sample(grid, lambda qs, ps: qs[0] * ps[0])
    assert bracket_jacobi_residual(q, p, qp, ORDER_ONE) <= 1e-10


def test_hamiltonian_fields_and_helmholtz():
    grid = PhaseGrid.uniform(1, -2.0, 0.25, 17)
    hamiltonian = HamiltonianSpec.analytic(grid, harmonic)
    (velocity,), (force,) = hamiltonian_fields(hamiltonian, ORDER_ONE)
    qs, ps = grid.mesh()
    assert_allclose(velocity.values, np.broadcast_to(ps[0], grid.shape), atol=1e-12)
    assert_allclose(force.values, np.broadcast_to(-qs[0], grid.shape), atol=1e-12)
    assert helmholtz_residual([velocity], [force]) <= 1e-10

    # a velocity that depends on q is not Hamiltonian
    sheared = PhaseField.sample(grid, lambda qs, ps: ps[0] + qs[0] ** 2)
    assert helmholtz_residual([sheared], [force]) > 1.0


def test_hamiltonian_spec_needs_exactly_one_source(particle_grid):
    with pytest.raises(DomainError):
        HamiltonianSpec()
    zero = PhaseField.zeros(particle_grid)
    with pytest.raises(GridMismatchError):
        HamiltonianSpec.from_fields([zero, zero], [zero])


@pytest.mark.parametrize("alpha", [1.0, 0.5])
def test_evolution_forms_agree_for_separable_hamiltonians(
    offset_particle_grid, alpha
):
    order = FractionalOrder(alpha)
    hamiltonian = HamiltonianSpec.analytic(offset_particle_grid, harmonic)
    rho = PhaseDensity.normalized(
        PhaseField.sample(offset_particle_grid, blob(5.0, 1.5))
    )
    gaps = evolution_form_gap(rho, hamiltonian, order)
    assert gaps["advective_gap"] <= 1e-12
    assert gaps["bracket_gap"] <= 1e-12


def test_rk4_step_is_fourth_order():
    dt = 0.1
    step = rk4_step(lambda y: -y, np.array([2.0]), dt)
    taylor = 1.0 - dt + dt**2 / 2.0 - dt**3 / 6.0 + dt**4 / 24.0
    assert step[0] == pytest.approx(2.0 * taylor, rel=1e-14)


def test_absorb_boundary_returns_a_copy():
    values = np.ones((4, 5))
    absorbed = absorb_boundary(values)
    assert np.all(values == 1.0)
    assert absorbed.sum() == 6.0
    assert np.all(absorbed[1:-1, 1:-1] == 1.0)


def test_stability_bound(particle_grid):
    check_time_step(0.02, particle_grid, 10.0)
    check_time_step(5.0, particle_grid, 0.0)
    with pytest.raises(StabilityError):
        check_time_step(0.05, particle_grid, 10.0)
    with pytest.raises(DomainError):
        check_time_step(0.0, particle_grid, 1.0)


def harmonic_period_error(count: int, h: float, steps: int) -> tuple:
    lower = -h * (count - 1) / 2.0
    grid = PhaseGrid.uniform(1, lower, h, count)
    hamiltonian = HamiltonianSpec.analytic(grid, harmonic)
    rho0 = PhaseDensity.normalized(PhaseField.sample(grid, blob()))
    density, diagnostics = liouville_evolve(
        rho0, hamiltonian, ORDER_ONE, 2.0 * math.pi / steps, steps
    )
    error = float(np.max(np.abs(density.values - rho0.values)))
    return error, diagnostics


def test_harmonic_rotation_returns_after_one_period():
    fine, diagnostics = harmonic_period_error(128, 0.1, 1000)
    coarse, _ = harmonic_period_error(64, 0.2, 500)

    assert fine <= 5e-2
    assert coarse > 2.0 * fine
    assert len(diagnostics) == 1001
    assert diagnostics.drift("plain_mass") <= 1e-6
    assert diagnostics.last.time == pytest.approx(2.0 * math.pi)


def test_evolve_argument_checks(particle_grid):
    hamiltonian = HamiltonianSpec.analytic(particle_grid, harmonic)
    rho0 = PhaseDensity.normalized(PhaseField.sample(particle_grid, blob(0.0)))

    density, diagnostics = liouville_evolve(rho0, hamiltonian, ORDER_ONE, 0.01, 0)
    assert density is rho0
    assert len(diagnostics) == 1

    with pytest.raises(DomainError):
        liouville_evolve(rho0, hamiltonian, ORDER_ONE, 0.01, -1)
    with pytest.raises(StabilityError):
        liouville_evolve(rho0, hamiltonian, ORDER_ONE, 1.0, 1)

    velocities, forces = hamiltonian_fields(hamiltonian, ORDER_ONE)
    fields = HamiltonianSpec.from_fields(velocities, forces)
    with pytest.raises(DomainError):
        liouville_evolve(rho0, fields, ORDER_ONE, 0.01, 1, EvolutionForm.BRACKET)

    other = HamiltonianSpec.analytic(PhaseGrid.uniform(1, -5.0, 0.25, 41), harmonic)
    with pytest.raises(GridMismatchError):
        liouville_evolve(rho0, other, ORDER_ONE, 0.01, 1)


def test_continuity_form_matches_bracket_form(particle_grid):
    hamiltonian = HamiltonianSpec.analytic(particle_grid, harmonic)
    rho0 = PhaseDensity.normalized(PhaseField.sample(particle_grid, blob(0.5)))
    bracket, _ = liouville_evolve(rho0, hamiltonian, ORDER_ONE, 0.01, 20)
    continuity, _ = liouville_evolve(
        rho0, hamiltonian, ORDER_ONE, 0.01, 20, EvolutionForm.CONTINUITY
    )
    assert_allclose(continuity.values, bracket.values, atol=1e-12)


def test_diagnostics_series():
    diagnostics = Diagnostics()
    diagnostics.append(DiagnosticsRecord(0.0, plain_mass=1.0, metrics={"e": 0.5}))
    diagnostics.append(DiagnosticsRecord(1.0, plain_mass=0.75))
    assert diagnostics.columns()[-1] == "e"
    assert diagnostics.rows()[1][-1] is None
    assert diagnostics.drift("plain_mass") == 0.25
    assert math.isnan(diagnostics.drift("l2_norm"))

    with pytest.raises(DomainError):
        diagnostics.append(DiagnosticsRecord(0.5))
    with pytest.raises(DomainError):
        DiagnosticsRecord(2.0, min_value=math.inf)


def test_bracket_with_a_constant_vanishes(positive_grid):
    one = PhaseField.sample(positive_grid, lambda qs, ps: 1.0)
    A = PhaseField.sample(positive_grid, blob(1.0))
    for alpha in (0.5, 1.0):
        assert fractional_bracket(one, A, FractionalOrder(alpha)).max_abs() <= 1e-12


def test_bracket_converges_to_the_poisson_bracket():
    def poisson_error(h: float, count: int) -> float:
        grid = PhaseGrid.uniform(1, -2.0, h, count)
        A = PhaseField.sample(grid, lambda qs, ps: np.sin(qs[0]) * np.cos(ps[0]))
        B = PhaseField.sample(grid, lambda qs, ps: np.exp(0.5 * qs[0]) * np.sin(ps[0]))
        qs, ps = grid.mesh()
        q, p = qs[0], ps[0]
        # A_q B_p - A_p B_q
        exact = np.exp(0.5 * q) * (
            np.cos(q) * np.cos(p) ** 2 + 0.5 * np.sin(q) * np.sin(p) ** 2
        )
        bracket = fractional_bracket(A, B, ORDER_ONE).values
        return float(np.max(np.abs(bracket - exact)))

    assert poisson_error(0.2, 21) / poisson_error(0.1, 41) >= 1.8


@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_liouville_rhs_is_linear_in_the_fields(offset_particle_grid, alpha):
    order = FractionalOrder(alpha)
    grid = offset_particle_grid
    rho = PhaseDensity.normalized(PhaseField.sample(grid, blob(5.0)))
    velocity = PhaseField.sample(grid, lambda qs, ps: ps[0])
    force = PhaseField.sample(grid, lambda qs, ps: -qs[0])
    doubled_velocity = PhaseField(grid, 2.0 * velocity.values)
    doubled_force = PhaseField(grid, 2.0 * force.values)

    single = liouville_rhs(rho, [velocity], [force], order)
    double = liouville_rhs(rho, [doubled_velocity], [doubled_force], order)
    assert_allclose(double.values, 2.0 * single.values, atol=1e-12)

    zero = PhaseField.zeros(grid)
    assert liouville_rhs(rho, [zero], [zero], order).max_abs() == 0.0
    with pytest.raises(GridMismatchError):
        liouville_rhs(rho, [velocity], [], order)


def test_liouville_rhs_does_not_distribute_over_products(offset_particle_grid):
    order = FractionalOrder(0.5)
    grid = offset_particle_grid
    rho = PhaseDensity.normalized(PhaseField.sample(grid, blob(5.0)))
    velocity = PhaseField.sample(grid, lambda qs, ps: qs[0] + ps[0])
    force = PhaseField.sample(grid, lambda qs, ps: -qs[0])

    rhs = liouville_rhs(rho, [velocity], [force], order).values
    distributed = -(
        rho.values * d_q(velocity.values, grid, 0, order)
        + velocity.values * d_q(rho.values, grid, 0, order)
    ) - (
        rho.values * d_p(force.values, grid, 0, order)
        + force.values * d_p(rho.values, grid, 0, order)
    )
    scale = float(np.max(np.abs(rhs)))
    assert scale > 0.0
    assert float(np.max(np.abs(rhs - distributed))) > 0.01 * scale


def test_fractional_flow_does_not_conserve_mass(offset_particle_grid):
    hamiltonian = HamiltonianSpec.analytic(offset_particle_grid, harmonic)

    def shifted(qs, ps):
        return np.exp(-((qs[0] - 4.5) ** 2 + (ps[0] - 5.5) ** 2) / (2.0 * 0.5**2))

    rho0 = PhaseDensity.normalized(PhaseField.sample(offset_particle_grid, shifted))
    drifts = {}
    for alpha in (1.0, 0.5):
        _, diagnostics = liouville_evolve(
            rho0, hamiltonian, FractionalOrder(alpha), 0.004, 25
        )
        drifts[alpha] = (
            diagnostics.drift("plain_mass"),
            diagnostics.drift("fractional_mass"),
        )

    assert max(drifts[1.0]) <= 1e-6
    plain, fractional = drifts[0.5]
    assert math.isfinite(plain) and math.isfinite(fractional)
    assert 1e-4 < plain <= 0.5
    assert fractional > 0.0


def test_hamiltonian_fields_at_half_order():
    axis = Grid1D(0.0, 0.05, 41)
    grid = PhaseGrid((axis,), (axis,))
    kinetic = HamiltonianSpec.analytic(grid, lambda qs, ps: 0.5 * ps[0] ** 2)
    (velocity,), (force,) = hamiltonian_fields(kinetic, FractionalOrder(0.5))

    _, ps = grid.mesh()
    # D^0.5 (p^2 / 2) = Γ(3) / (2 Γ(2.5)) p^1.5
    exact = np.broadcast_to(0.7522527781 * ps[0] ** 1.5, grid.shape)
    assert_allclose(velocity.values, exact, atol=1e-2)
    assert force.max_abs() == 0.0

    constant = HamiltonianSpec.analytic(grid, lambda qs, ps: 3.0)
    (velocity,), (force,) = hamiltonian_fields(constant, FractionalOrder(0.5))
    assert velocity.max_abs() <= 1e-12
    assert force.max_abs() <= 1e-12


def test_helmholtz_residual_of_a_damped_force(particle_grid):
    velocity = PhaseField.sample(particle_grid, lambda qs, ps: ps[0])
    damped = PhaseField.sample(particle_grid, lambda qs, ps: -qs[0] - 0.3 * ps[0])
    assert helmholtz_residual([velocity], [damped]) == pytest.approx(0.3, abs=1e-6)

    zero = PhaseField.zeros(particle_grid)
    assert helmholtz_residual([zero], [zero]) == 0.0


def test_bracket_antisymmetry_residual_at_half_order(positive_grid):
    order = FractionalOrder(0.5)
    q = PhaseField.sample(positive_grid, lambda qs, ps: qs[0])
    p = PhaseField.sample(positive_grid, lambda qs, ps: ps[0])
    nodes = positive_grid.q_axes[0].nodes
    # {q, p} + {p, q} = (sqrt(p) - sqrt(q)) / Γ(1.5)
    gap = np.sqrt(nodes)[None, :] - np.sqrt(nodes)[:, None]
    expected = float(np.max(np.abs(gap))) / math.gamma(1.5)
    assert bracket_antisymmetry_residual(q, p, order) == pytest.approx(
        expected, rel=1e-9
    )

    both = PhaseField(positive_grid, q.values + p.values)
    assert bracket_antisymmetry_residual(both, both, order) == pytest.approx(
        2.0 * expected, rel=1e-9
    )


def test_liouville_rhs_at_order_one_is_the_poisson_flow():
    grid = PhaseGrid.uniform(1, -4.0, 0.025, 321)
    rho = PhaseDensity.normalized(PhaseField.sample(grid, blob(0.5)))
    velocity = PhaseField.sample(grid, lambda qs, ps: ps[0])
    force = PhaseField.sample(grid, lambda qs, ps: -qs[0])

    rhs = liouville_rhs(rho, [velocity], [force], ORDER_ONE).values
    _, ps = grid.mesh()
    # -{rho, H} for the harmonic Hamiltonian and a Gaussian centred at q = 0.5
    exact = -0.5 * ps[0] / 0.7**2 * rho.values
    assert_allclose(rhs[1:-1, 1:-1], exact[1:-1, 1:-1], atol=1e-3)
