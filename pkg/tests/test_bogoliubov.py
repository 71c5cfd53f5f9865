import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import trapezoid

from frackin.bogoliubov import (
    NBodyDensity,
    PairForceKernel,
    boundary_vanishing_check,
    collision_term,
    evolved_residual,
    first_bogoliubov_residual,
    free_velocity,
    interaction_terms,
    nbody_evolve,
    nbody_liouville_step,
    order_exchange_residual,
    reduce,
    surface_term,
)
from frackin.errors import DomainError, GateFailure, GridError
from frackin.fraccore import FractionalOrder, volume_scale_factor
from frackin.phase import PhaseField, PhaseGrid

ORDER_ONE = FractionalOrder(1.0)
KAPPA = 0.1


def linear_coupling(q1, p1, q2, p2):
    return -KAPPA * (q1 - q2)


def harmonic_trap(q, p, t):
    return -q


@pytest.fixture
def kernel() -> PairForceKernel:
    return PairForceKernel(linear_coupling, harmonic_trap, "linear+harmonic")


@pytest.fixture
def small_grid() -> PhaseGrid:
    return PhaseGrid.uniform(1, -4.0, 0.8, 11)


def test_from_function_normalizes(particle_grid, gaussian_density):
    rho2 = gaussian_density(particle_grid, coupling=0.1)
    assert rho2.N == 2
    assert rho2.values.shape == (21, 21, 21, 21)
    assert rho2.mass() == pytest.approx(1.0, rel=1e-12)


def test_density_validation(particle_grid):
    with pytest.raises(GridError):
        NBodyDensity(particle_grid, np.ones((21, 21, 21)))
    with pytest.raises(GridError):
        NBodyDensity(PhaseGrid.uniform(2, 0.0, 1.0, 3), np.ones((3,) * 4))
    with pytest.raises(DomainError):
        NBodyDensity(particle_grid, -np.ones((21, 21))).normalized()
    with pytest.raises(GridError):
        NBodyDensity(particle_grid, np.ones((21,) * 4)).to_phase_field()


def test_exchange_symmetry(particle_grid, gaussian_density):
    symmetric = gaussian_density(particle_grid, coupling=0.1)
    assert symmetric.symmetry_residual() <= 1e-12

    def shifted(q1, p1, q2, p2):
        return np.exp(-((q1 - 1.0) ** 2 + p1**2 + q2**2 + p2**2))

    asymmetric = NBodyDensity.from_function(particle_grid, 2, shifted)
    assert asymmetric.symmetry_residual() > 1e-3
    assert_allclose(
        asymmetric.swapped(1, 2), np.transpose(asymmetric.values, (2, 3, 0, 1))
    )


def test_reduce_product_density(particle_grid):
    a = NBodyDensity.from_function(
        particle_grid, 1, lambda q, p: np.exp(-(q**2) - p**2)
    )
    b = NBodyDensity.from_function(
        particle_grid, 1, lambda q, p: np.exp(-((q - 1) ** 2) - 2 * p**2)
    )
    pair = NBodyDensity.product(a.to_phase_field(), b.to_phase_field())
    assert pair.N == 2
    assert_allclose(reduce(pair, [1]).values, a.values, atol=1e-14)
    assert_allclose(reduce(pair, [2]).values, b.values, atol=1e-14)


def test_reduce_is_consistent(small_grid, gaussian_density):
    rho3 = gaussian_density(small_grid, N=3, coupling=0.05)
    assert reduce(rho3, [1, 2, 3]) is rho3
    direct = reduce(rho3, [1]).values
    stepwise = reduce(reduce(rho3, [1, 2]), [1]).values
    assert_allclose(stepwise, direct, atol=1e-14)
    assert reduce(rho3, [2]).mass() == pytest.approx(1.0, rel=1e-12)


def test_reduce_arguments(particle_grid, gaussian_density):
    rho2 = gaussian_density(particle_grid)
    with pytest.raises(DomainError):
        reduce(rho2, [])
    with pytest.raises(DomainError):
        reduce(rho2, [3])
    with pytest.raises(DomainError):
        reduce(rho2, [1], FractionalOrder(0.5))


def test_fractional_reduction_on_positive_axes(
    offset_particle_grid, gaussian_density
):
    rho2 = gaussian_density(offset_particle_grid, center=5.25)
    reduced = reduce(rho2, [1], FractionalOrder(0.5))
    plain = reduce(rho2, [1])
    assert reduced.values.shape == (21, 21)
    assert np.all(reduced.values >= 0.0)
    assert np.max(np.abs(reduced.values - plain.values)) > 1e-3
    assert reduce(rho2, [1], ORDER_ONE).values == pytest.approx(plain.values)


def test_fractional_reduction_weights_by_the_scale_factor(
    offset_particle_grid, gaussian_density
):
    order = FractionalOrder(0.5)
    rho2 = gaussian_density(offset_particle_grid, center=5.25)
    weight = volume_scale_factor(offset_particle_grid.q_axes[0].nodes, order)
    weighted = rho2.values * weight[None, None, :, None] * weight[None, None, None, :]
    expected = trapezoid(trapezoid(weighted, dx=0.5, axis=3), dx=0.5, axis=2)
    assert_allclose(reduce(rho2, [1], order).values, expected, rtol=1e-12)


def test_boundary_gate(particle_grid, gaussian_density, kernel):
    narrow = gaussian_density(particle_grid)
    report = boundary_vanishing_check(narrow)
    assert report.passed
    assert len(report.faces) == 8
    assert "q2-upper" in report.faces

    wide = gaussian_density(particle_grid, sigma=3.0)
    assert not boundary_vanishing_check(wide).passed
    with pytest.raises(GateFailure):
        collision_term(wide, kernel, ORDER_ONE, 2)
    collision_term(wide, kernel, ORDER_ONE, 2, check_boundary=False)


def test_reciprocity(particle_grid, kernel):
    assert kernel.reciprocity_residual(particle_grid) == 0.0
    one_sided = PairForceKernel(lambda q1, p1, q2, p2: q2)
    assert one_sided.reciprocity_residual(particle_grid) > 1.0


def test_collision_term_vanishes_without_partners(particle_grid, gaussian_density):
    rho2 = gaussian_density(particle_grid)
    kernel = PairForceKernel(linear_coupling)
    assert collision_term(rho2, kernel, ORDER_ONE, 1).max_abs() == 0.0

    free = PairForceKernel(lambda q1, p1, q2, p2: 0.0)
    assert collision_term(rho2, free, ORDER_ONE, 5).max_abs() == 0.0


@pytest.mark.parametrize("N_total", [2, 10])
def test_collision_term_of_independent_particles(particle_grid, N_total):
    one = NBodyDensity.from_function(
        particle_grid, 1, lambda q, p: np.exp(-(q**2 + p**2) / 1.28)
    )
    field = one.to_phase_field()
    rho2 = NBodyDensity.product(field, field)
    kernel = PairForceKernel(linear_coupling)
    collision = collision_term(rho2, kernel, ORDER_ONE, N_total)

    # the mean position of particle 2 is zero, so the force reduces to -κ q1
    qs, _ = particle_grid.mesh()
    flux = -KAPPA * qs[0] * one.values
    h = particle_grid.p_axes[0].h
    expected = -(N_total - 1) * np.gradient(flux, h, axis=1, edge_order=2)
    assert_allclose(collision.values, expected, atol=1e-13)


@pytest.mark.parametrize("alpha", [1.0, 0.5])
def test_integration_commutes_with_the_momentum_derivative(
    offset_particle_grid, gaussian_density, kernel, alpha
):
    rho2 = gaussian_density(offset_particle_grid, center=5.25, coupling=0.02)
    residual = order_exchange_residual(rho2, kernel, FractionalOrder(alpha))
    assert residual <= 1e-12


def test_interaction_terms_are_symmetric(small_grid, gaussian_density, kernel):
    rho3 = gaussian_density(small_grid, N=3, coupling=0.05)
    summed, single = interaction_terms(rho3, kernel, ORDER_ONE)
    scale = single.max_abs()
    assert scale > 0.0
    assert_allclose(summed.values, 2.0 * single.values, atol=1e-12 * scale)

    with pytest.raises(GridError):
        interaction_terms(reduce(rho3, [1, 2]), kernel, ORDER_ONE)


def test_surface_term(particle_grid, offset_particle_grid, gaussian_density):
    def velocity(q, p):
        return p

    rho2 = gaussian_density(particle_grid)
    assert surface_term(rho2, velocity, ORDER_ONE) <= 1e-6
    assert surface_term(rho2, velocity, ORDER_ONE, particle=2) <= 1e-6

    shifted = gaussian_density(offset_particle_grid, center=5.25)
    assert surface_term(shifted, velocity, FractionalOrder(0.5)) > 1e-3


def test_first_hierarchy_equation_along_a_trajectory(
    particle_grid, gaussian_density, kernel
):
    # off-centre, so the marginal rotates and ∂ρ1/∂t is not small
    rho2 = gaussian_density(particle_grid, center=0.5, coupling=0.1)
    fine = evolved_residual(rho2, kernel, ORDER_ONE, 0.02)
    coarse = evolved_residual(rho2, kernel, ORDER_ONE, 0.04)
    assert fine <= 5e-3
    assert coarse > 2.5 * fine


def test_nbody_step_is_fourth_order(gaussian_density, kernel):
    grid = PhaseGrid.uniform(1, -4.0, 0.5, 17)
    rho2 = gaussian_density(grid, coupling=0.1)

    def local_error(dt: float) -> float:
        def step(state: NBodyDensity, h: float) -> NBodyDensity:
            return nbody_liouville_step(state, kernel, ORDER_ONE, h, absorbing=False)

        whole = step(rho2, dt)
        half = step(step(rho2, dt / 2), dt / 2)
        return float(np.max(np.abs(whole.values - half.values)))

    assert local_error(0.02) / local_error(0.01) >= 24.0


def test_nbody_evolve_preserves_symmetry_and_mass(
    particle_grid, gaussian_density, kernel
):
    rho2 = gaussian_density(particle_grid, coupling=0.1)
    states = nbody_evolve(rho2, kernel, ORDER_ONE, 0.02, 5)
    assert len(states) == 6
    assert states[-1].symmetry_residual() <= 1e-12
    assert states[-1].mass() == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(DomainError):
        nbody_evolve(rho2, kernel, ORDER_ONE, 0.0, 1)


def test_product_of_phase_fields_keeps_grid(particle_grid):
    field = PhaseField.sample(particle_grid, lambda qs, ps: np.exp(-qs[0] ** 2))
    rho2 = NBodyDensity.product(field, field)
    assert rho2.grid == particle_grid
    assert rho2.symmetry_residual() == 0.0


def test_stationary_marginal_has_a_small_residual(gaussian_density):
    # an uncoupled isotropic Gaussian is stationary in a harmonic trap
    kernel = PairForceKernel(lambda q1, p1, q2, p2: 0.0 * q1, harmonic_trap)

    def residual(h: float, count: int) -> float:
        grid = PhaseGrid.uniform(1, -5.0, h, count)
        rho2 = gaussian_density(grid)
        rho1 = reduce(rho2, [1]).to_phase_field()
        return first_bogoliubov_residual(
            rho1, rho2, kernel, free_velocity, ORDER_ONE, 2, PhaseField.zeros(grid)
        )

    coarse = residual(0.5, 21)
    fine = residual(0.25, 41)
    assert fine < 0.05
    assert coarse > 2.5 * fine


def test_residual_needs_one_grid(particle_grid, small_grid, gaussian_density, kernel):
    rho2 = gaussian_density(particle_grid)
    rho1 = reduce(rho2, [1]).to_phase_field()
    with pytest.raises(GridError):
        first_bogoliubov_residual(
            rho1,
            rho2,
            kernel,
            free_velocity,
            ORDER_ONE,
            2,
            PhaseField.zeros(small_grid),
        )


def test_residual_vanishes_without_any_flow(particle_grid, gaussian_density):
    def still(q, p):
        return 0.0 * p

    kernel = PairForceKernel(lambda q1, p1, q2, p2: 0.0 * q1)
    rho2 = gaussian_density(particle_grid, coupling=0.1)
    rho1 = reduce(rho2, [1]).to_phase_field()
    zero = PhaseField.zeros(particle_grid)
    for N_total in (2, 5):
        residual = first_bogoliubov_residual(
            rho1, rho2, kernel, still, ORDER_ONE, N_total, zero
        )
        assert residual <= 1e-10


def test_first_hierarchy_equation_for_three_particles(gaussian_density, kernel):
    grid = PhaseGrid.uniform(1, -5.0, 1.0, 11)
    rho3 = gaussian_density(grid, N=3, center=0.3, coupling=0.1)
    assert evolved_residual(rho3, kernel, ORDER_ONE, 0.02) <= 5e-3
