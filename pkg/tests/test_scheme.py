import warnings

import numpy as np
import pytest

from conftest import random_field
from oracles import dense_step_matrix
from llbdf2.discrete_ops import exchange_energy, project
from llbdf2.linear_system import SolverConfig
from llbdf2.mesh import VectorField, make_grid
from llbdf2.mms import ManufacturedSolution, forcing_callback
from llbdf2.scheme import (EnergyStop, SchemeParams, StepFailure, apply_field_terms, bdf2_step,
                           equation_residual, init, run)


def unit_field(grid, rng):
    return project(random_field(grid, rng))


def test_params_validation():
    with pytest.raises(ValueError):
        SchemeParams(alpha=0.0, k=0.1, t_final=1.0)
    with pytest.raises(ValueError):
        SchemeParams(alpha=0.1, k=-0.1, t_final=1.0)
    with pytest.raises(ValueError):
        SchemeParams(alpha=0.1, k=2.0, t_final=1.0)
    assert SchemeParams(alpha=0.1, k=0.1, t_final=1.0).n_steps == 10


def test_apply_field_terms_example():
    out = apply_field_terms(np.array([1.0, 0.0, 0.0]), (0.0, 0.0, 1.0), 0.1)
    np.testing.assert_allclose(out, [0.0, 1.0, 0.1], atol=1e-16)


@pytest.mark.parametrize("dim", [1, 3])
def test_constant_field_is_a_fixed_point(dim):
    grid = make_grid(dim, 12 if dim == 1 else 4)
    m0 = VectorField.from_interior(grid, np.array([0.0, 0.6, 0.8]))
    params = SchemeParams(alpha=0.01, k=0.01, t_final=1.0)
    state = init(m0, params)
    for _ in range(99):
        state = bdf2_step(state, params)
        # Exact up to a few ulps of rounding in the factorization and projection.
        assert np.max(np.abs(state.m_curr.interior - m0.interior)) <= 1e-14


def test_first_step_matches_dense_oracle(rng):
    grid = make_grid(1, 4)
    m0 = unit_field(grid, rng)
    k, alpha = 0.05, 0.2
    params = SchemeParams(alpha=alpha, k=k, t_final=1.0)
    state = init(m0, params)
    A = dense_step_matrix(m0.interior, k, alpha, grid, leading=1.0)
    mt = np.linalg.solve(A, (m0.interior / k).reshape(-1)).reshape(4, 3)
    np.testing.assert_allclose(state.mt_curr.interior, mt, rtol=1e-12, atol=1e-12)
    expected = mt / np.linalg.norm(mt, axis=-1, keepdims=True)
    np.testing.assert_allclose(state.m_curr.interior, expected, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("method", ["direct", "iterative"])
def test_every_step_satisfies_the_update_equation(method, small_grid, rng):
    sol = ManufacturedSolution(small_grid.dim)
    params = SchemeParams(alpha=0.05, k=0.02, t_final=0.2,
                          forcing=forcing_callback(sol, 0.05), solver=SolverConfig(method))
    state = init(unit_field(small_grid, rng), params)
    for _ in range(9):
        nxt = bdf2_step(state, params)
        assert equation_residual(state, nxt, params) <= 1e-9
        np.testing.assert_allclose(np.linalg.norm(nxt.m_curr.interior, axis=-1), 1.0, atol=1e-14)
        state = nxt


def test_zero_bdf2_steps_when_final_time_is_one_step(rng):
    grid = make_grid(1, 6)
    params = SchemeParams(alpha=0.1, k=0.25, t_final=0.25)
    state = run(unit_field(grid, rng), params)
    assert state.n == 0 and state.t_curr == 0.25


def test_run_reaches_final_time_and_counts_steps(rng):
    grid = make_grid(1, 8)
    seen = []
    state = run(unit_field(grid, rng), SchemeParams(alpha=0.1, k=0.1, t_final=1.0),
                observers=[lambda step, t, s: seen.append(step)])
    assert seen == list(range(1, 11))
    assert state.t_curr == pytest.approx(1.0)


def test_non_integer_step_count_warns(rng):
    grid = make_grid(1, 5)
    with pytest.warns(UserWarning, match="not an integer"):
        state = run(unit_field(grid, rng), SchemeParams(alpha=0.1, k=0.3, t_final=1.0))
    assert state.n + 1 == 3


def test_non_unit_initial_data_rejected():
    grid = make_grid(1, 4)
    with pytest.raises(ValueError):
        init(VectorField.from_interior(grid, np.array([0.0, 0.0, 2.0])),
             SchemeParams(alpha=0.1, k=0.1, t_final=1.0))


def test_solver_failure_is_wrapped_with_step_index(rng):
    grid = make_grid(3, 5)
    params = SchemeParams(alpha=0.01, k=5.0, t_final=10.0,
                          solver=SolverConfig("iterative", max_iterations=1, restart=1))
    with pytest.raises(StepFailure) as info:
        init(unit_field(grid, rng), params)
    assert info.value.step == 1


def test_degenerate_projection_reported_as_step_failure():
    grid = make_grid(1, 3)
    # A forcing that exactly cancels m0/k drives the intermediate field to zero.
    m0 = VectorField.from_interior(grid, np.array([1.0, 0.0, 0.0]))
    k = 0.1
    params = SchemeParams(alpha=0.1, k=k, t_final=1.0,
                          forcing=lambda coords, t: np.broadcast_to(
                              [-1.0 / k, 0.0, 0.0], coords.shape[:-1] + (3,)).copy())
    with pytest.raises(StepFailure):
        init(m0, params)


def test_energy_stop_halts_relaxation(rng):
    grid = make_grid(1, 16)
    x = grid.centers(0)
    m0 = VectorField.from_interior(grid, np.stack([np.cos(np.pi * x), np.sin(np.pi * x), 0 * x], -1))
    stopper = EnergyStop(1e-7)
    state = run(m0, SchemeParams(alpha=1.0, k=0.05, t_final=500.0), observers=[stopper])
    assert state.t_curr < 500.0
    hist = np.array(stopper.history)
    assert abs(hist[-1] - hist[-2]) / hist[-2] < 1e-7
    # Damped relaxation releases exchange energy.
    assert hist[-1] < exchange_energy(m0)


def test_unforced_energy_trend(rng):
    # Informational: the projection step does not guarantee monotone energy,
    # so only the overall decay is asserted.
    grid = make_grid(1, 32)
    x = grid.centers(0)
    m0 = VectorField.from_interior(grid, np.stack([np.cos(3 * x), np.sin(3 * x), 0 * x], -1))
    stopper = EnergyStop(0.0)
    run(m0, SchemeParams(alpha=0.5, k=0.01, t_final=0.5), observers=[stopper])
    hist = np.array(stopper.history)
    increases = int(np.sum(np.diff(hist) > 1e-14 * hist[0]))
    print(f"energy increases in {increases} of {hist.size - 1} steps")
    assert hist[-1] < hist[0]


def test_applied_field_rotates_towards_field(rng):
    grid = make_grid(1, 4)
    m0 = VectorField.from_interior(grid, np.array([1.0, 0.0, 0.0]))
    state = run(m0, SchemeParams(alpha=0.5, k=0.05, t_final=5.0, h_app=(0.0, 0.0, 1.0)))
    mz = state.m_curr.interior[:, 2]
    assert np.all(mz > 0.5)
    np.testing.assert_allclose(mz, mz[0], atol=1e-14)
