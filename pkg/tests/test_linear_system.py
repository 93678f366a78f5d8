import numpy as np
import pytest

from conftest import random_field
from oracles import dense_step_matrix, step_operator
from llbdf2.linear_system import (SolverBreakdown, SolverConfig, apply_operator, assemble,
                                  coupling_blocks, neumann_laplacian, skew, solve)
from llbdf2.mesh import NonFiniteFieldError, make_grid


def unit(rng, shape):
    v = rng.standard_normal(shape + (3,))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def test_skew_matches_cross(rng):
    v, w = rng.standard_normal((2, 10, 3))
    np.testing.assert_allclose(np.einsum("nij,nj->ni", skew(v), w), np.cross(v, w), atol=1e-15)


def test_single_cell_system_is_diagonal():
    g = make_grid(1, 1)
    rhs = np.array([[1.0, -2.0, 3.0]])
    k = 0.1
    system = assemble(np.array([[0.0, 0.6, 0.8]]), rhs, k, 0.3, g)
    out = solve(system)
    np.testing.assert_allclose(out.x, 2 * k / 3 * rhs, rtol=1e-15)
    assert out.residual == 0.0


def test_zero_hat_m_gives_diagonal(rng):
    g = make_grid(1, 6)
    rhs = rng.standard_normal((6, 3))
    out = solve(assemble(np.zeros((6, 3)), rhs, 0.5, 0.1, g))
    np.testing.assert_allclose(out.x, rhs / 3.0, rtol=1e-14)


@pytest.mark.parametrize("dim", [1, 3])
def test_blocks_follow_stencil(dim, rng):
    g = make_grid(1, 8) if dim == 1 else make_grid(3, (3, 4, 2))
    hat_m = unit(rng, g.interior_shape)
    k, alpha = 0.02, 0.3
    system = assemble(hat_m, np.zeros(g.interior_shape + (3,)), k, alpha, g)
    lap = neumann_laplacian(g).toarray()
    B = coupling_blocks(hat_m, alpha)
    for I in range(g.n_cells):
        assert system.blocks_in_row(I) <= 2 * dim + 1
        for J in range(g.n_cells):
            expected = B[I] * lap[I, J] + (1.5 / k * np.eye(3) if I == J else 0)
            np.testing.assert_allclose(system.block(I, J), expected, rtol=1e-14, atol=1e-14)


def test_assembled_matrix_matches_stencil_oracle(small_grid, rng):
    hat_m = unit(rng, small_grid.interior_shape)
    system = assemble(hat_m, np.zeros(small_grid.interior_shape + (3,)), 0.01, 0.2, small_grid)
    dense = dense_step_matrix(hat_m, 0.01, 0.2, small_grid)
    np.testing.assert_allclose(system.matrix.toarray(), dense, rtol=1e-13, atol=1e-10)


def test_solution_satisfies_step_equation(rng):
    g = make_grid(1, 8)
    hat_m = 1.3 * unit(rng, (8,))
    rhs = rng.standard_normal((8, 3))
    k, alpha = 0.05, 0.01
    x = solve(assemble(hat_m, rhs, k, alpha, g)).x
    res = step_operator(x, hat_m, k, alpha, g) - rhs
    assert np.max(np.abs(res)) <= 1e-12 * np.max(np.abs(rhs))


def test_direct_and_iterative_agree(small_grid, rng):
    hat_m = unit(rng, small_grid.interior_shape)
    rhs = rng.standard_normal(small_grid.interior_shape + (3,))
    system = assemble(hat_m, rhs, 0.01, 0.01, small_grid)
    direct = solve(system, SolverConfig("direct"))
    iterative = solve(system, SolverConfig("iterative"))
    assert iterative.residual <= 1e-10
    assert np.linalg.norm(direct.x - iterative.x) <= 1e-8 * max(1.0, np.linalg.norm(direct.x))


@pytest.mark.parametrize("k", [1e-4, 1.0, 1e3])
@pytest.mark.parametrize("method", ["direct", "iterative"])
def test_unconditional_solvability(k, method, small_grid, rng):
    hat_m = unit(rng, small_grid.interior_shape)
    rhs = rng.standard_normal(small_grid.interior_shape + (3,))
    out = solve(assemble(hat_m, rhs, k, 0.01, small_grid), SolverConfig(method))
    assert out.residual <= 1e-10


@pytest.mark.parametrize("k", [1e-4, 1.0, 1e3])
def test_operator_is_monotone_in_laplacian_pairing(k, small_grid, rng):
    # Pairing with -Lap x kills the precession term: <Ax, -Lap x> equals
    # (3/2k)|grad x|^2 + alpha |m_hat x Lap x|^2, which is never negative.
    alpha = 0.1
    hat_m = unit(rng, small_grid.interior_shape)
    system = assemble(hat_m, np.zeros(small_grid.interior_shape + (3,)), k, alpha, small_grid)
    lap = neumann_laplacian(small_grid)
    for _ in range(20):
        x = rng.standard_normal((small_grid.n_cells, 3))
        lx = lap @ x
        lhs = -np.sum(apply_operator(system, x) * lx)
        expected = 1.5 / k * -np.sum(x * lx) + alpha * np.sum(
            np.cross(hat_m.reshape(-1, 3), lx) ** 2)
        assert expected >= 0
        assert lhs == pytest.approx(expected, rel=1e-10, abs=1e-12 * abs(expected) + 1e-12)


def test_assembly_is_linear_in_rhs(rng):
    g = make_grid(1, 5)
    hat_m = unit(rng, (5,))
    r1, r2 = rng.standard_normal((2, 5, 3))
    s = assemble(hat_m, r1 + r2, 0.1, 0.1, g)
    assert np.array_equal(s.rhs, (r1 + r2).reshape(5, 3))


def test_assembly_rejects_nonfinite():
    g = make_grid(1, 3)
    hat_m = np.ones((3, 3))
    hat_m[1, 2] = np.inf
    with pytest.raises(NonFiniteFieldError):
        assemble(hat_m, np.zeros((3, 3)), 0.1, 0.1, g)


def test_iterative_breakdown_reported(rng):
    g = make_grid(3, 6)
    hat_m = unit(rng, g.interior_shape)
    system = assemble(hat_m, rng.standard_normal(g.interior_shape + (3,)), 10.0, 0.01, g)
    with pytest.raises(SolverBreakdown):
        solve(system, SolverConfig("iterative", max_iterations=2, restart=1))


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig("cholesky")
    with pytest.raises(ValueError):
        SolverConfig(tolerance=1.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iterations=0)
