import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dampwave.char_solver import (BUDGET_EXHAUSTED, CONVERGED, DIVERGED, ConeField, ConeGrid,
                                  ConeOperator, check_pointwise_bound, cone_integral,
                                  existence_horizon, lattice_u_L, linearized_solve, picard_solve,
                                  prolong, residual, smallness_eps0, weighted_norm1,
                                  weighted_norm2)
from dampwave.coefficients import KernelEvaluator, model_profile
from dampwave.errors import UsageError
from dampwave.exponents import ProblemParams
from dampwave.initial_data import blowup_family, decay_family, zero_family

GLOB = ProblemParams(3.0, 2.0, 3.0)


@pytest.fixture(scope="module")
def small():
    grid = ConeGrid.make(4.0, 4.0, 32)
    ke = KernelEvaluator(model_profile(2.0), grid.T + grid.R + 5)
    return grid, ke


def _in_cone(t, r, s, y):
    return (s >= 0) & (np.abs(t - r) < s + y) & (s + y < t + r) & (s - y < t - r)


@pytest.mark.parametrize("t,r", [(2.0, 3.0), (3.0, 1.5), (1.0, 1.0)])
def test_cone_area_monte_carlo(t, r):
    grid = ConeGrid.make(4.0, 4.0, 64)
    ke = KernelEvaluator(model_profile(0.0), 20.0)
    val = cone_integral(ke, ConeField(grid, np.ones(grid.mask().shape)), t, r)
    rng = np.random.default_rng(7)
    n = 400000
    s = rng.uniform(0, t, n)
    y = rng.uniform(0, t + r, n)
    area = t * (t + r) * np.mean(_in_cone(t, r, s, y))
    assert abs(val - 0.5 * area) < 0.01 * 0.5 * area


def test_cone_linear_and_zero(small):
    grid, ke = small
    rng = np.random.default_rng(1)
    F = rng.random(grid.mask().shape)
    op = ConeOperator(ke, grid)
    assert np.all(op.apply(np.zeros_like(F)) == 0)
    assert np.allclose(op.apply(2 * F), 2 * op.apply(F), rtol=1e-15, atol=0)
    with pytest.raises(UsageError):
        grid.node(0.3, 0.1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_monotone_operator(seed):
    grid = ConeGrid.make(3.0, 3.0, 16)
    op = ConeOperator(KernelEvaluator(model_profile(1.0), 12.0), grid)
    rng = np.random.default_rng(seed)
    F = rng.random(grid.mask().shape)
    G = F + rng.random(F.shape)
    assert np.all(op.apply(F) <= op.apply(G))


def test_picard_iterates_nondecreasing():
    grid = ConeGrid.make(4.0, 8.0, 32)
    ke = KernelEvaluator(model_profile(0.0), 20.0)
    op = ConeOperator(ke, grid)
    uL = 0.3 * lattice_u_L(ke, blowup_family(3.0), grid)
    u = uL
    for _ in range(6):
        nxt = uL + op.apply(op.nonlinearity(u, 2.0))
        assert np.all(nxt >= u - 1e-15)
        u = nxt


def test_zero_eps(small):
    grid, ke = small
    out = picard_solve(ke, decay_family(3.0), 0.0, GLOB, grid)
    assert out.status == CONVERGED and out.iterations == 1 and np.all(out.field.u == 0)
    lin = linearized_solve(ke, decay_family(3.0), 0.0, GLOB, grid)
    assert lin.status == CONVERGED and np.all(lin.field.u == 0)


def test_global_norm_inequality():
    grid = ConeGrid.make(4.0, 4.0, 64)
    ke = KernelEvaluator(model_profile(2.0), 15.0)
    data = decay_family(3.0)
    eps = 1e-3
    out = picard_solve(ke, data, eps, GLOB, grid)
    assert out.status == CONVERGED
    C0 = weighted_norm1(ConeField(grid, lattice_u_L(ke, data, grid)), GLOB)
    assert weighted_norm1(out.field, GLOB) <= 2 * eps * C0


def test_linearized_matches_picard():
    grid = ConeGrid.make(4.0, 4.0, 48)
    ke = KernelEvaluator(model_profile(2.0), 15.0)
    data = decay_family(3.0)
    a = picard_solve(ke, data, 0.05, GLOB, grid)
    b = linearized_solve(ke, data, 0.05, GLOB, grid)
    assert a.status == b.status == CONVERGED
    diff = weighted_norm1(ConeField(grid, a.field.u - b.field.u), GLOB)
    assert diff < 5e-10


def test_divergence_beyond_fd_blowup():
    # FD blow-up for these data is near T = 330 (eps = 0.5)
    p = ProblemParams(2.0, 0.0, 3.0)
    grid = ConeGrid.make(400.0, 20.0, 420)
    ke = KernelEvaluator(model_profile(0.0), 430.0)
    out = picard_solve(ke, blowup_family(3.0), 0.5, p, grid, budget=300)
    assert out.status == DIVERGED


def test_budget_exhausted(small):
    grid, ke = small
    out = picard_solve(ke, decay_family(3.0), 0.5, GLOB, grid, budget=1, tol=1e-300)
    assert out.status == BUDGET_EXHAUSTED


def test_residual_refinement():
    data = decay_family(3.0)
    res = []
    for N in (16, 32, 64):
        grid = ConeGrid.make(2.0, 4.0, N)
        ke = KernelEvaluator(model_profile(2.0), 12.0)
        out = picard_solve(ke, data, 0.2, GLOB, grid)
        assert out.status == CONVERGED
        res.append(residual(ke, data, 0.2, GLOB, out.field))
    assert res[0] / res[1] >= 1.8 and res[1] / res[2] >= 1.8
    # the linear guess has a nonlinear defect
    grid = ConeGrid.make(2.0, 4.0, 16)
    ke = KernelEvaluator(model_profile(2.0), 12.0)
    guess = ConeField(grid, 0.9 * lattice_u_L(ke, data, grid))
    assert residual(ke, data, 0.9, GLOB, guess) > 1e-4
    zero = ConeField(grid, np.zeros(grid.mask().shape))
    assert residual(ke, data, 0.0, GLOB, zero) == 0.0


def test_prolong_copies_coarse_nodes(small):
    grid, ke = small
    rng = np.random.default_rng(2)
    u = np.where(grid.mask(), rng.random(grid.mask().shape), 0.0)
    fine = prolong(ConeField(grid, u), 0.0, zero_family())
    m, n = grid.index()
    sel = grid.mask() & (m != n) & (n != -m)
    fm, fn = 2 * m[sel], 2 * n[sel] + fine.grid.N_a
    assert np.array_equal(fine.u[fm, fn], u[sel])


def test_pointwise_bound(small):
    grid, ke = small
    out = picard_solve(ke, zero_family(), 1.0, GLOB, grid)
    assert check_pointwise_bound(out.field, GLOB)["C_hat"] == 0.0
    with pytest.raises(UsageError):
        check_pointwise_bound(out.field, ProblemParams(2.0, 0.0, 3.0))


def test_norm2(small):
    grid, _ = small
    z = ConeField(grid, np.zeros(grid.mask().shape))
    assert weighted_norm2(z, ProblemParams(2.0, 0.0, 1.5)) == 0.0
    with pytest.raises(UsageError):
        weighted_norm2(z, ProblemParams(2.0, 0.0, 0.5))


def test_existence_horizon_bracket():
    p = ProblemParams(2.0, 0.0, 3.0)
    grid = ConeGrid.make(400.0, 20.0, 210)
    ke = KernelEvaluator(model_profile(0.0), 430.0)
    lo, hi, best = existence_horizon(picard_solve, ke, blowup_family(3.0), 0.5, p, grid, 300)
    assert hi is not None and hi - lo <= 2 * grid.h + 1e-12
    assert best is not None and best.status == CONVERGED


def test_smallness_and_csv(tmp_path, small):
    grid, ke = small
    sm = smallness_eps0(ke, decay_family(3.0), GLOB, grid)
    assert sm["eps0"] > 0 and sm["C0"] > 0
    out = picard_solve(ke, decay_family(3.0), 1e-3, GLOB, grid)
    path = tmp_path / "f.csv"
    out.field.to_csv(path)
    head = path.read_text().splitlines()
    assert head[0] == "sigma,y,u"
    assert len(head) - 1 == int(grid.mask().sum())
