import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from nomaisac import conic


def _herm(rng, n):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return A + A.conj().T


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_param_round_trip_and_inner_products(n, seed):
    rng = np.random.default_rng(seed)
    X, C = _herm(rng, n), _herm(rng, n)
    p = conic.matrix_to_params(X)
    assert np.allclose(conic.params_to_matrix(p, n), X)
    assert conic.hermitian_coefficients(C) @ p == pytest.approx(np.trace(C @ X).real, abs=1e-9)
    a = rng.standard_normal((3, n)) + 1j * rng.standard_normal((3, n))
    want = np.einsum("ln,nm,lm->l", a.conj(), X, a).real
    assert np.allclose(conic.quadratic_coefficients(a) @ p, want)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_psd_embedding_matches_real_block_form(n, seed):
    rng = np.random.default_rng(seed)
    X = _herm(rng, n)
    v = conic._psd_embedding(n) @ conic.matrix_to_params(X)
    A, B = X.real, X.imag
    M = np.block([[A, -B], [B, A]])
    d = 2 * n
    want = [M[r, c] * (1.0 if r == c else math.sqrt(2)) for c in range(d) for r in range(c + 1)]
    assert np.allclose(v, want)


def test_non_hermitian_coefficients_rejected():
    with pytest.raises(ValueError):
        conic.hermitian_coefficients(np.array([[0, 1j], [0, 0]]))


@given(arrays(float, 4, elements=st.floats(-5, 5)), arrays(float, 4, elements=st.floats(-5, 5)))
def test_expr_arithmetic(a, b):
    x = np.arange(1.0, 5.0)
    prog = conic.ConicProgram()
    v = prog.vector("v", 4)
    e = 2.0 * v - a + b / 2
    assert np.allclose(e.value(x), 2 * x - a + b / 2)
    assert np.allclose((v - v).value(x), 0)


def test_lp_and_status():
    prog = conic.ConicProgram()
    x = prog.scalar("x")
    y = prog.scalar("y")
    prog.add_nonneg(x)
    prog.add_nonneg(y)
    prog.add_nonneg(1 - x - y)
    prog.maximize(2 * x + y)
    res = conic.solve(prog)
    assert res.ok
    assert res.objective == pytest.approx(2.0, abs=1e-7)
    assert res["x"] == pytest.approx(1.0, abs=1e-7)


def test_infeasible_is_a_status_not_an_exception():
    prog = conic.ConicProgram()
    x = prog.scalar("x")
    prog.add_nonneg(x - 1)
    prog.add_nonneg(-x)
    prog.minimize(x)
    res = conic.solve(prog)
    assert res.status == conic.INFEASIBLE
    assert not res.ok


def test_soc_and_log_hypograph():
    prog = conic.ConicProgram()
    t = prog.scalar("t")
    u = prog.scalar("u")
    prog.add_soc(conic.Expr.constant(2.0), conic.vstack([u, conic.Expr.constant(0.0)]))
    prog.add_log_hypograph(t, u)
    prog.maximize(t)
    res = conic.solve(prog)
    assert res.ok
    assert res["t"] == pytest.approx(math.log(2.0), abs=1e-6)


def test_hermitian_psd_min_eigenvalue():
    # min <C, X> over tr X = 1, X >= 0 is the smallest eigenvalue of C
    rng = np.random.default_rng(7)
    C = _herm(rng, 3)
    prog = conic.ConicProgram()
    X = prog.hermitian("X", 3)
    prog.add_eq(X.trace() - 1)
    prog.minimize(X.inner(C))
    res = conic.solve(prog)
    assert res.ok
    assert res.objective == pytest.approx(np.linalg.eigvalsh(C)[0], abs=1e-6)
    assert np.linalg.eigvalsh(res["X"])[0] > -1e-7


def test_sum_squares_objective_projects():
    # min ||x - c||^2 over x >= 0 is the positive part of c
    c = np.array([1.5, -2.0, 0.25])
    prog = conic.ConicProgram()
    x = prog.vector("x", 3)
    prog.add_nonneg(x)
    prog.minimize_sum_squares(x - c)
    res = conic.solve(prog)
    assert res.ok
    assert np.allclose(res["x"], np.maximum(c, 0), atol=1e-6)
    assert res.objective == pytest.approx(4.0, abs=1e-6)


def test_quadratic_epigraph_constant_and_negative_bound():
    prog = conic.ConicProgram()
    x = prog.vector("x", 2)
    conic.hermitian_quadratic_epigraph(prog, x - np.array([3.0, 4.0]), 1.0)
    offset = x.terms[0][1]
    prog.minimize(conic.Expr([(0, offset, np.ones((1, 2)))], 0.0))  # x0 + x1
    res = conic.solve(prog)
    assert res.ok
    assert res.objective == pytest.approx(7 - math.sqrt(2), abs=1e-6)

    bad = conic.ConicProgram()
    y = bad.scalar("y")
    conic.hermitian_quadratic_epigraph(bad, y, -1.0)
    bad.minimize(y)
    assert conic.solve(bad).status == conic.INFEASIBLE


def test_dump_lists_blocks():
    prog = conic.ConicProgram()
    prog.hermitian("R", 2)
    s = prog.dump()
    assert "hermitian R" in s and "psd" in s
