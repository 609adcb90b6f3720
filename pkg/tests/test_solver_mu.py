import numpy as np
import pytest

from nomaisac import solver_mu
from nomaisac.rates import BeamformingSolution, penalty, rank_one_ratio, scheme_rates
from nomaisac.sensing import matching_loss

SCHEMES = ("noma", "noma_senic", "ideal_senic", "no_senic", "com_only")


@pytest.fixture(scope="module")
def traces(ch4, spec4):
    out = {}
    for s in SCHEMES:
        cfg = solver_mu.MuSolveConfig(eps1=3e-3, q_streams=2, scheme=s)
        out[s] = solver_mu.solve(ch4, spec4, cfg)
    return out


@pytest.mark.parametrize("scheme", SCHEMES)
def test_final_point_is_feasible_and_rank_one(traces, spec4, scheme):
    tr = traces[scheme]
    sol = tr.solution
    assert tr.status in (solver_mu.CONVERGED, solver_mu.MAX_OUTER)
    assert solver_mu.is_feasible(sol, spec4, 3e-3)
    for W in sol.beams:
        if np.trace(W).real > 1e-12:
            assert rank_one_ratio(W) <= 1e-9
        assert np.linalg.eigvalsh(W)[0] >= -1e-12
    assert np.linalg.eigvalsh(sol.remaining)[0] >= -1e-12
    assert tr.loss == pytest.approx(matching_loss(sol.covariance(), spec4))
    assert tr.final_penalty <= 1e-4


@pytest.mark.parametrize("scheme", SCHEMES)
def test_objective_never_decreases(traces, scheme):
    for r in traces[scheme].records:
        assert r.objective >= r.objective_before - 1e-6


def test_layouts(traces):
    assert len(traces["noma"].solution.multicast) == 2
    assert traces["ideal_senic"].solution.multicast == []
    assert np.allclose(traces["com_only"].solution.remaining, 0)


def test_throughput_is_consistent(traces, ch4):
    for s, tr in traces.items():
        assert tr.throughput == pytest.approx(scheme_rates(tr.solution, ch4, s).throughput)
        assert tr.throughput > 0


def test_initialize_is_feasible(ch4, spec4):
    for eps in (1e-2, 1e-4, 0.0):
        cfg = solver_mu.MuSolveConfig(eps1=eps, scheme="noma")
        theta, w = solver_mu.initialize(ch4, spec4, cfg)
        assert solver_mu.is_feasible(theta, spec4, eps)


def test_extract_rank_one_keeps_covariance(rng):
    n = 3
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    W = G @ G.conj().T / 10
    sol = BeamformingSolution([W], [W / 2], np.eye(n) / 10)
    out = solver_mu.extract_rank_one(sol, "noma")
    assert np.allclose(out.covariance(), sol.covariance())
    assert penalty(out.beams) == pytest.approx(0.0, abs=1e-12)
    c = solver_mu.extract_rank_one(sol, "com_only")
    assert np.trace(c.unicast[0]).real == pytest.approx(np.trace(W).real)


def test_huge_eps_makes_cap_inactive(ch4, spec4):
    tr = solver_mu.solve(ch4, spec4, solver_mu.MuSolveConfig(eps1=1.0, scheme="ideal_senic"))
    assert tr.loss < 1.0


def test_zero_cap_is_still_solvable(ch4, spec4):
    # the reference covariance already has zero loss, so only a negative cap is infeasible
    tr = solver_mu.solve(ch4, spec4, solver_mu.MuSolveConfig(eps1=0.0, scheme="noma"))
    assert tr.status in (solver_mu.CONVERGED, solver_mu.MAX_OUTER)
    assert tr.loss <= 1e-12


def test_config_validation():
    with pytest.raises(ValueError):
        solver_mu.MuSolveConfig(eps1=1e-3, scheme="bogus")
    with pytest.raises(ValueError):
        solver_mu.MuSolveConfig(eps1=1e-3, rho=1.5)
    with pytest.raises(ValueError):
        solver_mu.MuSolveConfig(eps1=-1.0)
    with pytest.raises(ValueError):
        solver_mu.solve_benchmark(None, None, solver_mu.MuSolveConfig(eps1=1e-3, scheme="noma"))


def test_convergence_rows(traces):
    rows = solver_mu.convergence_rows(traces["noma"])
    assert rows and all(len(r) == 4 for r in rows)
