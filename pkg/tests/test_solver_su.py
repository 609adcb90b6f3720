import math

import numpy as np
import pytest

from nomaisac import conic, solver_su
from nomaisac.sensing import matching_loss


@pytest.fixture(scope="module")
def sweep(ch_su, spec_su):
    grid = solver_su.default_eps2_grid(ch_su, spec_su.pt, points=6)
    return solver_su.sweep_single_user(ch_su, spec_su, grid)


def test_zero_rate_gives_zero_loss(sweep):
    for s in solver_su.SU_SCHEMES:
        assert sweep.results[s][0].ok
        assert sweep.results[s][0].loss <= 1e-12


def test_loss_non_decreasing_in_rate(sweep):
    for s in solver_su.SU_SCHEMES:
        L = sweep.losses(s)
        assert np.all(np.diff(L) >= -1e-9 * max(L.max(), 1e-12)), s


def test_three_programs_agree(sweep):
    L = np.array([sweep.losses(s) for s in solver_su.SU_SCHEMES])
    gap = (L.max(axis=0) - L.min(axis=0)) / np.maximum(L.max(axis=0), 1e-10)
    assert gap.max() <= 1e-3


def test_cancelling_sensing_never_hurts(sweep):
    # p = 0 has the larger feasible set
    L0, L1 = sweep.losses("ideal_senic"), sweep.losses("no_senic")
    assert np.all(L1 >= L0 - 1e-3 * np.maximum(L1, 1e-10))


def test_solutions_are_feasible(sweep, ch_su, spec_su):
    h = ch_su.channels[0]
    for s in solver_su.SU_SCHEMES:
        for e, r in zip(sweep.eps2, sweep.results[s]):
            assert np.trace(r.covariance).real == pytest.approx(spec_su.pt, rel=1e-6)
            assert np.linalg.eigvalsh(r.covariance)[0] >= -1e-9
            assert r.rate >= e - 1e-6
            assert r.loss == pytest.approx(matching_loss(r.covariance, spec_su), rel=1e-12)
    w = sweep.results["ideal_senic"][-1].beam()
    assert abs(np.vdot(h, w)) ** 2 > 0


def test_shared_program_matches_joint(ch_su, spec_su):
    e = 0.6 * solver_su.max_rate(ch_su, spec_su.pt)
    a = solver_su.solve_p41(ch_su, spec_su, e)
    b = solver_su.solve_p71(ch_su, spec_su, e)
    assert a.ok and b.ok
    assert b.loss == pytest.approx(a.loss, rel=1e-3)


def test_max_rate_edge_and_beyond(ch_su, spec_su):
    rmax = solver_su.max_rate(ch_su, spec_su.pt)
    h = ch_su.channels[0]
    r = solver_su.solve_p41(ch_su, spec_su, rmax)
    assert r.ok
    assert np.allclose(r.covariance, spec_su.pt * np.outer(h, h.conj()) / np.vdot(h, h).real)
    for fn in (solver_su.solve_p41, solver_su.solve_p71):
        assert fn(ch_su, spec_su, rmax * 1.01).status == conic.INFEASIBLE
    assert solver_su.solve_p61(ch_su, spec_su, rmax * 1.01, p=1).status == conic.INFEASIBLE


def test_bad_inputs(ch_su, ch4, spec_su):
    with pytest.raises(ValueError):
        solver_su.solve_p41(ch_su, spec_su, -1.0)
    with pytest.raises(ValueError):
        solver_su.solve_p61(ch_su, spec_su, 1.0, p=2)
    with pytest.raises(ValueError):
        solver_su.solve_p41(ch4, spec_su, 1.0)
    with pytest.raises(ValueError):
        solver_su.sweep_single_user(ch_su, spec_su, [2.0, 1.0])


def test_grid_spans_feasible_range(ch_su, spec_su):
    g = solver_su.default_eps2_grid(ch_su, spec_su.pt, points=8, top=0.98)
    assert g[0] == 0.0 and len(g) == 8
    assert g[-1] == pytest.approx(0.98 * math.log2(1 + spec_su.pt * np.vdot(ch_su.channels[0], ch_su.channels[0]).real))
