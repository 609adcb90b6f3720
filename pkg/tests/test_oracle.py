import ast
import math
from pathlib import Path

import numpy as np
import pytest

import nomaisac.oracle as oracle
from nomaisac import solver_su
from nomaisac.scenario import SystemConfig, sample_channels
from nomaisac.sensing import matching_loss, spec_from_config


@pytest.fixture(scope="module")
def n2():
    cfg = SystemConfig(n_antennas=2, n_users=1)
    spec = spec_from_config(cfg)
    ch = sample_channels(cfg)
    r0 = oracle.zero_loss_max_rate(ch, spec)
    rmax = solver_su.max_rate(ch, spec.pt)
    return ch, spec, r0, rmax


def test_oracle_shares_no_code_with_solvers():
    tree = ast.parse(Path(oracle.__file__).read_text())
    mods = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.ImportFrom):
            mods.add(node.module or "")
            mods.update(a.name for a in node.names)
        elif isinstance(node, ast.Import):
            mods.update(a.name for a in node.names)
    assert not mods & {"conic", "fp_core", "solver_su", "solver_mu", "sensing", "nomaisac.conic"}


def test_covariance_family_is_trace_pt_psd():
    rng = np.random.default_rng(0)
    B = oracle.channel_basis(rng.standard_normal(2) + 1j * rng.standard_normal(2))
    assert np.allclose(B.conj().T @ B, np.eye(2))
    for _ in range(20):
        chi, phi, psi = rng.uniform(0, 2 * math.pi, 3)
        R = oracle.covariance_from_angles(chi, phi, psi, 0.1, B)
        assert np.trace(R).real == pytest.approx(0.1)
        assert np.linalg.eigvalsh(R)[0] >= -1e-15
        assert np.allclose(R, R.conj().T)


def test_axes_nest_under_doubling():
    for a, b in zip(oracle.oracle_axes(25), oracle.oracle_axes(50)):
        assert np.allclose(a, b[::2])


def test_oracle_is_an_upper_bound_and_refines(n2):
    ch, spec, r0, rmax = n2
    e = r0 + 0.5 * (rmax - r0)
    qsdp = solver_su.solve_p41(ch, spec, e).loss
    prev = math.inf
    for res in (25, 50, 100):
        o = oracle.grid_search_single_user(ch, spec, e, resolution=res)
        assert o.loss >= qsdp * (1 - 1e-6)
        assert o.loss <= prev
        prev = o.loss
        # the reported point is feasible and has the reported loss
        h = ch.channels[0]
        assert np.real(h.conj() @ o.covariance @ h) >= 2 ** e - 1 - 1e-9
        assert matching_loss(o.covariance, spec) == pytest.approx(o.loss, rel=1e-9, abs=1e-18)


def test_boundary_candidates_only_help(n2):
    ch, spec, r0, rmax = n2
    e = r0 + 0.25 * (rmax - r0)
    a = oracle.grid_search_single_user(ch, spec, e, resolution=40, boundary=False)
    b = oracle.grid_search_single_user(ch, spec, e, resolution=40, boundary=True)
    assert b.loss <= a.loss


def test_zero_rate_and_zero_loss_range(n2):
    ch, spec, r0, rmax = n2
    assert 0 < r0 < rmax
    assert oracle.grid_search_single_user(ch, spec, 0.0, resolution=60).loss >= 0
    assert solver_su.solve_p41(ch, spec, 0.999 * r0).loss <= 1e-12
    assert solver_su.solve_p41(ch, spec, r0 + 0.1 * (rmax - r0)).loss > 1e-10


def test_no_feasible_point_above_max_rate(n2):
    ch, spec, r0, rmax = n2
    assert oracle.grid_search_single_user(ch, spec, rmax + 0.5, resolution=20).loss == math.inf


def test_oracle_rejects_wrong_sizes(ch4, spec4):
    with pytest.raises(ValueError):
        oracle.grid_search_single_user(ch4, spec4, 1.0)
    with pytest.raises(ValueError):
        oracle.zero_loss_max_rate(ch4, spec4)


def test_boundary_chi_hits_the_boundary():
    psi = np.linspace(0, 1.5, 31)
    t = 0.7
    chi = oracle.boundary_chi(psi, t)
    ok = np.isfinite(chi)
    g = np.cos(psi[ok]) ** 2 * np.cos(chi[ok]) ** 2 + np.sin(psi[ok]) ** 2 * np.sin(chi[ok]) ** 2
    assert ok.any()
    assert np.allclose(g, t)


def test_transform_tightness_small_run_and_zero():
    rep = oracle.transform_tightness(trials=50, seed=3)
    assert rep.lagrangian_gap <= 1e-9 and rep.quadratic_gap <= 1e-9
    z = oracle.transform_tightness(trials=10, seed=3, zero=True)
    assert z.lagrangian_gap == 0.0 and z.quadratic_gap == 0.0


def test_naive_f1_below_f0_off_optimum():
    rng = np.random.default_rng(5)
    ch, sol = oracle.random_instance(rng)
    a = oracle.optimal_alpha(sol, ch)
    assert oracle.naive_f1(a + 0.1, sol, ch) < oracle.naive_f0(sol, ch)
