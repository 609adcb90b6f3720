"""Acceptance run: one test per criterion, each printing a PASS/FAIL line.

Tolerances are pinned below.  The lines are also collected in ``RESULTS``
and repeated in the terminal summary by ``conftest.py``.
"""
import math
import os
import time

import numpy as np
import pytest

from nomaisac import cli, harness, oracle
from nomaisac.fp_core import log_term, log_term_surrogate, spectral_surrogate
from nomaisac.rates import BeamformingSolution, rank_one_ratio, telescoping_identity_check
from nomaisac.scenario import ChannelSet, SystemConfig, make_angle_grid
from nomaisac.sensing import beampattern, solve_reference_covariance, spec_from_config

# pinned tolerances
SU_LOSS_RTOL = 1e-3
SU_LOSS_FLOOR = 1e-10
SU_SECONDS = 60.0
ORDER_TOL_IDEAL = 1e-2
ORDER_TOL_NONE = 2e-2
ORDER_SECONDS = 600.0
Q_SPREAD = 0.05
MONOTONE_TOL = 1e-6
TAU2 = 1e-4
RANK_ONE_TOL = 1e-3
TIGHTNESS_TOL = 1e-9
TELESCOPE_RTOL = 1e-9
SURROGATE_SLACK = -1e-10
ORACLE_RTOL = 1e-2
ORACLE_RES = 200
ORACLE_SECONDS = 300.0
UNIFORM_LOSS = 1e-8
UNIFORM_FLAT = 1e-6

RESULTS = []


def report(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _workers():
    return max(1, min(4, os.cpu_count() or 1))


@pytest.fixture(scope="module")
def ordering_run():
    cfg = SystemConfig(n_antennas=4, n_users=2, q_streams=4)
    t0 = time.perf_counter()
    curve = harness.run_tradeoff(cfg, ("noma", "ideal_senic", "no_senic"), harness.DEFAULT_EPS,
                                 n_realizations=10, keep_traces=True, workers=_workers())
    return curve, time.perf_counter() - t0


def test_criterion_01_single_user_equivalence():
    t0 = time.perf_counter()
    run = harness.run_single_user(SystemConfig(n_antennas=8, n_users=1), points=8, top=0.98,
                                  loss_floor=SU_LOSS_FLOOR)
    dt = time.perf_counter() - t0
    ok = run.max_loss_gap <= SU_LOSS_RTOL and dt <= SU_SECONDS and not run.curve.failures()
    report(1, ok, f"max relative loss gap {run.max_loss_gap:.3e} (tol {SU_LOSS_RTOL:g}), {dt:.1f} s")


def test_criterion_02_multi_user_ordering(ordering_run):
    curve, dt = ordering_run
    worst = math.inf
    for e in curve.eps_values():
        for s in range(10):
            a, b, c = (curve.get(x, e, s).throughput for x in ("noma", "ideal_senic", "no_senic"))
            worst = min(worst, a - (b - ORDER_TOL_IDEAL), (b - ORDER_TOL_IDEAL) - (c - ORDER_TOL_NONE))
    ok = worst >= 0 and dt <= ORDER_SECONDS and not curve.failures()
    report(2, ok, f"worst ordering margin {worst:.3e} bit/s/Hz over {len(curve.records)} records, {dt:.1f} s")


def test_criterion_03_q_flatness():
    cfg = SystemConfig(n_antennas=4, n_users=2)
    res = harness.run_q_sweep(cfg, (1, 2, 3, 4), 1e-3, 10, workers=_workers())
    spread = res.relative_spread()
    means = ", ".join(f"Q={m[0]}: {m[1]:.4f}" for m in res.means())
    report(3, spread <= Q_SPREAD, f"relative spread {spread:.3e} (tol {Q_SPREAD:g}); {means}")


def test_criterion_04_convergence(ordering_run):
    curve, _ = ordering_run
    drop = pen = r1 = 0.0
    for tr in curve.traces.values():
        for r in tr.records:
            if math.isfinite(r.objective):
                drop = max(drop, r.objective_before - r.objective)
        pen = max(pen, tr.final_penalty)
        for W in tr.solution.beams:
            if np.trace(W).real > 0:
                r1 = max(r1, rank_one_ratio(W))
    ok = drop <= MONOTONE_TOL and pen <= TAU2 and r1 <= RANK_ONE_TOL
    report(4, ok, f"largest objective drop {drop:.3e}, final penalty {pen:.3e}, rank-one ratio {r1:.3e} "
                  f"over {len(curve.traces)} solves")


def test_criterion_05_transform_tightness():
    rep = oracle.transform_tightness(trials=1000, seed=2023)
    ok = rep.lagrangian_gap <= TIGHTNESS_TOL and rep.quadratic_gap <= TIGHTNESS_TOL
    report(5, ok, f"|f1-f0| {rep.lagrangian_gap:.3e}, |h-g| {rep.quadratic_gap:.3e} over {rep.trials} trials")


def test_criterion_06_telescoping():
    rng = np.random.default_rng(45)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        q = int(rng.integers(0, n + 1))
        h = math.sqrt(500) * (rng.standard_normal((1, n)) + 1j * rng.standard_normal((1, n)))
        w = rng.dirichlet(np.ones(q + 2)) * 0.1
        sol = BeamformingSolution([oracle.random_psd(rng, n, w[0], rank=1)],
                                  [oracle.random_psd(rng, n, w[1 + i], rank=1) for i in range(q)],
                                  oracle.random_psd(rng, n, w[-1]))
        lhs, rhs = telescoping_identity_check(sol, ChannelSet(h, 1.0))
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    report(6, worst <= TELESCOPE_RTOL, f"max relative deviation {worst:.3e} over 1000 instances")


def test_criterion_07_surrogate_bounds():
    rng = np.random.default_rng(7)
    slack_t = slack_w = math.inf
    for _ in range(100):
        n = int(rng.integers(1, 9))
        h = math.sqrt(500) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        A, A0 = oracle.random_psd(rng, n, 0.1), oracle.random_psd(rng, n, 0.1)
        slack_t = min(slack_t, log_term(A, h) - log_term_surrogate(A, A0, h))
        W, W0 = oracle.random_psd(rng, n, 0.1), oracle.random_psd(rng, n, 0.1)
        slack_w = min(slack_w, spectral_surrogate(W, W0) + np.linalg.eigvalsh(W)[-1])
    ok = slack_t >= SURROGATE_SLACK and slack_w >= SURROGATE_SLACK
    report(7, ok, f"min slack t - t~ {slack_t:.3e}, W~ + ||W||2 {slack_w:.3e} over 100 pairs each")


def test_criterion_08_oracle():
    t0 = time.perf_counter()
    rows = harness.run_oracle_check(SystemConfig(), resolution=ORACLE_RES)
    dt = time.perf_counter() - t0
    gaps = [r[3] for r in rows]
    ok = all(r[4] == "optimal" for r in rows) and max(gaps) <= ORACLE_RTOL and dt <= ORACLE_SECONDS
    report(8, ok, "relative gaps " + ", ".join(f"{g:.3e}" for g in gaps) + f" at {ORACLE_RES}/axis, {dt:.1f} s")


def test_criterion_09_sensing_only():
    cfg = SystemConfig()
    pt = cfg.pt_watts
    grid = make_angle_grid(cfg.n_antennas, cfg.grid_step_rad)
    R, _, loss = solve_reference_covariance(grid, np.ones(grid.size), pt)
    flat = float(np.ptp(beampattern(R, grid.steering)))
    spec = spec_from_config(cfg)
    deg = spec.grid.angles_deg
    # a lobe is the part of the grid closer to its target than to any other
    targets = np.array(cfg.targets_deg)
    owner = np.argmin(np.abs(deg[:, None] - targets[None, :]), axis=1)
    peaks = []
    for i, t in enumerate(targets):
        sel = owner == i
        peaks.append(float(deg[sel][np.argmax(spec.reference_pattern[sel])]))
    inside = all(abs(p - t) <= cfg.beam_width_deg / 2 + 1e-9 for p, t in zip(peaks, targets))
    ok = loss <= UNIFORM_LOSS and flat <= UNIFORM_FLAT * pt and inside
    report(9, ok, f"uniform loss {loss:.3e}, ripple {flat / pt:.3e} x Pt, lobe peaks at "
                  + ", ".join(f"{p:.1f}" for p in peaks) + " deg")


def test_criterion_10_determinism(tmp_path):
    commands = [
        ("tradeoff", "--realizations", "2", "--eps", "1e-2,1e-3", "--q", "2"),
        ("beampattern", "--eps", "1e-3"),
        ("q-sweep", "--q-values", "1,2", "--realizations", "2"),
        ("single-user", "--points", "4"),
        ("convergence", "--eps", "1e-3"),
        ("oracle-check", "--resolution", "50"),
    ]
    base = ("--profile", "ci", "--seed", "99")
    mismatched, compared = [], 0
    for k, cmd in enumerate(commands):
        outs = []
        for rep in range(2):
            out = tmp_path / f"{k}_{rep}"
            cli.main([*cmd, *base, "--out", str(out)])
            outs.append(out)
        for f in sorted(p.name for p in outs[0].iterdir()):
            compared += 1
            if (outs[0] / f).read_bytes() != (outs[1] / f).read_bytes():
                mismatched.append(f"{cmd[0]}/{f}")
    report(10, not mismatched, f"{compared} files compared across {len(commands)} commands"
                               + (f", differing: {mismatched}" if mismatched else ", all byte-identical"))
