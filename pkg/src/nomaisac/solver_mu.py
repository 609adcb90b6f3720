"""Double-layer FP-SCA block coordinate descent for the multi-user trade-off.

The inner layer cycles the closed-form ``alpha``/``beta`` updates and one
convex subproblem; the outer layer shrinks the penalty parameter ``zeta``
until the beam matrices are numerically rank one.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import conic
from .fp_core import FpState, build_subproblem, has_multicast, update_alpha, update_beta
from .rates import (SCHEMES, BeamformingSolution, RateReport, eig_decompose_sensing, penalty,
                    principal_component, scheme_rates)
from .scenario import ChannelSet
from .sensing import BeampatternSpec, matching_loss

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_OUTER = "iteration-limit"
INFEASIBLE_START = "infeasible"


@dataclass
class MuSolveConfig:
    eps1: float
    q_streams: int = 1
    zeta0: float = 1e2
    rho: float = 0.2
    tau1: float = 1e-2
    tau2: float = 1e-4
    max_inner: int = 50
    max_outer: int = 12
    scheme: str = "noma"
    tol: float = conic.DEFAULT_TOL

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.zeta0 > 0:
            raise ValueError("zeta0 must be positive")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if not (self.tau1 > 0 and self.tau2 > 0):
            raise ValueError("thresholds must be positive")
        if self.max_inner < 1 or self.max_outer < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.eps1 < 0:
            raise ValueError("eps1 must be non-negative")

    @property
    def effective_q(self) -> int:
        return self.q_streams if has_multicast(self.scheme) else 0


@dataclass
class IterRecord:
    outer: int
    inner: int
    throughput: float
    penalty: float
    f2: float
    objective_before: float
    objective: float
    zeta: float
    status: str
    wall_ms: float


@dataclass
class SolveTrace:
    scheme: str
    status: str
    records: list[IterRecord] = field(default_factory=list)
    solution: BeamformingSolution | None = None
    report: RateReport | None = None
    loss: float = math.nan
    final_penalty: float = math.nan
    iterate: BeamformingSolution | None = None
    start_weight: float = math.nan

    @property
    def throughput(self) -> float:
        return self.report.throughput if self.report is not None else math.nan

    @property
    def iterations(self) -> int:
        return len(self.records)

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(asdict(r)) for r in self.records)


# --------------------------------------------------------------- start points

def sensing_endpoint(spec: BeampatternSpec, n_users: int, scheme: str, q_streams: int) -> BeamformingSolution:
    """Zero-loss split of the reference covariance (all power on sensing)."""
    R = spec.reference_cov
    n = R.shape[0]
    zero = np.zeros((n, n), dtype=complex)
    if scheme == "com_only":
        # the best the unicast beams alone can do is the top-K eigenbeams
        beams, _ = eig_decompose_sensing(R, n_users)
        total = sum(np.trace(b).real for b in beams)
        beams = [b * (spec.pt / total) for b in beams]
        return BeamformingSolution(beams, [], zero)
    if has_multicast(scheme):
        beams, rest = eig_decompose_sensing(R, q_streams)
        return BeamformingSolution([zero.copy() for _ in range(n_users)], beams, rest)
    return BeamformingSolution([zero.copy() for _ in range(n_users)], [], R.copy())


def comm_endpoint(ch: ChannelSet, spec: BeampatternSpec, scheme: str, q_streams: int) -> BeamformingSolution:
    """Matched-filter unicast beams with half the power, reference-shaped sensing with the rest."""
    h = ch.channels
    K, n = h.shape
    pt = spec.pt
    share = 0.5 if scheme != "com_only" else 1.0
    W = [share * pt / K * np.outer(hk, hk.conj()) / np.vdot(hk, hk).real for hk in h]
    sens = (1 - share) * spec.reference_cov
    if scheme == "com_only":
        return BeamformingSolution(W, [], np.zeros((n, n), dtype=complex))
    if has_multicast(scheme):
        beams, rest = eig_decompose_sensing(sens, q_streams)
        return BeamformingSolution(W, beams, rest)
    return BeamformingSolution(W, [], sens)


def blend(a: BeamformingSolution, b: BeamformingSolution, t: float) -> BeamformingSolution:
    mix = lambda x, y: (1 - t) * x + t * y  # noqa: E731
    return BeamformingSolution([mix(x, y) for x, y in zip(a.unicast, b.unicast)],
                               [mix(x, y) for x, y in zip(a.multicast, b.multicast)],
                               mix(a.remaining, b.remaining))


def conform(sol: BeamformingSolution, scheme: str, q_streams: int) -> BeamformingSolution:
    """Recast a solution of any scheme into the variable layout of ``scheme``.

    Sensing power keeps its covariance; for multicast schemes it is re-split
    into eigenbeams when the stream count differs.
    """
    n = sol.n_antennas
    zero = np.zeros((n, n), dtype=complex)
    U = [W.copy() for W in sol.unicast]
    if scheme == "com_only":
        return BeamformingSolution(U, [], zero)
    if has_multicast(scheme):
        if len(sol.multicast) == q_streams:
            return BeamformingSolution(U, [W.copy() for W in sol.multicast], sol.remaining.copy())
        beams, rest = eig_decompose_sensing(sol.sensing_covariance(), q_streams)
        return BeamformingSolution(U, beams, rest)
    return BeamformingSolution(U, [], sol.sensing_covariance())


def initialize(ch: ChannelSet, spec: BeampatternSpec, cfg: MuSolveConfig,
               start: BeamformingSolution | None = None) -> tuple[BeamformingSolution, float]:
    """Feasible starting point: the comm-leaning candidate (or ``start``) pulled
    toward the zero-loss sensing split by bisection on the blend weight.

    Returns the point and the blend weight used (0 means the candidate as is).
    """
    q = cfg.effective_q
    cand = comm_endpoint(ch, spec, cfg.scheme, q) if start is None else conform(start, cfg.scheme, q)
    cand = cand.scaled(spec.pt / cand.total_power())
    target = sensing_endpoint(spec, ch.n_users, cfg.scheme, q)
    cap = cfg.eps1
    if matching_loss(cand.covariance(), spec) <= cap:
        return cand, 0.0
    if matching_loss(target.covariance(), spec) > cap:
        return target, math.nan
    lo, hi = 0.0, 1.0
    # the loss is convex along the segment and zero (or minimal) at t = 1
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if matching_loss(blend(cand, target, mid).covariance(), spec) <= cap:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-9:
            break
    return blend(cand, target, hi), hi


# ------------------------------------------------------------------ extraction

def extract_rank_one(sol: BeamformingSolution, scheme: str) -> BeamformingSolution:
    """Principal-eigenpair beams.

    The discarded part of every beam matrix is moved into the sensing
    remainder, which leaves the transmit covariance, the power and the
    matching loss unchanged.  Without a remainder (``com_only``) each beam
    keeps its trace instead.
    """
    out = sol.copy()
    spill = np.zeros_like(sol.remaining)
    def one(W):
        nonlocal spill
        lam, v = principal_component(W)
        lam = max(lam, 0.0)
        if scheme == "com_only":
            return float(np.trace(W).real) * np.outer(v, v.conj())
        W1 = lam * np.outer(v, v.conj())
        spill = spill + (W - W1)
        return W1
    out.unicast = [one(W) for W in sol.unicast]
    out.multicast = [one(W) for W in sol.multicast]
    out.remaining = sol.remaining + spill
    # clip round-off so every block is PSD
    lam, V = np.linalg.eigh(0.5 * (out.remaining + out.remaining.conj().T))
    out.remaining = (V * np.clip(lam, 0, None)) @ V.conj().T
    return out


def is_feasible(sol: BeamformingSolution, spec: BeampatternSpec, eps1: float, rel: float = 1e-6) -> bool:
    power_ok = abs(sol.total_power() - spec.pt) <= 1e-5 * spec.pt
    return power_ok and matching_loss(sol.covariance(), spec) <= eps1 * (1 + rel) + 1e-15


# ----------------------------------------------------------------------- driver

def penalized(theta, ch, scheme, zeta, Q) -> tuple[float, float, float]:
    """(throughput, penalty, throughput - penalty / zeta) at ``theta``."""
    R = scheme_rates(theta, ch, scheme).throughput
    pen = penalty(list(theta.unicast) + list(theta.multicast[:Q]))
    return R, pen, R - pen / zeta


def solve(ch: ChannelSet, spec: BeampatternSpec, cfg: MuSolveConfig,
          start: BeamformingSolution | None = None) -> SolveTrace:
    """Run the double-layer BCD for one ``eps1``.

    The returned solution is rank one, feasible, and the best such point seen
    (the extracted iterate at the end of each outer pass, or a rank-one start).
    """
    scheme = cfg.scheme
    Q = cfg.effective_q
    trace = SolveTrace(scheme, CONVERGED)
    theta, weight = initialize(ch, spec, cfg, start)
    trace.start_weight = weight
    if not is_feasible(theta, spec, cfg.eps1):
        trace.status = INFEASIBLE_START
        trace.solution = theta
        trace.report = scheme_rates(theta, ch, scheme)
        trace.loss = matching_loss(theta.covariance(), spec)
        return trace

    best: tuple[float, BeamformingSolution] | None = None

    def offer(sol: BeamformingSolution):
        nonlocal best
        if not is_feasible(sol, spec, cfg.eps1):
            return
        r = scheme_rates(sol, ch, scheme).throughput
        if best is None or r > best[0]:
            best = (r, sol)

    if penalty(theta.beams) <= 1e-9 * spec.pt:
        offer(extract_rank_one(theta, scheme))

    state = FpState(theta, scheme, zeta=cfg.zeta0,
                    multicast_aux=np.zeros(Q))
    R_prev, pen, _ = penalized(theta, ch, scheme, state.zeta, Q)
    failed = None
    for outer in range(cfg.max_outer):
        state.outer = outer
        for inner in range(cfg.max_inner):
            state.inner = inner
            t0 = time.perf_counter()
            before = penalized(state.theta, ch, scheme, state.zeta, Q)[2]
            state.alpha = update_alpha(state.theta, ch, scheme)
            state.beta = update_beta(state.theta, ch, state.alpha, scheme)
            sub = build_subproblem(state, ch, spec, cfg.eps1, spec.pt)
            res = conic.solve(sub.prog, cfg.tol)
            if not res.ok:
                # one retry with a looser tolerance before giving up
                res = conic.solve(sub.prog, max(cfg.tol * 1e2, 1e-6))
            if not res.ok:
                failed = res.status
                trace.records.append(IterRecord(outer, inner, R_prev, pen, math.nan, before, math.nan,
                                                state.zeta, res.status, 1e3 * (time.perf_counter() - t0)))
                break
            theta, aux = sub.read(res)
            R, pen, obj = penalized(theta, ch, scheme, state.zeta, Q)
            if obj < before:
                # exact block updates cannot decrease the penalized objective, so
                # a drop is subproblem inexactness; keep the current iterate
                R, pen, obj = penalized(state.theta, ch, scheme, state.zeta, Q)
            else:
                state.theta, state.multicast_aux = theta, aux
            trace.records.append(IterRecord(outer, inner, R, pen, res.objective, before, obj, state.zeta,
                                            res.status, 1e3 * (time.perf_counter() - t0)))
            done = abs(R - R_prev) <= cfg.tau1
            R_prev = R
            if done:
                break
        if failed:
            break
        offer(extract_rank_one(state.theta, scheme))
        if pen <= cfg.tau2:
            break
        state.zeta *= cfg.rho
    else:
        trace.status = MAX_OUTER

    if failed:
        trace.status = failed
    trace.iterate = state.theta
    trace.final_penalty = penalty(list(state.theta.unicast) + list(state.theta.multicast[:Q]))
    final = best[1] if best is not None else extract_rank_one(state.theta, scheme)
    trace.solution = final
    trace.report = scheme_rates(final, ch, scheme)
    trace.loss = matching_loss(final.covariance(), spec)
    return trace


def solve_benchmark(ch: ChannelSet, spec: BeampatternSpec, cfg: MuSolveConfig,
                    start: BeamformingSolution | None = None) -> SolveTrace:
    if cfg.scheme == "noma":
        raise ValueError("solve_benchmark is for the benchmark schemes; use solve() for noma")
    return solve(ch, spec, cfg, start)


def convergence_rows(trace: SolveTrace):
    """(outer, inner, throughput, penalty) rows for the convergence CSV."""
    return [(r.outer, r.inner, r.throughput, r.penalty) for r in trace.records]
