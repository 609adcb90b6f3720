"""Experiment orchestration: epsilon sweeps, Monte Carlo averaging and CSV emission.

Every run is a pure function of (config, master seed, arguments); the CSV
writers format floats with a fixed precision so repeated runs are
byte-identical.  Wall time is only written when explicitly requested.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import conic, oracle, solver_mu, solver_su
from .rates import SCHEMES, BeamformingSolution, scheme_rates
from .scenario import SystemConfig, sample_channels
from .sensing import beampattern, spec_from_config

log = logging.getLogger(__name__)

# order in which schemes are solved, so each one can start from the schemes it dominates
CHAIN = ("com_only", "no_senic", "ideal_senic", "noma_senic", "noma")
DOMINATES = {
    "ideal_senic": ("no_senic",),
    "noma_senic": ("ideal_senic",),
    "noma": ("noma_senic", "ideal_senic"),
}
FAILURE_STATUSES = frozenset({conic.NUMERICAL_FAILURE, "error"})
OK_STATUSES = frozenset({solver_mu.CONVERGED, solver_mu.MAX_OUTER, conic.OPTIMAL})

PROFILES = {
    "ci": dict(n_antennas=4, n_users=2, q_streams=1),
    "full": dict(n_antennas=8, n_users=5, q_streams=1),
}
PROFILE_REALIZATIONS = {"ci": 10, "full": 50}
DEFAULT_EPS = (1e-2, 3e-3, 1e-3, 3e-4)


def fmt(x) -> str:
    """Deterministic CSV cell."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return "nan"
        return f"{float(x):.12g}"
    return str(x)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


@dataclass(frozen=True)
class SolverSettings:
    zeta0: float = 1e2
    rho: float = 0.2
    tau1: float = 1e-2
    tau2: float = 1e-4
    max_inner: int = 50
    max_outer: int = 12
    tol: float = conic.DEFAULT_TOL

    def config(self, eps1: float, scheme: str, q_streams: int) -> solver_mu.MuSolveConfig:
        return solver_mu.MuSolveConfig(eps1=eps1, q_streams=q_streams, scheme=scheme, zeta0=self.zeta0,
                                       rho=self.rho, tau1=self.tau1, tau2=self.tau2,
                                       max_inner=self.max_inner, max_outer=self.max_outer, tol=self.tol)


# ----------------------------------------------------------------- records

@dataclass
class TradeoffRecord:
    scheme: str
    eps: float
    seed: int
    throughput: float
    loss: float
    status: str
    iters: int
    ms: float

    @property
    def ok(self) -> bool:
        return self.status in OK_STATUSES


@dataclass
class TradeoffCurve:
    records: list[TradeoffRecord] = field(default_factory=list)
    traces: dict = field(default_factory=dict, repr=False)  # (scheme, eps, seed) -> SolveTrace

    HEADER = ("scheme", "eps", "seed", "throughput", "loss", "status", "iters", "ms")

    def failures(self) -> list[TradeoffRecord]:
        return [r for r in self.records if r.status in FAILURE_STATUSES]

    def schemes(self) -> list[str]:
        return list(dict.fromkeys(r.scheme for r in self.records))

    def eps_values(self) -> list[float]:
        return sorted({r.eps for r in self.records}, reverse=True)

    def get(self, scheme: str, eps: float, seed: int) -> TradeoffRecord:
        for r in self.records:
            if r.scheme == scheme and r.eps == eps and r.seed == seed:
                return r
        raise KeyError((scheme, eps, seed))

    def to_csv(self, timing: bool = False) -> str:
        rows = [(r.scheme, r.eps, r.seed, r.throughput, r.loss, r.status, r.iters,
                 r.ms if timing else "") for r in self.records]
        return to_csv(self.HEADER, rows)

    def averaged(self) -> list[tuple]:
        """(scheme, eps, mean throughput, mean loss, n_ok, n_total) over seeds."""
        out = []
        for s in self.schemes():
            for e in self.eps_values():
                rs = [r for r in self.records if r.scheme == s and r.eps == e]
                if not rs:
                    continue
                ok = [r for r in rs if r.ok]
                thr = float(np.mean([r.throughput for r in ok])) if ok else math.nan
                loss = float(np.mean([r.loss for r in ok])) if ok else math.nan
                out.append((s, e, thr, loss, len(ok), len(rs)))
        return out

    def averaged_csv(self) -> str:
        return to_csv(("scheme", "eps", "mean_throughput", "mean_loss", "n_ok", "n_total"), self.averaged())


def _record(scheme, eps, seed, trace: solver_mu.SolveTrace, ms: float) -> TradeoffRecord:
    return TradeoffRecord(scheme, float(eps), int(seed), float(trace.throughput), float(trace.loss),
                          trace.status, trace.iterations, round(ms, 3))


# -------------------------------------------------------------- warm starts

def pick_start(ch, spec, mcfg: solver_mu.MuSolveConfig, candidates) -> BeamformingSolution | None:
    """Among candidate solutions (any scheme), the feasible start with the highest throughput."""
    best, best_r = None, -math.inf
    for cand in candidates:
        if cand is None:
            continue
        theta, _ = solver_mu.initialize(ch, spec, mcfg, cand)
        if not solver_mu.is_feasible(theta, spec, mcfg.eps1):
            continue
        r = scheme_rates(theta, ch, mcfg.scheme).throughput
        if r > best_r:
            best, best_r = cand, r
    return best


def solve_chain(ch, spec, eps: float, schemes, q_streams: int, settings: SolverSettings,
                previous: dict | None = None) -> dict:
    """Solve the requested schemes at one ``eps`` in dominance order.

    Each scheme starts from the best of its own previous solution (larger
    eps, from ``previous``) and the solutions of the schemes it dominates.
    Returns ``{scheme: (trace, wall_ms)}``.
    """
    previous = previous or {}
    out = {}
    for scheme in [s for s in CHAIN if s in schemes]:
        mcfg = settings.config(eps, scheme, q_streams)
        cands = [previous.get(scheme)]
        cands += [out[d][0].solution for d in DOMINATES.get(scheme, ()) if d in out and out[d][0].solution is not None]
        start = pick_start(ch, spec, mcfg, cands)
        t0 = time.perf_counter()
        try:
            trace = solver_mu.solve(ch, spec, mcfg, start)
        except Exception as exc:  # keep the sweep alive, record the failure
            log.exception("solve failed for %s at eps=%g", scheme, eps)
            trace = solver_mu.SolveTrace(scheme, "error")
            trace.loss = math.nan
            trace.records = []
            del exc
        out[scheme] = (trace, 1e3 * (time.perf_counter() - t0))
    return out


# ------------------------------------------------------------------- sweeps

def _tradeoff_one(args):
    cfg, schemes, eps_desc, realization, q_streams, settings, keep = args
    spec = spec_from_config(cfg)
    ch = sample_channels(cfg, realization=realization)
    per_scheme = {s: [] for s in schemes}
    traces = {}
    prev: dict = {}
    for eps in eps_desc:
        res = solve_chain(ch, spec, eps, schemes, q_streams, settings, prev)
        for s, (trace, ms) in res.items():
            per_scheme[s].append((eps, trace, ms))
            if trace.solution is not None and trace.status in OK_STATUSES:
                prev[s] = trace.solution
    records = []
    for s in schemes:
        for eps, trace, ms in _pareto_repair(per_scheme[s], ch, s):
            records.append(_record(s, eps, realization, trace, ms))
            if keep:
                traces[(s, eps, realization)] = trace
    return records, traces


def _pareto_repair(rows, ch, scheme):
    """Ascending pass: a smaller-eps solution is feasible for every larger eps.

    If it beats the solution found at a larger eps, adopt it there.
    """
    rows = list(rows)
    best = None  # (throughput, trace)
    for i in range(len(rows) - 1, -1, -1):  # rows are in descending eps
        eps, trace, ms = rows[i]
        if trace.status not in OK_STATUSES:
            continue
        if best is not None and best[0] > trace.throughput:
            adopted = solver_mu.SolveTrace(scheme, trace.status, trace.records, best[1].solution,
                                           best[1].report, best[1].loss, trace.final_penalty, trace.iterate,
                                           trace.start_weight)
            rows[i] = (eps, adopted, ms)
            log.info("%s: eps=%g adopts the smaller-eps solution (%.4f > %.4f)", scheme, eps, best[0],
                     trace.throughput)
            trace = adopted
        if best is None or trace.throughput > best[0]:
            best = (trace.throughput, trace)
    return rows


def _run_pool(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def run_tradeoff(cfg: SystemConfig, schemes=("noma", "ideal_senic", "no_senic"), eps_grid=DEFAULT_EPS,
                 n_realizations: int = 1, q_streams: int | None = None, settings: SolverSettings | None = None,
                 workers: int = 1, keep_traces: bool = False, first_realization: int = 0) -> TradeoffCurve:
    """Sweep eps in descending order per channel realization, warm-starting every step."""
    schemes = tuple(schemes)
    for s in schemes:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}")
    eps = sorted({float(e) for e in eps_grid}, reverse=True)
    if not eps or any(e < 0 for e in eps):
        raise ValueError("eps grid must be non-empty and non-negative")
    if n_realizations < 1:
        raise ValueError("need at least one realization")
    q = cfg.q_streams if q_streams is None else q_streams
    settings = settings or SolverSettings()
    jobs = [(cfg, schemes, eps, r, q, settings, keep_traces)
            for r in range(first_realization, first_realization + n_realizations)]
    curve = TradeoffCurve()
    for records, traces in _run_pool(_tradeoff_one, jobs, workers):
        curve.records.extend(records)
        curve.traces.update(traces)
    order = {s: i for i, s in enumerate(schemes)}
    curve.records.sort(key=lambda r: (order[r.scheme], -r.eps, r.seed))
    return curve


# -------------------------------------------------------------- beampattern

@dataclass
class BeampatternResult:
    theta_deg: np.ndarray
    desired: np.ndarray
    reference: np.ndarray
    patterns: dict  # scheme -> pattern
    meta: list  # (scheme, eps, throughput, loss, status)

    def to_csv(self) -> str:
        schemes = list(self.patterns)
        rows = [(self.theta_deg[i], self.desired[i], self.reference[i], *[self.patterns[s][i] for s in schemes])
                for i in range(len(self.theta_deg))]
        return to_csv(("theta_deg", "desired", "reference", *schemes), rows)

    def meta_csv(self) -> str:
        return to_csv(("scheme", "eps", "throughput", "loss", "status"), self.meta)


def _throughput_at(ch, spec, scheme, eps, q, settings):
    return solve_chain(ch, spec, eps, (scheme,), q, settings)[scheme][0]


def match_throughput(ch, spec, scheme, target, q, settings, eps_hi, max_steps: int = 30, rtol: float = 0.01):
    """Bisect eps (in log scale) until the achieved throughput is within ``rtol`` of ``target``."""
    hi_trace = _throughput_at(ch, spec, scheme, eps_hi, q, settings)
    if hi_trace.status not in OK_STATUSES or hi_trace.throughput < target * (1 - rtol):
        return eps_hi, hi_trace, "target-unreachable"
    lo, hi = math.log(eps_hi) - math.log(1e6), math.log(eps_hi)
    best = (eps_hi, hi_trace)
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        tr = _throughput_at(ch, spec, scheme, math.exp(mid), q, settings)
        if tr.status in OK_STATUSES and tr.throughput >= target * (1 - rtol):
            best = (math.exp(mid), tr)
            hi = mid
            if tr.throughput <= target * (1 + rtol):
                return best[0], tr, "matched"
        else:
            lo = mid
    return best[0], best[1], "approximate"


def run_beampattern(cfg: SystemConfig, schemes=("noma", "ideal_senic", "no_senic"), eps: float = 1e-3,
                    target_throughput: float | None = None, realization: int = 0, q_streams: int | None = None,
                    settings: SolverSettings | None = None) -> BeampatternResult:
    """Transmit beampattern of every scheme at one eps (or at a matched throughput)."""
    settings = settings or SolverSettings()
    q = cfg.q_streams if q_streams is None else q_streams
    spec = spec_from_config(cfg)
    ch = sample_channels(cfg, realization=realization)
    steering = spec.grid.steering
    patterns, meta = {}, []
    if target_throughput is None:
        res = solve_chain(ch, spec, eps, schemes, q, settings)
        for s in schemes:
            tr = res[s][0]
            patterns[s] = beampattern(tr.solution.covariance(), steering)
            meta.append((s, eps, tr.throughput, tr.loss, tr.status))
    else:
        for s in schemes:
            e, tr, note = match_throughput(ch, spec, s, target_throughput, q, settings, eps_hi=max(eps, 1e-1))
            patterns[s] = beampattern(tr.solution.covariance(), steering)
            meta.append((s, e, tr.throughput, tr.loss, f"{tr.status}/{note}"))
    return BeampatternResult(spec.grid.angles_deg, spec.phi.copy(), spec.reference_pattern.copy(), patterns, meta)


# ------------------------------------------------------------------ Q sweep

@dataclass
class QSweepResult:
    records: list  # (q, seed, throughput, loss, status)

    def means(self) -> list[tuple]:
        out = []
        for q in sorted({r[0] for r in self.records}):
            rs = [r for r in self.records if r[0] == q]
            ok = [r[2] for r in rs if r[4] in OK_STATUSES]
            out.append((q, float(np.mean(ok)) if ok else math.nan,
                        float(np.min(ok)) if ok else math.nan, float(np.max(ok)) if ok else math.nan,
                        len(ok), len(rs)))
        return out

    def relative_spread(self) -> float:
        m = np.array([r[1] for r in self.means()])
        return float((m.max() - m.min()) / m.mean())

    def to_csv(self) -> str:
        return to_csv(("q", "mean_throughput", "min_throughput", "max_throughput", "n_ok", "n_total"),
                      self.means())

    def records_csv(self) -> str:
        return to_csv(("q", "seed", "throughput", "loss", "status"), self.records)


def _q_one(args):
    cfg, q_values, eps, realization, settings = args
    spec = spec_from_config(cfg)
    ch = sample_channels(cfg, realization=realization)
    base = solve_chain(ch, spec, eps, ("no_senic", "ideal_senic"), 0, settings)["ideal_senic"][0]
    out, prev = [], None
    for q in sorted(q_values):
        mcfg = settings.config(eps, "noma", q)
        start = pick_start(ch, spec, mcfg, [base.solution, prev])
        tr = solver_mu.solve(ch, spec, mcfg, start)
        if tr.status in OK_STATUSES:
            prev = tr.solution
        out.append((q, realization, tr.throughput, tr.loss, tr.status))
    return out


def run_q_sweep(cfg: SystemConfig, q_values=(1, 2, 3, 4), eps: float = 1e-3, n_realizations: int = 1,
                settings: SolverSettings | None = None, workers: int = 1) -> QSweepResult:
    """NOMA throughput against the number of multicast streams."""
    q_values = tuple(int(q) for q in q_values)
    if any(q < 0 or q > cfg.n_antennas for q in q_values):
        raise ValueError("q values must lie in [0, n_antennas]")
    settings = settings or SolverSettings()
    jobs = [(cfg, q_values, eps, r, settings) for r in range(n_realizations)]
    recs = [row for rows in _run_pool(_q_one, jobs, workers) for row in rows]
    recs.sort(key=lambda r: (r[0], r[1]))
    return QSweepResult(recs)


# -------------------------------------------------------------- single user

@dataclass
class SingleUserRun:
    curve: TradeoffCurve
    beampattern: BeampatternResult
    pattern_rate: float
    max_pattern_gap: float  # max pointwise |p_s - p_noma| / max(p_noma)
    max_loss_gap: float     # max relative loss disagreement over the grid

    def losses(self) -> dict:
        return {s: np.array([r.loss for r in self.curve.records if r.scheme == s]) for s in solver_su.SU_SCHEMES}


def relative_gap(values, floor: float = 1e-10) -> float:
    """(max - min) / max(|max|, floor): spread of values that should coincide."""
    v = np.asarray(values, dtype=float)
    return float((v.max() - v.min()) / max(abs(v.max()), floor))


def run_single_user(cfg: SystemConfig, eps2_grid=None, points: int = 8, top: float = 0.98,
                    pattern_rate: float | None = None, realization: int = 0,
                    loss_floor: float = 1e-10) -> SingleUserRun:
    """Loss-vs-rate curves of the three single-user programs plus a beampattern comparison."""
    cfg = cfg.with_(n_users=1, q_streams=min(cfg.q_streams, cfg.n_antennas))
    spec = spec_from_config(cfg)
    ch = sample_channels(cfg, realization=realization)
    grid = (solver_su.default_eps2_grid(ch, spec.pt, points, top) if eps2_grid is None
            else np.asarray(sorted(eps2_grid), dtype=float))
    sweep = solver_su.sweep_single_user(ch, spec, grid)
    curve = TradeoffCurve()
    for s in solver_su.SU_SCHEMES:
        for e, r in zip(grid, sweep.results[s]):
            curve.records.append(TradeoffRecord(s, float(e), realization, float(r.rate), float(r.loss),
                                                r.status, r.iterations, round(1e3 * r.solve_time, 3)))
    gaps = [relative_gap([sweep.results[s][i].loss for s in solver_su.SU_SCHEMES], loss_floor)
            for i in range(len(grid))
            if all(sweep.results[s][i].ok for s in solver_su.SU_SCHEMES)]
    rate = float(grid[-1]) if pattern_rate is None else float(pattern_rate)
    steering = spec.grid.steering
    patterns, meta = {}, []
    for s in solver_su.SU_SCHEMES:
        r = solver_su.solve_scheme(ch, spec, s, rate)
        patterns[s] = beampattern(r.covariance, steering) if r.ok else np.full(spec.grid.size, np.nan)
        meta.append((s, rate, r.rate, r.loss, r.status))
    bp = BeampatternResult(spec.grid.angles_deg, spec.phi.copy(), spec.reference_pattern.copy(), patterns, meta)
    ref = patterns["noma"]
    scale = max(float(np.nanmax(ref)), 1e-300)
    pgap = max(float(np.nanmax(np.abs(patterns[s] - ref))) / scale for s in solver_su.SU_SCHEMES)
    if pgap > 1e-3:
        log.warning("single-user beampatterns differ by %.3g (relative power) at rate %.4g although the "
                    "losses agree; optimum is not unique, comparing losses only", pgap, rate)
    return SingleUserRun(curve, bp, rate, pgap, max(gaps) if gaps else math.nan)


# -------------------------------------------------------------- convergence

def run_convergence(cfg: SystemConfig, eps: float = 1e-3, scheme: str = "noma", realization: int = 0,
                    q_streams: int | None = None, settings: SolverSettings | None = None):
    """Per-iteration (outer, inner, throughput, penalty) rows of one solve."""
    settings = settings or SolverSettings()
    q = cfg.q_streams if q_streams is None else q_streams
    spec = spec_from_config(cfg)
    ch = sample_channels(cfg, realization=realization)
    trace = solver_mu.solve(ch, spec, settings.config(eps, scheme, q))
    return trace


def convergence_csv(trace: solver_mu.SolveTrace) -> str:
    return to_csv(("outer", "inner", "throughput", "penalty"), solver_mu.convergence_rows(trace))


# ------------------------------------------------------------- oracle check

def run_oracle_check(cfg: SystemConfig, fractions=(0.25, 0.5, 0.75), resolution: int = 200,
                     realization: int = 0):
    """Grid-search oracle against the single-user QSDP at N = 2.

    The eps2 points sit at ``fractions`` of the active range between the
    largest zero-loss rate and the maximal rate.
    """
    cfg = cfg.with_(n_antennas=2, n_users=1, q_streams=min(cfg.q_streams, 2))
    spec = spec_from_config(cfg)
    ch = sample_channels(cfg, realization=realization)
    r0 = oracle.zero_loss_max_rate(ch, spec)
    r1 = solver_su.max_rate(ch, spec.pt)
    rows = []
    for f in fractions:
        e = r0 + f * (r1 - r0)
        q = solver_su.solve_p41(ch, spec, e)
        o = oracle.grid_search_single_user(ch, spec, e, resolution=resolution)
        gap = (o.loss - q.loss) / max(q.loss, 1e-300) if q.ok else math.nan
        rows.append((e, q.loss, o.loss, gap, q.status))
    return rows


def oracle_csv(rows) -> str:
    return to_csv(("eps2", "qsdp_loss", "oracle_loss", "rel_gap", "status"), rows)
