"""Globally optimal single-user designs (convex QSDPs)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .rates import principal_component
from .scenario import ChannelSet
from .sensing import BeampatternSpec, add_loss_objective, matching_loss


@dataclass
class SingleUserResult:
    status: str
    loss: float = math.nan
    covariance: np.ndarray | None = None
    unicast: np.ndarray | None = None
    sensing: np.ndarray | None = None
    rate: float = math.nan
    iterations: int = 0
    solve_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == conic.OPTIMAL

    def beam(self) -> np.ndarray | None:
        """Rank-one unicast beamformer w with w w^H ~ principal part of W."""
        if self.unicast is None:
            return None
        lam, v = principal_component(self.unicast)
        return math.sqrt(max(lam, 0.0)) * v


def max_rate(ch: ChannelSet, pt: float) -> float:
    """Largest single-user rate any covariance with trace ``pt`` can support."""
    h = ch.channels[0]
    return math.log2(1 + pt * float(np.vdot(h, h).real) / ch.noise_power)


def _single(ch: ChannelSet) -> np.ndarray:
    if ch.n_users != 1:
        raise ValueError("single-user solver needs exactly one user")
    return ch.channels[0]


# relative slack on the maximal rate within which the feasible set is the single MRT point
EDGE_RTOL = 1e-9


def _edge_case(ch: ChannelSet, spec: BeampatternSpec, eps2: float, pt: float, split: bool):
    """Closed-form answers at and beyond the maximal rate, else None.

    At ``eps2 = log2(1 + pt ||h||^2)`` the only feasible covariance is
    ``pt h h^H / ||h||^2`` (no Slater point, so the interior-point solve is
    unreliable there); above it the problem is infeasible.
    """
    top = max_rate(ch, pt)
    if eps2 > top * (1 + EDGE_RTOL):
        return SingleUserResult(conic.INFEASIBLE)
    if eps2 < top * (1 - EDGE_RTOL):
        return None
    h = ch.channels[0]
    R = pt * np.outer(h, h.conj()) / float(np.vdot(h, h).real)
    zero = np.zeros_like(R)
    return SingleUserResult(conic.OPTIMAL, matching_loss(R, spec), R,
                            R if split else None, zero if split else None, rate=top)


def _build(kind: str, ch: ChannelSet, spec: BeampatternSpec, eps2: float, pt: float, p: int, tol: float):
    """Set up and solve one single-user program in normalised units.

    Matrices are scaled by ``1/pt`` and the rate row by ``1/(pt ||h||^2)`` so
    that all data is O(1); results are mapped back to watts.
    """
    h = ch.channels[0]
    nh2 = float(np.vdot(h, h).real)
    hn = h / math.sqrt(nh2)
    noise = ch.noise_power / (pt * nh2)
    c = 2.0 ** eps2 - 1
    prog = conic.ConicProgram()
    if kind == "joint":
        X = prog.hermitian("R", len(h))
        prog.add_eq(X.trace() - 1.0)
        prog.add_nonneg(X.quad(hn) - c * noise)
        add_loss_objective(prog, spec, [X], unit=pt)
    else:
        W = prog.hermitian("W", len(h))
        Rr = prog.hermitian("Rr", len(h))
        prog.add_eq(W.trace() + Rr.trace() - 1.0)
        if kind == "split":
            prog.add_nonneg(W.quad(hn) - c * (p * Rr.quad(hn) + noise))
        else:  # both parts carry information
            prog.add_nonneg(W.quad(hn) + Rr.quad(hn) - c * noise)
        add_loss_objective(prog, spec, [W, Rr], unit=pt)
    res = conic.solve(prog, tol)
    if not res.ok:
        return None, res
    return {k: pt * v for k, v in res.values.items() if isinstance(v, np.ndarray) and v.ndim == 2}, res


def solve_p41(ch: ChannelSet, spec: BeampatternSpec, eps2: float, pt: float | None = None,
              tol: float = conic.DEFAULT_TOL) -> SingleUserResult:
    """Minimum matching loss over R with h^H R h >= (2^eps2 - 1), tr R = pt."""
    if eps2 < 0:
        raise ValueError("eps2 must be non-negative")
    h = _single(ch)
    pt = spec.pt if pt is None else pt
    edge = _edge_case(ch, spec, eps2, pt, split=False)
    if edge is not None:
        return edge
    mats, res = _build("joint", ch, spec, eps2, pt, 0, tol)
    if mats is None:
        return SingleUserResult(res.status, iterations=res.iterations, solve_time=res.solve_time)
    Rx = mats["R"]
    rate = math.log2(1 + max(_gain(h, Rx), 0.0) / ch.noise_power)
    return SingleUserResult(res.status, matching_loss(Rx, spec), Rx, rate=rate,
                            iterations=res.iterations, solve_time=res.solve_time)


def solve_p61(ch: ChannelSet, spec: BeampatternSpec, eps2: float, pt: float | None = None,
              p: int = 0, tol: float = conic.DEFAULT_TOL) -> SingleUserResult:
    """Same trade-off with separate unicast W and sensing R_r.

    The rate constraint is h^H W h >= (2^eps2 - 1) (p h^H R_r h + 1); the
    rank of W is left free.
    """
    if p not in (0, 1):
        raise ValueError("p must be 0 or 1")
    if eps2 < 0:
        raise ValueError("eps2 must be non-negative")
    h = _single(ch)
    pt = spec.pt if pt is None else pt
    edge = _edge_case(ch, spec, eps2, pt, split=True)
    if edge is not None:
        return edge
    mats, res = _build("split", ch, spec, eps2, pt, p, tol)
    return _split_result(mats, res, h, ch, spec, p)


def solve_p71(ch: ChannelSet, spec: BeampatternSpec, eps2: float, pt: float | None = None,
              tol: float = conic.DEFAULT_TOL) -> SingleUserResult:
    """Split form where both W and R_r carry information: h^H (W + R_r) h >= 2^eps2 - 1."""
    if eps2 < 0:
        raise ValueError("eps2 must be non-negative")
    h = _single(ch)
    pt = spec.pt if pt is None else pt
    edge = _edge_case(ch, spec, eps2, pt, split=True)
    if edge is not None:
        return edge
    mats, res = _build("shared", ch, spec, eps2, pt, 0, tol)
    out = _split_result(mats, res, h, ch, spec, 0)
    if out.ok:
        out.rate = math.log2(1 + max(_gain(h, out.covariance), 0.0) / ch.noise_power)
    return out


def _gain(h, X) -> float:
    return float(np.real(h.conj() @ X @ h))


def _split_result(mats, res, h, ch, spec, p) -> SingleUserResult:
    if mats is None:
        return SingleUserResult(res.status, iterations=res.iterations, solve_time=res.solve_time)
    Wv, Rv = mats["W"], mats["Rr"]
    sinr = max(_gain(h, Wv), 0.0) / (p * max(_gain(h, Rv), 0.0) + ch.noise_power)
    return SingleUserResult(res.status, matching_loss(Wv + Rv, spec), Wv + Rv, Wv, Rv,
                            rate=math.log2(1 + sinr), iterations=res.iterations, solve_time=res.solve_time)


SU_SCHEMES = ("noma", "ideal_senic", "no_senic")


@dataclass
class SingleUserSweep:
    eps2: np.ndarray
    results: dict = field(default_factory=dict)  # scheme -> list[SingleUserResult]

    def losses(self, scheme: str) -> np.ndarray:
        return np.array([r.loss for r in self.results[scheme]])

    def statuses(self, scheme: str) -> list[str]:
        return [r.status for r in self.results[scheme]]


def solve_scheme(ch, spec, scheme, eps2, pt=None, tol=conic.DEFAULT_TOL) -> SingleUserResult:
    if scheme == "noma":
        return solve_p41(ch, spec, eps2, pt, tol)
    if scheme == "ideal_senic":
        return solve_p61(ch, spec, eps2, pt, 0, tol)
    if scheme == "no_senic":
        return solve_p61(ch, spec, eps2, pt, 1, tol)
    raise ValueError(f"no single-user program for scheme {scheme!r}")


def sweep_single_user(ch: ChannelSet, spec: BeampatternSpec, eps2_grid, pt: float | None = None,
                      tol: float = conic.DEFAULT_TOL) -> SingleUserSweep:
    grid = np.asarray(eps2_grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("eps2 grid must be sorted ascending")
    out = SingleUserSweep(grid)
    for scheme in SU_SCHEMES:
        out.results[scheme] = [solve_scheme(ch, spec, scheme, e, pt, tol) for e in grid]
    return out


def default_eps2_grid(ch: ChannelSet, pt: float, points: int = 8, top: float = 0.98) -> np.ndarray:
    """Evenly spaced rates from 0 up to ``top`` times the largest feasible rate."""
    return np.linspace(0.0, top * max_rate(ch, pt), points)
