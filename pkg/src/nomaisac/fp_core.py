"""Fractional-programming block updates and the convex subproblem of the BCD loop.

Unicast rates are handled through the Lagrangian dual transform followed by
the quadratic transform.  Both transforms are written in natural-log units
and rescaled by ``1/ln 2`` so that every objective term is in bits/s/Hz and
the auxiliary optima ``alpha* = SINR`` and the closed-form ``beta*`` make the
transforms tight.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .rates import (BeamformingSolution, gains, multicast_denominators, principal_component,
                    scheme_rates)
from .scenario import ChannelSet
from .sensing import BeampatternSpec, add_loss_cap

LN2 = math.log(2.0)


def remainder_weight(scheme: str) -> float:
    """How strongly the non-multicast sensing covariance interferes with unicast decoding."""
    return {"noma": 1.0, "noma_senic": 1.0, "ideal_senic": 0.0, "no_senic": 1.0, "com_only": 0.0}[scheme]


def has_multicast(scheme: str) -> bool:
    return scheme in ("noma", "noma_senic")


@dataclass
class FpState:
    theta: BeamformingSolution
    scheme: str = "noma"
    alpha: np.ndarray | None = None
    beta: np.ndarray | None = None
    multicast_aux: np.ndarray = field(default_factory=lambda: np.zeros(0))
    zeta: float = 1e2
    outer: int = 0
    inner: int = 0


# ----------------------------------------------------------- transform pieces

def unicast_terms(theta: BeamformingSolution, ch: ChannelSet, scheme: str):
    """Desired gain S_k and full received power D_k = S_k + interference + noise."""
    h = ch.channels
    G = np.array([gains(h, W) for W in theta.unicast])
    S = np.diag(G).copy()
    # without SIC of multicast streams the whole sensing covariance is "remaining"
    rem = theta.remaining if has_multicast(scheme) else theta.sensing_covariance()
    D = G.sum(axis=0) + remainder_weight(scheme) * gains(h, rem) + ch.noise_power
    return S, D


def sinr(theta, ch, scheme) -> np.ndarray:
    S, D = unicast_terms(theta, ch, scheme)
    return np.maximum(S, 0.0) / (D - S)


def update_alpha(theta: BeamformingSolution, ch: ChannelSet, scheme: str = "noma") -> np.ndarray:
    return sinr(theta, ch, scheme)


def update_beta(theta: BeamformingSolution, ch: ChannelSet, alpha: np.ndarray, scheme: str = "noma") -> np.ndarray:
    S, D = unicast_terms(theta, ch, scheme)
    return np.sqrt((1 + alpha) * np.maximum(S, 0.0)) / D


def v_term(alpha: np.ndarray) -> float:
    return float(np.sum(np.log1p(alpha) - alpha)) / LN2


def g_term(alpha, theta, ch, scheme) -> float:
    S, D = unicast_terms(theta, ch, scheme)
    return float(np.sum((1 + alpha) * np.maximum(S, 0.0) / D)) / LN2


def h_term(alpha, beta, theta, ch, scheme) -> float:
    S, D = unicast_terms(theta, ch, scheme)
    return float(np.sum(2 * beta * np.sqrt((1 + alpha) * np.maximum(S, 0.0)) - beta ** 2 * D)) / LN2


def f0(theta, ch, scheme, multicast_aux=None) -> float:
    """Auxiliary multicast rates plus true unicast rates (bits/s/Hz)."""
    rep = scheme_rates(theta, ch, scheme)
    aux = rep.multicast if multicast_aux is None else multicast_aux
    mc = float(np.sum(aux)) if scheme == "noma" else 0.0
    return mc + float(rep.unicast.sum())


def f1(alpha, theta, ch, scheme, multicast_aux=None) -> float:
    rep = scheme_rates(theta, ch, scheme)
    aux = rep.multicast if multicast_aux is None else multicast_aux
    mc = float(np.sum(aux)) if scheme == "noma" else 0.0
    return mc + v_term(alpha) + g_term(alpha, theta, ch, scheme)


def f2(alpha, beta, theta, ch, scheme, multicast_aux=None) -> float:
    rep = scheme_rates(theta, ch, scheme)
    aux = rep.multicast if multicast_aux is None else multicast_aux
    mc = float(np.sum(aux)) if scheme == "noma" else 0.0
    return mc + v_term(alpha) + h_term(alpha, beta, theta, ch, scheme)


# ------------------------------------------------------------- SCA surrogates

def sic_interference(theta: BeamformingSolution, q: int) -> np.ndarray:
    """A_q: everything still in the air when multicast stream q is decoded."""
    A = sum(theta.unicast, np.zeros_like(theta.remaining)) + theta.remaining
    for W in theta.multicast[q + 1:]:
        A = A + W
    return A


def log_term(A: np.ndarray, h: np.ndarray) -> float:
    """t = -log2(h^H A h + 1)."""
    return -math.log2(float(np.real(h.conj() @ A @ h)) + 1.0)


def log_term_surrogate(A: np.ndarray, A_ref: np.ndarray, h: np.ndarray) -> float:
    """First-order expansion of ``log_term`` at ``A_ref``; a global lower bound."""
    a = float(np.real(h.conj() @ A_ref @ h)) + 1.0
    d = float(np.real(h.conj() @ (A - A_ref) @ h))
    return -math.log2(a) - d / (a * LN2)


def spectral_surrogate(W: np.ndarray, W_ref: np.ndarray, u: np.ndarray | None = None) -> float:
    """Linearisation of ``-||W||_2`` at ``W_ref``; a global upper bound."""
    lam, v = principal_component(W_ref) if u is None else (float(np.real(u.conj() @ W_ref @ u)), u)
    return -lam - float(np.real(v.conj() @ (W - W_ref) @ v))


def penalty_surrogate(theta: BeamformingSolution, theta_ref: BeamformingSolution) -> float:
    total = 0.0
    for W, Wn in zip(theta.beams, theta_ref.beams):
        total += float(np.trace(W).real) + spectral_surrogate(W, Wn)
    return total


# ------------------------------------------------------------------ subproblem

@dataclass
class Subproblem:
    prog: conic.ConicProgram
    unicast: list
    multicast: list
    remaining: object
    multicast_aux: list
    constant: float

    def read(self, res: conic.SolveResult) -> tuple[BeamformingSolution, np.ndarray]:
        U = [res[v.name] for v in self.unicast]
        M = [res[v.name] for v in self.multicast]
        n = U[0].shape[0]
        R = res[self.remaining.name] if self.remaining is not None else np.zeros((n, n), dtype=complex)
        aux = np.array([res.values[name] for name in self.multicast_aux])
        return BeamformingSolution(U, M, R), aux


def build_subproblem(state: FpState, ch: ChannelSet, spec: BeampatternSpec, eps1: float,
                     pt: float) -> Subproblem:
    """Convex restriction of the penalised FP problem around ``state.theta``.

    Maximises  sum_q Rm_q + v(alpha) + h(alpha, beta, Theta) - (1/zeta) * penalty_surrogate
    over PSD unicast / multicast / remainder matrices subject to the SCA
    multicast-rate bounds, the matching-error cap and the power equality.
    """
    scheme = state.scheme
    theta_n = state.theta
    alpha, beta = state.alpha, state.beta
    h = ch.channels
    K, N = h.shape
    Q = len(theta_n.multicast) if has_multicast(scheme) else 0
    prog = conic.ConicProgram()

    W = [prog.hermitian(f"W{k}", N) for k in range(K)]
    Wr = [prog.hermitian(f"Wr{q}", N) for q in range(Q)]
    Rrem = prog.hermitian("Rrem", N) if scheme != "com_only" else None
    cov_terms = W + Wr + ([Rrem] if Rrem is not None else [])

    # power equality and the beampattern error cap
    prog.add_eq(conic.esum([v.trace() for v in cov_terms]) - pt)
    add_loss_cap(prog, spec, cov_terms, eps1)

    # quadratic-transform part of the objective
    c_rem = remainder_weight(scheme)
    objective = conic.Expr.constant(v_term(alpha))
    for k in range(K):
        s_k = prog.scalar(f"s{k}")
        gain_k = (1 + alpha[k]) * W[k].quad(h[k])
        # s_k^2 <= (1 + alpha_k) h^H W_k h
        prog.add_rotated_soc(gain_k, conic.Expr.constant(1.0), s_k)
        D_k = conic.esum([Wi.quad(h[k]) for Wi in W]) + 1.0
        if Rrem is not None and c_rem:
            D_k = D_k + c_rem * Rrem.quad(h[k])
        objective = objective + (2 * beta[k] / LN2) * s_k - (beta[k] ** 2 / LN2) * D_k

    # multicast rates, counted in the objective only for the NOMA scheme
    aux_names = []
    if Q and scheme == "noma":
        for q in range(Q):
            r_q = prog.scalar(f"rm{q}", nonneg=True)
            aux_names.append(f"rm{q}")
            A_ref = sic_interference(theta_n, q)
            for k in range(K):
                a_n = float(np.real(h[k].conj() @ A_ref @ h[k])) + 1.0
                A_q = conic.esum([Wi.quad(h[k]) for Wi in W] + [Wr[i].quad(h[k]) for i in range(q + 1, Q)])
                A_q = A_q + Rrem.quad(h[k])
                # ln2 * r_q - ln2 * t_tilde <= ln(h^H (A_q + W_rq) h + 1)
                lhs = LN2 * r_q + math.log(a_n) + (A_q + 1.0) / a_n - 1.0
                prog.add_log_hypograph(lhs, A_q + Wr[q].quad(h[k]) + 1.0)
            objective = objective + r_q

    # linearised rank-one penalty
    inv_zeta = 1.0 / state.zeta
    beam_vars = W + Wr
    beam_ref = list(theta_n.unicast) + list(theta_n.multicast[:Q])
    for var, Wn in zip(beam_vars, beam_ref):
        _, u = principal_component(Wn)
        objective = objective - inv_zeta * (var.trace() - var.quad(u))

    prog.maximize(objective)
    return Subproblem(prog, W, Wr, Rrem, aux_names, float(objective.const[0]))


def subproblem_objective(state: FpState, theta: BeamformingSolution, ch: ChannelSet,
                         multicast_aux=None) -> float:
    """Objective of :func:`build_subproblem` evaluated directly at ``theta``."""
    val = f2(state.alpha, state.beta, theta, ch, state.scheme, multicast_aux)
    return val - penalty_surrogate(_trim(theta, state), _trim(state.theta, state)) / state.zeta


def _trim(theta: BeamformingSolution, state: FpState) -> BeamformingSolution:
    Q = len(state.theta.multicast) if has_multicast(state.scheme) else 0
    return BeamformingSolution(theta.unicast, theta.multicast[:Q], theta.remaining)


def multicast_rate_bounds(theta: BeamformingSolution, theta_ref: BeamformingSolution,
                          ch: ChannelSet) -> np.ndarray:
    """SCA lower bounds on the per-user multicast rates, (Q, K)."""
    h = ch.channels
    Q = len(theta.multicast)
    out = np.zeros((Q, ch.n_users))
    for q in range(Q):
        A = sic_interference(theta, q)
        A_ref = sic_interference(theta_ref, q)
        for k in range(ch.n_users):
            top = float(np.real(h[k].conj() @ (A + theta.multicast[q]) @ h[k])) + 1.0
            out[q, k] = math.log2(top) + log_term_surrogate(A, A_ref, h[k])
    return out


__all__ = [
    "FpState", "update_alpha", "update_beta", "build_subproblem", "f0", "f1", "f2",
    "g_term", "h_term", "v_term", "log_term", "log_term_surrogate", "spectral_surrogate",
    "multicast_rate_bounds", "multicast_denominators",
]
