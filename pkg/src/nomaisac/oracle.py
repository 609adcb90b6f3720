"""Brute-force verifiers that share no code with the solvers they check.

Nothing here imports the conic layer or the FP machinery; rates and the FP
transforms are recomputed with plain scalar loops.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .kernels import grid_search
from .rates import BeamformingSolution, RateReport
from .scenario import ChannelSet

LN2 = math.log(2.0)


# --------------------------------------------------------------- N = 2 search

@dataclass
class GridSearchResult:
    loss: float
    covariance: np.ndarray | None
    angles: tuple[float, float, float] | None
    resolution: int


def channel_basis(h: np.ndarray) -> np.ndarray:
    """Unitary 2x2 basis whose first column is the channel direction.

    Aligning the grid with the channel makes the rate depend on (chi, psi)
    only, so the feasibility boundary is resolved by two axes instead of three.
    """
    n = np.linalg.norm(h)
    if n == 0:
        return np.eye(2, dtype=complex)
    e1 = h / n
    e2 = np.array([-e1[1].conjugate(), e1[0].conjugate()])
    return np.column_stack([e1, e2])


def covariance_from_angles(chi: float, phi: float, psi: float, pt: float,
                           basis: np.ndarray | None = None) -> np.ndarray:
    """pt * (u u^H cos^2 psi + u_perp u_perp^H sin^2 psi) with u = (cos chi, sin chi e^{j phi}) in ``basis``."""
    u = np.array([math.cos(chi), math.sin(chi) * cmath.exp(1j * phi)])
    up = np.array([-math.sin(chi) * cmath.exp(-1j * phi), math.cos(chi)])
    Rb = pt * (math.cos(psi) ** 2 * np.outer(u, u.conj()) + math.sin(psi) ** 2 * np.outer(up, up.conj()))
    B = np.eye(2) if basis is None else basis
    return B @ Rb @ B.conj().T


def oracle_axes(resolution: int):
    """Half-open grids (chi, phi, psi), so doubling the resolution nests the old grid in the new one."""
    i = np.arange(resolution) / resolution
    return 0.5 * math.pi * i, 2 * math.pi * i, 0.5 * math.pi * i


def boundary_chi(psi: np.ndarray, t: float) -> np.ndarray:
    """chi putting the candidate exactly on the rate boundary, per psi (NaN if none).

    In the channel-aligned frame the normalised gain is
    ``cos^2 psi cos^2 chi + sin^2 psi sin^2 chi``; ``t`` is its required value.
    """
    c2p = np.cos(psi) ** 2
    den = 2 * c2p - 1
    with np.errstate(divide="ignore", invalid="ignore"):
        cx2 = (t - (1 - c2p)) / den
    cx2 = np.where(np.abs(den) > 1e-12, cx2, np.nan)
    cx2 = np.where((cx2 >= 0) & (cx2 <= 1), cx2, np.nan)
    return np.arccos(np.sqrt(cx2))


def _form(x: np.ndarray):
    """(|x0|^2, |x1|^2, conj(x0) x1) for a stack of 2-vectors."""
    x = np.atleast_2d(x)
    return np.abs(x[:, 0]) ** 2, np.abs(x[:, 1]) ** 2, x[:, 0].conj() * x[:, 1]


def grid_search_single_user(ch: ChannelSet, spec, eps2: float, pt: float | None = None,
                            resolution: int = 200, boundary: bool = True) -> GridSearchResult:
    """Best matching loss over a dense grid of the two-antenna covariance family.

    The grid lives in a channel-aligned frame.  With ``boundary`` the
    candidates also include, for every (psi, phi) grid pair, the point whose
    chi lies exactly on the rate boundary.  Every candidate is rate-feasible
    and the family spans all trace-``pt`` PSD 2x2 matrices, so the result is
    an upper bound that approaches the convex optimum as the grid is refined.
    """
    if ch.n_antennas != 2 or ch.n_users != 1:
        raise ValueError("grid-search oracle is defined for N = 2, K = 1 only")
    if resolution < 1:
        raise ValueError("resolution must be positive")
    pt = spec.pt if pt is None else pt
    h = ch.channels[0]
    B = channel_basis(h)
    hg0, hg1, hw = _form(B.conj().T @ h)
    s0, s1, sw = _form(spec.grid.steering @ B.conj())
    gain_min = (2.0 ** eps2 - 1.0) * ch.noise_power
    chi, phi, psi = oracle_axes(resolution)
    X, P = np.meshgrid(chi, psi, indexing="ij")
    pairs_chi, pairs_psi = [X.ravel()], [P.ravel()]
    norm2 = float(hg0[0])
    if boundary and norm2 > 0:
        # aim a hair inside so round-off cannot push the point out
        t = gain_min * (1 + 1e-12) / (pt * norm2)
        cb = boundary_chi(psi, t)
        keep = np.isfinite(cb)
        pairs_chi.append(cb[keep])
        pairs_psi.append(psi[keep])
    pc = np.ascontiguousarray(np.concatenate(pairs_chi))
    pp = np.ascontiguousarray(np.concatenate(pairs_psi))
    c = np.ascontiguousarray
    best, p, b = grid_search(float(hg0[0]), float(hg1[0]), float(hw[0].real), float(hw[0].imag),
                             c(s0), c(s1), c(sw.real), c(sw.imag),
                             c(spec.reference_pattern, dtype=float), float(pt), float(gain_min),
                             pc, pp, phi)
    if p < 0:
        return GridSearchResult(math.inf, None, None, resolution)
    ang = (float(pc[p]), float(phi[b]), float(pp[p]))
    return GridSearchResult(float(best), covariance_from_angles(*ang, pt, B), ang, resolution)


def zero_loss_max_rate(ch: ChannelSet, spec, pt: float | None = None) -> float:
    """Largest rate reachable by a two-antenna covariance with the reference pattern.

    With N = 2 the pattern only fixes the off-diagonal entry c, so the free
    diagonal a ranges over a(pt - a) >= |c|^2 and the gain is linear in a.
    """
    if ch.n_antennas != 2 or ch.n_users != 1:
        raise ValueError("defined for N = 2, K = 1 only")
    pt = spec.pt if pt is None else pt
    c = spec.reference_cov[0, 1]
    h = ch.channels[0]
    disc = math.sqrt(max(pt * pt / 4 - abs(c) ** 2, 0.0))
    cross = 2 * (h[0].conjugate() * c * h[1]).real
    best = max(a * abs(h[0]) ** 2 + (pt - a) * abs(h[1]) ** 2 + cross for a in (pt / 2 - disc, pt / 2 + disc))
    return math.log2(1 + best / ch.noise_power)


# ------------------------------------------------------------ scalar rates

def _quad(h, W) -> float:
    """h^H W h by explicit double loop."""
    n = len(h)
    acc = 0j
    for i in range(n):
        for j in range(n):
            acc += h[i].conjugate() * W[i][j] * h[j]
    return acc.real


def scalar_rate_reference(sol: BeamformingSolution, ch: ChannelSet, scheme: str = "noma") -> RateReport:
    """Multicast (SIC order 0..Q-1) and unicast rates from nested loops."""
    H = ch.channels
    K = H.shape[0]
    Q = len(sol.multicast)
    sigma = ch.noise_power
    per_user = np.zeros((Q, K))
    uc = np.zeros(K)
    for k in range(K):
        h = H[k]
        uni = [_quad(h, W) for W in sol.unicast]
        mcg = [_quad(h, W) for W in sol.multicast]
        rem = _quad(h, sol.remaining)
        for q in range(Q):
            den = sigma + rem
            for j in range(len(uni)):
                den += uni[j]
            for i in range(q + 1, Q):
                den += mcg[i]
            per_user[q, k] = math.log2(1.0 + max(mcg[q], 0.0) / den)
        den = sigma + rem
        for j in range(len(uni)):
            if j != k:
                den += uni[j]
        uc[k] = math.log2(1.0 + max(uni[k], 0.0) / den)
    mc = np.array([min(per_user[q, :]) for q in range(Q)]) if Q else np.zeros(0)
    return RateReport(scheme, per_user, mc, uc, counts_multicast=(scheme != "noma_senic"))


# -------------------------------------------------------- transform checks

def random_psd(rng: np.random.Generator, n: int, scale: float = 1.0, rank: int | None = None) -> np.ndarray:
    r = n if rank is None else rank
    G = rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))
    W = G @ G.conj().T
    return scale * W / np.trace(W).real


def random_instance(rng: np.random.Generator, n_max: int = 4, k_max: int = 3, q_max: int = 2,
                    pt: float = 1.0, gain: float = 30.0):
    """Random channels and a random PSD beamforming solution of matching size."""
    N = int(rng.integers(1, n_max + 1))
    K = int(rng.integers(1, k_max + 1))
    Q = int(rng.integers(0, q_max + 1))
    H = math.sqrt(gain / 2) * (rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N)))
    ch = ChannelSet(H, 1.0)
    w = rng.dirichlet(np.ones(K + Q + 1)) * pt
    sol = BeamformingSolution([random_psd(rng, N, w[k]) for k in range(K)],
                              [random_psd(rng, N, w[K + q], rank=1) for q in range(Q)],
                              random_psd(rng, N, w[-1]))
    return ch, sol


def _unicast_sd(sol: BeamformingSolution, ch: ChannelSet, interference_weight: float = 1.0):
    K = ch.n_users
    S = np.zeros(K)
    D = np.zeros(K)
    for k in range(K):
        h = ch.channels[k]
        tot = ch.noise_power + interference_weight * _quad(h, sol.remaining)
        for W in sol.unicast:
            tot += _quad(h, W)
        S[k] = max(_quad(h, sol.unicast[k]), 0.0)
        D[k] = tot
    return S, D


def naive_f0(sol, ch) -> float:
    rep = scalar_rate_reference(sol, ch)
    return float(sum(rep.multicast) + sum(rep.unicast))


def naive_f1(alpha, sol, ch) -> float:
    rep = scalar_rate_reference(sol, ch)
    S, D = _unicast_sd(sol, ch)
    val = sum(rep.multicast)
    for k in range(ch.n_users):
        val += (math.log1p(alpha[k]) - alpha[k] + (1 + alpha[k]) * S[k] / D[k]) / LN2
    return float(val)


def naive_g(alpha, sol, ch) -> float:
    S, D = _unicast_sd(sol, ch)
    return float(sum((1 + alpha[k]) * S[k] / D[k] for k in range(ch.n_users)) / LN2)


def naive_h(alpha, beta, sol, ch) -> float:
    S, D = _unicast_sd(sol, ch)
    return float(sum(2 * beta[k] * math.sqrt((1 + alpha[k]) * S[k]) - beta[k] ** 2 * D[k]
                     for k in range(ch.n_users)) / LN2)


def optimal_alpha(sol, ch) -> np.ndarray:
    S, D = _unicast_sd(sol, ch)
    return S / (D - S)


def optimal_beta(alpha, sol, ch) -> np.ndarray:
    S, D = _unicast_sd(sol, ch)
    return np.sqrt((1 + np.asarray(alpha)) * S) / D


@dataclass
class TightnessReport:
    lagrangian_gap: float  # max |f1(alpha*) - f0|
    quadratic_gap: float   # max |h(alpha, beta*) - g(alpha)|
    trials: int


def transform_tightness(trials: int = 1000, seed: int = 0, zero: bool = False) -> TightnessReport:
    """Maximum tightness gaps of both transforms over seeded random instances.

    ``alpha`` for the quadratic-transform check is drawn at random, because
    that identity holds for every ``alpha`` once ``beta`` is optimal.
    """
    rng = np.random.default_rng(seed)
    g1 = g2 = 0.0
    for _ in range(trials):
        ch, sol = random_instance(rng)
        if zero:
            sol = sol.scaled(0.0)
        a_star = optimal_alpha(sol, ch)
        g1 = max(g1, abs(naive_f1(a_star, sol, ch) - naive_f0(sol, ch)))
        alpha = rng.exponential(2.0, ch.n_users)
        b_star = optimal_beta(alpha, sol, ch)
        g2 = max(g2, abs(naive_h(alpha, b_star, sol, ch) - naive_g(alpha, sol, ch)))
    return TightnessReport(g1, g2, trials)
