"""Achievable rates for the NOMA-inspired framework and the benchmark frameworks.

All matrices are covariance (lifted) forms, channels are noise-normalised so
every noise term equals one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .scenario import ChannelSet

SCHEMES = ("noma", "noma_senic", "ideal_senic", "no_senic", "com_only")


@dataclass
class BeamformingSolution:
    unicast: list[np.ndarray]
    multicast: list[np.ndarray] = field(default_factory=list)
    remaining: np.ndarray | None = None

    def __post_init__(self):
        n = self.unicast[0].shape[0] if self.unicast else self.remaining.shape[0]
        if self.remaining is None:
            self.remaining = np.zeros((n, n), dtype=complex)

    @property
    def n_antennas(self) -> int:
        return self.remaining.shape[0]

    @property
    def beams(self) -> list[np.ndarray]:
        """Matrices carrying a rank-one beam: unicast then multicast."""
        return list(self.unicast) + list(self.multicast)

    def covariance(self) -> np.ndarray:
        return sum(self.unicast, np.zeros_like(self.remaining)) + sum(self.multicast, 0) + self.remaining

    def sensing_covariance(self) -> np.ndarray:
        return sum(self.multicast, np.zeros_like(self.remaining)) + self.remaining

    def total_power(self) -> float:
        return float(np.trace(self.covariance()).real)

    def scaled(self, c: float) -> "BeamformingSolution":
        return BeamformingSolution([c * W for W in self.unicast], [c * W for W in self.multicast],
                                   c * self.remaining)

    def copy(self) -> "BeamformingSolution":
        return BeamformingSolution([W.copy() for W in self.unicast], [W.copy() for W in self.multicast],
                                   self.remaining.copy())


@dataclass
class RateReport:
    scheme: str
    multicast_per_user: np.ndarray  # (Q, K)
    multicast: np.ndarray  # (Q,)
    unicast: np.ndarray  # (K,)
    counts_multicast: bool = True

    @property
    def throughput(self) -> float:
        mc = float(self.multicast.sum()) if self.counts_multicast else 0.0
        return mc + float(self.unicast.sum())

    def to_json(self) -> str:
        return json.dumps({
            "scheme": self.scheme,
            "multicast_per_user": self.multicast_per_user.tolist(),
            "multicast": self.multicast.tolist(),
            "unicast": self.unicast.tolist(),
            "throughput": self.throughput,
        })


def gains(h: np.ndarray, W: np.ndarray) -> np.ndarray:
    """h_k^H W h_k for every row of h."""
    return np.einsum("kn,nm,km->k", h.conj(), W, h).real


def eig_decompose_sensing(Rr: np.ndarray, q_streams: int) -> tuple[list[np.ndarray], np.ndarray]:
    """Split a sensing covariance into its top-``q_streams`` eigenbeams and the rest.

    Eigenvalues are sorted in descending order; ties are ordered by the real
    parts of the eigenvectors (descending, lexicographic) so the split is
    reproducible.
    """
    Rr = 0.5 * (Rr + Rr.conj().T)
    n = Rr.shape[0]
    lam, V = np.linalg.eigh(Rr)
    lam = np.clip(lam, 0.0, None)
    # fix each eigenvector's phase so its largest-magnitude entry is real positive
    piv = np.argmax(np.abs(V), axis=0)
    ph = V[piv, np.arange(n)]
    V = V * (np.abs(ph) / ph)[None, :]
    tol = 1e-12 * max(1.0, lam.max(initial=0.0))
    keys = [(-round(l / tol) if tol else -l, tuple(-V[:, i].real)) for i, l in enumerate(lam)]
    order = sorted(range(n), key=lambda i: keys[i])
    beams = []
    for q in range(q_streams):
        if q < n:
            i = order[q]
            beams.append(lam[i] * np.outer(V[:, i], V[:, i].conj()))
        else:
            beams.append(np.zeros((n, n), dtype=complex))
    rest = order[q_streams:]
    remainder = (V[:, rest] * lam[rest]) @ V[:, rest].conj().T if rest else np.zeros((n, n), dtype=complex)
    return beams, remainder


def principal_component(W: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenpair of a Hermitian matrix with a deterministic phase."""
    lam, V = np.linalg.eigh(0.5 * (W + W.conj().T))
    v = V[:, -1]
    p = v[np.argmax(np.abs(v))]
    return float(lam[-1]), v * (abs(p) / p)


def unicast_interference(sol: BeamformingSolution, ch: ChannelSet, remainder_weight: float):
    """Per-user desired gain and interference-plus-noise of the unicast stream."""
    h = ch.channels
    G = np.array([gains(h, W) for W in sol.unicast])  # (K_streams, K_users)
    desired = np.diag(G).copy()
    interf = G.sum(axis=0) - desired + remainder_weight * gains(h, sol.remaining) + ch.noise_power
    return desired, interf


def _multicast_rates(sol: BeamformingSolution, ch: ChannelSet) -> tuple[np.ndarray, np.ndarray]:
    K = ch.n_users
    if not sol.multicast:
        return np.zeros((0, K)), np.zeros(0)
    Gm = np.array([gains(ch.channels, W) for W in sol.multicast])  # (Q, K)
    per_user = np.log2(1 + np.maximum(Gm, 0) / multicast_denominators(sol, ch))
    return per_user, per_user.min(axis=1)


def multicast_denominators(sol: BeamformingSolution, ch: ChannelSet) -> np.ndarray:
    """Interference-plus-noise seen by each multicast stream at each user, (Q, K)."""
    h = ch.channels
    K = ch.n_users
    if not sol.multicast:
        return np.zeros((0, K))
    Gm = np.array([gains(h, W) for W in sol.multicast])
    base = sum((gains(h, W) for W in sol.unicast), np.zeros(K)) + gains(h, sol.remaining) + ch.noise_power
    return np.cumsum(Gm[::-1], axis=0)[::-1] - Gm + base


def noma_rates(sol: BeamformingSolution, ch: ChannelSet, scheme: str = "noma") -> RateReport:
    """Multicast streams decoded by SIC first, then the unicast stream.

    The multicast interference term counts every unicast stream, the user's
    own included.  ``scheme='noma_senic'`` reports the same rates but leaves
    the multicast rates out of the throughput.
    """
    per_user, mc = _multicast_rates(sol, ch)
    desired, interf = unicast_interference(sol, ch, 1.0)
    uc = np.log2(1 + np.maximum(desired, 0) / interf)
    return RateReport(scheme, per_user, mc, uc, counts_multicast=(scheme != "noma_senic"))


def senic_rates(unicast, Rr: np.ndarray, ch: ChannelSet, p: int) -> RateReport:
    """Unicast-only rates with the sensing signal either cancelled (p=0) or not (p=1)."""
    if p not in (0, 1):
        raise ValueError("p must be 0 or 1")
    sol = BeamformingSolution(list(unicast), [], Rr)
    desired, interf = unicast_interference(sol, ch, float(p))
    uc = np.log2(1 + np.maximum(desired, 0) / interf)
    K = ch.n_users
    return RateReport("ideal_senic" if p == 0 else "no_senic", np.zeros((0, K)), np.zeros(0), uc)


def com_only_rates(unicast, ch: ChannelSet) -> RateReport:
    n = ch.n_antennas
    rep = senic_rates(unicast, np.zeros((n, n), dtype=complex), ch, 0)
    rep.scheme = "com_only"
    return rep


def scheme_rates(sol: BeamformingSolution, ch: ChannelSet, scheme: str) -> RateReport:
    if scheme in ("noma", "noma_senic"):
        return noma_rates(sol, ch, scheme)
    if scheme == "ideal_senic":
        return senic_rates(sol.unicast, sol.sensing_covariance(), ch, 0)
    if scheme == "no_senic":
        return senic_rates(sol.unicast, sol.sensing_covariance(), ch, 1)
    if scheme == "com_only":
        return com_only_rates(sol.unicast, ch)
    raise ValueError(f"unknown scheme {scheme!r}")


def telescoping_identity_check(sol: BeamformingSolution, ch: ChannelSet) -> tuple[float, float]:
    """Single-user sum of SIC stage rates versus the collapsed single log form."""
    if ch.n_users != 1:
        raise ValueError("telescoping identity needs a single user")
    rep = noma_rates(sol, ch)
    lhs = float(rep.multicast_per_user[:, 0].sum() + rep.unicast[0])
    h = ch.channels
    Rx = sol.covariance()
    rem = gains(h, sol.remaining)[0]
    rhs = float(np.log2(1 + gains(h, Rx - sol.remaining)[0] / (rem + ch.noise_power)))
    return lhs, rhs


def rank_one_ratio(W: np.ndarray) -> float:
    tr = float(np.trace(W).real)
    lam = float(np.linalg.eigvalsh(0.5 * (W + W.conj().T))[-1])
    return (tr - lam) / max(tr, 1e-12)


def penalty(mats) -> float:
    """Sum over matrices of nuclear norm minus spectral norm (PSD inputs)."""
    total = 0.0
    for W in mats:
        lam = np.linalg.eigvalsh(0.5 * (W + W.conj().T))
        total += float(np.abs(lam).sum() - np.abs(lam).max(initial=0.0))
    return total
