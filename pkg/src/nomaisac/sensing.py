"""Transmit beampattern, the sensing-only reference design and the matching loss."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import conic
from .scenario import AngleGrid, SystemConfig, build_desired_pattern


class SolverFailure(RuntimeError):
    def __init__(self, status: str, msg: str = ""):
        super().__init__(f"{msg} (status: {status})" if msg else status)
        self.status = status


@dataclass(frozen=True)
class BeampatternSpec:
    grid: AngleGrid
    phi: np.ndarray
    reference_cov: np.ndarray
    reference_pattern: np.ndarray
    delta_star: float
    pt: float
    _coeffs: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def n_antennas(self) -> int:
        return self.reference_cov.shape[0]

    @property
    def coeffs(self) -> np.ndarray:
        """(L, N*N) rows mapping Hermitian parameters to pattern values."""
        if self._coeffs is None:
            object.__setattr__(self, "_coeffs", conic.quadratic_coefficients(self.grid.steering))
        return self._coeffs


def beampattern(cov: np.ndarray, steering: np.ndarray) -> np.ndarray:
    """a_l^H R a_l for every row of ``steering``; tiny negatives clipped to zero."""
    cov = np.asarray(cov)
    steering = np.atleast_2d(steering)
    if cov.shape != (steering.shape[1], steering.shape[1]):
        raise ValueError(f"covariance {cov.shape} does not match steering length {steering.shape[1]}")
    vals = np.einsum("ln,nm,lm->l", steering.conj(), cov, steering).real
    floor = -1e-9 * max(1.0, float(np.abs(np.trace(cov))))
    if np.any(vals < floor):
        raise ValueError("beampattern is negative; covariance is not PSD")
    return np.maximum(vals, 0.0)


def beampattern_value(cov: np.ndarray, steering: np.ndarray) -> float:
    return float(beampattern(cov, np.atleast_2d(steering))[0])


def _reference_program(grid: AngleGrid, phi: np.ndarray):
    """Sensing-only least squares in units of the power budget (tr R = 1)."""
    n = grid.steering.shape[1]
    prog = conic.ConicProgram()
    R = prog.hermitian("R", n)
    delta = prog.scalar("delta", nonneg=True)
    prog.add_eq(R.trace() - 1.0)
    prog.minimize_sum_squares(delta.broadcast(phi) - R.quad(grid.steering), 1.0 / grid.size)
    return prog


def solve_reference_covariance(grid: AngleGrid, phi: np.ndarray, pt: float,
                               tol: float = conic.DEFAULT_TOL) -> tuple[np.ndarray, float, float]:
    """Least-squares pattern matching over covariances with ``tr(R) = pt``.

    Returns ``(R, delta, loss)``.  Solved with a native quadratic objective
    because a norm epigraph sits at the cone apex whenever the pattern can
    be matched exactly (uniform ``phi``), which costs accuracy.
    """
    phi = np.asarray(phi, dtype=float)
    prog = _reference_program(grid, phi)
    res = conic.solve(prog, tol)
    if not res.ok:
        raise SolverFailure(res.status, "reference covariance")
    R = pt * res["R"]
    delta = pt * max(res["delta"], 0.0)
    loss = float(np.mean((delta * phi - beampattern(R, grid.steering)) ** 2))
    return R, delta, loss


def make_spec(grid: AngleGrid, phi: np.ndarray, pt: float, tol: float = conic.DEFAULT_TOL) -> BeampatternSpec:
    R, delta, _ = solve_reference_covariance(grid, phi, pt, tol)
    ref = beampattern(R, grid.steering)
    return BeampatternSpec(grid, np.asarray(phi, float), R, ref, delta, pt)


def spec_from_config(cfg: SystemConfig, tol: float = conic.DEFAULT_TOL) -> BeampatternSpec:
    grid, phi = build_desired_pattern(cfg)
    return make_spec(grid, phi, cfg.pt_watts, tol)


def reference_objective(cov: np.ndarray, delta: float, spec: BeampatternSpec) -> float:
    """Value of the sensing-only least-squares objective at ``(cov, delta)``."""
    return float(np.mean((delta * spec.phi - beampattern(cov, spec.grid.steering)) ** 2))


def matching_loss(cov: np.ndarray, spec: BeampatternSpec) -> float:
    """Mean squared gap between the pattern of ``cov`` and the reference pattern."""
    p = beampattern(cov, spec.grid.steering)
    return float(np.mean((spec.reference_pattern - p) ** 2))


def loss_residuals(spec: BeampatternSpec, cov_terms, unit: float = 1.0) -> conic.Expr:
    """Affine residuals ``ref_l / unit - a_l^H (sum of cov_terms) a_l`` for a conic program.

    ``cov_terms`` is an iterable of :class:`conic.HermitianVar` summing to the
    transmit covariance expressed in multiples of ``unit``.
    """
    G = spec.coeffs
    terms = [(0, v.offset, -G) for v in cov_terms]
    return conic.Expr(terms, spec.reference_pattern / unit)


def add_loss_cap(prog: conic.ConicProgram, spec: BeampatternSpec, cov_terms, eps: float):
    """Mean squared matching error of the summed covariance at most ``eps``."""
    L = spec.grid.size
    conic.hermitian_quadratic_epigraph(prog, loss_residuals(spec, cov_terms), L * eps)


def add_loss_objective(prog: conic.ConicProgram, spec: BeampatternSpec, cov_terms, unit: float = 1.0) -> None:
    """Minimise the mean squared matching error of the summed covariance (in ``unit`` scale)."""
    prog.minimize_sum_squares(loss_residuals(spec, cov_terms, unit), 1.0 / spec.grid.size)
