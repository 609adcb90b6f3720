"""A small conic-program builder on top of Clarabel.

Variables are real scalars and complex Hermitian matrices.  A Hermitian
``n x n`` matrix occupies ``n*n`` real slots: the diagonal first, then the
real and imaginary parts of each strictly-upper entry.  Every functional the
builder produces is real-valued.  Positive semidefiniteness of ``X = A + jB``
is imposed through the real embedding ``[[A, -B], [B, A]]``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import clarabel
import numpy as np
import scipy.sparse as sp

DEFAULT_TOL = 1e-8

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"
ITERATION_LIMIT = "iteration-limit"


class Expr:
    """Vector-valued real affine expression ``M x + c``.

    ``terms`` holds ``(row_offset, col_offset, block)`` with dense blocks.
    """

    __slots__ = ("terms", "const")

    def __init__(self, terms, const):
        self.terms = terms
        self.const = np.atleast_1d(np.asarray(const, dtype=float))

    @property
    def size(self) -> int:
        return len(self.const)

    @staticmethod
    def constant(value) -> "Expr":
        value = np.atleast_1d(np.asarray(value))
        if np.iscomplexobj(value):
            if np.any(value.imag != 0):
                raise ValueError("complex-valued constant in a real expression")
            value = value.real
        return Expr([], value.astype(float))

    def _coerce(self, other) -> "Expr":
        if isinstance(other, Expr):
            return other
        c = Expr.constant(other)
        if c.size == 1 and self.size != 1:
            c = Expr([], np.full(self.size, c.const[0]))
        return c

    def __add__(self, other):
        other = self._coerce(other)
        if other.size != self.size:
            if self.size == 1 and not self.terms:
                return Expr.constant(np.full(other.size, self.const[0])) + other
            raise ValueError(f"size mismatch {self.size} vs {other.size}")
        return Expr(self.terms + other.terms, self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return Expr([(r, c, -b) for r, c, b in self.terms], -self.const)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, k):
        if isinstance(k, Expr):
            raise TypeError("only scalar multiplication is affine")
        k = float(k)
        return Expr([(r, c, k * b) for r, c, b in self.terms], k * self.const)

    __rmul__ = __mul__

    def __truediv__(self, k):
        return self * (1.0 / float(k))

    def broadcast(self, vec) -> "Expr":
        """For a scalar expression e, the vector expression ``vec * e``."""
        if self.size != 1:
            raise ValueError("broadcast needs a scalar expression")
        vec = np.asarray(vec, dtype=float).reshape(-1, 1)
        return Expr([(0, c, vec @ b) for _, c, b in self.terms], vec[:, 0] * self.const[0])

    def dense(self, n_vars: int) -> np.ndarray:
        m = np.zeros((self.size, n_vars))
        for r, c, b in self.terms:
            m[r:r + b.shape[0], c:c + b.shape[1]] += b
        return m

    def value(self, x: np.ndarray) -> np.ndarray:
        out = self.const.copy()
        for r, c, b in self.terms:
            out[r:r + b.shape[0]] += b @ x[c:c + b.shape[1]]
        return out


def vstack(exprs) -> Expr:
    terms, consts, row = [], [], 0
    for e in exprs:
        terms.extend((r + row, c, b) for r, c, b in e.terms)
        consts.append(e.const)
        row += e.size
    return Expr(terms, np.concatenate(consts) if consts else np.zeros(0))


def esum(exprs, size: int = 1) -> Expr:
    out = Expr([], np.zeros(size))
    for e in exprs:
        out = out + e
    return out


# ------------------------------------------------------------- Hermitian maps

@lru_cache(maxsize=None)
def _herm_layout(n: int):
    """Index tables for the real parametrization of an n x n Hermitian matrix."""
    iu, ju = np.triu_indices(n, 1)
    m = len(iu)
    re_idx = n + 2 * np.arange(m)
    im_idx = re_idx + 1
    return iu, ju, re_idx, im_idx


def hermitian_coefficients(C: np.ndarray) -> np.ndarray:
    """Real row ``g`` with ``g @ params(X) == tr(C X)`` for Hermitian ``C``.

    Works on a stack of matrices ``(..., n, n)``.
    """
    C = np.asarray(C)
    n = C.shape[-1]
    if np.iscomplexobj(C) and not np.allclose(C, np.conj(np.swapaxes(C, -1, -2)),
                                              atol=1e-12 * (1 + np.abs(C).max())):
        raise ValueError("coefficient matrix must be Hermitian for a real functional")
    iu, ju, re_idx, im_idx = _herm_layout(n)
    out = np.zeros(C.shape[:-2] + (n * n,))
    out[..., :n] = np.real(np.diagonal(C, axis1=-2, axis2=-1))
    cji = C[..., ju, iu]
    out[..., re_idx] = 2 * np.real(cji)
    out[..., im_idx] = -2 * np.imag(cji)
    return out


def quadratic_coefficients(vectors: np.ndarray) -> np.ndarray:
    """Rows ``g_l`` with ``g_l @ params(X) == a_l^H X a_l`` for each row a_l."""
    a = np.atleast_2d(vectors)
    n = a.shape[-1]
    iu, ju, re_idx, im_idx = _herm_layout(n)
    out = np.zeros((a.shape[0], n * n))
    out[:, :n] = np.abs(a) ** 2
    c = np.conj(a[:, iu]) * a[:, ju]
    out[:, re_idx] = 2 * c.real
    out[:, im_idx] = -2 * c.imag
    return out


def params_to_matrix(p: np.ndarray, n: int) -> np.ndarray:
    iu, ju, re_idx, im_idx = _herm_layout(n)
    X = np.zeros((n, n), dtype=complex)
    X[np.arange(n), np.arange(n)] = p[:n]
    X[iu, ju] = p[re_idx] + 1j * p[im_idx]
    X[ju, iu] = p[re_idx] - 1j * p[im_idx]
    return X


def matrix_to_params(X: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    iu, ju, re_idx, im_idx = _herm_layout(n)
    p = np.zeros(n * n)
    p[:n] = np.real(np.diag(X))
    p[re_idx] = X[iu, ju].real
    p[im_idx] = X[iu, ju].imag
    return p


@lru_cache(maxsize=None)
def _psd_embedding(n: int) -> np.ndarray:
    """Matrix E with ``E @ params(X) == svec([[A, -B], [B, A]])`` (Clarabel ordering)."""
    iu, ju, re_idx, im_idx = _herm_layout(n)
    re_of = {}
    im_of = {}
    for i, j, r, m in zip(iu, ju, re_idx, im_idx):
        re_of[(i, j)] = r
        im_of[(i, j)] = m
    d = 2 * n
    rows = d * (d + 1) // 2
    E = np.zeros((rows, n * n))
    s2 = math.sqrt(2.0)
    k = 0
    # upper triangle, column-major
    for c in range(d):
        for r in range(c + 1):
            scale = 1.0 if r == c else s2
            if r < n and c < n or r >= n and c >= n:
                i, j = r % n, c % n
                if i == j:
                    E[k, i] = scale
                else:
                    E[k, re_of[(min(i, j), max(i, j))]] = scale
            else:
                # top-right block is -B with B = Im(X)
                i, j = r, c - n
                if i != j:
                    if i < j:
                        E[k, im_of[(i, j)]] = -scale
                    else:
                        E[k, im_of[(j, i)]] = scale
            k += 1
    return E


# ---------------------------------------------------------------- variables

@dataclass
class ScalarVar:
    name: str
    index: int

    @property
    def expr(self) -> Expr:
        return Expr([(0, self.index, np.ones((1, 1)))], [0.0])


@dataclass
class VectorVar:
    name: str
    offset: int
    n: int

    @property
    def expr(self) -> Expr:
        return Expr([(0, self.offset, np.eye(self.n))], np.zeros(self.n))


@dataclass
class HermitianVar:
    name: str
    offset: int
    n: int
    psd: bool = True

    @property
    def n_params(self) -> int:
        return self.n * self.n

    def _row(self, g: np.ndarray) -> Expr:
        g = np.atleast_2d(g)
        return Expr([(0, self.offset, g)], np.zeros(g.shape[0]))

    def inner(self, C: np.ndarray) -> Expr:
        """tr(C X) for Hermitian C (or a stack of them)."""
        return self._row(hermitian_coefficients(C))

    def quad(self, a: np.ndarray) -> Expr:
        """a^H X a; a 2-D input gives one entry per row."""
        return self._row(quadratic_coefficients(a))

    def trace(self) -> Expr:
        g = np.zeros((1, self.n_params))
        g[0, :self.n] = 1.0
        return self._row(g)


@dataclass
class SolveResult:
    status: str
    objective: float = math.nan
    values: dict = field(default_factory=dict)
    iterations: int = 0
    solve_time: float = 0.0
    raw_status: str = ""
    x: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    def __getitem__(self, name):
        return self.values[name]


_CONE_ORDER = ("zero", "nonneg", "soc", "exp", "psd")


class ConicProgram:
    """Builder for ``min c^T x`` over zero/nonneg/SOC/exp/PSD cones."""

    def __init__(self):
        self.n_vars = 0
        self.variables: dict[str, ScalarVar | HermitianVar] = {}
        self._blocks: list[tuple[str, Expr, int]] = []
        self._objective = Expr([], [0.0])
        self._sense = 1.0
        self._squares: list[tuple[float, Expr]] = []

    # declarations
    def scalar(self, name: str, nonneg: bool = False) -> Expr:
        v = ScalarVar(name, self.n_vars)
        self._declare(v, 1)
        if nonneg:
            self.add_nonneg(v.expr)
        return v.expr

    def vector(self, name: str, n: int) -> Expr:
        v = VectorVar(name, self.n_vars, n)
        self._declare(v, n)
        return v.expr

    def hermitian(self, name: str, n: int, psd: bool = True) -> HermitianVar:
        v = HermitianVar(name, self.n_vars, n, psd)
        self._declare(v, n * n)
        if psd:
            E = _psd_embedding(n)
            self._blocks.append(("psd", Expr([(0, v.offset, E)], np.zeros(E.shape[0])), 2 * n))
        return v

    def _declare(self, v, width):
        if v.name in self.variables:
            raise ValueError(f"duplicate variable {v.name!r}")
        self.variables[v.name] = v
        self.n_vars += width

    # constraints
    def _check(self, e: Expr) -> Expr:
        if not isinstance(e, Expr):
            e = Expr.constant(e)
        for _, c, b in e.terms:
            if c + b.shape[1] > self.n_vars:
                raise ValueError("expression references an undeclared variable")
        return e

    def add_eq(self, e: Expr):
        """e == 0 (componentwise)."""
        self._blocks.append(("zero", self._check(e), 0))

    def add_nonneg(self, e: Expr):
        """e >= 0 (componentwise)."""
        self._blocks.append(("nonneg", self._check(e), 0))

    def add_soc(self, t: Expr, x: Expr):
        """||x||_2 <= t."""
        e = vstack([self._check(t), self._check(x)])
        self._blocks.append(("soc", e, e.size))

    def add_rotated_soc(self, u: Expr, v: Expr, x: Expr):
        """||x||^2 <= u * v with u, v >= 0."""
        self.add_soc(u + v, vstack([2.0 * x, u - v]))

    def add_exp(self, x: Expr, y: Expr, z: Expr):
        """y * exp(x / y) <= z, y > 0."""
        e = vstack([self._check(x), self._check(y), self._check(z)])
        self._blocks.append(("exp", e, 3))

    def add_log_hypograph(self, t: Expr, u: Expr):
        """t <= ln(u)."""
        self.add_exp(t, Expr.constant(1.0), u)

    def minimize(self, e: Expr):
        self._objective, self._sense = self._check(e), 1.0

    def maximize(self, e: Expr):
        self._objective, self._sense = self._check(e), -1.0

    def minimize_sum_squares(self, residuals: Expr, weight: float = 1.0, linear: Expr | None = None,
                             name: str = "_resid"):
        """Minimise ``weight * ||residuals||^2 (+ linear)`` as a native quadratic objective.

        The residuals get their own variable block tied by equalities, so the
        quadratic form is diagonal instead of a Gram matrix.
        """
        if weight <= 0:
            raise ValueError("weight must be positive")
        residuals = self._check(residuals)
        r = self.vector(name, residuals.size)
        self.add_eq(r - residuals)
        self.minimize(Expr.constant(0.0) if linear is None else linear)
        self._squares = [(float(weight), self.variables[name])]

    def _quadratic_part(self):
        """Diagonal (P, const) of the squared-residual objective terms."""
        diag = np.zeros(self.n_vars)
        for w, v in self._squares:
            diag[v.offset:v.offset + v.n] += 2 * w
        return diag

    # assembly
    def _assemble(self):
        blocks = sorted(enumerate(self._blocks), key=lambda ib: (_CONE_ORDER.index(ib[1][0]), ib[0]))
        mats, rhs, cones = [], [], []
        pending = None
        for _, (kind, e, dim) in blocks:
            M = e.dense(self.n_vars)
            mats.append(-M)
            rhs.append(e.const)
            if kind in ("zero", "nonneg"):
                if pending and pending[0] == kind:
                    pending[1] += e.size
                else:
                    if pending:
                        cones.append(_make_cone(*pending))
                    pending = [kind, e.size]
                continue
            if pending:
                cones.append(_make_cone(*pending))
                pending = None
            cones.append(_make_cone(kind, dim))
        if pending:
            cones.append(_make_cone(*pending))
        A = sp.csc_matrix(np.vstack(mats)) if mats else sp.csc_matrix((0, self.n_vars))
        b = np.concatenate(rhs) if rhs else np.zeros(0)
        q = self._sense * self._objective.dense(self.n_vars)[0]
        return A, b, q, cones

    def dump(self) -> str:
        """Human-readable listing of variables and cone blocks."""
        lines = [f"variables: {self.n_vars} real slots"]
        for v in self.variables.values():
            if isinstance(v, ScalarVar):
                lines.append(f"  scalar {v.name} @ {v.index}")
            elif isinstance(v, VectorVar):
                lines.append(f"  vector {v.name} n={v.n} @ {v.offset}")
            else:
                lines.append(f"  hermitian {v.name} n={v.n} @ {v.offset}..{v.offset + v.n_params}")
        sense = "min" if self._sense > 0 else "max"
        lines.append(f"objective: {sense} (const {self._objective.const[0]:.6g})")
        for kind, e, dim in self._blocks:
            lines.append(f"  cone {kind} rows={e.size}" + (f" dim={dim}" if dim else ""))
        return "\n".join(lines)

    # readback
    def values_from(self, x: np.ndarray) -> dict:
        out = {}
        for v in self.variables.values():
            if isinstance(v, ScalarVar):
                out[v.name] = float(x[v.index])
            elif isinstance(v, VectorVar):
                out[v.name] = x[v.offset:v.offset + v.n].copy()
            else:
                out[v.name] = params_to_matrix(x[v.offset:v.offset + v.n_params], v.n)
        return out


def _make_cone(kind: str, dim: int):
    if kind == "zero":
        return clarabel.ZeroConeT(dim)
    if kind == "nonneg":
        return clarabel.NonnegativeConeT(dim)
    if kind == "soc":
        return clarabel.SecondOrderConeT(dim)
    if kind == "exp":
        return clarabel.ExponentialConeT()
    if kind == "psd":
        return clarabel.PSDTriangleConeT(dim)
    raise ValueError(kind)


_STATUS = {
    "Solved": OPTIMAL,
    "AlmostSolved": OPTIMAL,
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
    "DualInfeasible": NUMERICAL_FAILURE,
    "AlmostDualInfeasible": NUMERICAL_FAILURE,
    "MaxIterations": ITERATION_LIMIT,
    "MaxTime": ITERATION_LIMIT,
}


def _normalize_linear_rows(A, b, cones):
    """Rescale equality / inequality rows to unit max-coefficient.

    Channel-gain rows are several orders of magnitude larger than pattern
    rows; the backend's own equilibration does not always recover from that.
    Positive row scaling leaves the zero and nonnegative cones unchanged.
    """
    n_lin = 0
    for c in cones:
        if isinstance(c, (clarabel.ZeroConeT, clarabel.NonnegativeConeT)):
            n_lin += c.dim
        else:
            break
    if n_lin == 0:
        return A, b
    A = A.tocsr(copy=True)
    top = np.abs(A[:n_lin]).max(axis=1).toarray().ravel()
    scale = np.ones(A.shape[0])
    scale[:n_lin] = np.where(top > 0, 1.0 / np.where(top > 0, top, 1.0), 1.0)
    return sp.csc_matrix(sp.diags(scale) @ A), b * scale


# settings for the second attempt when the first stops short of "Solved"
_CAREFUL = dict(iterative_refinement_reltol=1e-14, iterative_refinement_abstol=1e-14,
                iterative_refinement_max_iter=50, equilibrate_max_iter=50, max_step_fraction=0.95)
_RANK = {"Solved": 0, "AlmostSolved": 1}


def _settings(tol: float, max_iter: int, careful: bool):
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.tol_ktratio = min(1e-6, tol * 1e2)
    settings.max_iter = max_iter
    settings.max_threads = 1
    if careful:
        for k, v in _CAREFUL.items():
            setattr(settings, k, v)
    return settings


def _run(P, q, A, b, cones, settings):
    try:
        sol = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
    except Exception as exc:  # backend panics surface as a status
        return None, f"exception: {exc}"
    return sol, str(sol.status)


def solve(prog: ConicProgram, tol: float = DEFAULT_TOL, max_iter: int = 200, retry: bool = True) -> SolveResult:
    """Solve ``prog``; failures come back as statuses, never as exceptions.

    When the first attempt ends anywhere short of "Solved" and ``retry`` is
    set, a second attempt with tighter iterative refinement and shorter steps
    is made and the better of the two kept.
    """
    A, b, q, cones = prog._assemble()
    A, b = _normalize_linear_rows(A, b, cones)
    pdiag = prog._quadratic_part()
    P = sp.diags(pdiag).tocsc()
    t0 = time.perf_counter()
    sol, raw = _run(P, q, A, b, cones, _settings(tol, max_iter, careful=False))
    iters = int(sol.iterations) if sol is not None else 0
    if retry and raw != "Solved":
        sol2, raw2 = _run(P, q, A, b, cones, _settings(tol, 2 * max_iter, careful=True))
        iters += int(sol2.iterations) if sol2 is not None else 0
        if _RANK.get(raw2, 9) < _RANK.get(raw, 9):
            sol, raw = sol2, raw2
    status = _STATUS.get(raw, NUMERICAL_FAILURE)
    res = SolveResult(status, raw_status=raw, iterations=iters, solve_time=time.perf_counter() - t0)
    if status == OPTIMAL:
        x = np.asarray(sol.x)
        res.x = x
        quad = 0.5 * float(pdiag @ (x * x))
        res.objective = float(prog._sense * (q @ x) + prog._objective.const[0]) + quad
        res.values = prog.values_from(x)
    return res


def hermitian_quadratic_epigraph(prog: ConicProgram, residuals: Expr, bound, scale: float = 1.0):
    """Constrain ``sum(residuals**2) <= bound``.

    A constant bound becomes a plain SOC with radius sqrt(bound); an affine
    bound uses the rotated cone ``||(2 r, b/s - s)|| <= b/s + s``.
    """
    if not isinstance(residuals, Expr):
        residuals = Expr.constant(residuals)
    if not isinstance(bound, Expr):
        bound_arr = np.asarray(bound)
        if np.iscomplexobj(bound_arr):
            raise ValueError("bound must be real")
        bound = float(bound_arr)
        if bound < 0:
            prog.add_nonneg(Expr.constant(bound))  # forces infeasibility
            return
        prog.add_soc(Expr.constant(math.sqrt(bound)), residuals)
        return
    u = bound / scale
    prog.add_soc(u + scale, vstack([2.0 * residuals, u - scale]))
