"""Log-barrier interior-point solver for linear objectives over Hermitian
matrices with log-det and linear constraints.

The variable is a Hermitian ``n x n`` matrix ``X`` held in an orthonormal
real basis (``n**2`` coordinates), optionally with one auxiliary scalar
``t`` for epigraph (max-min) formulations. Every log-det term must be of
the form ``log2 det(offset + op(X))`` with ``op`` linear and mapping PSD
matrices to PSD matrices; the barrier keeps ``X`` strictly positive
definite, which keeps every log-det argument in its domain.

Two wrappers build the problems used by the beamforming algorithms:
:func:`solve_p1a` (minimum-power covariance at fixed phases) and
:func:`solve_p1lw3` (relaxed max-min backscatter-link design).
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .linalg import NumericalFailure, cholesky_psd
from .types import Status

__all__ = [
    "HermitianBasis",
    "LogDetTerm",
    "LogDetConstraint",
    "LinearConstraint",
    "DetmaxProblem",
    "SolveSettings",
    "SolveResult",
    "barrier_solve",
    "kkt_residual",
    "p1a_problem",
    "solve_p1a",
    "p1lw3_problem",
    "lw3_constraint_values",
    "solve_p1lw3",
]

_LN2 = math.log(2.0)
_CENTER_TOL = 1e-10
_PURE_NEWTON = 1e-4


class HermitianBasis:
    """Orthonormal basis of n x n Hermitian matrices under ``<A, B> = tr(AB)``.

    Coordinates are ordered: the ``n`` diagonal entries, then for each
    ``k < l`` a symmetric and an antisymmetric element. Each basis matrix
    has at most two nonzero entries, stored as ``rows``, ``cols``, ``coef``
    (shape ``(P, 2)``).
    """

    def __init__(self, n):
        self.n = n
        r = 1.0 / math.sqrt(2.0)
        rows, cols, coef = [], [], []
        for k in range(n):
            rows.append((k, k))
            cols.append((k, k))
            coef.append((1.0, 0.0))
        for k in range(n):
            for l in range(k + 1, n):
                rows.append((k, l))
                cols.append((l, k))
                coef.append((r, r))
                rows.append((k, l))
                cols.append((l, k))
                coef.append((1j * r, -1j * r))
        self.rows = np.array(rows, dtype=int).reshape(-1, 2)
        self.cols = np.array(cols, dtype=int).reshape(-1, 2)
        self.coef = np.array(coef, dtype=complex).reshape(-1, 2)
        self.size = n * n
        self._flat = self.rows * n + self.cols

    def to_matrix(self, x):
        X = np.zeros(self.n * self.n, dtype=complex)
        x = np.asarray(x, dtype=float)
        for u in range(2):
            np.add.at(X, self._flat[:, u], self.coef[:, u] * x)
        return X.reshape(self.n, self.n)

    def coords(self, X):
        """``x_p = tr(E_p X)``; for Hermitian ``X`` this inverts :meth:`to_matrix`."""
        X = np.asarray(X, dtype=complex)
        val = self.coef[:, 0] * X[self.cols[:, 0], self.rows[:, 0]]
        val = val + self.coef[:, 1] * X[self.cols[:, 1], self.rows[:, 1]]
        return np.real(val)

    def matrices(self, idx):
        """Stack of basis matrices for indices ``idx``, shape ``(len(idx), n, n)``."""
        idx = np.asarray(idx, dtype=int)
        E = np.zeros((idx.size, self.n * self.n), dtype=complex)
        for u in range(2):
            np.add.at(E, (np.arange(idx.size), self._flat[idx, u]), self.coef[idx, u])
        return E.reshape(idx.size, self.n, self.n)

    def images(self, op, chunk=256):
        """``op(E_p)`` for every basis element, flattened to shape ``(P, N*N)``."""
        out = []
        for start in range(0, self.size, chunk):
            idx = np.arange(start, min(start + chunk, self.size))
            img = np.asarray(op(self.matrices(idx)), dtype=complex)
            out.append(img.reshape(idx.size, -1))
        return np.concatenate(out, axis=0)

    def logdet_hessian(self, Xi):
        """``H[p, q] = tr(Xi E_p Xi E_q)``, the Hessian of ``-log det X`` at ``X = Xi^{-1}``."""
        n = self.n
        # M[(b, c), (d, a)] = Xi[a, b] Xi[c, d], so H = E M E^T over the two-entry basis
        M = np.einsum("ab,cd->bcda", Xi, Xi).reshape(n * n, n * n)
        f0, f1 = self._flat[:, 0], self._flat[:, 1]
        k0, k1 = self.coef[:, 0], self.coef[:, 1]
        EM = k0[:, None] * M[f0] + k1[:, None] * M[f1]
        H = np.real(EM[:, f0] * k0[None, :] + EM[:, f1] * k1[None, :])
        return 0.5 * (H + H.T)


# -- declarative problem ------------------------------------------------------


@dataclass
class LogDetTerm:
    """``weight * log2 det(offset + op(X))``.

    ``op`` must be linear, PSD-preserving, and accept a stack of matrices
    (leading axes broadcast). ``offset`` defaults to the identity of size
    ``dim``.
    """

    op: Callable
    dim: int
    weight: float = 1.0
    offset: np.ndarray = None


@dataclass
class LogDetConstraint:
    """``sum(terms) - aux_coef * t >= rhs``."""

    terms: list
    rhs: float
    aux_coef: float = 0.0
    name: str = ""


@dataclass
class LinearConstraint:
    """``tr(C X) - aux_coef * t  (>= or =)  rhs`` with Hermitian ``C``."""

    C: np.ndarray
    rhs: float
    sense: str = ">="
    aux_coef: float = 0.0
    name: str = ""


@dataclass
class DetmaxProblem:
    """Optimize ``tr(C X) + aux_objective * t`` over Hermitian PSD ``X``.

    ``diagonal_fixed`` pins ``X[k, k]``. ``x0`` is an optional strictly
    positive-definite starting matrix (it need not satisfy the inequality
    constraints; phase I takes care of that).
    """

    variable_dim: int
    objective: np.ndarray = None
    sense: str = "min"
    aux_objective: float = 0.0
    logdet_constraints: list = field(default_factory=list)
    linear_constraints: list = field(default_factory=list)
    diagonal_fixed: np.ndarray = None
    x0: np.ndarray = None
    psd: bool = True

    def __post_init__(self):
        if not self.psd:
            raise ValueError("only PSD-constrained problems are supported")
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")

    @property
    def n(self):
        return self.variable_dim

    @property
    def has_aux(self):
        return self.aux_objective != 0.0 or any(
            c.aux_coef != 0.0 for c in self.logdet_constraints + self.linear_constraints
        )


@dataclass
class SolveSettings:
    barrier_mu: float = 10.0
    tol: float = 1e-7
    max_newton: int = 200
    linesearch_beta: float = 0.5
    linesearch_alpha: float = 0.01
    trace_cap: float = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.barrier_mu > 1:
            raise ValueError("barrier_mu must exceed 1")
        if not 0 < self.linesearch_beta < 1:
            raise ValueError("linesearch_beta must lie in (0, 1)")


@dataclass
class SolveResult:
    X_star: np.ndarray
    objective_value: float
    status: Status
    newton_iters: int
    aux_value: float = float("nan")
    tau: float = float("nan")
    stage_objectives: list = field(default_factory=list)
    multipliers: np.ndarray = None
    slacks: np.ndarray = None
    message: str = ""


# -- compiled internal form ------------------------------------------------------


class _Ineq:
    """``h(w) = g(x) + tail @ w[P:] - rhs > 0`` with concave ``g``."""

    def __init__(self, P, tail, rhs, terms=None, lin=None):
        self.P = P
        self.tail = np.asarray(tail, dtype=float)
        self.rhs = float(rhs)
        self.terms = terms or []  # (weight, offset, images(P, N*N), N)
        self.lin = lin  # gradient vector over x, or None

    def with_tail(self, tail):
        return _Ineq(self.P, tail, self.rhs, self.terms, self.lin)

    def value(self, w):
        x = w[: self.P]
        v = self.tail @ w[self.P:] - self.rhs
        if self.lin is not None:
            v += self.lin @ x
        for weight, offset, imgs, N in self.terms:
            Y = offset + (x @ imgs).reshape(N, N)
            L = cholesky_psd(Y, tol=0.0)
            if L is None:
                return -np.inf
            v += weight * 2.0 * float(np.sum(np.log(np.real(np.diag(L))))) / _LN2
        return v

    def derivs(self, w):
        """Value, gradient, and the (negative semidefinite) Hessian block in ``x``.

        The Hessian is ``None`` for a linear constraint; the tail
        coordinates always enter linearly.
        """
        x = w[: self.P]
        nw = w.size
        g = np.zeros(nw)
        H = None
        g[self.P:] = self.tail
        v = self.tail @ w[self.P:] - self.rhs
        if self.lin is not None:
            v += self.lin @ x
            g[: self.P] += self.lin
        for weight, offset, imgs, N in self.terms:
            Y = offset + (x @ imgs).reshape(N, N)
            L = cholesky_psd(Y, tol=0.0)
            if L is None:
                raise NumericalFailure("log-det argument left the PD cone")
            v += weight * 2.0 * float(np.sum(np.log(np.real(np.diag(L))))) / _LN2
            R = scipy.linalg.solve_triangular(L, np.eye(N), lower=True)  # Y^{-1} = R^H R
            Z = R @ imgs.reshape(-1, N, N) @ R.conj().T
            Zf = Z.reshape(-1, N * N)
            g[: self.P] += weight * np.real(np.trace(Z, axis1=1, axis2=2)) / _LN2
            Hq = (-weight / _LN2) * np.real(Zf @ Zf.conj().T)
            H = Hq if H is None else H + Hq
        return v, g, H


class _Compiled:
    def __init__(self, problem):
        n = problem.n
        self.basis = HermitianBasis(n)
        P = self.basis.size
        self.P = P
        self.n = n
        self.n_aux = 1 if problem.has_aux else 0
        nw = P + self.n_aux
        sign = 1.0 if problem.sense == "min" else -1.0
        self.sign = sign
        c = np.zeros(nw)
        if problem.objective is not None:
            c[:P] = self.basis.coords(problem.objective)
        if self.n_aux:
            c[P] = problem.aux_objective
        self.c_user = c
        self.c = sign * c

        self.ineqs = []
        self.names = []
        eq_rows, eq_rhs = [], []
        for con in problem.logdet_constraints:
            terms = []
            for term in con.terms:
                _check_hermitian_map(term.op, n)
                offset = np.eye(term.dim) if term.offset is None else np.asarray(term.offset, complex)
                terms.append((term.weight, offset, self.basis.images(term.op), term.dim))
            tail = [-con.aux_coef] if self.n_aux else []
            self.ineqs.append(_Ineq(P, tail, con.rhs, terms=terms))
            self.names.append(con.name)
        for con in problem.linear_constraints:
            g = self.basis.coords(np.asarray(con.C, dtype=complex))
            tail = [-con.aux_coef] if self.n_aux else []
            if con.sense == ">=":
                self.ineqs.append(_Ineq(P, tail, con.rhs, lin=g))
                self.names.append(con.name)
            elif con.sense == "=":
                eq_rows.append(np.concatenate([g, tail]))
                eq_rhs.append(con.rhs)
            else:
                raise ValueError(f"unsupported sense {con.sense!r}")
        fixed = {}
        if problem.diagonal_fixed is not None:
            d = np.asarray(problem.diagonal_fixed, dtype=float)
            if d.shape != (n,):
                raise ValueError("diagonal_fixed must have length n")
            fixed = {k: d[k] for k in range(n)}
        self.fixed = fixed
        self.eq_rows = np.array(eq_rows).reshape(-1, nw)
        self.eq_rhs = np.array(eq_rhs, dtype=float)


def _check_hermitian_map(op, n, probes=3):
    rng = np.random.default_rng(0)
    for _ in range(probes):
        Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        Y = np.asarray(op(Z + Z.conj().T))
        if np.max(np.abs(Y - Y.conj().T)) > 1e-9 * (1.0 + np.max(np.abs(Y))):
            raise ValueError("constraint map does not preserve Hermitian structure")


class _Reduction:
    """Affine parametrization ``w = w_base + N y`` of the equality set."""

    def __init__(self, nw, fixed_idx, fixed_val, A, b):
        self.nw = nw
        self.fixed_idx = np.asarray(fixed_idx, dtype=int)
        self.fixed_val = np.asarray(fixed_val, dtype=float)
        free = np.setdiff1d(np.arange(nw), self.fixed_idx)
        self.free = free
        if A.shape[0]:
            Af = A[:, free]
            bf = b - A[:, self.fixed_idx] @ self.fixed_val
            self.N = scipy.linalg.null_space(Af)
            self.Af, self.bf = Af, bf
        else:
            self.N = None
            self.Af = None

    def project(self, w):
        w = np.array(w, dtype=float)
        w[self.fixed_idx] = self.fixed_val
        if self.Af is not None:
            wf = w[self.free]
            wf = wf - np.linalg.lstsq(self.Af, self.Af @ wf - self.bf, rcond=None)[0]
            w[self.free] = wf
        return w

    def reduce(self, g, H):
        gf = g[self.free]
        Hf = H[np.ix_(self.free, self.free)]
        if self.N is not None:
            return self.N.T @ gf, self.N.T @ Hf @ self.N
        return gf, Hf

    def expand(self, dy):
        dw = np.zeros(self.nw)
        dw[self.free] = dy if self.N is None else self.N @ dy
        return dw

    @property
    def dim(self):
        return self.free.size if self.N is None else self.N.shape[1]


def _solve_newton(H, g):
    n = g.size
    if n == 0:
        return np.zeros(0)
    H = 0.5 * (H + H.T)
    for shift in (0.0, 1e-10 * (1.0 + np.max(np.abs(np.diag(H))))):
        try:
            cf = scipy.linalg.cho_factor(H + shift * np.eye(n), lower=True, check_finite=True)
            return -scipy.linalg.cho_solve(cf, g)
        except (np.linalg.LinAlgError, ValueError):
            continue
    raise NumericalFailure("singular Newton system")


class _Path:
    """Barrier function ``tau * c.w - sum log h_i - log det X`` and its Newton centering."""

    def __init__(self, comp, ineqs, c, red, settings, psd=True):
        self.comp = comp
        self.ineqs = ineqs
        self.c = c
        self.red = red
        self.settings = settings
        self.basis = comp.basis
        self.P = comp.P
        self.m = len(ineqs) + comp.n
        self.newton = 0

    def _X(self, w):
        return self.basis.to_matrix(w[: self.P])

    def value(self, w, tau):
        return tau * (self.c @ w) + self.log_part(w)

    def log_part(self, w):
        """Barrier value without the linear term, ``+inf`` outside the domain."""
        X = self._X(w)
        L = cholesky_psd(X, tol=0.0)
        if L is None:
            return np.inf
        total = -2.0 * float(np.sum(np.log(np.real(np.diag(L)))))
        for q in self.ineqs:
            h = q.value(w)
            if not h > 0:
                return np.inf
            total -= math.log(h)
        return total

    def derivs(self, w, tau):
        X = self._X(w)
        L = cholesky_psd(X, tol=0.0)
        if L is None:
            raise NumericalFailure("iterate left the PD cone")
        Li = scipy.linalg.solve_triangular(L, np.eye(self.comp.n), lower=True)
        Xi = Li.conj().T @ Li
        nw = w.size
        g = tau * self.c.copy()
        H = np.zeros((nw, nw))
        g[: self.P] -= self.basis.coords(Xi)
        H[: self.P, : self.P] += self.basis.logdet_hessian(Xi)
        for q in self.ineqs:
            h, gh, Hh = q.derivs(w)
            g -= gh / h
            gs = gh / h
            H += np.outer(gs, gs)
            if Hh is not None:
                H[: self.P, : self.P] -= Hh / h
        return g, H

    def center(self, w, tau, stop=None):
        """Damped Newton to the central point; returns ``(w, converged)``.

        ``stop(w)`` ends centering early once it returns true.
        """
        st = self.settings
        stalled = 0
        prev = np.inf
        for _ in range(st.max_newton):
            if stop is not None and stop(w):
                return w, True
            g, H = self.derivs(w, tau)
            gr, Hr = self.red.reduce(g, H)
            if gr.size == 0:
                return w, True
            dy = _solve_newton(Hr, gr)
            lam2 = float(-gr @ dy)
            self.newton += 1
            if lam2 / 2.0 <= _CENTER_TOL:
                return w, True
            # at large tau the decrement bottoms out at rounding level
            stalled = stalled + 1 if (lam2 < 1e-6 and lam2 > 0.25 * prev) else 0
            if stalled >= 3:
                return w, True
            prev = lam2
            dw = self.red.expand(dy)
            # decrease = tau c.dw + change of the log terms, free of cancellation in tau c.w
            if lam2 < _PURE_NEWTON and np.isfinite(self.log_part(w + dw)):
                # quadratic region: the merit comparison would sit at rounding level
                w = w + dw
                continue
            slope = tau * float(self.c @ dw)
            f0 = self.log_part(w)
            step = 1.0
            while True:
                delta = step * slope + (self.log_part(w + step * dw) - f0)
                if delta <= -st.linesearch_alpha * step * lam2:
                    break
                step *= st.linesearch_beta
                if step < 1e-14:
                    # no further progress at working precision
                    return w, True
            w = w + step * dw
        return w, False


def _start_point(comp, problem, red):
    n = comp.n
    if problem.x0 is not None:
        X0 = np.asarray(problem.x0, dtype=complex)
    elif comp.fixed:
        X0 = np.diag([comp.fixed[k] for k in range(n)]).astype(complex)
    else:
        X0 = np.eye(n, dtype=complex)
    w = np.zeros(comp.P + comp.n_aux)
    w[: comp.P] = comp.basis.coords(X0)
    return red.project(w)


def barrier_solve(problem, settings=None):
    """Solve a :class:`DetmaxProblem` by phase I plus log-barrier path following."""
    settings = settings or SolveSettings()
    comp = _Compiled(problem)
    nw = comp.P + comp.n_aux
    fixed_idx = list(comp.fixed.keys())  # diagonal coordinates come first
    fixed_val = [comp.fixed[k] for k in fixed_idx]
    red = _Reduction(nw, fixed_idx, fixed_val, comp.eq_rows, comp.eq_rhs)
    w = _start_point(comp, problem, red)
    if cholesky_psd(comp.basis.to_matrix(w[: comp.P]), tol=0.0) is None:
        return _failure(comp, Status.NUMERICAL_FAILURE, "no positive-definite start in the equality set")

    newton_total = 0
    if comp.n_aux:
        # any constraint with a t coefficient can be made slack by moving t
        P = comp.P
        w[P] = 0.0
        cands = []
        for q, con in zip(comp.ineqs, _constraints(problem)):
            if con.aux_coef > 0:
                cands.append((q.value(w) - 0.0) / con.aux_coef)
        if cands:
            w[P] = min(cands) - 0.5 * max(1.0, abs(min(cands)))
        w = red.project(w)

    hvals = np.array([q.value(w) for q in comp.ineqs])
    if hvals.size and not np.all(hvals > 0):
        w, status, iters = _phase_one(comp, w, red, settings)
        newton_total += iters
        if status is not Status.OPTIMAL:
            return _failure(comp, status, "phase I found no strictly feasible point", iters)

    path = _Path(comp, comp.ineqs, comp.c, red, settings)
    m = path.m
    obj0 = float(comp.c @ w)
    tau = m / max(abs(obj0), 1e-3)
    tau = min(max(tau, 1e-6), 1e6)
    stages = []
    status = Status.OPTIMAL
    try:
        while True:
            w, ok = path.center(w, tau)
            stages.append(float(comp.c_user @ w))
            if not ok:
                status = Status.MAX_ITERATIONS
                break
            if m / tau < settings.tol:
                break
            tau *= settings.barrier_mu
    except NumericalFailure as exc:
        return _failure(comp, Status.NUMERICAL_FAILURE, str(exc), newton_total + path.newton)
    newton_total += path.newton

    X = comp.basis.to_matrix(w[: comp.P])
    X = 0.5 * (X + X.conj().T)
    slacks = np.array([q.value(w) for q in comp.ineqs])
    return SolveResult(
        X_star=X,
        objective_value=float(comp.c_user @ w),
        status=status,
        newton_iters=newton_total,
        aux_value=float(w[comp.P]) if comp.n_aux else float("nan"),
        tau=tau,
        stage_objectives=stages,
        multipliers=1.0 / (tau * slacks) if slacks.size else np.zeros(0),
        slacks=slacks,
    )


def _constraints(problem):
    return list(problem.logdet_constraints) + [
        c for c in problem.linear_constraints if c.sense == ">="
    ]


def _failure(comp, status, message, iters=0):
    n = comp.n
    return SolveResult(
        X_star=np.full((n, n), np.nan, dtype=complex),
        objective_value=float("nan"),
        status=status,
        newton_iters=iters,
        message=message,
    )


def _phase_one(comp, w, red, settings):
    """Minimize a common slack ``s`` added to every inequality.

    The auxiliary scalar (if any) is held fixed and the trace of ``X`` is
    capped so the phase-I problem is bounded.
    """
    P, nw = comp.P, comp.P + comp.n_aux
    tail_s = lambda q: np.concatenate([q.tail, [1.0]])
    ineqs = [q.with_tail(tail_s(q)) for q in comp.ineqs]
    X0 = comp.basis.to_matrix(w[:P])
    trace0 = float(np.real(np.trace(X0)))
    cap = settings.trace_cap or 1e6 * max(trace0, 1.0)
    cap_row = -comp.basis.coords(np.eye(comp.n))
    ineqs.append(_Ineq(P, np.zeros(nw + 1 - P), -cap, lin=cap_row))
    hvals = np.array([q.value(w) for q in comp.ineqs])
    s0 = float(max(0.0, -np.min(hvals))) + 1.0
    w1 = np.concatenate([w, [s0]])

    fixed_idx = list(red.fixed_idx) + ([P] if comp.n_aux else [])
    fixed_val = list(red.fixed_val) + ([w[P]] if comp.n_aux else [])
    A = np.hstack([comp.eq_rows, np.zeros((comp.eq_rows.shape[0], 1))])
    red1 = _Reduction(nw + 1, fixed_idx, fixed_val, A, comp.eq_rhs)
    c = np.zeros(nw + 1)
    c[-1] = 1.0
    path = _Path(comp, ineqs, c, red1, settings)
    tau = path.m / max(s0, 1e-3)
    try:
        while True:
            w1, ok = path.center(w1, tau, stop=lambda v: v[-1] < 0)
            if w1[-1] < 0:
                return w1[:-1], Status.OPTIMAL, path.newton
            if not ok:
                return w1[:-1], Status.MAX_ITERATIONS, path.newton
            if path.m / tau < settings.tol:
                return w1[:-1], Status.INFEASIBLE, path.newton
            tau *= settings.barrier_mu
    except NumericalFailure:
        return w1[:-1], Status.NUMERICAL_FAILURE, path.newton


def kkt_residual(problem, result):
    """KKT residuals of a barrier solution, recomputed from ``X_star``.

    Dual estimates are ``lambda_i = 1/(tau h_i)`` for the inequalities and
    ``Z = X^{-1}/tau`` for the PSD cone. Returns a dict with the
    stationarity residual (projected on the equality null space, relative
    to ``1 + ||c||``), the complementarity ``max(lambda_i h_i, tr(ZX)/n)``,
    and the largest primal violation.
    """
    comp = _Compiled(problem)
    P = comp.P
    w = np.zeros(P + comp.n_aux)
    w[:P] = comp.basis.coords(result.X_star)
    if comp.n_aux:
        w[P] = result.aux_value
    tau = result.tau
    grad = comp.c.copy()
    comp_slack = []
    primal = 0.0
    for q in comp.ineqs:
        h, gh, _ = q.derivs(w)
        lam = 1.0 / (tau * h)
        grad -= lam * gh
        comp_slack.append(lam * h)
        primal = max(primal, -h)
    Xi = np.linalg.inv(result.X_star)
    Z = Xi / tau
    grad[:P] -= comp.basis.coords(Z)
    comp_slack.append(float(np.real(np.trace(Z @ result.X_star))) / comp.n)
    fixed_idx = list(comp.fixed.keys())
    red = _Reduction(P + comp.n_aux, fixed_idx, [comp.fixed[k] for k in fixed_idx],
                     comp.eq_rows, comp.eq_rhs)
    gr, _ = red.reduce(grad, np.zeros((grad.size, grad.size)))
    stat = float(np.linalg.norm(gr)) / (1.0 + float(np.linalg.norm(comp.c)))
    return {
        "stationarity": stat,
        "complementarity": float(max(comp_slack)),
        "primal_violation": float(primal),
        "total": max(stat, float(max(comp_slack)), float(primal)),
    }


# -- fixed-phase minimum-power covariance ------------------------------------


def _cong(A):
    AH = A.conj().T
    return lambda X: A @ X @ AH


def p1a_problem(channels, phi, config, mode="symbiotic"):
    """Build the minimum-power covariance problem at fixed phases.

    The problem is expressed in normalized units (noise power 1, power
    scaled by ``q_scale``); returns ``(problem, q_scale)`` so that the
    physical covariance is ``q_scale * X``.

    ``mode="symbiotic"`` keeps both averaged rate constraints and the
    backscatter-SNR constraint; ``mode="pure_assist"`` keeps only the
    primary rate with the backscatter symbol fixed to +1.
    """
    from .metrics import effective_channels

    eff = effective_channels(channels, phi, config.alpha)
    sig = math.sqrt(config.sigma2)
    mats = {
        "p+": (eff.H1 + eff.F1) / sig,
        "p-": (eff.H1 - eff.F1) / sig,
        "s+": (eff.H2 + eff.F2) / sig,
        "s-": (eff.H2 - eff.F2) / sig,
    }
    used = ["p+"] if mode == "pure_assist" else list(mats)
    gain = max(float(np.linalg.norm(mats[k], 2)) ** 2 for k in used)
    q_scale = 1.0 / gain if gain > 0 else 1.0
    A = {k: v * math.sqrt(q_scale) for k, v in mats.items()}

    M = config.M
    logdet, linear = [], []
    if mode == "pure_assist":
        if config.R_s > 0:
            logdet.append(
                LogDetConstraint([LogDetTerm(_cong(A["p+"]), config.N1)], config.R_s, name="R_p")
            )
    elif mode == "symbiotic":
        if config.R_s > 0:
            logdet.append(LogDetConstraint(
                [LogDetTerm(_cong(A["p+"]), config.N1, 0.5), LogDetTerm(_cong(A["p-"]), config.N1, 0.5)],
                config.R_s, name="R_p"))
            logdet.append(LogDetConstraint(
                [LogDetTerm(_cong(A["s+"]), config.N2, 0.5), LogDetTerm(_cong(A["s-"]), config.N2, 0.5)],
                config.R_s, name="R_bs"))
        if config.gamma > 0:
            F2n = eff.F2 / sig * math.sqrt(q_scale)
            C = config.L * (F2n.conj().T @ F2n)
            linear.append(LinearConstraint(0.5 * (C + C.conj().T), config.gamma, name="gamma_bc"))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    problem = DetmaxProblem(
        variable_dim=M, objective=np.eye(M), sense="min", logdet_constraints=logdet, linear_constraints=linear
    )
    return problem, q_scale


def _scaled_start(problem, cap=1e12):
    """Smallest ``rho = 2^j`` with ``rho I`` strictly feasible, or ``None``."""
    comp = _Compiled(problem)
    rho = 1e-6
    while rho <= cap:
        w = comp.basis.coords(rho * np.eye(problem.n))
        if all(q.value(w) > 0 for q in comp.ineqs):
            return rho
        rho *= 2.0
    return None


def solve_p1a(channels, phi, config, settings=None, mode="symbiotic"):
    """Minimum transmit power covariance at fixed reflecting phases.

    Returns a :class:`SolveResult` whose ``X_star`` is the physical
    covariance ``Q`` (watts) and ``objective_value`` its trace.
    """
    channels.check(config)
    settings = settings or SolveSettings()
    problem, q_scale = p1a_problem(channels, phi, config, mode)
    M = config.M
    if not problem.logdet_constraints and not problem.linear_constraints:
        return SolveResult(np.zeros((M, M), complex), 0.0, Status.OPTIMAL, 0)
    rho = _scaled_start(problem)
    if rho is not None:
        problem.x0 = rho * np.eye(M)
    res = barrier_solve(problem, settings)
    if res.status in (Status.OPTIMAL, Status.MAX_ITERATIONS):
        res.X_star = q_scale * res.X_star
        res.objective_value = float(np.real(np.trace(res.X_star)))
        res.stage_objectives = [q_scale * v for v in res.stage_objectives]
    res.q_scale = q_scale
    return res


# -- relaxed backscatter-link enhancement ------------------------------------------


def _lw3_parts(channels, Q0, config):
    """Hadamard-form pieces: ``C = (alpha/sigma2) H3 Q0 H3^H`` and the SNR matrix."""
    H3 = channels.H3
    C = config.alpha / config.sigma2 * (H3 @ Q0 @ H3.conj().T)
    C = 0.5 * (C + C.conj().T)
    G2 = channels.G2
    D = config.L * ((G2.conj().T @ G2) * C.T)
    return C, 0.5 * (D + D.conj().T)


def lw3_constraint_values(Phi, channels, Q0, config):
    """The three relaxed objective components at ``Phi``.

    ``log2 det(I + G1 (C o Phi) G1^H)``, the same with ``G2``, and
    ``L tr(G2 (C o Phi) G2^H)``, where ``C = (alpha/sigma2) H3 Q0 H3^H``.
    """
    from .linalg import log2det_pd

    C, D = _lw3_parts(channels, Q0, config)
    Phi = np.asarray(Phi, dtype=complex)
    vals = []
    for G in (channels.G1, channels.G2):
        Y = np.eye(G.shape[0]) + G @ (C * Phi) @ G.conj().T
        vals.append(log2det_pd(Y))
    vals.append(float(np.real(np.trace(D @ Phi))))
    return np.array(vals)


def p1lw3_problem(channels, Q0, config):
    """Relaxed max-min problem over unit-diagonal PSD ``Phi``.

    Returns ``(problem, t_scale)``; the epigraph variable of the built
    problem is ``t / t_scale``.
    """
    K = config.K
    C, D = _lw3_parts(channels, Q0, config)
    base = lw3_constraint_values(np.eye(K), channels, Q0, config)
    positive = base[base > 0]
    t_scale = float(np.min(positive)) if positive.size else 1.0

    def hop(G):
        GH = G.conj().T
        return lambda X: G @ (C * X) @ GH

    problem = DetmaxProblem(
        variable_dim=K,
        sense="max",
        aux_objective=1.0,
        logdet_constraints=[
            LogDetConstraint([LogDetTerm(hop(channels.G1), config.N1)], 0.0, t_scale, "primary"),
            LogDetConstraint([LogDetTerm(hop(channels.G2), config.N2)], 0.0, t_scale, "secondary"),
        ],
        linear_constraints=[LinearConstraint(D, 0.0, ">=", t_scale, "snr")],
        diagonal_fixed=np.ones(K),
    )
    return problem, t_scale


def solve_p1lw3(channels, Q0, config, settings=None):
    """Relaxed backscatter-link design at covariance ``Q0``.

    ``X_star`` is ``Phi*`` (unit diagonal, PSD) and ``aux_value`` is ``t*``
    in the units of the three objective components.
    """
    channels.check(config)
    settings = settings or SolveSettings()
    problem, t_scale = p1lw3_problem(channels, Q0, config)
    res = barrier_solve(problem, settings)
    if res.status in (Status.OPTIMAL, Status.MAX_ITERATIONS):
        res.aux_value *= t_scale
        res.objective_value *= t_scale
        res.stage_objectives = [t_scale * v for v in res.stage_objectives]
    res.t_scale = t_scale
    return res
