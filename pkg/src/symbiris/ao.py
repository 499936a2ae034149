"""Alternating optimization of the transmit covariance and reflecting phases.

Each outer iteration solves the minimum-power covariance problem at the
current phases, then sweeps the reflecting elements in ascending order.
For element ``k`` every rate term is a closed-form function of ``phi_k``
alone,

    f(phi_k) = log2 det(A) + log2(1 + |lam|^2 (1 - vt v) + 2 Re(phi_k lam)),

and the backscatter SNR is affine in ``phi_k``. The element update
maximizes the smallest achieved-to-required ratio over the unit disk,
projects the maximizer onto the unit circle, and is kept only if every
constraint still holds, so the transmit power never increases.
"""

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .detmax import SolveSettings, solve_p1a
from .linalg import NumericalFailure, cholesky_psd, hermitian_eig, log2det_pd, svd, unit_phases
from .metrics import effective_channels, evaluate
from .types import BeamformerSolution, Status

__all__ = [
    "Branch",
    "RateTerm",
    "ElementSubproblemData",
    "AOSettings",
    "IterationTrace",
    "initialize_phi",
    "element_subproblem_data",
    "element_objective",
    "solve_element",
    "recover_w",
    "run_ao",
]

_BRANCH_TOL = 1e-10
_ACCEPT_TOL = 1e-9


class Branch(enum.Enum):
    RANK_ZERO = "RankZero"
    NILPOTENT = "Nilpotent"
    GENERIC = "Generic"


@dataclass
class RateTerm:
    """One ``f_{m,n}``: ``log2 det(A + phi B + conj(phi) B^H)`` for ``|phi| = 1``."""

    A: np.ndarray
    B: np.ndarray
    branch: Branch
    logdet_A: float
    lam: complex = 0.0
    v: float = 0.0
    vt: float = 0.0
    const: float = 0.0

    def value(self, phi):
        """Closed-form value; ``phi`` may be an array of complex numbers in the disk."""
        phi = np.asarray(phi, dtype=complex)
        if self.branch is Branch.GENERIC:
            arg = 1.0 + abs(self.lam) ** 2 * (1.0 - self.vt * self.v) + 2.0 * np.real(phi * self.lam)
            with np.errstate(invalid="ignore", divide="ignore"):
                return self.logdet_A + np.log2(arg)
        return np.full(phi.shape, self.const)


@dataclass
class ElementSubproblemData:
    """Closed-form pieces of the single-element subproblem.

    ``terms[(m, n)]`` holds the rate term for receiver ``m`` and symbol
    sign ``(-1)^n``. The backscatter SNR is
    ``snr_scale * (A_k + 2 Re(phi_k B_k))``.
    """

    k: int
    terms: dict
    A_k: float
    B_k: complex
    snr_scale: float
    phi_k: complex

    def snr(self, phi):
        phi = np.asarray(phi, dtype=complex)
        return self.snr_scale * (self.A_k + 2.0 * np.real(phi * self.B_k))


class SubproblemMethod(enum.Enum):
    MAX_MIN_ANALYTIC = "MaxMinAnalytic"
    GRID_SEARCH = "GridSearch"


@dataclass
class AOSettings:
    """Outer-loop controls.

    Parameters
    ----------
    max_outer : int
        Maximum number of covariance solves.
    power_rel_tol : float
        Stop when the relative change of the minimum power between two
        consecutive covariance solves drops below this.
    subproblem : {"MaxMinAnalytic", "GridSearch"}
        Element update rule.
    grid_resolution : float
        Phase step in radians for ``GridSearch``.
    accept_only_feasible : bool
        Keep the previous phase whenever the projected update violates a
        constraint.
    random_init : bool
        Start from uniformly random phases drawn from the run's RNG
        instead of the eigenmode initialization.
    infeasible_retries : int
        Random restarts tried when the first covariance problem is
        infeasible.
    mode : {"symbiotic", "pure_assist"}
        ``pure_assist`` keeps only the primary rate with the backscatter
        symbol fixed to +1.
    """

    max_outer: int = 30
    power_rel_tol: float = 1e-4
    subproblem: str = "MaxMinAnalytic"
    grid_resolution: float = 0.005
    accept_only_feasible: bool = True
    random_init: bool = False
    infeasible_retries: int = 0
    mode: str = "symbiotic"
    solver: SolveSettings = field(default_factory=SolveSettings)

    def __post_init__(self):
        self.subproblem = SubproblemMethod(self.subproblem).value
        if self.subproblem == "GridSearch" and not self.grid_resolution > 0:
            raise ValueError("grid_resolution must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if self.mode not in ("symbiotic", "pure_assist"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class IterationTrace:
    """Per-iteration record of an AO run."""

    power: list = field(default_factory=list)
    slacks: list = field(default_factory=list)
    accepted: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)

    CSV_COLUMNS = ("iter", "power_w", "min_slack", "elements_accepted", "wall_ms")

    def rows(self):
        out = []
        for i, p in enumerate(self.power):
            s = self.slacks[i] if i < len(self.slacks) else []
            a = self.accepted[i] if i < len(self.accepted) else []
            out.append({
                "iter": i + 1,
                "power_w": p,
                "min_slack": float(min(s)) if len(s) else float("nan"),
                "elements_accepted": int(sum(a)),
                "wall_ms": self.wall_ms[i] if i < len(self.wall_ms) else float("nan"),
            })
        return out

    def to_csv(self, path_or_file):
        import csv

        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        f = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            writer = csv.DictWriter(f, fieldnames=self.CSV_COLUMNS)
            writer.writeheader()
            for row in self.rows():
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        finally:
            if own:
                f.close()


# -- initialization --------------------------------------------------------------


def initialize_phi(channels, config):
    """Phases aligning every reflected path with the strongest primary eigenmode.

    With ``x, y`` the dominant left/right singular vectors of
    ``H1 + sqrt(alpha) G1 H3``, element ``k`` gets
    ``exp(j(pi/2 + arg(x^H H1 y))) * exp(-j arg((x^H G1)_k (H3 y)_k))``,
    using ``arg(0) = 0``.
    """
    H = channels.H1 + math.sqrt(config.alpha) * channels.G1 @ channels.H3
    U, _, V = svd(H)
    x, y = U[:, 0], V[:, 0]
    base = math.pi / 2 + _arg(x.conj() @ channels.H1 @ y)
    per = (x.conj() @ channels.G1) * (channels.H3 @ y)
    return np.exp(1j * (base - _arg(per)))


def _arg(z):
    """``np.angle`` with ``arg(0) = 0`` (also for signed zeros)."""
    z = np.asarray(z, dtype=complex)
    return np.where(z == 0, 0.0, np.angle(z))


# -- closed-form element subproblem ------------------------------------------


def _rate_term(A, b, c, tol=_BRANCH_TOL):
    """Classify ``A^{-1} B`` for ``B = b c^H`` and build the branch formula."""
    N = A.shape[0]
    L = cholesky_psd(A, tol=0.0)
    if L is None:
        raise NumericalFailure("element subproblem matrix is not positive definite")
    B = np.outer(b, c.conj())
    logdet_A = 2.0 * float(np.sum(np.log2(np.real(np.diag(L)))))
    Ainv = scipy.linalg.cho_solve((L, True), np.eye(N))
    Ainv = 0.5 * (Ainv + Ainv.conj().T)
    AiB = Ainv @ B
    scale = 1.0 + np.linalg.norm(Ainv, 2) * np.linalg.norm(B, 2)
    if np.max(np.abs(AiB)) <= tol * scale:
        return RateTerm(A, B, Branch.RANK_ZERO, logdet_A, const=logdet_A)
    lam = complex(np.trace(AiB))
    if abs(lam) <= tol * scale:
        S = A - B.conj().T @ AiB
        Ls = cholesky_psd(0.5 * (S + S.conj().T), tol=0.0)
        const = 2.0 * float(np.sum(np.log2(np.real(np.diag(Ls))))) if Ls is not None else -np.inf
        return RateTerm(A, B, Branch.NILPOTENT, logdet_A, lam=lam, const=const)
    # eigenvector of the nonzero eigenvalue first, then a basis of ker(A^{-1}B) = c-perp
    u1 = Ainv @ b
    u1 = u1 / np.linalg.norm(u1)
    rest = scipy.linalg.null_space(c.conj()[None, :])
    U = np.column_stack([u1, rest]) if rest.size else u1[:, None]
    V = U.conj().T @ A @ U
    Vi = np.linalg.inv(V)
    vt, v = V[0, 0], Vi[0, 0]
    if max(abs(vt.imag), abs(v.imag)) > 1e-8 * (1.0 + abs(vt) + abs(v)):
        raise NumericalFailure("first entries of V and its inverse are not real")
    return RateTerm(A, B, Branch.GENERIC, logdet_A, lam=lam, v=float(v.real), vt=float(vt.real))


def element_subproblem_data(channels, Q, phi, k, config):
    """Closed-form data for updating element ``k`` at ``(Q, phi)``."""
    Q = np.asarray(Q, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    s2, sa = config.sigma2, math.sqrt(config.alpha)
    others = phi.copy()
    others[k] = 0.0
    h_k = channels.H3[k].conj()  # column h_{3,k}
    terms = {}
    for m, (H, G) in ((1, (channels.H1, channels.G1)), (2, (channels.H2, channels.G2))):
        Fk = sa * G @ (others[:, None] * channels.H3)  # reflected channel without element k
        g = G[:, k]
        for n in (1, 2):
            sgn = (-1.0) ** n
            D = H + sgn * Fk
            f = sa * np.outer(g, h_k.conj())
            A = np.eye(H.shape[0]) + (D @ Q @ D.conj().T + f @ Q @ f.conj().T) / s2
            A = 0.5 * (A + A.conj().T)
            c = (sgn * sa / s2) * (D @ Q @ h_k)
            terms[(m, n)] = _rate_term(A, g, c)
    G2 = channels.G2
    gram = G2.conj().T @ G2  # (i1, i2) -> g_{2,i1}^H g_{2,i2}
    hQh = channels.H3 @ Q @ channels.H3.conj().T  # (i1, i2) -> h_{3,i1}^H Q h_{3,i2}
    A_k = float(np.real(gram[k, k] * hQh[k, k]))
    A_k += float(np.real(others @ (gram.T * hQh) @ others.conj()))
    B_k = complex(np.sum(others.conj() * gram[:, k] * hQh[k, :]))
    return ElementSubproblemData(
        k=k, terms=terms, A_k=A_k, B_k=B_k,
        snr_scale=config.alpha * config.L / s2, phi_k=complex(phi[k]),
    )


def element_objective(data, config, phi, mode="symbiotic"):
    """Smallest achieved-to-required ratio; a zero requirement is ``+inf``."""
    phi = np.asarray(phi, dtype=complex)
    out = np.full(phi.shape, np.inf)
    if mode == "pure_assist":
        if config.R_s > 0:
            r = data.terms[(1, 2)].value(phi) / config.R_s
            out = np.minimum(out, np.where(np.isnan(r), -np.inf, r))
        return out
    if config.R_s > 0:
        for m in (1, 2):
            r = (data.terms[(m, 1)].value(phi) + data.terms[(m, 2)].value(phi)) / (2 * config.R_s)
            out = np.minimum(out, np.where(np.isnan(r), -np.inf, r))
    if config.gamma > 0:
        out = np.minimum(out, data.snr(phi) / config.gamma)
    return out


def _project(z):
    z = complex(z)
    return 1.0 + 0j if z == 0 else z / abs(z)


def _disk_maxmin(data, config, starts, mode):
    """Maximize the smallest ratio over ``|phi| <= 1`` in epigraph form."""
    fun = lambda x: element_objective(data, config, complex(x[0], x[1]), mode)
    best, best_val = None, -np.inf
    for z0 in starts:
        t0 = float(fun([z0.real, z0.imag]))
        if not np.isfinite(t0):
            continue
        cons = [
            {"type": "ineq", "fun": lambda x: 1.0 - x[0] ** 2 - x[1] ** 2},
            {"type": "ineq", "fun": lambda x: _ratio_vector(data, config, x, mode) - x[2]},
        ]
        x0 = np.array([z0.real, z0.imag, t0 - 1e-6 * (1 + abs(t0))])
        res = scipy.optimize.minimize(
            lambda x: -x[2], x0, jac=lambda x: np.array([0.0, 0.0, -1.0]),
            constraints=cons, method="SLSQP", options={"maxiter": 200, "ftol": 1e-12},
        )
        z = complex(res.x[0], res.x[1])
        if abs(z) > 1:
            z /= abs(z)
        val = float(fun([z.real, z.imag]))
        if val > best_val:
            best, best_val = z, val
        if t0 > best_val:
            best, best_val = z0, t0
    return best, best_val


def _ratio_vector(data, config, x, mode):
    z = complex(x[0], x[1])
    vals = []
    if mode == "pure_assist":
        if config.R_s > 0:
            vals.append(float(data.terms[(1, 2)].value(z)) / config.R_s)
    elif config.R_s > 0:
        for m in (1, 2):
            vals.append((data.terms[(m, 1)].value(z) + data.terms[(m, 2)].value(z)) / (2 * config.R_s))
    if config.gamma > 0 and mode != "pure_assist":
        vals.append(float(data.snr(z)) / config.gamma)
    vals = np.array(vals, dtype=float)
    return np.where(np.isnan(vals), -1e6, vals) if vals.size else np.array([np.inf])


def _circle_polish(data, config, phi0, mode, scan=256):
    """Refine a projected phase on the unit circle.

    The disk optimum can be interior, in which case its projection need
    not maximize the ratio on the circle. A scan plus bounded Brent
    searches around the projected phase and the best scan points fix that.
    """
    fun = lambda th: -float(element_objective(data, config, np.exp(1j * th), mode))
    theta = np.arange(scan) * (2 * np.pi / scan)
    vals = element_objective(data, config, np.exp(1j * theta), mode)
    width = 2 * np.pi / scan
    starts = [float(np.angle(phi0))] + [float(theta[i]) for i in np.argsort(-vals, kind="stable")[:2]]
    best, best_t = complex(phi0), float(element_objective(data, config, phi0, mode))
    for th0 in starts:
        res = scipy.optimize.minimize_scalar(
            fun, bounds=(th0 - width, th0 + width), method="bounded", options={"xatol": 1e-10}
        )
        if -res.fun > best_t:
            best, best_t = complex(np.exp(1j * res.x)), -float(res.fun)
    return best, best_t


def solve_element(data, config, settings=None):
    """Best unit-modulus phase for one element.

    Returns ``(phi_k, t, feasible)`` where ``t`` is the smallest ratio at
    the returned phase and ``feasible`` tells whether every ratio is at
    least ``1 - 1e-9``. When ``feasible`` is false the caller keeps the old
    phase.
    """
    settings = settings or AOSettings()
    mode = settings.mode
    current = data.phi_k
    t_cur = float(element_objective(data, config, current, mode))
    if settings.subproblem == "GridSearch":
        theta = np.arange(0.0, 2 * np.pi, settings.grid_resolution)
        vals = element_objective(data, config, np.exp(1j * theta), mode)
        i = int(np.argmax(vals))
        phi_k, t = complex(np.exp(1j * theta[i])), float(vals[i])
    else:
        if not np.isfinite(t_cur) and t_cur > 0:
            return current, t_cur, True  # no constraint left
        z, _ = _disk_maxmin(data, config, [0j, current], mode)
        phi_k = _project(z) if z is not None else current
        phi_k, t = _circle_polish(data, config, phi_k, mode)
    if not t > t_cur:
        phi_k, t = current, t_cur  # move only on strict improvement
    return phi_k, t, bool(t >= 1.0 - _ACCEPT_TOL)


# -- beamformer recovery -----------------------------------------------------------


def _meets(Q, channels, phi, config, mode="symbiotic", tol=1e-6):
    if mode == "pure_assist":
        eff = effective_channels(channels, phi, config.alpha)
        H = eff.htilde(1, 1)
        rate = log2det_pd(np.eye(H.shape[0]) + H @ Q @ H.conj().T / config.sigma2)
        return rate >= config.R_s - tol
    R_p, R_bs, snr = evaluate(Q, channels, phi, config)
    return R_p >= config.R_s - tol and R_bs >= config.R_s - tol and snr >= config.gamma * (1 - tol)


def recover_w(Q, channels, phi, config, mode="symbiotic"):
    """Beamformer ``W`` (M x S) from a covariance.

    Keeps the ``S`` strongest spectral factors of ``Q``; if truncation
    breaks a constraint, scales by the smallest ``zeta`` in ``[1, 10]``
    (bisection to 1e-6) that restores all of them.
    """
    return _recover(Q, channels, phi, config, mode)[0]


def _recover(Q, channels, phi, config, mode="symbiotic"):
    S = config.S
    w, U = hermitian_eig(Q)
    w = np.clip(w, 0.0, None)
    Wc = U[:, :S] * np.sqrt(w[:S])[None, :]
    if S == config.M:
        return Wc, 1.0
    Qc = Wc @ Wc.conj().T
    if _meets(Qc, channels, phi, config, mode):
        return Wc, 1.0
    if not _meets(100.0 * Qc, channels, phi, config, mode):
        raise NumericalFailure("no scaling up to 10 restores the constraints after truncation")
    lo, hi = 1.0, 10.0
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        if _meets(mid**2 * Qc, channels, phi, config, mode):
            hi = mid
        else:
            lo = mid
    return hi * Wc, hi


def _solution(W, phi, channels, config, status, iterations, **info):
    Q = W @ W.conj().T
    R_p, R_bs, snr = evaluate(Q, channels, phi, config)
    return BeamformerSolution(
        Q=Q, W=W, phi=np.asarray(phi, complex), power=float(np.real(np.trace(Q))),
        R_p=R_p, R_bs=R_bs, gamma_bc=snr, status=status, iterations=iterations, info=info,
    )


# -- outer loop ------------------------------------------------------------------------


def run_ao(channels, config, settings=None, rng=None):
    """Alternating optimization of covariance and phases.

    Returns ``(solution, trace)``. ``rng`` is used only for random
    initialization and infeasibility retries.
    """
    channels.check(config)
    settings = settings or AOSettings()
    rng = np.random.default_rng(0) if rng is None else rng
    trace = IterationTrace()

    if settings.random_init:
        phi = unit_phases(np.exp(2j * np.pi * rng.random(config.K)))
    else:
        phi = initialize_phi(channels, config)
    res = solve_p1a(channels, phi, config, settings.solver, mode=settings.mode)
    for _ in range(settings.infeasible_retries):
        if res.status is not Status.INFEASIBLE:
            break
        phi = np.exp(2j * np.pi * rng.random(config.K))
        res = solve_p1a(channels, phi, config, settings.solver, mode=settings.mode)
    if res.status not in (Status.OPTIMAL, Status.MAX_ITERATIONS):
        return BeamformerSolution.failed(config, res.status, phi=phi), trace

    prev_power = None
    status = Status.MAX_ITERATIONS
    iteration = 0
    for iteration in range(1, settings.max_outer + 1):
        t0 = time.perf_counter()
        if iteration > 1:
            res = solve_p1a(channels, phi, config, settings.solver, mode=settings.mode)
            if res.status not in (Status.OPTIMAL, Status.MAX_ITERATIONS):
                status = res.status
                break
        Q = res.X_star
        power = float(np.real(np.trace(Q)))
        slacks, accepted = [], []
        for k in range(config.K):
            data = element_subproblem_data(channels, Q, phi, k, config)
            phi_k, t, feasible = solve_element(data, config, settings)
            if feasible or not settings.accept_only_feasible:
                phi = phi.copy()
                phi[k] = phi_k
            slacks.append(t)
            accepted.append(bool(feasible))
        trace.power.append(power)
        trace.slacks.append(slacks)
        trace.accepted.append(accepted)
        trace.wall_ms.append(1e3 * (time.perf_counter() - t0))
        Q_final, phi_final = Q, phi
        if prev_power is not None and abs(prev_power - power) <= settings.power_rel_tol * abs(prev_power):
            status = Status.OPTIMAL
            break
        prev_power = power
    if not trace.power:
        return BeamformerSolution.failed(config, status, phi=phi), trace
    if status is Status.NUMERICAL_FAILURE or status is Status.INFEASIBLE:
        status = Status.NUMERICAL_FAILURE
    W, zeta = _recover(Q_final, channels, phi_final, config, settings.mode)
    sol = _solution(W, phi_final, channels, config, status, len(trace.power), zeta=zeta)
    return sol, trace
