"""Iteration-free design through semidefinite relaxation of the phases.

The pipeline is: eigenmode phases, a minimum-power covariance at those
phases, the relaxed max-min backscatter-link problem over
``Phi ~ phi phi^H`` at that covariance, Gaussian randomization back to
unit-modulus phases, and one final covariance solve.
"""

from dataclasses import dataclass

import numpy as np

from .ao import _recover, _solution, initialize_phi
from .detmax import SolveSettings, solve_p1a, solve_p1lw3
from .linalg import hermitian_eig
from .types import BeamformerSolution, Status

__all__ = [
    "RandomizationSettings",
    "lw_objective",
    "gaussian_randomize",
    "run_low_complexity",
    "REPORT_COLUMNS",
]

REPORT_COLUMNS = ("seed", "t_sdr", "t_best_candidate", "power_w")


@dataclass
class RandomizationSettings:
    num_candidates: int = 200
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_candidates < 1:
            raise ValueError("num_candidates must be at least 1")


def lw_objective(phi, channels, Q0, config):
    """Backscatter-link objective ``min{R_1, R_2, SNR}`` for one or many phase vectors.

    ``R_m = log2 det(I + F_m Q0 F_m^H / sigma2)`` and
    ``SNR = L tr(F_2 Q0 F_2^H) / sigma2``. ``phi`` has shape ``(K,)`` or
    ``(n, K)``; the result has the matching leading shape.
    """
    phi = np.asarray(phi, dtype=complex)
    batch = phi[None] if phi.ndim == 1 else phi
    sa = np.sqrt(config.alpha)
    PH3 = batch[:, :, None] * channels.H3[None]
    vals = []
    for G in (channels.G1, channels.G2):
        F = sa * G[None] @ PH3
        Y = np.eye(G.shape[0])[None] + F @ Q0 @ np.swapaxes(F.conj(), 1, 2) / config.sigma2
        sign, logdet = np.linalg.slogdet(Y)
        vals.append(logdet / np.log(2.0))
    vals.append(config.L * np.real(np.trace(F @ Q0 @ np.swapaxes(F.conj(), 1, 2), axis1=1, axis2=2))
                / config.sigma2)
    out = np.min(np.stack(vals), axis=0)
    return out[0] if phi.ndim == 1 else out


def _factor(Phi):
    """``F`` with ``F F^H = Phi`` for PSD ``Phi``; handles singular ``Phi`` without jitter."""
    lam, U = hermitian_eig(Phi)
    # round-off eigenvalues would otherwise leak into the square root
    lam = np.where(lam > 1e-12 * max(lam[0], 0.0), lam, 0.0)
    return U * np.sqrt(lam)[None, :]


def gaussian_randomize(Phi, metric, settings=None, rng=None, return_values=False):
    """Best unit-modulus candidate drawn from ``CN(0, Phi)``.

    Parameters
    ----------
    Phi : ndarray, shape (K, K)
        PSD relaxation solution.
    metric : callable
        Maps an ``(n, K)`` array of phase vectors to ``n`` objective values
        (larger is better).
    settings : RandomizationSettings, optional
    rng : numpy.random.Generator, optional
        Defaults to a generator seeded with ``settings.rng_seed``.
    return_values : bool
        Also return the objective of every candidate, in draw order.

    Returns
    -------
    phi : ndarray, shape (K,)
    values : ndarray, shape (num_candidates,), only if ``return_values``
    """
    settings = settings or RandomizationSettings()
    rng = np.random.default_rng(settings.rng_seed) if rng is None else rng
    K = Phi.shape[0]
    F = _factor(np.asarray(Phi, dtype=complex))
    n = settings.num_candidates
    xi = (rng.standard_normal((n, K)) + 1j * rng.standard_normal((n, K))) / np.sqrt(2.0)
    z = xi @ F.T
    cand = np.where(z == 0, 1.0 + 0j, np.exp(1j * np.angle(z)))  # arg(0) = 0
    values = np.asarray(metric(cand), dtype=float)
    best = int(np.argmax(values))
    return (cand[best], values) if return_values else cand[best]


def run_low_complexity(channels, config, solver_settings=None, rand_settings=None, rng=None):
    """Low-complexity joint design.

    Returns
    -------
    solution : BeamformerSolution
    report : dict
        ``t_sdr`` (relaxed optimum), ``t_best_candidate``, ``power_w``,
        and ``candidate_values`` for the relaxation-bound check.
    """
    channels.check(config)
    solver_settings = solver_settings or SolveSettings()
    rand_settings = rand_settings or RandomizationSettings()
    report = {"seed": rand_settings.rng_seed, "t_sdr": float("nan"),
              "t_best_candidate": float("nan"), "power_w": float("nan")}

    phi0 = initialize_phi(channels, config)
    r0 = solve_p1a(channels, phi0, config, solver_settings)
    if r0.status not in (Status.OPTIMAL, Status.MAX_ITERATIONS):
        return BeamformerSolution.failed(config, r0.status, phi=phi0), report
    Q0 = r0.X_star
    relax = solve_p1lw3(channels, Q0, config, solver_settings)
    if relax.status not in (Status.OPTIMAL, Status.MAX_ITERATIONS):
        return BeamformerSolution.failed(config, relax.status, phi=phi0), report
    metric = lambda cand: lw_objective(cand, channels, Q0, config)
    phi, values = gaussian_randomize(relax.X_star, metric, rand_settings, rng, return_values=True)
    report.update(t_sdr=relax.aux_value, t_best_candidate=float(np.max(values)),
                  candidate_values=values, Phi=relax.X_star)

    r1 = solve_p1a(channels, phi, config, solver_settings)
    if r1.status not in (Status.OPTIMAL, Status.MAX_ITERATIONS):
        return BeamformerSolution.failed(config, r1.status, phi=phi), report
    W, zeta = _recover(r1.X_star, channels, phi, config)
    status = Status.OPTIMAL if r1.status is Status.OPTIMAL else r1.status
    sol = _solution(W, phi, channels, config, status, 1, zeta=zeta)
    report["power_w"] = sol.power
    return sol, report
