"""Benchmark policies: random phases, no surface, grid-search and random-start AO."""

import math

import numpy as np
import scipy.optimize

from .ao import AOSettings, _recover, _solution, run_ao
from .detmax import SolveSettings, solve_p1a
from .linalg import hermitian_eig, log2det_pd
from .types import BeamformerSolution, Status

__all__ = [
    "random_beamforming",
    "water_filling_no_ris",
    "water_filling_powers",
    "one_dimensional_search_ao",
    "random_initialization_ao",
    "pure_assist_ao",
]


def random_beamforming(channels, config, solver_settings=None, rng=None):
    """Uniform random phases, then the minimum-power covariance at those phases."""
    rng = np.random.default_rng(0) if rng is None else rng
    phi = np.exp(1j * rng.uniform(0.0, 2 * np.pi, config.K))
    res = solve_p1a(channels, phi, config, solver_settings or SolveSettings())
    if res.status not in (Status.OPTIMAL, Status.MAX_ITERATIONS):
        return BeamformerSolution.failed(config, res.status, phi=phi)
    W, zeta = _recover(res.X_star, channels, phi, config)
    return _solution(W, phi, channels, config, res.status, 1, zeta=zeta)


def water_filling_powers(gains, rate):
    """Per-mode powers ``max(0, mu - 1/g_i)`` with ``sum log2(1 + g_i p_i) = rate``.

    Parameters
    ----------
    gains : array_like
        Nonnegative eigenmode gains (already divided by the noise power).
    rate : float
        Target sum rate in bps/Hz.

    Returns
    -------
    ndarray
        Powers in the order of ``gains``.
    """
    g = np.asarray(gains, dtype=float)
    p = np.zeros_like(g)
    if rate <= 0:
        return p
    active = g > 0
    if not np.any(active):
        raise ValueError("no positive gain: the rate cannot be reached")
    ga = g[active]

    def excess(log_mu):
        mu = math.exp(log_mu)
        return float(np.sum(np.log2(np.maximum(1.0, mu * ga)))) - rate

    # rate(mu) is increasing; bracket in log(mu)
    lo = -math.log(ga.max())
    hi = lo + rate * math.log(2.0) + 1.0
    while excess(hi) < 0:
        hi += rate * math.log(2.0) + 1.0
    log_mu = scipy.optimize.brentq(excess, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    mu = math.exp(log_mu)
    p[active] = np.maximum(0.0, mu - 1.0 / ga)
    return p


def water_filling_no_ris(H1, config):
    """Minimum-power covariance meeting the primary rate without any surface.

    Without a surface there is no backscatter link: ``R_bs`` is reported
    as NaN and ``gamma_bc`` as 0.
    """
    H1 = np.asarray(H1, dtype=complex)
    lam, V = hermitian_eig(H1.conj().T @ H1 / config.sigma2)
    lam = np.clip(lam, 0.0, None)
    if config.R_s > 0 and not np.any(lam > 0):
        return BeamformerSolution.failed(config, Status.INFEASIBLE)
    p = water_filling_powers(lam, config.R_s)
    S = config.S
    order = np.argsort(-p, kind="stable")[:S]
    W = V[:, order] * np.sqrt(p[order])[None, :]
    Q = W @ W.conj().T
    K = config.K
    R_p = log2det_pd(np.eye(H1.shape[0]) + H1 @ Q @ H1.conj().T / config.sigma2)
    return BeamformerSolution(
        Q=Q, W=W, phi=np.ones(K, complex), power=float(np.real(np.trace(Q))),
        R_p=R_p, R_bs=float("nan"), gamma_bc=0.0, status=Status.OPTIMAL,
        info={"mode_powers": p},
    )


def one_dimensional_search_ao(channels, config, settings=None, resolution=0.005):
    """AO with each element chosen by scanning phases ``0, res, 2 res, ... < 2 pi`` (radians)."""
    settings = settings or AOSettings()
    s = AOSettings(**{**settings.__dict__, "subproblem": "GridSearch", "grid_resolution": resolution})
    return run_ao(channels, config, s)[0]


def random_initialization_ao(channels, config, settings=None, rng=None):
    """AO started from uniform random phases."""
    settings = settings or AOSettings()
    s = AOSettings(**{**settings.__dict__, "random_init": True})
    return run_ao(channels, config, s, rng)[0]


def pure_assist_ao(channels, config, settings=None):
    """AO for a surface that only assists the primary link.

    Only the primary rate with the backscatter symbol fixed to +1 is
    constrained; the secondary rate and backscatter SNR are reported but
    not required.
    """
    settings = settings or AOSettings()
    s = AOSettings(**{**settings.__dict__, "mode": "pure_assist"})
    return run_ao(channels, config, s)[0]
