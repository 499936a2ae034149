"""Spatial-multiplexing diagnostics of the effective primary channel.

Rank, conditioning and strongest eigengain of ``H1 + sqrt(alpha) c G1 diag(phi) H3``,
large-system rates from the Marchenko-Pastur law, and the primary rate
when the direct link is blocked.
"""

import math

import numpy as np

from .linalg import log2det_pd, numerical_rank

__all__ = [
    "effective_channel",
    "effective_rank",
    "condition_and_eigengain",
    "mp_density",
    "mp_asymptotic_rates",
    "blocked_direct_link_rate",
]

_COND_FLOOR = 1e-12


def effective_channel(channels, phi, alpha, c=1):
    """``H1 + sqrt(alpha) * c * G1 diag(phi) H3``."""
    phi = np.asarray(phi, dtype=complex)
    return channels.H1 + c * math.sqrt(alpha) * channels.G1 @ (phi[:, None] * channels.H3)


def effective_rank(channels, phi, alpha, c=1, rtol=1e-8):
    """Numerical rank of the effective channel (singular values above ``rtol * s_max``)."""
    if c not in (1, -1):
        raise ValueError("c must be +1 or -1")
    return numerical_rank(effective_channel(channels, phi, alpha, c), rtol)


def _cond_gain(H):
    s = np.linalg.svd(np.asarray(H, dtype=complex), compute_uv=False)
    smax = float(s[0]) if s.size else 0.0
    smin = float(s[-1]) if s.size else 0.0
    cond = math.inf if smin < _COND_FLOOR * smax or smax == 0 else smax / smin
    return cond, smax**2


def condition_and_eigengain(channels, phi, alpha, convention="expected"):
    """Condition number and strongest eigenchannel gain of the primary channel.

    Parameters
    ----------
    convention : {"expected", "plus"}
        ``"expected"`` uses the average over the backscatter symbol, which
        for a symmetric symbol is ``H1`` alone. ``"plus"`` uses the
        effective channel with symbol ``+1``.

    Returns
    -------
    condition : float
        ``s_max / s_min``; ``inf`` when ``s_min < 1e-12 s_max``.
    gain : float
        ``s_max ** 2``.
    """
    if convention == "expected":
        H = channels.H1
    elif convention == "plus":
        H = effective_channel(channels, phi, alpha, 1)
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return _cond_gain(H)


def mp_density(x, beta):
    """Continuous part of the Marchenko-Pastur density for ratio ``beta``.

    For ``beta > 1`` the law also has an atom of mass ``1 - 1/beta`` at 0,
    which this function omits.
    """
    a, b = (1 - math.sqrt(beta)) ** 2, (1 + math.sqrt(beta)) ** 2
    x = np.asarray(x, dtype=float)
    inside = (x > a) & (x < b) & (x > 0)
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = np.sqrt((xi - a) * (b - xi)) / (2 * math.pi * beta * xi)
    return out


def _mp_integral(beta, fn, quad_points):
    """``int_a^b f_beta(x) fn(x) dx`` by Gauss-Legendre after ``x = a + (b - a) sin^2 u``.

    The substitution removes the square-root endpoint singularities.
    """
    a, b = (1 - math.sqrt(beta)) ** 2, (1 + math.sqrt(beta)) ** 2
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    u = 0.25 * math.pi * (nodes + 1.0)
    w = 0.25 * math.pi * weights
    su, cu = np.sin(u), np.cos(u)
    x = a + (b - a) * su**2
    # f_beta(x) dx = (b - a)^2 * 2 sin^2 cos^2 / (2 pi beta x) du
    dens = (b - a) ** 2 * su**2 * cu**2 / (math.pi * beta * x)
    return float(np.sum(w * dens * fn(x)))


def mp_asymptotic_rates(M, N1, P, sigma2, eta_direct, eta_cascade_K, quad_points=200):
    """Large-system primary rates with and without the surface, ``Q = P I``.

    Parameters
    ----------
    M, N1 : int
        Transmit and receive antennas; ``beta = M / N1``.
    P : float
        Per-antenna transmit power.
    sigma2 : float
        Noise power.
    eta_direct : float
        Direct-link path loss.
    eta_cascade_K : float
        Aggregate cascaded gain ``alpha * eta_g * eta_h * K``.
    quad_points : int
        Gauss-Legendre nodes, at least 100.

    Returns
    -------
    rate_with, rate_without : float
        ``M int f_beta(x) log2(1 + coeff x) dx`` with
        ``coeff = P (eta_direct + eta_cascade_K) N1 / sigma2`` and
        ``P eta_direct N1 / sigma2`` respectively.
    """
    if not M > 0 or not N1 > 0:
        raise ValueError("beta = M / N1 must be positive")
    if quad_points < 100:
        raise ValueError("quad_points must be at least 100")
    beta = M / N1
    c_with = P * (eta_direct + eta_cascade_K) * N1 / sigma2
    c_without = P * eta_direct * N1 / sigma2
    rate = lambda c: M * _mp_integral(beta, lambda x: np.log2(1.0 + c * x), quad_points)
    return rate(c_with), rate(c_without)


def blocked_direct_link_rate(Q, eff, sigma2):
    """``log2 det(I + F1 Q F1^H / sigma2)``, the primary rate with no direct link."""
    F1 = eff.F1
    return log2det_pd(np.eye(F1.shape[0]) + F1 @ np.asarray(Q, complex) @ F1.conj().T / sigma2)
