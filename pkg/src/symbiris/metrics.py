"""Closed-form link metrics: rates averaged over the BPSK backscatter symbol and the backscatter SNR."""

from dataclasses import dataclass

import numpy as np

from .linalg import log2det_pd

__all__ = [
    "EffectiveChannels",
    "effective_channels",
    "signal_covariance",
    "primary_rate",
    "secondary_rate",
    "backscatter_snr",
    "snr_c_monte_carlo",
    "evaluate",
    "constraint_ratios",
]


@dataclass(frozen=True)
class EffectiveChannels:
    """Direct links and the reflected links ``F_m = sqrt(alpha) G_m diag(phi) H3``."""

    H1: np.ndarray
    H2: np.ndarray
    F1: np.ndarray
    F2: np.ndarray

    def htilde(self, m, c):
        """``H_m + c F_m`` for receiver ``m`` in {1, 2} and symbol ``c`` = +-1."""
        if m == 1:
            return self.H1 + c * self.F1
        return self.H2 + c * self.F2


def effective_channels(channels, phi, alpha):
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (channels.H3.shape[0],):
        raise ValueError(f"phi has shape {phi.shape}, expected ({channels.H3.shape[0]},)")
    PH3 = phi[:, None] * channels.H3
    s = np.sqrt(alpha)
    return EffectiveChannels(
        H1=channels.H1, H2=channels.H2, F1=s * channels.G1 @ PH3, F2=s * channels.G2 @ PH3
    )


def _gram(A, Q, sigma2):
    return (A @ Q @ A.conj().T) / sigma2


def signal_covariance(Q, eff, sigma2, c, m=1):
    """``(1/sigma2) (H_m + c F_m) Q (H_m + c F_m)^H``; ``m = 1`` is the primary receiver."""
    return _gram(eff.htilde(m, c), np.asarray(Q, dtype=complex), sigma2)


def _avg_rate(Q, eff, sigma2, m):
    Q = np.asarray(Q, dtype=complex)
    total = 0.0
    for c in (1.0, -1.0):
        G = signal_covariance(Q, eff, sigma2, c, m)
        total += log2det_pd(np.eye(G.shape[0]) + G)
    return 0.5 * total


def primary_rate(Q, eff, sigma2):
    """Primary rate in bps/Hz: exact two-point average over c = +-1."""
    return _avg_rate(Q, eff, sigma2, 1)


def secondary_rate(Q, eff, sigma2):
    """Rate of the primary symbols decoded at the secondary receiver."""
    return _avg_rate(Q, eff, sigma2, 2)


def backscatter_snr(Q, eff, sigma2, L):
    """``(L/sigma2) tr(F2 Q F2^H)``; the reflection efficiency is already in ``F2``."""
    Q = np.asarray(Q, dtype=complex)
    return float(L * np.real(np.trace(eff.F2 @ Q @ eff.F2.conj().T)) / sigma2)


def snr_c_monte_carlo(W, eff, sigma2, L, num_trials, rng, symbols=None):
    """Sample mean of the exact combined SNR ``sum_l ||F2 W s(l)||^2 / sigma2``.

    ``s(l)`` are CN(0, I) unless ``symbols`` (shape ``(L, S)``) is given,
    in which case that fixed block is used for every trial.
    """
    W = np.asarray(W, dtype=complex)
    if L < 1:
        raise ValueError("L must be at least 1")
    FW = eff.F2 @ W
    if symbols is not None:
        s = np.asarray(symbols, dtype=complex)
        y = s @ FW.T
        return float(np.sum(np.abs(y) ** 2) / sigma2)
    S = W.shape[1]
    acc = 0.0
    done = 0
    chunk = max(1, 200_000 // (L * S))
    while done < num_trials:
        n = min(chunk, num_trials - done)
        s = (rng.standard_normal((n, L, S)) + 1j * rng.standard_normal((n, L, S))) / np.sqrt(2)
        y = s @ FW.T
        acc += float(np.sum(np.abs(y) ** 2))
        done += n
    return acc / (num_trials * sigma2)


def evaluate(Q, channels, phi, config):
    """``(R_p, R_bs, gamma_bc)`` for covariance ``Q`` and phases ``phi``."""
    eff = effective_channels(channels, phi, config.alpha)
    return (
        primary_rate(Q, eff, config.sigma2),
        secondary_rate(Q, eff, config.sigma2),
        backscatter_snr(Q, eff, config.sigma2, config.L),
    )


def constraint_ratios(R_p, R_bs, snr, config):
    """Achieved-over-required ratios; a zero requirement maps to ``inf``."""
    def ratio(v, req):
        return np.inf if req <= 0 else v / req

    return ratio(R_p, config.R_s), ratio(R_bs, config.R_s), ratio(snr, config.gamma)
