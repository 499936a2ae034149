"""Shared data containers."""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = ["Status", "SystemConfig", "ChannelSet", "BeamformerSolution"]


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SystemConfig:
    """Scalar system parameters.

    Attributes
    ----------
    M, N1, N2 : int
        Antennas at the primary transmitter, primary receiver and
        secondary receiver.
    K : int
        Reflecting elements on the surface.
    L : int
        Primary symbols per secondary (backscatter) symbol.
    alpha : float
        Reflection efficiency, in (0, 1]. ``0`` is accepted to model a
        surface that reflects nothing.
    sigma2 : float
        Noise power in watts.
    R_s : float
        Required primary rate, bps/Hz.
    gamma : float
        Required backscatter SNR (linear).
    """

    M: int = 3
    N1: int = 3
    N2: int = 3
    K: int = 16
    L: int = 50
    alpha: float = 1.0
    sigma2: float = 1e-12
    R_s: float = 5.0
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("M", "N1", "N2", "K", "L"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.R_s < 0 or self.gamma < 0:
            raise ValueError("R_s and gamma must be nonnegative")
        if self.N2 < self.S:
            raise ValueError("need N2 >= S = min(M, N1, N2)")

    @property
    def S(self):
        """Number of primary data streams."""
        return min(self.M, self.N1, self.N2)

    def replace(self, **changes):
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class ChannelSet:
    """The five baseband channel matrices.

    ``H1`` is N1 x M (PTx to PRx), ``H2`` N2 x M (PTx to SRx), ``H3`` K x M
    (PTx to surface), ``G1`` N1 x K (surface to PRx), ``G2`` N2 x K
    (surface to SRx).
    """

    H1: np.ndarray
    H2: np.ndarray
    H3: np.ndarray
    G1: np.ndarray
    G2: np.ndarray

    def __post_init__(self):
        for name in ("H1", "H2", "H3", "G1", "G2"):
            a = np.asarray(getattr(self, name), dtype=complex)
            if a.ndim != 2:
                raise ValueError(f"{name} must be a matrix")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} has non-finite entries")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        N1, M = self.H1.shape
        N2 = self.H2.shape[0]
        K = self.H3.shape[0]
        expected = {"H2": (N2, M), "H3": (K, M), "G1": (N1, K), "G2": (N2, K)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape}"
                )

    @property
    def dims(self):
        """``(M, N1, N2, K)``."""
        return self.H1.shape[1], self.H1.shape[0], self.H2.shape[0], self.H3.shape[0]

    def check(self, config):
        """Raise if the shapes disagree with ``config``."""
        if self.dims != (config.M, config.N1, config.N2, config.K):
            raise ValueError(
                f"channel dims {self.dims} do not match config "
                f"{(config.M, config.N1, config.N2, config.K)}"
            )

    def replace(self, **changes):
        from dataclasses import replace

        return replace(self, **changes)


@dataclass
class BeamformerSolution:
    """Joint design returned by every policy.

    ``Q`` is the realized covariance ``W @ W^H`` and ``power`` its trace.
    The rate and SNR fields are evaluated at ``(W, phi)``.
    """

    Q: np.ndarray
    W: np.ndarray
    phi: np.ndarray
    power: float
    R_p: float
    R_bs: float
    gamma_bc: float
    status: Status
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @classmethod
    def failed(cls, config, status, phi=None, iterations=0, **info):
        M, S = config.M, config.S
        phi = np.ones(config.K, complex) if phi is None else phi
        nan = float("nan")
        return cls(
            Q=np.zeros((M, M), complex),
            W=np.zeros((M, S), complex),
            phi=phi,
            power=nan,
            R_p=nan,
            R_bs=nan,
            gamma_bc=nan,
            status=status,
            iterations=iterations,
            info=info,
        )
