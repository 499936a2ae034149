"""Rician-faded channel generation from link geometry.

Each link is ``sqrt(eta(d)) * (sqrt(k/(k+1)) LoS + sqrt(1/(k+1)) NLoS)``
with a uniform-linear-array LoS term ``a_rx(aoa) a_tx(aod)^H`` and
CN(0, 1) NLoS entries.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import crandn
from .types import ChannelSet

__all__ = [
    "LINKS",
    "Link",
    "LinkGeometry",
    "path_loss",
    "steering_vector",
    "rician_channel",
    "generate_channels",
    "write_channel",
    "read_channel",
    "write_channel_set",
    "read_channel_set",
]

#: link names in generation order; the draw order fixes the random stream
LINKS = ("h1", "h2", "h3", "g1", "g2")

_ATTR = {"h1": "H1", "h2": "H2", "h3": "H3", "g1": "G1", "g2": "G2"}


@dataclass(frozen=True)
class Link:
    """One propagation link. ``kappa = math.inf`` gives pure line of sight."""

    distance: float
    kappa: float = 1.0
    aoa: float = 0.0
    aod: float = 0.0

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError(f"distance must be positive, got {self.distance}")
        if not self.kappa >= 0:
            raise ValueError(f"Rician factor must be nonnegative, got {self.kappa}")


def _default_links():
    pi = math.pi
    return {
        "h1": Link(1000.0, 1.0, 0.8 * pi, 0.6 * pi),
        "h2": Link(200.0, 1.0, 0.6 * pi, 0.8 * pi),
        "h3": Link(2.0, 1.0, 0.8 * pi, 1.2 * pi),
        "g1": Link(999.0, 1.0, 1.2 * pi, 0.4 * pi),
        "g2": Link(199.0, 1.0, 1.4 * pi, 0.5 * pi),
    }


@dataclass(frozen=True)
class LinkGeometry:
    """Per-link distance, Rician factor and angles plus shared propagation constants.

    Defaults are the 2.4 GHz desk scenario: 1000/200/2/999/199 m links,
    40 dB reference loss, exponent 2, half-wavelength spacing, every
    Rician factor 1.
    """

    links: dict = field(default_factory=_default_links)
    beta_db: float = 40.0
    gamma_e: float = 2.0
    spacing_ratio: float = 0.5
    random_angles: bool = False

    def __post_init__(self):
        missing = set(LINKS) - set(self.links)
        if missing:
            raise ValueError(f"missing links: {sorted(missing)}")
        if not self.spacing_ratio > 0:
            raise ValueError("spacing_ratio must be positive")

    def with_link(self, name, **changes):
        links = dict(self.links)
        links[name] = replace(links[name], **changes)
        return replace(self, links=links)

    def with_kappa(self, kappa, names=LINKS):
        g = self
        for name in names:
            g = g.with_link(name, kappa=kappa)
        return g


def path_loss(d, beta_db=40.0, gamma_e=2.0):
    """Large-scale gain ``10^(-beta_db/10) * d^(-gamma_e)``."""
    if not d > 0:
        raise ValueError(f"distance must be positive, got {d}")
    return 10.0 ** (-beta_db / 10.0) * d ** (-gamma_e)


def steering_vector(X, theta, spacing_ratio=0.5):
    """ULA response ``[exp(j 2 pi r x sin(theta))]_{x=0..X-1}``."""
    x = np.arange(X)
    return np.exp(1j * 2.0 * np.pi * spacing_ratio * x * np.sin(theta))


def rician_channel(rows, cols, eta, kappa, theta_aoa, theta_aod, spacing_ratio, rng):
    """One Rician matrix of shape ``(rows, cols)``.

    ``kappa = inf`` returns the scaled LoS term and draws nothing from
    ``rng``; ``kappa = 0`` is Rayleigh.
    """
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    los = np.outer(
        steering_vector(rows, theta_aoa, spacing_ratio),
        steering_vector(cols, theta_aod, spacing_ratio).conj(),
    )
    if math.isinf(kappa):
        return math.sqrt(eta) * los
    nlos = crandn(rng, rows, cols)
    return math.sqrt(eta) * (
        math.sqrt(kappa / (kappa + 1.0)) * los + math.sqrt(1.0 / (kappa + 1.0)) * nlos
    )


def generate_channels(config, geom, rng):
    """Draw ``H1, H2, H3, G1, G2`` for ``config`` in a fixed order.

    With ``geom.random_angles`` each link's angles are drawn uniformly on
    [0, 2 pi) from ``rng`` before its fading.
    """
    M, N1, N2, K = config.M, config.N1, config.N2, config.K
    shapes = {"h1": (N1, M), "h2": (N2, M), "h3": (K, M), "g1": (N1, K), "g2": (N2, K)}
    out = {}
    for name in LINKS:
        link = geom.links[name]
        aoa, aod = link.aoa, link.aod
        if geom.random_angles:
            aoa, aod = rng.uniform(0.0, 2.0 * np.pi, size=2)
        eta = path_loss(link.distance, geom.beta_db, geom.gamma_e)
        out[_ATTR[name]] = rician_channel(
            *shapes[name], eta, link.kappa, aoa, aod, geom.spacing_ratio, rng
        )
    return ChannelSet(**out)


# -- text format ------------------------------------------------------------
# header "rows cols", then one line per row of space-separated "re im" pairs


def write_channel(path_or_file, H):
    H = np.asarray(H, dtype=complex)
    lines = [f"{H.shape[0]} {H.shape[1]}"]
    for row in H:
        lines.append(" ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in row))
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as fh:
            fh.write(text)


def read_channel(path_or_file):
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
    else:
        with open(path_or_file) as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty channel file")
    try:
        rows, cols = (int(v) for v in lines[0].split())
    except ValueError as exc:
        raise ValueError(f"line 1: bad header {lines[0]!r}") from exc
    if len(lines) - 1 != rows:
        raise ValueError(f"expected {rows} data rows, found {len(lines) - 1}")
    H = np.empty((rows, cols), dtype=complex)
    for i, ln in enumerate(lines[1:]):
        vals = [float(v) for v in ln.split()]
        if len(vals) != 2 * cols:
            raise ValueError(f"line {i + 2}: expected {2 * cols} numbers, got {len(vals)}")
        H[i] = np.asarray(vals[0::2]) + 1j * np.asarray(vals[1::2])
    return H


def write_channel_set(directory, channels):
    """Write ``H1.txt`` ... ``G2.txt`` into ``directory``."""
    import os

    os.makedirs(directory, exist_ok=True)
    for attr in _ATTR.values():
        write_channel(os.path.join(directory, f"{attr}.txt"), getattr(channels, attr))


def read_channel_set(directory):
    import os

    return ChannelSet(
        **{attr: read_channel(os.path.join(directory, f"{attr}.txt")) for attr in _ATTR.values()}
    )
