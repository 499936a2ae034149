import numpy as np
import pytest

from symbiris.channels import LinkGeometry, generate_channels
from symbiris.linalg import crandn
from symbiris.types import ChannelSet, SystemConfig


def unit_channels(rng, M=3, N1=3, N2=3, K=8, cascade=0.5):
    """CN(0, 1) direct links and CN(0, cascade^2) surface links, for sigma2 = 1."""
    return ChannelSet(
        H1=crandn(rng, N1, M),
        H2=crandn(rng, N2, M),
        H3=cascade * crandn(rng, K, M),
        G1=cascade * crandn(rng, N1, K),
        G2=cascade * crandn(rng, N2, K),
    )


def random_psd(rng, n, rank=None):
    A = crandn(rng, n, rank or n)
    return A @ A.conj().T


@pytest.fixture
def desk():
    """Desk-scale config with the default geometry and a seed-0 channel draw."""
    cfg = SystemConfig()
    return cfg, generate_channels(cfg, LinkGeometry(), np.random.default_rng(0))


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line; ``criterion(n, ok, detail)`` also asserts ``ok``."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
        _CRITERIA.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA, key=lambda item: item[0]):
            terminalreporter.write_line(line)
