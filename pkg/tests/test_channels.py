import io
import math

import numpy as np
import pytest

from symbiris.channels import (
    LinkGeometry,
    generate_channels,
    path_loss,
    read_channel,
    read_channel_set,
    rician_channel,
    steering_vector,
    write_channel,
    write_channel_set,
)
from symbiris.linalg import numerical_rank
from symbiris.types import SystemConfig


def test_path_loss_examples():
    assert path_loss(1, 40, 2) == pytest.approx(1e-4)
    assert path_loss(1000, 40, 2) == pytest.approx(1e-10)
    assert path_loss(2, 0, 0) == 1.0
    with pytest.raises(ValueError):
        path_loss(0.0)


def test_steering_vector_examples():
    np.testing.assert_allclose(steering_vector(2, 0.0, 0.5), [1, 1])
    np.testing.assert_allclose(steering_vector(2, math.pi / 2, 0.5), [1, -1], atol=1e-15)
    a = steering_vector(4, 0.37, 0.5)
    np.testing.assert_allclose(np.abs(a), 1.0, atol=0)


def test_rician_los_only_is_rank_one_and_consumes_no_draws():
    rng = np.random.default_rng(0)
    state = rng.bit_generator.state
    H = rician_channel(4, 3, 1e-3, math.inf, 0.3, 1.1, 0.5, rng)
    assert numerical_rank(H) == 1
    assert rng.bit_generator.state == state


def test_rician_zero_eta():
    H = rician_channel(3, 3, 0.0, 1.0, 0.3, 1.1, 0.5, np.random.default_rng(0))
    assert np.all(H == 0)


@pytest.mark.parametrize("kappa", [0.0, 1.0, 10.0])
def test_rician_second_moment(kappa):
    eta = 2e-3
    rng = np.random.default_rng(11)
    acc = sum(np.mean(np.abs(rician_channel(2, 2, eta, kappa, 0.3, 1.1, 0.5, rng)) ** 2) for _ in range(10_000))
    assert abs(acc / 10_000 - eta) <= 0.03 * eta


def test_rayleigh_entry_variance():
    rng = np.random.default_rng(12)
    samples = np.array([rician_channel(1, 1, 0.5, 0.0, 0, 0, 0.5, rng)[0, 0] for _ in range(10_000)])
    assert abs(np.var(samples) - 0.5) <= 0.03 * 0.5


def test_generate_channels_shapes_and_determinism():
    cfg = SystemConfig(M=3, N1=2, N2=4, K=5)
    a = generate_channels(cfg, LinkGeometry(), np.random.default_rng(3))
    b = generate_channels(cfg, LinkGeometry(), np.random.default_rng(3))
    assert a.H1.shape == (2, 3) and a.H2.shape == (4, 3) and a.H3.shape == (5, 3)
    assert a.G1.shape == (2, 5) and a.G2.shape == (4, 5)
    for name in ("H1", "H2", "H3", "G1", "G2"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_default_geometry_values():
    g = LinkGeometry()
    d = {n: l.distance for n, l in g.links.items()}
    assert d == {"h1": 1000, "h2": 200, "h3": 2, "g1": 999, "g2": 199}
    assert all(l.kappa == 1.0 for l in g.links.values())
    assert (g.beta_db, g.gamma_e, g.spacing_ratio) == (40.0, 2.0, 0.5)


def test_all_los_gives_rank_one():
    cfg = SystemConfig(M=4, N1=4, N2=4, K=6)
    ch = generate_channels(cfg, LinkGeometry().with_kappa(math.inf), np.random.default_rng(0))
    for name in ("H1", "H2", "H3", "G1", "G2"):
        assert numerical_rank(getattr(ch, name)) == 1


def test_random_angles_change_los():
    cfg = SystemConfig(K=4)
    geo = LinkGeometry(random_angles=True).with_kappa(math.inf)
    a = generate_channels(cfg, geo, np.random.default_rng(1))
    b = generate_channels(cfg, geo, np.random.default_rng(2))
    assert not np.allclose(a.H1, b.H1)


def test_text_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(5)
    H = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    buf = io.StringIO()
    write_channel(buf, H)
    assert buf.getvalue().splitlines()[0] == "3 2"
    buf.seek(0)
    np.testing.assert_array_equal(read_channel(buf), H)

    ch = generate_channels(SystemConfig(K=4), LinkGeometry(), rng)
    write_channel_set(tmp_path / "set", ch)
    back = read_channel_set(tmp_path / "set")
    np.testing.assert_array_equal(back.G2, ch.G2)


def test_read_channel_errors():
    with pytest.raises(ValueError, match="data rows"):
        read_channel(io.StringIO("2 1\n1 0\n"))
    with pytest.raises(ValueError, match="line 2"):
        read_channel(io.StringIO("1 2\n1 0\n"))
