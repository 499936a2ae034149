import io
import math

import numpy as np
import pytest

from symbiris.ao import (
    AOSettings,
    Branch,
    IterationTrace,
    _project,
    _rate_term,
    element_objective,
    element_subproblem_data,
    initialize_phi,
    recover_w,
    run_ao,
    solve_element,
)
from symbiris.baselines import water_filling_no_ris
from symbiris.detmax import solve_p1a
from symbiris.linalg import crandn, log2det_pd
from symbiris.metrics import backscatter_snr, effective_channels, evaluate
from symbiris.types import ChannelSet, Status, SystemConfig

from conftest import random_psd, unit_channels


def direct_term(channels, Q, phi, k, phik, m, n, config):
    p = np.array(phi, complex)
    p[k] = phik
    eff = effective_channels(channels, p, config.alpha)
    H = eff.htilde(m, (-1.0) ** n)
    return log2det_pd(np.eye(H.shape[0]) + H @ Q @ H.conj().T / config.sigma2)


def _instance(seed, K=6, cascade=0.5):
    rng = np.random.default_rng(seed)
    ch = unit_channels(rng, K=K, cascade=cascade)
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, K))
    Q = random_psd(rng, 3) / 3
    cfg = SystemConfig(K=K, sigma2=1.0, R_s=3.0, gamma=2.0, L=10)
    return rng, ch, phi, Q, cfg


@pytest.mark.parametrize("seed", range(5))
def test_branch_formula_matches_direct_log_det(seed):
    rng, ch, phi, Q, cfg = _instance(seed)
    samples = np.exp(1j * rng.uniform(0, 2 * np.pi, 16))
    for k in range(cfg.K):
        data = element_subproblem_data(ch, Q, phi, k, cfg)
        for (m, n), term in data.terms.items():
            assert term.branch is Branch.GENERIC
            for z in samples:
                ref = direct_term(ch, Q, phi, k, z, m, n, cfg)
                assert abs(term.value(z) - ref) <= 1e-8 * max(1.0, abs(ref))


def test_snr_term_matches_direct():
    rng, ch, phi, Q, cfg = _instance(7)
    for k in range(cfg.K):
        data = element_subproblem_data(ch, Q, phi, k, cfg)
        for z in np.exp(1j * rng.uniform(0, 2 * np.pi, 8)):
            p = phi.copy()
            p[k] = z
            ref = backscatter_snr(Q, effective_channels(ch, p, cfg.alpha), cfg.sigma2, cfg.L)
            assert float(data.snr(z)) == pytest.approx(ref, rel=1e-10)


def test_single_element_snr_is_constant():
    rng, ch, _, Q, cfg = _instance(8, K=1)
    data = element_subproblem_data(ch, Q, np.ones(1), 0, cfg)
    assert data.B_k == 0
    h = ch.H3[0].conj()
    expect = np.linalg.norm(ch.G2[:, 0]) ** 2 * np.real(h.conj() @ Q @ h)
    assert data.A_k == pytest.approx(expect, rel=1e-12)


def test_rank_zero_branch_when_q_kills_element():
    rng, ch, phi, _, cfg = _instance(9)
    k = 2
    h = ch.H3[k].conj()
    P = np.eye(3) - np.outer(h, h.conj()) / np.linalg.norm(h) ** 2
    Q = P @ random_psd(rng, 3) @ P  # Q h_k = 0
    data = element_subproblem_data(ch, Q, phi, k, cfg)
    for (m, n), term in data.terms.items():
        assert term.branch is Branch.RANK_ZERO
        for z in (1.0, 1j, np.exp(2.1j)):
            assert term.value(z) == pytest.approx(direct_term(ch, Q, phi, k, z, m, n, cfg), abs=1e-8)


def test_nilpotent_branch():
    rng = np.random.default_rng(10)
    A = random_psd(rng, 3) + np.eye(3)
    b = crandn(rng, 3)
    c = crandn(rng, 3)
    u = np.linalg.solve(A, b)
    c = c - (u.conj() @ c) / (u.conj() @ u) * u  # c^H A^{-1} b = 0
    term = _rate_term(A, b, 0.3 * c)
    assert term.branch is Branch.NILPOTENT
    B = 0.3 * np.outer(b, c.conj())
    for z in np.exp(1j * np.linspace(0, 6, 7)):
        ref = log2det_pd(A + z * B + np.conj(z) * B.conj().T)
        assert term.value(z) == pytest.approx(ref, abs=1e-9)


def test_generic_term_on_random_matrices():
    rng = np.random.default_rng(11)
    for _ in range(20):
        A = random_psd(rng, 4) + 4 * np.eye(4)
        b, c = crandn(rng, 4), 0.5 * crandn(rng, 4)
        term = _rate_term(A, b, c)
        assert term.branch is Branch.GENERIC
        B = np.outer(b, c.conj())
        z = np.exp(1j * rng.uniform(0, 2 * np.pi))
        ref = log2det_pd(A + z * B + np.conj(z) * B.conj().T)
        assert term.value(z) == pytest.approx(ref, abs=1e-9)


# -- element solve -----------------------------------------------------------------


def test_projection():
    z = np.exp(0.7j)
    assert _project(z) == pytest.approx(z, abs=1e-15)
    assert _project(0) == 1
    assert _project(0.5j) == pytest.approx(1j)


def test_flat_subproblem_returns_current_phase():
    rng, ch, phi, _, cfg = _instance(12)
    k = 1
    h = ch.H3[k].conj()
    P = np.eye(3) - np.outer(h, h.conj()) / np.linalg.norm(h) ** 2
    Q = P @ random_psd(rng, 3) @ P
    ch0 = ch.replace(G2=np.zeros_like(ch.G2))
    cfg0 = cfg.replace(gamma=0.0, R_s=0.5)
    data = element_subproblem_data(ch0, Q, phi, k, cfg0)
    phi_k, t, feasible = solve_element(data, cfg0)
    assert phi_k == data.phi_k
    assert feasible == bool(t >= 1 - 1e-9)


def test_snr_alone_aligns_with_b():
    rng, ch, phi, Q, cfg = _instance(13)
    cfg = cfg.replace(R_s=0.0)
    data = element_subproblem_data(ch, Q, phi, 3, cfg)
    phi_k, _, _ = solve_element(data, cfg)
    assert np.angle(phi_k * data.B_k) == pytest.approx(0.0, abs=1e-5)


@pytest.mark.parametrize("seed", range(6))
def test_analytic_matches_grid(seed):
    rng, ch, phi, Q, cfg = _instance(20 + seed)
    grid = AOSettings(subproblem="GridSearch", grid_resolution=0.005)
    for k in (0, 3):
        data = element_subproblem_data(ch, Q, phi, k, cfg)
        _, t_a, _ = solve_element(data, cfg)
        _, t_g, _ = solve_element(data, cfg, grid)
        assert t_a >= t_g - 1e-3


def test_grid_subproblem_uses_half_open_radian_grid():
    rng, ch, phi, Q, cfg = _instance(30)
    data = element_subproblem_data(ch, Q, phi, 0, cfg)
    phi_k, t, _ = solve_element(data, cfg, AOSettings(subproblem="GridSearch", grid_resolution=0.5))
    theta = np.angle(phi_k) % (2 * np.pi)
    assert min(abs(theta - 0.5 * np.arange(13))) < 1e-12
    assert t == pytest.approx(float(element_objective(data, cfg, phi_k)))


def test_settings_validation():
    with pytest.raises(ValueError):
        AOSettings(subproblem="Other")
    with pytest.raises(ValueError):
        AOSettings(subproblem="GridSearch", grid_resolution=0.0)
    with pytest.raises(ValueError):
        AOSettings(max_outer=0)


# -- initialization and recovery --------------------------------------------------


def test_initialization_without_reflected_link_is_constant():
    rng = np.random.default_rng(40)
    ch = unit_channels(rng, K=5).replace(G1=np.zeros((3, 5)))
    phi = initialize_phi(ch, SystemConfig(K=5))
    np.testing.assert_allclose(phi, phi[0] * np.ones(5), atol=1e-12)
    np.testing.assert_allclose(np.abs(phi), 1.0)


def test_initialization_scalar_positive_channels():
    one = np.array([[1.0]])
    ch = ChannelSet(H1=2 * one, H2=one, H3=0.5 * one, G1=3 * one, G2=one)
    phi = initialize_phi(ch, SystemConfig(M=1, N1=1, N2=1, K=1))
    assert phi[0] == pytest.approx(1j, abs=1e-12)


def test_initialization_unit_and_reproducible(desk):
    cfg, ch = desk
    a, b = initialize_phi(ch, cfg), initialize_phi(ch, cfg)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)


def test_recover_w_lossless_cases():
    rng, ch, phi, _, cfg = _instance(41)
    W = recover_w(np.eye(3), ch, phi, cfg)
    np.testing.assert_allclose(np.abs(W), np.eye(3), atol=1e-12)
    Q = random_psd(rng, 3, rank=2)
    W = recover_w(Q, ch, phi, cfg)
    np.testing.assert_allclose(W @ W.conj().T, Q, atol=1e-10)


def test_recover_w_truncation_restores_constraints():
    rng = np.random.default_rng(42)
    ch = unit_channels(rng, M=4, N1=2, N2=2, K=4)
    cfg = SystemConfig(M=4, N1=2, N2=2, K=4, sigma2=1.0, R_s=3.0, gamma=2.0, L=10)
    phi = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
    # feasible full-rank covariance, then truncation to S = 2 streams
    Q = solve_p1a(ch, phi, cfg).X_star + 0.3 * np.eye(4)
    W = recover_w(Q, ch, phi, cfg)
    assert W.shape == (4, 2)
    R_p, R_bs, snr = evaluate(W @ W.conj().T, ch, phi, cfg)
    assert R_p >= cfg.R_s - 1e-6 and R_bs >= cfg.R_s - 1e-6 and snr >= cfg.gamma * (1 - 1e-6)
    lam = np.sort(np.linalg.eigvalsh(Q))[::-1]
    assert np.real(np.trace(W @ W.conj().T)) >= lam[:2].sum() * (1 - 1e-12)


# -- outer loop ------------------------------------------------------------------------


def test_invisible_surface_gives_water_filling(desk):
    cfg, ch = desk
    cfg = cfg.replace(alpha=0.0, gamma=0.0, K=4)
    ch = ch.replace(H3=ch.H3[:4], G1=ch.G1[:, :4], G2=ch.G2[:, :4], H2=ch.H1)
    sol, _ = run_ao(ch, cfg)
    assert sol.power == pytest.approx(water_filling_no_ris(ch.H1, cfg).power, rel=1e-4)


def test_ao_trace_and_final_feasibility(desk):
    cfg, ch = desk
    sol, trace = run_ao(ch, cfg)
    assert sol.status == Status.OPTIMAL
    p = trace.power
    assert all(b <= a * (1 + 1e-7) for a, b in zip(p, p[1:]))
    for slacks, accepted in zip(trace.slacks, trace.accepted):
        assert all(t >= 1 - 1e-9 for t, ok in zip(slacks, accepted) if ok)
    R_p, R_bs, snr = evaluate(sol.Q, ch, sol.phi, cfg)
    assert R_p >= cfg.R_s - 1e-6 and R_bs >= cfg.R_s - 1e-6 and snr >= cfg.gamma * (1 - 1e-6)
    assert sol.power == pytest.approx(np.real(np.trace(sol.W @ sol.W.conj().T)), rel=1e-8)
    np.testing.assert_allclose(np.abs(sol.phi), 1.0, atol=1e-12)

    buf = io.StringIO()
    trace.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(IterationTrace.CSV_COLUMNS)
    assert len(lines) == len(p) + 1


def test_ao_reports_initial_infeasibility():
    rng = np.random.default_rng(43)
    ch = unit_channels(rng, K=4).replace(G2=np.zeros((3, 4)))
    cfg = SystemConfig(K=4, sigma2=1.0, R_s=2.0, gamma=1.0)
    sol, trace = run_ao(ch, cfg)
    assert sol.status == Status.INFEASIBLE and not trace.power
