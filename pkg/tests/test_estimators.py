"""Tests for pilot sounding and the LS / LMMSE / sparse-recovery estimators."""
from __future__ import annotations

import math

import numpy as np
import pytest
from sklearn.base import clone

from nearsplit.channel import (
    ChannelTensor,
    PathSpec,
    normalize_for_snr,
    sample_scenario,
    synthesize_channel,
)
from nearsplit.config import SystemConfig
from nearsplit.dictionary import build_nba, build_physical_grid, build_si_nearfield
from nearsplit.estimators import (
    EstimateReport,
    LmmseEstimator,
    LsEstimator,
    OmpEstimator,
    PilotFrame,
    estimate_covariance,
    lmmse_estimate,
    ls_estimate,
    make_pilot_matrix,
    nmse,
    nmse_per_user,
    omp_run,
    reconstruct,
    report_from_json,
    sound,
)
from nearsplit.wavefield import PolarPoint, nb_deltas, steering_vector


def small_cfg(**kw) -> SystemConfig:
    base = dict(n_antennas=16, n_subcarriers=4, n_pilots=16, n_users=4)
    base.update(kw)
    return SystemConfig(**base)


def random_tensor(cfg: SystemConfig, seed: int, bounds=(0.02, 0.12)) -> ChannelTensor:
    scenario = sample_scenario(cfg, 3, seed, range_bounds_m=bounds)
    tensor, _ = normalize_for_snr(synthesize_channel(scenario, cfg))
    return tensor


# ---------------------------------------------------------------- pilots


def test_random_phase_pilots_are_constant_modulus() -> None:
    f = make_pilot_matrix(32, 12, 0)
    assert f.shape == (12, 32)
    np.testing.assert_allclose(np.abs(f), 1.0 / math.sqrt(32), atol=1e-14)


def test_random_phase_pilots_nearly_isotropic_on_average() -> None:
    # E{F^H F} = (P/N) I: the off-diagonal sample mean shrinks over seeds.
    acc = np.zeros((16, 16), dtype=np.complex128)
    for seed in range(300):
        f = make_pilot_matrix(16, 8, seed)
        acc += f.conj().T @ f
    acc /= 300
    off = acc - np.diag(np.diag(acc))
    assert np.abs(off).max() < 0.05
    np.testing.assert_allclose(np.diag(acc).real, 8 / 16, atol=1e-12)


def test_orthonormal_pilots() -> None:
    f = make_pilot_matrix(8, 12, 3, mode="orthonormal")
    np.testing.assert_allclose(f.conj().T @ f, np.eye(8), atol=1e-10)
    with pytest.raises(ValueError):
        make_pilot_matrix(8, 4, 3, mode="orthonormal")


def test_pilot_matrix_validation() -> None:
    with pytest.raises(ValueError):
        make_pilot_matrix(0, 4, 1)
    with pytest.raises(ValueError):
        make_pilot_matrix(4, 0, 1)
    with pytest.raises(ValueError):
        make_pilot_matrix(4, 4, -1)
    with pytest.raises(ValueError):
        make_pilot_matrix(4, 4, 1, mode="hadamard")


# ---------------------------------------------------------------- sounding


def test_sound_noiseless_is_exact_projection() -> None:
    cfg = small_cfg()
    tensor = random_tensor(cfg, 1)
    f = make_pilot_matrix(16, 9, 2)
    frame = sound(tensor, f, 0.0, 5)
    manual = np.einsum("pn,kmn->kmp", f, tensor.h)
    np.testing.assert_array_equal(frame.y, manual)
    assert frame.noise_var == 0.0


def test_sound_noise_variance_and_linearity() -> None:
    zeros = ChannelTensor(h=np.zeros((4, 25, 8), dtype=complex))
    f = make_pilot_matrix(8, 1000, 0)
    frame = sound(zeros, f, 0.7, 99)
    sample_var = float(np.mean(np.abs(frame.y) ** 2))
    assert sample_var == pytest.approx(0.7, rel=0.02)
    # Same seed, same noise draw: doubling the channel adds exactly F h.
    cfg = small_cfg()
    tensor = random_tensor(cfg, 3)
    f2 = make_pilot_matrix(16, 9, 2)
    y1 = sound(tensor, f2, 0.2, 42).y
    y2 = sound(ChannelTensor(h=2.0 * tensor.h), f2, 0.2, 42).y
    np.testing.assert_allclose(
        y2 - y1, np.einsum("pn,kmn->kmp", f2, tensor.h), atol=1e-12
    )


def test_sound_and_frame_validation() -> None:
    cfg = small_cfg()
    tensor = random_tensor(cfg, 1)
    f = make_pilot_matrix(8, 4, 0)
    with pytest.raises(ValueError):
        sound(tensor, f, 0.1, 1)  # 8 != 16 antennas
    with pytest.raises(ValueError):
        sound(tensor, make_pilot_matrix(16, 4, 0), -0.1, 1)
    with pytest.raises(ValueError):
        PilotFrame(f_matrix=f, noise_var=0.1, y=np.zeros((2, 3), dtype=complex))
    with pytest.raises(ValueError):
        PilotFrame(f_matrix=f, noise_var=0.1, y=np.zeros((2, 3, 5), dtype=complex))


# ---------------------------------------------------------------- NMSE


def test_nmse_trivial_values() -> None:
    cfg = small_cfg()
    tensor = random_tensor(cfg, 4)
    assert nmse(tensor, tensor.h) == 0.0
    assert nmse(tensor, np.zeros_like(tensor.h)) == pytest.approx(1.0, rel=1e-12)
    doubled = nmse(tensor, 2.0 * tensor.h)
    assert doubled == pytest.approx(1.0, rel=1e-12)
    per_user = nmse_per_user(tensor, np.zeros_like(tensor.h))
    assert per_user.shape == (4,)
    with pytest.raises(ValueError):
        nmse(tensor, tensor.h[:, :, :8])
    zero = ChannelTensor(h=np.zeros((1, 2, 3), dtype=complex))
    with pytest.raises(ValueError):
        nmse(zero, zero.h)


# ---------------------------------------------------------------- LS


def test_ls_noiseless_recovery_is_exact() -> None:
    cfg = small_cfg()
    tensor = random_tensor(cfg, 5)
    f = make_pilot_matrix(16, 16, 5, mode="orthonormal")
    frame = sound(tensor, f, 0.0, 1)
    h_hat = ls_estimate(frame)
    assert nmse(tensor, h_hat) < 1e-20


def test_ls_nmse_tracks_noise_level() -> None:
    # With orthonormal full-rank pilots and unit-power channels the LS error
    # floor equals the noise variance.
    cfg = small_cfg()
    f = make_pilot_matrix(16, 16, 5, mode="orthonormal")
    ls = LsEstimator().fit(f)
    vals = []
    for t in range(100):
        tensor = random_tensor(cfg, 1000 + t)
        frame = sound(tensor, f, 0.1, 2000 + t)
        vals.append(nmse(tensor, ls.predict(frame)))
    mean = float(np.mean(vals))
    assert 0.05 < mean < 0.2


def test_ls_zero_measurements_give_zero_estimate() -> None:
    f = make_pilot_matrix(8, 8, 1, mode="orthonormal")
    frame = PilotFrame(f_matrix=f, noise_var=0.0, y=np.zeros((2, 3, 8), dtype=complex))
    np.testing.assert_allclose(ls_estimate(frame), 0.0, atol=1e-14)


def test_ls_requires_orthonormal_full_rank_pilots() -> None:
    with pytest.raises(ValueError):
        LsEstimator().fit(make_pilot_matrix(16, 8, 0))  # P < N
    with pytest.raises(ValueError):
        LsEstimator().fit(make_pilot_matrix(8, 12, 0))  # not orthonormal
    with pytest.raises(RuntimeError):
        LsEstimator().predict(
            PilotFrame(
                f_matrix=make_pilot_matrix(4, 4, 0),
                noise_var=0.0,
                y=np.zeros((1, 1, 4), dtype=complex),
            )
        )


# ---------------------------------------------------------------- LMMSE


def test_lmmse_shrinks_to_zero_at_huge_noise() -> None:
    cfg = small_cfg()
    tensor = random_tensor(cfg, 6)
    f = make_pilot_matrix(16, 16, 5, mode="orthonormal")
    cov = estimate_covariance(cfg, 50, 9, range_bounds_m=(0.02, 0.12))
    frame = sound(tensor, f, 1e12, 3)
    h_hat = lmmse_estimate(frame, cov)
    assert float(np.max(np.abs(h_hat))) < 1e-3


def test_lmmse_identity_prior_noiseless_equals_ls() -> None:
    cfg = small_cfg()
    tensor = random_tensor(cfg, 7)
    f = make_pilot_matrix(16, 16, 5, mode="orthonormal")
    cov = np.broadcast_to(np.eye(16, dtype=complex), (4, 16, 16)).copy()
    frame = sound(tensor, f, 0.0, 1)
    np.testing.assert_allclose(lmmse_estimate(frame, cov), ls_estimate(frame), atol=1e-10)


def test_lmmse_scalar_wiener_gain() -> None:
    # N = P = M = 1 with unit prior: h_hat = y / (1 + sigma^2).
    f = np.ones((1, 1), dtype=complex)
    cov = np.ones((1, 1, 1), dtype=complex)
    y = np.full((1, 1, 1), 2.0 + 1.0j)
    frame = PilotFrame(f_matrix=f, noise_var=0.5, y=y)
    h_hat = lmmse_estimate(frame, cov)
    np.testing.assert_allclose(h_hat, y / 1.5, atol=1e-14)


def test_lmmse_beats_ls_with_matched_prior() -> None:
    cfg = small_cfg(n_antennas=32, n_pilots=32)
    f = make_pilot_matrix(32, 32, 5, mode="orthonormal")
    cov = estimate_covariance(cfg, 1000, 99, range_bounds_m=(0.1, 0.45))
    lmmse = LmmseEstimator().fit(f, cov)
    ls = LsEstimator().fit(f)
    noise_var = 10 ** (-0.5)
    ls_vals, lm_vals = [], []
    for t in range(100):
        tensor = random_tensor(cfg, 3000 + t, bounds=(0.1, 0.45))
        frame = sound(tensor, f, noise_var, 4000 + t)
        ls_vals.append(nmse(tensor, ls.predict(frame)))
        lm_vals.append(nmse(tensor, lmmse.predict(frame)))
    assert float(np.mean(lm_vals)) < float(np.mean(ls_vals))


def test_lmmse_validation() -> None:
    f = make_pilot_matrix(8, 8, 1, mode="orthonormal")
    good = np.broadcast_to(np.eye(8, dtype=complex), (2, 8, 8)).copy()
    bad_shape = np.ones((2, 8, 4), dtype=complex)
    with pytest.raises(ValueError):
        LmmseEstimator().fit(f, bad_shape)
    with pytest.raises(ValueError):
        LmmseEstimator().fit(f, np.eye(4, dtype=complex)[None])
    skew = good.copy()
    skew[0, 0, 1] = 1.0
    with pytest.raises(ValueError):
        LmmseEstimator().fit(f, skew)
    with pytest.raises(RuntimeError):
        LmmseEstimator().predict(
            PilotFrame(f_matrix=f, noise_var=0.0, y=np.zeros((1, 2, 8), dtype=complex))
        )


def test_estimate_covariance_properties() -> None:
    cfg = small_cfg(n_antennas=8, n_pilots=8)
    cov = estimate_covariance(cfg, 30, 1, range_bounds_m=(0.01, 0.03))
    assert cov.shape == (4, 8, 8)
    np.testing.assert_allclose(cov, np.conj(np.transpose(cov, (0, 2, 1))), atol=1e-12)
    for m in range(4):
        eigs = np.linalg.eigvalsh(cov[m])
        assert eigs.min() > -1e-10
    sector = estimate_covariance(
        cfg, 30, 1, range_bounds_m=(0.01, 0.03),
        sector_bounds_deg=[(0.0, 30.0)] * 4,
    )
    assert not np.allclose(sector, cov)
    with pytest.raises(ValueError):
        estimate_covariance(cfg, 0, 1)


# ---------------------------------------------------------------- OMP


def omp_fixture(seed: int = 123):
    cfg = SystemConfig(n_antennas=64, n_subcarriers=16, n_pilots=64, n_users=1)
    grid = build_physical_grid(cfg, 64, 10, r_min_m=5.0, r_max_m=30.0)
    nba = build_nba(grid, cfg)
    f = make_pilot_matrix(64, 64, seed, mode="orthonormal")
    return cfg, grid, nba, f


def grid_channel(cfg, grid, qs, seed: int) -> ChannelTensor:
    """Single-user channel whose paths sit exactly on grid points."""
    rng = np.random.default_rng(seed)
    paths = []
    for q in qs:
        phi, r = grid.point(q)
        mags = np.ones(cfg.n_subcarriers)
        gains = mags * np.exp(1j * rng.uniform(0, 2 * math.pi))
        paths.append(PathSpec(PolarPoint(phi, r), 0.0, gains))
    return synthesize_channel([paths], cfg)


def test_omp_first_pick_matches_exhaustive_correlation() -> None:
    cfg, grid, nba, f = omp_fixture()
    tensor = grid_channel(cfg, grid, [321], 0)
    frame = sound(tensor, f, 0.01, 7)
    report = omp_run(frame, nba, 1)
    corr = np.zeros(grid.size)
    for m in range(16):
        proj = f @ nba.atoms(m)
        corr += np.abs(proj.conj().T @ frame.y[0, m])
    assert report.supports[0, 0] == int(np.argmax(corr))


def test_omp_recovers_separated_on_grid_paths() -> None:
    cfg, grid, nba, f = omp_fixture()
    qs = [5 * 10 + 2, 30 * 10 + 5, 55 * 10 + 8]  # well separated in angle
    tensor = grid_channel(cfg, grid, qs, 1)
    frame = sound(tensor, f, 0.0, 7)
    report = omp_run(frame, nba, 3)
    assert set(int(q) for q in report.supports[0]) == set(qs)
    assert nmse(tensor, report.h_hat.h) < 1e-6


def test_omp_support_is_scale_invariant() -> None:
    cfg, grid, nba, f = omp_fixture()
    tensor = grid_channel(cfg, grid, [152, 407], 2)
    frame = sound(tensor, f, 0.001, 11)
    base = omp_run(frame, nba, 2).supports
    scaled_frame = PilotFrame(f_matrix=f, noise_var=0.001, y=3.7 * frame.y)
    scaled = omp_run(scaled_frame, nba, 2).supports
    np.testing.assert_array_equal(base, scaled)


def test_omp_residuals_shrink_and_projector_is_idempotent() -> None:
    cfg, grid, nba, f = omp_fixture()
    tensor = grid_channel(cfg, grid, [100, 300, 500], 3)
    frame = sound(tensor, f, 0.05, 13)
    est = OmpEstimator(dictionary=nba, n_paths=3).fit(f)
    supports, final_resid = est._support_one_user(frame.y[0])
    y = frame.y[0]
    prev = float(np.linalg.norm(y))
    for depth in range(1, 4):
        resid = np.empty_like(y)
        for m in range(16):
            psi = (f @ nba.atoms(m))[:, supports[:depth]]
            coef, *_ = np.linalg.lstsq(psi, y[m], rcond=None)
            resid[m] = y[m] - psi @ coef
            # Projecting the residual again changes nothing.
            coef2, *_ = np.linalg.lstsq(psi, resid[m], rcond=None)
            assert float(np.linalg.norm(psi @ coef2)) < 1e-8
        norm = float(np.linalg.norm(resid))
        assert norm <= prev + 1e-12
        prev = norm
    np.testing.assert_allclose(final_resid, resid, atol=1e-8)


def test_omp_report_deltas_match_focus_offsets() -> None:
    cfg, grid, nba, f = omp_fixture()
    tensor = grid_channel(cfg, grid, [250], 4)
    frame = sound(tensor, f, 0.0, 7)
    report = omp_run(frame, nba, 1)
    phi, r = grid.point(int(report.supports[0, 0]))
    assert report.sin_doas[0, 0] == phi
    assert report.ranges_m[0, 0] == r
    for m, eta in enumerate(cfg.subcarriers.etas):
        dphi, dr = nb_deltas(PolarPoint(phi, r), float(eta))
        assert report.delta_sin_doa[0, 0, m] == pytest.approx(dphi, abs=1e-9)
        assert report.delta_range_m[0, 0, m] == pytest.approx(dr, abs=1e-9)


def test_omp_farfield_dictionary_reports_nan_range_offsets() -> None:
    from nearsplit.dictionary import build_si_farfield

    cfg, grid, nba, f = omp_fixture()
    ff = build_si_farfield(cfg, 64)
    tensor = grid_channel(cfg, grid, [321], 5)
    frame = sound(tensor, f, 0.01, 7)
    report = omp_run(frame, ff, 2)
    assert np.all(np.isinf(report.ranges_m))
    assert np.all(np.isnan(report.delta_range_m))
    assert np.all(np.isfinite(report.delta_sin_doa))


def test_zero_bandwidth_makes_dictionaries_agree() -> None:
    cfg = SystemConfig(n_antennas=32, n_subcarriers=4, n_pilots=24, n_users=2,
                       bandwidth_hz=0.0)
    grid = build_physical_grid(cfg, 24, 4, r_min_m=0.1, r_max_m=0.5)
    nba = build_nba(grid, cfg)
    si = build_si_nearfield(grid, cfg)
    scenario = sample_scenario(cfg, 2, 21, range_bounds_m=(0.1, 0.5))
    tensor, _ = normalize_for_snr(synthesize_channel(scenario, cfg))
    f = make_pilot_matrix(32, 24, 8)
    frame = sound(tensor, f, 0.01, 9)
    r_nba = omp_run(frame, nba, 2)
    r_si = omp_run(frame, si, 2)
    np.testing.assert_array_equal(r_nba.supports, r_si.supports)
    np.testing.assert_allclose(r_nba.h_hat.h, r_si.h_hat.h, atol=1e-9)


def test_reconstruct_output_lies_in_atom_span() -> None:
    cfg, grid, nba, f = omp_fixture()
    tensor = grid_channel(cfg, grid, [123, 456], 6)
    frame = sound(tensor, f, 0.02, 15)
    supports = np.array([[123, 456]])
    h_hat = reconstruct(frame, nba, supports)
    for m in range(16):
        freq = float(cfg.subcarriers.freqs_hz[m])
        xi = np.stack(
            [
                steering_vector(PolarPoint(*grid.point(q)), freq, cfg.geometry)
                for q in supports[0]
            ],
            axis=1,
        )
        proj = xi @ np.linalg.lstsq(xi, h_hat.h[0, m], rcond=None)[0]
        assert float(np.linalg.norm(h_hat.h[0, m] - proj)) < 1e-10


def test_reconstruct_validation() -> None:
    cfg, grid, nba, f = omp_fixture()
    tensor = grid_channel(cfg, grid, [1], 0)
    frame = sound(tensor, f, 0.0, 7)
    with pytest.raises(ValueError):
        reconstruct(frame, nba, np.array([[1]]), reconstruction="mirror")
    with pytest.raises(ValueError):
        reconstruct(frame, nba, np.array([1]))
    with pytest.raises(ValueError):
        reconstruct(frame, nba, np.array([[1], [2]]))  # K mismatch


def test_omp_nmse_bounded_at_moderate_snr() -> None:
    cfg = SystemConfig(n_antennas=32, n_subcarriers=8, n_pilots=16, n_users=2)
    grid = build_physical_grid(cfg, 32, 4, r_min_m=0.1, r_max_m=0.5)
    nba = build_nba(grid, cfg)
    f = make_pilot_matrix(32, 16, 3)
    est = OmpEstimator(dictionary=nba, n_paths=3).fit(f)
    for t in range(50):
        scenario = sample_scenario(cfg, 3, 600 + t, range_bounds_m=(0.1, 0.5))
        tensor, _ = normalize_for_snr(synthesize_channel(scenario, cfg))
        frame = sound(tensor, f, 0.1, 700 + t)
        assert nmse(tensor, est.predict(frame)) <= 1.0 + 1e-9


def test_omp_estimator_validation() -> None:
    cfg, grid, nba, f = omp_fixture()
    with pytest.raises(ValueError):
        OmpEstimator(dictionary=None).fit(f)
    with pytest.raises(ValueError):
        OmpEstimator(dictionary=nba, n_paths=0).fit(f)
    with pytest.raises(ValueError):
        OmpEstimator(dictionary=nba, n_paths=grid.size + 1).fit(f)
    with pytest.raises(ValueError):
        OmpEstimator(dictionary=nba).fit(make_pilot_matrix(32, 16, 0))
    est = OmpEstimator(dictionary=nba, n_paths=1)
    tensor = grid_channel(cfg, grid, [1], 0)
    frame = sound(tensor, f, 0.0, 7)
    with pytest.raises(RuntimeError):
        est.estimate(frame)
    est.fit(make_pilot_matrix(64, 64, 999, mode="orthonormal"))
    with pytest.raises(ValueError):
        est.estimate(frame)  # frame sounded with a different pilot matrix


def test_estimators_follow_sklearn_param_conventions() -> None:
    cfg, grid, nba, _ = omp_fixture()
    est = OmpEstimator(dictionary=nba, n_paths=2, reconstruction="si-carrier")
    params = est.get_params()
    assert params["n_paths"] == 2
    assert params["reconstruction"] == "si-carrier"
    cloned = clone(est)
    assert cloned.get_params()["n_paths"] == 2
    est.set_params(n_paths=4)
    assert est.n_paths == 4
    assert LsEstimator().get_params()["sv_floor"] > 0
    assert LmmseEstimator().get_params()["sv_floor"] > 0


def test_report_json_round_trip() -> None:
    cfg, grid, nba, f = omp_fixture()
    tensor = grid_channel(cfg, grid, [321], 0)
    frame = sound(tensor, f, 0.01, 7)
    report = omp_run(frame, nba, 2).scored_against(tensor)
    back = report_from_json(report.to_json())
    np.testing.assert_array_equal(back.supports, report.supports)
    np.testing.assert_allclose(back.h_hat.h, report.h_hat.h, atol=1e-15)
    np.testing.assert_allclose(back.nmse, report.nmse, atol=1e-15)
    np.testing.assert_allclose(back.delta_range_m, report.delta_range_m, atol=1e-15)
    with pytest.raises(ValueError):
        report_from_json('{"kind": "other"}')
    with pytest.raises(ValueError):
        EstimateReport(
            h_hat=report.h_hat,
            supports=report.supports,
            sin_doas=report.sin_doas,
            ranges_m=report.ranges_m,
            delta_sin_doa=report.delta_sin_doa,
            delta_range_m=report.delta_range_m,
            nmse=np.array([-0.1]),
        )
