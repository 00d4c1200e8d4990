import math

import numpy as np
import pytest

from accspec.errors import DeflatedEigenvalueError, EmptyMaskError, GramSizeError
from accspec.gabor_multiplier import (
    AccumulatedSpectrogram,
    SpectralDecomposition,
    a_omega,
    accumulated_spectrogram,
    berezin_field,
    berezin_values,
    bessel_partial_sums,
    build_gram,
    eig_count_check,
    eigendecompose,
    eigenfunction_stft,
    l1_error,
    plunge_count,
    reconstruct_mask,
    regularization_check,
    spectral_berezin,
    trace_difference,
)
from accspec.lattice_geom import Ball, Lattice2, LatticeField, Rect, boundary_count, enumerate_in_disk
from accspec.window_kernel import Window, ambiguity, frame_bounds_estimate

from conftest import quad_inner, shifted_window_values

POINT = Ball((0.0, 0.0), 0.1)


def toy(vals):
    vals = np.asarray(vals, dtype=float)
    return SpectralDecomposition(vals, np.eye(len(vals), dtype=complex), 0.0, float(vals.min()), 0, True)


def lattice_sum_sq(w, lat, radius=12.0, exclude_origin=False):
    pts = enumerate_in_disk(lat, radius)
    if exclude_origin:
        pts = pts[np.any(pts != 0, axis=1)]
    return float(np.sum(np.abs(ambiguity(w, lat.coords(pts))) ** 2))


@pytest.fixture(scope="module")
def ball3(gauss, half_lattice):
    K = build_gram(gauss, half_lattice, Ball((0, 0), 3))
    return K, eigendecompose(K)


# ---- Gram matrix


def test_single_point_gram(gauss, half_lattice):
    K = build_gram(gauss, half_lattice, POINT)
    assert K.entries.shape == (1, 1) and K.entries[0, 0] == gauss.l2_norm_sq


def test_two_point_gram(gauss, half_lattice):
    m = Rect((-0.1, -0.1), (0.6, 0.1))
    K = build_gram(gauss, half_lattice, m)
    assert K.N == 2
    assert abs(K.entries[0, 1]) == pytest.approx(abs(ambiguity(gauss, (0.5, 0.0))), rel=1e-14)


def test_gram_matches_quadrature(half_lattice):
    w = Window.hermite(1)
    K = build_gram(w, half_lattice, Ball((0.3, 0.2), 1.0))
    t = np.arange(-10, 10, 1e-3)
    xy = K.xy
    F = np.array([shifted_window_values(w, z, t) for z in xy])
    Q = np.array([[quad_inner(F[b], F[a], 1e-3) for b in range(K.N)] for a in range(K.N)])
    assert np.max(np.abs(Q - K.entries)) < 1e-8


def test_gram_ball2_shape_and_diagonal(gauss, half_lattice):
    K = build_gram(gauss, half_lattice, Ball((0, 0), 2))
    n = len(enumerate_in_disk(half_lattice, 2.0))
    assert K.entries.shape == (n, n)
    assert np.all(np.diag(K.entries) == 1.0)
    assert np.array_equal(K.entries, K.entries.conj().T)


def test_gram_errors(gauss, half_lattice):
    with pytest.raises(EmptyMaskError):
        build_gram(gauss, half_lattice, Ball((0.2, 0.2), 0.01))
    with pytest.raises(GramSizeError):
        build_gram(gauss, half_lattice, Ball((0, 0), 3), max_size=50)


# ---- eigendecomposition


def test_eig_single(gauss, half_lattice):
    dec = eigendecompose(build_gram(gauss, half_lattice, POINT))
    assert dec.eigenvalues.tolist() == [1.0]


def test_eig_two_far_points(gauss):
    lat = Lattice2.diag(2.5, 1.0)
    K = build_gram(gauss, lat, Rect((-0.1, -0.1), (2.6, 0.1)))
    assert K.N == 2
    v = abs(ambiguity(gauss, (2.5, 0.0)))
    assert np.allclose(eigendecompose(K).eigenvalues, [1 + v, 1 - v], atol=1e-15)


def test_eig_reconstructs(ball3):
    K, dec = ball3
    R = (dec.coeffs * dec.eigenvalues) @ dec.coeffs.conj().T
    assert np.linalg.norm(R - K.entries) / np.linalg.norm(K.entries) < 1e-9
    assert np.all(np.diff(dec.eigenvalues) <= 0)
    assert dec.psd_ok


def test_sabotaged_phase_is_not_psd(gauss, half_lattice):
    dec = eigendecompose(build_gram(gauss, half_lattice, Ball((0, 0), 3), phase_sign=-1))
    assert not dec.psd_ok and dec.raw_min < -0.1


# ---- eigenfunctions


def test_eigenfunction_single_point(gauss, half_lattice):
    K = build_gram(gauss, half_lattice, POINT)
    dec = eigendecompose(K)
    assert abs(eigenfunction_stft(dec, K, 1, (0.0, 0.0))) == pytest.approx(1.0)


def test_eigenfunction_energy_on_mask(ball3):
    K, dec = ball3
    for k in (1, 10, 60, 100):
        if dec.eigenvalues[k - 1] < dec.norm_floor:
            continue
        v = eigenfunction_stft(dec, K, k, K.xy)
        assert np.sum(np.abs(v) ** 2) == pytest.approx(dec.eigenvalues[k - 1], rel=1e-8)


def test_eigenfunction_orthonormal(ball3):
    K, dec = ball3
    idx = np.flatnonzero(dec.eigenvalues > 1e-6)[:40]
    C = dec.coeffs[:, idx]
    G = C.conj().T @ K.entries @ C / np.sqrt(np.outer(dec.eigenvalues[idx], dec.eigenvalues[idx]))
    assert np.max(np.abs(G - np.eye(len(idx)))) < 1e-8


def test_eigenfunction_stft_matches_quadrature(half_lattice):
    w = Window.gaussian()
    K = build_gram(w, half_lattice, Ball((0, 0), 1.0))
    dec = eigendecompose(K)
    t = np.arange(-10, 10, 1e-3)
    k = 2
    h = sum(c * shifted_window_values(w, z, t) for c, z in zip(dec.coeffs[:, k - 1], K.xy))
    h /= math.sqrt(dec.eigenvalues[k - 1])
    for mu in [(0.1, 0.2), (-0.7, 0.4), (1.3, -1.1)]:
        oracle = quad_inner(h, shifted_window_values(w, mu, t), 1e-3)
        assert abs(eigenfunction_stft(dec, K, k, mu) - oracle) < 1e-8


def test_deflated_eigenvalue_guard(gauss, half_lattice):
    K = build_gram(gauss, half_lattice, Ball((0, 0), 3))
    dec = eigendecompose(K)
    dec.eigenvalues[-1] = 0.0
    with pytest.raises(DeflatedEigenvalueError):
        eigenfunction_stft(dec, K, dec.N, (0.0, 0.0))


# ---- A_Omega and the accumulated spectrogram


@pytest.mark.parametrize("N,l2,B,want", [(10, 1, 1, 10), (10, 1, 1.2, 9), (113, 1, 1.003, 113)])
def test_a_omega(N, l2, B, want):
    assert a_omega(N, l2, B) == want


def test_rho_single_point(gauss, half_lattice):
    K = build_gram(gauss, half_lattice, POINT)
    rho = accumulated_spectrogram(eigendecompose(K), K, half_lattice, POINT, 1.0)
    assert rho.a_omega == 1
    want = np.abs(ambiguity(gauss, rho.field.xy)) ** 2
    assert np.max(np.abs(rho.values - want)) < 1e-15
    assert rho.field.as_dict()[(0, 0)] == pytest.approx(1.0)


def test_rho_bounded(gauss, half_lattice, ball3):
    K, dec = ball3
    B = frame_bounds_estimate(gauss, half_lattice).B_est * 1.01
    rho = accumulated_spectrogram(dec, K, half_lattice, Ball((0, 0), 3), B)
    assert rho.values.min() >= -1e-15 and rho.values.max() <= 1 + 1e-8


def test_rho_tight_ball3(tight_window, half_lattice):
    m = Ball((0, 0), 3)
    K = build_gram(tight_window, half_lattice, m)
    rho = accumulated_spectrogram(eigendecompose(K), K, half_lattice, m, 1.0)
    xy = rho.field.xy
    d = m.boundary_distance(xy)
    inside = m.contains(xy)
    assert np.all(np.abs(rho.values[inside & (d > 2)] - 1) < 1e-3)
    assert np.all(rho.values[~inside & (d > 2)] < 0.5)
    assert rho.values.max() <= 1 + 1e-8


# ---- Berezin and Bessel


def test_berezin_single_point(gauss, half_lattice):
    mu = np.array([[0.3, -0.4], [1.0, 1.0]])
    assert np.allclose(berezin_values(gauss, half_lattice, POINT, mu), np.abs(ambiguity(gauss, mu)) ** 2, atol=1e-16)


def test_berezin_identity(gauss, half_lattice, ball3):
    K, dec = ball3
    mu = np.random.default_rng(1).uniform(-5, 5, size=(50, 2))
    lhs = np.sum(dec.eigenvalues[:59] * np.abs(np.array([eigenfunction_stft(dec, K, k, mu) for k in range(1, 60)]).T) ** 2, axis=1)
    full = spectral_berezin(dec, K, mu)
    assert np.max(np.abs(full - berezin_values(gauss, half_lattice, Ball((0, 0), 3), mu))) < 1e-8
    # the division-free form agrees with the eigenfunction form term by term
    assert np.all(lhs <= full + 1e-12)


def test_berezin_field_on_lattice(gauss, half_lattice):
    m = Ball((0, 0), 2)
    f = berezin_field(gauss, half_lattice, m, [(0, 0), (10, 0)])
    assert isinstance(f, LatticeField) and len(f) == 2


def test_berezin_far_point(gauss, half_lattice, ball3):
    K, dec = ball3
    mu = np.array([[13.5, 0.0], [0.0, -14.0]])
    assert np.all(spectral_berezin(dec, K, mu) < 1e-40)


def test_bessel_bound(gauss, ball3):
    K, dec = ball3
    mu = np.random.default_rng(2).uniform(-5, 5, size=(30, 2))
    assert bessel_partial_sums(dec, K, mu).max() <= gauss.l2_norm_sq + 1e-8


# ---- l1 error and reconstruction


def make_rho(lat, pts, vals, B=1.0):
    return AccumulatedSpectrogram(LatticeField(lat, pts, vals), 1, 0.0, 0.0, 0.0, 0, B, 1.0, 0)


def test_l1_error_of_indicator(half_lattice):
    m = Ball((0, 0), 2)
    pts = enumerate_in_disk(half_lattice, 4.0)
    chi = m.contains(half_lattice.coords(pts)).astype(float)
    assert l1_error(make_rho(half_lattice, pts, chi), m, half_lattice)[0] == 0.0
    got = reconstruct_mask(make_rho(half_lattice, pts, chi))
    assert {tuple(p) for p in got} == {tuple(p) for p in pts[chi > 0]}


def test_l1_error_single_point(gauss, half_lattice):
    K = build_gram(gauss, half_lattice, POINT)
    rho = accumulated_spectrogram(eigendecompose(K), K, half_lattice, POINT, 1.0, eval_tail_tol=1e-14)
    oracle = lattice_sum_sq(gauss, half_lattice, exclude_origin=True)
    assert l1_error(rho, POINT, half_lattice)[0] == pytest.approx(oracle, rel=1e-10)


def test_l1_error_tight_ball5(tight_window, half_lattice):
    m = Ball((0, 0), 5)
    K = build_gram(tight_window, half_lattice, m)
    rho = accumulated_spectrogram(eigendecompose(K), K, half_lattice, m, 1.0)
    bc, _ = boundary_count(m, half_lattice, 1 + half_lattice.l_fund)
    assert 0.05 <= l1_error(rho, m, half_lattice)[0] / bc <= 5


def test_reconstruct_single_point(gauss, half_lattice):
    K = build_gram(gauss, half_lattice, POINT)
    rho = accumulated_spectrogram(eigendecompose(K), K, half_lattice, POINT, 1.0)
    assert reconstruct_mask(rho).tolist() == [[0, 0]]


def test_reconstruct_strict_threshold(half_lattice):
    pts = np.array([[0, 0], [1, 0], [2, 0]])
    got = reconstruct_mask(make_rho(half_lattice, pts, [0.5, 0.5000001, 0.2]))
    assert got.tolist() == [[1, 0]]


# ---- plunge region and eigenvalue counting


def test_plunge_toys():
    assert plunge_count(toy([0, 0, 2, 2]), 0.1, 2.0) == 0
    assert plunge_count(toy([1.0]), 0.4999, 2.0) == 1


def test_plunge_scan_bounded_below(gauss, half_lattice):
    B = frame_bounds_estimate(gauss, half_lattice).B_est
    ratios = []
    for R in range(3, 11):
        m = Ball((0, 0), R)
        dec = eigendecompose(build_gram(gauss, half_lattice, m))
        bc, _ = boundary_count(m, half_lattice, 1 + half_lattice.l_fund)
        ratios.append(plunge_count(dec, 0.1, B) / bc)
    assert min(ratios) > 0.01


def test_eig_count_toy():
    dec = toy([0, 0, 3, 3, 3])
    lhs, rhs, ok = eig_count_check(dec, 0.25, 3.0, 5, 1.0, 27.0)
    assert lhs == abs(3 * 3 - 5) and rhs == pytest.approx(4 * abs(5 - 9)) and ok
    _, rhs_half, _ = eig_count_check(dec, 0.5, 3.0, 5, 1.0, 27.0)
    assert rhs_half == pytest.approx(2 * abs(5 - 9))


@pytest.mark.parametrize("delta", [0.1, 0.25, 0.5])
def test_eig_count_gaussian_ball4(gauss, half_lattice, delta):
    K = build_gram(gauss, half_lattice, Ball((0, 0), 4))
    dec = eigendecompose(K)
    B = frame_bounds_estimate(gauss, half_lattice).B_est * 1.01
    assert eig_count_check(dec, delta, B, K.N, 1.0, K.hs_norm_sq())[2]


def test_trace_difference_toys(ball3):
    assert trace_difference(toy([2.0]), 2.0) == 0
    assert trace_difference(toy([1.0]), 2.0) == pytest.approx(0.5)
    _, dec = ball3
    B = 4.1
    assert trace_difference(dec, B) == pytest.approx(sum(l * (B - l) / B for l in dec.eigenvalues), rel=1e-12)


# ---- regularization


def test_regularization_single_point(gauss, half_lattice):
    B = 1.0
    rc = regularization_check(gauss, half_lattice, POINT, B, 1.0, eval_tail_tol=1e-14)
    phi0 = 1.0
    oracle = (1 - phi0) + lattice_sum_sq(gauss, half_lattice, exclude_origin=True)
    assert rc.lhs == pytest.approx(oracle, rel=1e-10)
    assert rc.lhs >= 0


def test_regularization_ball_scan(gauss, half_lattice):
    fb = frame_bounds_estimate(gauss, half_lattice)
    B = fb.B_est * 1.01
    ratios = [regularization_check(gauss, half_lattice, Ball((0, 0), R), B, 1.0, A=fb.A_est).ratio
              for R in range(2, 9)]
    assert all(r > 0 for r in ratios)
    assert max(ratios) / min(ratios) < 10
