import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_hermite, factorial

from accspec.errors import DivergenceError, InsufficientResolutionError, NoFrameError
from accspec.lattice_geom import Lattice2, enumerate_in_disk
from accspec.window_kernel import (
    Window,
    ambiguity,
    canonical_tight_window,
    cross_inner,
    decay_check,
    frame_bounds_estimate,
    load_window_csv,
    mstar_norm,
    nonvanishing_on_lattice,
    parse_window,
    rayleigh_quotients,
    save_window_csv,
)

T = np.arange(-8.0, 8.0 + 1e-12, 1e-3)
H = 1e-3


def hermite_fn(n, t):
    # written out independently of the library
    c = 2**0.25 / math.sqrt(2.0**n * factorial(n))
    return c * eval_hermite(n, math.sqrt(2 * math.pi) * t) * np.exp(-math.pi * t * t)


def tf_shift(f, z, t):
    x, om = z
    return np.exp(2j * np.pi * om * t) * f(t - x)


def quad(a, b):
    return complex(np.sum(a * np.conj(b)) * H)


# ---- ambiguity


def test_gaussian_at_origin(gauss):
    assert ambiguity(gauss, (0.0, 0.0)) == pytest.approx(1.0, abs=1e-15)


def test_gaussian_at_unit_time_shift(gauss):
    oracle = quad(hermite_fn(0, T), tf_shift(lambda t: hermite_fn(0, t), (1, 0), T))
    assert abs(oracle - math.exp(-math.pi / 2)) < 1e-8
    assert abs(ambiguity(gauss, (1.0, 0.0)) - oracle) < 1e-8
    assert abs(ambiguity(gauss, (1.0, 0.0)) - 0.2079) < 1e-4


def test_hermite_one_at_origin():
    assert ambiguity(Window.hermite(1), (0.0, 0.0)) == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 3), st.floats(-2, 2), st.floats(-2, 2))
def test_closed_form_matches_quadrature(n, x, om):
    f = lambda t: hermite_fn(n, t)  # noqa: E731
    oracle = quad(f(T), tf_shift(f, (x, om), T))
    assert abs(ambiguity(Window.hermite(n), (x, om)) - oracle) < 1e-8


def test_ambiguity_vectorized_shape(gauss):
    z = np.zeros((3, 4, 2))
    assert ambiguity(gauss, z).shape == (3, 4)


def test_sampled_window_matches_closed_form(gauss):
    t = np.arange(-600, 601) * 0.01
    sw = Window.sampled(t[0], 0.01, hermite_fn(0, t))
    z = np.array([[0.0, 0.0], [0.5, -1.5], [1.0, 2.0], [-2.0, 0.25]])
    assert np.max(np.abs(ambiguity(sw, z) - ambiguity(gauss, z))) < 1e-10


# ---- cross inner products


def test_cross_inner_same_point(gauss):
    assert cross_inner(gauss, (0.3, -0.7), (0.3, -0.7)) == pytest.approx(gauss.l2_norm_sq)


@settings(max_examples=40, deadline=None)
@given(*[st.floats(-2, 2)] * 4)
def test_cross_inner_hermitian(a, b, c, d):
    w = Window.hermite(2)
    assert abs(cross_inner(w, (a, b), (c, d)) - np.conj(cross_inner(w, (c, d), (a, b)))) < 1e-12


@pytest.mark.parametrize("n", [0, 1, 3])
@pytest.mark.parametrize("src,dst", [((1, 0), (0, 1)), ((0.5, -0.25), (-0.75, 1.5))])
def test_cross_inner_two_window_quadrature(n, src, dst):
    f = lambda t: hermite_fn(n, t)  # noqa: E731
    oracle = quad(tf_shift(f, src, T), tf_shift(f, dst, T))
    assert abs(cross_inner(Window.hermite(n), src, dst) - oracle) < 1e-8


# ---- M* norm


def test_mstar_gaussian_z2_converged(gauss):
    z2 = Lattice2.diag(1, 1)
    a = mstar_norm(gauss, z2, 10 * math.sqrt(2))
    b = mstar_norm(gauss, z2, 20 * math.sqrt(2))
    assert np.isfinite(a.value)
    assert abs(a.value - b.value) / b.value < 1e-10
    assert abs(a.value - b.value) < 1e-12
    assert a.tail_ok


def test_mstar_below_minimum_radius_rejected(gauss):
    with pytest.raises(ValueError):
        mstar_norm(gauss, Lattice2.diag(1, 1), 10.0)


@pytest.mark.parametrize("s", [0.5, 0.75, 1.5])
def test_mstar_scaled_lattice_recomputed(gauss, s):
    lat = Lattice2.diag(s, s)
    R = 10 * lat.l_fund
    pts = enumerate_in_disk(lat, R)
    xy = lat.coords(pts)
    r = np.hypot(*xy.T)
    oracle = math.sqrt(np.sum(r * np.exp(-math.pi * r * r)))
    assert mstar_norm(gauss, lat, R).value == pytest.approx(oracle, rel=1e-12)


def test_mstar_divergence_flagged():
    # a window whose ambiguity barely decays on a coarse sample grid
    t = np.arange(-4000, 4001) * 0.05
    flat = Window.sampled(t[0], 0.05, np.ones_like(t) / math.sqrt(400.05))
    with pytest.raises(DivergenceError):
        mstar_norm(flat, Lattice2.diag(0.5, 0.5), 10 * Lattice2.diag(0.5, 0.5).l_fund)


# ---- frame bounds


def test_frame_bounds_gaussian_regression(gauss, half_lattice):
    fb = frame_bounds_estimate(gauss, half_lattice, 16)
    assert fb.ratio > 0.9
    assert fb.A_est == pytest.approx(3.99694100570768, rel=1e-9)
    assert fb.B_est == pytest.approx(4.003059098030151, rel=1e-9)


def test_frame_sum_of_window_itself(gauss, half_lattice):
    # Rayleigh quotient for f = g is sum_lam |V_g g(lam)|^2, a direct lattice sum
    pts = enumerate_in_disk(half_lattice, 8.0)
    oracle = float(np.sum(np.abs(ambiguity(gauss, half_lattice.coords(pts))) ** 2))
    t = np.arange(-512, 513) / 64
    q = rayleigh_quotients(gauss, half_lattice, gauss.evaluate(t)[None, :], t, 1 / 64)
    assert q[0] == pytest.approx(oracle, rel=1e-10)


def test_no_frame_at_critical_density(gauss):
    with pytest.raises(NoFrameError):
        frame_bounds_estimate(gauss, Lattice2.diag(1, 1))


# ---- canonical tight window


def test_tight_window_bounds(tight_window, half_lattice):
    fb = frame_bounds_estimate(tight_window, half_lattice, 16)
    assert fb.ratio > 0.999
    assert 0.999 <= fb.A_est <= 1.001
    assert tight_window.label == "tight(gaussian)"


def test_tight_window_random_probes(tight_window, half_lattice):
    # probes the estimator never sees: Hermite 3 and 4 at random offsets
    rng = np.random.default_rng(7)
    t = tight_window.grid
    F = np.array([tf_shift(lambda s: hermite_fn(n, s), rng.uniform(-0.5, 0.5, 2), t) for n in (3, 4) for _ in range(4)])
    q = rayleigh_quotients(tight_window, half_lattice, F, t, tight_window.step)
    assert np.max(np.abs(q - 1)) < 1e-6


def test_tight_input_is_fixed_point(tight_window, half_lattice):
    again = canonical_tight_window(tight_window, half_lattice, 6.0, 1024, 8.0)
    t = tight_window.grid
    assert np.max(np.abs(again.evaluate(t) - tight_window.evaluate(t))) < 1e-6


def test_tight_window_resolution_error(gauss, half_lattice):
    with pytest.raises(InsufficientResolutionError):
        canonical_tight_window(gauss, half_lattice, 6.0, 8, 8.0)
    with pytest.raises(InsufficientResolutionError):
        canonical_tight_window(gauss, half_lattice, 1.0, 1024, 8.0)


# ---- decay hypotheses


def test_decay_gaussian_ok(gauss):
    dc = decay_check(gauss, 3, 8)
    assert dc.ok


def test_decay_constant_is_direct_max(gauss):
    dc = decay_check(gauss, 3, 8, n_radii=161, n_angles=48)
    r = np.linspace(0, 8, 161)
    # |V_g g| of the Gaussian is radial
    assert dc.C_fit == pytest.approx(np.max(np.exp(-math.pi * r * r / 2) * (1 + r) ** 3), rel=1e-12)


def test_decay_flags_outer_peak(gauss):
    # (1 + r)^40 exp(-pi r^2 / 2) peaks near r = 3.1, in the outer half of [0, 4]
    assert not decay_check(gauss, 40, 4).ok


def test_nonvanishing_on_lattice(gauss, half_lattice):
    ok, m = nonvanishing_on_lattice(gauss, half_lattice, 1 + 3 * half_lattice.l_fund)
    assert ok and m > 0


# ---- windows, parsing, files


def test_sampled_evaluate_exact_on_grid():
    s = np.array([0, 1, 2 + 1j, 3, 0, 0], dtype=complex)
    w = Window.sampled(-1.0, 0.5, s)
    assert np.array_equal(w.evaluate(w.grid), s)
    assert w.evaluate(np.array([100.0]))[0] == 0
    assert w.l2_norm_sq == pytest.approx(0.5 * np.sum(np.abs(s) ** 2))


def test_sampled_needs_four_samples():
    w = Window.sampled(0.0, 0.1, [1, 2, 3])
    with pytest.raises(InsufficientResolutionError):
        w.evaluate(np.array([0.1]))


def test_window_csv_roundtrip(tmp_path, tight_window):
    save_window_csv(tmp_path / "w.csv", tight_window)
    w2 = load_window_csv(tmp_path / "w.csv")
    assert np.array_equal(w2.samples, tight_window.samples)
    assert w2.grid_lo == tight_window.grid_lo and w2.step == tight_window.step
    w3 = parse_window(f"file:{tmp_path / 'w.csv'}")
    assert np.array_equal(w3.samples, tight_window.samples)


def test_parse_window_specs(half_lattice):
    assert parse_window("gaussian").kind == "gaussian"
    h = parse_window("hermite:2")
    assert h.kind == "hermite" and h.order == 2
    with pytest.raises(ValueError):
        parse_window("boxcar")
    with pytest.raises(ValueError):
        parse_window("tight(gaussian)")


# ---- invariants


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 4), st.floats(-5, 5), st.floats(-5, 5))
def test_ambiguity_cauchy_schwarz(n, x, om):
    w = Window.hermite(n)
    assert abs(ambiguity(w, (x, om))) <= w.l2_norm_sq + 1e-14


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_reflection_via_cross_inner(x, om):
    w = Window.hermite(1)
    assert cross_inner(w, (x, om), (0, 0)) == np.conj(cross_inner(w, (0, 0), (x, om)))


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 4), st.floats(0, 2 * math.pi))
def test_sampled_gaussian_quadrature_consistency(gauss, rad, ang):
    t = np.arange(-800, 801) * 0.01
    sw = Window.sampled(t[0], 0.01, hermite_fn(0, t))
    z = (rad * math.cos(ang), rad * math.sin(ang))
    assert abs(ambiguity(sw, z) - ambiguity(gauss, z)) < 1e-6


def test_tight_window_32_random_probes(tight_window, half_lattice):
    rng = np.random.default_rng(11)
    t = tight_window.grid
    F = []
    for _ in range(32):
        n = int(rng.integers(0, 5))
        F.append(tf_shift(lambda s: hermite_fn(n, s), rng.uniform(-2, 2, 2), t))
    q = rayleigh_quotients(tight_window, half_lattice, np.array(F), t, tight_window.step)
    assert np.all((q >= 0.999) & (q <= 1.001))
