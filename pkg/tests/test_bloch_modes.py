import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blochpdc.band_diagram import band_gaps
from blochpdc.bloch_modes import (
    ConvergenceWarning,
    DegenerateMode,
    FourierWindow,
    bloch_mode,
    co_propagating_mode,
    fourier_coefficients,
    mode_batch,
    normalize,
)
from blochpdc.structure import ModeQuery
from conftest import illustrative, uniform
from oracles import aliased, envelope_fft

IDX = np.arange(-32, 33)


def _mean_square(mode, order=64):
    """Period average of |E|^2 by Gauss-Legendre in each (smooth) layer."""
    s = mode.structure
    x, w = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for lo, hi in ((-s.period, -s.thickness_a), (-s.thickness_a, 0.0)):
        z = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        total += np.sum(w * 0.5 * (hi - lo) * np.sum(np.abs(mode.field_at(z)) ** 2, axis=1))
    return total / s.period


query_st = st.builds(
    lambda lam, frac, ang, pol: ModeQuery(lam, (frac * math.cos(ang), frac * math.sin(ang)), pol),
    st.floats(150.0, 4000.0),
    st.floats(0.0, 0.03),
    st.floats(0.0, 2 * math.pi),
    st.sampled_from(["TE", "TM"]),
)


def test_uniform_mode_is_plane_wave():
    s = uniform(2.0)
    m = bloch_mode(s, ModeQuery(900.0, (0.0, 0.0)))
    coeffs = m.fourier(IDX)
    mags = np.linalg.norm(coeffs, axis=1)
    big = np.argmax(mags)
    assert mags[big] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.delete(mags, big) < 1e-12)
    # the surviving index folds k_z back into the first zone: k_z = K - n G
    kz = 2 * math.pi * 2.0 / 900.0
    assert m.K_z.real - IDX[big] * s.reciprocal == pytest.approx(kz, rel=1e-12)


def test_uniform_field_is_single_exponential():
    s = uniform(2.0)
    m = bloch_mode(s, ModeQuery(900.0))
    z = np.linspace(-300, 300, 41)
    kz = 2 * math.pi * 2.0 / 900.0
    f = m.field_at(z)[:, 0]
    assert np.allclose(f / f[20], np.exp(-1j * kz * (z - z[20])), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(query_st)
def test_fourier_matches_fft_oracle(q):
    m = bloch_mode(illustrative(), q)
    if not m.K.propagating:
        return
    fft = envelope_fft(m, IDX)
    exact = aliased(m.fourier, IDX)
    assert np.linalg.norm(fft - exact) / np.linalg.norm(exact) < 1e-8


@settings(max_examples=50, deadline=None)
@given(query_st, st.floats(-500, 500))
def test_bloch_property(q, z):
    s = illustrative()
    m = bloch_mode(s, q)
    if not m.K.propagating:
        return
    lhs = m.field_at(z + s.period)
    rhs = np.exp(-1j * m.K_z * s.period) * m.field_at(z)
    assert np.linalg.norm(lhs - rhs) < 1e-10 * max(1.0, np.linalg.norm(rhs))


@settings(max_examples=50, deadline=None)
@given(query_st)
def test_tangential_field_continuous(q):
    s = illustrative()
    m = bloch_mode(s, q)
    if not m.K.propagating:
        return
    for z in (-s.thickness_a, 0.0):
        lo = m.field_at(np.nextafter(z, -np.inf))[0, :2]
        hi = m.field_at(np.nextafter(z, np.inf))[0, :2]
        assert np.linalg.norm(lo - hi) < 1e-9 * max(1.0, np.linalg.norm(lo))


@settings(max_examples=50, deadline=None)
@given(query_st)
def test_te_field_along_rotated_x(q):
    if q.polarization.value != "TE":
        return
    m = bloch_mode(illustrative(), q)
    x_axis = q.frame[:, 0]
    coeffs = m.fourier(IDX)
    leak = coeffs - np.outer(coeffs @ x_axis, x_axis)
    assert np.max(np.abs(leak)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(query_st)
def test_unit_norm_after_normalize(q):
    m = bloch_mode(illustrative(), q)
    if not m.K.propagating:
        return
    assert np.sum(np.abs(m.fourier(IDX)) ** 2) == pytest.approx(1.0, abs=1e-9)


def test_normalize_idempotent_and_scale_invariant(illus):
    m = bloch_mode(illus, ModeQuery(700.0, (0.0, 0.004), "TM"))
    again = normalize(m)
    assert np.max(np.abs(again.fourier(IDX) - m.fourier(IDX))) < 1e-12
    seven = normalize(m.scaled(7.0))
    assert np.max(np.abs(seven.fourier(IDX) - m.fourier(IDX))) < 1e-12


def test_zero_field_is_degenerate(illus):
    m = bloch_mode(illus, ModeQuery(700.0))
    with pytest.raises(DegenerateMode):
        normalize(m.scaled(0.0))


@pytest.mark.parametrize("pol,k", [("TE", 0.004), ("TM", 0.0)])
def test_parseval_continuous_fields(illus, pol, k):
    m = bloch_mode(illus, ModeQuery(700.0, (0.0, k), pol), normalized=False)
    total = np.sum(np.abs(m.fourier(IDX)) ** 2)
    assert total == pytest.approx(_mean_square(m), rel=1e-8)


def test_parseval_with_jump_in_ez(illus):
    # E_z jumps at the interfaces, so the series converges like 1/N;
    # one Richardson step removes the leading tail
    m = bloch_mode(illus, ModeQuery(700.0, (0.0, 0.004), "TM"), normalized=False)
    s = [np.sum(np.abs(m.fourier(np.arange(-n, n + 1))) ** 2) for n in (2**14, 2**15)]
    assert 2 * s[1] - s[0] == pytest.approx(_mean_square(m), rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(query_st)
def test_raw_coefficients_independent_of_window(q):
    s = illustrative()
    small = bloch_mode(s, q, normalized=False)
    big = bloch_mode(s, q, window=FourierWindow.symmetric(64), normalized=False)
    assert np.max(np.abs(small.fourier(IDX) - big.fourier(IDX))) < 1e-10


def test_normalized_window_doubling_continuous_field(illus):
    q = ModeQuery(700.0, (0.0, 0.004), "TE")
    a = bloch_mode(illus, q)
    b = bloch_mode(illus, q, window=FourierWindow.symmetric(64))
    assert np.max(np.abs(a.fourier(IDX) - b.fourier(IDX))) < 1e-10


def test_small_window_warns(illus):
    m = bloch_mode(illus, ModeQuery(300.0, (0.0, 0.01), "TM"))
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        fourier_coefficients(m, FourierWindow.symmetric(1))
    assert any(issubclass(r.category, ConvergenceWarning) for r in rec)


def test_window_must_contain_zero():
    with pytest.raises(ValueError):
        FourierWindow(1, 4)


def _edge_modes(structure):
    gap = band_gaps(structure, (300.0, 1200.0))[0]
    lower = bloch_mode(structure, ModeQuery(gap.lambda_long))
    upper = bloch_mode(structure, ModeQuery(gap.lambda_short))
    return lower, upper


def _argmax_layer(mode):
    s = mode.structure
    z = np.linspace(-s.period, 0.0, 20001)[1:]
    i = int(np.argmax(np.sum(np.abs(mode.field_at(z)) ** 2, axis=1)))
    return "low" if z[i] >= -s.thickness_a else "high"


def test_band_edge_localisation(illus):
    lower, upper = _edge_modes(illus)
    assert _argmax_layer(lower) == "high"
    assert _argmax_layer(upper) == "low"


def test_co_propagating_flux(illus):
    for flux in (1, -1):
        m = co_propagating_mode(illus, ModeQuery(700.0, (0.0, 0.003), "TM"), flux)
        assert m.flux_sign == flux


def test_batch_matches_scalar_modes(illus):
    ks = np.column_stack([np.linspace(-0.01, 0.01, 9), np.linspace(0.0, 0.004, 9)])
    batch = mode_batch(illus, 700.0, ks, "TM", flux=-1)
    got = batch.fourier(IDX)
    assert batch.propagating.sum() >= 3
    for i, k in enumerate(ks):
        m = co_propagating_mode(illus, ModeQuery(700.0, tuple(k), "TM"), -1)
        assert m.K.propagating == batch.propagating[i]
        if m.K.propagating:
            assert np.max(np.abs(got[i] - m.fourier(IDX))) < 1e-12
        else:
            assert not got[i].any()


def test_example_signal_amplitude(example, example_spec):
    # TE signal photon at the first Type II intersection
    from blochpdc.phase_matching import find_intersections, make_candidate

    pair = find_intersections(example_spec, example).pairs[0]
    c = make_candidate(example_spec, example, pair.te)
    assert c.signal.amplitude(0) == pytest.approx(0.99, abs=0.01)
