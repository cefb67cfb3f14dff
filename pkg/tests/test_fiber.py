import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wdmtwin import autodiff as ad
from wdmtwin.errors import InvalidArgument, UnsupportedConfiguration
from wdmtwin.fiber import (
    FiberSpan,
    SpanState,
    effective_lengths,
    gnrf_oracle,
    nli_span,
    propagate_span,
    srs_tilt,
)
from wdmtwin.grid import ChannelGrid, PowerProfile, dbm_to_mw, flat_profile

GRID = ChannelGrid.uniform()
powers_mw = arrays(np.float64, 48, elements=st.floats(1e-3, 5.0))


def test_effective_lengths_example():
    l_eff, l_eff_a = effective_lengths(FiberSpan(76.5))
    assert l_eff == pytest.approx(21.07, abs=0.005)
    assert l_eff_a == pytest.approx(21.71, abs=0.005)


def test_effective_length_limits():
    # tiny attenuation: L_eff tends to L (series branch)
    l_eff, _ = effective_lengths(FiberSpan(10.0, alpha_db=1e-9))
    assert l_eff == pytest.approx(10.0, rel=1e-8)
    l_eff, l_eff_a = effective_lengths(FiberSpan(1e5))
    assert l_eff == pytest.approx(l_eff_a, rel=1e-12)
    assert l_eff_a == pytest.approx(10 / math.log(10) / 0.2, rel=1e-12)


def test_span_validation():
    with pytest.raises(InvalidArgument):
        FiberSpan(-1.0)
    with pytest.raises(InvalidArgument):
        FiberSpan(10.0, alpha_db=0.0)
    with pytest.raises(InvalidArgument):
        FiberSpan(10.0, gamma=-1.0)


def test_srs_edge_to_edge_tilt_example():
    span = FiberSpan(76.5)
    g_db = 10 * np.log10(srs_tilt(span, flat_profile(GRID, 18.0)))
    # independent arithmetic: 4.3429 * P[W] * Cr * L_eff * (f_max - f_min)
    a = 0.2 * math.log(10) / 10
    l_eff = (1 - math.exp(-a * 76.5)) / a
    expected = 10 / math.log(10) * 10**1.8 * 1e-3 * 0.028 * l_eff * 4.7
    assert g_db[0] - g_db[-1] == pytest.approx(expected, rel=1e-9)
    assert expected == pytest.approx(0.76, abs=0.01)


def test_srs_trivial_cases():
    prof = flat_profile(GRID, 18.0)
    assert np.array_equal(srs_tilt(FiberSpan(80.0, cr=0.0), prof), np.ones(48))
    one = ChannelGrid.uniform(n_ch=1)
    assert np.array_equal(srs_tilt(FiberSpan(80.0), PowerProfile(one, [10.0])), [1.0])
    assert np.array_equal(srs_tilt(FiberSpan(80.0), PowerProfile(GRID, np.zeros(48))), np.ones(48))


@given(powers_mw, st.floats(1.0, 150.0))
def test_srs_conserves_power(p, length):
    g = srs_tilt(FiberSpan(length), p, GRID)
    assert abs(np.sum(p * g) - np.sum(p)) / np.sum(p) < 1e-12


def test_nli_zero_without_kerr():
    assert np.array_equal(nli_span(FiberSpan(80.0, gamma=0.0), flat_profile(GRID, 18.0)), np.zeros(48))


@given(powers_mw)
@settings(max_examples=50)
def test_nli_cubic_homogeneity(p):
    span = FiberSpan(76.5)
    a = nli_span(span, p, GRID)
    b = nli_span(span, 2.0 * p, GRID)
    assert np.max(np.abs(b - 8.0 * a) / (8.0 * a)) < 1e-12


def test_nli_is_mirror_symmetric(rng):
    # the uniform grid is symmetric, so reversing the profile reverses the NLI
    p = dbm_to_mw(rng.uniform(-3, 3, 48))
    span = FiberSpan(76.5)
    assert np.allclose(nli_span(span, p[::-1], GRID), nli_span(span, p, GRID)[::-1], rtol=1e-12)


def test_nli_zero_dispersion_is_unsupported():
    with pytest.raises(UnsupportedConfiguration):
        nli_span(FiberSpan(80.0, beta2=0.0), flat_profile(GRID, 18.0))


def test_propagate_attenuation_only():
    span = FiberSpan(100.0, cr=0.0, gamma=0.0)
    st0 = SpanState.launch(dbm_to_mw(np.linspace(-5, 5, 48)))
    st0 = SpanState(st0.signal, st0.signal * 1e-3, st0.signal * 1e-4)
    out = propagate_span(span, st0, GRID)
    for before, after in [(st0.signal, out.signal), (st0.ase, out.ase), (st0.nli, out.nli)]:
        assert np.allclose(10 * np.log10(after / before), -20.0, atol=1e-12)


def test_zero_length_span_is_identity():
    st0 = SpanState(dbm_to_mw(np.full(48, 1.0)), np.full(48, 1e-6), np.full(48, 2e-7))
    out = propagate_span(FiberSpan(0.0), st0, GRID)
    for a, b in [(st0.signal, out.signal), (st0.ase, out.ase), (st0.nli, out.nli)]:
        assert np.array_equal(a, b)


def test_propagate_full_defaults_composes_srs_and_loss():
    span = FiberSpan(76.5)
    prof = flat_profile(GRID, 18.0)
    out = propagate_span(span, SpanState.launch(prof), GRID)
    tilt_db = 10 * np.log10(srs_tilt(span, prof))
    out_db = 10 * np.log10(out.signal / prof.p)
    assert np.allclose(out_db, tilt_db - 0.2 * 76.5, atol=1e-12)
    assert np.sum(out.signal) * 10 ** (0.2 * 76.5 / 10) == pytest.approx(np.sum(prof.p), rel=1e-12)
    assert np.allclose(out.nli, nli_span(span, prof) * 10 ** (-0.2 * 76.5 / 10) * srs_tilt(span, prof))


def test_fiber_ops_gradcheck(rng):
    span = FiberSpan(rng.uniform(40, 100))
    p0 = dbm_to_mw(rng.uniform(-3, 3, 48))
    w = rng.normal(size=48)

    def f(p):
        out = propagate_span(span, SpanState.launch(p), GRID)
        return ad.dot(10 * ad.log10(out.signal + out.nli), w)

    ok, _, err = ad.gradcheck(f, p0, tol=1e-4)
    assert ok, err


def test_oracle_trivial_and_converged():
    prof = flat_profile(GRID, 18.0)
    assert gnrf_oracle(FiberSpan(76.5, gamma=0.0), prof, 23).nli_mw == 0.0
    res = gnrf_oracle(FiberSpan(76.5), prof, 23)
    assert res.resolved and res.rel_change < 0.05
    closed = nli_span(FiberSpan(76.5), prof)[23]
    assert abs(10 * np.log10(closed / res.nli_mw)) <= 10 * np.log10(1.3)
