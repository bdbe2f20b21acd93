import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pfsi.basis import QuadratureRule, SpectralField, make_beam_basis, make_fluid_basis, \
    make_time_basis, project
from pfsi.errors import ConfigurationError, InputDomainError
from pfsi.geometry import DomainSpec, beam_grid, moving_domain_map, trace_velocity, wrap_eta
from pfsi.oracles import trace_oversampled_oracle


@pytest.mark.parametrize("eta, hat, wind", [(0.5, 0.5, 0), (1.5, -0.5, 1), (-1.0, -1.0, 0),
                                            (1.0, -1.0, 1), (-3.5, 0.5, -2)])
def test_wrap_examples(eta, hat, wind):
    w = wrap_eta(eta, 1.0)
    assert float(w.eta_hat) == hat and int(w.wind) == wind


def test_wrap_rejects_bad_input():
    with pytest.raises(InputDomainError):
        wrap_eta(np.nan, 1.0)
    with pytest.raises(InputDomainError):
        wrap_eta(0.0, 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-1e3, max_value=1e3), st.floats(min_value=0.1, max_value=5.0))
def test_wrap_properties(eta, H):
    w = wrap_eta(eta, H)
    assert -H <= float(w.eta_hat) < H
    assert abs(float(w.eta_hat) - (eta - 2 * int(w.wind) * H)) <= 4 * np.spacing(max(abs(eta), H))
    again = wrap_eta(w.eta_hat, H)
    assert float(again.eta_hat) == float(w.eta_hat) and int(again.wind) == 0


@pytest.mark.parametrize("eta", [0.25, -0.75, 0.5, 3.0])
def test_wrap_shift_by_period(eta):
    a, b = wrap_eta(eta, 1.0), wrap_eta(eta + 2.0, 1.0)
    assert float(a.eta_hat) == float(b.eta_hat) and int(b.wind) == int(a.wind) + 1


def test_domain_spec():
    d = DomainSpec(2.0, 0.5, 1.0)
    assert d.area == 2.0
    with pytest.raises(InputDomainError):
        DomainSpec(-1.0, 1.0, 1.0)
    t, x = beam_grid(d, 4, 8)
    assert len(t) == 4 and x[1] == 0.25


def _fields(seed, n_fluid=6, n_beam=2):
    rng = np.random.default_rng(seed)
    tb = make_time_basis(1.0, 1)
    u = SpectralField(make_fluid_basis(1.0, 1.0, n_fluid), tb, rng.standard_normal((n_fluid, 3)))
    eta = SpectralField(make_beam_basis(1.0, n_beam), tb, rng.standard_normal((n_beam, 3)))
    return u, eta


def test_trace_of_constant_field():
    u, eta = _fields(0, n_fluid=2)
    u = SpectralField(u.space, u.time, np.array([[3.0, 0, 0], [-2.0, 0, 0]]))
    tr = trace_velocity(u, eta, (5, 7))
    np.testing.assert_allclose(tr.values[0], 3.0)
    np.testing.assert_allclose(tr.values[1], -2.0)


def test_trace_of_vertical_sine_on_flat_beam():
    tb = make_time_basis(1.0, 1)
    fb = make_fluid_basis(1.0, 1.0, 12)
    q = QuadratureRule((1.0, 1.0, 2.0), (4, 8, 8))
    vals = np.zeros((2, 4, 8, 8))
    vals[1] = np.sin(math.pi * q.nodes[2])[None, None, :]
    u = project(vals, fb, tb, q)
    eta = SpectralField.zeros(make_beam_basis(1.0, 2), tb)
    tr = trace_velocity(u, eta, (3, 5))
    assert np.max(np.abs(tr.values)) <= 1e-14


def test_trace_matches_oversampled_oracle():
    u, eta = _fields(5)
    t, x = np.linspace(0, 1, 4, endpoint=False), np.linspace(0, 1, 6, endpoint=False)
    tr = trace_velocity(u, eta, (t, x))
    ref = trace_oversampled_oracle(u, eta, t, x, N=512)
    assert np.max(np.abs(tr.values - ref)) <= 1e-12


def test_trace_linearity_and_periodicity():
    u1, eta = _fields(1)
    u2, _ = _fields(2)
    grid = (4, 9)
    lhs = trace_velocity(u1 * 2.0 + u2 * (-0.5), eta, grid).values
    rhs = 2.0 * trace_velocity(u1, eta, grid).values - 0.5 * trace_velocity(u2, eta, grid).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * np.max(np.abs(rhs))
    # eta + 2H: the beam space has no constant, so shift the curve directly
    t, x = np.arange(4) / 4, np.arange(9) / 9
    z = eta.evaluate(t, x)
    a = u1.evaluate_on_curve(t, x, wrap_eta(z, 1.0).eta_hat)
    b = u1.evaluate_on_curve(t, x, wrap_eta(z + 2.0, 1.0).eta_hat)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)


def test_trace_basis_mismatch():
    u, eta = _fields(0)
    other = SpectralField.zeros(eta.space, make_time_basis(1.0, 2))
    with pytest.raises(ConfigurationError):
        trace_velocity(u, other, (3, 3))
    with pytest.raises(ConfigurationError):
        trace_velocity(eta, eta, (3, 3))


def test_moving_domain_map():
    u, eta = _fields(3)
    x = np.linspace(0, 1, 11)
    lo, hi = moving_domain_map(eta, 0.3, x, 1.0)
    np.testing.assert_allclose(lo, eta.evaluate_points(0.3, x), atol=1e-12)
    np.testing.assert_allclose(hi - lo, 2.0)
    zero = SpectralField.zeros(eta.space, eta.time)
    lo, hi = moving_domain_map(zero, 0.0, x, 1.0)
    assert np.all(lo == 0) and np.all(hi == 2)
    with pytest.raises(InputDomainError):
        moving_domain_map(eta, 1.0, x, 1.0)
