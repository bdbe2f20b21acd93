import math

import numpy as np
import pytest

from pfsi.basis import SpectralField, make_fluid_basis, make_time_basis
from pfsi.density import (DensityField, DensitySolveOptions, continuity_residual,
                          density_operator, solve_density)
import pfsi.density as density_mod
from pfsi.errors import InputDomainError
from pfsi.oracles import density_fd_case, density_fd_oracle

PERIODS = (1.0, 1.0, 2.0)


def _velocity(seed, amp=0.1, n=12, m=2):
    rng = np.random.default_rng(seed)
    return SpectralField(make_fluid_basis(1.0, 1.0, n), make_time_basis(1.0, m),
                         amp * rng.standard_normal((n, 2 * m + 1)))


def _band(u, factor=2):
    return (factor * u.time.K, factor * u.space.raw.fx.K, factor * u.space.raw.fz.K)


def test_zero_velocity_gives_constant():
    rho = solve_density(None, DensitySolveOptions(0.1, 1.3, (2, 2, 2)), PERIODS)
    assert np.max(np.abs(rho.values - 1.3)) <= 1e-15
    r = continuity_residual(rho, None, 0.1, 1.3)
    assert r.strong_l2 <= 1e-13 and r.weak_max <= 1e-13


def test_options_validation():
    with pytest.raises(InputDomainError):
        DensitySolveOptions(0.0, 1.0, (1, 1, 1))
    with pytest.raises(InputDomainError):
        DensitySolveOptions(0.1, -1.0, (1, 1, 1))


def test_mass_is_exact_for_every_slice():
    u = _velocity(0)
    rho = solve_density(u, DensitySolveOptions(0.1, 1.0, _band(u)), PERIODS)
    mass = rho.slice_mass(37)
    assert np.max(np.abs(mass - 2.0)) <= 1e-10 * 2.0


def test_galerkin_equations_hold():
    u = _velocity(1)
    opts = DensitySolveOptions(0.1, 1.0, _band(u))
    rho = solve_density(u, opts, PERIODS)
    assert rho.solver_residual <= 1e-12
    r = continuity_residual(rho, u, 0.1, 1.0)
    A, _ = density_operator(u, 0.1, opts.band, PERIODS)
    scale = abs(A).max() * np.abs(rho.hat).max()
    assert r.weak_max <= 1e-12 * scale


def test_closed_form_residual_of_non_solution():
    n = 9
    x = np.arange(n) / n
    vals = 1.0 + 0.1 * np.sin(2 * math.pi * x)[None, :, None] * np.ones((n, n, n))
    rho = DensityField.from_values(vals, PERIODS, 1.0)
    eps = 0.1
    r = continuity_residual(rho, None, eps, 1.0)
    # eps (4 pi^2 + 1) 0.1 sin(2 pi x) has L2 norm amp * sqrt(|Q| / 2) with |Q| = 2
    expected = eps * (4 * math.pi ** 2 + 1) * 0.1 * math.sqrt(2.0 / 2.0)
    assert abs(r.strong_l2 - expected) <= 1e-12


def test_matches_finite_difference_oracle_on_shear():
    rep = density_fd_case(nodes=64)
    assert rep.deviation <= 1e-4


def test_finite_difference_oracle_is_second_order_consistent():
    u = _velocity(2, amp=0.05, n=6, m=1)
    rho = solve_density(u, DensitySolveOptions(0.2, 1.0, (4, 6, 6)), PERIODS)
    errs = []
    for N in (16, 32):
        grid = [np.arange(N) * (p / N) for p in PERIODS]
        ref = density_fd_oracle(u.evaluate(*grid), 0.2, 1.0, PERIODS)
        errs.append(np.max(np.abs(rho.on_grid((N,) * 3) - ref)))
    assert errs[1] < errs[0]
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_krylov_path_matches_direct(monkeypatch):
    u = _velocity(3)
    opts = DensitySolveOptions(0.1, 1.0, (2, 2, 3))
    direct = solve_density(u, opts, PERIODS)
    monkeypatch.setattr(density_mod, "DIRECT_LIMIT", 0)
    krylov = solve_density(u, opts, PERIODS)
    assert np.max(np.abs(direct.hat - krylov.hat)) <= 1e-11


def test_affine_in_mean():
    u = _velocity(4)
    band = _band(u)
    a = solve_density(u, DensitySolveOptions(0.1, 1.0, band), PERIODS)
    b = solve_density(u, DensitySolveOptions(0.1, 2.5, band), PERIODS)
    assert np.max(np.abs(2.5 * a.hat - b.hat)) <= 1e-12


def test_small_velocity_gives_nearly_constant():
    devs = []
    for amp in (1e-2, 1e-3):
        u = _velocity(5, amp=amp)
        rho = solve_density(u, DensitySolveOptions(0.1, 1.0, _band(u)), PERIODS)
        devs.append(np.max(np.abs(rho.values - 1.0)))
    assert devs[1] < 0.2 * devs[0]


def test_resample_and_negativity_flag():
    hat = np.zeros((3, 3, 3), complex)
    hat[1, 1, 1] = 0.1
    hat[1, 2, 1] = hat[1, 0, 1] = 0.5
    rho = DensityField(hat, PERIODS, 0.1, negativity_tol=0.0)
    assert rho.negative and rho.min_value < 0
    big = rho.resampled((2, 3, 2))
    assert big.hat.shape == (5, 7, 5)
    np.testing.assert_allclose(big.evaluate([0.2], [0.3], [0.4]), rho.evaluate([0.2], [0.3], [0.4]))
