import time as clock

import numpy as np
import pytest

from pfsi.basis import SpectralField
from pfsi.diagnostics import energy
from pfsi.driver import (ContinuationSchedule, SolverConfig, Stage, apply_map, build_context,
                         default_schedule, fixed_point_step, initial_state, run_continuation,
                         run_stage, transfer_state)
from pfsi.errors import ConfigurationError, InputDomainError, SolverError
from pfsi.fluid import fluid_residual
from pfsi.geometry import DomainSpec
from pfsi.oracles import structure_dense_oracle
import pfsi.driver as driver_mod


@pytest.mark.parametrize("stage", [Stage(1, 2, 6, 0.1, 0.1), Stage(2, 4, 12, 1e-3, 1e-2),
                                   Stage(0, 3, 8, 0.5, 0.0)])
def test_zero_forcing_converges_to_rest(unit_domain, stage):
    cfg = SolverConfig(unit_domain)
    ctx = build_context(stage, cfg)
    t0 = clock.perf_counter()
    st = run_stage(initial_state(ctx), ctx)
    assert clock.perf_counter() - t0 < 1.0
    assert st.converged and st.iteration <= 2
    assert np.max(np.abs(st.rho.values - cfg.M)) <= 1e-12
    assert np.max(np.abs(st.u.coeffs)) <= 1e-12
    assert np.max(np.abs(st.eta.eta.coeffs)) <= 1e-12


def test_config_validation(unit_domain):
    with pytest.raises(InputDomainError, match="gamma > 1"):
        SolverConfig(unit_domain, gamma=1.0)
    with pytest.raises(InputDomainError):
        SolverConfig(unit_domain, relaxation=0.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(unit_domain, order="u-first")
    with pytest.raises(InputDomainError):
        Stage(2, 4, 12, 0.0, 0.1)


def test_schedule_validation():
    with pytest.raises(ConfigurationError):
        ContinuationSchedule(())
    with pytest.raises(ConfigurationError):
        ContinuationSchedule((Stage(2, 4, 12, 1e-2, 1e-2), Stage(2, 4, 12, 1e-1, 1e-2)))
    with pytest.raises(ConfigurationError):
        ContinuationSchedule((Stage(2, 4, 12, 1e-1, 1e-1), Stage(2, 2, 12, 1e-2, 1e-2)))
    sch = default_schedule()
    assert [s.eps for s in sch.stages] == [1e-1, 1e-2, 1e-3]


def test_forcing_mode_out_of_range(unit_domain):
    cfg = SolverConfig(unit_domain, f_modes=((1.0, 9, 1),))
    with pytest.raises(ConfigurationError):
        build_context(Stage(2, 4, 12, 0.1, 0.1), cfg)


def test_small_forcing_contracts(unit_domain):
    cfg = SolverConfig(unit_domain, f_modes=((1e-3, 1, 1),), anderson=0)
    ctx = build_context(Stage(2, 4, 12, 0.1, 0.1), cfg)
    st = run_stage(initial_state(ctx), ctx, maxiter=200)
    assert st.converged
    upd = [h["update"] for h in st.history[1:]]
    # plain relaxation: updates shrink geometrically once the transient has passed
    ratios = [b / a for a, b in zip(upd, upd[1:]) if a > 1e-13]
    assert max(ratios[2:]) < 1.0


def test_first_step_matches_monolithic_linear_solves(unit_domain):
    """In test mode the step from rest is a pair of linear solves."""
    cfg = SolverConfig(unit_domain, convection=False, cubic=False, **{
        "f_modes": ((1.0, 1, 1),), "F_modes": ((0.1, 2, 1),)})
    ctx = build_context(Stage(1, 3, 6, 0.1, 0.1), cfg)
    st0 = initial_state(ctx)
    rho, eta, u = apply_map(ctx, st0.u, st0.eta.eta)
    assert np.max(np.abs(rho.values - cfg.M)) <= 1e-14
    # beam: dense space-time Galerkin system with zero trace
    tb, xb = ctx.beam_nodes
    ref = structure_dense_oracle(ctx.beam, ctx.time, ctx.f, tb, xb,
                                 np.zeros((len(tb), len(xb))), ctx.params.eps)
    assert np.max(np.abs(eta.eta.coeffs - ref)) <= 1e-10
    # fluid: columns of the affine residual map give the dense matrix
    shape = (ctx.fluid.size, ctx.time.size)

    def R(c):
        v = SpectralField(ctx.fluid, ctx.time, c.reshape(shape))
        return fluid_residual(v, rho, st0.u, st0.eta.eta, ctx.params,
                              beam_grid=ctx.beam_grid).total.ravel()

    b = R(np.zeros(np.prod(shape)))
    A = np.column_stack([R(e) - b for e in np.eye(np.prod(shape))])
    c = np.linalg.solve(A, -b)
    assert np.max(np.abs(u.coeffs.ravel() - c)) <= 1e-10 * max(np.abs(c).max(), 1.0)


def test_fixed_point_step_relaxes(unit_domain, forced_config):
    ctx = build_context(Stage(1, 2, 6, 0.1, 0.1), forced_config)
    st = initial_state(ctx)
    nxt = fixed_point_step(st, ctx, omega=0.5)
    eta_n, u_n = nxt.info["next"]
    np.testing.assert_allclose(u_n.coeffs, 0.5 * nxt.u.coeffs, atol=1e-15)
    np.testing.assert_allclose(eta_n.coeffs, 0.5 * nxt.eta.eta.coeffs, atol=1e-15)
    assert nxt.iteration == 1


def test_transfer_preserves_fields(forced_run, forced_config):
    state, ctx = forced_run
    big = build_context(Stage(3, 6, 16, 0.1, 0.1), forced_config)
    moved = transfer_state(state, big)
    t, x, z = np.array([0.1, 0.6]), np.array([0.3, 0.8]), np.array([-0.4, 0.2])
    np.testing.assert_allclose(moved.u.evaluate_points(t, x, z), state.u.evaluate_points(t, x, z),
                               atol=1e-13)
    np.testing.assert_allclose(moved.eta.eta.evaluate(t, x), state.eta.eta.evaluate(t, x),
                               atol=1e-13)
    np.testing.assert_allclose(moved.rho.evaluate(t, x, z), state.rho.evaluate(t, x, z),
                               atol=1e-13)


def test_forced_run_is_a_fixed_point(forced_run):
    state, ctx = forced_run
    rho, eta, u = apply_map(ctx, state.u, state.eta.eta)
    assert np.max(np.abs(u.coeffs - state.u.coeffs)) <= 1e-9
    assert np.max(np.abs(eta.eta.coeffs - state.eta.eta.coeffs)) <= 1e-9
    assert state.history[-1]["map_residual"] <= 1e-10


def test_negative_density_triggers_backtracking(unit_domain, forced_config, monkeypatch):
    ctx = build_context(Stage(2, 4, 12, 0.1, 0.1), forced_config)
    calls = {"n": 0}
    real = driver_mod.apply_map

    def flaky(ctx_, u_lag, eta_lag):
        calls["n"] += 1
        if calls["n"] == 3:
            raise SolverError("density minimum below -0.1 M")
        return real(ctx_, u_lag, eta_lag)

    monkeypatch.setattr(driver_mod, "apply_map", flaky)
    st = run_stage(initial_state(ctx), ctx)
    assert st.converged and st.info["backtracks"] == 1


def test_failure_on_first_step_is_reported(unit_domain, forced_config, monkeypatch):
    ctx = build_context(Stage(1, 2, 6, 0.1, 0.1), forced_config)

    def broken(*args):
        raise SolverError("density minimum below -0.1 M")

    monkeypatch.setattr(driver_mod, "apply_map", broken)
    with pytest.raises(SolverError, match="stage"):
        run_stage(initial_state(ctx), ctx)


def test_unconverged_stage_is_returned(forced_config):
    ctx = build_context(Stage(2, 4, 12, 0.1, 0.1), forced_config)
    st = run_stage(initial_state(ctx), ctx, maxiter=2)
    assert not st.converged and st.iteration == 2


def test_continuation_warm_starts(forced_config):
    sch = ContinuationSchedule((Stage(1, 2, 6, 0.1, 0.1), Stage(2, 4, 8, 0.05, 0.05)))
    states = run_continuation(sch, forced_config)
    assert len(states) == 2 and all(s.converged for s in states)
    for s in states:
        rep = energy(s, s.info["context"])
        assert rep.mass_error <= 1e-10 * forced_config.m0
