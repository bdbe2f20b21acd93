"""Coupled fixed-point iteration and continuation over discretisation levels.

One application of the coupling map takes a lagged pair ``(eta~, u~)``
and returns

1. ``rho``  from the damped continuity equation driven by ``u~``,
2. ``eta``  from the penalised beam problem with the trace of ``u~`` on
   ``eta~``,
3. ``u``    from the penalised momentum equation with ``(rho, u~, eta~)``.

The pair is then relaxed (or Anderson-mixed) and the map applied again.
"""

from dataclasses import dataclass, field, replace
import logging
import math
from typing import Optional

import numpy as np

from .basis import (SpectralField, make_beam_basis, make_fluid_basis, make_time_basis)
from .density import DensityField, DensitySolveOptions, solve_density
from .errors import ConfigurationError, InputDomainError, PFSIError, SolverError
from .fluid import FluidParams, default_beam_grid, solve_fluid
from .geometry import DomainSpec, trace_velocity
from .structure import BeamState, PenaltyInput, solve_structure

__all__ = ["Stage", "ContinuationSchedule", "SolverConfig", "StageContext",
           "CoupledState", "fixed_point_step", "run_stage", "run_continuation",
           "initial_state", "transfer_state", "build_context", "default_schedule"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Stage:
    """One discretisation / regularisation level."""

    m: int
    n_beam: int
    n_fluid: int
    eps: float
    delta: float
    tol: float = 1e-10
    maxiter: int = 400

    def __post_init__(self):
        if self.m < 0 or self.n_beam < 1 or self.n_fluid < 1:
            raise InputDomainError(f"invalid stage sizes {self}")
        if not (self.eps > 0 and self.delta >= 0):
            raise InputDomainError(f"invalid stage parameters eps={self.eps}, delta={self.delta}")
        if not self.tol > 0:
            raise InputDomainError(f"stage tolerance must be positive, got {self.tol}")


@dataclass(frozen=True)
class ContinuationSchedule:
    """Ordered stages; ``eps`` and ``delta`` never increase, sizes never decrease."""

    stages: tuple

    def __post_init__(self):
        st = tuple(self.stages)
        if not st:
            raise ConfigurationError("schedule needs at least one stage")
        object.__setattr__(self, "stages", st)
        for a, b in zip(st, st[1:]):
            if b.eps > a.eps or b.delta > a.delta:
                raise ConfigurationError("eps and delta must not increase across stages")
            if b.m < a.m or b.n_beam < a.n_beam or b.n_fluid < a.n_fluid:
                raise ConfigurationError("m and n must not decrease across stages")


def default_schedule(m=2, n_beam=4, n_fluid=12, tol=1e-10):
    """Three stages with ``eps = delta`` going 1e-1, 1e-2, 1e-3."""
    return ContinuationSchedule(tuple(Stage(m, n_beam, n_fluid, e, e, tol)
                                      for e in (1e-1, 1e-2, 1e-3)))


@dataclass(frozen=True)
class SolverConfig:
    """Physical data and iteration settings shared by all stages.

    Forcing is given as ``(amplitude, space_index, time_index)`` triples;
    space indices are 1-based into the beam basis (``f``) or the fluid
    basis (``F``) and time indices 0-based into ``tau_j``.
    """

    domain: DomainSpec
    gamma: float = 2.0
    mu: float = 1.0
    zeta: float = 1.0
    m0: float = 2.0
    a: float = 5.0
    f_modes: tuple = ()
    F_modes: tuple = ()
    relaxation: float = 0.5
    anderson: int = 10
    density_factor: int = 2
    beam_grid: Optional[tuple] = None
    order: str = "rho-eta-u"
    convection: bool = True
    cubic: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.gamma > 1:
            raise InputDomainError(f"gamma must exceed 1 (let gamma > 1), got {self.gamma}")
        if not (0 < self.relaxation <= 1):
            raise InputDomainError(f"relaxation must lie in (0, 1], got {self.relaxation}")
        if not self.m0 > 0:
            raise InputDomainError(f"m0 must be positive, got {self.m0}")
        if self.order not in ("rho-eta-u", "eta-rho-u"):
            raise ConfigurationError(f"unknown sub-solve order {self.order!r}")

    @property
    def M(self):
        return self.m0 / self.domain.area


@dataclass(frozen=True)
class StageContext:
    """Bases, grids and parameter objects of one stage."""

    stage: Stage
    config: SolverConfig
    time: object
    beam: object
    fluid: object
    density_band: tuple
    beam_grid: tuple
    f: Optional[SpectralField]
    F: Optional[SpectralField]
    params: FluidParams

    @property
    def periods(self):
        d = self.config.domain
        return (d.T, d.L, 2.0 * d.H)

    @property
    def beam_nodes(self):
        d = self.config.domain
        Nt, Nx = self.beam_grid
        return np.arange(Nt) * (d.T / Nt), np.arange(Nx) * (d.L / Nx)


def _forcing_field(space, time, modes, what):
    c = np.zeros((space.size, time.size))
    for amp, i, j in modes:
        if not (1 <= int(i) <= space.size and 0 <= int(j) < time.size):
            raise ConfigurationError(
                f"{what} mode ({i}, {j}) exceeds the basis ({space.size}, {time.size})")
        c[int(i) - 1, int(j)] += float(amp)
    return SpectralField(space, time, c)


def build_context(stage: Stage, config: SolverConfig) -> StageContext:
    d = config.domain
    time = make_time_basis(d.T, stage.m)
    beam = make_beam_basis(d.L, stage.n_beam)
    fluid = make_fluid_basis(d.L, d.H, stage.n_fluid)
    k = config.density_factor
    dband = (k * stage.m, k * fluid.raw.fx.K, k * fluid.raw.fz.K)
    bgrid = config.beam_grid or default_beam_grid(time, beam, fluid)
    f = _forcing_field(beam, time, config.f_modes, "beam forcing") if config.f_modes else None
    F = _forcing_field(fluid, time, config.F_modes, "body force") if config.F_modes else None
    params = FluidParams(config.gamma, config.a, stage.delta, stage.eps, config.mu, config.zeta,
                         config.M, F=F, f=f, convection=config.convection, cubic=config.cubic)
    return StageContext(stage, config, time, beam, fluid, dband, tuple(bgrid), f, F, params)


@dataclass
class CoupledState:
    """Density, velocity and beam of one iterate, with iteration metadata."""

    rho: DensityField
    u: SpectralField
    eta: BeamState
    iteration: int = 0
    converged: bool = False
    history: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def vector(self):
        return np.concatenate([self.eta.eta.coeffs.ravel(), self.u.coeffs.ravel()])


def initial_state(ctx: StageContext) -> CoupledState:
    """``(rho, u, eta) = (M, 0, 0)``."""
    rho = DensityField.constant(ctx.config.M, ctx.density_band, ctx.periods)
    return CoupledState(rho, SpectralField.zeros(ctx.fluid, ctx.time),
                        BeamState(SpectralField.zeros(ctx.beam, ctx.time)))


def _transfer(field_, space, time):
    c = np.zeros((space.size, time.size))
    old = field_.with_time(time).coeffs if time.K != field_.time.K else field_.coeffs
    n = min(space.size, old.shape[0])
    c[:n] = old[:n]
    return SpectralField(space, time, c)


def transfer_state(state: CoupledState, ctx: StageContext) -> CoupledState:
    """Warm start on a (possibly larger) discretisation.

    Basis prefixes are nested, so coefficients are copied; the density is
    truncated or zero-padded in Fourier space.
    """
    u = _transfer(state.u, ctx.fluid, ctx.time)
    eta = _transfer(state.eta.eta, ctx.beam, ctx.time)
    rho = state.rho.resampled(ctx.density_band)
    return CoupledState(rho, u, BeamState(eta))


def _split(ctx, x):
    nb = ctx.beam.size * ctx.time.size
    eta = SpectralField(ctx.beam, ctx.time, x[:nb].reshape(ctx.beam.size, ctx.time.size))
    u = SpectralField(ctx.fluid, ctx.time, x[nb:].reshape(ctx.fluid.size, ctx.time.size))
    return eta, u


def apply_map(ctx: StageContext, u_lag: SpectralField, eta_lag: SpectralField):
    """One unrelaxed application of the coupling map; returns ``(rho, eta, u)``."""
    p = ctx.params
    dopts = DensitySolveOptions(p.eps, p.M, ctx.density_band)
    rho = solve_density(u_lag, dopts, ctx.periods)
    if rho.min_value < -0.1 * p.M:
        raise SolverError(f"density minimum {rho.min_value:.3e} below -0.1 M",
                          residual=rho.min_value)
    tb, xb = ctx.beam_nodes
    tr = trace_velocity(u_lag, eta_lag, (tb, xb))
    inp = PenaltyInput(tb, xb, tr.vertical, ctx.f, p.eps)
    eta = solve_structure(inp, ctx.beam, ctx.time)
    u = solve_fluid(rho, u_lag, eta_lag, p, beam_grid=ctx.beam_grid)
    return rho, eta, u


def _norms(ctx, rho_a, rho_b, eta_a, eta_b, u_a, u_b):
    """Relative update norms in L^2(Q_T), L^2(Q_T) and L^2(0,T;H^2)."""
    du = (u_a - u_b).l2_norm() / (u_a.l2_norm() + 1.0)
    dr = (rho_a - rho_b).l2_norm() / (rho_a.l2_norm() + 1.0)
    H2 = ctx.beam.h2_gram()
    gt = ctx.time.gram_diagonal()

    def h2(c):
        return math.sqrt(max(float(np.sum((H2 @ c) * c * gt)), 0.0))

    de = h2(eta_a.coeffs - eta_b.coeffs) / (h2(eta_a.coeffs) + 1.0)
    return du, dr, de


class _Anderson:
    """Type-II Anderson mixing with a finite window."""

    def __init__(self, depth, beta):
        self.depth, self.beta = depth, beta
        self.X, self.F = [], []

    def step(self, x, g):
        f = g - x
        self.X.append(x.copy())
        self.F.append(f.copy())
        if len(self.X) > self.depth + 1:
            self.X.pop(0)
            self.F.pop(0)
        if self.depth == 0 or len(self.X) < 2:
            return x + self.beta * f
        dX = np.array([b - a for a, b in zip(self.X, self.X[1:])]).T
        dF = np.array([b - a for a, b in zip(self.F, self.F[1:])]).T
        gam, *_ = np.linalg.lstsq(dF, f, rcond=1e-12)
        return x + self.beta * f - (dX + self.beta * dF) @ gam


def fixed_point_step(state: CoupledState, ctx: StageContext, omega=None) -> CoupledState:
    """Apply the coupling map once and relax with weight ``omega``.

    The returned state carries the unrelaxed sub-solve outputs; the relaxed
    pair used for the next step is stored in ``info['next']``.
    """
    omega = ctx.config.relaxation if omega is None else omega
    try:
        rho, eta, u = apply_map(ctx, state.u, state.eta.eta)
    except PFSIError as exc:
        raise type(exc)(f"stage {ctx.stage}: {exc}") from exc
    x_old = state.vector()
    x_new = np.concatenate([eta.eta.coeffs.ravel(), u.coeffs.ravel()])
    nxt = _split(ctx, (1 - omega) * x_old + omega * x_new)
    out = CoupledState(rho, u, eta, state.iteration + 1, False, list(state.history))
    out.info["next"] = nxt
    out.info["update"] = _norms(ctx, rho, state.rho, eta.eta, state.eta.eta, u, state.u)
    return out


def run_stage(initial: CoupledState, ctx: StageContext, tol=None, maxiter=None,
              anderson=None) -> CoupledState:
    """Iterate the coupling map until the combined update falls below ``tol``.

    Exceeding ``maxiter`` is not fatal: the last state is returned with
    ``converged = False``.
    """
    tol = ctx.stage.tol if tol is None else tol
    maxiter = ctx.stage.maxiter if maxiter is None else maxiter
    depth = ctx.config.anderson if anderson is None else anderson
    mixer = _Anderson(depth, ctx.config.relaxation)
    u_lag, eta_lag = initial.u, initial.eta.eta
    x_acc = None
    prev = initial
    history = []
    state = initial
    backtracks = 0
    k = 0
    while k < maxiter:
        try:
            rho, eta, u = apply_map(ctx, u_lag, eta_lag)
        except SolverError as exc:
            # a trial point left the admissible region; pull it back towards
            # the last accepted input and restart the mixing history
            if x_acc is None or backtracks >= 30:
                raise type(exc)(f"stage {ctx.stage}: {exc}") from exc
            backtracks += 1
            x = np.concatenate([eta_lag.coeffs.ravel(), u_lag.coeffs.ravel()])
            eta_lag, u_lag = _split(ctx, x_acc + 0.25 * (x - x_acc))
            mixer = _Anderson(depth, ctx.config.relaxation)
            log.debug("backtracking after: %s", exc)
            continue
        except PFSIError as exc:
            raise type(exc)(f"stage {ctx.stage}: {exc}") from exc
        k += 1
        upd = _norms(ctx, rho, prev.rho, eta.eta, prev.eta.eta, u, prev.u)
        fp = _norms(ctx, rho, rho, eta.eta, eta_lag, u, u_lag)
        total = sum(upd)
        history.append({"iteration": k, "update": total, "du": upd[0], "drho": upd[1],
                        "deta": upd[2], "map_residual": fp[0] + fp[2],
                        "min_rho": rho.min_value})
        log.debug("iteration %d update %.3e map residual %.3e", k, total, fp[0] + fp[2])
        state = CoupledState(rho, u, eta, k, False, history)
        if total <= tol and fp[0] + fp[2] <= tol:
            state.converged = True
            break
        x = np.concatenate([eta_lag.coeffs.ravel(), u_lag.coeffs.ravel()])
        g = np.concatenate([eta.eta.coeffs.ravel(), u.coeffs.ravel()])
        x_acc = x
        eta_lag, u_lag = _split(ctx, mixer.step(x, g))
        prev = state
    state.info["backtracks"] = backtracks
    state.info["stage"] = ctx.stage
    state.info["lagged"] = (u_lag, eta_lag)
    if not state.converged:
        log.warning("stage %s stopped after %d iterations (update %.3e)",
                    ctx.stage, state.iteration, history[-1]["update"])
    return state


def run_continuation(schedule: ContinuationSchedule, config: SolverConfig,
                     initial: Optional[CoupledState] = None):
    """Run all stages with warm starts.

    Returns
    -------
    states : list of CoupledState
        One entry per completed stage.  A failing stage stops the schedule;
        its error is stored in ``states[-1].info['error']`` when at least
        one stage completed, otherwise it is raised.
    """
    states = []
    state = initial
    for st in schedule.stages:
        ctx = build_context(st, config)
        start = initial_state(ctx) if state is None else transfer_state(state, ctx)
        try:
            state = run_stage(start, ctx)
        except PFSIError as exc:
            if not states:
                raise
            states[-1].info["error"] = str(exc)
            log.error("continuation halted: %s", exc)
            break
        state.info["context"] = ctx
        states.append(state)
    return states
