"""End-to-end acceptance criteria, one test per criterion.

Each test records a one-line verdict (shown in the terminal summary under
"acceptance criteria") before asserting, so a failing criterion still
reports its measured numbers.
"""

import time as clock

import numpy as np
import pytest

from pfsi.basis import (QuadratureRule, SpectralField, dealiased_product, differentiate,
                        make_fluid_basis, make_time_basis, pad_spectrum, Fourier1D)
from pfsi.density import continuity_residual
from pfsi.diagnostics import coupled_weak_residual, energy, energy_balance, energy_inequality, \
    korn_defect
from pfsi.driver import (ContinuationSchedule, SolverConfig, Stage, build_context,
                         default_schedule, initial_state, run_continuation, run_stage,
                         transfer_state)
from pfsi.fluid import fluid_residual
from pfsi.geometry import DomainSpec, trace_velocity
from pfsi.oracles import (beam_h2_gram_oracle, density_fd_case, density_fd_richardson_case,
                          fluid_fd_case,
                          fluid_gram_oracle, structure_dense_case, time_gram_oracle,
                          trace_oversampled_oracle)
from pfsi.structure import PenaltyInput, structure_residual

from conftest import ACCEPTANCE_FORCING

DOMAIN = DomainSpec(1.0, 1.0, 1.0)
FORCED = SolverConfig(DOMAIN, **ACCEPTANCE_FORCING)
ZERO_STAGES = [Stage(2, 4, 12, 0.1, 0.1), Stage(1, 2, 6, 1e-3, 1e-3), Stage(3, 6, 16, 1e-2, 0.0),
               Stage(0, 3, 8, 0.5, 0.2)]
REFINEMENT = [(2, 4, 8), (3, 6, 16), (4, 8, 24)]
EPS_SWEEP = (1e-1, 1e-2, 1e-3)
FIXED_DELTA = 0.1

_runs = {}


def _record(log, n, ok, detail):
    log.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    print(log[-1])


def _zero_runs():
    if "zero" not in _runs:
        out = []
        for st in ZERO_STAGES:
            ctx = build_context(st, SolverConfig(DOMAIN))
            t0 = clock.perf_counter()
            state = run_stage(initial_state(ctx), ctx)
            out.append((state, ctx, clock.perf_counter() - t0))
        _runs["zero"] = out
    return _runs["zero"]


def _penalty_sweep():
    """``eps`` sweep at fixed ``delta``, warm-started stage to stage."""
    if "sweep" not in _runs:
        sch = ContinuationSchedule(tuple(Stage(2, 4, 12, e, FIXED_DELTA, 1e-10, 1500)
                                         for e in EPS_SWEEP))
        t0 = clock.perf_counter()
        states = run_continuation(sch, FORCED)
        _runs["sweep"] = (states, clock.perf_counter() - t0)
    return _runs["sweep"]


def _default_continuation():
    if "default" not in _runs:
        _runs["default"] = run_continuation(default_schedule(), FORCED)
    return _runs["default"]


def _refinement():
    if "refine" not in _runs:
        t0 = clock.perf_counter()
        out, state = [], None
        for m, nb, nf in REFINEMENT:
            ctx = build_context(Stage(m, nb, nf, 0.1, 0.1), FORCED)
            start = initial_state(ctx) if state is None else transfer_state(state, ctx)
            state = run_stage(start, ctx)
            out.append((state, ctx))
        _runs["refine"] = (out, clock.perf_counter() - t0)
    return _runs["refine"]


def _zero_residuals(state, ctx):
    p = ctx.params
    M = ctx.config.M
    tb, xb = ctx.beam_nodes
    tr = trace_velocity(state.u, state.eta.eta, (tb, xb))
    beam = np.abs(structure_residual(state.eta, PenaltyInput(tb, xb, tr.vertical, ctx.f,
                                                             p.eps))).max()
    fl = fluid_residual(state.u, state.rho, state.u, state.eta.eta, p,
                        beam_grid=ctx.beam_grid).max_abs()
    cr = continuity_residual(state.rho, state.u, p.eps, M)
    fields = max(np.abs(state.rho.values - M).max(), np.abs(state.u.coeffs).max(),
                 np.abs(state.eta.eta.coeffs).max())
    return max(beam, fl, cr.strong_l2, cr.weak_max, fields)


def test_criterion_1_zero_forcing_exactness(acceptance_log):
    worst_res, worst_it, worst_t, ok = 0.0, 0, 0.0, True
    for state, ctx, dt in _zero_runs():
        res = _zero_residuals(state, ctx)
        worst_res, worst_it, worst_t = max(worst_res, res), max(worst_it, state.iteration), \
            max(worst_t, dt)
        ok &= state.converged and state.iteration <= 2 and res <= 1e-12 and dt < 1.0
    _record(acceptance_log, 1, ok, f"zero forcing: max iterations {worst_it}, max residual "
            f"{worst_res:.1e} (<= 1e-12), slowest stage {worst_t:.2f} s (< 1 s)")
    assert ok


def test_criterion_2_mass_constraint(acceptance_log, forced_run):
    runs = [(s, c) for s, c, _ in _zero_runs()] + [forced_run]
    runs += [(s, s.info["context"]) for s in _penalty_sweep()[0]]
    runs += [(s, s.info["context"]) for s in _default_continuation()]
    runs += _refinement()[0]
    converged = [(s, c) for s, c in runs if s.converged]
    worst = max(energy(s, c).mass_error for s, c in converged)
    ok = worst <= 1e-10 and len(converged) == len(runs)
    _record(acceptance_log, 2, ok, f"mass: worst per-slice relative error {worst:.1e} over "
            f"{len(converged)}/{len(runs)} converged stages (<= 1e-10 m0)")
    assert ok


def test_criterion_3_energy_identity(acceptance_log, forced_config):
    t0 = clock.perf_counter()
    ctx = build_context(Stage(2, 4, 12, 0.1, 0.1), forced_config)
    state = run_stage(initial_state(ctx), ctx)
    bal = energy_balance(state, ctx)
    dt = clock.perf_counter() - t0
    rel = abs(bal.residual) / bal.scale
    ok = state.converged and rel <= 1e-8 and dt <= 300
    _record(acceptance_log, 3, ok, f"energy identity: |LHS-RHS|/scale = {rel:.1e} (<= 1e-8), "
            f"scale {bal.scale:.3e}, {dt:.1f} s")
    assert ok


def test_criterion_4_penalty_scaling(acceptance_log):
    states, dt = _penalty_sweep()
    pens = [energy(s, s.info["context"]).penalty for s in states]
    ratios = [p / e for p, e in zip(pens, EPS_SWEEP)]
    complete = len(states) == len(EPS_SWEEP) and all(s.converged for s in states)
    monotone = all(b < a for a, b in zip(pens, pens[1:]))
    spread = max(ratios) / min(ratios)
    ok = complete and monotone and spread < 5.0 and dt <= 1200
    table = ", ".join(f"eps={e:g}: {p:.3e}" for e, p in zip(EPS_SWEEP, pens))
    _record(acceptance_log, 4, ok, f"penalty at delta={FIXED_DELTA:g}: {table}; monotone "
            f"{monotone}; penalty/eps spread {spread:.2f} (< 5); {dt:.0f} s")
    assert ok


@pytest.mark.parametrize("part", ["a", "b", "c"])
def test_criterion_5_oracle_equivalence(acceptance_log, part):
    t0 = clock.perf_counter()
    if part == "a":
        reps = [structure_dense_case(seed=s) for s in (0, 1)]
        tol = 1e-10
    elif part == "b":
        reps = [fluid_fd_case(seed=0, n_fluid=6, m=2), fluid_fd_case(seed=1, n_fluid=8, m=1),
                fluid_fd_case(seed=2, n_fluid=8, m=2)]
        tol = 1e-9
    else:
        # the shear case has rho = M exactly; the compressive case is the real test
        reps = [density_fd_case(nodes=64), density_fd_richardson_case(nodes=64)]
        tol = 1e-4
    dt = clock.perf_counter() - t0
    worst = max(r.deviation for r in reps)
    ok = worst <= tol and dt <= 120
    name = {"a": "structure vs dense", "b": "fluid Newton vs FD-Jacobian",
            "c": "density vs 64^3 FD"}[part]
    extra = ""
    if part == "c":
        d = reps[1].detail
        ok &= 3.5 < d["order_ratio"] < 4.5
        extra = (f"; compressive field: raw 64^3 FD {d['raw_fine']:.1e}, 32^3 {d['raw_coarse']:.1e}"
                 f" (ratio {d['order_ratio']:.2f}), extrapolated {reps[1].deviation:.1e}")
    _record(acceptance_log, f"5{part}", ok, f"{name}: deviation {worst:.1e} (<= {tol:g}), "
            f"{dt:.1f} s" + extra)
    assert ok


def _spectral_suite():
    rng = np.random.default_rng(7)
    out = {}
    tb, fb = make_time_basis(1.0, 2), make_fluid_basis(1.0, 1.0, 12)
    from pfsi.basis import make_beam_basis
    u = SpectralField(fb, tb, rng.standard_normal((12, 5)))
    eta = SpectralField(make_beam_basis(1.0, 3), tb, 0.3 * rng.standard_normal((3, 5)))
    t, x = np.arange(4) / 4, np.arange(6) / 6
    tr = trace_velocity(u, eta, (t, x)).values
    out["trace vs oversampled"] = np.abs(tr - trace_oversampled_oracle(u, eta, t, x)).max()
    u2 = SpectralField(fb, tb, rng.standard_normal((12, 5)))
    lin = trace_velocity(u * 2.0 + u2, eta, (t, x)).values
    out["trace linearity"] = np.abs(lin - 2 * tr - trace_velocity(u2, eta, (t, x)).values).max()
    q = QuadratureRule((1.0, 1.0, 2.0), (16, 16, 16))
    quad = np.sqrt(q.integrate(np.sum(u.evaluate(*q.nodes) ** 2, axis=0)))
    out["Parseval"] = abs(u.l2_norm() - quad) / quad
    K, n = 5, 11
    f = Fourier1D(1.0, K)
    ca, cb = rng.standard_normal((2, 2 * K + 1))
    xs, y = np.arange(n) / n, np.arange(1024) / 1024
    prod = np.fft.fft((f.evaluate(y) @ ca) * (f.evaluate(y) @ cb)) / 1024
    ref = np.real(np.fft.ifft(pad_spectrum(prod, (n,))) * n)
    out["dealiased product"] = np.abs(dealiased_product(f.evaluate(xs) @ ca,
                                                        f.evaluate(xs) @ cb) - ref).max()
    p, h = np.array([0.37, 0.61, -0.23]), 1e-5
    worst = 0.0
    for k, ax in enumerate("txz"):
        e = np.zeros(3)
        e[k] = h
        fd = (u.evaluate_points(*(p + e)) - u.evaluate_points(*(p - e))) / (2 * h)
        ex = differentiate(u, ax).evaluate_points(*p)
        worst = max(worst, np.abs(fd - ex).max() / max(np.abs(ex).max(), 1.0))
    out["derivative vs FD"] = worst
    out["Gram time"] = time_gram_oracle()
    out["Gram beam H2"] = beam_h2_gram_oracle()
    out["Gram fluid"] = fluid_gram_oracle()
    d, s = korn_defect(SpectralField(make_fluid_basis(1.0, 1.0, 20), tb,
                                     rng.standard_normal((20, 5))))
    out["Korn"] = abs(d) / s
    return out


SPECTRAL_TOL = {"trace vs oversampled": 1e-12, "trace linearity": 1e-12, "Parseval": 1e-12,
                "dealiased product": 1e-12, "derivative vs FD": 1e-8, "Gram time": 1e-12,
                "Gram beam H2": 1e-10, "Gram fluid": 1e-12, "Korn": 1e-12}


def test_criterion_6_spectral_exactness(acceptance_log):
    t0 = clock.perf_counter()
    vals = _spectral_suite()
    dt = clock.perf_counter() - t0
    bad = [k for k, v in vals.items() if not v <= SPECTRAL_TOL[k]]
    ok = not bad and dt < 60
    worst = max(vals, key=lambda k: vals[k] / SPECTRAL_TOL[k])
    _record(acceptance_log, 6, ok, f"spectral suite: {len(vals) - len(bad)}/{len(vals)} within "
            f"tolerance, tightest {worst} {vals[worst]:.1e} (<= {SPECTRAL_TOL[worst]:g}), "
            f"{dt:.1f} s" + (f"; failing {bad}" if bad else ""))
    assert ok


def test_criterion_7_refinement_trend(acceptance_log):
    # at fixed (eps, delta) the refined solutions approach the regularised
    # problem, so the residual that must shrink keeps the eps and delta terms;
    # the physical-terms residual tends to an O(eps, delta) offset instead
    runs, dt = _refinement()
    reps = [coupled_weak_residual(s, c) for s, c in runs]
    total = [r.total_norm for r in reps]
    phys = [r.physical_norm for r in reps]
    conv = all(s.converged for s, _ in runs)
    monotone = all(b < a for a, b in zip(total, total[1:]))
    ok = conv and monotone and dt <= 1800 and max(r.constraint for r in reps) <= 1e-12
    _record(acceptance_log, 7, ok, "refinement (m,n_beam,n_fluid) "
            + " -> ".join(f"{k}: {v:.3e}" for k, v in zip(REFINEMENT, total))
            + " (regularised coupled residual); physical terms only "
            + " -> ".join(f"{v:.3e}" for v in phys) + f"; {dt:.0f} s")
    assert ok


def test_criterion_8_energy_inequality_trend(acceptance_log):
    states = _default_continuation()
    defects = [energy_inequality(s, s.info["context"])[0] for s in states]
    complete = len(states) == 3 and all(s.converged for s in states)
    nonincreasing = all(b <= a for a, b in zip(defects, defects[1:]))
    ok = complete and nonincreasing and defects[-1] <= 1e-6
    _record(acceptance_log, 8, ok, "inequality defect along default continuation: "
            + ", ".join(f"{d:.1e}" for d in defects) + " (non-increasing, final <= 1e-6)")
    assert ok
