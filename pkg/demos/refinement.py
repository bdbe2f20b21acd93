"""Weak residual of the limit momentum equation under (m, n) refinement.

Test pairs ``(phi, psi)`` are built from the first beam modes and a smooth
bump following the beam, so ``phi`` equals ``psi e2`` on the beam and the
penalty terms cancel.  Since ``phi`` is not in the fluid basis the
residual is not zero by construction.  The physical-terms residual drops
as the bases grow; the residual that also keeps the ``eps`` and ``delta``
terms levels off once the truncation of ``phi`` dominates.
"""

from pfsi.diagnostics import coupled_weak_residual
from pfsi.driver import SolverConfig, Stage, build_context, initial_state, run_stage, \
    transfer_state
from pfsi.geometry import DomainSpec

config = SolverConfig(DomainSpec(1.0, 1.0, 1.0), f_modes=((1.0, 1, 1),), F_modes=((0.1, 2, 1),))
state = None
for m, n_beam, n_fluid in ((2, 4, 8), (3, 6, 16), (4, 8, 24)):
    ctx = build_context(Stage(m, n_beam, n_fluid, 0.1, 0.1), config)
    start = initial_state(ctx) if state is None else transfer_state(state, ctx)
    state = run_stage(start, ctx)
    rep = coupled_weak_residual(state, ctx)
    print(f"m={m} n_beam={n_beam} n_fluid={n_fluid:2d}: physical {rep.physical_norm:.3e}, "
          f"with regularisation {rep.total_norm:.3e}, constraint {rep.constraint:.0e}")
