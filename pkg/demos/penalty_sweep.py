"""How the penalty residual shrinks as the coupling is tightened.

Holding the artificial pressure fixed at ``delta = 0.1`` we lower ``eps``
from 1e-1 to 1e-3, warm-starting each stage from the previous one.  The
penalty residual ``int |v - eta_t e2|^2`` decreases monotonically; its
ratio to ``eps`` also decreases, i.e. the residual falls faster than
linearly in ``eps`` for this smooth forcing.
"""

import time

from pfsi import energy
from pfsi.driver import ContinuationSchedule, SolverConfig, Stage, run_continuation
from pfsi.geometry import DomainSpec

config = SolverConfig(DomainSpec(1.0, 1.0, 1.0), f_modes=((1.0, 1, 1),), F_modes=((0.1, 2, 1),))
schedule = ContinuationSchedule(tuple(Stage(2, 4, 12, eps, 0.1, 1e-10, 1500)
                                      for eps in (1e-1, 1e-2, 1e-3)))
t0 = time.perf_counter()
states = run_continuation(schedule, config)
print(f"{'eps':>8} {'iters':>6} {'penalty':>11} {'penalty/eps':>12}")
for st in states:
    ctx = st.info["context"]
    pen = energy(st, ctx).penalty
    print(f"{ctx.stage.eps:8.0e} {st.iteration:6d} {pen:11.3e} {pen / ctx.stage.eps:12.3e}")
print(f"total {time.perf_counter() - t0:.1f} s")
