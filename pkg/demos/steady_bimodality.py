"""Steady-state cavity bimodality across a drive-detuning sweep.

Solves the master equation at eps/gamma = 100, 2kappa/gamma = 12,
g/gamma = 3347, g/delta = 0.14 for a handful of detunings and counts the
maxima of the cavity Q function in each frame.
"""
import numpy as np

from dispersive_jc import phasespace as ps
from dispersive_jc.hilbert import JointOps, SystemParams, TruncatedSpace
from dispersive_jc.io import write_csv
from dispersive_jc.lindblad import expectation, jc_liouvillian, partial_trace, steady_state

import _out

kappa, g = 6.0, 3347.0
space = TruncatedSpace(60)
ops = JointOps.build(space)
rows = []
for i, dc in enumerate(np.linspace(55.83, 57.50, 6)):
    p = SystemParams.from_dispersive(dc * kappa, g / 0.14, g, 100.0, kappa, 1.0)
    rho = steady_state(jc_liouvillian(p, space))
    rc = partial_trace(rho, "cavity")
    q = ps.husimi_q(rc, ps.default_grid(rc))
    kinds = ps.count_kinds(ps.find_critical_points(q))
    n = expectation(rho, ops.n).real
    sz = expectation(rho, ops.sz).real
    rows.append((dc, n, sz, kinds["maximum"]))
    write_csv(_out.path(f"q_frame{i}.csv"), ("re_alpha", "im_alpha", "q"),
              zip(q.spec.alphas.real.ravel(), q.spec.alphas.imag.ravel(), q.values.ravel()))
    print(f"dc/kappa = {dc:6.3f}   <n> = {n:7.3f}   <sz> = {sz:+.3f}   Q maxima = {kinds['maximum']}")

write_csv(_out.path("steady_sweep.csv"), ("delta_c_over_kappa", "n", "sz", "q_maxima"), rows)
_out.gnuplot("q_frame0.gp", """
set view map
splot 'q_frame0.csv' using 1:2:3 with points palette pointtype 5 pointsize 0.5
""")
