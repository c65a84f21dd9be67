"""Closed-form Duffing steady state against the numerically solved Kerr model.

At dc/kappa = 74.17, g/delta = 0.14, 2kappa/gamma = 12, g/(2kappa) = 279 the
dressed cavity is a Duffing oscillator. The script compares the analytic
Wigner function and photon distribution with the master-equation solution.
"""
import numpy as np

from dispersive_jc import phasespace as ps
from dispersive_jc.hilbert import SystemParams, TruncatedSpace, build_duffing_hamiltonian, fock_ops
from dispersive_jc.io import write_csv
from dispersive_jc.lindblad import build_liouvillian, steady_state

import _out

kappa = 6.0
g = 279 * 2 * kappa
p = SystemParams.from_dispersive(74.17 * kappa, g / 0.14, g, 1.667 * kappa, kappa, 1.0)
dp = ps.DuffingParams.from_system(p)
print(f"chi = {dp.chi:.4e}   c = {dp.c:.4f}   eps_tilde = {dp.eps_tilde:.4f}")

n_max = 40
space = TruncatedSpace(n_max)
a, _, _ = fock_ops(space)
rho = steady_state(build_liouvillian(build_duffing_hamiltonian(p, space, -1), [(a, kappa)]))

grid = ps.GridSpec.square(4.0, 101)
wa = ps.duffing_wigner_grid(dp, grid)
wn = ps.wigner(rho, grid)
print(f"L1 distance analytic vs numeric Wigner: {wa.l1_distance(wn):.2e}")
for name, w in (("analytic", wa), ("numeric", wn)):
    print(f"  {name:8s} critical points: {ps.count_kinds(ps.find_critical_points(w))}")

pn = ps.duffing_photon_pdf(dp, n_max)
diag = np.real(np.diag(rho.data))
print(f"sum p(n) - 1 = {pn.sum() - 1:.1e}   max |p(n) - rho_nn| = {np.abs(pn - diag).max():.1e}")
print(f"m1 closed form = {ps.duffing_mean_photon(dp):.6f}   from p(n) = {np.arange(n_max) @ pn:.6f}")

write_csv(_out.path("duffing_wigner.csv"), ("re_alpha", "im_alpha", "w_analytic", "w_numeric"),
          zip(grid.alphas.real.ravel(), grid.alphas.imag.ravel(), wa.values.ravel(), wn.values.ravel()))
write_csv(_out.path("duffing_pn.csv"), ("n", "p_closed_form", "p_numeric"), zip(range(n_max), pn, diag))
_out.gnuplot("duffing_pn.gp", """
set logscale y
plot 'duffing_pn.csv' using 1:2 with linespoints title 'closed form', '' using 1:3 with points title 'master equation'
""")
