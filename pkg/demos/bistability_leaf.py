"""Mean-field bistability: the fold lines of the dispersive equation and a
Maxwell-Bloch S-curve.

Fig. 1(d)-style ratios: g/gamma = 600, 2kappa/gamma = 12, delta/g = 0.873.
"""
import numpy as np

from dispersive_jc import meanfield as mf
from dispersive_jc.hilbert import SystemParams
from dispersive_jc.io import write_csv

import _out

kappa, g = 6.0, 600.0
p = SystemParams.from_dispersive(9.167 * kappa, 0.873 * g, g, 45.0, kappa, 1.0)
lam = g ** 2 / p.delta
grid = np.concatenate([np.linspace(0.25, 10, 40), np.linspace(10, 1.1 * lam, 200)])
leaf = mf.bistability_leaf(p, grid)
print(f"leaf sampled at {len(leaf.points)} detunings; C1 ~ {leaf.c1}, C2 = {leaf.c2}")
lo, hi = mf.turning_points(p, p.delta_c)
print(f"at dc/kappa = 9.167 the folds sit at eps/gamma = {lo:.3f} and {hi:.3f}")
dc_cusp, eps_cusp = mf.cusp_point(p, lam - 30, lam)
print(f"cusp at dc = {dc_cusp:.2f} (g^2/delta - sqrt(3) kappa = {lam - np.sqrt(3) * kappa:.2f}), eps = {eps_cusp:.2f}")
write_csv(_out.path("leaf.csv"), ("delta_c", "eps_low", "eps_high"), leaf.points)

# damped S-curve at a drive inside the leaf
q = p.replace(eps_d=100.0)
bs = mf.mb_steady_scurve(q, np.linspace(0, 20, 201) * kappa)
write_csv(_out.path("scurve.csv"), ("delta_c", "root", "n", "re_alpha", "im_alpha", "stable"), bs.rows())
print("Maxwell-Bloch root counts along the sweep:", sorted(set(bs.n_roots().tolist())))
_out.gnuplot("leaf.gp", """
plot 'leaf.csv' using 1:2 with lines title 'lower fold', '' using 1:3 with lines title 'upper fold'
""")
