"""Quantum trajectories at the dark-state parameters (gamma = 0).

kappa = 1, g/(2kappa) = 279, eps/(2kappa) = 100/12, g/delta = 0.14,
dc/kappa = 56.833. A short run started in |e, 0> shows the dark
configuration and its qubit line; pass a horizon (in 1/kappa) on the command
line to run from the ground state and classify episodes instead, e.g.
``python dark_state_trajectory.py 2000`` (a few minutes per 1000/kappa).
"""
import sys

import numpy as np

from dispersive_jc import trajectories as tr
from dispersive_jc.hilbert import SystemParams, TruncatedSpace
from dispersive_jc.io import write_csv

import _out

g = 558.0
p = SystemParams.from_dispersive(56.833, g / 0.14, g, 200 / 12, 1.0, 0.0)
space = TruncatedSpace(40)
lam = g ** 2 / p.delta
dt = 2e-4

if len(sys.argv) > 1:
    T = float(sys.argv[1])
    rec = tr.run_trajectory(p, space, T, dt, 25, seed=1, propagator="split")
    rec.write(_out.path("long_trajectory.csv"))
    eps = tr.classify_states(rec, tr.Thresholds())
    for label in tr.LABELS:
        h = tr.lifetime_histogram(eps, label, 5.0, p.kappa)
        print(f"{label:6s}: {h.total:4d} episodes, mean lifetime "
              f"{'-' if h.empty else f'{h.mean:.2f}/kappa'}")
    sys.exit()

psi = np.zeros(space.dim, complex)
psi[space.index(0, 0)] = 1.0
rec = tr.run_trajectory(p, space, 20.0, dt, 1, seed=1, psi0=psi, propagator="split")
keep = tr.discard_transient(rec)
print(f"<sz> over the window: {rec.obs['sz'][keep].mean():+.3f}   <n>: {rec.obs['n'][keep].mean():.3f}")
f, mag = tr.spectrum(tr.demodulate(rec.sm[keep], rec.times[keep], p.delta_q), dt)
near = np.abs(f) < p.delta / 2
peak = f[near][np.argmax(mag[near])]
print(f"qubit line at {peak:.2f} kappa   (-g^2/delta = {-lam:.2f}, bin {f[1] - f[0]:.3f})")
write_csv(_out.path("dark_spectrum.csv"), ("omega", "magnitude"), zip(f[near], mag[near]))
stride = 50
write_csv(_out.path("dark_trajectory.csv"), ("t", "n", "sz", "entropy"),
          zip(rec.times[::stride], rec.obs["n"][::stride], rec.obs["sz"][::stride], rec.obs["entropy"][::stride]))
_out.gnuplot("dark_spectrum.gp", """
set xrange [-150:50]
plot 'dark_spectrum.csv' using 1:2 with lines title '|FT <sigma_->|'
""")
