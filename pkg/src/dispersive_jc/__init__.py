"""Driven, damped Jaynes-Cummings model in the dispersive regime.

Modules
-------
hilbert
    Truncated qubit-cavity space, operators and Hamiltonians.
specfun
    Complex 0F1 / 0F2 series and log-Gamma.
lindblad
    Liouvillian assembly, steady states and time evolution.
trajectories
    Homodyne quantum trajectories, episode detection, lifetimes and spectra.
phasespace
    Husimi Q, Wigner function and the closed-form Duffing steady state.
meanfield
    Maxwell-Bloch and dispersive mean-field branches, bistability leaf.
cli
    The ``djc`` command-line harness.
"""
from .hilbert import JointOps, SystemParams, TruncatedSpace

__all__ = ["JointOps", "SystemParams", "TruncatedSpace"]
