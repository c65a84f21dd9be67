"""Liouvillian construction, steady states and density-matrix evolution.

Vectorization is column stacking throughout: ``vec(rho) = rho.reshape(-1,
order="F")`` so that ``vec(A rho B) = (B.T kron A) vec(rho)``.

Collapse channels are ``(C, r)`` pairs entering the generator as
``r (2 C rho C^dag - C^dag C rho - rho C^dag C)``; the cavity channel is
``(a, kappa)`` and the qubit channel ``(sigma_minus, gamma / 2)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .hilbert import DimensionError, JointOps, Operator, SystemParams, TruncatedSpace, build_jc_hamiltonian

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg if residual is None else f"{msg} (residual {residual:.3e})")
        self.residual = residual


class DegenerateSteadyStateError(SolverError):
    pass


class StiffnessError(SolverError):
    pass


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    data: np.ndarray
    space_tag: str

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data, dtype=complex))
        if self.data.ndim != 2 or self.data.shape[0] != self.data.shape[1]:
            raise DimensionError("density matrix must be square")

    @classmethod
    def from_pure(cls, psi: np.ndarray, space_tag: str) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()), space_tag)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def hermitized(self) -> np.ndarray:
        return 0.5 * (self.data + self.data.conj().T)

    def diagnostics(self) -> dict:
        d = self.data
        return {
            "hermiticity": float(np.max(np.abs(d - d.conj().T))),
            "trace_error": float(abs(np.trace(d) - 1)),
            "min_eigenvalue": float(np.linalg.eigvalsh(self.hermitized()).min()),
        }

    def check(self, herm_tol=1e-10, trace_tol=1e-10, eig_tol=1e-8) -> "DensityMatrix":
        diag = self.diagnostics()
        if (diag["hermiticity"] > herm_tol or diag["trace_error"] > trace_tol
                or diag["min_eigenvalue"] < -eig_tol):
            raise ValueError(f"not a valid density matrix: {diag}")
        return self


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Sparse superoperator acting on column-stacked density matrices."""

    matrix: sp.csr_matrix
    hilbert_dim: int
    space_tag: str
    channels: tuple = field(default=())

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def norm_inf(self) -> float:
        return float(abs(self.matrix).sum(axis=1).max())

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.hilbert_dim)


def build_liouvillian(H: Operator, channels: Sequence[tuple[Operator, float]]) -> Liouvillian:
    """Lindblad generator ``-i[H, .] + sum_j r_j D[C_j]`` (see module doc)."""
    d = H.dim
    eye = sp.identity(d, dtype=complex, format="csr")
    h = H.csr()
    L = -1j * (sp.kron(eye, h) - sp.kron(h.T, eye))
    for C, rate in channels:
        if C.dim != d or C.space_tag != H.space_tag:
            raise DimensionError("collapse operator does not match the Hamiltonian space")
        if rate < 0:
            raise ValueError(f"negative rate {rate}")
        if rate == 0:
            continue
        c = C.csr()
        cdc = (c.conj().T @ c).tocsr()
        L = L + rate * (2 * sp.kron(c.conj(), c) - sp.kron(eye, cdc) - sp.kron(cdc.T, eye))
    return Liouvillian(sp.csr_matrix(L), d, H.space_tag, tuple(channels))


def jc_channels(p: SystemParams, space: TruncatedSpace, ops: JointOps | None = None):
    ops = ops or JointOps.build(space)
    return [(ops.a, p.kappa), (ops.sm, p.gamma / 2)]


def jc_liouvillian(p: SystemParams, space: TruncatedSpace) -> Liouvillian:
    return build_liouvillian(build_jc_hamiltonian(p, space), jc_channels(p, space))


def trace_row(dim: int) -> np.ndarray:
    """Row vector ``vec(I)^T`` so that ``trace_row @ vec(rho) = tr(rho)``."""
    return vec(np.eye(dim))


def steady_state_residual(L: Liouvillian, rho: DensityMatrix) -> float:
    """``||L vec(rho)||_inf / ||L||_inf``."""
    return float(np.max(np.abs(L.matrix @ vec(rho.data))) / L.norm_inf())


def steady_state(L: Liouvillian, tol: float = 1e-10) -> DensityMatrix:
    """Unique stationary state of ``L``.

    One population row of ``L`` (the one with the largest diagonal magnitude) is
    replaced by the trace constraint and the bordered system is solved by
    sparse LU. If that fails, shifted inverse iteration on the eigenvalue
    closest to zero is used instead.
    """
    d = L.hilbert_dim
    M = L.matrix.tolil(copy=True)
    # candidate rows are the population equations: in a block-diagonal L
    # (e.g. no drive) a coherence row would leave the null block intact
    pop = np.arange(d) * (d + 1)
    row = int(pop[np.argmax(np.abs(L.matrix.diagonal()[pop]))])
    M[row, :] = trace_row(d)
    b = np.zeros(L.dim, dtype=complex)
    b[row] = 1.0
    x = None
    try:
        lu = spla.splu(M.tocsc())
        x = lu.solve(b)
        if not np.all(np.isfinite(x)):
            x = None
    except RuntimeError as exc:  # exactly singular factor
        log.info("direct steady-state solve failed (%s); trying inverse iteration", exc)
    if x is None:
        x = _inverse_iteration(L)
    rho = DensityMatrix(_normalize(unvec(x, d)), L.space_tag)
    res = steady_state_residual(L, rho)
    if res > tol:
        x = _inverse_iteration(L, x0=vec(rho.data))
        rho = DensityMatrix(_normalize(unvec(x, d)), L.space_tag)
        res = steady_state_residual(L, rho)
        if res > tol:
            raise SolverError("steady state did not reach tolerance", res)
    return rho


def _normalize(r: np.ndarray) -> np.ndarray:
    r = 0.5 * (r + r.conj().T)
    return r / np.trace(r).real


def _inverse_iteration(L: Liouvillian, x0=None, maxiter=50) -> np.ndarray:
    n = L.dim
    shift = 1e-9 * L.norm_inf()
    A = (L.matrix - shift * sp.identity(n, format="csr")).tocsc()
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SolverError(f"shifted factorization failed: {exc}") from exc
    rng = np.random.default_rng(0)
    x = x0 if x0 is not None else rng.standard_normal(n) + 0j
    x = x / np.linalg.norm(x)
    for _ in range(maxiter):
        y = lu.solve(x)
        y /= np.linalg.norm(y)
        if np.linalg.norm(y - x * np.vdot(x, y)) < 1e-13:
            x = y
            break
        x = y
    # two eigenvalues near zero mean more than one steady state
    vals = spla.eigs(L.matrix, k=2, sigma=0, return_eigenvectors=False)
    vals = np.sort(np.abs(vals))
    if vals[1] < 1e-10 * L.norm_inf():
        raise DegenerateSteadyStateError(
            f"Liouvillian has at least two zero modes: |lambda| = {vals}")
    return x


def spectral_gap(L: Liouvillian, k: int = 3) -> np.ndarray:
    """Eigenvalues of ``L`` nearest to zero, sorted by modulus.

    The shift sits slightly off zero: factorizing ``L`` itself (singular by
    construction) lets ARPACK return spurious eigenvalues.
    """
    M = sp.csc_matrix(L.matrix)
    shift = 1e-6 * spla.norm(M, 1)
    vals = spla.eigs(M, k=k, sigma=shift, return_eigenvectors=False)
    return vals[np.argsort(np.abs(vals))]


def evolve(rho0: DensityMatrix, L: Liouvillian, t_grid: Sequence[float],
           method: Literal["DOP853", "RK45", "expm"] = "DOP853",
           rtol: float = 1e-8, atol: float = 1e-12) -> list[DensityMatrix]:
    """Integrate ``d vec(rho)/dt = L vec(rho)`` and sample at ``t_grid``.

    ``method="expm"`` propagates with the sparse matrix exponential between
    output times, which avoids the step-size limit of explicit schemes when
    ``L`` has large imaginary eigenvalues.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) == 0 or t[0] != 0 or np.any(np.diff(t) < 0):
        raise ValueError("t_grid must be ascending and start at 0")
    d = L.hilbert_dim
    y0 = vec(rho0.data)
    if method == "expm":
        out = [y0]
        y = y0
        for dt in np.diff(t):
            if dt > 0:
                y = spla.expm_multiply(L.matrix * dt, y)
            out.append(y)
        ys = np.array(out).T
    else:
        if len(t) == 1 or t[-1] == 0:
            return [DensityMatrix(rho0.data.copy(), rho0.space_tag) for _ in t]
        A = L.matrix
        sol = solve_ivp(lambda _t, y: A @ y, (t[0], t[-1]), y0, method=method,
                        t_eval=t, rtol=rtol, atol=atol)
        if sol.status != 0:
            raise StiffnessError(
                f"integration stopped at t={sol.t[-1] if len(sol.t) else 0:.4g}: {sol.message}; "
                "reduce n_max or use method='expm'")
        ys = sol.y
    return [DensityMatrix(unvec(ys[:, i], d), rho0.space_tag) for i in range(len(t))]


def expectation(rho: DensityMatrix, O: Operator) -> complex:
    if O.dim != rho.dim:
        raise DimensionError(f"operator dim {O.dim} vs density matrix dim {rho.dim}")
    if O.is_sparse:
        prod = O.data.T.multiply(rho.data).sum()
        return complex(prod)
    return complex(np.einsum("ij,ji->", rho.data, O.data))


def partial_trace(rho: DensityMatrix, keep: Literal["cavity", "qubit"]) -> DensityMatrix:
    """Reduce a joint (qubit-major) density matrix to one factor."""
    if rho.space_tag != "joint":
        raise DimensionError("partial_trace needs a joint density matrix")
    n = rho.dim // 2
    r = rho.data.reshape(2, n, 2, n)
    if keep == "cavity":
        return DensityMatrix(np.einsum("qiqj->ij", r), "cavity")
    if keep == "qubit":
        return DensityMatrix(np.einsum("inkn->ik", r), "qubit")
    raise ValueError(f"keep must be 'cavity' or 'qubit', not {keep!r}")


def von_neumann_entropy(rho: DensityMatrix | np.ndarray) -> float:
    """``-sum lambda ln lambda`` (nats), eigenvalues below 1e-14 dropped."""
    m = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
    lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    lam = lam[lam > 1e-14]
    return float(-np.sum(lam * np.log(lam)))


def trace_distance(a: DensityMatrix | np.ndarray, b: DensityMatrix | np.ndarray) -> float:
    ma = a.data if isinstance(a, DensityMatrix) else np.asarray(a)
    mb = b.data if isinstance(b, DensityMatrix) else np.asarray(b)
    diff = ma - mb
    return float(0.5 * np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


def ground_state(space: TruncatedSpace) -> np.ndarray:
    """``|g, 0>`` as a joint state vector."""
    psi = np.zeros(space.dim, dtype=complex)
    psi[space.index(1, 0)] = 1.0
    return psi
