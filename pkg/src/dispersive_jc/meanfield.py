"""Maxwell-Bloch and neoclassical mean-field equations.

State variables are ``alpha = <a>``, ``mu = <sigma_->`` and
``zeta = <sigma_z>``. With qubit damping ``gamma`` the equations are

    d alpha/dt = -(kappa - i dc) alpha - i g mu - i eps
    d mu/dt    = (i dq - gamma/2) mu + i g alpha zeta
    d zeta/dt  = -gamma (zeta + 1) + 2 i g (alpha^* mu - alpha mu^*)

which reduce to the neoclassical equations at ``gamma = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .hilbert import SystemParams


@dataclass(frozen=True)
class MeanFieldState:
    alpha: complex
    mu: complex
    zeta: float

    def to_real(self) -> np.ndarray:
        return np.array([self.alpha.real, self.alpha.imag, self.mu.real, self.mu.imag, self.zeta])

    @classmethod
    def from_real(cls, x) -> "MeanFieldState":
        return cls(complex(x[0], x[1]), complex(x[2], x[3]), float(x[4]))

    @classmethod
    def from_bloch(cls, alpha: complex, sx: float, sy: float, sz: float) -> "MeanFieldState":
        """Qubit given as a Bloch vector; ``mu = (sx - i sy) / 2``."""
        return cls(complex(alpha), complex(sx, -sy) / 2, float(sz))

    @property
    def bloch_length2(self) -> float:
        """``|2 mu|^2 + zeta^2``; equal to 1 on the Bloch sphere."""
        return 4 * abs(self.mu) ** 2 + self.zeta ** 2

    @property
    def photons(self) -> float:
        return abs(self.alpha) ** 2


def maxwell_bloch_rhs(s: MeanFieldState, p: SystemParams) -> MeanFieldState:
    a, m, z = s.alpha, s.mu, s.zeta
    eps = complex(p.eps_d)
    da = -(p.kappa - 1j * p.delta_c) * a - 1j * p.g * m - 1j * eps
    dm = (1j * p.delta_q - p.gamma / 2) * m + 1j * p.g * a * z
    dz = -p.gamma * (z + 1) + (2j * p.g * (a.conjugate() * m - a * m.conjugate())).real
    return MeanFieldState(da, dm, dz)


def _rhs_real(p: SystemParams):
    k, dc, dq, g, gam = p.kappa, p.delta_c, p.delta_q, p.g, p.gamma
    er, ei = complex(p.eps_d).real, complex(p.eps_d).imag

    def f(_t, x):
        ar, ai, mr, mi, z = x
        return np.array([
            -k * ar - dc * ai + g * mi + ei,
            -k * ai + dc * ar - g * mr - er,
            -gam / 2 * mr - dq * mi - g * ai * z,
            -gam / 2 * mi + dq * mr + g * ar * z,
            -gam * (z + 1) - 4 * g * (ar * mi - ai * mr),
        ])

    return f


@dataclass(frozen=True, eq=False)
class MeanFieldTrajectory:
    t: np.ndarray
    alpha: np.ndarray
    mu: np.ndarray
    zeta: np.ndarray

    def state(self, i: int) -> MeanFieldState:
        return MeanFieldState(complex(self.alpha[i]), complex(self.mu[i]), float(self.zeta[i]))

    @property
    def bloch_length2(self) -> np.ndarray:
        return 4 * np.abs(self.mu) ** 2 + self.zeta ** 2


def integrate_mb(s0: MeanFieldState, p: SystemParams, t_grid, rtol: float = 1e-10,
                 atol: float = 1e-12) -> MeanFieldTrajectory:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be strictly ascending")
    sol = solve_ivp(_rhs_real(p), (t[0], t[-1]), s0.to_real(), method="DOP853",
                    t_eval=t, rtol=rtol, atol=atol)
    if sol.status != 0:
        raise RuntimeError(f"Maxwell-Bloch integration failed: {sol.message}")
    y = sol.y
    return MeanFieldTrajectory(t, y[0] + 1j * y[1], y[2] + 1j * y[3], y[4])


def neoclassical_steady(p: SystemParams, alpha: complex) -> tuple[float, tuple[float, float]]:
    """Steady ``|mu|`` and both ``zeta`` roots of the gamma = 0 equations."""
    if p.delta_q == 0:
        raise ValueError("neoclassical steady state needs delta_q != 0")
    mu = p.g * abs(alpha) / math.sqrt(p.delta_q ** 2 + 4 * p.g ** 2 * abs(alpha) ** 2)
    z = math.sqrt(max(0.0, 1 - 4 * mu ** 2))
    return mu, (-z, z)


# --- steady-state branches -------------------------------------------------

@dataclass(frozen=True)
class Root:
    n: float
    alpha: complex
    stable: bool
    state: MeanFieldState | None = None


@dataclass(frozen=True, eq=False)
class BranchSet:
    """Steady roots along a sweep; ``roots[i]`` are sorted by photon number."""

    sweep_name: str
    sweep: np.ndarray
    roots: list = field(default_factory=list)
    gaps: list = field(default_factory=list)

    def n_roots(self) -> np.ndarray:
        return np.array([len(r) for r in self.roots])

    def branches(self) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """Lower, middle and upper branches as ``(n, alpha, stable)`` arrays.

        Missing points are NaN. A lone root is placed on the lower branch
        when it lies below the middle branch's mean occupation, else upper.
        """
        m = len(self.sweep)
        out = [(np.full(m, np.nan), np.full(m, np.nan + 0j), np.zeros(m, dtype=bool))
               for _ in range(3)]
        mids = [r[1].n for r in self.roots if len(r) == 3]
        split = np.mean(mids) if mids else np.inf
        for i, rs in enumerate(self.roots):
            if len(rs) == 3:
                slots = [0, 1, 2]
            elif len(rs) == 1:
                slots = [0 if rs[0].n < split else 2]
            else:
                slots = list(range(len(rs)))[:3]
            for slot, r in zip(slots, rs):
                out[slot][0][i] = r.n
                out[slot][1][i] = r.alpha
                out[slot][2][i] = r.stable
        return out

    def rows(self):
        for x, rs in zip(self.sweep, self.roots):
            for k, r in enumerate(rs):
                yield (float(x), k, r.n, r.alpha.real, r.alpha.imag, int(r.stable))


def n_bracket_grid(eps: float, kappa: float, points: int = 1000) -> np.ndarray:
    """Log grid ``[1e-6, 10 (eps/kappa)^2]``."""
    hi = max(10 * (abs(eps) / kappa) ** 2, 1e-3)
    return np.logspace(-6, math.log10(hi), points)


def _find_roots(F, grid: np.ndarray) -> list[float]:
    vals = np.array([F(n) for n in grid])
    out = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        if vals[i] == 0:
            out.append(float(grid[i]))
            continue
        if vals[i + 1] == 0:
            continue
        out.append(brentq(F, grid[i], grid[i + 1], xtol=1e-15 * grid[i + 1], rtol=1e-15, maxiter=200))
    return out


def dispersive_drive2(n, p: SystemParams, delta_c: float | None = None):
    """``eps^2(n) = n {kappa^2 + [dc - (g^2/delta)(1 + 4 g^2 n/delta^2)^(-1/2)]^2}``."""
    dc = p.delta_c if delta_c is None else delta_c
    delta = p.delta
    if delta <= 0:
        raise ValueError("dispersive branches need delta > 0")
    shift = p.g ** 2 / delta / np.sqrt(1 + 4 * p.g ** 2 * np.asarray(n) / delta ** 2)
    return n * (p.kappa ** 2 + (dc - shift) ** 2)


def dispersive_alpha(n: float, p: SystemParams, delta_c: float | None = None) -> complex:
    dc = p.delta_c if delta_c is None else delta_c
    shift = p.g ** 2 / p.delta / math.sqrt(1 + 4 * p.g ** 2 * n / p.delta ** 2)
    return -1j * complex(p.eps_d) / (p.kappa - 1j * (dc - shift))


def dispersive_branches(p: SystemParams, delta_c: float | np.ndarray | None = None,
                        n_grid: np.ndarray | None = None) -> BranchSet:
    """Roots of the gamma = 0 dispersive bistability equation.

    Stability follows the slope of ``eps^2(n)``: roots on a falling segment
    are unstable.
    """
    dcs = np.atleast_1d(p.delta_c if delta_c is None else delta_c).astype(float)
    e2 = abs(p.eps_d) ** 2
    grid = n_bracket_grid(abs(p.eps_d), p.kappa) if n_grid is None else np.asarray(n_grid, float)
    if grid.size == 0:
        raise ValueError("empty n_grid")
    roots = []
    for dc in dcs:
        F = lambda n: dispersive_drive2(n, p, dc) - e2  # noqa: E731
        found = []
        for n in _find_roots(F, grid):
            h = 1e-7 * max(n, 1e-9)
            slope = (dispersive_drive2(n + h, p, dc) - dispersive_drive2(n - h, p, dc)) / (2 * h)
            found.append(Root(n, dispersive_alpha(n, p, dc), bool(slope > 0)))
        roots.append(sorted(found, key=lambda r: r.n))
    return BranchSet("delta_c", dcs, roots)


def dispersive_residual(root: Root, p: SystemParams, delta_c: float | None = None) -> float:
    """Relative residual of the self-consistent field equation at a root."""
    rhs = dispersive_alpha(abs(root.alpha) ** 2, p, delta_c)
    return abs(root.alpha - rhs) / max(abs(root.alpha), 1e-300)


@dataclass(frozen=True)
class LeafBoundary:
    points: list  # (delta_c, eps_low, eps_high)
    c1: tuple | None
    c2: tuple | None

    @property
    def empty(self) -> bool:
        return not self.points

    def contains(self, delta_c: float, eps: float) -> bool | None:
        """True inside, False outside, None if ``delta_c`` is off the sampled range."""
        if self.empty:
            return False
        dcs = np.array([q[0] for q in self.points])
        lo = np.array([q[1] for q in self.points])
        hi = np.array([q[2] for q in self.points])
        if not dcs.min() <= delta_c <= dcs.max():
            return False
        order = np.argsort(dcs)
        l = np.interp(delta_c, dcs[order], lo[order])
        h = np.interp(delta_c, dcs[order], hi[order])
        return bool(l < eps < h)


def turning_points(p: SystemParams, delta_c: float, points: int = 2000) -> tuple[float, float] | None:
    """Drive amplitudes ``(eps_low, eps_high)`` of the fold at ``delta_c``.

    The fold exists when ``eps^2(n)`` has a local maximum followed by a
    local minimum; ``eps_high`` is the maximum, ``eps_low`` the minimum.
    """
    lam = p.g ** 2 / p.delta
    b = 4 * p.g ** 2 / p.delta ** 2
    if delta_c > 0 and lam > delta_c:
        n_res = ((lam / delta_c) ** 2 - 1) / b
    else:
        n_res = 1.0 / b if b > 0 else 1.0
    grid = np.logspace(-6, math.log10(10 * n_res + 10), points)

    def slope(n):
        h = 1e-6 * n
        return (dispersive_drive2(n + h, p, delta_c) - dispersive_drive2(n - h, p, delta_c)) / (2 * h)

    tps = _find_roots(slope, grid)
    if len(tps) < 2:
        return None
    vals = [dispersive_drive2(n, p, delta_c) for n in tps[:2]]
    return math.sqrt(vals[1]), math.sqrt(vals[0])


def bistability_leaf(p: SystemParams, delta_c_grid) -> LeafBoundary:
    """Fold lines of the dispersive equation over a detuning sweep.

    ``c1`` is the cusp, taken as the sampled point of smallest fold width
    at the large-detuning end; ``c2`` is the ``delta_c -> 0`` closing point
    at ``eps = g/2``.
    """
    if p.delta <= 0:
        raise ValueError("bistability leaf needs delta > 0")
    pts = []
    for dc in np.sort(np.asarray(delta_c_grid, dtype=float)):
        tp = turning_points(p, dc)
        if tp is not None and tp[1] > tp[0]:
            pts.append((float(dc), tp[0], tp[1]))
    if not pts:
        return LeafBoundary([], None, None)
    last = pts[-1]
    c1 = (last[0], 0.5 * (last[1] + last[2]))
    c2 = (0.0, p.g / 2)
    return LeafBoundary(pts, c1, c2)


def cusp_point(p: SystemParams, dc_lo: float, dc_hi: float) -> tuple[float, float]:
    """Bisect for the detuning where the two folds merge (critical point C1)."""
    if turning_points(p, dc_lo) is None or turning_points(p, dc_hi) is not None:
        raise ValueError("cusp not bracketed by the given detunings")
    for _ in range(60):
        mid = 0.5 * (dc_lo + dc_hi)
        if turning_points(p, mid) is None:
            dc_hi = mid
        else:
            dc_lo = mid
    lo, hi = turning_points(p, dc_lo)
    return dc_lo, 0.5 * (lo + hi)


# --- Maxwell-Bloch steady states with gamma > 0 ----------------------------

def _mb_zeta(n, p: SystemParams):
    dq2 = (p.gamma / 2) ** 2 + p.delta_q ** 2
    return -1.0 / (1 + 2 * p.g ** 2 * n / dq2)


def _mb_field_coeff(n, p: SystemParams, delta_c: float):
    """Coefficient ``K(n)`` with ``K alpha = -i eps`` at a fixed point."""
    z = _mb_zeta(n, p)
    return p.kappa - 1j * delta_c - p.g ** 2 * z / (p.gamma / 2 - 1j * p.delta_q)


def mb_drive2(n, p: SystemParams, delta_c: float | None = None):
    dc = p.delta_c if delta_c is None else delta_c
    return n * np.abs(_mb_field_coeff(n, p, dc)) ** 2


def mb_fixed_point(n: float, p: SystemParams, delta_c: float | None = None) -> MeanFieldState:
    dc = p.delta_c if delta_c is None else delta_c
    q = p.replace(delta_c=dc, delta_q=p.delta_q - p.delta_c + dc)
    alpha = -1j * complex(q.eps_d) / _mb_field_coeff(n, q, dc)
    z = _mb_zeta(n, q)
    mu = 1j * q.g * alpha * z / (q.gamma / 2 - 1j * q.delta_q)
    return MeanFieldState(alpha, mu, z)


def mb_steady_states(p: SystemParams, n_grid: np.ndarray | None = None) -> list[Root]:
    """All fixed points of the damped Maxwell-Bloch equations at ``p``."""
    if p.gamma <= 0:
        raise ValueError("mb_steady_states needs gamma > 0")
    e2 = abs(p.eps_d) ** 2
    grid = n_bracket_grid(abs(p.eps_d), p.kappa) if n_grid is None else n_grid
    out = []
    for n in _find_roots(lambda n: mb_drive2(n, p) - e2, grid):
        s = mb_fixed_point(n, p)
        _, verdict = jacobian_stability(s, p)
        out.append(Root(n, s.alpha, verdict == "stable", s))
    return sorted(out, key=lambda r: r.n)


def mb_steady_scurve(p: SystemParams, delta_c_sweep) -> BranchSet:
    """Maxwell-Bloch steady roots along a drive-detuning sweep.

    The qubit detuning follows the drive: ``delta_q - delta_c`` is held at
    its value in ``p``.
    """
    dcs = np.asarray(delta_c_sweep, dtype=float)
    offset = p.delta_q - p.delta_c
    roots, gaps = [], []
    for dc in dcs:
        q = p.replace(delta_c=float(dc), delta_q=float(dc) + offset)
        rs = mb_steady_states(q)
        if not rs:
            gaps.append(float(dc))
        roots.append(rs)
    return BranchSet("delta_c", dcs, roots, gaps)


def mb_jacobian(s: MeanFieldState, p: SystemParams) -> np.ndarray:
    """Analytic Jacobian in the real coordinates ``(Re a, Im a, Re mu, Im mu, zeta)``."""
    k, dc, dq, g, gam = p.kappa, p.delta_c, p.delta_q, p.g, p.gamma
    ar, ai, mr, mi, z = s.to_real()
    return np.array([
        [-k, -dc, 0, g, 0],
        [dc, -k, -g, 0, 0],
        [0, -g * z, -gam / 2, -dq, -g * ai],
        [g * z, 0, dq, -gam / 2, g * ar],
        [-4 * g * mi, 4 * g * mr, 4 * g * ai, -4 * g * ar, -gam],
    ])


def jacobian_stability(fixed_point: MeanFieldState, p: SystemParams, tol: float = 1e-8):
    """Eigenvalues of the linearization and a stable/unstable/marginal verdict."""
    r = maxwell_bloch_rhs(fixed_point, p)
    scale = 1 + abs(p.eps_d) + p.g
    if max(abs(r.alpha), abs(r.mu), abs(r.zeta)) > tol * scale:
        raise ValueError("state is not a fixed point of the Maxwell-Bloch equations")
    ev = np.linalg.eigvals(mb_jacobian(fixed_point, p))
    if np.all(ev.real < -1e-10):
        verdict = "stable"
    elif np.any(ev.real > 1e-10 * scale):
        verdict = "unstable"
    else:
        verdict = "marginal"
    return ev, verdict


def neoclassical_roots(p: SystemParams, n_grid: np.ndarray | None = None) -> list[tuple[MeanFieldState, str]]:
    """Fixed points of the gamma = 0 equations on both zeta branches.

    Returns ``(state, branch)`` with ``branch`` ``"lower"`` (zeta < 0) or
    ``"upper"`` (zeta > 0).
    """
    dq, g, k = p.delta_q, p.g, p.kappa
    e2 = abs(p.eps_d) ** 2
    grid = n_bracket_grid(abs(p.eps_d), k) if n_grid is None else n_grid
    out = []
    for sign, label in ((-1, "lower"), (1, "upper")):
        def zeta(n):
            return sign * abs(dq) / math.sqrt(dq ** 2 + 4 * g ** 2 * n)

        def F(n):
            return n * (k ** 2 + (p.delta_c + g ** 2 * zeta(n) / dq) ** 2) - e2

        for n in _find_roots(F, grid):
            z = zeta(n)
            alpha = -1j * complex(p.eps_d) / (k - 1j * p.delta_c - 1j * g ** 2 * z / dq)
            mu = -g * alpha * z / dq
            out.append((MeanFieldState(alpha, mu, z), label))
    return out
