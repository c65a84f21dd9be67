"""Husimi Q and Wigner functions, the analytic Duffing steady state, and
critical-point classification on sampled grids."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import special

from . import specfun
from .hilbert import SystemParams, duffing_coefficients
from .lindblad import DensityMatrix
from .hilbert import DimensionError


class CoverageWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    nx: int
    y_min: float
    y_max: float
    ny: int

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 points per axis")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("grid bounds must be increasing")

    @classmethod
    def square(cls, half_width: float, n: int = 101, center: complex = 0j) -> "GridSpec":
        c = complex(center)
        return cls(c.real - half_width, c.real + half_width, n,
                   c.imag - half_width, c.imag + half_width, n)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    @property
    def alphas(self) -> np.ndarray:
        """Complex amplitudes, shape ``(ny, nx)``."""
        return self.x[None, :] + 1j * self.y[:, None]

    @property
    def cell_area(self) -> float:
        return (self.x[1] - self.x[0]) * (self.y[1] - self.y[0])


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    spec: GridSpec
    values: np.ndarray  # (ny, nx), row index is y

    @property
    def x(self):
        return self.spec.x

    @property
    def y(self):
        return self.spec.y

    def integral(self) -> float:
        return float(self.values.sum() * self.spec.cell_area)

    def moment(self, fn) -> complex:
        return complex((fn(self.spec.alphas) * self.values).sum() * self.spec.cell_area)

    def l1_distance(self, other: "PhaseGrid") -> float:
        """``sum|f - g| / sum|g|`` over the shared grid."""
        if self.values.shape != other.values.shape:
            raise ValueError("grids differ in shape")
        return float(np.abs(self.values - other.values).sum() / np.abs(other.values).sum())


def default_grid(rho_c: DensityMatrix, n: int = 101) -> GridSpec:
    """Square window of half-width ``sqrt(<n> + 3 sigma_n) + 3``."""
    pn = np.real(np.diag(rho_c.data))
    k = np.arange(len(pn))
    mean = float(pn @ k)
    sd = math.sqrt(max(float(pn @ k ** 2) - mean ** 2, 0.0))
    return GridSpec.square(math.sqrt(mean + 3 * sd) + 3.0, n)


def _check_cavity(rho_c: DensityMatrix):
    if rho_c.space_tag != "cavity":
        raise DimensionError("phase-space functions need a cavity density matrix")


def coherent_amplitudes(alphas: np.ndarray, n_max: int) -> np.ndarray:
    """Fock amplitudes ``<k|alpha>``, shape ``alphas.shape + (n_max,)``."""
    alphas = np.asarray(alphas, dtype=complex)
    k = np.arange(n_max)
    log_norm = -0.5 * special.gammaln(k + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_abs = np.where(k == 0, 0.0, np.log(np.abs(alphas))[..., None] * k)
    phase = np.exp(1j * np.angle(alphas)[..., None] * k)
    mag = np.exp(log_abs + log_norm - 0.5 * np.abs(alphas)[..., None] ** 2)
    return mag * phase


def _warn_coverage(mass: float, what: str):
    if mass < 0.999:
        warnings.warn(f"{what} grid holds only {mass:.4f} of the probability mass",
                      CoverageWarning, stacklevel=3)


def husimi_q(rho_c: DensityMatrix, grid: GridSpec) -> PhaseGrid:
    """``Q(alpha) = <alpha|rho|alpha> / pi``."""
    _check_cavity(rho_c)
    amps = coherent_amplitudes(grid.alphas, rho_c.dim)
    q = np.einsum("...i,ij,...j->...", amps.conj(), rho_c.data, amps).real / np.pi
    out = PhaseGrid(grid, q)
    _warn_coverage(out.integral(), "Q-function")
    return out


def displacement_columns(betas: np.ndarray, n_rows: int, n_cols: int) -> np.ndarray:
    """Matrix elements ``<n|D(beta)|m>`` for ``n < n_rows``, ``m < n_cols``.

    Built column by column from ``D a^dag = (a^dag - beta^*) D`` starting at
    the coherent state ``D|0> = |beta>``; exact inside the row window.
    Shape ``betas.shape + (n_rows, n_cols)``.
    """
    betas = np.asarray(betas, dtype=complex)
    out = np.empty(betas.shape + (n_rows, n_cols), dtype=complex)
    col = coherent_amplitudes(betas, n_rows)
    out[..., 0] = col
    sqrt_n = np.sqrt(np.arange(n_rows))
    bc = betas.conj()[..., None]
    for m in range(n_cols - 1):
        nxt = -bc * col
        nxt[..., 1:] += sqrt_n[1:] * col[..., :-1]
        col = nxt / math.sqrt(m + 1)
        out[..., m + 1] = col
    return out


def wigner(rho_c: DensityMatrix, grid: GridSpec, margin: int = 20,
           chunk: int = 256) -> PhaseGrid:
    """Displaced-parity Wigner function.

    ``W(alpha) = (2/pi) sum_n (-1)^n <n|D(-alpha) rho D(alpha)|n>`` with the
    parity sum running over ``n_max + margin`` Fock states, widened so that the
    displaced state fits for the largest ``|alpha|`` on the grid.
    """
    _check_cavity(rho_c)
    n = rho_c.dim
    reach = float(np.abs(grid.alphas).max()) + math.sqrt(n)
    rows = n + margin + int(math.ceil(reach ** 2 + 6 * reach))
    parity = (-1.0) ** np.arange(rows)
    alphas = grid.alphas.ravel()
    w = np.empty(alphas.shape, dtype=float)
    rho = rho_c.data
    for s in range(0, len(alphas), chunk):
        D = displacement_columns(-alphas[s:s + chunk], rows, n)  # (p, rows, n)
        Drho = D @ rho
        diag = np.einsum("pij,pij->pi", Drho, D.conj()).real
        w[s:s + chunk] = (2 / np.pi) * (diag @ parity)
    out = PhaseGrid(grid, w.reshape(grid.alphas.shape))
    _warn_coverage(out.integral(), "Wigner")
    return out


@dataclass(frozen=True)
class DuffingParams:
    """Parameters of the closed-form Kerr steady state.

    ``c = (kappa - i delta_c')/(i chi)`` with the renormalized detuning
    ``delta_c' = delta_c + (g^2/delta) s - (g^4/delta^3)(2 s + 1)``.
    The drive enters as ``eps_tilde = eps' / (i chi)`` where ``eps' = -i eps_d``
    is the amplitude of the drive written as ``i (eps' a^dag - eps'^* a)``;
    hence ``eps_tilde = -eps_d / chi`` for the real-form drive used here.
    """

    c: complex
    chi: float
    eps_tilde: complex
    delta_c_prime: float
    s: float
    kappa: float

    @classmethod
    def from_system(cls, p: SystemParams, s: float = -1.0) -> "DuffingParams":
        linear, chi = duffing_coefficients(p, s)
        if chi == 0:
            raise ValueError("chi vanishes; the Duffing closed form needs g > 0")
        dcp = -linear
        c = (p.kappa - 1j * dcp) / (1j * chi)
        return cls(c=c, chi=chi, eps_tilde=-complex(p.eps_d) / chi,
                   delta_c_prime=dcp, s=s, kappa=p.kappa)

    @property
    def d(self) -> complex:
        return self.c.conjugate()

    @property
    def z_norm(self) -> float:
        """``2 |eps_tilde|^2``, the 0F2 argument of the normalization."""
        return 2 * abs(self.eps_tilde) ** 2

    def log_norm(self) -> complex:
        return specfun.log_hyp0f2(self.c, self.d, self.z_norm)


def duffing_wigner_analytic(dp: DuffingParams, alpha: complex | np.ndarray) -> float | np.ndarray:
    """Closed-form Wigner function of the Kerr steady state."""
    lnorm = dp.log_norm().real
    alpha = np.asarray(alpha, dtype=complex)
    flat = alpha.ravel()
    out = np.empty(flat.shape)
    for i, al in enumerate(flat):
        m, s = specfun.hyp0f1_scaled(dp.c, 2 * dp.eps_tilde * al.conjugate())
        out[i] = (2 / np.pi) * math.exp(-2 * abs(al) ** 2 + 2 * s - lnorm) * abs(m) ** 2
    out = out.reshape(alpha.shape)
    return float(out) if out.ndim == 0 else out


def duffing_wigner_grid(dp: DuffingParams, grid: GridSpec) -> PhaseGrid:
    return PhaseGrid(grid, duffing_wigner_analytic(dp, grid.alphas))


def duffing_photon_pdf(dp: DuffingParams, n_max: int,
                       variant: Literal["printed", "doubled"] = "printed") -> np.ndarray:
    """Photon-number distribution ``p(n)``, ``n < n_max``, in log space.

    ``variant="doubled"`` uses ``2|eps_tilde|^2`` in the numerator 0F2; it
    exists to quantify that this alternative is not normalized.
    """
    e2 = abs(dp.eps_tilde) ** 2
    if e2 == 0:
        out = np.zeros(n_max)
        out[0] = 1.0
        return out
    arg = e2 if variant == "printed" else 2 * e2
    lnorm = dp.log_norm().real
    n = np.arange(n_max)
    lg = specfun.log_abs_gamma_ratio(dp.c, n)
    out = np.empty(n_max)
    for k in n:
        lf = specfun.log_hyp0f2(dp.c + k, dp.d + k, arg).real
        out[k] = math.exp(k * math.log(e2) - math.lgamma(k + 1) + 2 * lg[k] + lf - lnorm)
    return out


def duffing_mean_photon(dp: DuffingParams) -> float:
    """First moment ``|eps~|^2 0F2(c+1, d+1, z) / (c d 0F2(c, d, z))``."""
    e2 = abs(dp.eps_tilde) ** 2
    if e2 == 0:
        return 0.0
    num = specfun.log_hyp0f2(dp.c + 1, dp.d + 1, dp.z_norm)
    val = e2 * np.exp(num - dp.log_norm()) / (dp.c * dp.d)
    if abs(val.imag) > 1e-10 * max(1.0, abs(val)):
        raise specfun.SeriesAccuracyError(f"mean photon number has imaginary part {val.imag}")
    return float(val.real)


def duffing_symmetric_moment(dp: DuffingParams, n: int, m: int,
                             ctl: specfun.SeriesControl = specfun.DEFAULT_CONTROL) -> complex:
    """Symmetrically ordered moment ``<(a^dag)^n a^m>_S`` of the closed form.

    Integrating ``alpha^*^n alpha^m W`` term by term leaves the single sum
    ``2 sum_k (2e)^k (2e^*)^l (k+n)! Gamma(c)Gamma(d) /
    (2^(k+n+1) k! l! Gamma(c+k) Gamma(d+l) 0F2(c, d, 2|e|^2))`` with
    ``l = k + n - m``.
    """
    if n < 0 or m < 0:
        raise ValueError("moment orders must be nonnegative")
    e = dp.eps_tilde
    c, d = dp.c, dp.d
    lnorm = dp.log_norm()
    lgc, lgd = specfun.log_gamma(c), specfun.log_gamma(d)
    if e == 0:
        # only the k = l = 0 term survives, which needs n == m
        if n != m:
            return 0j
        return complex(math.factorial(n) / 2 ** n)
    le, lec = np.log(2 * e), np.log(2 * e.conjugate())
    total = 0j
    small = 0
    k0 = max(0, m - n)
    for k in range(k0, k0 + ctl.max_terms):
        l = k + n - m
        lt = (k * le + l * lec + math.lgamma(k + n + 1) - (k + n + 1) * math.log(2)
              - math.lgamma(k + 1) - math.lgamma(l + 1)
              + lgc + lgd - specfun.log_gamma(c + k) - specfun.log_gamma(d + l) - lnorm)
        term = 2 * np.exp(lt)
        total += term
        if k > abs(c) + 2 and abs(term) < ctl.rel_tol * max(abs(total), 1e-300):
            small += 1
            if small >= 2:
                return complex(total)
        else:
            small = 0
    raise specfun.SeriesAccuracyError("symmetric moment series did not converge")


@dataclass(frozen=True)
class CriticalPoint:
    position: complex
    kind: Literal["maximum", "minimum", "saddle"]
    value: float


def find_critical_points(grid: PhaseGrid, prominence: float = 1e-4) -> list[CriticalPoint]:
    """Locate and classify stationary points of a sampled surface.

    A cell ``[i, i+1] x [j, j+1]`` is a candidate when both gradient
    components take both signs over its corners. The stationary point is
    placed by a linear solve of the cell-averaged gradient and Hessian and
    classified by the Hessian eigenvalue signs. Candidates with
    ``|value| < prominence * max|values|`` are dropped, and candidates
    within one cell of each other are merged.
    """
    f = np.asarray(grid.values, dtype=float)
    x, y = grid.x, grid.y
    hx, hy = x[1] - x[0], y[1] - y[0]
    gy, gx = np.gradient(f, hy, hx)
    fyy, fyx = np.gradient(gy, hy, hx)
    fxy, fxx = np.gradient(gx, hy, hx)
    floor = prominence * np.abs(f).max()

    def both_signs(g):
        c = np.stack([g[:-1, :-1], g[1:, :-1], g[:-1, 1:], g[1:, 1:]])
        return (c.max(axis=0) >= 0) & (c.min(axis=0) <= 0)

    cand = both_signs(gx) & both_signs(gy)
    found: list[tuple[float, CriticalPoint, tuple[int, int]]] = []
    for j, i in zip(*np.nonzero(cand)):
        sl = (slice(j, j + 2), slice(i, i + 2))
        H = np.array([[fxx[sl].mean(), 0.5 * (fxy[sl].mean() + fyx[sl].mean())],
                      [0.5 * (fxy[sl].mean() + fyx[sl].mean()), fyy[sl].mean()]])
        g = np.array([gx[sl].mean(), gy[sl].mean()])
        xc, yc = x[i] + hx / 2, y[j] + hy / 2
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            continue
        if abs(step[0]) > hx or abs(step[1]) > hy:
            continue
        px, py = xc + step[0], yc + step[1]
        val = float(f[sl].mean() + 0.5 * g @ step)
        if abs(val) < floor:
            continue
        ev = np.linalg.eigvalsh(H)
        if np.all(ev < 0):
            kind = "maximum"
        elif np.all(ev > 0):
            kind = "minimum"
        elif ev[0] < 0 < ev[1]:
            kind = "saddle"
        else:
            continue
        found.append((float(np.hypot(*g)), CriticalPoint(complex(px, py), kind, val), (j, i)))

    found.sort(key=lambda t: t[0])
    kept: list[tuple[CriticalPoint, tuple[int, int]]] = []
    for _, cp, (j, i) in found:
        if any(abs(j - jj) <= 1 and abs(i - ii) <= 1 and cp.kind == k.kind for k, (jj, ii) in kept):
            continue
        kept.append((cp, (j, i)))
    return [cp for cp, _ in kept]


def count_kinds(points: list[CriticalPoint]) -> dict[str, int]:
    out = {"maximum": 0, "minimum": 0, "saddle": 0}
    for cp in points:
        out[cp.kind] += 1
    return out
