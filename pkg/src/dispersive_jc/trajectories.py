"""Diffusive quantum trajectories, episode detection and spectra.

Each collapse channel ``(C, r)`` of the master equation becomes a measurement
operator ``L = sqrt(2 r) C`` with one real Wiener increment. The normalized
homodyne SSE (Ito form) is

    d psi = [-iH + sum_j (x_j L_j / 2 - L_j^dag L_j / 2 - x_j^2 / 8)] psi dt
            + sum_j (L_j - x_j / 2) psi dW_j,      x_j = <L_j + L_j^dag>,

and is stepped with the explicit weak order-2.0 scheme of Kloeden and Platen
for non-commutative noise, followed by renormalization of the state.

For strongly detuned qubits the bare Hamiltonian oscillates thousands of
times faster than anything that is dissipative. ``run_trajectory`` can then
split off a part ``H0`` of the Hamiltonian and propagate it exactly with a
symmetric (Strang) splitting around the stochastic step, so the step size is
set by the drive and the damping instead of by ``H0``.
"""
from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Literal, Sequence

import numba
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .config import ConfigError
from .hilbert import JointOps, Operator, SystemParams, TruncatedSpace, build_jc_hamiltonian
from .lindblad import ground_state, jc_channels

log = logging.getLogger(__name__)

#: Environment variable holding the worker count for parallel sections.
WORKERS_ENV = "DJC_WORKERS"

OBS_COLUMNS = ("t", "re_a", "im_a", "n", "re_sm", "im_sm", "sx", "sy", "sz", "entropy")


class StateError(ValueError):
    pass


class StepFailure(RuntimeError):
    def __init__(self, t: float, msg: str = "non-finite state"):
        super().__init__(f"{msg} at t = {t:.6g}")
        self.t = t


def worker_count(default: int = 1) -> int:
    """Worker count from ``DJC_WORKERS`` (at least 1)."""
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return default
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    return max(1, n)


# --- SSE coefficients --------------------------------------------------------

def measurement_operators(channels: Sequence[tuple[Operator, float]]) -> list[np.ndarray | sp.spmatrix]:
    """``L_j = sqrt(2 r_j) C_j`` for every channel with a nonzero rate."""
    return [math.sqrt(2 * r) * C.data for C, r in channels if r > 0]


def sse_terms(psi: np.ndarray, H: Operator, channels: Sequence[tuple[Operator, float]],
              tol: float = 1e-6) -> tuple[np.ndarray, list[np.ndarray]]:
    """Drift ``D1 psi`` and diffusion vectors ``D2_j psi`` of the homodyne SSE.

    Parameters
    ----------
    psi : ndarray
        Normalized state vector.
    H : Operator
        System Hamiltonian.
    channels : sequence of (Operator, rate)
        Master-equation channels; zero-rate channels are skipped.

    Returns
    -------
    drift : ndarray
    diffusions : list of ndarray
        One vector per active channel.
    """
    psi = np.asarray(psi, dtype=complex)
    nrm = np.vdot(psi, psi).real
    if abs(nrm - 1) > tol:
        raise StateError(f"state norm {nrm:.3e} differs from 1 by more than {tol}")
    drift = -1j * (H.data @ psi)
    diffs = []
    for L in measurement_operators(channels):
        Lpsi = L @ psi
        x = 2 * np.vdot(psi, Lpsi).real
        LdL = L.conj().T @ Lpsi
        drift = drift + 0.5 * x * Lpsi - 0.5 * LdL - x * x / 8 * psi
        diffs.append(Lpsi - 0.5 * x * psi)
    return drift, diffs


# --- numba kernels -----------------------------------------------------------

@numba.njit(cache=True)
def _matvec(indptr, indices, data, x, out):
    for i in range(indptr.shape[0] - 1):
        s = 0j
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k] * x[indices[k]]
        out[i] = s


@numba.njit(cache=True)
def _coefficients(psi, K, Ls, m, a_out, b_out, lbuf):
    """Drift into ``a_out`` and diffusions into rows of ``b_out``.

    ``K = -iH - sum L^dag L / 2`` and ``Ls`` stacks the ``L_j`` row-wise.
    Expectations are taken with respect to the normalized ray of ``psi``.
    """
    dim = psi.shape[0]
    _matvec(K[0], K[1], K[2], psi, a_out)
    if m == 0:
        return
    _matvec(Ls[0], Ls[1], Ls[2], psi, lbuf)
    nrm = 0.0
    for i in range(dim):
        nrm += psi[i].real ** 2 + psi[i].imag ** 2
    for j in range(m):
        ev = 0j
        for i in range(dim):
            ev += psi[i].conjugate() * lbuf[j * dim + i]
        x = 2.0 * ev.real / nrm
        c = -x * x / 8.0
        for i in range(dim):
            lp = lbuf[j * dim + i]
            a_out[i] += 0.5 * x * lp + c * psi[i]
            b_out[j, i] = lp - 0.5 * x * psi[i]


@numba.njit(cache=True)
def _platen_step(y, dt, dw, v, K, Ls, m, ws):
    """One explicit weak order-2.0 step (in place on ``y``), unnormalized.

    ``dw[j]`` are Wiener increments, ``v[r, j]`` the antisymmetric two-point
    variables (``v[j, j] = -dt``). ``ws`` is a scratch tuple of arrays.
    """
    dim = y.shape[0]
    a, b, a2, b2, b3, tmp, lbuf, acc = ws
    sq = math.sqrt(dt)
    _coefficients(y, K, Ls, m, a, b, lbuf)
    for i in range(dim):
        tmp[i] = y[i] + a[i] * dt
        for j in range(m):
            tmp[i] += b[j, i] * dw[j]
    _coefficients(tmp, K, Ls, m, a2, b2, lbuf)
    for i in range(dim):
        acc[i] = 0.5 * (a2[i] + a[i]) * dt
    for j in range(m):
        # R_+^j and R_-^j
        for i in range(dim):
            tmp[i] = y[i] + a[i] * dt + b[j, i] * sq
        _coefficients(tmp, K, Ls, m, a2, b2, lbuf)
        for i in range(dim):
            tmp[i] = y[i] + a[i] * dt - b[j, i] * sq
        _coefficients(tmp, K, Ls, m, a2, b3, lbuf)
        c1 = 0.25 * dw[j]
        c2 = 0.25 * (dw[j] * dw[j] - dt) / sq
        for i in range(dim):
            acc[i] += (b2[j, i] + b3[j, i] + 2.0 * b[j, i]) * c1
            acc[i] += (b2[j, i] - b3[j, i]) * c2
    for r in range(m):
        if m == 1:
            break
        # U_+^r and U_-^r feed every other channel j != r
        for i in range(dim):
            tmp[i] = y[i] + b[r, i] * sq
        _coefficients(tmp, K, Ls, m, a2, b2, lbuf)
        for i in range(dim):
            tmp[i] = y[i] - b[r, i] * sq
        _coefficients(tmp, K, Ls, m, a2, b3, lbuf)
        for j in range(m):
            if j == r:
                continue
            c1 = 0.25 * dw[j]
            c2 = 0.25 * (dw[j] * dw[r] + v[r, j]) / sq
            for i in range(dim):
                acc[i] += (b2[j, i] + b3[j, i] - 2.0 * b[j, i]) * c1
                acc[i] += (b2[j, i] - b3[j, i]) * c2
    for i in range(dim):
        y[i] += acc[i]


@numba.njit(cache=True)
def _normalize(y):
    s = 0.0
    for i in range(y.shape[0]):
        s += y[i].real ** 2 + y[i].imag ** 2
    if not (s > 0.0 and s < 1e300):
        return False
    s = 1.0 / math.sqrt(s)
    for i in range(y.shape[0]):
        y[i] *= s
    return True


@numba.njit(cache=True)
def _jc_observables(y, n_max, out):
    """Write ``re_a, im_a, n, re_sm, im_sm, sx, sy, sz, entropy`` into ``out``."""
    a = 0j
    n = 0.0
    r00 = 0.0
    r11 = 0.0
    r01 = 0j
    for q in range(2):
        base = q * n_max
        for k in range(n_max):
            c = y[base + k]
            p = c.real ** 2 + c.imag ** 2
            n += k * p
            if k + 1 < n_max:
                a += c.conjugate() * math.sqrt(k + 1.0) * y[base + k + 1]
    for k in range(n_max):
        e = y[k]
        g = y[n_max + k]
        r00 += e.real ** 2 + e.imag ** 2
        r11 += g.real ** 2 + g.imag ** 2
        r01 += e * g.conjugate()
    sx = 2.0 * r01.real
    sy = -2.0 * r01.imag
    sz = r00 - r11
    rr = min(1.0, math.sqrt(sx * sx + sy * sy + sz * sz))
    s = 0.0
    for lam in (0.5 * (1.0 + rr), 0.5 * (1.0 - rr)):
        if lam > 1e-14:
            s -= lam * math.log(lam)
    out[0] = a.real
    out[1] = a.imag
    out[2] = n
    out[3] = r01.real
    out[4] = r01.imag
    out[5] = sx
    out[6] = sy
    out[7] = sz
    out[8] = s


@numba.njit(cache=True)
def _run_chunk(y, dt, dws, vs, K, Ls, m, U, use_split, ws, stride, step0,
               n_max, obs, sample0, states, keep_states):
    """Advance ``len(dws)`` steps; returns ``(next_sample, failed_step)``."""
    sample = sample0
    tmp2 = ws[5]
    for s in range(dws.shape[0]):
        if use_split:
            _matvec(U[0], U[1], U[2], y, tmp2)
            y[:] = tmp2
        _platen_step(y, dt, dws[s], vs[s], K, Ls, m, ws)
        if use_split:
            _matvec(U[0], U[1], U[2], y, tmp2)
            y[:] = tmp2
        if not _normalize(y):
            return sample, step0 + s
        if (step0 + s + 1) % stride == 0 and sample < obs.shape[0]:
            _jc_observables(y, n_max, obs[sample])
            if keep_states:
                states[sample] = y
            sample += 1
    return sample, -1


# --- noise -------------------------------------------------------------------

def _n_pairs(m: int) -> int:
    return m * (m - 1) // 2


def step_noise(seed: int, traj_id: int, step0: int, n_steps: int, m: int, dt: float):
    """Wiener increments and two-point variables for steps ``step0 ...``.

    The stream is counter based: a Philox generator keyed by
    ``(seed, traj_id)`` whose counter is set from the global step index, so a
    given step always receives the same numbers regardless of how a run is
    chunked. Normals come from Box-Muller on fixed words of the block.

    Returns
    -------
    dw : ndarray, shape (n_steps, m)
    v : ndarray, shape (n_steps, m, m)
    """
    words = 2 * ((m + 1) // 2) + _n_pairs(m)
    blocks = max(1, -(-words // 4))
    key = (int(seed) & (2 ** 64 - 1)) | ((int(traj_id) & (2 ** 64 - 1)) << 64)
    bg = np.random.Philox(key=key, counter=int(step0) * blocks)
    raw = bg.random_raw(n_steps * blocks * 4).reshape(n_steps, blocks * 4)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53
    dw = np.empty((n_steps, m))
    sq = math.sqrt(dt)
    for k in range(0, m, 2):
        r = np.sqrt(-2.0 * np.log(u[:, k]))
        th = 2 * np.pi * u[:, k + 1]
        dw[:, k] = r * np.cos(th) * sq
        if k + 1 < m:
            dw[:, k + 1] = r * np.sin(th) * sq
    v = np.zeros((n_steps, m, m))
    col = 2 * ((m + 1) // 2)
    for j1 in range(m):
        v[:, j1, j1] = -dt
        for j2 in range(j1 + 1, m):
            sgn = np.where(u[:, col] < 0.5, -dt, dt)
            v[:, j1, j2] = sgn
            v[:, j2, j1] = -sgn
            col += 1
    return dw, v


# --- packed operators ---------------------------------------------------------

def _pack(mat) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    c = sp.csr_matrix(mat, dtype=complex)
    c.sum_duplicates()
    return (c.indptr.astype(np.int64), c.indices.astype(np.int64),
            c.data.astype(np.complex128))


@dataclass(frozen=True, eq=False)
class SSESystem:
    """Packed sparse operators for the compiled stepper."""

    dim: int
    K: tuple
    Ls: tuple
    m: int
    U: tuple
    split: bool
    dt: float

    @classmethod
    def build(cls, H: Operator, channels, dt: float, H0: Operator | None = None) -> "SSESystem":
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        Lops = [sp.csr_matrix(L) for L in measurement_operators(channels)]
        d = H.dim
        h = H.csr()
        split = H0 is not None
        if split:
            h = h - H0.csr()
            half = sla.expm(-0.5j * dt * H0.dense())
            half[np.abs(half) < 1e-15] = 0.0
            U = _pack(half)
        else:
            U = _pack(sp.identity(d))
        K = -1j * h
        for L in Lops:
            K = K - 0.5 * (L.conj().T @ L)
        Ls = sp.vstack(Lops, format="csr") if Lops else sp.csr_matrix((1, d), dtype=complex)
        return cls(d, _pack(K), _pack(Ls), len(Lops), U, split, float(dt))

    def workspace(self):
        d, m = self.dim, max(self.m, 1)
        z = np.zeros
        return (z(d, complex), z((m, d), complex), z(d, complex), z((m, d), complex),
                z((m, d), complex), z(d, complex), z(m * d, complex), z(d, complex))


def platen_weak2_step(psi: np.ndarray, dt: float, noises, H: Operator,
                      channels: Sequence[tuple[Operator, float]] = (),
                      cross_signs=None, t: float = 0.0) -> np.ndarray:
    """One renormalized weak order-2.0 step of the homodyne SSE.

    Parameters
    ----------
    psi : ndarray
        Current state (normalized).
    dt : float
        Step size.
    noises : array_like
        One standard normal per active channel; scaled by ``sqrt(dt)`` here.
    cross_signs : array_like, optional
        ``+1/-1`` for every channel pair ``j1 < j2`` (row-major), used for the
        two-point variables of the multi-noise scheme. Defaults to ``+1``.
    t : float
        Time stamp reported on failure.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    sys_ = SSESystem.build(H, channels, dt)
    m = sys_.m
    xi = np.atleast_1d(np.asarray(noises, dtype=float))
    if xi.size != m:
        raise ValueError(f"expected {m} noise values, got {xi.size}")
    dw = xi * math.sqrt(dt)
    v = -dt * np.eye(max(m, 1))
    signs = np.ones(_n_pairs(m)) if cross_signs is None else np.asarray(cross_signs, float)
    k = 0
    for j1 in range(m):
        for j2 in range(j1 + 1, m):
            v[j1, j2] = signs[k] * dt
            v[j2, j1] = -signs[k] * dt
            k += 1
    y = np.array(psi, dtype=complex)
    _platen_step(y, dt, np.resize(dw, max(m, 1)), v, sys_.K, sys_.Ls, m, sys_.workspace())
    if not _normalize(y):
        raise StepFailure(t + dt)
    return y


# --- trajectories ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    params: SystemParams
    space: TruncatedSpace
    seed: int
    dt: float
    sample_stride: int
    times: np.ndarray
    obs: dict
    traj_id: int = 0
    split: bool = False
    states: np.ndarray | None = field(default=None, repr=False)
    final_state: np.ndarray | None = field(default=None, repr=False)
    step0: int = 0

    def __len__(self):
        return len(self.times)

    @property
    def a(self) -> np.ndarray:
        return self.obs["re_a"] + 1j * self.obs["im_a"]

    @property
    def sm(self) -> np.ndarray:
        return self.obs["re_sm"] + 1j * self.obs["im_sm"]

    def table(self) -> np.ndarray:
        cols = [self.times] + [self.obs[c] for c in OBS_COLUMNS[1:]]
        return np.column_stack(cols)

    def bloch_excess(self) -> float:
        r2 = self.obs["sx"] ** 2 + self.obs["sy"] ** 2 + self.obs["sz"] ** 2
        return float(np.max(r2) - 1) if len(r2) else -1.0

    def sidecar(self) -> dict:
        return {"params": {k: (v if not isinstance(v, complex) else [v.real, v.imag])
                           for k, v in asdict(self.params).items()},
                "n_max": self.space.n_max, "seed": self.seed, "traj_id": self.traj_id,
                "dt": self.dt, "sample_stride": self.sample_stride, "split": self.split,
                "samples": len(self.times)}

    def write(self, csv_path, json_path=None):
        """CSV of observables plus a JSON sidecar (``.json`` next to the CSV)."""
        from .io import write_csv
        write_csv(csv_path, OBS_COLUMNS, self.table())
        json_path = json_path or os.path.splitext(str(csv_path))[0] + ".json"
        with open(json_path, "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
        return str(csv_path), str(json_path)


def jc_free_hamiltonian(p: SystemParams, space: TruncatedSpace) -> Operator:
    """The undriven JC Hamiltonian, used as the exactly propagated part."""
    return build_jc_hamiltonian(p.replace(eps_d=0.0), space)


def _check_run_args(t_final, dt, sample_stride, propagator):
    if not t_final > 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if int(sample_stride) < 1:
        raise ValueError("sample_stride must be >= 1")
    if propagator not in ("full", "split"):
        raise ValueError(f"unknown propagator {propagator!r}")
    n_steps = int(round(t_final / dt))
    if n_steps < 1:
        raise ValueError("t_final shorter than one step")
    return n_steps


def prepare_system(p: SystemParams, space: TruncatedSpace, dt: float,
                   propagator: Literal["full", "split"] = "full") -> SSESystem:
    H = build_jc_hamiltonian(p, space)
    H0 = jc_free_hamiltonian(p, space) if propagator == "split" else None
    return SSESystem.build(H, jc_channels(p, space), dt, H0)


def _integrate(sys_: SSESystem, p, space, n_steps, stride, seed, traj_id, psi0,
               keep_states, chunk, step0=0) -> TrajectoryRecord:
    dt = sys_.dt
    y = ground_state(space) if psi0 is None else np.array(psi0, dtype=complex)
    if abs(np.vdot(y, y).real - 1) > 1e-6:
        raise StateError("initial state is not normalized")
    n_samples = n_steps // stride + 1
    obs = np.zeros((n_samples, 9))
    _jc_observables(y, space.n_max, obs[0])
    states = np.zeros((n_samples if keep_states else 1, space.dim), complex)
    if keep_states:
        states[0] = y
    ws = sys_.workspace()
    m = sys_.m
    sample = 1
    for s0 in range(0, n_steps, chunk):
        ns = min(chunk, n_steps - s0)
        if m:
            dw, v = step_noise(seed, traj_id, step0 + s0, ns, m, dt)
        else:
            dw, v = np.zeros((ns, 1)), np.zeros((ns, 1, 1))
        # sampling is relative to the segment start
        sample, bad = _run_chunk(y, dt, dw, v, sys_.K, sys_.Ls, m, sys_.U, sys_.split, ws,
                                 stride, s0, space.n_max, obs, sample, states, keep_states)
        if bad >= 0:
            raise StepFailure((step0 + bad + 1) * dt)
    times = (step0 + np.arange(n_samples) * stride) * dt
    cols = {c: obs[:, i].copy() for i, c in enumerate(OBS_COLUMNS[1:])}
    return TrajectoryRecord(p, space, int(seed), float(dt), stride, times, cols, int(traj_id),
                            sys_.split, states if keep_states else None, y.copy(), int(step0))


def run_trajectory(p: SystemParams, space: TruncatedSpace, t_final: float, dt: float,
                   sample_stride: int = 1, seed: int = 0, traj_id: int = 0,
                   psi0: np.ndarray | None = None,
                   propagator: Literal["full", "split"] = "full",
                   keep_states: bool = False, chunk: int = 1 << 15,
                   step0: int = 0) -> TrajectoryRecord:
    """Integrate one trajectory of the driven JC system.

    Starts from ``|g, 0>`` unless ``psi0`` is given. Observables are recorded
    every ``sample_stride`` steps (the initial state is sample 0).

    A run can be resumed: passing ``psi0=rec.final_state`` and
    ``step0=rec.step0 + n_steps`` continues the same noise path, and the
    concatenation is bitwise identical to one long run with the same ``dt``.

    ``propagator="split"`` propagates the undriven JC Hamiltonian exactly in
    two half steps around each stochastic step; use it when the qubit
    detuning is much larger than ``1 / dt`` would comfortably resolve.
    """
    n_steps = _check_run_args(t_final, dt, sample_stride, propagator)
    sys_ = prepare_system(p, space, dt, propagator)
    return _integrate(sys_, p, space, n_steps, int(sample_stride), seed, traj_id, psi0,
                      keep_states, chunk, int(step0))


def _ensemble_job(args):
    p, space, t_final, dt, stride, seed, ids, propagator, keep = args
    n_steps = _check_run_args(t_final, dt, stride, propagator)
    sys_ = prepare_system(p, space, dt, propagator)
    return [_integrate(sys_, p, space, n_steps, int(stride), seed, k, None, keep, 1 << 15)
            for k in ids]


def run_ensemble(p: SystemParams, space: TruncatedSpace, n_traj: int, t_final: float,
                 dt: float, sample_stride: int = 1, seed: int = 0,
                 propagator: Literal["full", "split"] = "full", keep_states: bool = False,
                 workers: int | None = None) -> list[TrajectoryRecord]:
    """Independent trajectories ``traj_id = 0 .. n_traj-1`` sharing ``seed``.

    Results do not depend on the worker count, which defaults to
    ``DJC_WORKERS``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    workers = worker_count() if workers is None else max(1, int(workers))
    workers = min(workers, n_traj)
    ids = [list(range(k, n_traj, workers)) for k in range(workers)]
    jobs = [(p, space, t_final, dt, sample_stride, seed, part, propagator, keep_states)
            for part in ids]
    if workers == 1:
        parts = [_ensemble_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_ensemble_job, jobs))
    out = [None] * n_traj
    for part_ids, recs in zip(ids, parts):
        for k, r in zip(part_ids, recs):
            out[k] = r
    return out


def ensemble_density(records: Sequence[TrajectoryRecord], sample: int) -> np.ndarray:
    """Mean of ``|psi><psi|`` over records kept with ``keep_states``."""
    psis = np.array([r.states[sample] for r in records])
    return psis.T @ psis.conj() / len(psis)


# --- episodes -----------------------------------------------------------------

@dataclass(frozen=True)
class Thresholds:
    sz_dark: float = 0.0
    n_dark: float = 1.0
    sz_dim: float = -0.5
    n_mid: float = 1.0
    n_bright: float = 4.0
    min_duration: float | None = None  # default 2 / (2 kappa)

    def check(self):
        if not (self.n_dark <= self.n_mid < self.n_bright):
            raise ConfigError(
                f"thresholds must satisfy n_dark <= n_mid < n_bright, got "
                f"{self.n_dark}, {self.n_mid}, {self.n_bright}")
        return self

    @classmethod
    def from_meanfield(cls, p: SystemParams, **kw) -> "Thresholds":
        """``n_bright`` halfway between the dim and bright mean-field roots."""
        from .meanfield import dispersive_branches
        roots = dispersive_branches(p).roots[0]
        if len(roots) >= 3:
            kw.setdefault("n_bright", 0.5 * (roots[0].n + roots[-1].n))
            kw.setdefault("n_mid", max(kw.get("n_dark", 1.0), 0.5 * (roots[0].n + roots[1].n)))
        return cls(**kw)


@dataclass(frozen=True)
class Episode:
    label: str
    t_start: float
    t_end: float
    mean_n: float
    mean_sz: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


LABELS = ("bright", "dim", "dark")


def label_samples(n: np.ndarray, sz: np.ndarray, thr: Thresholds) -> np.ndarray:
    """Per-sample labels: 0 none, 1 bright, 2 dim, 3 dark."""
    lab = np.zeros(len(n), dtype=np.int8)
    lab[n > thr.n_bright] = 1
    lab[(sz < thr.sz_dim) & (n < thr.n_mid)] = 2
    lab[(sz > thr.sz_dark) & (n < thr.n_dark)] = 3
    return lab


def _runs(lab: np.ndarray):
    """``(value, start, stop)`` for maximal runs of equal labels."""
    if len(lab) == 0:
        return []
    cut = np.flatnonzero(np.diff(lab)) + 1
    starts = np.concatenate(([0], cut))
    stops = np.concatenate((cut, [len(lab)]))
    return [(int(lab[a]), int(a), int(b)) for a, b in zip(starts, stops)]


def classify_states(rec: TrajectoryRecord, thr: Thresholds | None = None) -> list[Episode]:
    """Merge labeled samples into bright/dim/dark episodes.

    An unlabeled gap of a single sample between two runs of the same label is
    closed, then runs shorter than the minimum duration are dropped. An
    episode covers ``[t_first, t_last + sample spacing)``.
    """
    thr = (thr or Thresholds()).check()
    if len(rec.times) == 0:
        raise ValueError("empty trajectory record")
    lab = label_samples(rec.obs["n"], rec.obs["sz"], thr)
    return episodes_from_labels(rec.times, lab, rec.obs["n"], rec.obs["sz"],
                                thr.min_duration if thr.min_duration is not None
                                else 1.0 / rec.params.kappa)


def episodes_from_labels(times, lab, n, sz, min_duration: float) -> list[Episode]:
    lab = np.array(lab, dtype=np.int8)
    runs = _runs(lab)
    for i in range(1, len(runs) - 1):
        v, a, b = runs[i]
        if v == 0 and b - a == 1 and runs[i - 1][0] == runs[i + 1][0] != 0:
            lab[a] = runs[i - 1][0]
    spacing = times[1] - times[0] if len(times) > 1 else 0.0
    out = []
    for v, a, b in _runs(lab):
        if v == 0:
            continue
        t0, t1 = float(times[a]), float(times[b - 1] + spacing)
        if t1 - t0 < min_duration or t1 <= t0:
            continue
        out.append(Episode(LABELS[v - 1], t0, t1, float(np.mean(n[a:b])), float(np.mean(sz[a:b]))))
    return out


@dataclass(frozen=True, eq=False)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    total: int
    mean: float = math.nan

    @property
    def empty(self) -> bool:
        return self.total == 0


def lifetime_histogram(episodes: Sequence[Episode], label: str, bin_width: float,
                       kappa: float = 1.0) -> Histogram:
    """Histogram of episode durations in units of ``1/kappa``.

    No matching episode gives an empty histogram (``total == 0``) rather than
    an error; callers decide whether that is fatal.
    """
    if label not in LABELS:
        raise ValueError(f"label must be one of {LABELS}")
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    d = np.array([e.duration * kappa for e in episodes if e.label == label])
    if d.size == 0:
        return Histogram(np.array([0.0, bin_width]), np.zeros(1, dtype=int), 0)
    top = math.floor(d.max() / bin_width) + 1
    edges = np.arange(top + 1) * bin_width
    idx = np.minimum(np.floor(d / bin_width).astype(int), top - 1)
    counts = np.bincount(idx, minlength=top)
    return Histogram(edges, counts, int(d.size), float(d.mean()))


# --- spectra -----------------------------------------------------------------

def spectrum(series: np.ndarray, dt_sample: float,
             convention: Literal["lab", "dft"] = "lab") -> tuple[np.ndarray, np.ndarray]:
    """Hann-windowed Fourier magnitude of a complex drive-frame series.

    With ``convention="lab"`` the frequency axis is the physical offset from
    the drive: an amplitude ``x(t) = exp(-i w0 t)`` (a field oscillating at
    ``w_drive + w0`` in the lab) peaks at ``+w0``. ``convention="dft"`` uses
    the bare DFT kernel ``exp(-i w t)``, where the same tone peaks at
    ``-w0``. Frequencies are in rad per unit time, sorted ascending.
    """
    x = np.asarray(series, dtype=complex)
    if x.size < 2:
        raise ValueError("spectrum needs at least two samples")
    w = np.hanning(x.size) if x.size > 2 else np.ones(x.size)
    X = np.fft.fftshift(np.fft.fft(x * w))
    f = np.fft.fftshift(np.fft.fftfreq(x.size, d=dt_sample)) * 2 * np.pi
    if convention == "lab":
        f = -f[::-1]
        X = X[::-1]
    elif convention != "dft":
        raise ValueError(f"unknown convention {convention!r}")
    return f, np.abs(X) / w.sum()


def demodulate(series: np.ndarray, times: np.ndarray, detuning: float) -> np.ndarray:
    """Remove the bare drive-frame rotation ``exp(i detuning t)``.

    In the drive frame a free mode with drive-minus-mode detuning ``d``
    evolves as ``exp(i d t)``; after demodulation the lab-convention
    spectrum is the offset from the bare mode frequency.
    """
    return np.asarray(series) * np.exp(-1j * detuning * np.asarray(times))


def peak_frequency(freqs: np.ndarray, mags: np.ndarray, exclude: float | None = None) -> float:
    """Frequency of the largest magnitude, optionally ignoring ``|f| < exclude``."""
    m = np.array(mags, dtype=float)
    if exclude is not None:
        m[np.abs(freqs) < exclude] = -np.inf
    return float(freqs[int(np.argmax(m))])


def discard_transient(rec: TrajectoryRecord, duration: float | None = None) -> np.ndarray:
    """Boolean mask dropping the first ``10 / (2 kappa)`` of a record by default."""
    cut = 10.0 / (2 * rec.params.kappa) if duration is None else duration
    return rec.times >= cut
