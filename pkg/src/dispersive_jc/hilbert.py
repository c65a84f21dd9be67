"""Operators on the truncated qubit (x) cavity space and the model Hamiltonians.

Basis ordering of the joint space is qubit-major: index ``q * n_max + n`` for
qubit level ``q`` (0 = excited, 1 = ground) and Fock level ``n``. With the
excited state first, ``sigma_z = diag(+1, -1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp

SpaceTag = Literal["cavity", "qubit", "joint"]

#: Operators larger than this are kept in CSR form.
DENSE_LIMIT = 64


class InvalidSpaceError(ValueError):
    pass


class DimensionError(ValueError):
    pass


class DispersiveLimitError(ValueError):
    pass


@dataclass(frozen=True)
class SystemParams:
    """Rates and detunings of the driven JC system in the drive frame.

    All quantities share one inverse-time unit (hbar = 1). ``delta_c`` and
    ``delta_q`` are drive-minus-mode detunings; ``kappa`` is the field decay
    rate, so photons leave at ``2 * kappa``.
    """

    delta_c: float
    delta_q: float
    g: float
    eps_d: complex
    kappa: float
    gamma: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.g < 0:
            raise ValueError(f"g must be nonnegative, got {self.g}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")

    @classmethod
    def from_dispersive(cls, delta_c, delta, g, eps_d, kappa, gamma=0.0):
        """Build params with the qubit ``delta`` below the cavity.

        ``delta_q = delta_c + delta``, which places the dressed-cavity
        Lorentzian at ``delta_c = g**2 / delta`` for a ground-state qubit.
        """
        return cls(delta_c=delta_c, delta_q=delta_c + delta, g=g,
                   eps_d=eps_d, kappa=kappa, gamma=gamma)

    @property
    def delta(self) -> float:
        return abs(self.delta_q - self.delta_c)

    def _need_delta(self):
        if self.delta == 0:
            raise DispersiveLimitError("qubit-cavity detuning is zero")
        return self.delta

    @property
    def dispersive_shift(self) -> float:
        """``g**2 / delta``."""
        return self.g ** 2 / self._need_delta()

    @property
    def n_scale(self) -> float:
        return (self._need_delta() / (2 * self.g)) ** 2

    @property
    def cooperativity(self) -> float:
        if self.gamma == 0:
            return np.inf
        return self.g ** 2 / (self.kappa * self.gamma)

    @property
    def purcell_rate(self) -> float:
        return self.kappa * self.g ** 2 / self._need_delta() ** 2

    def replace(self, **changes) -> "SystemParams":
        kw = dict(delta_c=self.delta_c, delta_q=self.delta_q, g=self.g,
                  eps_d=self.eps_d, kappa=self.kappa, gamma=self.gamma)
        kw.update(changes)
        return SystemParams(**kw)


@dataclass(frozen=True)
class TruncatedSpace:
    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise InvalidSpaceError(f"n_max must be an integer >= 2, got {self.n_max}")

    @property
    def dim(self) -> int:
        return 2 * self.n_max

    def dims(self, tag: SpaceTag) -> int:
        return {"cavity": self.n_max, "qubit": 2, "joint": self.dim}[tag]

    def index(self, qubit: int, n: int) -> int:
        """Joint index of ``|qubit, n>`` (qubit 0 = excited, 1 = ground)."""
        return qubit * self.n_max + n


@dataclass(frozen=True, eq=False)
class Operator:
    """Square matrix tagged with the factor space it acts on."""

    data: np.ndarray | sp.csr_matrix
    space_tag: SpaceTag
    _dense: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        shape = self.data.shape
        if len(shape) != 2 or shape[0] != shape[1]:
            raise DimensionError(f"operator must be square, got shape {shape}")
        if self.space_tag == "qubit" and shape[0] != 2:
            raise DimensionError("qubit operators are 2x2")
        data = self.data
        if sp.issparse(data):
            data = sp.csr_matrix(data, dtype=complex)
            if shape[0] <= DENSE_LIMIT:
                data = data.toarray()
        else:
            data = np.asarray(data, dtype=complex)
            if shape[0] > DENSE_LIMIT:
                data = sp.csr_matrix(data)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.data)

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.data.toarray()
        return self.data

    def csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.data)

    def dag(self) -> "Operator":
        return Operator(self.data.conj().T, self.space_tag)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            _check_same(self, other)
            return Operator(self.data @ other.data, self.space_tag)
        return self.data @ other

    def __add__(self, other: "Operator") -> "Operator":
        _check_same(self, other)
        return Operator(self.data + other.data, self.space_tag)

    def __sub__(self, other: "Operator") -> "Operator":
        _check_same(self, other)
        return Operator(self.data - other.data, self.space_tag)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.data * scalar, self.space_tag)

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(-self.data, self.space_tag)

    def trace(self) -> complex:
        return complex(self.data.diagonal().sum())

    def hermiticity_error(self) -> float:
        d = self.dense()
        return float(np.max(np.abs(d - d.conj().T), initial=0.0))


def _check_same(a: Operator, b: Operator):
    if a.space_tag != b.space_tag or a.dim != b.dim:
        raise DimensionError(
            f"operator mismatch: {a.space_tag}[{a.dim}] vs {b.space_tag}[{b.dim}]")


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


def identity(space: TruncatedSpace, tag: SpaceTag) -> Operator:
    return Operator(sp.identity(space.dims(tag), dtype=complex, format="csr"), tag)


def fock_ops(space: TruncatedSpace) -> tuple[Operator, Operator, Operator]:
    """Annihilation, creation and number operators on the cavity factor."""
    if not isinstance(space, TruncatedSpace):
        space = TruncatedSpace(space)
    n = space.n_max
    a = sp.diags(np.sqrt(np.arange(1, n, dtype=float)), 1, shape=(n, n), format="csr")
    a = Operator(a, "cavity")
    adag = a.dag()
    # a^dag a written out so the diagonal is exactly 0..n_max-1
    num = Operator(sp.diags(np.arange(n, dtype=float), 0, format="csr"), "cavity")
    return a, adag, num


def qubit_ops() -> tuple[Operator, Operator, Operator]:
    """``(sigma_minus, sigma_plus, sigma_z)`` with the excited state first."""
    sm = Operator(np.array([[0, 0], [1, 0]]), "qubit")
    sz = Operator(np.diag([1.0, -1.0]), "qubit")
    return sm, sm.dag(), sz


def embed(op: Operator, space: TruncatedSpace, which: Literal["cavity", "qubit"]) -> Operator:
    """Lift a factor operator to the joint space."""
    if op.space_tag != which or op.dim != space.dims(which):
        raise DimensionError(f"cannot embed {op.space_tag}[{op.dim}] as {which}")
    if which == "cavity":
        out = sp.kron(sp.identity(2), op.csr(), format="csr")
    else:
        out = sp.kron(op.csr(), sp.identity(space.n_max), format="csr")
    return Operator(out, "joint")


@dataclass(frozen=True)
class JointOps:
    """Frequently used joint-space operators, built once per space."""

    a: Operator
    adag: Operator
    n: Operator
    sm: Operator
    sp: Operator
    sz: Operator
    sx: Operator
    sy: Operator

    @classmethod
    def build(cls, space: TruncatedSpace) -> "JointOps":
        a, adag, n = fock_ops(space)
        sm, spl, sz = qubit_ops()
        sx = sm + spl
        sy = (spl - sm) * (-1j)
        return cls(
            a=embed(a, space, "cavity"),
            adag=embed(adag, space, "cavity"),
            n=embed(n, space, "cavity"),
            sm=embed(sm, space, "qubit"),
            sp=embed(spl, space, "qubit"),
            sz=embed(sz, space, "qubit"),
            sx=embed(sx, space, "qubit"),
            sy=embed(sy, space, "qubit"),
        )


def build_jc_hamiltonian(p: SystemParams, space: TruncatedSpace) -> Operator:
    """Driven JC Hamiltonian in the drive frame (RWA, hbar = 1).

    ``H = -dc a^dag a - (dq/2) sigma_z + g (a^dag sigma_- + a sigma_+)
    + eps a^dag + eps^* a``.

    This is the form with imaginary coupling and drive,
    ``i g (a^dag sigma_- - a sigma_+) + i (eps a^dag - eps^* a)``, after the
    cavity phase rotation ``a -> i a``. The rotated frame is the one in which
    the mean-field amplitudes of :mod:`dispersive_jc.meanfield` are written,
    so ``<a>`` from a density matrix compares directly with ``alpha``; in
    particular the empty driven cavity relaxes to ``-i eps / (kappa - i dc)``.
    """
    o = JointOps.build(space)
    eps = complex(p.eps_d)
    h = (-p.delta_c) * o.n - 0.5 * p.delta_q * o.sz
    h = h + p.g * (o.adag @ o.sm + o.a @ o.sp)
    h = h + eps * o.adag + eps.conjugate() * o.a
    return h


def duffing_coefficients(p: SystemParams, sigma_z_value: float = -1.0) -> tuple[float, float]:
    """Linear and quartic coefficients of the dressed-cavity Duffing model.

    Returns ``(linear, chi)`` such that
    ``H = linear * a^dag a + chi * a^dag^2 a^2 + eps a^dag + eps^* a``
    (drive written in the same rotated frame as :func:`build_jc_hamiltonian`).
    """
    if sigma_z_value not in (-1, 1, -1.0, 1.0):
        raise ValueError("sigma_z_value must be +1 or -1")
    delta = p._need_delta()
    s = float(sigma_z_value)
    lam = p.g ** 2 / delta
    g4 = p.g ** 4 / delta ** 3
    linear = -p.delta_c + g4 - lam * s + 2 * g4 * s
    return linear, g4 * s


def build_duffing_hamiltonian(p: SystemParams, space: TruncatedSpace,
                              sigma_z_value: float = -1.0) -> Operator:
    """Effective Kerr Hamiltonian on the cavity factor alone."""
    linear, chi = duffing_coefficients(p, sigma_z_value)
    a, adag, n = fock_ops(space)
    eps = complex(p.eps_d)
    h = linear * n + chi * (adag @ adag @ a @ a)
    return h + eps * adag + eps.conjugate() * a


def excitation_number(space: TruncatedSpace) -> Operator:
    """``N = a^dag a + sigma_+ sigma_-``."""
    o = JointOps.build(space)
    return o.n + o.sp @ o.sm


def dispersive_validity(p: SystemParams, mean_excitations: float) -> float:
    """``4 <N> g^2 / delta^2``; the Duffing reduction needs this << 1."""
    return 4 * mean_excitations * p.g ** 2 / p._need_delta() ** 2
