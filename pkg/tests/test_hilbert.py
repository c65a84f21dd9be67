import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dispersive_jc.hilbert import (
    DimensionError, DispersiveLimitError, InvalidSpaceError, JointOps, SystemParams,
    TruncatedSpace, build_duffing_hamiltonian, build_jc_hamiltonian, commutator,
    dispersive_validity, duffing_coefficients, embed, excitation_number, fock_ops,
    identity, qubit_ops,
)

from conftest import appendix_params, random_state


def test_fock_ops_two_levels():
    a, adag, n = fock_ops(TruncatedSpace(2))
    assert np.array_equal(a.dense(), [[0, 1], [0, 0]])
    assert np.array_equal(adag.dense(), a.dense().conj().T)


def test_number_operator_diagonal():
    _, _, n = fock_ops(TruncatedSpace(3))
    assert np.array_equal(np.diag(n.dense()), [0, 1, 2])
    a, adag, _ = fock_ops(TruncatedSpace(3))
    assert np.allclose((adag @ a).dense(), n.dense(), atol=1e-15)
    assert np.count_nonzero(n.dense() - np.diag(np.diag(n.dense()))) == 0


def test_truncated_commutator():
    a, adag, _ = fock_ops(TruncatedSpace(40))
    c = commutator(a, adag).dense()
    expect = np.eye(40)
    expect[-1, -1] = 1 - 40
    assert np.abs(c - expect).max() < 1e-13


def test_invalid_space():
    with pytest.raises(InvalidSpaceError):
        TruncatedSpace(1)
    with pytest.raises(InvalidSpaceError):
        fock_ops(1)


def test_qubit_algebra():
    sm, spl, sz = qubit_ops()
    assert np.allclose(np.linalg.eigvalsh((spl @ sm).dense()), [0, 1])
    assert np.allclose((sz @ sz).dense(), np.eye(2))
    assert np.allclose(commutator(spl, sm).dense(), sz.dense())
    ground = np.array([0, 1])
    assert np.allclose(sz.dense() @ ground, -ground)


def test_embed_identity_and_commuting_factors():
    space = TruncatedSpace(5)
    assert np.allclose(embed(identity(space, "qubit"), space, "qubit").dense(), np.eye(10))
    _, _, n = fock_ops(space)
    _, _, sz = qubit_ops()
    N, Z = embed(n, space, "cavity"), embed(sz, space, "qubit")
    assert np.allclose(commutator(N, Z).dense(), 0)


def test_embed_trace(rng):
    space = TruncatedSpace(7)
    from dispersive_jc.hilbert import Operator
    A = Operator(rng.standard_normal((7, 7)) + 1j * rng.standard_normal((7, 7)), "cavity")
    B = Operator(rng.standard_normal((2, 2)), "qubit")
    assert np.isclose(embed(A, space, "cavity").trace(), 2 * A.trace())
    assert np.isclose(embed(B, space, "qubit").trace(), 7 * B.trace())


def test_embed_tag_mismatch():
    space = TruncatedSpace(4)
    sm, _, _ = qubit_ops()
    with pytest.raises(DimensionError):
        embed(sm, space, "cavity")


def test_basis_ordering_is_qubit_major():
    space = TruncatedSpace(4)
    o = JointOps.build(space)
    e3 = np.zeros(8)
    e3[space.index(0, 3)] = 1
    assert space.index(0, 3) == 3 and space.index(1, 0) == 4
    assert np.isclose(e3 @ o.sz.dense() @ e3, 1)
    assert np.isclose(e3 @ o.n.dense() @ e3, 3)


def test_decoupled_spectrum():
    p = SystemParams(delta_c=-1.3, delta_q=2.2, g=0.0, eps_d=0.0, kappa=1.0)
    space = TruncatedSpace(5)
    H = build_jc_hamiltonian(p, space).dense()
    assert np.allclose(H, np.diag(np.diag(H)))
    n = np.arange(5)
    expect = np.concatenate([1.3 * n - 1.1, 1.3 * n + 1.1])
    assert np.allclose(np.diag(H).real, expect)


@settings(max_examples=30, deadline=None)
@given(dc=st.floats(-100, 100), delta=st.floats(1, 1000), g=st.floats(0, 50),
       er=st.floats(-10, 10), ei=st.floats(-10, 10), n=st.integers(2, 12))
def test_hamiltonians_hermitian(dc, delta, g, er, ei, n):
    p = SystemParams.from_dispersive(dc, delta, g, complex(er, ei), 1.0)
    space = TruncatedSpace(n)
    assert build_jc_hamiltonian(p, space).hermiticity_error() <= 1e-12
    if g > 0:
        assert build_duffing_hamiltonian(p, space, -1).hermiticity_error() <= 1e-12


def test_undriven_jc_conserves_excitations():
    space = TruncatedSpace(8)
    p = SystemParams.from_dispersive(3.0, 40.0, 5.0, 0.0, 1.0)
    H = build_jc_hamiltonian(p, space)
    c = commutator(H, excitation_number(space)).dense()
    # only the couplings that leave the truncated ladder survive
    edge = [space.index(0, space.n_max - 1), space.index(1, space.n_max - 1)]
    mask = np.ones_like(c, dtype=bool)
    mask[edge, :] = False
    mask[:, edge] = False
    assert np.abs(c[mask]).max() < 1e-12


def test_duffing_reduces_to_linear_cavity():
    p = SystemParams.from_dispersive(2.0, 50.0, 0.0, 0.7, 1.0)
    space = TruncatedSpace(6)
    a, adag, n = fock_ops(space)
    expected = -2.0 * n + 0.7 * adag + 0.7 * a
    assert np.allclose(build_duffing_hamiltonian(p, space).dense(), expected.dense())


def test_duffing_quartic_coefficient():
    p = appendix_params()
    for s in (-1, 1):
        _, chi = duffing_coefficients(p, s)
        assert chi == p.g ** 4 / p.delta ** 3 * s


def test_duffing_needs_detuning():
    p = SystemParams(delta_c=1.0, delta_q=1.0, g=1.0, eps_d=0.0, kappa=1.0)
    with pytest.raises(DispersiveLimitError):
        build_duffing_hamiltonian(p, TruncatedSpace(4))


def test_excitation_number_spectrum():
    space = TruncatedSpace(6)
    N = excitation_number(space).dense()
    assert np.allclose(N, np.diag(np.diag(N)))
    assert N[space.index(1, 0), space.index(1, 0)] == 0
    for n in range(6):
        assert N[space.index(0, n), space.index(0, n)] == n + 1


def test_dispersive_validity_matches_dense_expectation(rng):
    space = TruncatedSpace(6)
    p = SystemParams.from_dispersive(0.0, 30.0, 2.0, 0.0, 1.0)
    psi = random_state(rng, space.dim)
    N = excitation_number(space).dense()
    mean = float(np.real(psi.conj() @ N @ psi))
    manual = sum(abs(psi[space.index(q, n)]) ** 2 * (n + (q == 0)) for q in (0, 1) for n in range(6))
    assert np.isclose(mean, manual)
    assert np.isclose(dispersive_validity(p, mean), 4 * manual * 4 / 900)


def test_derived_quantities():
    p = SystemParams.from_dispersive(1.0, 100.0, 10.0, 0.0, 2.0, 0.5)
    assert np.isclose(p.delta, 100)
    assert np.isclose(p.dispersive_shift, 1.0)
    assert np.isclose(p.n_scale, 25.0)
    assert np.isclose(p.cooperativity, 100.0)
    assert np.isclose(p.purcell_rate, 0.02)


def test_param_validation():
    with pytest.raises(ValueError):
        SystemParams(0, 0, 1, 0, kappa=0.0)
    with pytest.raises(ValueError):
        SystemParams(0, 0, -1, 0, kappa=1.0)
    with pytest.raises(ValueError):
        SystemParams(0, 0, 1, 0, kappa=1.0, gamma=-1)


def test_sparse_storage_above_threshold():
    assert not build_jc_hamiltonian(appendix_params(), TruncatedSpace(10)).is_sparse
    assert build_jc_hamiltonian(appendix_params(), TruncatedSpace(40)).is_sparse
