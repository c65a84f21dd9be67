import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dispersive_jc.hilbert import DimensionError, SystemParams, TruncatedSpace, build_duffing_hamiltonian, fock_ops
from dispersive_jc.lindblad import DensityMatrix, build_liouvillian, steady_state
from dispersive_jc.phasespace import (
    CoverageWarning, DuffingParams, GridSpec, PhaseGrid, coherent_amplitudes, count_kinds,
    default_grid, duffing_mean_photon, duffing_photon_pdf, duffing_symmetric_moment,
    duffing_wigner_analytic, duffing_wigner_grid, find_critical_points, husimi_q, wigner,
)

from conftest import appendix_params, random_density


def fock_dm(n, k):
    r = np.zeros((n, n))
    r[k, k] = 1
    return DensityMatrix(r, "cavity")


def coherent_dm(n, beta):
    v = coherent_amplitudes(np.array(beta), n)
    return DensityMatrix(np.outer(v, v.conj()), "cavity")


@pytest.fixture(scope="module")
def duffing_ref():
    p = appendix_params()
    dp = DuffingParams.from_system(p)
    space = TruncatedSpace(40)
    a, _, _ = fock_ops(space)
    rho = steady_state(build_liouvillian(build_duffing_hamiltonian(p, space, -1), [(a, p.kappa)]))
    grid = GridSpec.square(4.0, 101)
    return p, dp, rho, grid


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(0, 1, 1, 0, 1, 5)
    with pytest.raises(ValueError):
        GridSpec(1, 0, 3, 0, 1, 5)
    g = GridSpec.square(2.0, 5, center=1 + 1j)
    assert g.alphas.shape == (5, 5) and g.alphas[0, -1] == 3 - 1j


def test_vacuum_q_and_wigner():
    grid = GridSpec.square(4, 61)
    rho = fock_dm(10, 0)
    a2 = np.abs(grid.alphas) ** 2
    assert np.allclose(husimi_q(rho, grid).values, np.exp(-a2) / np.pi, atol=1e-14)
    assert np.allclose(wigner(rho, grid).values, 2 / np.pi * np.exp(-2 * a2), atol=1e-12)


def test_fock_one_wigner_origin():
    grid = GridSpec.square(3, 61)
    w = wigner(fock_dm(6, 1), grid)
    assert np.isclose(w.values[30, 30], -2 / np.pi)


def test_coherent_q_peak():
    beta = 1.3 - 0.7j
    grid = GridSpec.square(4, 81)
    q = husimi_q(coherent_dm(30, beta), grid)
    j, i = np.unravel_index(np.argmax(q.values), q.values.shape)
    assert abs(grid.alphas[j, i] - beta) <= 0.1
    maxima = [c for c in find_critical_points(q) if c.kind == "maximum"]
    assert len(maxima) == 1 and abs(maxima[0].position - beta) < 0.1


def test_cavity_tag_required():
    with pytest.raises(DimensionError):
        husimi_q(DensityMatrix(np.eye(4) / 4, "joint"), GridSpec.square(1, 5))


def test_coverage_warning():
    with pytest.warns(CoverageWarning):
        husimi_q(coherent_dm(30, 3.0), GridSpec.square(1.0, 21))


@settings(max_examples=5, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_q_nonnegative_and_moments_shared(seed):
    rng = np.random.default_rng(seed)
    rho = DensityMatrix(random_density(rng, 5), "cavity")
    grid = GridSpec.square(6, 101)
    q, w = husimi_q(rho, grid), wigner(rho, grid)
    assert q.values.min() >= -1e-9
    assert abs(q.integral() - 1) < 1e-3 and abs(w.integral() - 1) < 1e-3
    assert abs(q.moment(lambda a: a) - w.moment(lambda a: a)) < 1e-3


def test_default_grid_covers_state(duffing_ref):
    _, _, rho, _ = duffing_ref
    g = default_grid(rho)
    with warnings.catch_warnings():
        warnings.simplefilter("error", CoverageWarning)
        assert abs(husimi_q(rho, g).integral() - 1) < 1e-3


def test_undriven_duffing_is_vacuum():
    p = SystemParams.from_dispersive(10.0, 100.0, 14.0, 0.0, 1.0)
    dp = DuffingParams.from_system(p)
    al = np.array([0.3 + 0.1j, -1.0j, 1.5])
    assert np.allclose(duffing_wigner_analytic(dp, al), 2 / np.pi * np.exp(-2 * abs(al) ** 2))
    pn = duffing_photon_pdf(dp, 5)
    assert pn[0] == 1 and not pn[1:].any()
    assert duffing_mean_photon(dp) == 0
    assert np.isclose(duffing_symmetric_moment(dp, 1, 1), 0.5)


def test_duffing_wigner_normalized_and_positive(duffing_ref):
    _, dp, _, grid = duffing_ref
    w = duffing_wigner_grid(dp, grid)
    assert abs(w.integral() - 1) <= 1e-4
    assert w.values.min() > 0


def test_duffing_wigner_matches_numeric(duffing_ref):
    _, dp, rho, grid = duffing_ref
    analytic = duffing_wigner_grid(dp, grid)
    numeric = wigner(rho, grid)
    assert numeric.l1_distance(analytic) <= 0.05
    ca, cn = count_kinds(find_critical_points(analytic)), count_kinds(find_critical_points(numeric))
    assert ca["maximum"] == cn["maximum"]


def test_photon_pdf_identities(duffing_ref):
    _, dp, rho, _ = duffing_ref
    pn = duffing_photon_pdf(dp, 60)
    assert pn.min() >= 0
    assert abs(pn.sum() - 1) <= 1e-8
    assert abs(duffing_mean_photon(dp) - np.arange(60) @ pn) <= 1e-8
    assert np.abs(pn[:40] - np.real(np.diag(rho.data))).max() <= 1e-3


def test_doubled_variant_is_not_normalized(duffing_ref):
    _, dp, _, _ = duffing_ref
    assert abs(duffing_photon_pdf(dp, 60, variant="doubled").sum() - 1) > 1e-3


def test_first_moment_quadrature(duffing_ref):
    _, dp, _, grid = duffing_ref
    w = duffing_wigner_grid(dp, grid)
    m1 = duffing_mean_photon(dp)
    assert abs(w.moment(lambda a: abs(a) ** 2).real - 0.5 - m1) <= 1e-3


def test_symmetric_moments(duffing_ref):
    _, dp, _, grid = duffing_ref
    w = duffing_wigner_grid(dp, grid)
    assert abs(duffing_symmetric_moment(dp, 0, 0) - 1) <= 1e-8
    assert abs(duffing_symmetric_moment(dp, 1, 1) - 0.5 - duffing_mean_photon(dp)) <= 1e-8
    assert abs(duffing_symmetric_moment(dp, 1, 0) - w.moment(np.conj)) <= 1e-3
    assert abs(duffing_symmetric_moment(dp, 2, 1) - w.moment(lambda a: np.conj(a) ** 2 * a)) <= 1e-3


def test_duffing_critical_structure(duffing_ref):
    _, dp, _, _ = duffing_ref
    w = duffing_wigner_grid(dp, GridSpec.square(4.0, 161))
    kinds = count_kinds(find_critical_points(w))
    # nodes of the low-excitation Kerr state: the squeezed peak plus
    # minimum/saddle pairs on the interference ridge
    assert sum(kinds.values()) >= 4
    assert kinds["maximum"] >= 1 and kinds["saddle"] >= 1 and kinds["minimum"] >= 1


def gaussian_grid(centers, grid, width=0.5):
    a = grid.alphas
    return PhaseGrid(grid, sum(np.exp(-abs(a - c) ** 2 / width ** 2) for c in centers))


def test_single_gaussian_critical_point():
    grid = GridSpec.square(3, 61)
    pts = find_critical_points(gaussian_grid([0.37 - 0.52j], grid))
    assert [p.kind for p in pts] == ["maximum"]
    assert abs(pts[0].position - (0.37 - 0.52j)) < 0.1


def test_two_gaussians_have_saddle():
    grid = GridSpec.square(4, 121)
    pts = find_critical_points(gaussian_grid([-1.5, 1.5 + 0.2j], grid, width=0.8))
    k = count_kinds(pts)
    assert k == {"maximum": 2, "minimum": 0, "saddle": 1}
    saddle = next(p for p in pts if p.kind == "saddle")
    assert abs(saddle.position - 0.1j) < 0.15
