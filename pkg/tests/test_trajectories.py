import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dispersive_jc.config import ConfigError
from dispersive_jc.hilbert import JointOps, SystemParams, TruncatedSpace, build_jc_hamiltonian
from dispersive_jc.io import read_csv
from dispersive_jc.lindblad import (
    DensityMatrix, evolve, expectation, ground_state, jc_channels, jc_liouvillian, partial_trace,
    trace_distance, unvec, vec, von_neumann_entropy,
)
from dispersive_jc.trajectories import (
    OBS_COLUMNS, Episode, StateError, Thresholds, TrajectoryRecord, classify_states,
    demodulate, discard_transient, ensemble_density, episodes_from_labels, label_samples,
    lifetime_histogram, peak_frequency, platen_weak2_step, run_ensemble, run_trajectory,
    spectrum, sse_terms, step_noise,
)

from conftest import random_state

SMALL = SystemParams.from_dispersive(1.0, 12.0, 2.0, 1.2, 1.0, 0.4)


def ito_mean_drho(psi, H, channels):
    d1, d2 = sse_terms(psi, H, channels)
    out = np.outer(d1, psi.conj()) + np.outer(psi, d1.conj())
    for v in d2:
        out += np.outer(v, v.conj())
    return out, d1, d2


def test_dark_equilibrium_terms():
    space = TruncatedSpace(5)
    p = SystemParams.from_dispersive(1.0, 12.0, 2.0, 0.0, 1.0, 0.4)
    H = build_jc_hamiltonian(p, space)
    psi = ground_state(space)
    d1, d2 = sse_terms(psi, H, jc_channels(p, space))
    assert np.allclose(d1, -1j * (H.dense() @ psi), atol=1e-15)
    assert len(d2) == 2 and all(np.abs(v).max() == 0 for v in d2)


def test_unnormalized_state_rejected():
    space = TruncatedSpace(3)
    with pytest.raises(StateError):
        sse_terms(2 * ground_state(space), build_jc_hamiltonian(SMALL, space), [])


def test_ito_mean_reproduces_liouvillian(rng):
    space = TruncatedSpace(5)
    H = build_jc_hamiltonian(SMALL, space)
    ch = jc_channels(SMALL, space)
    psi = random_state(rng, space.dim)
    drho, d1, d2 = ito_mean_drho(psi, H, ch)
    L = jc_liouvillian(SMALL, space)
    ref = L.apply(np.outer(psi, psi.conj()))
    assert np.abs(drho - ref).max() < 1e-12
    # norm preservation to first order in dt
    rate = 2 * np.vdot(psi, d1).real + sum(np.vdot(v, v).real for v in d2)
    assert abs(rate) < 1e-12


def test_sampled_increments_match_liouvillian(rng):
    space = TruncatedSpace(4)
    H = build_jc_hamiltonian(SMALL, space)
    ch = jc_channels(SMALL, space)
    psi = random_state(rng, space.dim)
    d1, d2 = sse_terms(psi, H, ch)
    dt, N = 1e-3, 100_000
    half = rng.standard_normal((N // 2, len(d2))) * math.sqrt(dt)
    dws = np.concatenate([half, -half])  # antithetic pairs cancel the linear noise term
    incr = dt * d1[None, :] + dws @ np.array(d2)
    new = psi[None, :] + incr
    mean = np.einsum("ki,kj->ij", new, new.conj()) / N - np.outer(psi, psi.conj())
    ref = jc_liouvillian(SMALL, space).apply(np.outer(psi, psi.conj())) * dt
    # Monte Carlo error of the quadratic noise term plus the O(dt^2) drift term
    se = dt * math.sqrt(2.0 / N) * sum(np.abs(v).max() ** 2 for v in d2) + dt ** 2 * np.abs(d1).max() ** 2
    assert np.abs(mean - ref).max() < 6 * se + 1e-15


def test_zero_noise_free_step_is_identity(rng):
    space = TruncatedSpace(3)
    from dispersive_jc.hilbert import Operator
    H = Operator(np.zeros((6, 6)), "joint")
    psi = random_state(rng, 6)
    out = platen_weak2_step(psi, 0.1, [], H, [])
    assert np.allclose(out, psi, atol=1e-15)


def test_platen_step_validates_input():
    space = TruncatedSpace(3)
    H = build_jc_hamiltonian(SMALL, space)
    with pytest.raises(ValueError):
        platen_weak2_step(ground_state(space), 0.0, [0, 0], H, jc_channels(SMALL, space))
    with pytest.raises(ValueError):
        platen_weak2_step(ground_state(space), 0.1, [0.0], H, jc_channels(SMALL, space))


def test_step_noise_moments():
    dw, v = step_noise(3, 1, 0, 200_000, 3, 0.01)
    assert abs(dw.mean()) < 5 * 0.1 / math.sqrt(6e5)
    assert abs(dw.var() / 0.01 - 1) < 0.01
    assert np.all(v[:, 0, 0] == -0.01)
    assert np.allclose(v[:, 0, 1], -v[:, 1, 0])
    assert abs(np.mean(v[:, 0, 1] > 0) - 0.5) < 0.01


def test_step_noise_is_counter_based():
    a, va = step_noise(9, 4, 0, 50, 2, 0.1)
    b, vb = step_noise(9, 4, 20, 30, 2, 0.1)
    assert np.array_equal(a[20:], b) and np.array_equal(va[20:], vb)
    c, _ = step_noise(9, 5, 0, 50, 2, 0.1)
    assert not np.array_equal(a, c)


def test_trajectory_bitwise_determinism():
    space = TruncatedSpace(6)
    r1 = run_trajectory(SMALL, space, 2.0, 1e-3, 10, seed=11)
    r2 = run_trajectory(SMALL, space, 2.0, 1e-3, 10, seed=11, chunk=77)
    r3 = run_trajectory(SMALL, space, 2.0, 1e-3, 10, seed=12)
    assert np.array_equal(r1.table(), r2.table())
    assert not np.array_equal(r1.table(), r3.table())


@pytest.mark.parametrize("propagator", ["full", "split"])
def test_resume_is_bitwise_identical(propagator):
    space = TruncatedSpace(6)
    whole = run_trajectory(SMALL, space, 2.0, 1e-3, 5, seed=2, propagator=propagator)
    first = run_trajectory(SMALL, space, 1.0, 1e-3, 5, seed=2, propagator=propagator)
    second = run_trajectory(SMALL, space, 1.0, 1e-3, 5, seed=2, propagator=propagator,
                            psi0=first.final_state, step0=1000)
    joined = np.concatenate([first.table(), second.table()[1:]])
    assert np.array_equal(joined, whole.table())


def test_record_invariants():
    space = TruncatedSpace(8)
    rec = run_trajectory(SMALL, space, 3.0, 1e-3, 20, seed=5, keep_states=True)
    assert all(len(rec.obs[c]) == len(rec.times) for c in OBS_COLUMNS[1:])
    assert rec.bloch_excess() <= 1e-6
    norms = np.linalg.norm(rec.states, axis=1)
    assert np.abs(norms - 1).max() <= 1e-8
    o = JointOps.build(space)
    k = len(rec.times) // 2
    rho = DensityMatrix.from_pure(rec.states[k], "joint")
    assert np.isclose(rec.obs["n"][k], expectation(rho, o.n).real)
    assert np.isclose(rec.a[k], expectation(rho, o.a))
    assert np.isclose(rec.sm[k], expectation(rho, o.sm))
    assert np.isclose(rec.obs["sz"][k], expectation(rho, o.sz).real)
    assert np.isclose(rec.obs["entropy"][k], von_neumann_entropy(partial_trace(rho, "qubit")))


def test_excited_qubit_decays():
    space = TruncatedSpace(4)
    p = SystemParams.from_dispersive(0.0, 10.0, 0.0, 0.0, 1.0, 2.0)
    psi = np.zeros(space.dim, complex)
    psi[space.index(0, 0)] = 1
    recs = [
        run_trajectory(p, space, 3.0, 1e-3, 100, seed=1, traj_id=k, psi0=psi) for k in range(40)]
    sz = np.mean([r.obs["sz"] for r in recs], axis=0)
    t = recs[0].times
    assert sz[0] == 1 and sz[-1] < -0.9
    expect = 2 * np.exp(-p.gamma * t) - 1
    assert np.abs(sz - expect).max() < 0.35


def test_ensemble_independent_of_worker_count():
    space = TruncatedSpace(5)
    a = run_ensemble(SMALL, space, 4, 0.5, 1e-3, 10, seed=3, workers=1)
    b = run_ensemble(SMALL, space, 4, 0.5, 1e-3, 10, seed=3, workers=2)
    for x, y in zip(a, b):
        assert np.array_equal(x.table(), y.table())
    assert not np.array_equal(a[0].table(), a[1].table())


def test_ensemble_density_approaches_master_equation():
    space = TruncatedSpace(6)
    recs = run_ensemble(SMALL, space, 200, 1.0, 1e-3, 500, seed=8, keep_states=True, workers=1)
    rho_t = ensemble_density(recs, -1)
    ref = evolve(DensityMatrix.from_pure(ground_state(space), "joint"), jc_liouvillian(SMALL, space),
                 [0, 1.0])[-1]
    assert trace_distance(rho_t, ref) < 0.15


def test_record_serialization(tmp_path):
    rec = run_trajectory(SMALL, TruncatedSpace(4), 0.1, 1e-3, 10, seed=1)
    csv_path, json_path = rec.write(tmp_path / "traj.csv")
    header, data = read_csv(csv_path)
    assert tuple(header) == OBS_COLUMNS
    assert np.array_equal(data, rec.table())
    meta = json.load(open(json_path))
    assert meta["seed"] == 1 and meta["dt"] == 1e-3 and meta["n_max"] == 4


def test_run_argument_errors():
    space = TruncatedSpace(4)
    for kw in ({"t_final": 0.0}, {"dt": -1.0}, {"sample_stride": 0}, {"propagator": "rk"}):
        args = dict(t_final=1.0, dt=1e-3, sample_stride=1, propagator="full")
        args.update(kw)
        with pytest.raises(ValueError):
            run_trajectory(SMALL, space, args["t_final"], args["dt"], args["sample_stride"],
                           propagator=args["propagator"])


# --- episodes ---------------------------------------------------------------

LEVELS = {"dim": (0.4, -0.95), "bright": (14.0, -0.6), "dark": (0.05, 0.9)}


def synthetic_record(plan, stride=0.05, kappa=1.0, noise=0.0, seed=0):
    """Piecewise-constant observables; ``plan`` is a list of (label, duration)."""
    t_end = sum(d for _, d in plan)
    times = np.arange(0, t_end, stride)
    n = np.empty_like(times)
    sz = np.empty_like(times)
    t0 = 0.0
    for lab, d in plan:
        sel = (times >= t0 - 1e-12) & (times < t0 + d - 1e-12)
        n[sel], sz[sel] = LEVELS[lab]
        t0 += d
    rng = np.random.default_rng(seed)
    n = n * (1 + noise * rng.standard_normal(len(n)))
    obs = {c: np.zeros_like(times) for c in OBS_COLUMNS[1:]}
    obs["n"], obs["sz"] = n, sz
    p = SystemParams.from_dispersive(1.0, 10.0, 1.0, 0.0, kappa, 0.0)
    return TrajectoryRecord(p, TruncatedSpace(2), 0, stride, 1, times, obs)


def test_synthetic_switch_times_recovered():
    plan = [("dim", 13.0), ("bright", 27.5), ("dark", 11.25), ("dim", 8.0), ("bright", 20.0)]
    rec = synthetic_record(plan)
    eps = classify_states(rec, Thresholds())
    assert [e.label for e in eps] == [p[0] for p in plan]
    edges = np.cumsum([0.0] + [d for _, d in plan])
    for e, a, b in zip(eps, edges[:-1], edges[1:]):
        assert abs(e.t_start - a) <= 0.05 + 1e-9 and abs(e.t_end - b) <= 0.05 + 1e-9


def test_constant_bright_series():
    eps = classify_states(synthetic_record([("bright", 40.0)]), Thresholds())
    assert len(eps) == 1 and eps[0].label == "bright"


def test_single_sample_gap_is_closed():
    times = np.arange(20) * 0.5
    lab = np.full(20, 1)
    lab[9] = 0
    eps = episodes_from_labels(times, lab, np.ones(20), np.ones(20), 1.0)
    assert len(eps) == 1 and eps[0].t_end == 10.0
    lab[10] = 0
    assert len(episodes_from_labels(times, lab, np.ones(20), np.ones(20), 1.0)) == 2


def test_dark_overrides_dim_and_order_check():
    thr = Thresholds()
    lab = label_samples(np.array([0.05, 0.5, 20.0, 2.0]), np.array([0.9, -0.9, -0.5, 0.0]), thr)
    assert lab.tolist() == [3, 2, 1, 0]
    with pytest.raises(ConfigError):
        classify_states(synthetic_record([("dim", 5.0)]), Thresholds(n_dark=2.0, n_mid=1.0))


@settings(max_examples=30, deadline=None)
@given(durs=st.lists(st.tuples(st.sampled_from(["dim", "bright", "dark"]), st.floats(0.3, 20)),
                     min_size=1, max_size=8))
def test_episodes_partition_and_filter(durs):
    rec = synthetic_record(durs)
    thr = Thresholds(min_duration=1.5)
    eps = classify_states(rec, thr)
    for e in eps:
        assert e.t_end > e.t_start and e.duration >= 1.5
    for a, b in zip(eps, eps[1:]):
        assert a.t_end <= b.t_start + 1e-9


def test_lifetime_histogram_cases():
    h = lifetime_histogram([Episode("dark", 3.0, 10.0, 0.1, 0.9)], "dark", 1.0)
    assert h.total == 1 and h.counts.sum() == 1
    k = int(np.flatnonzero(h.counts)[0])
    assert h.bin_edges[k] == 7.0 and h.bin_edges[k + 1] == 8.0
    many = [Episode("dark", 0.0, d, 0.1, 0.9) for d in (2.0, 3.5, 12.0)] + [Episode("dim", 0, 4, 1, -1)]
    h = lifetime_histogram(many, "dark", 5.0, kappa=2.0)
    assert h.counts.sum() == h.total == 3 and len(h.counts) == len(h.bin_edges) - 1
    assert np.isclose(h.mean, 2 * np.mean([2.0, 3.5, 12.0]))
    assert lifetime_histogram(many, "bright", 1.0).empty


# --- spectra ---------------------------------------------------------------

def test_constant_series_peaks_at_zero():
    f, m = spectrum(np.full(256, 2.0 + 1j), 0.01)
    assert f[np.argmax(m)] == 0


@pytest.mark.parametrize("w0", [3.0, -7.5, 40.0])
def test_tone_conventions(w0):
    dt = 0.01
    t = np.arange(4096) * dt
    x = np.exp(-1j * w0 * t)
    bin_w = 2 * np.pi / (len(t) * dt)
    f, m = spectrum(x, dt, convention="dft")
    assert abs(f[np.argmax(m)] + w0) <= bin_w
    f, m = spectrum(x, dt)
    assert abs(f[np.argmax(m)] - w0) <= bin_w
    assert np.all(np.diff(f) > 0)


def test_demodulation_and_peak_window():
    dt = 0.01
    t = np.arange(2048) * dt
    x = np.exp(1j * 50.0 * t) * (1 + 0.5 * np.exp(-1j * 4.0 * t)) + 0.2
    f, m = spectrum(demodulate(x, t, 50.0), dt)
    bin_w = 2 * np.pi / (len(t) * dt)
    assert abs(peak_frequency(f, m)) <= bin_w
    assert abs(peak_frequency(f, m, exclude=2 * bin_w) - 4.0) <= bin_w


def test_transient_mask():
    rec = synthetic_record([("dim", 20.0)], kappa=2.0)
    mask = discard_transient(rec)
    assert rec.times[mask][0] >= 2.5 and rec.times[~mask][-1] < 2.5
