"""Command-line harness: ``djc <subcommand> [--config FILE] [--key value ...]``.

Every run writes its CSV/JSON outputs and one ``manifest.json`` into the
output directory. Exit codes: 0 success, 1 configuration error, 2 solver
failure, 3 insufficient statistics.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from importlib import metadata

import numpy as np

from . import config as cfgmod
from .config import ConfigError, ExperimentConfig, parse_config
from .hilbert import JointOps, TruncatedSpace, build_duffing_hamiltonian, fock_ops
from .io import read_csv, sha256_file, write_csv
from .lindblad import (DensityMatrix, SolverError, StiffnessError, build_liouvillian, evolve,
                       expectation, ground_state, jc_liouvillian, partial_trace, steady_state,
                       steady_state_residual, von_neumann_entropy)
from .specfun import SeriesAccuracyError, SeriesDomainError
from . import meanfield as mf
from . import phasespace as ps
from . import trajectories as tr

log = logging.getLogger("dispersive_jc")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_STATS = 0, 1, 2, 3


class StatisticsError(RuntimeError):
    pass


def code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


class Writer:
    """Single point through which all output files are written."""

    def __init__(self, cfg: ExperimentConfig):
        self.dir = cfg.output_dir
        self.prefix = cfg.prefix
        os.makedirs(self.dir, exist_ok=True)
        self.files: list[str] = []

    def path(self, name: str) -> str:
        return os.path.join(self.dir, self.prefix + name)

    def csv(self, name, header, rows) -> str:
        p = write_csv(self.path(name), header, rows)
        self.files.append(p)
        return p

    def json(self, name, obj) -> str:
        p = self.path(name)
        with open(p, "w") as fh:
            json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.files.append(p)
        return p


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (complex, np.complexfloating)):
        return [float(o.real), float(o.imag)]
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


# --- helpers -----------------------------------------------------------------

def _space(cfg) -> TruncatedSpace:
    return TruncatedSpace(cfg.numerics["n_max"])


def _grid_for(cfg, rho_c: DensityMatrix) -> ps.GridSpec:
    nu = cfg.numerics
    if nu["grid_half_width"] > 0:
        return ps.GridSpec.square(nu["grid_half_width"], nu["grid_points"],
                                  complex(nu["grid_center_re"], nu["grid_center_im"]))
    return ps.default_grid(rho_c, nu["grid_points"])


def _grid_rows(pg: ps.PhaseGrid):
    a = pg.spec.alphas
    return zip(a.real.ravel(), a.imag.ravel(), pg.values.ravel())


def _points(pts):
    return [{"re": p.position.real, "im": p.position.imag, "kind": p.kind, "value": p.value}
            for p in pts]


def _steady(p, space):
    L = jc_liouvillian(p, space)
    rho = steady_state(L)
    return L, rho


def _detunings(cfg):
    return cfg.delta_c_sweep if cfg.delta_c_sweep is not None else np.array([cfg.params.delta_c])


def _at_dc(p, dc):
    return p.replace(delta_c=float(dc), delta_q=p.delta_q - p.delta_c + float(dc))


def _thresholds(cfg) -> tr.Thresholds:
    nu = cfg.numerics
    kw = dict(sz_dark=nu["sz_dark"], n_dark=nu["n_dark"], sz_dim=nu["sz_dim"], n_mid=nu["n_mid"],
              min_duration=nu["min_duration"] or None)
    if nu["n_bright"] > 0:
        return tr.Thresholds(n_bright=nu["n_bright"], **kw).check()
    try:
        return tr.Thresholds.from_meanfield(cfg.params, **kw).check()
    except ValueError as exc:
        raise ConfigError(f"no mean-field default for n_bright ({exc}); set n_bright") from exc


def _trajectory(cfg, traj_id=0) -> tr.TrajectoryRecord:
    nu = cfg.numerics
    return tr.run_trajectory(cfg.params, _space(cfg), nu["t_final"], nu["dt"], nu["sample_stride"],
                             nu["seed"], traj_id, propagator=nu["propagator"])


# --- subcommands -------------------------------------------------------------

def cmd_steady(cfg, w: Writer) -> dict:
    space = _space(cfg)
    ops = JointOps.build(space)
    rows, frames = [], []
    for i, dc in enumerate(_detunings(cfg)):
        p = _at_dc(cfg.params, dc)
        L, rho = _steady(p, space)
        diag = rho.diagnostics()
        rc = partial_trace(rho, "cavity")
        grid = _grid_for(cfg, rc)
        q = ps.husimi_q(rc, grid)
        pts = ps.find_critical_points(q)
        kinds = ps.count_kinds(pts)
        a = expectation(rho, ops.a)
        rows.append((dc / p.kappa, expectation(rho, ops.n).real, a.real, a.imag,
                     expectation(rho, ops.sz).real, steady_state_residual(L, rho),
                     diag["trace_error"], diag["min_eigenvalue"], kinds["maximum"]))
        w.csv(f"steady_q_{i:03d}.csv", ("re_alpha", "im_alpha", "q"), _grid_rows(q))
        frames.append({"frame": i, "delta_c_over_kappa": dc / p.kappa, "q_maxima": kinds["maximum"],
                       "critical_points": _points(pts)})
    w.csv("steady.csv", ("delta_c_over_kappa", "n", "re_a", "im_a", "sz", "residual",
                         "trace_error", "min_eigenvalue", "q_maxima"), rows)
    meta = {"frames": frames, "max_q_maxima": max(f["q_maxima"] for f in frames)}
    w.json("steady_meta.json", meta)
    return meta


def cmd_evolve(cfg, w: Writer) -> dict:
    nu = cfg.numerics
    space = _space(cfg)
    L = jc_liouvillian(cfg.params, space)
    n_out = int(round(nu["t_final"] / nu["dt"]))
    t = np.linspace(0, n_out * nu["dt"], n_out + 1)
    rho0 = DensityMatrix.from_pure(ground_state(space), "joint")
    states = evolve(rho0, L, t, method=nu["method"])
    ops = JointOps.build(space)
    rows = []
    for ti, r in zip(t, states):
        a = expectation(r, ops.a)
        rows.append((ti, a.real, a.imag, expectation(r, ops.n).real, expectation(r, ops.sz).real,
                     von_neumann_entropy(partial_trace(r, "qubit"))))
    w.csv("evolve.csv", ("t", "re_a", "im_a", "n", "sz", "entropy"), rows)
    return {"samples": len(rows)}


def cmd_trajectory(cfg, w: Writer) -> dict:
    rec = _trajectory(cfg)
    for p in rec.write(w.path("trajectory.csv")):
        w.files.append(p)
    return {"samples": len(rec), "bloch_excess": rec.bloch_excess()}


def cmd_ensemble(cfg, w: Writer) -> dict:
    nu = cfg.numerics
    recs = tr.run_ensemble(cfg.params, _space(cfg), nu["n_traj"], nu["t_final"], nu["dt"],
                           nu["sample_stride"], nu["seed"], nu["propagator"])
    rows = ([k] + list(row) for k, rec in enumerate(recs) for row in rec.table())
    w.csv("ensemble.csv", ("traj",) + tr.OBS_COLUMNS, rows)
    n = np.array([rec.obs["n"] for rec in recs])
    w.csv("ensemble_mean.csv", ("t", "n_mean", "n_sem"),
          zip(recs[0].times, n.mean(0), n.std(0, ddof=1) / np.sqrt(len(recs)) if len(recs) > 1
              else np.zeros(n.shape[1])))
    w.json("ensemble_meta.json", {"n_traj": len(recs), "sidecar": recs[0].sidecar()})
    return {"n_traj": len(recs)}


def _phase(cfg, w, kind):
    _, rho = _steady(cfg.params, _space(cfg))
    rc = partial_trace(rho, "cavity")
    grid = _grid_for(cfg, rc)
    pg = ps.wigner(rc, grid) if kind == "wigner" else ps.husimi_q(rc, grid)
    pts = ps.find_critical_points(pg)
    w.csv(f"{kind}.csv", ("re_alpha", "im_alpha", kind), _grid_rows(pg))
    meta = {"integral": pg.integral(), "counts": ps.count_kinds(pts), "critical_points": _points(pts)}
    w.json(f"{kind}_meta.json", meta)
    return meta


def cmd_wigner(cfg, w):
    return _phase(cfg, w, "wigner")


def cmd_qfunc(cfg, w):
    return _phase(cfg, w, "q")


def cmd_duffing(cfg, w: Writer) -> dict:
    nu = cfg.numerics
    p = cfg.params
    s = nu["sigma_z"]
    dp = ps.DuffingParams.from_system(p, s)
    n_max = nu["n_max"]
    cav = TruncatedSpace(n_max)
    a, _, _ = fock_ops(cav)
    L = build_liouvillian(build_duffing_hamiltonian(p, cav, s), [(a, p.kappa)])
    rho = steady_state(L)
    grid = _grid_for(cfg, rho)
    wn = ps.wigner(rho, grid)
    wa = ps.duffing_wigner_grid(dp, grid)
    pn = {v: ps.duffing_photon_pdf(dp, n_max, v) for v in ("printed", "doubled")}
    diag = np.real(np.diag(rho.data))
    m1 = ps.duffing_mean_photon(dp)
    w.csv("duffing_wigner.csv", ("re_alpha", "im_alpha", "w_analytic", "w_numeric"),
          zip(grid.alphas.real.ravel(), grid.alphas.imag.ravel(), wa.values.ravel(), wn.values.ravel()))
    w.csv("duffing_pn.csv", ("n", "p_printed", "p_doubled", "p_numeric"),
          ((k, pn["printed"][k], pn["doubled"][k], diag[k]) for k in range(n_max)))
    meta = {
        "c": dp.c, "eps_tilde": dp.eps_tilde, "chi": dp.chi,
        "l1_distance": wa.l1_distance(wn),
        "maxima": {"analytic": ps.count_kinds(ps.find_critical_points(wa))["maximum"],
                   "numeric": ps.count_kinds(ps.find_critical_points(wn))["maximum"]},
        "normalization_residual": {v: abs(pn[v].sum() - 1) for v in pn},
        "me_diagonal_residual": {v: float(np.abs(pn[v] - diag).max()) for v in pn},
        "m1_closed_form": m1, "m1_from_pn": float(np.arange(n_max) @ pn["printed"]),
        "symmetric_moment_00": ps.duffing_symmetric_moment(dp, 0, 0),
    }
    w.json("duffing_meta.json", meta)
    return meta


def cmd_meanfield(cfg, w: Writer) -> dict:
    p = cfg.params
    dcs = _detunings(cfg)
    if p.gamma > 0:
        bs = mf.mb_steady_scurve(p, dcs)
        model = "maxwell-bloch"
    else:
        bs = mf.dispersive_branches(p, dcs)
        model = "dispersive"
    w.csv("meanfield.csv", ("delta_c", "root", "n", "re_alpha", "im_alpha", "stable"), bs.rows())
    meta = {"model": model, "gaps": list(getattr(bs, "gaps", []) or []),
            "roots_per_point": [len(r) for r in bs.roots]}
    w.json("meanfield_meta.json", meta)
    return meta


def cmd_leaf(cfg, w: Writer) -> dict:
    p = cfg.params
    nu = cfg.numerics
    hi = nu["delta_c_max_over_kappa"] * p.kappa or 4 * p.g ** 2 / p.delta
    grid = np.linspace(hi / max(nu["sweep_points"], 200), hi, max(nu["sweep_points"], 200))
    leaf = mf.bistability_leaf(p, grid)
    w.csv("leaf.csv", ("delta_c", "eps_low", "eps_high"), leaf.points)
    meta = {"empty": leaf.empty, "c1": leaf.c1, "c2": leaf.c2, "points": len(leaf.points)}
    w.json("leaf_meta.json", meta)
    if leaf.empty:
        raise StatisticsError("bistability leaf is empty on the sampled detunings")
    return meta


def cmd_spectrum(cfg, w: Writer, hashes: dict) -> dict:
    nu = cfg.numerics
    p = cfg.params
    if nu["input"]:
        hashes[nu["input"]] = sha256_file(nu["input"])
        header, data = read_csv(nu["input"])
        col = {h: i for i, h in enumerate(header)}
        t = data[:, col["t"]]
        key = "sm" if nu["signal"] == "sm" else "a"
        x = data[:, col[f"re_{key}"]] + 1j * data[:, col[f"im_{key}"]]
    else:
        rec = _trajectory(cfg)
        t = rec.times
        x = rec.sm if nu["signal"] == "sm" else rec.a
    cut = nu["transient"] if nu["transient"] >= 0 else 10 / (2 * p.kappa)
    keep = t >= cut
    if keep.sum() < 2:
        raise StatisticsError("fewer than two samples after the transient")
    t, x = t[keep], x[keep]
    if nu["demodulate"] == "bare":
        x = tr.demodulate(x, t, p.delta_q if nu["signal"] == "sm" else p.delta_c)
    f, mag = tr.spectrum(x, t[1] - t[0])
    w.csv("spectrum.csv", ("omega", "magnitude"), zip(f, mag))
    window = p.delta / 2 if p.g > 0 else None
    sel = np.abs(f) < window if window else np.ones(f.size, bool)
    peak = float(f[sel][np.argmax(mag[sel])])
    meta = {"peak_omega": peak, "bin": float(f[1] - f[0]),
            "dispersive_shift": p.g ** 2 / p.delta if p.g > 0 else 0.0}
    w.json("spectrum_meta.json", meta)
    return meta


def cmd_lifetimes(cfg, w: Writer) -> dict:
    nu = cfg.numerics
    thr = _thresholds(cfg)
    recs = tr.run_ensemble(cfg.params, _space(cfg), nu["n_traj"], nu["t_final"], nu["dt"],
                           nu["sample_stride"], nu["seed"], nu["propagator"])
    eps = [e for r in recs for e in tr.classify_states(r, thr)]
    w.csv("episodes.csv", ("label", "t_start", "t_end", "mean_n", "mean_sz"),
          ((e.label, e.t_start, e.t_end, e.mean_n, e.mean_sz) for e in eps))
    meta = {"thresholds": asdict(thr), "counts": {}}
    for label in tr.LABELS:
        h = tr.lifetime_histogram(eps, label, nu["bin_width"], cfg.params.kappa)
        meta["counts"][label] = h.total
        meta[f"mean_{label}"] = h.mean if not h.empty else None
        if not h.empty:
            w.csv(f"lifetimes_{label}.csv", ("bin_lo", "bin_hi", "count"),
                  zip(h.bin_edges[:-1], h.bin_edges[1:], h.counts))
    w.json("lifetimes_meta.json", meta)
    if meta["counts"]["dark"] == 0:
        raise StatisticsError("no dark episodes detected; lengthen t_final or raise n_traj")
    return meta


COMMANDS = {
    "steady": cmd_steady, "evolve": cmd_evolve, "trajectory": cmd_trajectory,
    "ensemble": cmd_ensemble, "wigner": cmd_wigner, "qfunc": cmd_qfunc, "duffing": cmd_duffing,
    "meanfield": cmd_meanfield, "leaf": cmd_leaf, "spectrum": cmd_spectrum,
    "lifetimes": cmd_lifetimes,
}


def run(cfg: ExperimentConfig) -> dict:
    """Execute a config and write the manifest; returns the manifest dict."""
    w = Writer(cfg)
    hashes = {}
    if cfg.source:
        hashes[cfg.source] = sha256_file(cfg.source)
    t0 = time.perf_counter()
    status, error, result = "ok", None, None
    try:
        fn = COMMANDS[cfg.subcommand]
        result = fn(cfg, w, hashes) if cfg.subcommand == "spectrum" else fn(cfg, w)
    except Exception as exc:
        status, error = "failed", f"{type(exc).__name__}: {exc}"
        raise
    finally:
        manifest = {
            "config": cfg.echo(),
            "code_version": code_version(),
            "wall_time_s": time.perf_counter() - t0,
            "status": status,
            "error": error,
            "inputs": hashes,
            "outputs": {os.path.basename(f): sha256_file(f) for f in w.files},
            "result": result,
        }
        with open(os.path.join(cfg.output_dir, cfg.prefix + "manifest.json"), "w") as fh:
            json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return manifest


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="djc", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in cfgmod.SUBCOMMANDS:
        sp_ = sub.add_parser(name)
        sp_.add_argument("--config", help="key = value config file")
        for key in cfgmod.all_ratio_keys():
            sp_.add_argument("--" + key.replace("_", "-"), dest=f"params.{key}")
        for key in cfgmod.NUMERICS:
            sp_.add_argument("--" + key.replace("_", "-"), dest=f"numerics.{key}")
        sp_.add_argument("--output-dir", dest="output.dir")
        sp_.add_argument("--prefix", dest="output.prefix")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"params": {}, "numerics": {}, "output": {}}
    for dest, val in vars(args).items():
        if "." in dest and val is not None:
            sec, key = dest.split(".", 1)
            overrides[sec][key] = val
    try:
        cfg = parse_config(args.subcommand, args.config, overrides)
        tr.worker_count()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    context = f"[{cfg.subcommand} {json.dumps(cfg.ratios, sort_keys=True)}]"
    try:
        run(cfg)
    except ConfigError as exc:
        print(f"config error {context}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StatisticsError as exc:
        print(f"insufficient statistics {context}: {exc}", file=sys.stderr)
        return EXIT_STATS
    except (SolverError, StiffnessError, tr.StepFailure, tr.StateError, SeriesAccuracyError,
            SeriesDomainError, np.linalg.LinAlgError, ValueError, RuntimeError) as exc:
        print(f"solver error {context}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
