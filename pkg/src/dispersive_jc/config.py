"""Experiment configuration: ratio parameters, numerics and output settings.

Physical parameters are given as the dimensionless ratios used in figure
captions and resolved to absolute rates with ``gamma = 1``, or ``kappa = 1``
when the qubit is undamped. Config files use ``key = value`` lines grouped in
``[params]``, ``[numerics]`` and ``[output]`` sections; any unknown key or
section is an error.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .hilbert import SystemParams


class ConfigError(ValueError):
    pass


SUBCOMMANDS = ("steady", "evolve", "trajectory", "ensemble", "wigner", "qfunc",
               "duffing", "meanfield", "leaf", "spectrum", "lifetimes")

# mutually exclusive alternatives; exactly one of each group is required
RATIO_GROUPS = {
    "drive": ("eps_d_over_gamma", "eps_d_over_kappa", "eps_d_over_two_kappa"),
    "damping": ("two_kappa_over_gamma", "gamma_over_two_kappa"),
    "coupling": ("g_over_gamma", "g_over_two_kappa"),
    "detuning": ("delta_over_g", "g_over_delta"),
    "cavity": ("delta_c_over_kappa",),
}
GAMMA_NORMALIZED = ("eps_d_over_gamma", "g_over_gamma")

# name -> (type, default, check)
NUMERICS = {
    "n_max": (int, 30, "pos"),
    "dt": (float, 1e-3, "pos"),
    "t_final": (float, 10.0, "pos"),
    "seed": (int, 0, "nonneg"),
    "sample_stride": (int, 1, "pos"),
    "n_traj": (int, 4, "pos"),
    "propagator": (str, "full", ("full", "split")),
    "method": (str, "DOP853", ("DOP853", "RK45", "expm")),
    "grid_half_width": (float, 0.0, "nonneg"),   # 0 = automatic
    "grid_points": (int, 101, "pos"),
    "grid_center_re": (float, 0.0, None),
    "grid_center_im": (float, 0.0, None),
    "sweep_points": (int, 1, "pos"),
    "delta_c_max_over_kappa": (float, 0.0, "nonneg"),  # upper end of a sweep
    "sigma_z": (float, -1.0, (-1.0, 1.0)),
    "sz_dark": (float, 0.0, None),
    "n_dark": (float, 1.0, "nonneg"),
    "sz_dim": (float, -0.5, None),
    "n_mid": (float, 1.0, "nonneg"),
    "n_bright": (float, 0.0, "nonneg"),           # 0 = mean-field default
    "min_duration": (float, 0.0, "nonneg"),       # 0 = 2 / (2 kappa)
    "bin_width": (float, 5.0, "pos"),
    "transient": (float, -1.0, None),             # < 0 = 10 / (2 kappa)
    "signal": (str, "sm", ("sm", "a")),
    "demodulate": (str, "bare", ("bare", "none")),
    "input": (str, "", None),
}
OUTPUT = {"dir": (str, "out", None), "prefix": (str, "", None)}
SECTIONS = {"params": None, "numerics": NUMERICS, "output": OUTPUT}


@dataclass(frozen=True)
class ExperimentConfig:
    subcommand: str
    ratios: dict
    params: SystemParams
    numerics: dict
    output_dir: str
    prefix: str = ""
    source: str | None = None
    delta_c_sweep: np.ndarray = field(default=None, repr=False, compare=False)

    def echo(self) -> dict:
        p = self.params
        return {
            "subcommand": self.subcommand,
            "ratios": dict(self.ratios),
            "derived": {"delta_c": p.delta_c, "delta_q": p.delta_q, "g": p.g,
                        "eps_d": float(np.real(p.eps_d)), "kappa": p.kappa, "gamma": p.gamma,
                        "delta": p.delta, "delta_over_g": p.delta / p.g if p.g else None},
            "numerics": dict(self.numerics),
            "output_dir": self.output_dir,
            "prefix": self.prefix,
        }


def _parse_value(name, raw, spec):
    typ, _, check = spec
    try:
        val = typ(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {typ.__name__}") from exc
    if check == "pos" and not val > 0:
        raise ConfigError(f"{name} must be positive, got {val}")
    if check == "nonneg" and not val >= 0:
        raise ConfigError(f"{name} must be nonnegative, got {val}")
    if isinstance(check, tuple) and val not in check:
        raise ConfigError(f"{name} must be one of {check}, got {val!r}")
    return val


def _ratio_value(name, raw) -> float:
    try:
        v = float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r} as a number") from exc
    if name == "delta_c_over_kappa" and np.isfinite(v):
        return v
    if not np.isfinite(v) or v < 0:
        raise ConfigError(f"{name} must be a finite nonnegative number, got {raw!r}")
    return v


def read_config_file(path) -> dict:
    """Raw ``{section: {key: str}}`` from a config file, unknown names rejected."""
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    out = {}
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}] in {path}")
        out[sec] = dict(cp.items(sec))
    return out


def all_ratio_keys():
    return [k for group in RATIO_GROUPS.values() for k in group]


def _check_keys(raw: dict):
    for sec, items in raw.items():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        allowed = all_ratio_keys() if sec == "params" else SECTIONS[sec]
        for k in items:
            if k not in allowed:
                raise ConfigError(f"unknown key {k!r} in [{sec}]")


def resolve_params(ratios: dict, subcommand: str) -> SystemParams:
    """Absolute rates from figure-caption ratios.

    With ``gamma > 0`` the unit is ``gamma = 1``; with ``gamma = 0`` it is
    ``kappa = 1`` and only kappa-normalized ratios are accepted.
    """
    chosen = {}
    for group, names in RATIO_GROUPS.items():
        given = [n for n in names if n in ratios]
        if len(given) == 0:
            raise ConfigError(f"missing {group} ratio: supply one of {', '.join(names)}")
        if len(given) > 1:
            raise ConfigError(f"contradictory {group} ratios: {', '.join(given)} are exclusive")
        chosen[group] = (given[0], _ratio_value(given[0], ratios[given[0]]))
    dname, dval = chosen["damping"]
    if dname == "two_kappa_over_gamma":
        if dval == 0:
            raise ConfigError("two_kappa_over_gamma must be positive")
        gamma, kappa = 1.0, dval / 2
    else:
        if dval == 0:
            gamma, kappa = 0.0, 1.0
        else:
            gamma, kappa = 1.0, 1.0 / (2 * dval)
    if gamma == 0:
        bad = [chosen[g][0] for g in ("drive", "coupling") if chosen[g][0] in GAMMA_NORMALIZED]
        if bad:
            raise ConfigError(
                f"gamma = 0 cannot be combined with gamma-normalized ratios ({', '.join(bad)}); "
                "use eps_d_over_kappa or eps_d_over_two_kappa and g_over_two_kappa")
    ename, ev = chosen["drive"]
    eps = {"eps_d_over_gamma": ev * gamma, "eps_d_over_kappa": ev * kappa,
           "eps_d_over_two_kappa": ev * 2 * kappa}[ename]
    gname, gv = chosen["coupling"]
    g = gv * gamma if gname == "g_over_gamma" else gv * 2 * kappa
    tname, tv = chosen["detuning"]
    if tv == 0:
        raise ConfigError(f"{tname} must be positive")
    delta = tv * g if tname == "delta_over_g" else g / tv
    dc = chosen["cavity"][1] * kappa
    return SystemParams.from_dispersive(dc, delta, g, eps, kappa, gamma)


def parse_config(subcommand: str, path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a validated config from an optional file plus flag overrides.

    ``overrides`` maps ``section -> {key: value}``; flags win over the file.
    ``delta_c_over_kappa`` may be negative (drive below the cavity).
    """
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    raw = read_config_file(path) if path else {}
    _check_keys(raw)
    overrides = overrides or {}
    _check_keys(overrides)
    merged = {s: dict(raw.get(s, {})) for s in SECTIONS}
    for s, items in overrides.items():
        merged[s].update({k: v for k, v in items.items() if v is not None})
    ratios = dict(merged["params"])
    params = resolve_params(ratios, subcommand)
    numerics = {}
    for k, spec in NUMERICS.items():
        numerics[k] = _parse_value(k, merged["numerics"][k], spec) if k in merged["numerics"] else spec[1]
    out = {k: (merged["output"][k] if k in merged["output"] else spec[1]) for k, spec in OUTPUT.items()}
    sweep = None
    if numerics["sweep_points"] > 1:
        hi = numerics["delta_c_max_over_kappa"]
        lo = float(ratios["delta_c_over_kappa"])
        if hi <= lo:
            raise ConfigError("delta_c_max_over_kappa must exceed delta_c_over_kappa for a sweep")
        sweep = np.linspace(lo, hi, numerics["sweep_points"]) * params.kappa
    ratios = {k: float(v) for k, v in ratios.items()}
    return ExperimentConfig(subcommand, ratios, params, numerics, out["dir"], out["prefix"],
                            str(path) if path else None, sweep)
