"""Command-line front end.

    nonmarkov analyze  --config FILE [--out DIR] [--set section.key=value ...]
    nonmarkov sweep    --config FILE [--out DIR] [--set ...] [--jobs N]
    nonmarkov check-cp --config FILE [--out DIR] [--set ...]

Configuration is an INI file with the sections ``[model]``, ``[run]``,
``[search]`` and ``[sweep]``; see the README for every key.  Time-dependent
rates and generator entries are written as sums of named waveforms::

    rate = 1 + cos(2, 10)            # 1 + 2 cos(10 t)
    d33  = -exp(1, 0.5) + sin(0.3, 2, 0.1)

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 complete-positivity violation found by ``check-cp``.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

import numpy as np

from . import __version__
from .bloch import DimensionError
from .canonical import SampledDecoherence, decoherence_matrices_2level, read_decoherence_table
from .jacobi import NotHermitianError, eigvalsh, max_eigenvalue
from .measures import (InconsistentInput, PropagationTooShort, SearchSettings, sigma_values,
                       analyze, analyze_nlevel, auto_horizon, gdiv_from_spectrum, gdiv_lb_from_matrix)
from .models import (SpinBosonParams, amplitude_damping, phase_damping, sampled_model,
                     spin_boson_coefficients, spin_boson_model)
from .ode import IntegrationError
from .propagation import (MasterEquation2L, RangeError, choi_matrix, cp_trace, matrix_norm,
                          propagate)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NOT_CP = 0, 2, 3, 4

MODELS = ("phase", "amplitude", "spin_boson", "custom_2level", "custom_nlevel")
OUTPUTS = ("measures", "witnesses", "cp_trace")
ENTRY_KEYS = ("v1", "v2", "v3") + tuple(f"d{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3))

DEFAULTS = {
    "model": {
        "type": "", "rate": "1", "rate_scale": "1",
        "alpha": "0.01", "omega_c": "1", "omega_max_factor": "200", "zero_drift": "false",
        "v": "", "d": "", "table": "", "map_table": "",
        **{k: "" for k in ENTRY_KEYS},
    },
    "run": {
        "t_end": "auto", "ode_tol": "1e-9", "quad_tol": "1e-10", "cp_tol": "1e-8",
        "outputs": "measures, witnesses", "witness_points": "2001", "cp_points": "201",
        "max_t": "1e7", "optimize": "true",
    },
    "search": {"n_theta": "24", "n_phi": "48", "n_starts": "3", "maxiter": "400"},
    "sweep": {"parameter": "", "start": "", "stop": "", "count": "0", "scale": "log"},
}

SWEEPABLE = {
    "spin_boson": ("omega_c", "alpha"),
    "phase": ("rate_scale",),
    "amplitude": ("rate_scale",),
}

MEASURE_COLUMNS = [
    "n_dst", "n_dst_ub", "n_dst_analytic", "n_div", "n_div_lb", "n_div_mod", "n_div_mod_lb",
    "cond_i", "cond_ii", "cond_iii", "cond_iii_vacuous", "k_index", "cp_min_eig", "t_end",
    "n_div_partial", "n_div_lb_partial",
]
WITNESS_COLUMNS = ["t", "sigma_opt", "gamma_max", "norm_N", "g_div", "g_div_lb"]


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


# ---------------------------------------------------------------------------
# waveforms

_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_TERM = re.compile(rf"\s*([-+])?\s*(?:(const|cos|sin|exp)\s*\(([^()]*)\)|({_NUM}))\s*")
_ARITY = {"const": (1, 1), "cos": (2, 3), "sin": (2, 3), "exp": (2, 2)}


class Waveform:
    """Sum of named waveform terms, vectorized over time.

    ``const(c)``, ``cos(a, w[, phi]) = a cos(w t + phi)``,
    ``sin(a, w[, phi]) = a sin(w t + phi)``, ``exp(a, k) = a exp(-k t)`` and
    plain numbers, joined by ``+`` or ``-``.
    """

    def __init__(self, text: str):
        self.text = text.strip()
        self.terms = []
        pos = 0
        if not self.text:
            raise ConfigError("empty waveform")
        while pos < len(self.text):
            m = _TERM.match(self.text, pos)
            if m is None or m.end() == pos:
                raise ConfigError(f"cannot parse waveform {self.text!r} at position {pos}")
            if self.terms and m.group(1) is None:
                raise ConfigError(f"missing '+' or '-' between terms in {self.text!r}")
            sign = -1.0 if m.group(1) == "-" else 1.0
            if m.group(2):
                name = m.group(2)
                try:
                    args = [float(a) for a in m.group(3).split(",")]
                except ValueError:
                    raise ConfigError(f"bad arguments in {m.group(0).strip()!r}") from None
                lo, hi = _ARITY[name]
                if not lo <= len(args) <= hi:
                    raise ConfigError(f"{name}() takes {lo}..{hi} arguments, got {len(args)}")
            else:
                name, args = "const", [float(m.group(4))]
            args[0] *= sign
            self.terms.append((name, args))
            pos = m.end()

    @property
    def is_constant(self) -> bool:
        return all(name == "const" or args[0] == 0.0 or args[1] == 0.0 for name, args in self.terms)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for name, args in self.terms:
            if name == "const":
                out = out + args[0]
            elif name == "cos":
                out = out + args[0] * np.cos(args[1] * t + (args[2] if len(args) > 2 else 0.0))
            elif name == "sin":
                out = out + args[0] * np.sin(args[1] * t + (args[2] if len(args) > 2 else 0.0))
            else:
                out = out + args[0] * np.exp(-args[1] * t)
        return out

    def scaled(self, c: float) -> "Waveform":
        w = Waveform.__new__(Waveform)
        w.text = f"{c!r} * ({self.text})"
        w.terms = [(n, [a[0] * c] + a[1:]) for n, a in self.terms]
        return w


# ---------------------------------------------------------------------------
# configuration


def load_config(path: Optional[str], overrides=()) -> dict:
    """Read the INI file, apply ``section.key=value`` overrides and defaults."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    cfg = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    for sec in parser.sections():
        if sec not in cfg:
            raise ConfigError(f"unknown section [{sec}]")
        for key, val in parser.items(sec):
            if key not in cfg[sec]:
                raise ConfigError(f"unknown key {sec}.{key}")
            cfg[sec][key] = val.strip()
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        lhs, val = item.split("=", 1)
        sec, key = lhs.strip().split(".", 1)
        key = key.lower()
        if sec not in cfg or key not in cfg[sec]:
            raise ConfigError(f"unknown key {lhs.strip()}")
        cfg[sec][key] = val.strip()
    validate(cfg)
    return cfg


def _float(cfg, sec, key, positive=False) -> float:
    try:
        x = float(cfg[sec][key])
    except ValueError:
        raise ConfigError(f"{sec}.{key} must be a number, got {cfg[sec][key]!r}") from None
    if not math.isfinite(x) or (positive and not x > 0):
        raise ConfigError(f"{sec}.{key} must be {'positive' if positive else 'finite'}")
    return x


def _int(cfg, sec, key, minimum=0) -> int:
    try:
        x = int(cfg[sec][key])
    except ValueError:
        raise ConfigError(f"{sec}.{key} must be an integer, got {cfg[sec][key]!r}") from None
    if x < minimum:
        raise ConfigError(f"{sec}.{key} must be >= {minimum}")
    return x


def _bool(cfg, sec, key) -> bool:
    val = cfg[sec][key].lower()
    if val in ("true", "yes", "on", "1"):
        return True
    if val in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{sec}.{key} must be true or false")


def t_end_of(cfg) -> Optional[float]:
    return None if cfg["run"]["t_end"].lower() == "auto" else _float(cfg, "run", "t_end", True)


def outputs_of(cfg) -> list:
    outs = [o.strip() for o in cfg["run"]["outputs"].split(",") if o.strip()]
    bad = [o for o in outs if o not in OUTPUTS]
    if bad:
        raise ConfigError(f"unknown outputs {bad}; choose from {OUTPUTS}")
    return outs


def validate(cfg) -> None:
    kind = cfg["model"]["type"]
    if kind not in MODELS:
        raise ConfigError(f"model.type must be one of {MODELS}, got {kind!r}")
    t_end_of(cfg)
    for key in ("ode_tol", "quad_tol", "cp_tol", "max_t"):
        _float(cfg, "run", key, True)
    _int(cfg, "run", "witness_points", 2)
    _int(cfg, "run", "cp_points", 1)
    _bool(cfg, "run", "optimize")
    outputs_of(cfg)
    for key in DEFAULTS["search"]:
        _int(cfg, "search", key, 1)
    m = cfg["model"]
    if kind in ("phase", "amplitude"):
        Waveform(m["rate"])
        _float(cfg, "model", "rate_scale")
    elif kind == "spin_boson":
        _float(cfg, "model", "alpha")
        _float(cfg, "model", "omega_c", True)
        _float(cfg, "model", "omega_max_factor", True)
        _bool(cfg, "model", "zero_drift")
    elif kind == "custom_2level":
        sources = [bool(m["table"]), bool(m["map_table"]),
                   bool(m["v"] or m["d"] or any(m[k] for k in ENTRY_KEYS))]
        if sum(sources) != 1:
            raise ConfigError("custom_2level needs exactly one of: generator entries "
                              "(v/d or v1..d33), table, map_table")
        if m["d"] and any(m[k] for k in ENTRY_KEYS if k.startswith("d")):
            raise ConfigError("give the damping matrix either as d or as entries d11..d33")
        if m["v"] and any(m[k] for k in ("v1", "v2", "v3")):
            raise ConfigError("give the drift either as v or as entries v1..v3")
        for k in ENTRY_KEYS:
            if m[k]:
                Waveform(m[k])
    elif not m["table"]:
        raise ConfigError("custom_nlevel needs model.table")
    sw = cfg["sweep"]
    if sw["parameter"]:
        if sw["parameter"] not in SWEEPABLE.get(kind, ()):
            raise ConfigError(f"sweep parameter {sw['parameter']!r} does not belong to model "
                              f"{kind!r} (allowed: {SWEEPABLE.get(kind, ())})")
        count = _int(cfg, "sweep", "count", 0)
        if count > 0:
            lo, hi = _float(cfg, "sweep", "start"), _float(cfg, "sweep", "stop")
            if sw["scale"] not in ("log", "linear"):
                raise ConfigError("sweep.scale must be log or linear")
            if sw["scale"] == "log" and not (lo > 0 and hi > 0):
                raise ConfigError("log sweep needs positive start and stop")


def _numbers(text, n, what):
    try:
        vals = [float(x) for x in re.split(r"[\s,;]+", text.strip()) if x]
    except ValueError:
        raise ConfigError(f"{what} must contain numbers") from None
    if len(vals) != n:
        raise ConfigError(f"{what} needs {n} numbers, got {len(vals)}")
    return np.array(vals)


def _read_rows(path, ncol, what):
    """Numeric rows separated by commas and/or whitespace; ``#`` starts a comment."""
    if not os.path.exists(path):
        raise ConfigError(f"{what} file not found: {path}")
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            fields = [x for x in re.split(r"[\s,]+", line.split("#", 1)[0].strip()) if x]
            if not fields:
                continue
            try:
                vals = [float(x) for x in fields]
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric field") from None
            if len(vals) != ncol:
                raise ConfigError(f"{path}:{lineno}: expected {ncol} columns, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise ConfigError(f"{what} file {path} is empty")
    return np.array(rows)


def _constant_model(me: MasterEquation2L, constant: bool) -> MasterEquation2L:
    return dataclasses.replace(me, constant_after=0.0) if constant else me


def build_model(cfg):
    """Master equation (two-level) or sampled ``d(t)`` (custom_nlevel)."""
    m = cfg["model"]
    kind = m["type"]
    if kind in ("phase", "amplitude"):
        rate = Waveform(m["rate"]).scaled(_float(cfg, "model", "rate_scale"))
        me = (phase_damping if kind == "phase" else amplitude_damping)(rate)
        return _constant_model(me, rate.is_constant)
    if kind == "spin_boson":
        p = SpinBosonParams(omega_a=1.0, alpha=_float(cfg, "model", "alpha"),
                            omega_c=_float(cfg, "model", "omega_c"),
                            omega_max_factor=_float(cfg, "model", "omega_max_factor"))
        return spin_boson_model(spin_boson_coefficients(p), zero_drift=_bool(cfg, "model", "zero_drift"))
    if kind == "custom_nlevel":
        if not os.path.exists(m["table"]):
            raise ConfigError(f"table file not found: {m['table']}")
        try:
            return read_decoherence_table(m["table"])
        except (DimensionError, NotHermitianError):
            raise
        except ValueError as exc:
            raise ConfigError(f"cannot read {m['table']}: {exc}") from None
    if m["map_table"]:
        return None  # map given directly; only check-cp can use it
    if m["table"]:
        data = _read_rows(m["table"], 13, "generator table")
        return sampled_model(data[:, 0], data[:, 1:4], data[:, 4:].reshape(-1, 3, 3), "custom_2level")
    v_const = _numbers(m["v"], 3, "model.v") if m["v"] else np.zeros(3)
    D_const = _numbers(m["d"], 9, "model.d").reshape(3, 3) if m["d"] else np.zeros((3, 3))
    waves = {k: Waveform(m[k]) for k in ENTRY_KEYS if m[k]}

    def drift(t):
        t = np.asarray(t, dtype=float)
        out = np.broadcast_to(v_const, t.shape + (3,)).copy()
        for i, k in enumerate(("v1", "v2", "v3")):
            if k in waves:
                out[..., i] = waves[k](t)
        return out

    def damping(t):
        t = np.asarray(t, dtype=float)
        out = np.broadcast_to(D_const, t.shape + (3, 3)).copy()
        for i in range(3):
            for j in range(3):
                k = f"d{i + 1}{j + 1}"
                if k in waves:
                    out[..., i, j] = waves[k](t)
        return out

    me = MasterEquation2L(drift, damping, label="custom_2level")
    return _constant_model(me, all(w.is_constant for w in waves.values()))


def search_of(cfg) -> SearchSettings:
    s = cfg["search"]
    return SearchSettings(n_theta=int(s["n_theta"]), n_phi=int(s["n_phi"]),
                          n_starts=int(s["n_starts"]), maxiter=int(s["maxiter"]))


# ---------------------------------------------------------------------------
# CSV output


def fmt(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def config_metadata(cfg) -> list:
    meta = [("nonmarkov_version", __version__)]
    for sec in ("model", "run", "search", "sweep"):
        for key, val in cfg[sec].items():
            if val != "":
                meta.append((f"config.{sec}.{key}", val))
    return meta


def write_csv(path, header, rows, metadata) -> None:
    """Header, data rows, then ``# key: value`` metadata lines."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            if len(row) != len(header):
                raise AssertionError("row width differs from header")
            fh.write(",".join(fmt(x) for x in row) + "\n")
        for key, val in metadata:
            fh.write(f"# {key}: {val}\n")


# ---------------------------------------------------------------------------
# runs


def _horizon(me, cfg, need_mod=True):
    t_end = t_end_of(cfg)
    ode_tol = _float(cfg, "run", "ode_tol")
    if t_end is not None:
        return propagate(me, t_end, ode_tol)
    return auto_horizon(me, ode_tol, max_t=_float(cfg, "run", "max_t"),
                        mod_tol=1e-12 if need_mod else None)


def measure_row(report) -> list:
    c = report.conditions
    return [
        report.n_dst, report.n_dst_ub, report.n_dst_analytic, report.n_div, report.n_div_lb,
        report.n_div_mod, report.n_div_mod_lb,
        None if c is None else c.cond_i, None if c is None else c.cond_ii,
        None if c is None else c.cond_iii, None if c is None else c.vacuous,
        None if c is None or c.k_index is None else int(c.k_index),
        report.cp_min_eig, report.t_end, report.n_div_partial, report.n_div_lb_partial,
    ]


def _nlevel_grid(dtab: SampledDecoherence, t_end):
    grid = dtab.times
    if t_end is not None:
        if t_end > dtab.t_end * (1 + 1e-12):
            raise ConfigError(f"t_end={t_end:g} beyond the sampled table ({dtab.t_end:g})")
        grid = np.unique(np.concatenate([grid[grid < t_end], [t_end]]))
    if grid.size < 2:
        raise ConfigError("the decoherence table needs at least two samples to integrate")
    return grid


def analyze_point(cfg):
    """Run one analysis; returns ``(report, model, trajectory or None)``."""
    model = build_model(cfg)
    quad_tol = _float(cfg, "run", "quad_tol")
    if isinstance(model, SampledDecoherence):
        grid = _nlevel_grid(model, t_end_of(cfg))
        return analyze_nlevel(model, grid, quad_tol), model, None
    if model is None:
        raise ConfigError("a custom_2level map_table can only be used with check-cp")
    traj = _horizon(model, cfg)
    report = analyze(model, t_end_of(cfg), _float(cfg, "run", "ode_tol"), quad_tol,
                     _float(cfg, "run", "cp_tol"), search_of(cfg), _bool(cfg, "run", "optimize"),
                     traj=traj)
    return report, model, traj


def witness_rows(cfg, report, model, traj) -> list:
    n = _int(cfg, "run", "witness_points", 2)
    ts = np.linspace(0.0, report.t_end, n)
    if isinstance(model, SampledDecoherence):
        d = model(ts)
        gd = gdiv_from_spectrum(eigvalsh(d))
        gl = gdiv_lb_from_matrix(d)
        return [[t, None, None, None, a, b] for t, a, b in zip(ts, gd, gl)]
    delta = report.metadata.get("optimal_delta")
    sigma = (sigma_values(model, traj, delta, ts)[0] if delta is not None
             else np.full(ts.shape, np.nan))
    S = model.D(ts)
    gmax = max_eigenvalue(S + np.swapaxes(S, -1, -2))
    nN = matrix_norm(traj.N(ts))
    d = decoherence_matrices_2level(model, ts)
    gd = gdiv_from_spectrum(eigvalsh(d))
    gl = gdiv_lb_from_matrix(d)
    return [list(r) for r in zip(ts, sigma, gmax, nN, gd, gl)]


def run_analyze(cfg, out_dir) -> int:
    report, model, traj = analyze_point(cfg)
    meta = config_metadata(cfg) + _report_metadata(report)
    outs = outputs_of(cfg)
    if "witnesses" in outs:
        write_csv(os.path.join(out_dir, "witness.csv"), WITNESS_COLUMNS,
                  witness_rows(cfg, report, model, traj), meta)
    if "measures" in outs:
        write_csv(os.path.join(out_dir, "measures.csv"), MEASURE_COLUMNS, [measure_row(report)], meta)
    if "cp_trace" in outs:
        if traj is None:
            raise ConfigError("cp_trace output needs a two-level model")
        rows, _ = _cp_rows(cfg, traj)
        write_csv(os.path.join(out_dir, "cp_trace.csv"), ["t", "choi_min_eig", "is_cp"], rows, meta)
    return EXIT_OK


def _report_metadata(report) -> list:
    meta = report.metadata
    out = [("t_end", fmt(report.t_end))]
    if report.optimal_pair is not None:
        u = report.optimal_pair[0]
        out.append(("optimal_pair", " ".join(fmt(x) for x in u) + " / " + " ".join(fmt(-x) for x in u)))
        out.append(("pair_search", "antipodal pure states, half-sphere grid scan + Nelder-Mead"))
    if len(report.growth_intervals):
        gi = report.growth_intervals
        out.append(("growth_intervals", len(gi)))
        out.append(("first_growth_interval", f"{fmt(gi[0, 0])} {fmt(gi[0, 1])}"))
    for key in ("auto_horizon", "rk_steps", "exact_tail_from", "ub_quad_error", "k_index", "samples"):
        if key in meta:
            out.append((key, fmt(meta[key])))
    if report.conditions is not None and report.conditions.degenerate:
        out.append(("cond_iii_degenerate_indices", " ".join(map(str, report.conditions.degenerate))))
    out.append(("n_div_divergent", fmt(report.n_div_divergent)))
    out.append(("n_div_lb_divergent", fmt(report.n_div_lb_divergent)))
    return out


def sweep_values(cfg) -> np.ndarray:
    sw = cfg["sweep"]
    count = _int(cfg, "sweep", "count", 0)
    if count == 0:
        return np.empty(0)
    lo, hi = _float(cfg, "sweep", "start"), _float(cfg, "sweep", "stop")
    if sw["scale"] == "log":
        return np.logspace(np.log10(lo), np.log10(hi), count)
    return np.linspace(lo, hi, count)


def _sweep_point(args):
    cfg, key, value = args
    point = {sec: dict(vals) for sec, vals in cfg.items()}
    point["model"][key] = repr(float(value))
    try:
        report, _, _ = analyze_point(point)
        return [value] + measure_row(report), None
    except Exception as exc:  # failed points yield a nan row, the sweep continues
        return [value] + [math.nan] * len(MEASURE_COLUMNS), f"{type(exc).__name__}: {exc}"


def run_sweep(cfg, out_dir, jobs: int = 1) -> int:
    key = cfg["sweep"]["parameter"]
    if not key:
        raise ConfigError("sweep needs sweep.parameter")
    values = sweep_values(cfg)
    tasks = [(cfg, key, v) for v in values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]
    rows = []
    failed = 0
    for (row, err), v in zip(results, values):
        rows.append(row)
        if err is not None:
            failed += 1
            print(f"nonmarkov sweep: point {key}={v:g} failed: {err}", file=sys.stderr)
    meta = config_metadata(cfg) + [("sweep_parameter", key), ("failed_points", failed)]
    if cfg["model"]["type"] == "spin_boson":
        meta.append(("units", "rates and times in units of omega_a; alpha and omega_c are ratios to omega_a"))
        if key == "omega_c":
            meta.append(("sweep_axis_assumption",
                         "the cutoff ratio omega_c/omega_a is assumed to be the horizontal axis "
                         "of the reference figure"))
    write_csv(os.path.join(out_dir, "sweep.csv"), [key] + MEASURE_COLUMNS, rows, meta)
    return EXIT_OK


def _map_from_table(cfg):
    data = _read_rows(cfg["model"]["map_table"], 13, "map table")
    return data[:, 0], data[:, 1:4], data[:, 4:].reshape(-1, 3, 3)


def _cp_rows(cfg, traj):
    cp_tol = _float(cfg, "run", "cp_tol")
    n = _int(cfg, "run", "cp_points", 1)
    ts = np.linspace(0.0, traj.t_end, n)
    _, grid_min = cp_trace(traj)
    bad = traj.grid[grid_min < -cp_tol]
    ts = np.unique(np.concatenate([ts, bad]))
    _, mins = cp_trace(traj, ts)
    return [[t, m, bool(m >= -cp_tol)] for t, m in zip(ts, mins)], bool(bad.size == 0 and np.all(mins >= -cp_tol))


def run_check_cp(cfg, out_dir) -> int:
    cp_tol = _float(cfg, "run", "cp_tol")
    if cfg["model"]["type"] == "custom_nlevel":
        raise ConfigError("check-cp needs a two-level model")
    if cfg["model"]["type"] == "custom_2level" and cfg["model"]["map_table"]:
        ts, w, N = _map_from_table(cfg)
        mins = eigvalsh(choi_matrix(w, N))[:, 0]
        rows = [[t, m, bool(m >= -cp_tol)] for t, m in zip(ts, mins)]
        ok = bool(np.all(mins >= -cp_tol))
    else:
        traj = _horizon(build_model(cfg), cfg, need_mod=False)
        rows, ok = _cp_rows(cfg, traj)
    meta = config_metadata(cfg) + [("cp_tol", fmt(cp_tol)), ("completely_positive", fmt(ok))]
    write_csv(os.path.join(out_dir, "cp_trace.csv"), ["t", "choi_min_eig", "is_cp"], rows, meta)
    if not ok:
        print("nonmarkov check-cp: the map is not completely positive at some sampled times",
              file=sys.stderr)
        return EXIT_NOT_CP
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point

CONFIG_ERRORS = (ConfigError, DimensionError, NotHermitianError, configparser.Error, OSError)
NUMERIC_ERRORS = (IntegrationError, PropagationTooShort, InconsistentInput, RangeError,
                  ArithmeticError, np.linalg.LinAlgError, ValueError)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nonmarkov", description=(
        "Non-Markovianity measures for two-level (and n-level divisibility) master equations."))
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("analyze", "witness traces and all measures for one model"),
                           ("sweep", "measures over a parameter sweep"),
                           ("check-cp", "minimum Choi eigenvalue along the trajectory")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a configuration value; repeatable")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        os.makedirs(args.out, exist_ok=True)
        if args.command == "analyze":
            return run_analyze(cfg, args.out)
        if args.command == "sweep":
            return run_sweep(cfg, args.out, args.jobs)
        return run_check_cp(cfg, args.out)
    except CONFIG_ERRORS as exc:
        print(f"nonmarkov: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"nonmarkov: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
