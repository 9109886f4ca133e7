"""Experiment driver: scheme comparisons over parameter sweeps, CSV output."""
import copy
import csv
import io
import json
import logging
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from . import __version__, _accel
from . import asymptotics as asy
from . import mu_phase as mu
from . import su_phase as su
from .channel import (AP_IRS, AP_USER, IRS_USER, LinkParams, PhaseVector, combined_channels,
                      db_to_linear, dbm_to_watts, generate, multiuser_geometry,
                      single_user_geometry, watts_to_dbm)
from .errors import AllInfeasible, BudgetExceeded, ConfigError, Infeasible, NotConverged
from .precoding import SinrSpec, mmse, mrt, sinr

log = logging.getLogger(__name__)

CSV_HEADER = ["scenario", "scheme", "sweep", "bits", "power_dbm", "trials", "stderr_db", "iters",
              "infeasible"]
SWEEP_VARIABLE = {
    "single_user_distance": "distance",
    "single_user_elements": "n_elements",
    "multiuser_sinr": "gamma_db",
    "multiuser_users": "n_users",
    "multiuser_elements": "n_elements",
    "asymptotic": "n_elements",
}
# user order when users are added one at a time: near, far, near, far, ...
USER_ORDER = [1, 5, 2, 6, 3, 7, 4, 8]
SINR_RTOL = 1e-6

DEFAULTS = {
    "m_antennas": 4,
    "n_elements": 16,
    "users": [1],
    "distance": 50.0,
    "geometry": {"d_x": 2.0, "d_y": 50.0, "d_irs": 2.0, "d_ap": 50.0, "n_y": 4},
    "links": {
        "ap_irs": {"path_loss_exponent": 2.2, "rician_factor": 0.0},
        "irs_user": {"path_loss_exponent": 2.8, "rician_factor": "inf"},
        "ap_user": {"path_loss_exponent": 3.5, "rician_factor": 0.0},
    },
    "bits": [1],
    "gamma_db": 25.0,
    "noise_dbm": -90.0,
    "trials": 200,
    "seed": 0,
    "threshold": 1e-4,
    "workers": 1,
    "rho_h": 1.0,
    "rho_g": 1.0,
    "codebook_fallback": "random",
    "output": "results.csv",
    "raw_output": None,
}
LINK_DEFAULTS = {
    "ap_irs": {"reference_loss_db": -30.0, "antenna_gain_dbi": 3.0},
    "irs_user": {"reference_loss_db": -30.0, "antenna_gain_dbi": 3.0},
    "ap_user": {"reference_loss_db": -30.0, "antenna_gain_dbi": 0.0},
}


def _schema():
    return json.loads(resources.files("irsbeam").joinpath("config_schema.json").read_text())


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _path(parts):
    s = ""
    for p in parts:
        s += f"[{p}]" if isinstance(p, int) else (f".{p}" if s else str(p))
    return s


@dataclass
class ResultRow:
    scenario: str
    scheme: str
    sweep: float
    bits: object          # int, math.inf (continuous) or None (no IRS)
    power_dbm: float
    trials: int
    stderr_db: float
    iters: float
    infeasible: int

    def as_list(self):
        bits = "" if self.bits is None else ("inf" if self.bits == math.inf else str(int(self.bits)))
        return [self.scenario, self.scheme, _fmt(self.sweep), bits, _fmt(self.power_dbm),
                str(self.trials), _fmt(self.stderr_db), _fmt(self.iters), str(self.infeasible)]


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def validate_config(raw):
    """Schema + semantic checks; returns the config merged over the defaults.

    Raises ConfigError with the offending field path.
    """
    if not isinstance(raw, dict):
        raise ConfigError("", "configuration must be a JSON object")
    validator = jsonschema.Draft7Validator(_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(_path(e.absolute_path) or "<root>", e.message)
    cfg = _merge(DEFAULTS, raw)
    scenario = cfg["scenario"]
    var = cfg["sweep"].get("variable", SWEEP_VARIABLE[scenario])
    if var != SWEEP_VARIABLE[scenario]:
        raise ConfigError("sweep.variable",
                          f"scenario {scenario} sweeps {SWEEP_VARIABLE[scenario]!r}, not {var!r}")
    cfg["sweep"]["variable"] = var
    values = cfg["sweep"]["values"]
    for i in range(1, len(values)):
        if not values[i] > values[i - 1]:
            raise ConfigError(f"sweep.values[{i}]", "sweep values must be strictly increasing")
    if var in ("n_elements", "n_users"):
        for i, v in enumerate(values):
            if v != int(v) or v < 1:
                raise ConfigError(f"sweep.values[{i}]", f"{var} must be a positive integer")
    if var == "distance":
        for i, v in enumerate(values):
            if v <= 0:
                raise ConfigError(f"sweep.values[{i}]", "distance must be positive")
    if var == "n_users" and max(values) > len(USER_ORDER):
        raise ConfigError("sweep.values", f"at most {len(USER_ORDER)} users are defined")
    asym = {"monte_carlo", "closed_form"}
    for i, s in enumerate(cfg["schemes"]):
        if (scenario == "asymptotic") != (s in asym):
            raise ConfigError(f"schemes[{i}]", f"scheme {s!r} is not valid for scenario {scenario}")
    if scenario.startswith("single_user") and len(cfg["users"]) != 1:
        raise ConfigError("users", "single-user scenarios take exactly one user")
    if scenario.startswith("multiuser") and "refine" in cfg["schemes"]:
        k_max = int(max(values)) if var == "n_users" else len(cfg["users"])
        if cfg["m_antennas"] < k_max:
            raise ConfigError("m_antennas", f"ZF refinement needs M >= K (K up to {k_max})")
    if scenario != "asymptotic":
        for i, b in enumerate(cfg["bits"]):
            if b == "inf":
                raise ConfigError(f"bits[{i}]", "use the continuous_baseline scheme for b = inf")
    return cfg


def load_raw(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from exc


def load_config(path, **overrides):
    """Read and validate a JSON configuration; non-None overrides win."""
    raw = load_raw(path)
    if isinstance(raw, dict):
        raw = _merge(raw, {k: v for k, v in overrides.items() if v is not None})
    return validate_config(raw)


def _links(cfg):
    out = {}
    for name, key in ((AP_IRS, "ap_irs"), (IRS_USER, "irs_user"), (AP_USER, "ap_user")):
        p = {**LINK_DEFAULTS[key], **cfg["links"][key]}
        rf = p.get("rician_factor", 0.0)
        rf = math.inf if rf in ("inf", "Infinity") else float(rf)
        out[name] = LinkParams(float(p["path_loss_exponent"]), rf, float(p["reference_loss_db"]),
                               float(p["antenna_gain_dbi"]))
    return out


def _setup(cfg, value):
    """Geometry, users and SINR spec for one sweep point."""
    scenario = cfg["scenario"]
    g = cfg["geometry"]
    m, n, gamma_db, users = cfg["m_antennas"], cfg["n_elements"], cfg["gamma_db"], cfg["users"]
    distance = cfg["distance"]
    var = cfg["sweep"]["variable"]
    if var == "distance":
        distance = float(value)
    elif var == "n_elements":
        n = int(value)
    elif var == "gamma_db":
        gamma_db = float(value)
    elif var == "n_users":
        users = USER_ORDER[:int(value)]
    n_y = g["n_y"] if n % g["n_y"] == 0 else 1
    if scenario.startswith("single_user"):
        geom = single_user_geometry(m, n, distance, g["d_x"], g["d_y"], n_y)
    else:
        geom = multiuser_geometry(m, n, users, g["d_x"], g["d_y"], g["d_irs"], g["d_ap"], n_y)
    spec = SinrSpec.uniform(geom.n_users, db_to_linear(gamma_db), dbm_to_watts(cfg["noise_dbm"]))
    return geom, spec


def _sinr_ok(h, precoder, spec):
    s = sinr(h, precoder, spec)
    return bool(np.all(s >= spec.targets * (1.0 - SINR_RTOL)))


def _codebook(cfg, n, bits):
    return mu.hadamard_codebook(n, bits=bits, allow_random=cfg["codebook_fallback"] == "random",
                                seed=cfg["seed"])


def _su_schemes(cfg, ch, spec, schemes, bits_list, threshold):
    """Single-user scheme results as (scheme, bits, power_w, iters)."""
    out = []
    gamma, sigma2 = float(spec.targets[0]), float(spec.noise_powers[0])
    q = su.quadratic_for_user(ch)
    n = q.n

    def mrt_power(theta):
        h = combined_channels(ch, theta)
        pre = mrt(h[0], gamma, sigma2)
        return pre.total_power if _sinr_ok(h, pre, spec) else math.inf

    if "no_irs" in schemes:
        hd = ch.h_d[0]
        w = np.sqrt(gamma * sigma2) * hd / np.real(np.vdot(hd, hd))
        p = float(np.sum(np.abs(w) ** 2))
        ok = _sinr_ok(ch.h_d, w[:, None], spec)
        out.append(("no_irs", None, p if ok else math.inf, 0))
    cont_cache = {}

    def continuous(theta0):
        key = tuple(theta0.levels)
        if key not in cont_cache:
            cont_cache[key] = su.continuous_refinement(q, theta0, threshold, full_output=True)
        return cont_cache[key]

    for bits in bits_list:
        book = _codebook(cfg, n, bits)
        gains = [su.objective(q, t) for t in book]
        init = book[int(np.argmax(gains))]
        for scheme in schemes:
            if scheme == "codebook":
                out.append((scheme, bits, mrt_power(init), 1))
            elif scheme == "refine":
                r = su.successive_refinement(q, init, threshold)
                out.append((scheme, bits, mrt_power(r.theta), r.iterations))
            elif scheme == "mmse_refine":
                inst = mu.MultiuserInstance(ch, spec, bits)
                r = mu.mmse_refinement(inst, init, threshold)
                ok = r.precoder is not None and _sinr_ok(inst.combined(r.theta), r.precoder, spec)
                out.append((scheme, bits, r.total_power if ok else math.inf, r.iterations))
            elif scheme == "optimal":
                r = su.solve_optimal(q, bits)
                out.append((scheme, bits, mrt_power(r.theta), r.nodes))
            elif scheme == "quantize":
                angles, _, sweeps, _ = continuous(init)
                out.append((scheme, bits, mrt_power(su.quantize(angles, bits)), sweeps))
    if "continuous_baseline" in schemes:
        book = _codebook(cfg, n, 1)
        init = book[int(np.argmax([su.objective(q, t) for t in book]))]
        angles, _, sweeps, _ = continuous(init)
        out.append(("continuous_baseline", math.inf, mrt_power(angles), sweeps))
    return out


def _mu_schemes(cfg, ch, spec, schemes, bits_list, threshold):
    out = []

    def checked(inst, theta, r):
        if r.precoder is None or not np.isfinite(r.total_power):
            return math.inf
        return r.total_power if _sinr_ok(inst.combined(theta), r.precoder, spec) else math.inf

    if "no_irs" in schemes:
        try:
            pre = mmse(ch.h_d, spec)
            p = pre.total_power if _sinr_ok(ch.h_d, pre, spec) else math.inf
            out.append(("no_irs", None, p, pre.iterations))
        except (Infeasible, NotConverged):
            out.append(("no_irs", None, math.inf, 0))
    cont_cache = {}

    def zf_start(inst, book):
        try:
            return mu.codebook_select(inst, book, "zf").theta
        except AllInfeasible:
            return PhaseVector.zeros(inst.n, inst.bits)

    def continuous(inst, start):
        key = tuple(start.angles)
        if key not in cont_cache:
            cont_cache[key] = mu.continuous_zf_refinement(inst, start, threshold)
        return cont_cache[key]

    for bits in bits_list:
        inst = mu.MultiuserInstance(ch, spec, bits)
        book = _codebook(cfg, inst.n, bits)
        for scheme in schemes:
            try:
                if scheme == "codebook":
                    r = mu.codebook_select(inst, book, "mmse")
                    out.append((scheme, bits, checked(inst, r.theta, r), 1))
                elif scheme == "refine":
                    r = mu.zf_refinement(inst, zf_start(inst, book), threshold)
                    out.append((scheme, bits, checked(inst, r.theta, r), r.iterations))
                elif scheme == "mmse_refine":
                    try:
                        start = mu.codebook_select(inst, book, "mmse").theta
                    except AllInfeasible:
                        start = PhaseVector.zeros(inst.n, bits)
                    r = mu.mmse_refinement(inst, start, threshold)
                    out.append((scheme, bits, checked(inst, r.theta, r), r.iterations))
                elif scheme == "optimal":
                    r = mu.exhaustive_optimal(inst, "mmse")
                    out.append((scheme, bits, checked(inst, r.theta, r), r.nodes))
                elif scheme == "quantize":
                    angles, trace, _ = continuous(inst, zf_start(inst, _codebook(cfg, inst.n, 1)))
                    theta = su.quantize(angles, bits)
                    p, pre = mu.mmse_power(inst, theta)
                    ok = pre is not None and _sinr_ok(inst.combined(theta), pre, spec)
                    out.append((scheme, bits, p if ok else math.inf, len(trace) - 1))
            except AllInfeasible:
                out.append((scheme, bits, math.inf, 0))
    if "continuous_baseline" in schemes:
        inst = mu.MultiuserInstance(ch, spec, 1)
        angles, trace, _ = continuous(inst, zf_start(inst, _codebook(cfg, inst.n, 1)))
        p, pre = mu.mmse_power(inst, angles)
        ok = pre is not None and _sinr_ok(inst.combined(angles), pre, spec)
        out.append(("continuous_baseline", math.inf, p if ok else math.inf, len(trace) - 1))
    return out


def run_trial(cfg, value, trial):
    """All schemes for one (sweep value, trial); returns a list of records
    ``(scheme, bits, trial, power_w, iters)``."""
    geom, spec = _setup(cfg, value)
    links = _links(cfg)
    ch = generate(geom, links, cfg["seed"], trial)
    schemes = cfg["schemes"]
    bits_list = [int(b) for b in cfg["bits"]]
    fn = _su_schemes if cfg["scenario"].startswith("single_user") else _mu_schemes
    res = fn(cfg, ch, spec, schemes, bits_list, float(cfg["threshold"]))
    return [(s, b, trial, float(p), float(it)) for s, b, p, it in res]


def _task(args):
    cfg, value, trial = args
    return value, trial, run_trial(cfg, value, trial)


def _aggregate(cfg, records):
    """Average per-trial dB values for each (scheme, bits, sweep)."""
    order = {s: i for i, s in enumerate(cfg["schemes"])}
    groups = {}
    for value, scheme, bits, trial, p, it in records:
        groups.setdefault((scheme, bits, value), []).append((trial, p, it))
    rows = []

    def bits_key(b):
        return -1 if b is None else (1e9 if b == math.inf else b)

    for (scheme, bits, value) in sorted(groups, key=lambda k: (order[k[0]], bits_key(k[1]), k[2])):
        items = sorted(groups[(scheme, bits, value)])
        p = np.array([x[1] for x in items])
        it = np.array([x[2] for x in items])
        finite = np.isfinite(p)
        db = watts_to_dbm(p[finite]) if finite.any() else np.array([])
        mean = math.fsum(db) / db.size if db.size else math.inf
        se = float(np.std(db, ddof=1) / math.sqrt(db.size)) if db.size > 1 else 0.0
        rows.append(ResultRow(cfg["scenario"], scheme, value, bits, mean, len(items), se,
                              math.fsum(it) / it.size, int((~finite).sum())))
    return rows


def _run_asymptotic(cfg):
    rows = []
    for scheme in cfg["schemes"]:
        for b in cfg["bits"]:
            bits = math.inf if b == "inf" else int(b)
            for n in cfg["sweep"]["values"]:
                acfg = asy.AsymptoticConfig(int(n), bits, cfg["rho_h"], cfg["rho_g"],
                                            cfg["trials"], cfg["seed"])
                if scheme == "closed_form":
                    val, se, trials = asy.pr_closed_form(acfg), 0.0, 0
                else:
                    est = asy.monte_carlo_pr(acfg)
                    val, trials = est.mean, est.trials
                    se = 10.0 / math.log(10.0) * est.stderr / est.mean
                rows.append(ResultRow("asymptotic", scheme, n, bits, 10.0 * math.log10(val),
                                      trials, se, 0.0, 0))
    return rows, []


def run(cfg, workers=None):
    """Run an experiment; returns ``(rows, raw_records, manifest)``."""
    t0 = time.perf_counter()
    if cfg["scenario"] == "asymptotic":
        rows, records = _run_asymptotic(cfg)
    else:
        if "optimal" in cfg["schemes"]:
            _check_guards(cfg)
        tasks = [(cfg, v, t) for v in cfg["sweep"]["values"] for t in range(cfg["trials"])]
        workers = workers or cfg.get("workers", 1)
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
        else:
            results = [_task(t) for t in tasks]
        records = sorted(
            ((v, s, b, trial, p, it) for v, _, res in results for s, b, trial, p, it in res),
            key=lambda r: (r[1], -1 if r[2] is None else r[2], r[0], r[3]))
        rows = _aggregate(cfg, records)
    manifest = {
        "package": "irsbeam",
        "version": __version__,
        "config": cfg,
        "seed": cfg["seed"],
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
            "numba": getattr(_accel.numba, "__version__", None),
        },
        "numba_enabled": _accel.USE_NUMBA,
        "workers": workers or 1,
        "rows": len(rows),
        "wall_time_s": time.perf_counter() - t0,
    }
    return rows, records, manifest


def _check_guards(cfg):
    scenario = cfg["scenario"]
    ns = [cfg["n_elements"]]
    if cfg["sweep"]["variable"] == "n_elements":
        ns = [int(v) for v in cfg["sweep"]["values"]]
    for n in ns:
        for b in cfg["bits"]:
            if scenario.startswith("single_user") and n * int(b) > 30:
                raise BudgetExceeded(f"optimal scheme refuses N*bits = {n * int(b)} > 30")
            if scenario.startswith("multiuser") and (1 << int(b)) ** n > mu.EXHAUSTIVE_GUARD:
                raise BudgetExceeded(f"exhaustive search over L^N = 2^{int(b) * n} exceeds 2^20")


def csv_text(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.as_list())
    return buf.getvalue()


def emit_csv(rows, path):
    """Write result rows as UTF-8 CSV with LF line endings."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(rows))


def emit_raw(records, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "scheme", "bits", "trial", "power_w", "iters"])
        for v, s, b, t, p, it in records:
            w.writerow([_fmt(v), s, "" if b is None else b, t, repr(float(p)), _fmt(it)])


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def emit_manifest(manifest, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def manifest_path(csv_path):
    root, _ = os.path.splitext(csv_path)
    return root + ".manifest.json"


_SU_LINKS = {
    "ap_irs": {"path_loss_exponent": 2.2, "rician_factor": 0.0},
    "irs_user": {"path_loss_exponent": 2.8, "rician_factor": "inf"},
    "ap_user": {"path_loss_exponent": 3.5, "rician_factor": 0.0},
}
_MU_LINKS = {
    "ap_irs": {"path_loss_exponent": 2.2, "rician_factor": "inf"},
    "irs_user": {"path_loss_exponent": 2.8, "rician_factor": 0.0},
    "ap_user": {"path_loss_exponent": 3.5, "rician_factor": 0.0},
}
_N_SWEEP = [8, 16, 24, 32, 40, 48, 64]

PRESETS = {
    "fig3": {
        "scenario": "single_user_distance", "m_antennas": 4, "n_elements": 16, "gamma_db": 25.0,
        "links": _SU_LINKS, "bits": [1],
        "sweep": {"variable": "distance", "values": [20, 30, 40, 45, 48, 50, 52, 55, 60, 70]},
        "schemes": ["optimal", "refine", "quantize", "codebook", "no_irs", "continuous_baseline"],
    },
    "fig4": {
        "scenario": "single_user_elements", "m_antennas": 4, "distance": 50.0, "gamma_db": 25.0,
        "links": _SU_LINKS, "bits": [1, 2],
        "sweep": {"variable": "n_elements", "values": _N_SWEEP},
        "schemes": ["refine", "quantize", "continuous_baseline"],
    },
    "fig6a": {
        "scenario": "multiuser_sinr", "m_antennas": 4, "n_elements": 8, "users": [1, 2],
        "links": _MU_LINKS, "bits": [1],
        "sweep": {"variable": "gamma_db", "values": [15, 20, 25, 30]},
        "schemes": ["optimal", "mmse_refine", "refine", "quantize", "codebook", "no_irs"],
    },
    "fig6b": {
        "scenario": "multiuser_sinr", "m_antennas": 6, "n_elements": 32, "users": [1, 2, 3, 4],
        "links": _MU_LINKS, "bits": [1],
        "sweep": {"variable": "gamma_db", "values": [15, 20, 25, 30]},
        "schemes": ["mmse_refine", "refine", "quantize", "codebook", "no_irs"],
    },
    "fig6c": {
        "scenario": "multiuser_sinr", "m_antennas": 6, "n_elements": 64, "users": [1, 2, 3, 4],
        "links": _MU_LINKS, "bits": [1],
        "sweep": {"variable": "gamma_db", "values": [15, 20, 25, 30]},
        "schemes": ["mmse_refine", "refine", "quantize", "codebook", "no_irs"],
    },
    "fig7": {
        "scenario": "multiuser_users", "m_antennas": 8, "n_elements": 48, "gamma_db": 15.0,
        "links": _MU_LINKS, "bits": [1],
        "sweep": {"variable": "n_users", "values": [1, 2, 3, 4, 5, 6, 7, 8]},
        "schemes": ["refine", "no_irs"],
    },
    "fig8": {
        "scenario": "multiuser_elements", "m_antennas": 6, "users": [1, 2, 3, 4], "gamma_db": 15.0,
        "links": _MU_LINKS, "bits": [1, 2],
        "sweep": {"variable": "n_elements", "values": _N_SWEEP},
        "schemes": ["refine", "no_irs"],
    },
    "asymptotic": {
        "scenario": "asymptotic", "bits": [1, 2, "inf"], "trials": 10000,
        "sweep": {"variable": "n_elements", "values": [10, 25, 50, 100, 200, 400, 800]},
        "schemes": ["monte_carlo", "closed_form"],
    },
}


def preset(name, **overrides):
    """Validated configuration of a named preset with optional field overrides."""
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    raw = _merge(PRESETS[name], {k: v for k, v in overrides.items() if v is not None})
    return validate_config(raw)
