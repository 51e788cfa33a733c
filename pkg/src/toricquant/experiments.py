"""Config-driven convergence studies with cached, deterministic table output.

Outputs land in ``<out>/<config_hash>/<command>/``. A directory holding a
``manifest.json`` for the same hash is a cache hit unless ``force`` is set.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bergman import deviation_profile, sup_deviation
from .errors import ConfigError, ToricQuantError
from .geodesics import (
    evaluate_Ht,
    geodesic_distance,
    psd_margin,
    sandwich_check,
    solve_geodesic,
    spectral_measure,
    z_functional,
)
from .measures import ks_distance, moment, wasserstein1
from .sections import (
    ADJOINT,
    FLAVORS,
    HILB,
    Bridge,
    Quadrature,
    SectionSpace,
    endpoint_weight,
    gram_matrix,
    weight_at_t,
)
from .symbols import parse as parse_symbol
from .toeplitz import composition_defect, derivative_toeplitz, toeplitz_operator, trace_defect
from .toric import (
    MAGeodesicToric,
    SymplecticPotential,
    aubin_yau_energy,
    geodesic_residual,
    legendre_transform,
    limit_distance,
    limit_measure,
    velocity,
)

log = logging.getLogger(__name__)

COMMANDS = ("legendre", "gram", "geodesic", "toeplitz", "bergman", "study")
MIN_K = {HILB: 1, ADJOINT: 2}
FLOAT_FMT = ".17g"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), FLOAT_FMT)
    return "" if v is None else str(v)


def write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        vals = [r.get(h) for h in header] if isinstance(r, dict) else r
        w.writerow([_fmt(v) for v in vals])
    path.write_text(buf.getvalue())


def _potential(desc, where):
    if desc in (None, "fubini_study"):
        return SymplecticPotential.fubini_study()
    try:
        return SymplecticPotential.from_json(desc)
    except (ToricQuantError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class BridgeConfig:
    enabled: bool = False
    a: float | None = None
    c: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    u0: dict
    u1: dict
    flavor: str
    k_list: tuple
    t_grid: tuple = (0.0, 0.5, 1.0)
    symbols: tuple = ("x", "sin_pi_x")
    bridge: BridgeConfig = field(default_factory=BridgeConfig)
    radial_nodes: int | None = None
    angular_nodes: int = 32
    limit_grid: int = 200000
    sandwich: bool = True
    workers: int = 1
    name: str = "study"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {"name", "u0", "u1", "g", "flavor", "k_list", "t_grid", "symbols", "bridge",
                 "quadrature", "limit_grid", "sandwich", "workers"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        u0 = _potential(raw.get("u0"), "u0")
        if "g" in raw and "u1" in raw:
            raise ConfigError("give either u1 or g, not both")
        if "g" in raw:
            if not isinstance(raw["g"], list) or not raw["g"]:
                raise ConfigError("g must be a non-empty coefficient list")
            try:
                u1 = u0.shifted(raw["g"])
            except (ToricQuantError, ValueError) as exc:
                raise ConfigError(f"g: {exc}") from None
        else:
            u1 = _potential(raw.get("u1"), "u1")
        flavor = raw.get("flavor", HILB)
        if flavor not in FLAVORS:
            raise ConfigError(f"flavor must be one of {FLAVORS}, got {flavor!r}")
        ks = raw.get("k_list")
        if not isinstance(ks, list) or not ks or not all(isinstance(k, int) and not isinstance(k, bool) for k in ks):
            raise ConfigError("k_list must be a non-empty list of integers")
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ConfigError("k_list must be strictly ascending")
        if ks[0] < MIN_K[flavor]:
            raise ConfigError(f"k must be >= {MIN_K[flavor]} for the {flavor} flavor")
        ts = raw.get("t_grid", [0.0, 0.5, 1.0])
        if not isinstance(ts, list) or not all(isinstance(t, (int, float)) and 0.0 <= t <= 1.0 for t in ts):
            raise ConfigError("t_grid must be a list of reals in [0, 1]")
        syms = raw.get("symbols", ["x", "sin_pi_x"])
        if not isinstance(syms, list):
            raise ConfigError("symbols must be a list")
        for s in syms:
            parse_symbol(s)
        br = raw.get("bridge", {}) or {}
        if not isinstance(br, dict) or set(br) - {"enabled", "a", "c"}:
            raise ConfigError("bridge must be an object with keys enabled, a, c")
        bridge = BridgeConfig(bool(br.get("enabled", False)), br.get("a"), br.get("c"))
        quad = raw.get("quadrature", {}) or {}
        if set(quad) - {"radial_nodes", "angular_nodes"}:
            raise ConfigError("quadrature accepts radial_nodes and angular_nodes")
        workers = raw.get("workers", 1)
        if not isinstance(workers, int) or workers < 1:
            raise ConfigError("workers must be a positive integer")
        limit_grid = raw.get("limit_grid", 200000)
        if not isinstance(limit_grid, int) or limit_grid < 2:
            raise ConfigError("limit_grid must be an integer >= 2")
        return cls(
            u0=u0.to_json(), u1=u1.to_json(), flavor=flavor, k_list=tuple(ks),
            t_grid=tuple(float(t) for t in ts), symbols=tuple(json.dumps(s, sort_keys=True) if not isinstance(s, str) else s for s in syms),
            bridge=bridge, radial_nodes=quad.get("radial_nodes"), angular_nodes=int(quad.get("angular_nodes", 32)),
            limit_grid=limit_grid, sandwich=bool(raw.get("sandwich", True)), workers=workers,
            name=str(raw.get("name", "study")),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(raw)

    def canonical(self) -> str:
        """Serialization that determines results; worker count is excluded."""
        d = asdict(self)
        d.pop("workers")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    # convenience accessors

    def geodesic(self) -> MAGeodesicToric:
        return MAGeodesicToric(SymplecticPotential.from_json(self.u0), SymplecticPotential.from_json(self.u1))

    def quadrature(self) -> Quadrature:
        return Quadrature(self.radial_nodes, self.angular_nodes)

    def symbol_objects(self):
        return [parse_symbol(s if not s.startswith("{") else json.loads(s)) for s in self.symbols]


def fit_rate(series):
    """Least squares log(value) = slope log(k) + intercept; returns (slope, intercept, residual)."""
    ks = np.array([k for k, _ in series], dtype=float)
    vals = np.array([v for _, v in series], dtype=float)
    if ks.size < 3:
        raise ValueError("fit_rate needs at least 3 points")
    if np.any(vals <= 0) or np.any(ks <= 0) or not np.all(np.isfinite(vals)):
        raise ValueError("fit_rate needs positive finite values")
    X, Y = np.log(ks), np.log(vals)
    (slope, intercept), res, *_ = np.polyfit(X, Y, 1, full=True)
    residual = float(np.sqrt(res[0] / ks.size)) if res.size else 0.0
    return float(slope), float(intercept), residual


# -- per-k work


def _bridge_for(cfg: ExperimentConfig, geo):
    if not cfg.bridge.enabled:
        return None
    if cfg.bridge.a is not None and cfg.bridge.c is not None:
        return Bridge(float(cfg.bridge.a), float(cfg.bridge.c))
    return Bridge.certified(geo, c=cfg.bridge.c)


def _study_row(cfg: ExperimentConfig, k: int, mu_moments, mu_atoms):
    geo = cfg.geodesic()
    quad = cfg.quadrature()
    space = SectionSpace(k, cfg.flavor)
    row = {"config_hash": cfg.config_hash, "version": __version__, "k": k, "d_k": space.dim, "status": "ok", "error": ""}
    try:
        G0 = gram_matrix(space, endpoint_weight(space, geo.u0), quad)
        G1 = gram_matrix(space, endpoint_weight(space, geo.u1), quad)
        spec = solve_geodesic(G0, G1)
        nu = spectral_measure(spec)
        for p in range(1, 5):
            row[f"nu_m{p}"] = moment(nu, p)
            row[f"mu_m{p}"] = mu_moments[p - 1]
        row["w1"] = wasserstein1(nu, mu_atoms)
        row["ks"] = ks_distance(nu, mu_atoms)
        row["geodesic_distance"] = geodesic_distance(spec)
        row["limit_distance"] = limit_distance(geo)
        row["z_over_kd"] = z_functional(spec) / (k * space.dim)
        row["aubin_yau"] = aubin_yau_energy(geo)
        row["pinch_min"] = float(spec.lambdas[0] / k)
        row["pinch_max"] = float(spec.lambdas[-1] / k)
        bridge = _bridge_for(cfg, geo) if cfg.flavor == HILB else None
        interior = [t for t in cfg.t_grid if 0.0 < t < 1.0]
        if interior and (cfg.flavor == ADJOINT or bridge is not None):
            row["psd_margin_min"] = min(
                psd_margin(evaluate_Ht(spec, G0, t), gram_matrix(space, weight_at_t(geo, t, space, bridge), quad))
                for t in interior)
        if cfg.sandwich and (cfg.flavor == ADJOINT or bridge is not None):
            T0 = derivative_toeplitz(geo, 0, space, bridge, quad)
            T1 = derivative_toeplitz(geo, 1, space, bridge, quad)
            sw = sandwich_check(G0, G1, spec, T0, T1)
            row.update(sandwich_m0=sw.m0, sandwich_m1=sw.m1, sandwich_m0_reversed=sw.m0_reversed,
                       sandwich_m1_reversed=sw.m1_reversed, ordered_lower=sw.ordered_lower,
                       ordered_upper=sw.ordered_upper, ordered_reversed=sw.ordered_reversed)
        w1_weight = endpoint_weight(space, geo.u1)
        syms = cfg.symbol_objects()
        for name, sym in zip(cfg.symbols, syms):
            row[f"trace_defect[{name}]"] = trace_defect(space, w1_weight, sym, quad)
            ev = toeplitz_operator(space, w1_weight, sym, quad).eigenvalues()
            row[f"toeplitz_min[{name}]"] = float(ev[0])
            row[f"toeplitz_max[{name}]"] = float(ev[-1])
        if len(syms) >= 2 and syms[0].invariant and syms[1].invariant:
            row["composition_defect"] = composition_defect(space, w1_weight, syms[0], syms[1], quad)
        for t in cfg.t_grid:
            row[f"sup_deviation[t={t:g}]"] = sup_deviation(geo, spec, t)
    except (ToricQuantError, ArithmeticError, np.linalg.LinAlgError) as exc:
        row["status"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _rate_rows(rows):
    ok = [r for r in rows if r["status"] == "ok"]
    out = []

    def add(name, key_fn):
        series = []
        for r in ok:
            try:
                v = key_fn(r)
            except KeyError:
                return
            series.append((r["k"], v))
        try:
            slope, intercept, res = fit_rate(series)
        except ValueError:
            slope = intercept = res = float("nan")
        out.append({"quantity": name, "slope": slope, "intercept": intercept, "residual": res, "n": len(series)})

    for p in (1, 2, 3):
        add(f"moment_error_p{p}", lambda r, p=p: abs(r[f"nu_m{p}"] - r[f"mu_m{p}"]))
    add("w1", lambda r: r["w1"])
    add("distance_error", lambda r: abs(r["geodesic_distance"] - r["limit_distance"]))
    add("z_error", lambda r: abs(r["z_over_kd"] - r["aubin_yau"]))
    add("composition_defect", lambda r: r["composition_defect"])
    for key in (ok[0] if ok else {}):
        if key.startswith("sup_deviation["):
            add(key, lambda r, key=key: r[key])
    return out


def _rows_header(rows):
    header = []
    for r in rows:
        for key in r:
            if key not in header:
                header.append(key)
    return header


# -- command runners


@dataclass
class RunResult:
    out_dir: Path
    cached: bool
    errors: int
    files: list


def _prepare(cfg: ExperimentConfig, out, command: str, force: bool):
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    target = Path(out) / cfg.config_hash / command
    manifest = target / "manifest.json"
    if manifest.exists() and not force:
        meta = json.loads(manifest.read_text())
        if meta.get("canonical") == cfg.canonical():
            return target, meta
    target.mkdir(parents=True, exist_ok=True)
    return target, None


def _finish(target: Path, cfg: ExperimentConfig, files, errors) -> RunResult:
    meta = {"config_hash": cfg.config_hash, "version": __version__, "canonical": cfg.canonical(),
            "files": sorted(files), "errors": errors}
    (target / "manifest.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return RunResult(target, False, errors, sorted(files))


def _map(cfg, fn, items):
    if cfg.workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


class _StudyTask:
    def __init__(self, cfg, mu_moments, mu):
        self.cfg, self.mu_moments, self.mu = cfg, mu_moments, mu

    def __call__(self, k):
        return _study_row(self.cfg, k, self.mu_moments, self.mu)


def run_study(cfg: ExperimentConfig, out, force: bool = False, plots: bool = True) -> RunResult:
    target, cached = _prepare(cfg, out, "study", force)
    if cached is not None:
        return RunResult(target, True, cached["errors"], cached["files"])
    geo = cfg.geodesic()
    mu = limit_measure(geo, cfg.limit_grid)
    mu_moments = [moment(mu, p) for p in range(1, 5)]
    log.info("study %s: k in %s", cfg.config_hash, list(cfg.k_list))
    rows = _map(cfg, _StudyTask(cfg, mu_moments, mu), list(cfg.k_list))
    rows.sort(key=lambda r: r["k"])
    write_csv(target / "results.csv", _rows_header(rows), rows)
    rates = _rate_rows(rows)
    write_csv(target / "rates.csv", ["quantity", "slope", "intercept", "residual", "n"], rates)
    payload = {"config": json.loads(cfg.canonical()), "config_hash": cfg.config_hash, "version": __version__,
               "rows": rows, "rates": rates}
    (target / "results.json").write_text(json.dumps(payload, indent=2, sort_keys=True, default=_fmt) + "\n")
    files = ["results.csv", "rates.csv", "results.json"]
    if plots:
        from .plotting import plot_study

        files += plot_study(rows, target)
    return _finish(target, cfg, files, sum(r["status"] != "ok" for r in rows))


def run_legendre(cfg: ExperimentConfig, out, force: bool = False, n: int = 201) -> RunResult:
    """f_t, x_t, velocity and geodesic residual on a grid over each t in t_grid."""
    target, cached = _prepare(cfg, out, "legendre", force)
    if cached is not None:
        return RunResult(target, True, cached["errors"], cached["files"])
    geo = cfg.geodesic()
    rows = []
    for t in cfg.t_grid:
        u = geo.potential(t)
        lo, hi = u.s_range()
        s = np.linspace(lo, hi, n)
        f, x = legendre_transform(u, s)
        vel = velocity(geo, t, s)
        tr = min(max(t, 0.01), 0.99)
        res = geodesic_residual(geo, tr, np.linspace(*geo.potential(tr).s_range(1e-6), n))
        for i in range(n):
            rows.append([t, s[i], f[i], x[i], vel[i], res[i]])
    write_csv(target / "legendre.csv", ["t", "s", "f", "x", "velocity", "residual"], rows)
    return _finish(target, cfg, ["legendre.csv"], 0)


def run_gram(cfg: ExperimentConfig, out, force: bool = False) -> RunResult:
    target, cached = _prepare(cfg, out, "gram", force)
    if cached is not None:
        return RunResult(target, True, cached["errors"], cached["files"])
    geo, quad = cfg.geodesic(), cfg.quadrature()
    rows, files = [], ["gram_log_diag.csv"]
    for k in cfg.k_list:
        space = SectionSpace(k, cfg.flavor)
        for label, u in (("H0", geo.u0), ("H1", geo.u1)):
            G = gram_matrix(space, endpoint_weight(space, u), quad)
            rows += [[k, label, j, G.log_diag[j]] for j in range(space.dim)]
            name = f"gram_k{k}_{label}.json"
            (target / name).write_text(G.to_json() + "\n")
            files.append(name)
    write_csv(target / "gram_log_diag.csv", ["k", "endpoint", "j", "log_diag"], rows)
    return _finish(target, cfg, files, 0)


def run_geodesic(cfg: ExperimentConfig, out, force: bool = False) -> RunResult:
    target, cached = _prepare(cfg, out, "geodesic", force)
    if cached is not None:
        return RunResult(target, True, cached["errors"], cached["files"])
    geo, quad = cfg.geodesic(), cfg.quadrature()
    rows, errors = [], 0
    for k in cfg.k_list:
        space = SectionSpace(k, cfg.flavor)
        try:
            spec = solve_geodesic(gram_matrix(space, endpoint_weight(space, geo.u0), quad),
                                  gram_matrix(space, endpoint_weight(space, geo.u1), quad))
        except (ToricQuantError, ArithmeticError) as exc:
            log.error("k=%d: %s", k, exc)
            errors += 1
            continue
        rows += [[k, j, lam / k] for j, lam in enumerate(spec.lambdas)]
    write_csv(target / "spectra.csv", ["k", "j", "lambda_over_k"], rows)
    mu = limit_measure(geo, cfg.limit_grid)
    (target / "limit_measure_moments.json").write_text(
        json.dumps({f"m{p}": moment(mu, p) for p in range(1, 5)}, sort_keys=True) + "\n")
    return _finish(target, cfg, ["spectra.csv", "limit_measure_moments.json"], errors)


def run_toeplitz(cfg: ExperimentConfig, out, force: bool = False) -> RunResult:
    target, cached = _prepare(cfg, out, "toeplitz", force)
    if cached is not None:
        return RunResult(target, True, cached["errors"], cached["files"])
    geo, quad = cfg.geodesic(), cfg.quadrature()
    syms = cfg.symbol_objects()
    rows = []
    for k in cfg.k_list:
        space = SectionSpace(k, cfg.flavor)
        w = endpoint_weight(space, geo.u1)
        for name, sym in zip(cfg.symbols, syms):
            rows.append([k, f"trace_defect[{name}]", trace_defect(space, w, sym, quad)])
            ev = toeplitz_operator(space, w, sym, quad).eigenvalues()
            rows.append([k, f"spectrum_min[{name}]", ev[0]])
            rows.append([k, f"spectrum_max[{name}]", ev[-1]])
        if len(syms) >= 2 and syms[0].invariant and syms[1].invariant:
            rows.append([k, f"composition_defect[{cfg.symbols[0]},{cfg.symbols[1]}]",
                         composition_defect(space, w, syms[0], syms[1], quad)])
    write_csv(target / "toeplitz.csv", ["k", "diagnostic", "value"], rows)
    return _finish(target, cfg, ["toeplitz.csv"], 0)


def run_bergman(cfg: ExperimentConfig, out, force: bool = False, plots: bool = True) -> RunResult:
    target, cached = _prepare(cfg, out, "bergman", force)
    if cached is not None:
        return RunResult(target, True, cached["errors"], cached["files"])
    geo, quad = cfg.geodesic(), cfg.quadrature()
    rows, files = [], ["sup_deviation.csv"]
    for k in cfg.k_list:
        space = SectionSpace(k, cfg.flavor)
        spec = solve_geodesic(gram_matrix(space, endpoint_weight(space, geo.u0), quad),
                              gram_matrix(space, endpoint_weight(space, geo.u1), quad))
        for t in cfg.t_grid:
            d = sup_deviation(geo, spec, t)
            rows.append([k, t, d, d * k / math.log(k) if k > 1 else float("nan")])
            s, fs, f = deviation_profile(geo, spec, t)
            name = f"profile_k{k}_t{t:g}.csv"
            write_csv(target / name, ["s", "fs_metric", "f_t"], zip(s, fs, f))
            files.append(name)
    write_csv(target / "sup_deviation.csv", ["k", "t", "sup_deviation", "sup_deviation_times_k_over_logk"], rows)
    if plots:
        from .plotting import plot_sup_deviation

        files.append(plot_sup_deviation(rows, target))
    return _finish(target, cfg, files, 0)


RUNNERS = {
    "legendre": run_legendre,
    "gram": run_gram,
    "geodesic": run_geodesic,
    "toeplitz": run_toeplitz,
    "bergman": run_bergman,
    "study": run_study,
}

__all__ = [
    "COMMANDS",
    "ExperimentConfig",
    "RunResult",
    "RUNNERS",
    "fit_rate",
    "run_bergman",
    "run_geodesic",
    "run_gram",
    "run_legendre",
    "run_study",
    "run_toeplitz",
]
