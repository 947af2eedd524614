"""Experiment runner: config parsing, parameter sweeps, fits, ratio studies, I/O."""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import ConfigError, RegimeError, SimulationError
from .estimator import asymptotic_prefactor, direct_fidelity, epsilon_estimate, epsilon_exact
from .operators import HermitianOperator, read_matrix, spectrum
from .propagator import convergence_margin, evolve
from .schedules import Quadratic, Resonant, parse_schedule
from .systems import random_system, reference_system

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "schedule",
    "lambda",
    "T",
    "eps_exact",
    "eps_estimate",
    "eps_abs_residual",
    "fidelity_bound",
    "fidelity_direct",
    "convergence_margin",
    "magnus_gate",
    "steps",
    "flags",
)


class FitError(ValueError):
    pass


# --- config -------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    system: str = "reference"
    n: int | None = None
    seed: int = 0
    h1_file: Path | None = None
    dh_file: Path | None = None
    schedules: tuple = ("linear",)
    lambdas: tuple = (1e-2,)
    Ts: tuple = (10.0,)
    steps: str | int = "auto"
    tolerances: Tolerances = field(default_factory=Tolerances)
    base_dir: Path = Path(".")

    def __post_init__(self):
        if self.system not in ("reference", "random", "files"):
            raise ConfigError(f"system must be reference, random or files, got {self.system!r}")
        if self.system == "random" and (self.n is None or self.n < 2):
            raise ConfigError("system = random needs n >= 2")
        if self.system == "files" and (self.h1_file is None or self.dh_file is None):
            raise ConfigError("system = files needs h1_file and dh_file")
        if not self.schedules or not self.lambdas or not self.Ts:
            raise ConfigError("need at least one schedule, lambda and T")
        if any(not (x >= 0 and math.isfinite(x)) for x in self.lambdas):
            raise ConfigError("lambda values must be finite and >= 0")
        if any(not (x > 0 and math.isfinite(x)) for x in self.Ts):
            raise ConfigError("T values must be finite and > 0")
        if self.steps != "auto" and (not isinstance(self.steps, int) or self.steps < 1):
            raise ConfigError("steps must be 'auto' or a positive integer")


_LIST_KEYS = {"lambda", "T"}
_LINE = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*=\s*(.*?)\s*$")


def parse_config(text: str, path=None) -> ExperimentConfig:
    """Parse line-oriented ``key = value`` text.

    ``schedule`` may repeat; ``lambda`` and ``T`` take comma lists;
    ``tol.<name>`` overrides a field of :class:`Tolerances`.
    """
    seen: dict[str, int] = {}
    kw: dict = {}
    schedules: list[str] = []
    tol_over: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError("expected 'key = value'", line=lineno, path=path)
        key, value = m.group(1), m.group(2)
        if not value:
            raise ConfigError(f"empty value for {key!r}", line=lineno, path=path)
        if key == "schedule":
            schedules.append(value)
            continue
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", line=lineno, path=path)
        seen[key] = lineno
        try:
            if key.startswith("tol."):
                name = key[4:]
                if name not in Tolerances.__dataclass_fields__:
                    raise ConfigError(f"unknown tolerance {name!r}", line=lineno, path=path)
                float(value)
                tol_over[name] = value
            elif key in _LIST_KEYS:
                vals = tuple(float(v) for v in value.split(","))
                kw["lambdas" if key == "lambda" else "Ts"] = vals
            elif key == "system":
                kw["system"] = value
            elif key in ("n", "seed"):
                kw[key] = int(value)
            elif key in ("h1_file", "dh_file"):
                kw[key] = Path(value)
            elif key == "steps":
                kw["steps"] = "auto" if value == "auto" else int(value)
            else:
                raise ConfigError(f"unknown key {key!r}", line=lineno, path=path)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key!r}: {value!r}", line=lineno, path=path) from None
    if schedules:
        kw["schedules"] = tuple(schedules)
    try:
        tol = DEFAULT_TOLERANCES.override(**tol_over)
    except ValueError as exc:
        raise ConfigError(f"bad tolerance override: {exc}", path=path) from None
    base = Path(path).parent if path is not None else Path(".")
    try:
        cfg = ExperimentConfig(tolerances=tol, base_dir=base, **kw)
    except ConfigError as exc:
        raise ConfigError(str(exc), path=path) from None
    # validate schedule syntax up front so errors carry a location
    for s in cfg.schedules:
        try:
            parse_schedule(s, cfg.Ts[0], base_dir=cfg.base_dir)
        except (ConfigError, ValueError) as exc:
            raise ConfigError(f"schedule {s!r}: {exc}", path=path) from None
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=path) from exc
    return parse_config(text, path=path)


def load_system(cfg: ExperimentConfig) -> tuple[HermitianOperator, HermitianOperator]:
    if cfg.system == "reference":
        return reference_system()
    if cfg.system == "random":
        return random_system(cfg.n, cfg.seed)
    h1 = read_matrix(_resolve(cfg, cfg.h1_file))
    dh = read_matrix(_resolve(cfg, cfg.dh_file))
    if h1.dim != dh.dim:
        raise ConfigError(f"h1_file is {h1.dim}x{h1.dim} but dh_file is {dh.dim}x{dh.dim}")
    return h1, dh


def _resolve(cfg, p: Path) -> Path:
    return p if p.is_absolute() else cfg.base_dir / p


# --- rows -----------------------------------------------------------------------


@dataclass(frozen=True)
class RunRow:
    schedule: str
    lam: float
    T: float
    eps_exact: float
    eps_estimate: float
    eps_abs_residual: float
    fidelity_bound: float
    fidelity_direct: float
    convergence_margin: float
    magnus_gate: str
    steps: int
    flags: tuple = ()
    per_level: tuple = ()
    error: str | None = None


def run_row(H1, dH, schedule_text: str, lam: float, T: float, cfg: ExperimentConfig) -> RunRow:
    """One (schedule, lambda, T) cell. Failures are recorded, never raised."""
    tol = cfg.tolerances
    sched = parse_schedule(schedule_text, T, base_dir=cfg.base_dir)
    margin = convergence_margin(lam, dH, sched)
    gate = "ok" if margin > 0 else "violated"
    flags: list[str] = []
    errors: list[str] = []
    eps_x = fid_direct = math.nan
    steps = 0
    H2 = H1 + lam * dH
    try:
        result = evolve(H1, dH, lam, sched, steps=cfg.steps, tol=tol)
        steps = result.step_count
        eps_x = epsilon_exact(result, H2)
        fid_direct = direct_fidelity(result.final_state, H2)
    except (SimulationError, ValueError) as exc:
        errors.append(f"evolve: {type(exc).__name__}: {exc}")

    est = math.nan
    bound = math.nan
    per_level: tuple = ()
    try:
        report = epsilon_estimate(H1, dH, lam, sched, tol=tol)
        est = report.eps_estimate
        per_level = tuple(float(x) for x in report.per_level)
        flags.extend(report.flags)
        if not math.isnan(eps_x):
            report = report.with_exact(eps_x, fid_direct)
            flags = [f for f in flags if f != "fidelity_saturated"] + [
                f for f in report.flags if f == "fidelity_saturated"
            ]
        bound = report.fidelity_bound
    except (SimulationError, ValueError) as exc:
        errors.append(f"estimate: {type(exc).__name__}: {exc}")

    if not math.isnan(eps_x):
        if eps_x < -1e-12:
            flags.append("negative_eps")
        if not math.isnan(bound) and fid_direct < bound - 1e-12:
            flags.append("fidelity_violation")
    if errors:
        flags.append("error")
    return RunRow(
        schedule=sched.describe() if not schedule_text.startswith("table:") else schedule_text,
        lam=float(lam),
        T=float(T),
        eps_exact=eps_x,
        eps_estimate=est,
        eps_abs_residual=abs(eps_x - est),
        fidelity_bound=bound,
        fidelity_direct=fid_direct,
        convergence_margin=margin,
        magnus_gate=gate,
        steps=steps,
        flags=tuple(dict.fromkeys(flags)),
        per_level=per_level,
        error="; ".join(errors) or None,
    )


def _cells(cfg: ExperimentConfig):
    for s in cfg.schedules:
        for T in cfg.Ts:
            for lam in cfg.lambdas:
                yield s, lam, T


def _run_cell(args):
    cfg, s, lam, T = args
    H1, dH = load_system(cfg)
    return run_row(H1, dH, s, lam, T, cfg)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> list[RunRow]:
    """Rows ordered schedule, then T, then lambda, as listed in the config."""
    cells = list(_cells(cfg))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_cell, [(cfg, *c) for c in cells]))
    H1, dH = load_system(cfg)
    rows = []
    for s, lam, T in cells:
        rows.append(run_row(H1, dH, s, lam, T, cfg))
        log.info("%s lambda=%g T=%g eps=%.3e", s, lam, T, rows[-1].eps_exact)
    return rows


# --- persistence ----------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow(
                [
                    r.schedule,
                    _fmt(r.lam),
                    _fmt(r.T),
                    _fmt(r.eps_exact),
                    _fmt(r.eps_estimate),
                    _fmt(r.eps_abs_residual),
                    _fmt(r.fidelity_bound),
                    _fmt(r.fidelity_direct),
                    _fmt(r.convergence_margin),
                    r.magnus_gate,
                    r.steps,
                    ";".join(r.flags),
                ]
            )


def read_csv(path) -> list[RunRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_COLUMNS:
            raise ConfigError(f"unexpected CSV header {header!r}", path=path)
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(CSV_COLUMNS):
                raise ConfigError(f"expected {len(CSV_COLUMNS)} fields", line=lineno, path=path)
            try:
                rows.append(
                    RunRow(
                        schedule=rec[0],
                        lam=float(rec[1]),
                        T=float(rec[2]),
                        eps_exact=float(rec[3]),
                        eps_estimate=float(rec[4]),
                        eps_abs_residual=float(rec[5]),
                        fidelity_bound=float(rec[6]),
                        fidelity_direct=float(rec[7]),
                        convergence_margin=float(rec[8]),
                        magnus_gate=rec[9],
                        steps=int(rec[10]),
                        flags=tuple(f for f in rec[11].split(";") if f),
                    )
                )
            except ValueError:
                raise ConfigError("malformed numeric field", line=lineno, path=path) from None
    return rows


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    return x


def write_json(rows, path) -> None:
    payload = [_jsonable(asdict(r)) for r in rows]
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9.=]+", "_", text).strip("_")


def write_plot_data(rows, out_dir) -> list[Path]:
    """Two-column ``lambda eps_exact`` text file per (schedule, T)."""
    out_dir = Path(out_dir)
    groups: dict[tuple, list[RunRow]] = {}
    for r in rows:
        groups.setdefault((r.schedule, r.T), []).append(r)
    paths = []
    for (s, T), rs in groups.items():
        p = out_dir / f"eps_vs_lambda_{_slug(s)}_T{T:g}.txt"
        lines = [f"# schedule={s} T={T:g}", "# lambda eps_exact"]
        lines += [f"{r.lam:.17g} {r.eps_exact:.17g}" for r in rs]
        p.write_text("\n".join(lines) + "\n")
        paths.append(p)
    return paths


# --- scaling fits ---------------------------------------------------------------


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    prefactor: float
    r_squared: float
    points: tuple


def fit_scaling(rows, schedule: str | None = None, T: float | None = None, tol: Tolerances = DEFAULT_TOLERANCES) -> ScalingFit:
    """Least-squares slope of log eps_exact against log lambda.

    Rows are filtered to one schedule and horizon; points with eps at or
    below ``tol.eps_floor``, failed rows, and rows outside the Magnus gate
    are rejected. Needs at least four distinct lambdas spanning a factor 8.
    """
    sel = [
        r
        for r in rows
        if (schedule is None or r.schedule == schedule) and (T is None or math.isclose(r.T, T, rel_tol=1e-12))
    ]
    if schedule is None and len({r.schedule for r in sel}) > 1:
        raise FitError("rows mix several schedules; pass schedule=")
    if T is None and len({r.T for r in sel}) > 1:
        raise FitError("rows mix several horizons; pass T=")
    bad_gate = [r.lam for r in sel if r.magnus_gate != "ok"]
    if bad_gate:
        raise FitError(f"lambda values outside the convergence gate: {bad_gate}")
    low = [r.lam for r in sel if not r.eps_exact > tol.eps_floor]
    pts = sorted({(r.lam, r.eps_exact) for r in sel if r.eps_exact > tol.eps_floor and r.lam > 0 and "error" not in r.flags})
    lams = sorted({p[0] for p in pts})
    if len(lams) < 4:
        msg = f"need >= 4 lambda points above eps floor {tol.eps_floor:g}, have {len(lams)}"
        if low:
            msg += f" (below floor: {low})"
        raise FitError(msg)
    if lams[-1] / lams[0] < 8 * (1 - 1e-12):
        raise FitError(f"lambda range {lams[-1] / lams[0]:.3g}x is narrower than 8x")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return ScalingFit(
        exponent=float(slope),
        prefactor=float(np.exp(intercept)),
        r_squared=min(1.0, max(0.0, r2)),
        points=tuple(pts),
    )


# --- ratio study ----------------------------------------------------------------


@dataclass(frozen=True)
class RatioRow:
    T: float
    prefactor_resonant: float
    prefactor_quadratic: float
    ratio_prefactor: float
    eps_resonant: float
    eps_quadratic: float
    ratio_exact: float
    slope_resonant: float
    slope_quadratic: float


@dataclass(frozen=True)
class RatioStudy:
    lam: float
    resonant: str
    rows: tuple
    prefactor_increasing: bool
    exact_increasing: bool
    detuning: float  # lc - first gap of H1


def _strictly_increasing(xs) -> bool:
    return all(b > a for a, b in zip(xs, xs[1:]))


def _local_slope(H1, dH, sched, lam, tol, steps):
    H2a = H1 + lam * dH
    H2b = H1 + (lam / 2) * dH
    ea = epsilon_exact(evolve(H1, dH, lam, sched, steps=steps, tol=tol), H2a)
    eb = epsilon_exact(evolve(H1, dH, lam / 2, sched, steps=steps, tol=tol), H2b)
    if not (ea > tol.eps_floor and eb > tol.eps_floor):
        raise RegimeError(f"eps below floor at lambda={lam:g} for {sched.describe()}; raise lambda or change T")
    return ea, math.log2(ea / eb)


def ratio_study(cfg: ExperimentConfig, slope_band=(1.9, 2.1)) -> RatioStudy:
    """Compare the resonant and quadratic schedules of ``cfg`` over its T grid.

    Exact errors use the smallest positive lambda of the config; the local
    slope under lambda-halving must lie in ``slope_band`` for both schedules
    at every T, otherwise RegimeError asks for a smaller lambda.
    """
    tol = cfg.tolerances
    res = [s for s in cfg.schedules if s.startswith("resonant:")]
    quad = [s for s in cfg.schedules if s == "quadratic"]
    if len(res) != 1 or len(quad) != 1:
        raise ConfigError("ratio study needs exactly one resonant and one quadratic schedule")
    pos = [x for x in cfg.lambdas if x > 0]
    if not pos:
        raise ConfigError("ratio study needs a positive lambda")
    lam = min(pos)
    H1, dH = load_system(cfg)
    rows = []
    lc = None
    for T in cfg.Ts:
        rs = parse_schedule(res[0], T)
        qs = Quadratic(T)
        assert isinstance(rs, Resonant)
        lc = rs.lc
        for s in (rs, qs):
            if convergence_margin(lam, dH, s) <= 0:
                raise RegimeError(f"lambda={lam:g} violates the Magnus gate for {s.describe()} at T={T:g}; lower lambda")
        pr = asymptotic_prefactor(H1, dH, rs, tol)
        pq = asymptotic_prefactor(H1, dH, qs, tol)
        er, sr = _local_slope(H1, dH, rs, lam, tol, cfg.steps)
        eq, sq = _local_slope(H1, dH, qs, lam, tol, cfg.steps)
        for name, slope in (("resonant", sr), ("quadratic", sq)):
            if not slope_band[0] <= slope <= slope_band[1]:
                raise RegimeError(
                    f"{name} local slope {slope:.3f} at T={T:g}, lambda={lam:g} is outside "
                    f"{slope_band}; lower lambda to reach the quadratic regime"
                )
        rows.append(RatioRow(T, pr, pq, pr / pq, er, eq, er / eq, sr, sq))
        log.info("T=%g prefactor ratio %.6g exact ratio %.6g", T, pr / pq, er / eq)
    return RatioStudy(
        lam=lam,
        resonant=res[0],
        rows=tuple(rows),
        prefactor_increasing=_strictly_increasing([r.ratio_prefactor for r in rows]),
        exact_increasing=_strictly_increasing([r.ratio_exact for r in rows]),
        detuning=lc - spectrum(H1).first_gap,
    )


def write_ratio(study: RatioStudy, out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    csv_path = out_dir / "ratio.csv"
    cols = list(RatioRow.__dataclass_fields__)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in study.rows:
            w.writerow([_fmt(getattr(r, c)) for c in cols])
    plot = out_dir / "ratio_vs_T.txt"
    lines = [f"# {study.resonant} vs quadratic, lambda={study.lam:g}", "# T ratio_prefactor"]
    lines += [f"{r.T:.17g} {r.ratio_prefactor:.17g}" for r in study.rows]
    plot.write_text("\n".join(lines) + "\n")
    (out_dir / "ratio.json").write_text(json.dumps(_jsonable(asdict(study)), indent=1) + "\n")
    return csv_path, plot
