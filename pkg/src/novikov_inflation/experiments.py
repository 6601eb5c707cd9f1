"""Named experiments: configuration files, the memory guard, report records, sweeps.

Config files are INI-style with explicit units in the key names::

    [experiment]
    name = lemma32

    [grid]
    length_x = 2048
    points_count = 67108864

    [data]
    n = 16
    mode = paper_exact

Physical parameters (n, L, N, dt, t_end) have no defaults; omitting one is a
usage error raised before anything large is allocated.
"""
from __future__ import annotations

import configparser
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path

import numpy as np
import psutil

from .spectral import Field, Grid, pad_factor, set_threads

EXPERIMENTS = (
    "verify-lp", "verify-data", "lemma31", "lemma32", "evolve", "peakon-compare", "inflation", "ch-variant",
)

# which sections each experiment needs
_NEEDS = {
    "verify-lp": ("grid",),
    "verify-data": ("grid", "data"),
    "lemma31": ("grid", "data"),
    "lemma32": ("grid", "data"),
    "ch-variant": ("grid", "data"),
    "evolve": ("grid", "solver", "evolve"),
    "peakon-compare": ("grid", "solver", "peakon"),
    "inflation": ("grid", "data", "solver"),
}

# working arrays per experiment, in units of the padded field size
_PAD = {
    "verify-lp": 1, "verify-data": 1, "lemma31": 1, "lemma32": 1, "ch-variant": 1,
    "evolve": pad_factor(3), "peakon-compare": pad_factor(3), "inflation": pad_factor(5),
}


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


@dataclass
class ExperimentConfig:
    name: str
    grid: Grid | None = None
    params: object = None
    solver: object = None
    out_dir: Path = Path("out")
    seed: int = 0
    options: dict = dc_field(default_factory=dict)

    def echo(self):
        d = {"name": self.name, "seed": self.seed, "options": dict(self.options)}
        if self.grid is not None:
            d["grid"] = {"length_x": self.grid.length, "points_count": self.grid.count}
        if self.params is not None:
            d["data"] = self.params.to_dict()
        if self.solver is not None:
            d["solver"] = asdict(self.solver)
        return d


def _req(cp, section, key, conv):
    if not cp.has_option(section, key):
        raise ConfigError(f"missing required key [{section}] {key}")
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def _opt(cp, section, key, conv, default):
    return conv(cp.get(section, key)) if cp.has_option(section, key) else default


def _int(raw):
    v = float(raw)
    if v != int(v):
        raise ValueError("not an integer")
    return int(v)


def parse_config(text, name=None, out_dir=None, seed=None):
    """Build an ExperimentConfig from INI text; validates before allocating anything."""
    from .dynamics import SolverConfig
    from .inflation_data import InflationParams, ResolutionError, check_grid

    cp = configparser.ConfigParser()
    cp.read_string(text)
    name = name or _opt(cp, "experiment", "name", str, None)
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown or missing experiment name {name!r}; choose from {', '.join(EXPERIMENTS)}")
    for sec in _NEEDS[name]:
        if not cp.has_section(sec):
            raise ConfigError(f"experiment {name} needs a [{sec}] section")
    cfg = ExperimentConfig(name)
    cfg.seed = seed if seed is not None else _opt(cp, "experiment", "seed", int, 0)
    cfg.out_dir = Path(out_dir if out_dir is not None else _opt(cp, "experiment", "out_dir", str, "out"))
    cfg.grid = Grid(_req(cp, "grid", "length_x", float), _req(cp, "grid", "points_count", _int))
    if "data" in _NEEDS[name]:
        n = _req(cp, "data", "n", _int)
        mode = _opt(cp, "data", "mode", str, "paper_exact")
        try:
            if mode == "generalized":
                cfg.params = InflationParams.generalized(n, spacing=_opt(cp, "data", "spacing", int, 5))
            else:
                cfg.params = InflationParams(n, mode=mode)
            check_grid(cfg.params, cfg.grid)
        except ResolutionError as exc:
            raise ConfigError(f"grid does not resolve the datum: {exc}") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if "solver" in _NEEDS[name]:
        try:
            cfg.solver = SolverConfig(
                _req(cp, "solver", "dt_time", float),
                _req(cp, "solver", "t_end_time", float),
                _opt(cp, "solver", "snapshot_stride", int, 1),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    for sec in ("evolve", "peakon", "inflation", "tolerances"):
        if cp.has_section(sec):
            cfg.options.update({f"{sec}.{k}": v for k, v in cp.items(sec)})
    if name == "peakon-compare":
        _req(cp, "peakon", "width_x", float)
        _req(cp, "peakon", "momentum", float)
    if name == "evolve":
        _req(cp, "evolve", "amplitude_u", float)
    return cfg


def load_config(path, **kw):
    return parse_config(Path(path).read_text(), **kw)


def estimated_bytes(cfg):
    """About five float64 working arrays at the padded size."""
    return 5 * cfg.grid.count * _PAD[cfg.name] * 8


def default_ceiling():
    return int(0.8 * psutil.virtual_memory().total)


def guard_memory(cfg, ceiling=None):
    need = estimated_bytes(cfg)
    limit = default_ceiling() if ceiling is None else ceiling
    if need > limit:
        raise ConfigError(f"estimated peak {need / 2**30:.2f} GiB exceeds the ceiling {limit / 2**30:.2f} GiB")
    return need


# ------------------------------------------------------------------ records


@dataclass
class Verdict:
    name: str
    value: float
    tolerance: float
    comparator: str  # one of "<", "<=", ">", ">=", "in"
    passed: bool
    upper: float | None = None

    @classmethod
    def judge(cls, name, value, comparator, tolerance, upper=None):
        v = float(value)
        ok = {
            "<": lambda: v < tolerance,
            "<=": lambda: v <= tolerance,
            ">": lambda: v > tolerance,
            ">=": lambda: v >= tolerance,
            "in": lambda: tolerance <= v <= upper,
        }[comparator]()
        return cls(name, v, float(tolerance), comparator, bool(ok and math.isfinite(v)), upper)


@dataclass
class ReportRecord:
    experiment: str
    parameters: dict
    results: dict = dc_field(default_factory=dict)
    verdicts: list = dc_field(default_factory=list)
    telemetry: dict = dc_field(default_factory=dict)
    status: str = "ok"

    @property
    def passed(self):
        return self.status == "ok" and all(v.passed for v in self.verdicts)

    def check(self, *args, **kw):
        self.verdicts.append(Verdict.judge(*args, **kw))

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("passed", None)
        d["verdicts"] = [Verdict(**v) for v in d.get("verdicts", [])]
        return cls(**d)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def deterministic_view(self):
        d = self.to_dict()
        d.pop("telemetry")
        return d


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _clean(obj):
    """Round-trip through JSON so results hold only plain types."""
    return json.loads(json.dumps(obj, default=_jsonable))


# ------------------------------------------------------------------ runners


def random_band_field(grid, rng, k_top, amplitude, decay=None):
    """Real field with random coefficients on ``0 < |k| < k_top`` scaled to sup ``amplitude``."""
    k = grid.wavenumbers
    m = (k > 0) & (k < k_top)
    X = np.zeros(grid.n_modes, dtype=np.complex128)
    X[m] = rng.normal(size=m.sum()) + 1j * rng.normal(size=m.sum())
    if decay:
        X[m] *= np.exp(-k[m] / decay)
    f = Field(grid, spectrum=X, check=False)
    return Field(grid, f.samples * (amplitude / np.max(np.abs(f.samples))))


def _run_verify_lp(cfg, rec):
    from .littlewood_paley import LP_CUTOFF, dyadic_blocks, phi, partition_of_unity_deviation, resolved_wavenumber

    g = cfg.grid
    rng = np.random.default_rng(cfg.seed)
    rec.check("partition_of_unity", partition_of_unity_deviation(g), "<", 1e-12)
    worst = 0.0
    for _ in range(50):
        f = random_band_field(g, rng, resolved_wavenumber(g), 1.0)
        back = dyadic_blocks(f).reconstruct().samples
        worst = max(worst, float(np.max(np.abs(back - f.samples)) / np.max(np.abs(f.samples))))
    rec.check("reconstruction", worst, "<", 1e-10)
    xi = np.linspace(4.0 / 3.0, 1.5, 2001)
    rec.check("phi_plateau", float(np.max(np.abs(phi(xi, LP_CUTOFF) - 1.0))), "<", 1e-14)


def _run_verify_data(cfg, rec):
    from .inflation_data import schwartz_tail_check, support_report

    sup = support_report(cfg.params, cfg.grid)
    rec.results["support"] = sup
    for key, row in sup.items():
        rec.check(f"leakage[{key}]", row["leakage"], "<", 1e-8)
    tail = schwartz_tail_check(cfg.params, cfg.grid)
    rec.results["tail"] = asdict(tail)
    # informational: a short period can inflate C through the seam, which the
    # one-sided verdict below cannot see
    rec.results["tail_converged"] = tail.stable
    rec.check("tail_constant_stable", tail.constant_doubled / tail.constant, "<=", 1.0 + 1e-6)


def _run_lemma31(cfg, rec):
    from .inflation_data import lemma31_constants

    c = lemma31_constants(cfg.params, cfg.grid)
    rec.results.update(c)
    for key in ("high", "low_lipschitz", "besov"):
        rec.check(f"{key}_positive", c[key], ">", 0.0)


def _run_lemma32(cfg, rec):
    from .inflation_data import decompose_lemma32, write_lemma_report

    d = decompose_lemma32(cfg.params, cfg.grid)
    rec.results.update(_clean({k: v for k, v in d.to_dict().items() if k not in ("fields",)}))
    for key, val in d.identity_residuals.items():
        rec.check(f"identity[{key}]", val, "<", 1e-8)
    for key, val in d.vanishing().items():
        rec.check(f"vanishing[{key}]", val, "<", 1e-8)
    top, rest = d.dominance()
    rec.check("dominance_margin", top - rest, ">", 0.0)
    ratios = d.ratios()
    rec.results["ratio_cube"] = ratios["cube"]
    rec.check("ratio_positive", ratios["cube"], ">", 0.0)
    write_lemma_report(cfg.out_dir / "lemma32.json", d)


def _run_ch_variant(cfg, rec):
    from .inflation_data import ch_variant_constants

    c = ch_variant_constants(cfg.params, cfg.grid)
    rec.results.update(c)
    rec.check("lower_positive", c["lower"], ">", 0.0)


def _run_evolve(cfg, rec):
    from .dynamics import h1_norm_sq, integrate

    eq = cfg.options.get("evolve.equation", "novikov")
    amp = float(cfg.options["evolve.amplitude_u"])
    k_top = float(cfg.options.get("evolve.k_top", cfg.grid.nyquist / 6))
    rng = np.random.default_rng(cfg.seed)
    u0 = random_band_field(cfg.grid, rng, k_top, amp, decay=k_top / 4)
    traj = integrate(u0, cfg.solver, eq)
    h0 = h1_norm_sq(traj.field(0))
    drift = max(abs(h1_norm_sq(traj.field(i)) - h0) / h0 for i in range(len(traj)))
    rec.results["h1_drift"] = drift
    rec.check("h1_drift", drift, "<", float(cfg.options.get("tolerances.h1_drift", 1e-6)))
    traj.save(cfg.out_dir / "snapshots")


def _run_peakon(cfg, rec):
    from .dynamics import PeakonState, peakon_vs_pde

    width = float(cfg.options["peakon.width_x"])
    p = float(cfg.options["peakon.momentum"])
    q0 = float(cfg.options.get("peakon.position_x", -0.25 * cfg.grid.length / 2))
    cmp_ = peakon_vs_pde(PeakonState([q0], [p]), width, cfg.solver, cfg.grid)
    rec.results.update(cmp_.to_dict())
    rec.check("peakon_distance", cmp_.max_relative, "<", float(cfg.options.get("tolerances.peakon", 5e-2)))


def _run_inflation(cfg, rec):
    from .lagrangian import inflation_experiment

    rep = inflation_experiment(cfg.params, cfg.grid, cfg.solver)
    rep.write_json(cfg.out_dir / "inflation.json")
    rep.write_csv(cfg.out_dir / "inflation.csv")
    rec.results.update(_clean({k: v for k, v in rep.to_dict().items()}))
    rec.status = "ok" if rep.status == "ok" else rep.status
    t_max = 0.2 / cfg.params.log_n
    rec.check("jacobian_min", rep.jacobian_min, ">=", 0.5)
    rec.check("jacobian_max", rep.jacobian_max, "<=", 2.0)
    for t, r in rep.growth_ratios(t_max):
        rec.check(f"growth_ratio[t={t:.6g}]", r, "in", 0.7, upper=1.3)
    for row in rep.correction_margins(t_max):
        for key in ("r1", "f", "e_drift"):
            rec.check(f"margin_{key}[t={row['t']:.6g}]", row[key], ">=", 5.0)


_RUNNERS = {
    "verify-lp": _run_verify_lp,
    "verify-data": _run_verify_data,
    "lemma31": _run_lemma31,
    "lemma32": _run_lemma32,
    "ch-variant": _run_ch_variant,
    "evolve": _run_evolve,
    "peakon-compare": _run_peakon,
    "inflation": _run_inflation,
}


def run(cfg, mem_ceiling=None, threads=None):
    """Execute one experiment, write ``record.json`` and return the record."""
    need = guard_memory(cfg, mem_ceiling)
    if threads:
        set_threads(threads)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    rec = ReportRecord(cfg.name, _clean(cfg.echo()))
    proc = psutil.Process()
    t0 = time.perf_counter()
    try:
        _RUNNERS[cfg.name](cfg, rec)
    except Exception as exc:  # partial record, then propagate
        rec.status = f"error: {type(exc).__name__}: {exc}"
        _finish(rec, cfg, t0, proc, need)
        raise
    _finish(rec, cfg, t0, proc, need)
    return rec


def _finish(rec, cfg, t0, proc, need):
    rec.telemetry = {
        "wall_s": time.perf_counter() - t0,
        "rss_bytes": proc.memory_info().rss,
        "estimated_bytes": need,
        "pid": os.getpid(),
    }
    (cfg.out_dir / "record.json").write_text(rec.to_json())


# -------------------------------------------------------------------- sweep

STABILITY_KEYS = {
    "lemma31": ("high", "low_lipschitz", "besov"),
    "lemma32": ("ratio_cube",),
    "ch-variant": ("besov", "lower"),
}


@dataclass
class CorpusReport:
    records: list
    verdicts: list
    failures: list

    @property
    def passed(self):
        return not self.failures and all(r.passed for r in self.records) and all(v.passed for v in self.verdicts)

    def to_dict(self):
        return {
            "records": [r.to_dict() for r in self.records],
            "verdicts": [asdict(v) for v in self.verdicts],
            "failures": self.failures,
            "passed": self.passed,
        }


def stability_verdicts(records, factor=3.0):
    """max/min of each tracked constant across same-experiment records must stay below ``factor``."""
    out = []
    by_name = {}
    for r in records:
        by_name.setdefault(r.experiment, []).append(r)
    for name, recs in by_name.items():
        for key in STABILITY_KEYS.get(name, ()):
            vals = [r.results[key] for r in recs if key in r.results]
            if len(vals) < 2:
                continue
            lo, hi = min(vals), max(vals)
            spread = hi / lo if lo > 0 else math.inf
            out.append(Verdict.judge(f"{name}.{key}_spread", spread, "<", factor))
    return out


def sweep(configs, mem_ceiling=None, threads=None):
    """Run members one after another (the memory guard rarely admits two large
    members at once), then judge cross-run stability."""
    records, failures = [], []
    for cfg in configs:
        try:
            records.append(run(cfg, mem_ceiling, threads))
        except Exception as exc:
            failures.append(f"{cfg.name} -> {cfg.out_dir}: {type(exc).__name__}: {exc}")
    return CorpusReport(records, stability_verdicts(records), failures)

