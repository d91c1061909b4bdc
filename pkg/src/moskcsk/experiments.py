"""Sweep runners and the CSV result format.

Every runner takes an :class:`ExperimentConfig` and returns a
:class:`SweepResult` whose rows follow the sweep order.  Monte Carlo columns
reuse the configured seed at every sweep point (common random numbers).
"""
from __future__ import annotations

import dataclasses
import functools
import io
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import __version__
from .analysis import _cached_distribution, miss_probability, symbol_error
from .arrivals import LinkConfig
from .channel import absorbed_fraction, cir_vector
from .config import ConfigError, ExperimentConfig
from .modulation import ModulationScheme, decode
from .sim import (
    Estimate,
    mc_counts,
    particle_absorbed_fraction,
    particle_counts,
    poisson_counts,
)

SWEEPABLE = (
    "density_per_um3",
    "degradation_per_s",
    "diffusion_um2_per_s",
    "distance_um",
    "gap_um",
    "symbol_period_s",
    "memory_slots",
    "t_end_s",
    "dt_s",
)


def _is_sweepable(name: str) -> bool:
    if name in SWEEPABLE:
        return True
    for prefix in ("tau_", "q_"):
        if name.startswith(prefix) and name[len(prefix):].isdigit():
            return True
    return False


@dataclass
class SweepResult:
    """Rows of sweep output plus a ``#`` metadata header."""

    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    config_text: str = ""

    def add(self, **values) -> None:
        unknown = set(values) - set(self.columns)
        if unknown:
            raise KeyError(f"unknown columns {sorted(unknown)}")
        self.rows.append(values)

    def column(self, name: str, **where) -> np.ndarray:
        sel = [r for r in self.rows if all(r.get(k) == v for k, v in where.items())]
        return np.array([r.get(name, np.nan) for r in sel], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k, v in self.metadata.items():
            buf.write(f"# {k}: {v}\n")
        for line in self.config_text.splitlines():
            buf.write(f"# config: {line}\n")
        buf.write(",".join(self.columns) + "\n")
        for r in self.rows:
            buf.write(",".join(_fmt_cell(r.get(c)) for c in self.columns) + "\n")
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "SweepResult":
        meta, cfg_lines, body = {}, [], []
        for line in text.splitlines():
            if line.startswith("# config: "):
                cfg_lines.append(line[len("# config: "):])
            elif line.startswith("# "):
                k, _, v = line[2:].partition(": ")
                meta[k] = v
            elif line:
                body.append(line)
        columns = body[0].split(",")
        rows = []
        for line in body[1:]:
            cells = line.split(",")
            rows.append({c: _parse_cell(x) for c, x in zip(columns, cells) if x != ""})
        return cls(columns, rows, meta, "\n".join(cfg_lines))

    def config(self) -> ExperimentConfig:
        """Rebuild the configuration echoed in the header."""
        return ExperimentConfig.from_text(self.config_text)


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _parse_cell(s: str):
    try:
        return float(s)
    except ValueError:
        return s


def _result(cfg: ExperimentConfig, columns: list) -> SweepResult:
    return SweepResult(
        columns,
        metadata={"generator": f"moskcsk {__version__}", "mode": cfg.mode, "seed": cfg.seed},
        config_text=cfg.to_text(exclude=("workers", "out")),
    )


def _combine(estimates: list, priors) -> Estimate:
    mean = sum(p * e.mean for p, e in zip(priors, estimates))
    se = math.sqrt(sum((p * e.stderr) ** 2 for p, e in zip(priors, estimates)))
    return Estimate(float(mean), se, min(e.n for e in estimates))


def _without_thresholds(link: LinkConfig) -> LinkConfig:
    sch = link.scheme
    neutral = ModulationScheme(sch.emissions, (0,) * (sch.M + 1), sch.priors)
    return dataclasses.replace(link, scheme=neutral)


@functools.lru_cache(maxsize=256)
def _cached_ppp_counts(link, fld, ppp, m, workers):
    return mc_counts(link, fld, ppp, m, workers)


@functools.lru_cache(maxsize=256)
def _cached_poisson_counts(link, m, draws, seed):
    return poisson_counts(link, m, draws, seed)


@functools.lru_cache(maxsize=64)
def _cached_particle_counts(link, pcfg, m, trials):
    return particle_counts(link, pcfg, m, trials)


def clear_caches() -> None:
    """Drop memoised sample sets and count distributions."""
    for fn in (_cached_ppp_counts, _cached_poisson_counts, _cached_particle_counts, _cached_distribution):
        fn.cache_clear()


def _counts(kind: str, cfg: ExperimentConfig, m: int) -> np.ndarray:
    """Simulated counts for symbol ``m``; independent of the decision thresholds."""
    link = _without_thresholds(cfg.link(m))
    if kind == "ppp":
        return _cached_ppp_counts(link, cfg.field(), cfg.ppp(), m, cfg.workers)
    if kind == "poisson":
        return _cached_poisson_counts(link, m, cfg.poisson_draws, cfg.seed)
    if kind == "particle":
        return _cached_particle_counts(link, cfg.particle(), m, cfg.particle_trials)
    raise ValueError(kind)


def _estimate(kind: str, cfg: ExperimentConfig) -> Estimate:
    sch = cfg.scheme()
    per = []
    for m in range(sch.M):
        wrong = decode(_counts(kind, cfg, m), sch) != m
        per.append(Estimate.from_indicators(wrong))
    return _combine(per, sch.priors)


def _point(cfg: ExperimentConfig) -> dict:
    """Evaluate the configured mode at one parameter point."""
    row = {}
    est = set(cfg.estimators)
    mode = cfg.mode
    if mode in ("channel", "particle"):
        p = cfg.channel_params()
        if "analytical" in est or mode == "channel":
            row["analytical"] = float(absorbed_fraction(cfg.t_end_s, cfg.distance_um, p))
            if mode == "channel":
                row["h0"] = float(cir_vector(cfg.link().grid, cfg.distance_um, p)[0])
        if "particle" in est or mode == "particle":
            e = particle_absorbed_fraction(cfg.particle(), workers=cfg.workers).absorbed_estimate
            row["particle_mean"], row["particle_stderr"] = e.mean, e.stderr
        return row
    if mode == "ser-single":
        if "analytical" in est:
            row["analytical"] = symbol_error(cfg.link(), mode="single", inclusive_upper=cfg.inclusive_upper).weighted
        if "mc" in est:
            e = _estimate("poisson", cfg)
            row["mc_mean"], row["mc_stderr"] = e.mean, e.stderr
        if "particle" in est:
            e = _estimate("particle", cfg)
            row["particle_mean"], row["particle_stderr"] = e.mean, e.stderr
        return row
    if mode in ("ser-multi", "mc"):
        if "analytical" in est and mode == "ser-multi":
            row["analytical"] = symbol_error(cfg.link(), cfg.field(), "multi", cfg.inclusive_upper).weighted
        if "mc" in est or mode == "mc":
            e = _estimate("ppp", cfg)
            row["mc_mean"], row["mc_stderr"] = e.mean, e.stderr
        return row
    raise ConfigError(f"mode {mode!r} has no generic sweep; use the figure runner")


_VALUE_COLUMNS = ["analytical", "h0", "mc_mean", "mc_stderr", "particle_mean", "particle_stderr"]


def _columns(lead: list, rows: Iterable[dict]) -> list:
    present = set()
    for r in rows:
        present.update(r)
    return lead + [c for c in _VALUE_COLUMNS if c in present]


def _sweep_grid(cfg: ExperimentConfig) -> list:
    if not cfg.sweep_param:
        return [None]
    if not _is_sweepable(cfg.sweep_param):
        raise ConfigError(f"cannot sweep {cfg.sweep_param!r}; sweepable: {', '.join(SWEEPABLE)}, tau_N, q_N")
    return list(cfg.sweep_values)


def _with(cfg: ExperimentConfig, **params) -> ExperimentConfig:
    c = dataclasses.replace(cfg)
    for k, v in params.items():
        c.set(k, _fmt_cell(v))
    return c


def run_generic(cfg: ExperimentConfig) -> SweepResult:
    """Single-parameter sweep of the configured mode."""
    cfg.validate()
    points = []
    for v in _sweep_grid(cfg):
        c = cfg if v is None else _with(cfg, **{cfg.sweep_param: v})
        c.validate()
        row = _point(c)
        if v is not None:
            row[cfg.sweep_param] = v
        points.append(row)
    lead = [cfg.sweep_param] if cfg.sweep_param else []
    res = _result(cfg, _columns(lead, points))
    for r in points:
        res.add(**r)
    return res


# ------------------------------------------------------------------ presets

def fig3_defaults() -> ExperimentConfig:
    c = ExperimentConfig(mode="fig3")
    c.diffusion_um2_per_s = 100.0
    c.degradation_per_s = 0.0
    c.symbol_period_s = 0.2
    c.receiver_radius_um = 4.0
    c.previous_bits = "01010101"
    c.estimators = ("analytical", "mc")
    c.sweep_param = "gap_um"
    c.sweep_values = tuple(float(g) for g in range(2, 13))
    return c


FIG3_SCHEMES = {
    "OOK": {"emissions": "0,50", "thresholds": "10"},
    "BCSK": {"emissions": "20,80", "thresholds": "30"},
    "QCSK": {"emissions": "0,20,40,60", "thresholds": "10,20,40"},
}


def run_fig3(cfg: ExperimentConfig | None = None) -> SweepResult:
    """Single-link SER against transmitter-receiver gap for OOK, BCSK and QCSK."""
    cfg = fig3_defaults() if cfg is None else cfg
    base = dataclasses.replace(cfg, mode="ser-single")
    rows = []
    for name, sch in FIG3_SCHEMES.items():
        c = _with(base, **sch)
        c.priors = ()
        c.validate()
        for g in cfg.sweep_values:
            row = _point(_with(c, gap_um=g))
            rows.append({"scheme": name, "gap_um": g, **row})
    res = _result(cfg, _columns(["scheme", "gap_um"], rows))
    for r in rows:
        res.add(**r)
    return res


def fig4_defaults() -> ExperimentConfig:
    c = ExperimentConfig(mode="fig4")
    c.diffusion_um2_per_s = 100.0
    c.degradation_per_s = 0.0
    c.emissions = (0, 50)
    c.thresholds = (10,)
    c.previous_bits = ""
    c.memory_slots = 0
    c.desired_mode = "in_ppp"
    c.field_radius_um = 100.0
    c.auto_extend = False
    c.series_densities = (0.5e-4, 1e-4, 2e-4)
    c.estimators = ("analytical", "mc")
    c.sweep_param = "tau_1"
    c.sweep_values = tuple(float(t) for t in range(0, 31))
    return c


def run_fig4(cfg: ExperimentConfig | None = None) -> SweepResult:
    """Miss probability against ``tau_1`` for several interferer densities."""
    cfg = fig4_defaults() if cfg is None else cfg
    rows = []
    for lam in cfg.series_densities:
        c = _with(cfg, density_per_um3=lam)
        c.mode = "ser-multi"
        c.validate()
        link = c.link(1)
        fld = c.field()
        counts = _counts("ppp", c, 1) if "mc" in c.estimators else None
        for t in cfg.sweep_values:
            tau = int(t)
            row = {"density_per_um3": lam, "tau_1": t}
            if "analytical" in c.estimators:
                row["analytical"] = miss_probability(link, fld, tau)
            if counts is not None:
                e = Estimate.from_indicators(counts < tau)
                row["mc_mean"], row["mc_stderr"] = e.mean, e.stderr
            rows.append(row)
    res = _result(cfg, _columns(["density_per_um3", "tau_1"], rows))
    for r in rows:
        res.add(**r)
    return res


def fig5_defaults() -> ExperimentConfig:
    c = ExperimentConfig(mode="fig5")
    c.diffusion_um2_per_s = 1000.0
    c.density_per_um3 = 1e-4
    c.previous_bits = "010101010"
    c.memory_slots = 5
    c.desired_mode = "in_ppp"
    c.field_radius_um = 100.0
    c.auto_extend = False
    c.series_degradations = (0.0, 1.0)
    c.estimators = ("analytical", "mc")
    c.sweep_param = "tau_1"
    c.sweep_values = tuple(float(t) for t in range(0, 201, 5))
    return c


FIG5_SCHEMES = {
    "OOK": {"emissions": "0,50", "thresholds": "10"},
    "BCSK": {"emissions": "10,50", "thresholds": "10"},
}


def run_fig5(cfg: ExperimentConfig | None = None) -> SweepResult:
    """Multi-source SER against ``tau_1`` for OOK/BCSK with and without degradation."""
    cfg = fig5_defaults() if cfg is None else cfg
    rows = []
    for name, sch in FIG5_SCHEMES.items():
        for mu in cfg.series_degradations:
            c = _with(cfg, degradation_per_s=mu, **sch)
            c.mode = "ser-multi"
            c.priors = ()
            for t in cfg.sweep_values:
                ct = _with(c, tau_1=t)
                ct.validate()
                row = {"scheme": name, "degradation_per_s": mu, "tau_1": t, **_point(ct)}
                rows.append(row)
    res = _result(cfg, _columns(["scheme", "degradation_per_s", "tau_1"], rows))
    for r in rows:
        res.add(**r)
    return res


PRESETS = {"fig3": fig3_defaults, "fig4": fig4_defaults, "fig5": fig5_defaults}
RUNNERS = {"fig3": run_fig3, "fig4": run_fig4, "fig5": run_fig5}


def run(cfg: ExperimentConfig) -> SweepResult:
    cfg.validate()
    runner = RUNNERS.get(cfg.mode, run_generic)
    return runner(cfg)
