"""Flat ``key = value`` experiment configuration.

One key per line, ``#`` starts a comment, units are part of the key name.
List values are comma separated; sweep grids also accept ``start:stop:step``
(inclusive stop).  Command-line ``--set key=value`` overrides file keys.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .analysis import DesiredMode, FieldConfig
from .arrivals import LinkConfig
from .channel import ChannelParams, SlotGrid
from .modulation import ModulationScheme, SymbolHistory, TAU_MAX
from .sim import ParticleConfig, PppSampleConfig

MODES = ("channel", "ser-single", "ser-multi", "mc", "particle", "fig3", "fig4", "fig5")
ESTIMATORS = ("analytical", "mc", "particle")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _int_list(s: str) -> tuple:
    s = s.strip()
    return tuple(int(x) for x in s.split(",") if x.strip()) if s else ()


def _float_list(s: str) -> tuple:
    s = s.strip()
    return tuple(float(x) for x in s.split(",") if x.strip()) if s else ()


def _str_list(s: str) -> tuple:
    return tuple(x.strip() for x in s.split(",") if x.strip())


def parse_grid(s: str) -> tuple:
    """``"1,2,5"`` or ``"0:30:1"`` (inclusive) to a tuple of floats."""
    s = s.strip()
    if not s:
        return ()
    if ":" in s:
        parts = [float(x) for x in s.split(":")]
        if len(parts) != 3 or parts[2] == 0:
            raise ConfigError(f"range must be start:stop:step, got {s!r}")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(start + i * step) for i in range(max(n, 0)))
    return _float_list(s)


@dataclass
class ExperimentConfig:
    mode: str = "ser-single"
    # channel
    diffusion_um2_per_s: float = 100.0
    degradation_per_s: float = 0.0
    receiver_radius_um: float = 4.0
    symbol_period_s: float = 0.2
    memory_slots: int = -1  # -1: number of previous symbols
    distance_um: float = 8.0
    # modulation
    emissions: tuple = (0, 50)
    thresholds: tuple = (10,)  # tau_1 .. tau_{M-1}
    tau_max: int = TAU_MAX
    priors: tuple = ()
    previous_bits: str = "01010101"
    inclusive_upper: bool = False
    # field
    density_per_um3: float = 0.0
    field_radius_um: float = 1000.0
    auto_extend: bool = True
    desired_mode: str = "in_ppp"
    # simulation
    ppp_radius_um: float = 100.0
    realizations: int = 10_000
    poisson_draws: int = 100_000
    particle_molecules: int = 100_000
    particle_trials: int = 200
    dt_s: float = 1e-4
    t_end_s: float = 0.2
    crossing: bool = False
    # figure presets
    series_densities: tuple = ()
    series_degradations: tuple = ()
    # run
    estimators: tuple = ("analytical",)
    sweep_param: str = ""
    sweep_values: tuple = ()
    seed: int = 0
    workers: int = 1
    out: str = ""

    # ------------------------------------------------------------------ parsing
    def set(self, key: str, value: str) -> None:
        key = key.strip()
        # sweepable aliases
        if key == "gap_um":
            self.distance_um = self.receiver_radius_um + float(value)
            return
        if key.startswith("tau_") and key[4:].isdigit():
            self._set_threshold(int(key[4:]), int(float(value)))
            return
        if key.startswith("q_") and key[2:].isdigit():
            i = int(key[2:])
            em = list(self.emissions)
            if i >= len(em):
                raise ConfigError(f"{key}: alphabet has only {len(em)} symbols")
            em[i] = int(float(value))
            self.emissions = tuple(em)
            return
        ftypes = {f.name: f for f in fields(self)}
        if key not in ftypes:
            raise ConfigError(f"unknown config key {key!r}")
        default = ftypes[key].default
        try:
            if key == "sweep_values":
                val = parse_grid(value)
            elif key in ("emissions", "thresholds"):
                val = _int_list(value)
            elif key in ("priors", "series_densities", "series_degradations"):
                val = _float_list(value)
            elif key == "estimators":
                val = _str_list(value)
            elif isinstance(default, bool):
                val = _parse_bool(value)
            elif isinstance(default, int):
                val = int(float(value))
            elif isinstance(default, float):
                val = float(value)
            else:
                val = value.strip()
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
        setattr(self, key, val)

    def _set_threshold(self, i: int, v: int) -> None:
        th = list(self.thresholds)
        if i == 0:
            if v != 0:
                raise ConfigError("tau_0 is fixed at 0")
            return
        if i == len(th) + 1:
            self.tau_max = v
            return
        if not 1 <= i <= len(th):
            raise ConfigError(f"tau_{i} outside 1..{len(th) + 1}")
        th[i - 1] = v
        self.thresholds = tuple(th)

    @classmethod
    def from_text(cls, text: str, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        cfg = dataclasses.replace(base) if base is not None else cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
            k, v = line.split("=", 1)
            cfg.set(k, v)
        return cfg

    @classmethod
    def from_file(cls, path, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_text(text, base)

    def to_text(self, exclude: tuple = ()) -> str:
        lines = []
        for f in fields(self):
            if f.name in exclude:
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(_fmt(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = _fmt(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines)

    # --------------------------------------------------------------- validation
    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise ConfigError(f"unknown estimators {bad}; choose from {', '.join(ESTIMATORS)}")
        if self.sweep_param and not self.sweep_values:
            raise ConfigError("sweep_param given without sweep_values")
        vals = np.asarray(self.sweep_values, dtype=float)
        if vals.size > 1:
            d = np.diff(vals)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ConfigError("sweep grid must be strictly monotone")
        if self.desired_mode not in [m.value for m in DesiredMode]:
            raise ConfigError(f"desired_mode must be in_ppp or fixed_at_r_star, got {self.desired_mode!r}")
        for attr in ("realizations", "poisson_draws", "particle_trials", "workers"):
            if getattr(self, attr) < 1:
                raise ConfigError(f"{attr} must be >= 1")
        try:
            self.link()
            self.field()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # ---------------------------------------------------------------- builders
    def channel_params(self) -> ChannelParams:
        return ChannelParams(self.diffusion_um2_per_s, self.degradation_per_s, self.receiver_radius_um)

    def scheme(self) -> ModulationScheme:
        M = len(self.emissions)
        if len(self.thresholds) != M - 1:
            raise ConfigError(f"{M} emissions need {M - 1} inner thresholds, got {len(self.thresholds)}")
        return ModulationScheme(self.emissions, (0, *self.thresholds, self.tau_max), self.priors or None)

    def previous_symbols(self, M: int) -> tuple:
        try:
            return SymbolHistory.from_bits(self.previous_bits + "0" * int(round(math.log2(M))), M).symbols[:-1]
        except ValueError as exc:
            raise ConfigError(f"previous_bits: {exc}") from None

    def link(self, symbol: int = 0) -> LinkConfig:
        sch = self.scheme()
        prev = self.previous_symbols(sch.M)
        L = len(prev) if self.memory_slots < 0 else self.memory_slots
        # only the last L previous symbols reach slot k; a shorter history is padded with silence
        if L == 0:
            prev = ()
        elif L < len(prev):
            prev = prev[-L:]
        grid = SlotGrid(self.symbol_period_s, L)
        return LinkConfig(self.distance_um, grid, sch, SymbolHistory(prev + (symbol,)), self.channel_params())

    def field(self) -> FieldConfig:
        return FieldConfig(
            self.density_per_um3,
            r_max_integration=self.field_radius_um,
            auto_extend=self.auto_extend,
            desired_mode=self.desired_mode,
        )

    def ppp(self) -> PppSampleConfig:
        return PppSampleConfig(self.density_per_um3, self.receiver_radius_um, self.ppp_radius_um,
                               self.realizations, self.seed)

    def particle(self) -> ParticleConfig:
        return ParticleConfig(self.dt_s, self.particle_molecules, self.t_end_s, self.distance_um,
                              self.channel_params(), self.seed, self.crossing)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)  # shortest string that round-trips exactly
    return str(x)
