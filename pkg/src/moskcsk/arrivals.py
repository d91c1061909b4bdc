"""Mean molecule counts at the tagged receiver.

Every interferer is assumed to send the same symbol history as the desired
transmitter, so the interference intensity depends on the interferer only
through its distance, ``r -> z(k, r)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelDomainError, ChannelParams, SlotGrid, cir_matrix
from .modulation import ModulationScheme, SymbolHistory

__all__ = [
    "LinkConfig",
    "ArrivalDecomposition",
    "RadialIntensity",
    "mean_arrival",
    "decompose",
]


@dataclass(frozen=True)
class LinkConfig:
    """Desired link: distance, slot grid, alphabet, history and physics."""

    r_star: float
    grid: SlotGrid
    scheme: ModulationScheme
    history: SymbolHistory
    params: ChannelParams

    def __post_init__(self):
        if not self.r_star > self.params.r_rx:
            raise ChannelDomainError(
                f"r_star={self.r_star} must exceed receiver radius {self.params.r_rx}"
            )
        self.history.validate(self.scheme.M, self.grid.L)

    def with_symbol(self, m: int) -> "LinkConfig":
        return LinkConfig(self.r_star, self.grid, self.scheme, self.history.with_current(m), self.params)

    def emissions(self) -> np.ndarray:
        return self.history.emissions(self.scheme, self.grid.L)

    def intensity(self) -> "RadialIntensity":
        return RadialIntensity(self.grid, self.params, self.emissions())


class RadialIntensity:
    """The kernel ``r -> sum_l h_r[l] * u[k-l]`` for a fixed emission pattern.

    Callable on scalars or arrays of distances (um).
    """

    def __init__(self, grid: SlotGrid, params: ChannelParams, emissions):
        self.grid = grid
        self.params = params
        self.emissions = np.asarray(emissions, dtype=float)
        if self.emissions.shape != (grid.L + 1,):
            raise ValueError(f"need {grid.L + 1} emission counts, got {self.emissions.shape}")
        if np.any(self.emissions < 0):
            raise ValueError("emission counts must be non-negative")

    @property
    def r_min(self) -> float:
        return self.params.r_rx

    @property
    def is_zero(self) -> bool:
        return not np.any(self.emissions > 0)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        flat = r.reshape(-1)
        if self.is_zero:
            out = np.zeros(flat.shape)
        else:
            # skip taps with zero emissions to save erfc evaluations
            nz = np.flatnonzero(self.emissions)
            h = cir_matrix(SlotGrid(self.grid.T_s, int(nz[-1])), flat, self.params)
            out = h[:, nz] @ self.emissions[nz]
        out = out.reshape(r.shape)
        return out[()] if out.ndim == 0 else out

    def __repr__(self):
        return f"RadialIntensity(T_s={self.grid.T_s}, emissions={self.emissions.tolist()}, params={self.params})"


def mean_arrival(history: SymbolHistory, r, grid: SlotGrid, scheme: ModulationScheme, params: ChannelParams):
    """Expected molecules absorbed in slot ``k`` from one transmitter at distance ``r``."""
    return RadialIntensity(grid, params, history.emissions(scheme, grid.L))(r)


@dataclass(frozen=True)
class ArrivalDecomposition:
    """Poisson mean split into desired, ISI and an MUI intensity kernel."""

    desired: float
    isi: float
    mui: RadialIntensity

    @property
    def total_desired_link(self) -> float:
        return self.desired + self.isi


def decompose(cfg: LinkConfig, k_history: SymbolHistory | None = None) -> ArrivalDecomposition:
    history = cfg.history if k_history is None else k_history
    history.validate(cfg.scheme.M, cfg.grid.L)
    u = history.emissions(cfg.scheme, cfg.grid.L)
    h = cir_matrix(cfg.grid, [cfg.r_star], cfg.params)[0]
    desired = float(h[0] * u[0])
    isi = float(np.dot(h[1:], u[1:]))
    return ArrivalDecomposition(desired, isi, RadialIntensity(cfg.grid, cfg.params, u))
