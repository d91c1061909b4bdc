"""Simulation oracles: PPP Monte Carlo and particle-based Brownian motion.

Random streams are Philox generators keyed by ``(seed, kind, index)`` through
:class:`numpy.random.SeedSequence`, so every realization (or fixed-size block
of molecules) has its own stream.  Work is split into those fixed units and
reduced in index order, which makes results identical for any worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analysis import DesiredMode, FieldConfig
from .arrivals import LinkConfig, decompose
from .channel import ChannelParams
from .modulation import decode

__all__ = [
    "PppSampleConfig",
    "ParticleConfig",
    "Estimate",
    "ParticleResult",
    "stream",
    "sample_ppp",
    "mc_counts",
    "mc_error_estimate",
    "poisson_counts",
    "poisson_error_estimate",
    "particle_absorbed_fraction",
    "particle_counts",
    "particle_error_estimate",
]

# stream kinds, part of the key so different estimators never share a stream
_PPP, _POISSON, _PARTICLE, _TRIAL = 1, 2, 3, 4

POISSON_CHUNK = 1 << 16
MOLECULE_BLOCK = 1 << 14


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(key))))


@dataclass(frozen=True)
class PppSampleConfig:
    lam: float
    r_min: float = 4.0
    R_a: float = 100.0
    realizations: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("density must be non-negative")
        if not self.R_a > self.r_min > 0:
            raise ValueError("need R_a > r_min > 0")
        if self.realizations < 1:
            raise ValueError("need at least one realization")

    @property
    def mean_points(self) -> float:
        return self.lam * 4.0 / 3.0 * math.pi * (self.R_a**3 - self.r_min**3)


@dataclass(frozen=True)
class ParticleConfig:
    """Brownian particle simulation settings (um, s).

    ``crossing`` adds a Brownian-bridge hit test between steps; by default a
    molecule is absorbed only if a post-step position lies inside the sphere.
    """

    dt: float = 1e-4
    n_molecules: int = 100_000
    t_end: float = 0.2
    r_start: float = 8.0
    params: ChannelParams = ChannelParams(D=100.0)
    seed: int = 0
    crossing: bool = False
    absorbing: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= self.dt:
            raise ValueError("t_end must be at least one step")
        if not self.r_start > self.params.r_rx:
            raise ValueError("molecules must start outside the receiver")
        if self.n_molecules < 0:
            raise ValueError("n_molecules must be non-negative")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int

    @classmethod
    def from_indicators(cls, x) -> "Estimate":
        x = np.asarray(x, dtype=float)
        n = x.size
        p = float(x.mean())
        return cls(p, math.sqrt(max(p * (1.0 - p), 0.0) / n), n)


def sample_ppp(cfg: PppSampleConfig, rng: np.random.Generator) -> np.ndarray:
    """Radii of a homogeneous PPP in the shell ``r_min < r <= R_a``."""
    n = rng.poisson(cfg.mean_points)
    u = rng.random(n)
    a3, b3 = cfg.r_min**3, cfg.R_a**3
    return np.cbrt(a3 + u * (b3 - a3))


def _check_consistent(cfg: LinkConfig, field: FieldConfig, ppp_cfg: PppSampleConfig):
    if field.lam != ppp_cfg.lam:
        raise ValueError(f"field density {field.lam} != sampling density {ppp_cfg.lam}")
    if ppp_cfg.r_min < cfg.params.r_rx:
        raise ValueError("sampling shell starts inside the receiver")


def _ppp_count_chunk(args):
    cfg, field, ppp_cfg, m, start, stop = args
    c = cfg.with_symbol(m)
    dec = decompose(c)
    z_star = dec.desired + dec.isi if field.desired_mode is DesiredMode.FIXED_AT_R_STAR else 0.0
    kernel = dec.mui
    out = np.empty(stop - start, dtype=np.int64)
    for j, i in enumerate(range(start, stop)):
        rng = stream(ppp_cfg.seed, _PPP, m, i)
        radii = sample_ppp(ppp_cfg, rng)
        Z = z_star + (float(kernel(radii).sum()) if radii.size else 0.0)
        out[j] = rng.poisson(Z)
    return out


def _chunks(n: int, size: int):
    return [(s, min(s + size, n)) for s in range(0, n, size)]


def _run(func, tasks, workers: int):
    if workers <= 1 or len(tasks) == 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        # map preserves task order, so the reduction order is fixed
        return list(ex.map(func, tasks))


def mc_counts(cfg: LinkConfig, field: FieldConfig, ppp_cfg: PppSampleConfig, m: int, workers: int = 1) -> np.ndarray:
    """Received counts over PPP realizations when symbol ``m`` is sent by everyone."""
    _check_consistent(cfg, field, ppp_cfg)
    tasks = [(cfg, field, ppp_cfg, m, a, b) for a, b in _chunks(ppp_cfg.realizations, 1000)]
    return np.concatenate(_run(_ppp_count_chunk, tasks, workers))


def mc_error_estimate(cfg: LinkConfig, field: FieldConfig, ppp_cfg: PppSampleConfig, m: int,
                      workers: int = 1) -> Estimate:
    """Symbol error frequency of ``m`` over sampled interferer fields."""
    counts = mc_counts(cfg, field, ppp_cfg, m, workers)
    return Estimate.from_indicators(decode(counts, cfg.scheme) != m)


def _poisson_chunk(args):
    lam, seed, m, index, size = args
    return stream(seed, _POISSON, m, index).poisson(lam, size)


def poisson_counts(cfg: LinkConfig, m: int, draws: int, seed: int = 0, workers: int = 1) -> np.ndarray:
    """Counts drawn from the single-pair Poisson law (no interferers)."""
    dec = decompose(cfg.with_symbol(m))
    lam = dec.desired + dec.isi
    tasks = [(lam, seed, m, k, b - a) for k, (a, b) in enumerate(_chunks(draws, POISSON_CHUNK))]
    return np.concatenate(_run(_poisson_chunk, tasks, workers))


def poisson_error_estimate(cfg: LinkConfig, m: int, draws: int = 1_000_000, seed: int = 0,
                           workers: int = 1) -> Estimate:
    counts = poisson_counts(cfg, m, draws, seed, workers)
    return Estimate.from_indicators(decode(counts, cfg.scheme) != m)


def _absorption_steps(r_start, horizons, params: ChannelParams, dt: float, rng: np.random.Generator,
                      crossing: bool = False, absorbing: bool = True) -> np.ndarray:
    """Step index (1-based) at which each molecule is absorbed, 0 if never.

    Molecule ``i`` is followed for ``horizons[i]`` steps.  Degraded molecules
    are removed and report 0.
    """
    horizons = np.asarray(horizons, dtype=np.int64)
    crossing = crossing and absorbing
    n = horizons.size
    hit = np.zeros(n, dtype=np.int64)
    if n == 0:
        return hit
    # isotropic problem: start every molecule on the +x axis
    pos = np.zeros((n, 3))
    pos[:, 0] = r_start
    idx = np.arange(n)
    hz = horizons.copy()
    sigma = math.sqrt(2.0 * params.D * dt)
    p_deg = -math.expm1(-params.mu_d * dt)
    r_rx2 = params.r_rx**2
    prev_r = np.full(n, float(r_start))
    n_max = int(hz.max())
    for step in range(1, n_max + 1):
        pos += rng.normal(0.0, sigma, size=pos.shape)
        r2 = np.einsum("ij,ij->i", pos, pos)
        if absorbing:
            absorbed = r2 <= r_rx2
            if crossing:
                r = np.sqrt(r2)
                d0 = prev_r - params.r_rx
                d1 = r - params.r_rx
                # tangent-plane Brownian bridge hit probability
                p_hit = np.exp(-d0 * d1 / (params.D * dt))
                absorbed |= rng.random(idx.size) < p_hit
            hit[idx[absorbed]] = step
            keep = ~absorbed
        else:
            keep = np.ones(idx.size, dtype=bool)
        if p_deg > 0.0:
            keep &= rng.random(idx.size) >= p_deg
        keep &= hz > step
        if not keep.all():
            pos = pos[keep]
            idx = idx[keep]
            hz = hz[keep]
            if crossing:
                r = r[keep]
        if idx.size == 0:
            break
        if crossing:
            prev_r = r
    return hit


@dataclass
class ParticleResult:
    """Absorptions per receiver counting interval (one step) and the running fraction."""

    step_counts: np.ndarray
    dt: float
    n_molecules: int

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(1, self.step_counts.size + 1)

    @property
    def cumulative_fraction(self) -> np.ndarray:
        return np.cumsum(self.step_counts) / max(self.n_molecules, 1)

    @property
    def absorbed_fraction(self) -> float:
        return float(self.step_counts.sum()) / max(self.n_molecules, 1)

    @property
    def absorbed_estimate(self) -> Estimate:
        p = self.absorbed_fraction
        n = max(self.n_molecules, 1)
        return Estimate(p, math.sqrt(p * (1.0 - p) / n), n)

    def slot_counts(self, T_s: float) -> np.ndarray:
        per = int(round(T_s / self.dt))
        n_slots = -(-self.step_counts.size // per)
        padded = np.zeros(n_slots * per, dtype=np.int64)
        padded[: self.step_counts.size] = self.step_counts
        return padded.reshape(n_slots, per).sum(axis=1)


def _particle_block(args):
    cfg, block, n = args
    rng = stream(cfg.seed, _PARTICLE, block)
    hit = _absorption_steps(cfg.r_start, np.full(n, cfg.n_steps), cfg.params, cfg.dt, rng,
                            cfg.crossing, cfg.absorbing)
    return np.bincount(hit, minlength=cfg.n_steps + 1)[1:]


def particle_absorbed_fraction(cfg: ParticleConfig, rng: np.random.Generator | None = None,
                               workers: int = 1) -> ParticleResult:
    """Release ``n_molecules`` at ``r_start`` and record absorption times.

    With ``rng`` given, all molecules are walked serially on that generator;
    otherwise blocks of molecules use streams derived from ``cfg.seed``.
    """
    if rng is not None:
        hit = _absorption_steps(cfg.r_start, np.full(cfg.n_molecules, cfg.n_steps), cfg.params, cfg.dt, rng,
                                cfg.crossing, cfg.absorbing)
        counts = np.bincount(hit, minlength=cfg.n_steps + 1)[1:]
    else:
        tasks = [(cfg, k, b - a) for k, (a, b) in enumerate(_chunks(cfg.n_molecules, MOLECULE_BLOCK))]
        counts = np.zeros(cfg.n_steps, dtype=np.int64)
        for c in _run(_particle_block, tasks, workers):
            counts += c
    return ParticleResult(counts, cfg.dt, cfg.n_molecules)


def _trial_block(args):
    cfg, pcfg, m, block, n_trials = args
    c = cfg.with_symbol(m)
    u = c.emissions().astype(np.int64)
    per = int(round(c.grid.T_s / pcfg.dt))
    counts = np.zeros(n_trials, dtype=np.int64)
    lags = [l for l in range(u.size) if u[l] > 0]
    if not lags:
        return counts
    # molecules emitted l slots ago are followed for l + 1 slots
    q = np.concatenate([np.full(u[l] * n_trials, l) for l in lags])
    owner = np.concatenate([np.repeat(np.arange(n_trials), u[l]) for l in lags])
    rng = stream(pcfg.seed, _TRIAL, m, block)
    hit = _absorption_steps(cfg.r_star, (q + 1) * per, c.params, pcfg.dt, rng, pcfg.crossing)
    in_slot = (hit > q * per) & (hit <= (q + 1) * per)
    np.add.at(counts, owner[in_slot], 1)
    return counts


def particle_counts(cfg: LinkConfig, pcfg: ParticleConfig, m: int, trials: int, workers: int = 1,
                    block_trials: int = 16) -> np.ndarray:
    """Per-trial counts in slot ``k`` from particle simulation of the desired link only."""
    per = cfg.grid.T_s / pcfg.dt
    if abs(per - round(per)) > 1e-9 * per:
        raise ValueError("symbol period must be a whole number of steps")
    tasks = [(cfg, pcfg, m, k, b - a) for k, (a, b) in enumerate(_chunks(trials, block_trials))]
    return np.concatenate(_run(_trial_block, tasks, workers))


def particle_error_estimate(cfg: LinkConfig, pcfg: ParticleConfig, trials: int, m: int | None = None,
                            workers: int = 1) -> Estimate:
    """Error frequency of the current symbol (or ``m``) with particle-simulated arrivals."""
    m = cfg.history.current if m is None else m
    counts = particle_counts(cfg, pcfg, m, trials, workers)
    return Estimate.from_indicators(decode(counts, cfg.scheme) != m)
