"""Analytical symbol error probabilities for a tagged receiver in a PPP field.

The received count is Poisson given the interferer field, so unconditionally
it is a mixed Poisson variable.  Its probability mass follows from the
Laplace functional of the field through Faa di Bruno's formula:

    P(N = n) = exp(-p_total) * B_n(p_1, p_2, ...) / n!

with ``p_i = 4 pi lam int exp(-z) z^i r^2 dr`` and
``p_total = 4 pi lam int (1 - exp(-z)) r^2 dr``.  We integrate
``p_i / i!`` directly (a Poisson pmf in ``z``), which keeps every quantity
bounded up to the series limit.
"""
from __future__ import annotations

import enum
import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, stats
from scipy.special import gammaln

from .arrivals import LinkConfig, RadialIntensity, decompose
from .bell import scaled_bell_series
from .modulation import TAU_MAX

__all__ = [
    "DesiredMode",
    "FieldConfig",
    "ErrorReport",
    "CountDistribution",
    "NumericalConvergenceError",
    "ser_single_pair",
    "p_integral",
    "scaled_p_integrals",
    "laplace_functional",
    "count_distribution",
    "ser_multi",
    "symbol_error",
    "miss_probability",
    "miss_probability_curve",
]

FOUR_PI = 4.0 * math.pi
QUAD_EPSABS = 1e-10
ENVELOPE_RTOL = 1e-12
SERIES_TAIL_WARN = 1e-8


class NumericalConvergenceError(ArithmeticError):
    """Quadrature failed to reach its tolerance."""


class DesiredMode(str, enum.Enum):
    IN_PPP = "in_ppp"
    FIXED_AT_R_STAR = "fixed_at_r_star"


@dataclass(frozen=True)
class FieldConfig:
    """Interferer field around the tagged receiver.

    Attributes
    ----------
    lam : float
        PPP density in 1/um^3.
    r_min : float, optional
        Inner radius of the field; defaults to the receiver radius.
    r_max_integration : float
        Starting truncation radius for the radial integrals (um).
    auto_extend : bool
        If true the truncation radius is doubled until the integrand envelope
        ``4 pi lam r^2 z(r)`` drops below ``1e-12`` of its peak, and the
        remaining tail is bounded in the diagnostics.  If false the field is
        a finite ball of radius ``r_max_integration`` (the geometry the PPP
        simulator samples).
    desired_mode : DesiredMode
        ``in_ppp``: the desired transmitter is one of the PPP points.
        ``fixed_at_r_star``: it sits at the link distance in addition to the PPP.
    """

    lam: float
    r_min: float | None = None
    r_max_integration: float = 1000.0
    auto_extend: bool = True
    desired_mode: DesiredMode = DesiredMode.IN_PPP

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"density must be non-negative, got {self.lam}")
        if self.r_min is not None and not self.r_min > 0:
            raise ValueError("r_min must be positive")
        lo = self.r_min if self.r_min is not None else 0.0
        if not self.r_max_integration > lo:
            raise ValueError("r_max_integration must exceed r_min")
        object.__setattr__(self, "desired_mode", DesiredMode(self.desired_mode))

    def inner_radius(self, intensity: RadialIntensity) -> float:
        return intensity.r_min if self.r_min is None else self.r_min


@dataclass
class ErrorReport:
    per_symbol: list
    weighted: float
    diagnostics: dict = field(default_factory=dict)


def ser_single_pair(m: int, cfg: LinkConfig, inclusive_upper: bool = False) -> float:
    """Error probability of symbol ``m`` for an isolated source-sink pair.

    The count is Poisson with the desired-plus-ISI mean at ``cfg.r_star``.
    """
    c = cfg.with_symbol(m)
    dec = decompose(c)
    lam = dec.desired + dec.isi
    lo, hi = c.scheme.region(m, inclusive_upper)
    below = stats.poisson.cdf(lo - 1, lam) if lo > 0 else 0.0
    above = stats.poisson.sf(hi - 1, lam) if math.isfinite(hi) else 0.0
    return float(min(1.0, max(0.0, below + above)))


def _breakpoints(r_lo: float, r_hi: float) -> list:
    # geometric refinement next to the receiver surface where z is steepest
    span = r_hi - r_lo
    pts = [r_lo + span * 2.0**-k for k in range(1, 25)]
    return sorted(p for p in pts if r_lo < p < r_hi)


def _envelope_radius(intensity: RadialIntensity, lam: float, r_lo: float, r_hi: float, auto_extend: bool):
    """Outer radius where ``4 pi lam r^2 z`` is negligible, plus the tail bound."""
    if not auto_extend:
        return r_hi, 0.0
    grid = r_lo + np.geomspace(1e-6, r_hi - r_lo, 400)
    env = FOUR_PI * lam * grid**2 * intensity(grid)
    peak = float(env.max())
    if peak == 0.0:
        return r_hi, 0.0
    for _ in range(40):
        edge = FOUR_PI * lam * r_hi**2 * float(intensity(r_hi))
        if edge <= ENVELOPE_RTOL * peak:
            break
        r_hi *= 2.0
    else:
        raise NumericalConvergenceError("intensity envelope does not decay")
    tail, _ = integrate.quad(
        lambda r: FOUR_PI * lam * r * r * float(intensity(r)), r_hi, np.inf, limit=200
    )
    return r_hi, tail


def _radial_integral(func: Callable, intensity: RadialIntensity, field: FieldConfig):
    """``4 pi lam int func(z(r)) r^2 dr`` over the field, vector-valued ``func``.

    Returns ``(values, abs_error_estimate, outer_radius, tail_bound)``.
    ``tail_bound`` bounds any integrand with ``|func(z)| <= z``.
    """
    r_lo = field.inner_radius(intensity)
    r_hi, tail = _envelope_radius(intensity, field.lam, r_lo, field.r_max_integration, field.auto_extend)

    def integrand(r):
        z = float(intensity(r))
        return FOUR_PI * field.lam * r * r * func(z)

    val, err, info = integrate.quad_vec(
        integrand,
        r_lo,
        r_hi,
        epsabs=QUAD_EPSABS,
        epsrel=1e-12,
        norm="max",
        points=_breakpoints(r_lo, r_hi),
        limit=20000,
        full_output=True,
    )
    if not info.success:
        raise NumericalConvergenceError(
            f"radial quadrature did not converge (error estimate {err:.3e})"
        )
    return np.atleast_1d(val), float(err), r_hi, tail


def _poisson_pmf_vector(z: float, n_max: int) -> np.ndarray:
    """``[1 - exp(-z), pmf(1; z), ..., pmf(n_max; z)]``."""
    out = np.empty(n_max + 1)
    out[0] = -math.expm1(-z)
    i = np.arange(1, n_max + 1)
    if z == 0.0:
        out[1:] = 0.0
    else:
        out[1:] = np.exp(i * math.log(z) - z - gammaln(i + 1))
    return out


def scaled_p_integrals(field: FieldConfig, intensity: RadialIntensity, n_max: int):
    """``p_total`` and ``p_i / i!`` for ``i = 1..n_max``, plus quadrature diagnostics."""
    if field.lam == 0.0 or intensity.is_zero:
        return 0.0, np.zeros(n_max), {"quad_error": 0.0, "outer_radius": field.r_max_integration, "truncation_tail": 0.0}
    vals, err, r_hi, tail = _radial_integral(lambda z: _poisson_pmf_vector(z, n_max), intensity, field)
    diag = {"quad_error": err, "outer_radius": r_hi, "truncation_tail": tail}
    return float(vals[0]), vals[1:], diag


def p_integral(i: int, field: FieldConfig, intensity: RadialIntensity) -> float:
    """``p_i = 4 pi lam int exp(-z) z^i r^2 dr`` (unscaled).

    Overflows to ``inf`` once ``z^i`` does; the error analysis uses
    :func:`scaled_p_integrals` instead.
    """
    if i < 1:
        raise ValueError("order must be >= 1")
    if field.lam == 0.0 or intensity.is_zero:
        return 0.0
    vals, _, _, _ = _radial_integral(lambda z: np.array([math.exp(-z) * z**i]), intensity, field)
    return float(vals[0])


def laplace_functional(rho: float, field: FieldConfig, intensity: RadialIntensity) -> float:
    """``E[exp(-rho Z)]`` for the PPP shot-noise sum ``Z``."""
    if rho < 0:
        raise ValueError("rho must be non-negative")
    if rho == 0.0 or field.lam == 0.0 or intensity.is_zero:
        return 1.0
    vals, _, _, _ = _radial_integral(lambda z: np.array([-math.expm1(-rho * z)]), intensity, field)
    return math.exp(-float(vals[0]))


@dataclass
class CountDistribution:
    """Mass function of the received count on ``0..n_max``."""

    pmf: np.ndarray
    log_prefactor: float
    diagnostics: dict

    @property
    def n_max(self) -> int:
        return len(self.pmf) - 1

    @property
    def tail_mass(self) -> float:
        """``P(N > n_max)``."""
        return max(0.0, 1.0 - float(self.pmf.sum()))

    def prob_range(self, lo: int, hi: float) -> float:
        """``P(lo <= N < hi)``; ``hi`` may be ``inf``."""
        if math.isinf(hi):
            return 1.0 - float(self.pmf[:lo].sum())
        hi = int(hi)
        if hi - 1 > self.n_max:
            raise ValueError(f"range reaches {hi - 1} beyond series limit {self.n_max}")
        return float(self.pmf[lo:hi].sum()) if hi > lo else 0.0

    def cdf_below(self, tau: int) -> float:
        """``P(N < tau)``."""
        return float(self.pmf[:tau].sum())


def count_distribution(
    intensity: RadialIntensity,
    field: FieldConfig,
    n_max: int = TAU_MAX,
    z_star: float = 0.0,
) -> CountDistribution:
    """Mixed-Poisson mass of the count from a PPP field plus a fixed mean ``z_star``.

    A deterministic contribution ``z_star`` multiplies the Laplace functional
    by ``exp(-rho z_star)``, i.e. adds ``z_star`` to ``p_1`` and a factor
    ``exp(-z_star)`` to the prefactor.
    """
    p_total, p_scaled, diag = scaled_p_integrals(field, intensity, n_max)
    p_scaled = p_scaled.copy()
    if n_max >= 1:
        p_scaled[0] += z_star
    log_pref = -(p_total + z_star)
    T = scaled_bell_series(p_scaled, n_max, prescaled=True) if log_pref > -600.0 else None
    if T is None or not np.all(np.isfinite(T)):
        # large means: log-space evaluation of the same recurrence
        pmf = _pmf_log_space(p_scaled, n_max, log_pref)
    else:
        with np.errstate(under="ignore"):
            pmf = T * math.exp(log_pref)
    diag = dict(diag, p_total=p_total, z_star=z_star)
    dist = CountDistribution(pmf, log_pref, diag)
    dist.diagnostics["series_tail_mass"] = dist.tail_mass
    return dist


def _pmf_log_space(p_scaled: np.ndarray, n_max: int, log_pref: float) -> np.ndarray:
    # all terms are non-negative, so log-sum-exp needs no sign tracking
    c = p_scaled * np.arange(1, n_max + 1)
    with np.errstate(divide="ignore"):
        logc = np.log(c)
    logP = np.full(n_max + 1, -np.inf)
    logP[0] = log_pref
    for n in range(n_max):
        terms = logc[: n + 1] + logP[n::-1]
        mx = terms.max()
        if mx == -np.inf:
            continue
        logP[n + 1] = mx + math.log(np.exp(terms - mx).sum()) - math.log(n + 1)
    return np.exp(logP)


def _field_distribution(cfg: LinkConfig, field: FieldConfig, n_max: int) -> CountDistribution:
    dec = decompose(cfg)
    z_star = dec.desired + dec.isi if field.desired_mode is DesiredMode.FIXED_AT_R_STAR else 0.0
    key = (cfg.grid, cfg.params, tuple(dec.mui.emissions.tolist()))
    return _cached_distribution(key, field, n_max, z_star)


@functools.lru_cache(maxsize=512)
def _cached_distribution(key, field, n_max, z_star):
    # threshold sweeps re-use one series; callers must not mutate the result
    grid, params, emissions = key
    return count_distribution(RadialIntensity(grid, params, emissions), field, n_max, z_star)


def _series_limit(cfg: LinkConfig, inclusive_upper: bool) -> int:
    return cfg.scheme.thresholds[-1] + (1 if inclusive_upper else 0)


def ser_multi(m: int, cfg: LinkConfig, field: FieldConfig, inclusive_upper: bool = False) -> float:
    """Error probability of symbol ``m`` with ISI and PPP interference."""
    return _ser_multi(m, cfg, field, inclusive_upper)[0]


def _ser_multi(m, cfg, field, inclusive_upper):
    c = cfg.with_symbol(m)
    dist = _field_distribution(c, field, _series_limit(c, inclusive_upper))
    lo, hi = c.scheme.region(m, inclusive_upper)
    err = 1.0 - dist.prob_range(lo, hi)
    # with an open top region the mass beyond tau_M never enters the result
    if inclusive_upper and dist.tail_mass > SERIES_TAIL_WARN:
        warnings.warn(
            f"count mass beyond series limit {dist.n_max} is {dist.tail_mass:.2e}",
            RuntimeWarning,
            stacklevel=3,
        )
    return min(1.0, max(0.0, err)), dist.diagnostics


def symbol_error(cfg: LinkConfig, field: FieldConfig | None = None, mode: str = "multi",
                 inclusive_upper: bool = False) -> ErrorReport:
    """Prior-weighted symbol error for the configured history."""
    per, diags = [], []
    for m in range(cfg.scheme.M):
        if mode == "single":
            per.append(ser_single_pair(m, cfg, inclusive_upper))
        elif mode == "multi":
            if field is None:
                raise ValueError("multi mode needs a FieldConfig")
            e, d = _ser_multi(m, cfg, field, inclusive_upper)
            per.append(e)
            diags.append(d)
        else:
            raise ValueError(f"unknown mode {mode!r}")
    weighted = float(sum(p * e for p, e in zip(cfg.scheme.priors, per)))
    diagnostics = {"mode": mode, "inclusive_upper": inclusive_upper}
    if diags:
        diagnostics["series_tail_mass"] = max(d["series_tail_mass"] for d in diags)
        diagnostics["truncation_tail"] = max(d["truncation_tail"] for d in diags)
        diagnostics["quad_error"] = max(d["quad_error"] for d in diags)
    return ErrorReport(per, min(1.0, max(0.0, weighted)), diagnostics)


def miss_probability(cfg: LinkConfig, field: FieldConfig, tau_1: int) -> float:
    """``P(N < tau_1)`` when the desired and all interfering transmitters send bit 1."""
    if cfg.scheme.M != 2:
        raise ValueError("miss probability is defined for binary schemes")
    if tau_1 <= 0:
        return 0.0
    # share one cached series across thresholds up to tau_M
    dist = _field_distribution(cfg.with_symbol(1), field, max(int(tau_1) - 1, cfg.scheme.thresholds[-1]))
    return min(1.0, max(0.0, dist.cdf_below(int(tau_1))))


def miss_probability_curve(cfg: LinkConfig, field: FieldConfig, taus) -> np.ndarray:
    """:func:`miss_probability` for many thresholds from a single series evaluation."""
    taus = np.asarray(taus, dtype=int)
    n_max = max(int(taus.max()) - 1, 0)
    dist = _field_distribution(cfg.with_symbol(1), field, n_max)
    cum = np.concatenate([[0.0], np.cumsum(dist.pmf)])
    return np.clip(cum[np.clip(taus, 0, None)], 0.0, 1.0)
