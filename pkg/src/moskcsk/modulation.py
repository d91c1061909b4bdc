"""M-ary CSK alphabets, threshold decoding and symbol histories."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "ModulationScheme",
    "SymbolHistory",
    "emission_count",
    "decode",
    "bit_rate",
    "ook",
    "bcsk",
    "qcsk",
]

#: Series truncation limit for the analytical count sums.
TAU_MAX = 200


@dataclass(frozen=True)
class ModulationScheme:
    """Emission counts, decision thresholds and priors for one CSK link.

    ``thresholds`` has ``M + 1`` entries ``tau_0 = 0 <= tau_1 <= ... <= tau_M``.
    Symbol ``m`` owns the half-open count region ``[tau_m, tau_{m+1})`` except
    the top symbol, whose region is unbounded; ``tau_M`` only caps the
    analytical series.
    """

    emissions: tuple
    thresholds: tuple
    priors: tuple = None
    name: str = ""

    def __post_init__(self):
        emissions = tuple(int(q) for q in self.emissions)
        thresholds = tuple(int(t) for t in self.thresholds)
        M = len(emissions)
        if M < 2:
            raise ValueError("alphabet needs at least two symbols")
        if any(q < 0 for q in emissions):
            raise ValueError("emission counts must be non-negative")
        if len(thresholds) != M + 1:
            raise ValueError(f"expected {M + 1} thresholds, got {len(thresholds)}")
        if thresholds[0] != 0:
            raise ValueError("tau_0 must be 0")
        if any(b < a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError("thresholds must be non-decreasing")
        priors = self.priors
        if priors is None:
            priors = (1.0 / M,) * M
        priors = tuple(float(x) for x in priors)
        if len(priors) != M or any(x < 0 for x in priors):
            raise ValueError("priors must be M non-negative numbers")
        if abs(sum(priors) - 1.0) > 1e-12:
            raise ValueError(f"priors must sum to 1, got {sum(priors)!r}")
        object.__setattr__(self, "emissions", emissions)
        object.__setattr__(self, "thresholds", thresholds)
        object.__setattr__(self, "priors", priors)

    @property
    def M(self) -> int:
        return len(self.emissions)

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.M)))

    def with_threshold(self, index: int, value: int) -> "ModulationScheme":
        th = list(self.thresholds)
        th[index] = int(value)
        return ModulationScheme(self.emissions, tuple(th), self.priors, self.name)

    def with_emission(self, index: int, value: int) -> "ModulationScheme":
        em = list(self.emissions)
        em[index] = int(value)
        return ModulationScheme(tuple(em), self.thresholds, self.priors, self.name)

    def region(self, m: int, inclusive_upper: bool = False) -> tuple[int, float]:
        """Count range ``(lo, hi)`` decoded as symbol ``m``; ``hi`` is exclusive.

        With ``inclusive_upper`` the literal ``tau_m..tau_{m+1}`` sums are
        reproduced, including the top boundary ``tau_M``.
        """
        lo = self.thresholds[m]
        if inclusive_upper:
            return lo, self.thresholds[m + 1] + 1
        if m == self.M - 1:
            return lo, math.inf
        return lo, self.thresholds[m + 1]


def ook(q1: int = 50, tau1: int = 10, tau_max: int = TAU_MAX) -> ModulationScheme:
    return ModulationScheme((0, q1), (0, tau1, tau_max), name="OOK")


def bcsk(q0: int = 20, q1: int = 80, tau1: int = 30, tau_max: int = TAU_MAX) -> ModulationScheme:
    return ModulationScheme((q0, q1), (0, tau1, tau_max), name="BCSK")


def qcsk(
    emissions: Sequence[int] = (0, 20, 40, 60),
    taus: Sequence[int] = (10, 20, 40),
    tau_max: int = TAU_MAX,
) -> ModulationScheme:
    return ModulationScheme(tuple(emissions), (0, *taus, tau_max), name="QCSK")


@dataclass(frozen=True)
class SymbolHistory:
    """Symbols for slots ``k-L .. k``; the current symbol is last."""

    symbols: tuple = field(default_factory=tuple)

    def __post_init__(self):
        syms = tuple(int(s) for s in self.symbols)
        if not syms:
            raise ValueError("history must contain at least the current symbol")
        if any(s < 0 for s in syms):
            raise ValueError("symbol indices must be non-negative")
        object.__setattr__(self, "symbols", syms)

    @property
    def current(self) -> int:
        return self.symbols[-1]

    def __len__(self):
        return len(self.symbols)

    def validate(self, M: int, L: int | None = None) -> None:
        if any(s >= M for s in self.symbols):
            raise ValueError(f"symbol index out of range for M={M}")
        if L is not None and len(self.symbols) > L + 1:
            raise ValueError(f"history of length {len(self.symbols)} exceeds L+1={L + 1}")

    def emissions(self, scheme: ModulationScheme, L: int) -> np.ndarray:
        """Molecule counts ``u[k-l]`` ordered by lag ``l = 0..L``.

        Slots before the history starts emit nothing.
        """
        self.validate(scheme.M, L)
        u = np.zeros(L + 1)
        for lag, s in enumerate(reversed(self.symbols)):
            u[lag] = scheme.emissions[s]
        return u

    def with_current(self, m: int) -> "SymbolHistory":
        return SymbolHistory(self.symbols[:-1] + (int(m),))

    @classmethod
    def from_bits(cls, bits: str, M: int = 2) -> "SymbolHistory":
        """Group a bit string MSB-first into ``log2(M)``-bit symbols."""
        k = int(round(math.log2(M)))
        if 2**k != M:
            raise ValueError(f"M={M} is not a power of two")
        bits = bits.strip()
        if len(bits) % k:
            raise ValueError(f"{len(bits)} bits do not split into {k}-bit symbols")
        return cls(tuple(int(bits[i : i + k], 2) for i in range(0, len(bits), k)))


def emission_count(scheme: ModulationScheme, symbol_index: int) -> int:
    if not 0 <= symbol_index < scheme.M:
        raise IndexError(f"symbol {symbol_index} outside alphabet of size {scheme.M}")
    return scheme.emissions[symbol_index]


def decode(count, scheme: ModulationScheme):
    """Map received counts to symbol indices with half-open regions.

    Works on scalars or arrays; counts at or above ``tau_{M-1}`` decode to the
    top symbol.
    """
    inner = np.asarray(scheme.thresholds[1:-1])
    out = np.searchsorted(inner, count, side="right")
    return int(out) if np.ndim(out) == 0 else out


def bit_rate(N: int, M: int) -> int:
    """Bits per symbol period for ``N`` parallel links of ``M``-ary CSK."""
    if N < 1:
        raise ValueError("need at least one link")
    k = int(round(math.log2(M))) if M >= 2 else -1
    if M < 2 or 2**k != M:
        raise ValueError(f"M={M} is not a power of two >= 2")
    return N * k
