"""Exponential Bell polynomials and the factorial-scaled series.

The mixed-Poisson count probabilities need ``B_n(p) / n!`` up to ``n = 200``
where ``B_200`` itself overflows a double.  :func:`scaled_bell_series` runs the
complete-Bell recurrence directly on ``T_n = B_n / n!``, and accepts
arguments already divided by ``i!`` so nothing large is ever formed.
"""
from __future__ import annotations

import numpy as np

__all__ = ["incomplete_bell", "complete_bell", "scaled_bell_series"]


def incomplete_bell(n: int, k: int, x) -> float:
    """Partial Bell polynomial ``B_{n,k}(x_1, ..., x_{n-k+1})``.

    ``x[0]`` holds ``x_1``.  Uses
    ``B_{n,k} = sum_i C(n-1, i-1) x_i B_{n-i,k-1}``.
    """
    if n < 0 or k < 0 or k > n:
        raise ValueError(f"invalid Bell indices n={n}, k={k}")
    x = np.asarray(x, dtype=float)
    if n > 0 and k > 0 and len(x) < n - k + 1:
        raise ValueError(f"B_{{{n},{k}}} needs {n - k + 1} arguments, got {len(x)}")
    return float(_partial_table(n, k, x)[n, k])


def _partial_table(n: int, kmax: int, x: np.ndarray) -> np.ndarray:
    # table[j, q] = B_{j,q} for j <= n, q <= kmax; cells with j - q > n - kmax
    # may read the zero padding but never feed into B_{n,kmax}
    if len(x) < n:
        x = np.concatenate([x, np.zeros(n - len(x))])
    table = np.zeros((n + 1, kmax + 1))
    table[0, 0] = 1.0
    for q in range(1, kmax + 1):
        for j in range(q, n + 1):
            acc = 0.0
            binom = 1.0  # C(j-1, i-1), updated by ratio
            for i in range(1, j - q + 2):
                acc += binom * x[i - 1] * table[j - i, q - 1]
                binom = binom * (j - i) / i
            table[j, q] = acc
    return table


def complete_bell(n: int, x) -> float:
    """Complete Bell polynomial ``B_n(x) = sum_{k=0}^{n} B_{n,k}(x)``, ``B_0 = 1``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 1.0
    x = np.asarray(x, dtype=float)
    if len(x) < n:
        raise ValueError(f"B_{n} needs {n} arguments, got {len(x)}")
    return float(_partial_table(n, n, x)[n].sum())


def scaled_bell_series(x, n_max: int, prescaled: bool = False) -> np.ndarray:
    """``T_n = B_n(x) / n!`` for ``n = 0..n_max``.

    Recurrence ``T_{n+1} = (1/(n+1)) sum_{i=0}^{n} (x_{i+1} / i!) T_{n-i}``.

    Parameters
    ----------
    x : array_like
        Arguments ``x_1, x_2, ...`` (``x[0] = x_1``); entries beyond the
        supplied length are treated as zero.
    n_max : int
        Highest index returned.
    prescaled : bool
        If true, ``x[i-1]`` already holds ``x_i / i!``.  This is the form the
        analysis uses, since ``x_i / i!`` stays bounded when ``x_i`` does not.
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    x = np.asarray(x, dtype=float).ravel()
    w = np.zeros(n_max)
    m = min(n_max, len(x))
    w[:m] = x[:m]
    if prescaled:
        # x_{i+1} / i! = (i + 1) * (x_{i+1} / (i+1)!)
        c = w * np.arange(1, n_max + 1)
    else:
        c = w.copy()
        fact = 1.0
        for i in range(1, n_max):
            fact *= i
            c[i] = w[i] / fact
    T = np.zeros(n_max + 1)
    T[0] = 1.0
    for n in range(n_max):
        # c[0..n] against T[n..0]
        T[n + 1] = np.dot(c[: n + 1], T[n::-1]) / (n + 1)
    return T
