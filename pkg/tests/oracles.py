"""Independent reference computations used by the tests."""
import numpy as np
from numpy.polynomial.legendre import leggauss


def radial_nodes(r_lo, r_hi, panels=200, order=20):
    """Gauss-Legendre nodes/weights on geometrically graded panels."""
    edges = r_lo + (r_hi - r_lo) * np.concatenate([[0.0], np.geomspace(1e-7, 1.0, panels)])
    x, w = leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x + 0.5 * (b + a)
    weights = 0.5 * (b - a) * w
    return nodes.ravel(), weights.ravel()


def pgf_pmf(kernel, lam, r_lo, r_hi, n_fft=1024, z_star=0.0):
    """Count pmf of a Poisson count mixed over a PPP on the shell [r_lo, r_hi].

    Inverts the generating function
    ``G(s) = exp(z* (s-1) + 4 pi lam int (exp(z(r)(s-1)) - 1) r^2 dr)``
    on the unit circle with an FFT.
    """
    r, w = radial_nodes(r_lo, r_hi)
    z = kernel(r)
    s = np.exp(2j * np.pi * np.arange(n_fft) / n_fft)
    integ = ((np.expm1(np.outer(s - 1.0, z))) * (4 * np.pi * lam * r**2 * w)).sum(axis=1)
    G = np.exp(z_star * (s - 1.0) + integ)
    return np.real(np.fft.fft(G)) / n_fft  # fft uses exp(-2 pi i k n / N)


def shell_integral(f, kernel, lam, r_lo, r_hi):
    r, w = radial_nodes(r_lo, r_hi)
    return float((4 * np.pi * lam * r**2 * f(kernel(r)) * w).sum())
