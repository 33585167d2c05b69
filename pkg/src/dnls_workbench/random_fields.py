"""Seeded smooth test fields.

Band-limited Fourier sums under a Gaussian envelope: smooth enough that
tenth-power products stay resolved on the reference grid, decaying fast enough
at the box ends that every decay precondition downstream holds at machine
level. Used by randomized invariance tests and the CLI verification suites.
"""

from __future__ import annotations

import numpy as np
from scipy import fft as _fft

from .spectral_core import Grid, GridFunction, lp_norm

__all__ = ["random_smooth_field"]


def random_smooth_field(
    grid: Grid,
    seed: int,
    *,
    amplitude: float = 1.0,
    envelope_width: float = 8.0,
    band_fraction: float = 1.0 / 12.0,
    mass: float | None = None,
) -> GridFunction:
    """Random complex field with |k| <= band_fraction * k_max before enveloping.

    The peak magnitude is normalized to ``amplitude``; if ``mass`` is given the
    field is instead rescaled so its squared L2 norm equals ``mass``.
    Deterministic in (grid, seed, keyword arguments).
    """
    rng = np.random.default_rng(seed)
    n = grid.n
    m = max(2, int((n // 2) * band_fraction))
    coef = np.zeros(n, dtype=np.complex128)
    idx = np.arange(-m, m + 1)
    coef[idx % n] = rng.normal(size=idx.size) + 1j * rng.normal(size=idx.size)
    vals = _fft.ifft(coef) * n
    vals *= np.exp(-((grid.x / envelope_width) ** 2))
    f = GridFunction(grid, vals)
    f = f.with_values(f.values * (amplitude / lp_norm(f, np.inf)))
    if mass is not None:
        f = f.with_values(f.values * np.sqrt(mass / lp_norm(f, 2) ** 2))
    return f
