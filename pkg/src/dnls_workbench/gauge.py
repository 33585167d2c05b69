"""Gauge maps linking the original evolution form to its transformed ones.

A field is multiplied by a phase built from the running integral of its
squared modulus. The modulus is preserved pointwise, so the map is inverted
by the opposite phase computed from the transformed field itself.
"""

import math
from dataclasses import dataclass

import numpy as np

from .spectral_core import GridFunction, cumulative_integral

__all__ = ["GaugeParam", "gauge_transform", "gauge_inverse"]


@dataclass(frozen=True)
class GaugeParam:
    """Gauge strength nu; nu = 0 is the identity map."""

    nu: float

    def __post_init__(self):
        if not math.isfinite(self.nu):
            raise ValueError("gauge strength must be finite")


def gauge_transform(u: GridFunction, nu: float) -> GridFunction:
    """Multiply u by exp(-i(nu/2) F), F the running integral of |u|^2.

    F is anchored at the left box end rather than at minus infinity, so the
    result differs from the whole-line convention by a constant phase;
    modulus-based and gauge-invariant quantities are unaffected. The decay
    warning of cumulative_integral passes through when |u|^2 has not decayed
    at the box ends.
    """
    nu = GaugeParam(float(nu)).nu
    modulus_sq = GridFunction(u.grid, np.abs(u.values) ** 2)
    phase_integral = cumulative_integral(modulus_sq).values.real
    return u.with_values(u.values * np.exp(-0.5j * nu * phase_integral))


def gauge_inverse(v: GridFunction, nu: float) -> GridFunction:
    """Undo gauge_transform(·, nu): multiply by exp(+i(nu/2) ∫|v|^2).

    Valid because the forward map preserves the modulus, so the phase can be
    rebuilt from the transformed field.
    """
    return gauge_transform(v, -float(nu))
