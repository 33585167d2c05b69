"""Soliton families of the derivative Schrodinger flow.

Three layers:
 * the algebraic profile Q_c(x) = sqrt(4c/((cx)^2 + 1)) with mass exactly 4*pi,
 * ground states phi_{omega,c} of -phi'' + (omega - c^2/4) phi + (c/2) phi^3
   - (3/16) phi^5 = 0 for omega > c^2/4, solved by damped Newton iteration,
 * the standing wave q_{omega,c}(t, x) assembled from phi and its phase
   integral.

Closed-form moments of Q_c and analytic callables (profile, derivatives,
log-derivative chain for the standing wave at omega = c^2/4) are exposed so
verification can run grid-free where the algebraic tails defeat the box.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import fft as _fft
from scipy.sparse.linalg import LinearOperator, gmres

from .spectral_core import (
    ConvergenceError,
    DecayWarning,
    Grid,
    GridFunction,
    cumulative_integral,
)

__all__ = [
    "SolitonParams",
    "algebraic_soliton",
    "algebraic_profile",
    "algebraic_profile_derivative",
    "algebraic_standing_callables",
    "gauged_standing_callables",
    "ground_state",
    "standing_wave",
    "soliton_moment",
    "moment_integrand",
    "MOMENT_KINDS",
]


@dataclass(frozen=True)
class SolitonParams:
    """Frequency omega and speed c > 0, restricted to omega >= c^2/4."""

    omega: float
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("soliton speed c must be positive")
        if self.omega < self.c**2 / 4.0 - 1e-12 * max(1.0, self.c**2):
            raise ValueError("omega must satisfy omega >= c^2/4")

    @property
    def is_algebraic(self) -> bool:
        """True on the boundary omega = c^2/4 where the profile is Q_c."""
        return abs(self.omega - self.c**2 / 4.0) <= 1e-12 * max(1.0, self.c**2)


def algebraic_profile(c: float) -> Callable[[np.ndarray], np.ndarray]:
    if not c > 0:
        raise ValueError("soliton speed c must be positive")
    return lambda x: np.sqrt(4.0 * c / ((c * x) ** 2 + 1.0))


def algebraic_profile_derivative(c: float) -> Callable[[np.ndarray], np.ndarray]:
    if not c > 0:
        raise ValueError("soliton speed c must be positive")
    return lambda x: -np.sqrt(4.0 * c) * c**2 * x * ((c * x) ** 2 + 1.0) ** -1.5


def algebraic_soliton(c: float, grid: Grid) -> GridFunction:
    """Q_c sampled on the grid (real positive field)."""
    return GridFunction.from_callable(grid, algebraic_profile(c))


def algebraic_standing_callables(
    c: float,
) -> tuple[Callable, Callable, Callable]:
    """The standing wave at omega = c^2/4, t = 0, and its first two derivatives.

    q(x) = Q_c(x) exp(i(-cx/2 + 3 arctan(cx) + 3 pi/2)), the phase integral
    (3/4) int_{-inf}^x Q_c^2 evaluated in closed form. Derivatives come from
    the log-derivative g = q'/q, so they inherit no grid error.
    """
    if not c > 0:
        raise ValueError("soliton speed c must be positive")

    def q(x):
        u = (c * x) ** 2 + 1.0
        theta = -0.5 * c * x + 3.0 * np.arctan(c * x) + 1.5 * np.pi
        return np.sqrt(4.0 * c / u) * np.exp(1j * theta)

    def g(x):
        u = (c * x) ** 2 + 1.0
        return -(c**2) * x / u + 1j * (-0.5 * c + 3.0 * c / u)

    def gp(x):
        u = (c * x) ** 2 + 1.0
        return (c**2 * ((c * x) ** 2 - 1.0) - 6j * c**3 * x) / u**2

    qx = lambda x: g(x) * q(x)
    qxx = lambda x: (gp(x) + g(x) ** 2) * q(x)
    return q, qx, qxx


def gauged_standing_callables(c: float) -> tuple[Callable, Callable, Callable]:
    """The nu = 3/2 gauge image of the algebraic standing wave: Q_c e^{-icx/2}.

    The gauge phase -(3/4) int |q|^2 cancels the arctan part of the standing
    phase exactly, leaving a pure plane-wave modulation. Returns the field
    and its first two derivatives.
    """
    if not c > 0:
        raise ValueError("soliton speed c must be positive")
    profile = algebraic_profile(c)
    dprofile = algebraic_profile_derivative(c)

    def ddprofile(x):
        u = (c * x) ** 2 + 1.0
        return -np.sqrt(4.0 * c) * c**2 * (1.0 - 2.0 * (c * x) ** 2) * u**-2.5

    def v(x):
        return profile(x) * np.exp(-0.5j * c * x)

    def vx(x):
        return (dprofile(x) - 0.5j * c * profile(x)) * np.exp(-0.5j * c * x)

    def vxx(x):
        bare = ddprofile(x) - 1j * c * dprofile(x) - 0.25 * c**2 * profile(x)
        return bare * np.exp(-0.5j * c * x)

    return v, vx, vxx


# --- closed-form moment table for Q_c --------------------------------------

_MOMENTS = {
    "L2": (4.0, 0),
    "L4": (8.0, 1),
    "L6": (24.0, 2),
    "L8": (80.0, 3),
    "L10": (280.0, 4),
    "L12": (1008.0, 5),
    "dQ_L2": (0.5, 2),
    "QdQ_L2": (1.0, 3),
    "Q2dQ_L2": (2.5, 4),
    "Q3dQ_L2": (7.0, 5),
    "dQ_L4": (3.0 / 16.0, 5),
}

MOMENT_KINDS = tuple(_MOMENTS)


def soliton_moment(c: float, kind: str) -> float:
    """Closed-form value of one Q_c moment.

    Kinds: L2..L12 for ||Q_c||_{L^p}^p with p = 2..12; dQ_L2 for
    ||Q_c'||_{L^2}^2; QdQ_L2, Q2dQ_L2, Q3dQ_L2 for ||Q_c^m Q_c'||_{L^2}^2 with
    m = 1, 2, 3; dQ_L4 for ||Q_c'||_{L^4}^4. All are rational multiples of
    c^k * pi.
    """
    if not c > 0:
        raise ValueError("soliton speed c must be positive")
    try:
        factor, power = _MOMENTS[kind]
    except KeyError:
        raise ValueError(
            f"unknown moment kind {kind!r}; valid kinds: {', '.join(_MOMENTS)}"
        ) from None
    return factor * c**power * np.pi


def moment_integrand(c: float, kind: str) -> Callable[[np.ndarray], np.ndarray]:
    """Pointwise integrand whose line integral is soliton_moment(c, kind)."""
    if kind not in _MOMENTS:
        raise ValueError(
            f"unknown moment kind {kind!r}; valid kinds: {', '.join(_MOMENTS)}"
        )
    q = algebraic_profile(c)
    dq = algebraic_profile_derivative(c)
    if kind.startswith("L"):
        p = int(kind[1:])
        return lambda x: q(x) ** p
    if kind == "dQ_L2":
        return lambda x: dq(x) ** 2
    if kind == "dQ_L4":
        return lambda x: dq(x) ** 4
    m = {"QdQ_L2": 1, "Q2dQ_L2": 2, "Q3dQ_L2": 3}[kind]
    return lambda x: (q(x) ** m * dq(x)) ** 2


# --- ground states for omega > c^2/4 ----------------------------------------


def _ode_residual(phi: np.ndarray, k2: np.ndarray, a: float, c: float) -> np.ndarray:
    lap = _fft.ifft(-k2 * _fft.fft(phi)).real
    return -lap + a * phi + 0.5 * c * phi**3 - (3.0 / 16.0) * phi**5


def _symmetrize(phi: np.ndarray) -> np.ndarray:
    # Reflection x -> -x maps node j to node (n - j) mod n. The linearized
    # operator has an exact odd null mode (the translation mode phi'), so odd
    # roundoff from the Krylov solve would otherwise grow unchecked.
    return 0.5 * (phi + np.roll(phi[::-1], 1))


def _newton_leg(
    phi: np.ndarray,
    a: float,
    c: float,
    k2: np.ndarray,
    sqrt_dx: float,
    tolerance: float,
    max_iters: int,
    history: list,
) -> np.ndarray:
    """Damped Newton on the profile equation at fixed coefficients.

    Appends residual norms to history and returns the converged profile.
    """
    n = k2.size
    for _ in range(max_iters):
        residual = _ode_residual(phi, k2, a, c)
        rnorm = float(np.linalg.norm(residual)) * sqrt_dx
        history.append(rnorm)
        if rnorm <= tolerance:
            return phi

        weight = a + 1.5 * c * phi**2 - (15.0 / 16.0) * phi**4

        def matvec(h):
            lap = _fft.ifft(-k2 * _fft.fft(h)).real
            return -lap + weight * h

        def precondition(h):
            return _fft.ifft(_fft.fft(h) / (k2 + a)).real

        operator = LinearOperator((n, n), matvec=matvec, dtype=float)
        preconditioner = LinearOperator((n, n), matvec=precondition, dtype=float)
        # Near the root the requested reduction can sit below the roundoff
        # floor and gmres reports non-convergence; the returned iterate is
        # still a usable Newton step, and the line search below rejects it
        # if it is not.
        step, _ = gmres(
            operator, residual, M=preconditioner, rtol=1e-10, atol=0.0, maxiter=400
        )
        # Backtracking damping on the residual norm.
        scale = 1.0
        while scale > 1e-8:
            trial = _symmetrize(phi - scale * step)
            tnorm = float(np.linalg.norm(_ode_residual(trial, k2, a, c))) * sqrt_dx
            if tnorm < rnorm:
                phi = trial
                break
            scale *= 0.5
        else:
            raise ConvergenceError(
                "ground-state Newton step produced no descent", history
            )
    raise ConvergenceError(
        f"ground state did not reach tolerance {tolerance:g} "
        f"in {max_iters} iterations",
        history,
    )


def ground_state(
    params: SolitonParams,
    grid: Grid,
    tolerance: float = 1e-11,
    max_iters: int = 60,
) -> GridFunction:
    """Even positive solution of the profile equation, by damped Newton.

    The boundary case omega = c^2/4 returns the algebraic profile directly.
    Linearized steps are solved matrix-free by GMRES preconditioned with the
    constant-coefficient inverse (-d^2/dx^2 + a)^{-1}, diagonal in Fourier
    space; iterates are kept even, which removes the translation null mode
    from the solve. Close to the boundary the profile is much fatter than
    the sech seed and plain Newton overshoots, so the solve continues in the
    coefficient a = omega - c^2/4: start at a comfortable a, halve toward
    the target, reseeding each leg with the previous profile. Raises
    ConvergenceError with the residual history on failure. Warns when the
    converged profile has not decayed at the box ends (omega too close to
    c^2/4 for the box): its tails then belong to the periodic extension,
    not the line.
    """
    if params.is_algebraic:
        return algebraic_soliton(params.c, grid)
    c, omega = params.c, params.omega
    a_target = omega - c**2 / 4.0
    x = grid.x
    k2 = np.real(grid.wavenumbers**2)
    sqrt_dx = np.sqrt(grid.dx)

    history: list[float] = []
    a = max(a_target, 0.75 * c**2)
    # Seed with the right peak height sqrt(2c + 4 sqrt(omega)) and the right
    # decay rate sqrt(a) (phi ~ e^{-sqrt(a)|x|} since phi^2 ~ sech(2 sqrt(a) x)).
    omega_leg = a + c**2 / 4.0
    phi = np.sqrt(
        (2.0 * c + 4.0 * np.sqrt(omega_leg)) / np.cosh(2.0 * np.sqrt(a) * x)
    )
    while True:
        final = a == a_target
        leg_tol = tolerance if final else max(tolerance, 1e-8)
        phi = _newton_leg(phi, a, c, k2, sqrt_dx, leg_tol, max_iters, history)
        if final:
            break
        a = max(a_target, 0.5 * a)

    if abs(phi[0]) > 1e-8 * float(np.max(np.abs(phi))):
        warnings.warn(
            "ground state has not decayed at the box ends; "
            "enlarge the box or move omega away from c^2/4",
            DecayWarning,
            stacklevel=2,
        )
    return GridFunction(grid, phi)


def standing_wave(
    params: SolitonParams, t: float, grid: Grid, tolerance: float = 1e-11
) -> GridFunction:
    """The exact solution q(t, x) = phi(x + ct) e^{i(omega t - (c/2)(x + ct)
    + (3/4) int_{-inf}^{x+ct} phi^2)}.

    The phase integral is anchored at the left box end rather than -inf; the
    missing tail is a constant phase, irrelevant to every gauge-invariant
    observable. For omega = c^2/4 the shifted profile is sampled from the
    closed form; otherwise the Newton profile is shifted spectrally (exact for
    its exponentially decaying tails).
    """
    c, omega = params.c, params.omega
    shift = c * t
    x = grid.x
    if params.is_algebraic:
        phi_shifted = algebraic_profile(c)(x + shift)
    else:
        phi = ground_state(params, grid, tolerance=tolerance).values.real
        phase = np.exp(1j * grid.wavenumbers * shift)
        phi_shifted = _fft.ifft(phase * _fft.fft(phi)).real
    density = GridFunction(grid, phi_shifted.astype(complex) ** 2)
    phase_integral = cumulative_integral(density).values.real
    theta = omega * t - 0.5 * c * (x + shift) + 0.75 * phase_integral
    return GridFunction(grid, phi_shifted * np.exp(1j * theta))
