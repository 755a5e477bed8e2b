"""Numerical Bromwich inversion on a vertical contour."""
from __future__ import annotations

import math
from math import comb, factorial
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.signal import czt


class AccuracyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ContourSpec:
    """Trapezoid discretization of ``P = sigma + i w``, ``|w| <= omega_max``."""
    sigma: float
    omega_max: float
    n_points: int

    def __post_init__(self):
        if not self.sigma > 0 or not self.omega_max > 0 or self.n_points < 3:
            raise ValueError("contour needs sigma > 0, omega_max > 0, n_points >= 3")

    @property
    def step(self) -> float:
        return 2 * self.omega_max / (self.n_points - 1)

    @property
    def alias_period(self) -> float:
        return 2 * math.pi / self.step

    @classmethod
    def for_horizon(cls, t_max: float, omega_max: float, sigma_t: float = 1.0,
                    alias_factor: float = 20.0) -> "ContourSpec":
        """Contour resolving times up to ``t_max``.

        ``sigma = sigma_t / t_max`` bounds the exp(sigma t) amplification, and the
        frequency step puts the first alias at ``alias_factor * t_max`` so the
        aliasing error is below ``exp(-sigma_t * (alias_factor - 1))``.
        """
        t_max = max(float(t_max), 1e-12)
        sigma = sigma_t / t_max
        h = 2 * math.pi / (alias_factor * t_max)
        n = 2 * int(math.ceil(omega_max / h)) + 1
        return cls(sigma, omega_max, n)

    def points(self) -> np.ndarray:
        w = np.linspace(-self.omega_max, self.omega_max, self.n_points)
        return self.sigma + 1j * w


@dataclass(frozen=True)
class Inversion:
    t: np.ndarray
    values: np.ndarray
    truncation_error: float
    alias_error: float
    contour: ContourSpec


def asymptotic_coefficients(F: Callable[[np.ndarray], np.ndarray], scale: float,
                            order: int = 4) -> np.ndarray:
    """Leading coefficients ``a_k`` of ``F(P) ~ sum_k a_k / P**(k+1)`` for large real P.

    Fitted by least squares on ``P F(P)`` sampled at ``P = 20 * scale * 2**j``.
    The estimates only shape the analytically inverted part; any error in them
    ends up in the numerically inverted remainder.
    """
    p0 = 20.0 * max(scale, 1.0)
    P = p0 * 2.0 ** np.arange(12)
    y = P * F(P.astype(complex))
    v = p0 / P
    V = np.vander(v, order + 4, increasing=True)
    c = np.linalg.lstsq(V.astype(complex), y, rcond=None)[0]
    return c[:order] * p0 ** np.arange(order)


def _pole_expansion(a: np.ndarray, lam: float) -> np.ndarray:
    # b_m with sum_m b_m/(P+lam)^(m+1) matching sum_k a_k/P^(k+1) term by term
    n = len(a)
    b = np.zeros(n, dtype=complex)
    for k in range(n):
        acc = sum(b[m] * comb(k, m) * (-lam) ** (k - m) for m in range(k))
        b[k] = a[k] - acc
    return b


def invert_laplace(F: Callable[[np.ndarray], np.ndarray], t_grid,
                   contour: Optional[ContourSpec] = None, omega_max: float = 10.0,
                   asymptotics=None, warn_tol: float = 1e-4) -> Inversion:
    """Invert ``F`` on a uniform, non-negative time grid.

    ``F`` is called with a 1-d array of complex ``P`` and must be analytic for
    ``Re P >= contour.sigma``.  The large-P behaviour ``sum_k a_k/P^(k+1)``
    (k < 4) is matched by ``sum b_k/(P+lam)^(k+1)`` and inverted in closed form;
    only the ``O(P^-5)`` remainder goes through the trapezoid sum, so the jump
    at t = 0 and low-order kinks carry no Gibbs error.  ``asymptotics``
    overrides the fitted coefficients.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) == 0 or np.any(t < 0):
        raise ValueError("t_grid must be a non-empty 1-d array of times >= 0")
    if len(t) > 1:
        dt = np.diff(t)
        if not np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12) or dt[0] <= 0:
            raise ValueError("t_grid must be uniform and increasing")
        tau = float(dt[0])
    else:
        tau = 1.0
    if contour is None:
        contour = ContourSpec.for_horizon(t[-1], omega_max)
    if asymptotics is None:
        a = asymptotic_coefficients(F, contour.omega_max)
    else:
        a = np.asarray(asymptotics, dtype=complex)
    scale = max(abs(a[k] / a[0]) ** (1.0 / k) for k in range(1, len(a))) \
        if len(a) > 1 and abs(a[0]) > 0 else 0.0
    lam = float(np.clip(scale, 1.0 / max(t[-1], tau), contour.omega_max / 10))
    b = _pole_expansion(a, lam)
    n_b = len(b)

    P = contour.points()
    w = P.imag
    h = contour.step
    R = F(P) - sum(b[m] / (P + lam) ** (m + 1) for m in range(n_b))
    trap = np.full(len(P), h)
    trap[[0, -1]] *= 0.5
    x = trap * R
    # sum_k x_k exp(i w_k t_j), w_k = -W + k h, t_j = t0 + j tau
    t0 = float(t[0])
    x = x * np.exp(1j * np.arange(len(P)) * h * t0)
    S = czt(x, m=len(t), w=np.exp(1j * h * tau), a=1.0 + 0j)
    S *= np.exp(1j * w[0] * t)
    closed = np.exp(-lam * t) * sum(b[m] * t**m / factorial(m) for m in range(n_b))
    values = closed + np.exp(contour.sigma * t) * S / (2 * math.pi)

    tail = float(np.max(np.abs(R[[0, -1]])))
    amp = math.exp(contour.sigma * t[-1])
    trunc = amp * tail * contour.omega_max / math.pi
    alias = amp * math.exp(-contour.sigma * contour.alias_period) * max(1.0, abs(a[0]))
    if trunc > warn_tol:
        warnings.warn(f"Bromwich tail not negligible: remainder {tail:.3e} at the "
                      f"contour ends (error estimate {trunc:.3e})", AccuracyWarning,
                      stacklevel=2)
    return Inversion(t, values, trunc, alias, contour)
