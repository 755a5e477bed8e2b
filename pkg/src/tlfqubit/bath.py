"""Spectral densities, bath-mode discretization and bath response functions.

Energies and frequencies are in units of the cutoff ``omega_l`` unless a
different ``omega_l`` is passed explicitly; all formulas are homogeneous so
no global rescaling is applied.  Every frequency integral is truncated at
``OMEGA_MAX_FACTOR * omega_l``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy import integrate

OMEGA_MAX_FACTOR = 5.0

ArrayLike = Union[float, np.ndarray]


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual estimate {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class SpectralDensityTL:
    """Piezoelectric (double-dot) spectral density.

    ``J(w) = alpha * w * (1 - (omega_d/w) sin(w/omega_d)) * exp(-w^2 / 2 omega_l^2)``
    """

    alpha: float
    omega_d: float
    omega_l: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not self.omega_d > 0 or not self.omega_l > 0:
            raise ValueError("omega_d and omega_l must be positive")

    @property
    def omega_max(self) -> float:
        return OMEGA_MAX_FACTOR * self.omega_l

    def __call__(self, omega: ArrayLike) -> ArrayLike:
        return eval_J_TL(omega, self)

    def over_omega(self, omega: ArrayLike) -> ArrayLike:
        """J(w)/w, finite at w = 0."""
        w = np.asarray(omega, dtype=float)
        return self.alpha * _one_minus_sinc(w / self.omega_d) * np.exp(
            -(w**2) / (2 * self.omega_l**2))


@dataclass(frozen=True)
class SpectralDensityOhmic:
    """Ohmic density with Gaussian cutoff, the ``omega_d -> 0`` limit of the TL form."""

    alpha: float
    omega_l: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not self.omega_l > 0:
            raise ValueError("omega_l must be positive")

    @property
    def omega_max(self) -> float:
        return OMEGA_MAX_FACTOR * self.omega_l

    def __call__(self, omega: ArrayLike) -> ArrayLike:
        w = _check_omega(omega)
        out = self.alpha * w * np.exp(-(w**2) / (2 * self.omega_l**2))
        return out if np.ndim(out) else float(out)

    def over_omega(self, omega: ArrayLike) -> ArrayLike:
        w = np.asarray(omega, dtype=float)
        return self.alpha * np.exp(-(w**2) / (2 * self.omega_l**2))


SpectralDensity = Union[SpectralDensityTL, SpectralDensityOhmic]


def _check_omega(omega: ArrayLike) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("spectral density is defined for omega >= 0 only")
    return w


def _one_minus_sinc(x: np.ndarray) -> np.ndarray:
    # 1 - sin(x)/x; series below |x| = 1e-3 to avoid cancellation
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    safe = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, x2 / 6 - x2 * x2 / 120, 1.0 - np.sin(safe) / safe)


def eval_J_TL(omega: ArrayLike, sd: SpectralDensityTL) -> ArrayLike:
    """Evaluate the piezoelectric spectral density at ``omega >= 0``."""
    w = _check_omega(omega)
    out = sd.alpha * w * _one_minus_sinc(w / sd.omega_d) * np.exp(
        -(w**2) / (2 * sd.omega_l**2))
    return out if np.ndim(out) else float(out)


def coth_half(beta: float, omega: ArrayLike) -> ArrayLike:
    """coth(beta*omega/2); ``beta = inf`` gives 1. Diverges at omega = 0."""
    if math.isinf(beta):
        return np.ones_like(np.asarray(omega, dtype=float))
    return 1.0 / np.tanh(0.5 * beta * np.asarray(omega, dtype=float))


def omega_coth_half(beta: float, omega: ArrayLike) -> ArrayLike:
    """omega * coth(beta*omega/2), continuous at omega = 0 (value 2/beta)."""
    w = np.asarray(omega, dtype=float)
    if math.isinf(beta):
        return np.abs(w)
    x = 0.5 * beta * w
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 2.0 / beta, w / np.tanh(safe))


def thermal_weight(sd: SpectralDensity, beta: float) -> Callable[[np.ndarray], np.ndarray]:
    """Return w -> J(w) coth(beta w / 2) as a vectorized callable."""

    def h(omega):
        return sd.over_omega(omega) * omega_coth_half(beta, omega)

    return h


# --- discretization --------------------------------------------------------

@dataclass(frozen=True)
class BathDiscretization:
    omegas: np.ndarray
    weights: np.ndarray  # g_k^2
    scheme: str
    under_resolved: bool = False

    @property
    def n_modes(self) -> int:
        return len(self.omegas)

    def moment(self, m: int) -> float:
        return float(np.sum(self.weights * self.omegas**m))


SCHEMES = ("linear-grid", "log-grid", "gauss-quadrature")


def discretize_bath(sd: SpectralDensity, scheme: str = "gauss-quadrature",
                    n_modes: int = 2000) -> BathDiscretization:
    """Replace the continuum by ``n_modes`` discrete modes on ``(0, omega_max]``.

    Weights are chosen so that ``sum_k g_k^2 f(w_k)`` is a quadrature of
    ``int J(w) f(w) dw``.
    """
    if n_modes < 8:
        raise ValueError("n_modes must be at least 8")
    wmax = sd.omega_max
    if scheme == "linear-grid":
        dw = wmax / n_modes
        omegas = (np.arange(n_modes) + 0.5) * dw
        qw = np.full(n_modes, dw)
    elif scheme == "log-grid":
        edges = np.geomspace(1e-4 * sd.omega_l, wmax, n_modes + 1)
        omegas = np.sqrt(edges[1:] * edges[:-1])
        qw = np.diff(edges)
    elif scheme == "gauss-quadrature":
        x, w = np.polynomial.legendre.leggauss(n_modes)
        omegas = 0.5 * wmax * (x + 1)
        qw = 0.5 * wmax * w
    else:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    J = np.asarray(sd(omegas), dtype=float)
    if not np.all(np.isfinite(J)):
        raise ValueError("spectral density is not finite on the mode grid")
    # oscillation scale of J: the sinc structure for TL, the cutoff otherwise
    scale = min(getattr(sd, "omega_d", sd.omega_l) * 2 * math.pi, sd.omega_l)
    gaps = np.diff(np.concatenate([[0.0], omegas]))
    support = omegas < 3 * sd.omega_l
    under = bool(np.max(gaps[support]) > scale / 4) if support.any() else True
    return BathDiscretization(omegas, J * qw, scheme, under)


# --- response function ------------------------------------------------------

def bath_response(sd: SpectralDensity, beta: float, t: float,
                  epsabs: float = 1e-13, epsrel: float = 1e-11,
                  limit: int = 400) -> complex:
    """alpha(t) = (1/pi) int_0^inf J(w) [coth(beta w/2) cos(w t) - i sin(w t)] dw."""
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    if not (beta > 0):
        raise ValueError("beta must be positive (math.inf for zero temperature)")
    if sd.alpha == 0:
        return 0j
    wmax = sd.omega_max
    h = thermal_weight(sd, beta)
    J = sd.over_omega  # times omega below

    def re_f(w):
        return float(h(w))

    def im_f(w):
        return float(J(w) * w)

    if t == 0:
        re, re_err = integrate.quad(re_f, 0, wmax, epsabs=epsabs, epsrel=epsrel,
                                    limit=limit, full_output=False)[:2]
        im, im_err = 0.0, 0.0
    else:
        re, re_err = integrate.quad(re_f, 0, wmax, weight="cos", wvar=t,
                                    epsabs=epsabs, epsrel=epsrel, limit=limit)[:2]
        im, im_err = integrate.quad(im_f, 0, wmax, weight="sin", wvar=abs(t),
                                    epsabs=epsabs, epsrel=epsrel, limit=limit)[:2]
        im = math.copysign(1.0, t) * im
    err = max(re_err, im_err)
    scale = max(abs(re), abs(im), 1e-300)
    if err > max(10 * epsabs, 100 * epsrel * scale):
        raise QuadratureError("bath response quadrature did not converge", err)
    return complex(re, -im) / math.pi


@dataclass(frozen=True)
class BathResponse:
    sd: SpectralDensity
    beta: float
    alpha_t: Callable[[float], complex] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha_t",
                           lambda t: bath_response(self.sd, self.beta, t))

    def __call__(self, t: float) -> complex:
        return self.alpha_t(t)


# --- resolvent integrals ----------------------------------------------------

@lru_cache(maxsize=16)
def gauss_panels(a: float, b: float, n_panels: int = 200, order: int = 16):
    """Composite Gauss-Legendre nodes and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def resolvent_integral(h: Callable[[np.ndarray], np.ndarray], Q, omega_max: float,
                       n_panels: int = 100, order: int = 16, chunk: int = 1024):
    """Evaluate ``int_0^omega_max h(w) / (Q + i w) dw`` for complex ``Re Q > 0``.

    ``h`` must be smooth and vectorized.  When ``Re Q`` is small the integrand
    is sharply peaked at ``w0 = -Im Q``; the constant and linear Taylor terms of
    ``h`` about ``w0`` are integrated in closed form and only the smooth
    remainder goes through the fixed Gauss rule.
    """
    Q = np.asarray(Q, dtype=complex)
    scalar = Q.ndim == 0
    Q = np.atleast_1d(Q).ravel()
    if np.any(Q.real <= 0):
        raise ValueError("resolvent integral requires Re Q > 0")
    nodes, weights = gauss_panels(0.0, float(omega_max), n_panels, order)
    hn = h(nodes) * weights
    out = np.empty(Q.shape, dtype=complex)
    for lo in range(0, len(Q), chunk):
        q = Q[lo:lo + chunk]
        sig = q.real
        w0 = np.clip(-q.imag, 0.0, omega_max)
        # far from the axis nothing is peaked, and L1 would cancel catastrophically
        inside = (-q.imag >= 0) & (-q.imag <= omega_max) & (sig < omega_max)
        step = 1e-6 * omega_max
        h0 = np.where(inside, h(w0), 0.0)
        wp = np.minimum(w0 + step, omega_max)
        wm = np.maximum(w0 - step, 0.0)
        h1 = np.where(inside, (h(wp) - h(wm)) / np.where(wp > wm, wp - wm, 1.0), 0.0)
        # remainder through the fixed rule
        u = nodes[None, :] - w0[:, None]
        denom = q[:, None] + 1j * nodes[None, :]
        rem = (hn[None, :] - weights[None, :] * (h0[:, None] + h1[:, None] * u)) / denom
        # closed-form pieces: denominator is sig + i*u with u in [a, b]
        a = -w0
        b = omega_max - w0
        L0 = -1j * (np.log(sig + 1j * b) - np.log(sig + 1j * a))
        L1 = -1j * (b - a) + 1j * sig * L0
        out[lo:lo + chunk] = rem.sum(axis=1) + h0 * L0 + h1 * L1
    return out[0] if scalar else out
