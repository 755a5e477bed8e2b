"""Self-consistent polaron-type transformation and the dressed four-level frame."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .bath import SpectralDensity, omega_coth_half
from . import operators as ops

# g0 / delta_A above this is outside the weak qubit-TLF coupling regime
STRONG_COUPLING_RATIO = 0.5


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, last_iterate):
        super().__init__(message)
        self.last_iterate = last_iterate


@dataclass(frozen=True)
class ModelParams:
    delta_A: float
    delta_B: float
    g0: float
    sd: SpectralDensity
    beta: float

    def __post_init__(self):
        errors = []
        if not self.delta_A > 0:
            errors.append("delta_A must be positive")
        if not self.delta_B > 0:
            errors.append("delta_B must be positive")
        if not self.g0 >= 0:
            errors.append("g0 must be non-negative")
        if not self.beta > 0:
            errors.append("beta must be positive (math.inf allowed)")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def temperature(self) -> float:
        return 0.0 if math.isinf(self.beta) else 1.0 / self.beta


@dataclass(frozen=True)
class RenormalizedFrame:
    eta: float
    theta0: float
    delta_A_p: float
    delta_B_p: float
    g0_p: float
    theta: float
    E_p: float
    E_m: float
    Theta: float
    E_g: float
    params: ModelParams
    iterations: int = 0
    strong_coupling: bool = False

    @property
    def xi_shift(self) -> float:
        """eta * delta_B * cos(theta0); xi(w) = w / (w + xi_shift)."""
        return self.eta * self.params.delta_B * math.cos(self.theta0)


def eta_of(theta0: float, eta_trial: float, params: ModelParams,
           epsabs: float = 1e-15, epsrel: float = 1e-13) -> float:
    """Dressing factor for given trial (theta0, eta).

    ``exp[-int J(w)/(2 w^2) xi(w)^2 coth(beta w/2) dw]`` with
    ``xi(w) = w / (w + eta * delta_B * cos(theta0))``.
    """
    if not 0 <= theta0 < math.pi / 2:
        raise ValueError("theta0 must lie in [0, pi/2)")
    sd = params.sd
    if sd.alpha == 0:
        return 1.0
    c = eta_trial * params.delta_B * math.cos(theta0)

    def integrand(w):
        # J xi^2 coth / (2 w^2) = (J/w) (w coth) / (2 (w + c)^2)
        return float(sd.over_omega(w) * omega_coth_half(params.beta, w)) / (2 * (w + c) ** 2)

    val, err = integrate.quad(integrand, 0.0, sd.omega_max, epsabs=epsabs,
                              epsrel=epsrel, limit=400)
    if not math.isfinite(val):
        raise ArithmeticError("dressing-factor integral diverged")
    return math.exp(-val)


def _theta0_of(eta: float, params: ModelParams) -> float:
    return math.atan(params.g0 / (params.delta_A + eta * params.delta_B))


def solve_self_consistent(params: ModelParams, tol: float = 1e-12,
                          mixing: float = 0.5, max_iter: int = 10_000) -> RenormalizedFrame:
    """Solve the coupled (eta, theta0) fixed point and fill the renormalized frame.

    Damped iteration first; bisection on eta if that fails to converge.
    """
    eta, theta0 = 1.0, _theta0_of(1.0, params)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta_new = (1 - mixing) * eta + mixing * eta_of(theta0, eta, params)
        theta0_new = _theta0_of(eta_new, params)
        done = abs(eta_new - eta) < tol and abs(theta0_new - theta0) < tol
        eta, theta0 = eta_new, theta0_new
        if done:
            converged = True
            break
    if not converged:
        def residual(e):
            return eta_of(_theta0_of(e, params), e, params) - e
        try:
            eta = optimize.bisect(residual, 1e-12, 1.0, xtol=tol, maxiter=200)
        except ValueError as exc:
            raise ConvergenceError("self-consistency failed", (eta, theta0)) from exc
        theta0 = _theta0_of(eta, params)
    return build_frame(eta, theta0, params, iterations=it)


def build_frame(eta: float, theta0: float, params: ModelParams,
                iterations: int = 0) -> RenormalizedFrame:
    dA, dB, g0 = params.delta_A, params.delta_B, params.g0
    dA_p = dA * math.cos(theta0) + g0 * math.sin(theta0)
    dB_p = eta * dB * math.cos(theta0)
    g0_p = eta * dB * math.sin(theta0)
    theta = 0.5 * math.atan2(2 * g0_p, dA_p - dB_p)
    E_p = dA_p + dB_p
    E_m = math.hypot(dA_p - dB_p, 2 * g0_p)
    E_g = -0.5 * dA_p - 0.5 * dB_p - _ground_shift(eta, theta0, params)
    strong = g0 > STRONG_COUPLING_RATIO * dA
    if strong:
        warnings.warn(f"g0/delta_A = {g0 / dA:.3g}: outside the weak qubit-TLF "
                      "coupling regime of the transformation", stacklevel=3)
    return RenormalizedFrame(eta, theta0, dA_p, dB_p, g0_p, theta, E_p, E_m,
                             theta + theta0, E_g, params, iterations, strong)


def _ground_shift(eta: float, theta0: float, params: ModelParams) -> float:
    sd = params.sd
    if sd.alpha == 0:
        return 0.0
    c = eta * params.delta_B * math.cos(theta0)

    def integrand(w):
        xi = w / (w + c)
        return float(sd.over_omega(w)) / 4 * xi * (2 - xi)

    return integrate.quad(integrand, 0.0, sd.omega_max, epsabs=1e-15, limit=400)[0]


# --- dressed frame -----------------------------------------------------------

@dataclass(frozen=True)
class DressedFrame:
    """Levels and operators in the eigenbasis of H'_{A,B} + H'_AB.

    ``levels`` is (eps_0, eps_1, eps_2, eps_3) = (-E_p/2, -E_m/2, E_m/2, E_p/2).
    Matrices use the product-basis row order (uu, ud, du, dd), in which the
    dressed energies read (E_p/2, E_m/2, -E_m/2, -E_p/2); row r holds level 3 - r.
    """
    levels: np.ndarray
    rho_plus: np.ndarray
    T: np.ndarray
    hamiltonian: np.ndarray  # H'^(0)_{A,B} + H'_AB before rotation by T


def rotation_T(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[1, 0, 0, 0], [0, c, s, 0], [0, s, -c, 0], [0, 0, 0, 1]],
                    dtype=complex)


def transformed_hamiltonian(frame: RenormalizedFrame) -> np.ndarray:
    return (0.5 * frame.delta_A_p * ops.on_a(ops.SZ)
            + 0.5 * frame.delta_B_p * ops.on_b(ops.SZ)
            + frame.g0_p * (ops.ab(ops.SP, ops.SM) + ops.ab(ops.SM, ops.SP)))


def dressed_frame(frame: RenormalizedFrame) -> DressedFrame:
    T = rotation_T(frame.theta)
    levels = np.array([-frame.E_p, -frame.E_m, frame.E_m, frame.E_p]) / 2
    rho_plus = T @ ops.on_b(ops.SP) @ T
    return DressedFrame(levels, rho_plus, T, transformed_hamiltonian(frame))


def matrix_levels(frame: RenormalizedFrame) -> np.ndarray:
    """Dressed energies in matrix row order (E_p/2, E_m/2, -E_m/2, -E_p/2)."""
    return np.array([frame.E_p, frame.E_m, -frame.E_m, -frame.E_p]) / 2


def to_dressed(op: np.ndarray, frame: RenormalizedFrame) -> np.ndarray:
    """T exp(S) op exp(-S) T for a spin operator (bath displacement omitted)."""
    T = rotation_T(frame.theta)
    R = ops.spin_rotation(frame.theta0)
    return T @ R @ op @ R.conj().T @ T


def dressed_sigma_x(frame: RenormalizedFrame) -> np.ndarray:
    return to_dressed(ops.on_a(ops.SX), frame)
