"""Quasi-adiabatic propagator path integral (QUAPI) for the qubit plus fluctuator.

The bath couples through ``s = sigma_x^B / 2``.  Paths live in the DVR basis
(|up,+x>, |down,+x>, |up,-x>, |down,-x>) with s = (1/2, 1/2, -1/2, -1/2), so
a forward/backward pair state ``p = 4 i + j`` runs over M^2 = 16 values.

Path point k carries the time window [t_k - dt/2, t_k + dt/2] (clipped to
[0, t_k] for the first and the current last point), and the influence
functional is

    I = exp{ -sum_{k >= k'} (s+_k - s-_k) (eta_kk' s+_k' - conj(eta_kk') s-_k') }

with eta_kk' the double time integral of C(t) = int J(w) [coth(beta w/2)
cos(w t) - i sin(w t)] dw over the two windows (ordered t'' < t' when k = k').
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from . import operators as ops
from .bath import QuadratureError, SpectralDensity, omega_coth_half
from .polaron import ModelParams

M = 4
NS = M * M
DEFAULT_MEM_BUDGET = 8 * 2**30
BYTES_PER_ENTRY = 16
DVR_S = np.array([0.5, 0.5, -0.5, -0.5])


class MemoryBudgetError(MemoryError):
    def __init__(self, required: int, budget: int):
        super().__init__(f"augmented tensor needs {required} bytes, budget is {budget} bytes")
        self.required = required
        self.budget = budget


def required_bytes(delta_k_max: int) -> int:
    """Bytes reserved for one propagation step.

    Two rank-dk tensors (old and new), a rank-(dk+1) work tensor and the two
    precomputed influence factors of the same shape.  The sliced steady-state
    update needs less work space, so this is an upper bound.
    """
    return BYTES_PER_ENTRY * (2 * NS ** delta_k_max + 3 * NS ** (delta_k_max + 1))


@dataclass(frozen=True)
class SystemSpec:
    H0: np.ndarray  # computational basis (uu, ud, du, dd)
    coupling_coordinate: np.ndarray = field(default_factory=lambda: DVR_S.copy())
    dvr_basis: np.ndarray = field(default_factory=lambda: dvr_basis())

    def __post_init__(self):
        if np.max(np.abs(self.H0 - self.H0.conj().T)) > 1e-12:
            raise ValueError("H0 must be hermitian")

    @classmethod
    def from_params(cls, params: ModelParams) -> "SystemSpec":
        return cls(ops.bare_hamiltonian(params.delta_A, params.delta_B, params.g0))

    @property
    def H_dvr(self) -> np.ndarray:
        V = self.dvr_basis
        return V.conj().T @ self.H0 @ V

    def to_dvr(self, op: np.ndarray) -> np.ndarray:
        V = self.dvr_basis
        return V.conj().T @ op @ V


def dvr_basis() -> np.ndarray:
    """Columns are the DVR states in computational coordinates."""
    up, dn = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    px, mx = (up + dn) / math.sqrt(2), (up - dn) / math.sqrt(2)
    return np.stack([np.kron(up, px), np.kron(dn, px), np.kron(up, mx), np.kron(dn, mx)], 1)


def bare_propagator(spec: SystemSpec, delta_t: float) -> np.ndarray:
    """exp(-i H0 dt) in the DVR basis, by eigendecomposition."""
    if delta_t < 0:
        raise ValueError("delta_t must be non-negative")
    w, v = np.linalg.eigh(spec.H_dvr)
    return (v * np.exp(-1j * w * delta_t)) @ v.conj().T


# --- influence coefficients --------------------------------------------------

Window = Tuple[float, float]


def _window_factor(w: np.ndarray, win1: Window, win2: Window):
    """Re and Im of int_win1 dt int_win2 dt'' exp(i w (t - t''))."""
    L1, L2 = win1[1] - win1[0], win2[1] - win2[0]
    c = 0.5 * (win1[0] + win1[1]) - 0.5 * (win2[0] + win2[1])
    amp = L1 * L2 * np.sinc(w * L1 / (2 * np.pi)) * np.sinc(w * L2 / (2 * np.pi))
    return amp * np.cos(w * c), amp * np.sin(w * c)


def _triangle_factor(w: np.ndarray, L: float):
    """Re and Im of int_0^L dt int_0^t dt'' exp(i w (t - t''))."""
    x = w * L
    small = np.abs(x) < 1e-2
    xs = np.where(small, 1.0, x)
    re = np.where(small, L * L * (0.5 - x * x / 24 + x**4 / 720),
                  L * L * (1 - np.cos(xs)) / xs**2)
    im = np.where(small, L * L * (x / 6 - x**3 / 120 + x**5 / 5040),
                  L * L * (xs - np.sin(xs)) / xs**2)
    return re, im


def eta_integral(sd: SpectralDensity, beta: float, win1: Window,
                 win2: Optional[Window] = None, epsabs: float = 1e-13,
                 epsrel: float = 1e-11) -> complex:
    """eta for a window pair, or the ordered self term when ``win2`` is None.

    Both time integrals are done in closed form; the frequency integral
    ``int J [coth Re E - i Im E] dw`` goes through adaptive quadrature.
    """
    if sd.alpha == 0:
        return 0j
    L = win1[1] - win1[0]

    def parts(w):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        if win2 is None:
            re, im = _triangle_factor(w, L)
        else:
            re, im = _window_factor(w, win1, win2)
        J_over = sd.over_omega(w)
        return J_over * omega_coth_half(beta, w) * re, J_over * w * im

    out = []
    for k in (0, 1):
        val, err = integrate.quad(lambda w: float(parts(w)[k][0]), 0.0, sd.omega_max,
                                  epsabs=epsabs, epsrel=epsrel, limit=500)
        if err > max(epsabs, epsrel * abs(val)) * 100:
            raise QuadratureError("influence-coefficient quadrature did not converge", err)
        out.append(val)
    return complex(out[0], -out[1])


@dataclass(frozen=True)
class InfluenceCoefficients:
    """Window-typed eta values; 'S' first point, 'I' interior, 'E' current last point.

    ``pair[(a, b)][d - 1]`` couples a later point of type a to the point d
    steps earlier of type b.  The counter-term is zero because the model has
    no renormalization term in its Hamiltonian.
    """
    self_eta: Dict[str, complex]
    pair: Dict[Tuple[str, str], np.ndarray]
    delta_t: float
    delta_k_max: int
    counter_term: float = 0.0

    def eta(self, k: int, kp: int, N: int) -> complex:
        """eta_{k k'} for a path ending at point N (0 if beyond the memory)."""
        if not 0 <= kp <= k <= N:
            raise IndexError("need 0 <= k' <= k <= N")
        if N == 0:
            return 0j
        tk = "S" if k == 0 else ("E" if k == N else "I")
        if k == kp:
            return self.self_eta[tk]
        d = k - kp
        if d > self.delta_k_max:
            return 0j
        tkp = "S" if kp == 0 else "I"
        return complex(self.pair[(tk, tkp)][d - 1])

    def matrix(self, N: int) -> np.ndarray:
        out = np.zeros((N + 1, N + 1), dtype=complex)
        for k in range(N + 1):
            for kp in range(k + 1):
                out[k, kp] = self.eta(k, kp, N)
        return out


def windows(delta_t: float, d: int) -> Dict[str, Tuple[Window, Window]]:
    """Window pairs (later, earlier) for points d apart, keyed by type pair."""
    h = 0.5 * delta_t
    t = d * delta_t  # later point time when the earlier one is 0
    later_I, later_E = (t - h, t + h), (t - h, t)
    return {("I", "I"): (later_I, (-h, h)), ("I", "S"): (later_I, (0.0, h)),
            ("E", "I"): (later_E, (-h, h)), ("E", "S"): (later_E, (0.0, h))}


def influence_coefficients(sd: SpectralDensity, beta: float, delta_t: float,
                           delta_k_max: int, N: Optional[int] = None) -> InfluenceCoefficients:
    if delta_k_max < 1:
        raise ValueError("delta_k_max must be at least 1")
    if N is not None and N < delta_k_max:
        raise ValueError("N must be at least delta_k_max")
    if not delta_t > 0:
        raise ValueError("delta_t must be positive")
    h = 0.5 * delta_t
    self_eta = {"S": eta_integral(sd, beta, (0.0, h)),
                "I": eta_integral(sd, beta, (-h, h)),
                "E": eta_integral(sd, beta, (-h, 0.0))}
    pair = {key: np.zeros(delta_k_max, dtype=complex)
            for key in [("I", "I"), ("I", "S"), ("E", "I"), ("E", "S")]}
    for d in range(1, delta_k_max + 1):
        for key, (w1, w2) in windows(delta_t, d).items():
            pair[key][d - 1] = eta_integral(sd, beta, w1, w2)
    return InfluenceCoefficients(self_eta, pair, delta_t, delta_k_max)


# --- pair-state factors -------------------------------------------------------

_SP = np.repeat(DVR_S, M)   # s of forward index i for p = 4 i + j
_SM = np.tile(DVR_S, M)     # s of backward index j
_DS = _SP - _SM


def self_factor(eta: complex) -> np.ndarray:
    return np.exp(-_DS * (eta * _SP - np.conj(eta) * _SM))


def pair_factor(eta: complex) -> np.ndarray:
    """F[p_later, p_earlier]."""
    return np.exp(-np.outer(_DS, eta * _SP - np.conj(eta) * _SM))


def link_kernel(U: np.ndarray) -> np.ndarray:
    """K[p_new, p_old] = U[i_new, i_old] conj(U[j_new, j_old])."""
    return np.einsum("ac,bd->abcd", U, U.conj()).reshape(NS, NS)


def _new_point_factor(coeffs: InfluenceCoefficients, new_type: str, k: int,
                      rank: int) -> np.ndarray:
    """Combined factor over (oldest, ..., newest) for point k as type new_type.

    ``rank`` slots end at point k; the slot at distance d is point k - d.
    """
    f = self_factor(coeffs.self_eta[new_type])
    shape = [1] * (rank - 1) + [NS]
    out = f.reshape(shape)
    for d in range(1, rank):
        kp = k - d
        earlier = "S" if kp == 0 else "I"
        F = pair_factor(coeffs.pair[(new_type, earlier)][d - 1])  # (new, old)
        axis = rank - 1 - d
        sh = [1] * rank
        sh[axis], sh[-1] = NS, NS
        out = out * F.T.reshape(sh)
    return out


# --- propagation ----------------------------------------------------------------

@dataclass
class AugmentedTensor:
    data: np.ndarray  # shape (16,) * rank, oldest slot first
    step_index: int
    delta_k_max: int

    @property
    def rank(self) -> int:
        return self.data.ndim


@dataclass(frozen=True)
class QuapiResult:
    t: np.ndarray
    P: np.ndarray
    rho: np.ndarray  # (N+1, 4, 4) in the DVR basis
    delta_k_max: int
    delta_t: float

    @property
    def trace(self) -> np.ndarray:
        return np.trace(self.rho, axis1=1, axis2=2)


def initial_state(spec: SystemSpec) -> np.ndarray:
    return spec.to_dvr(ops.plus_x_state())


def propagate(spec: SystemSpec, coeffs: InfluenceCoefficients, rho0: np.ndarray, N: int,
              mem_budget: int = DEFAULT_MEM_BUDGET,
              progress: Optional[Callable[[int, int], None]] = None,
              observable: Optional[np.ndarray] = None) -> QuapiResult:
    """Iterate the augmented density tensor for N steps of coeffs.delta_t.

    ``rho0`` is in the DVR basis.  ``observable`` (computational basis)
    defaults to sigma_x of the qubit; P(t) = Tr[rho O].
    """
    dk = coeffs.delta_k_max
    if dk > N:
        raise ValueError(f"delta_k_max = {dk} exceeds the number of steps N = {N}")
    need = required_bytes(dk)
    if need > mem_budget:
        raise MemoryBudgetError(need, mem_budget)
    if observable is None:
        observable = ops.on_a(ops.SX)
    O = spec.to_dvr(observable)
    K = link_kernel(bare_propagator(spec, coeffs.delta_t))

    rhos = np.zeros((N + 1, M, M), dtype=complex)
    rhos[0] = rho0
    T = np.asarray(rho0, dtype=complex).reshape(NS) * self_factor(coeffs.self_eta["S"])
    r = 1  # rank of T, kept flat
    steady_int = steady_end = None
    B_buf = T_spare = None  # steady-state buffers, reused every step
    n_chunk = NS ** max(1, dk - 3)
    for k in range(1, N + 1):
        rank = r + 1
        shape = (NS,) * rank
        # B[..., old, new] = T[..., old] K[new, old]
        if k > dk and dk >= 2:
            if steady_end is None:
                steady_end = _new_point_factor(coeffs, "E", k, rank).reshape(n_chunk, -1, NS)
                steady_int = _new_point_factor(coeffs, "I", k, rank).reshape(n_chunk, -1)
                B_buf = np.empty(NS ** rank // n_chunk, dtype=complex)
                T_spare = np.empty(NS ** dk, dtype=complex)
            # leading-slot slices of about 16^4 entries keep the working set in cache;
            # slice i = (oldest, rest) lands in row rest of the new tensor
            Tm = T.reshape(n_chunk, -1, NS, 1)
            out = T_spare.reshape(n_chunk // NS, -1)
            acc = np.zeros(NS, dtype=complex)
            if k < N:
                T_spare[:] = 0
            for i in range(n_chunk):
                B = B_buf.reshape(-1, NS, NS)
                np.multiply(Tm[i], K.T[None], out=B)
                B = B_buf.reshape(-1, NS)
                acc += np.einsum("ij,ij->j", B, steady_end[i])
                if k < N:
                    B_buf *= steady_int[i]
                    out[i % (n_chunk // NS)] += B_buf
            rhos[k] = acc.reshape(M, M)
            if k < N:
                T, T_spare = T_spare, T
        else:
            if k > dk:
                if steady_end is None:
                    steady_end = _new_point_factor(coeffs, "E", k, rank).reshape(-1, NS)
                    steady_int = _new_point_factor(coeffs, "I", k, rank).reshape(-1)
                f_end, f_int = steady_end, steady_int
            else:
                f_end = np.broadcast_to(_new_point_factor(coeffs, "E", k, rank),
                                        shape).reshape(-1, NS)
                f_int = np.broadcast_to(_new_point_factor(coeffs, "I", k, rank),
                                        shape).reshape(-1)
            B = (T.reshape(-1, NS, 1) * K.T[None]).reshape(-1)
            rhos[k] = np.einsum("ij,ij->j", B.reshape(-1, NS), f_end).reshape(M, M)
            if k < N:
                B *= f_int
                if rank > dk:
                    # sum out the oldest slot
                    T = B.reshape(NS, -1).sum(axis=0)
                else:
                    T, r = B, rank
        if progress is not None:
            progress(k, N)
    P = np.einsum("kij,ji->k", rhos, O).real
    t = coeffs.delta_t * np.arange(N + 1)
    return QuapiResult(t, P, rhos, dk, coeffs.delta_t)


def path_sum(spec: SystemSpec, coeffs: InfluenceCoefficients, rho0: np.ndarray,
             N: int) -> np.ndarray:
    """rho(N dt) by explicit enumeration of all 16^N pair-state histories.

    Uses every eta_{kk'} up to distance delta_k_max; intended for N <= 4.
    """
    K = link_kernel(bare_propagator(spec, coeffs.delta_t))
    eta = coeffs.matrix(N)
    idx = np.indices((NS,) * (N + 1)).reshape(N + 1, -1)  # paths p_0..p_N
    amp = np.asarray(rho0, dtype=complex).reshape(NS)[idx[0]]
    for k in range(1, N + 1):
        amp = amp * K[idx[k], idx[k - 1]]
    phase = np.zeros(idx.shape[1], dtype=complex)
    for k in range(N + 1):
        for kp in range(k + 1):
            e = eta[k, kp]
            phase += _DS[idx[k]] * (e * _SP[idx[kp]] - np.conj(e) * _SM[idx[kp]])
    amp = amp * np.exp(-phase)
    out = np.zeros(NS, dtype=complex)
    np.add.at(out, idx[N], amp)
    return out.reshape(M, M)


def run(params: ModelParams, delta_t: float, delta_k_max: int, N: int,
        mem_budget: int = DEFAULT_MEM_BUDGET,
        progress: Optional[Callable[[int, int], None]] = None) -> QuapiResult:
    spec = SystemSpec.from_params(params)
    coeffs = influence_coefficients(params.sd, params.beta, delta_t, delta_k_max, N)
    return propagate(spec, coeffs, initial_state(spec), N, mem_budget, progress)


# --- convergence -----------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceReport:
    results: Dict[Tuple[int, float], QuapiResult]
    pairwise: Dict[Tuple[Tuple[int, float], Tuple[int, float]], float]
    converged: bool
    threshold: float


def _on_grid(res: QuapiResult, t: np.ndarray) -> np.ndarray:
    return np.interp(t, res.t, res.P)


def convergence_sweep(params: ModelParams, t_max: float, delta_k_list: Sequence[int],
                      delta_t_list: Sequence[float], threshold: float = 0.02,
                      mem_budget: int = DEFAULT_MEM_BUDGET) -> ConvergenceReport:
    """Run every (dk, dt) pair and compare on a common grid.

    Not converged when, at any dt, the two largest dk differ by more than
    ``threshold`` in max norm.
    """
    if not delta_k_list or not delta_t_list:
        raise ValueError("delta_k_list and delta_t_list must be non-empty")
    dks = sorted(set(int(d) for d in delta_k_list))
    dts = sorted(set(float(d) for d in delta_t_list))
    results = {}
    for dt in dts:
        N = int(round(t_max / dt))
        for dk in dks:
            results[(dk, dt)] = run(params, dt, dk, max(N, dk), mem_budget)
    t_common = np.linspace(0.0, min(r.t[-1] for r in results.values()), 401)
    keys = list(results)
    pairwise = {}
    for a in range(len(keys)):
        for b in range(a + 1, len(keys)):
            pa, pb = _on_grid(results[keys[a]], t_common), _on_grid(results[keys[b]], t_common)
            pairwise[(keys[a], keys[b])] = float(np.max(np.abs(pa - pb)))
    converged = True
    if len(dks) > 1:
        for dt in dts:
            key = ((dks[-2], dt), (dks[-1], dt))
            if pairwise[key] > threshold:
                converged = False
    return ConvergenceReport(results, pairwise, converged, threshold)
