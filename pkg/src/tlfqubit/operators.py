"""Spin operators on the qubit (A) x fluctuator (B) product space.

Basis order is ``|A B>`` with ``|up>`` first: (uu, ud, du, dd), sigma_z|up> = +|up>.
"""
import numpy as np

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SP = np.array([[0, 1], [0, 0]], dtype=complex)  # sigma_+ = |up><down|
SM = SP.T.copy()


def on_a(op: np.ndarray) -> np.ndarray:
    return np.kron(op, I2)


def on_b(op: np.ndarray) -> np.ndarray:
    return np.kron(I2, op)


def ab(op_a: np.ndarray, op_b: np.ndarray) -> np.ndarray:
    return np.kron(op_a, op_b)


def bare_hamiltonian(delta_A: float, delta_B: float, g0: float) -> np.ndarray:
    """H_A + H_AB + (delta_B/2) sigma_z^B."""
    return (0.5 * delta_A * on_a(SZ) + 0.5 * g0 * ab(SX, SX)
            + 0.5 * delta_B * on_b(SZ))


def plus_x_state() -> np.ndarray:
    """Density matrix of the upper sigma_x eigenstate of both spins."""
    return np.full((4, 4), 0.25, dtype=complex)


def spin_rotation(theta0: float) -> np.ndarray:
    """exp(i (theta0/2) sigma_y^A sigma_x^B), the spin part of the polaron generator."""
    phi = 0.5 * theta0
    return np.cos(phi) * np.eye(4) + 1j * np.sin(phi) * ab(SY, SX)
