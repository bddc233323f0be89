"""Quadratic-form representation of the ZF transmit-power objective.

For K = N <= M the BS power needed to deliver powers p through phases theta,

    F(theta) = tr((H2 Phi H1)^+ P (H2 Phi H1)^+H),

equals ||H1^+ Phi^-1 W||_F^2 with W = H2^-1 P^(1/2), and hence the quadratic
form y^H A y in y = vec(Phi^-1), where

    A = (W^T kron H1^+)^H (W^T kron H1^+) = (conj(W) W^T) kron (H1^+H H1^+).

Only the N entries of y at the diagonal positions n*N + n are nonzero, so
everything downstream works with the N x N restriction of A, which is the
Hadamard product of the two Gram factors, and with x = exp(-1j*theta).
"""

from __future__ import annotations

import numpy as np

from .model import ChannelRealization, PhasesLike, PowersLike, as_powers, as_theta, right_inverse


def check_factorizable(ch: ChannelRealization) -> None:
    if not (ch.K == ch.N <= ch.M):
        raise ValueError(
            f"quadratic form needs K == N <= M, got K={ch.K}, N={ch.N}, M={ch.M}"
        )


def weighted_user_inverse(ch: ChannelRealization, powers: PowersLike) -> np.ndarray:
    """W = H2^-1 diag(sqrt(p)), the pseudo-inverse of P^(-1/2) H2 when p > 0."""
    check_factorizable(ch)
    return right_inverse(ch.H2) * np.sqrt(as_powers(powers))[None, :]


def gram_factors(ch: ChannelRealization, powers: PowersLike) -> tuple[np.ndarray, np.ndarray]:
    """Return (conj(W) W^T, H1^+H H1^+), both N x N Hermitian PSD."""
    W = weighted_user_inverse(ch, powers)
    H1p = right_inverse(ch.H1)
    return W.conj() @ W.T, H1p.conj().T @ H1p


def reduced_matrix(ch: ChannelRealization, powers: PowersLike) -> np.ndarray:
    """N x N restriction of A to the diagonal support of vec(Phi^-1)."""
    b1, b2 = gram_factors(ch, powers)
    return b1 * b2


def explicit_matrix(ch: ChannelRealization, powers: PowersLike) -> np.ndarray:
    """Full N^2 x N^2 matrix A.  O(N^4) memory; for cross-checks only."""
    W = weighted_user_inverse(ch, powers)
    B = np.kron(W.T, right_inverse(ch.H1))
    return B.conj().T @ B


def lambda_max(ch: ChannelRealization, powers: PowersLike) -> float:
    """Largest eigenvalue of A via the Kronecker singular-value product."""
    W = weighted_user_inverse(ch, powers)
    H1p = right_inverse(ch.H1)
    s_w = np.linalg.norm(W, 2)
    s_h = np.linalg.norm(H1p, 2)
    return float((s_w * s_h) ** 2)


def support_indices(n: int) -> np.ndarray:
    """0-based positions of the diagonal of an n x n matrix in its column-major vec."""
    return np.arange(n) * (n + 1)


def compact_vector(phases: PhasesLike) -> np.ndarray:
    """Nonzero entries of vec(Phi^-1): exp(-1j*theta)."""
    return np.exp(-1j * as_theta(phases))


def full_vector(phases: PhasesLike) -> np.ndarray:
    """vec(Phi^-1) of length N^2 (column-major)."""
    x = compact_vector(phases)
    y = np.zeros(x.size ** 2, dtype=complex)
    y[support_indices(x.size)] = x
    return y


def quadratic_value(a_red: np.ndarray, x: np.ndarray) -> float:
    return float(np.real(np.vdot(x, a_red @ x)))


def objective_direct(phases: PhasesLike, powers: PowersLike, ch: ChannelRealization) -> float:
    """tr(G P G^H) with G the pseudo-inverse of the effective channel."""
    phi = np.exp(1j * as_theta(phases))
    G = np.linalg.pinv((ch.H2 * phi[None, :]) @ ch.H1)
    p = as_powers(powers)
    return float(np.real(np.trace((G * p[None, :]) @ G.conj().T)))


def objective_frobenius(phases: PhasesLike, powers: PowersLike, ch: ChannelRealization) -> float:
    """||H1^+ Phi^-1 W||_F^2."""
    W = weighted_user_inverse(ch, powers)
    x = compact_vector(phases)
    return float(np.linalg.norm(right_inverse(ch.H1) @ (x[:, None] * W)) ** 2)


def objective_quadratic(phases: PhasesLike, powers: PowersLike, ch: ChannelRealization) -> float:
    """y^H A y on the reduced representation."""
    return quadratic_value(reduced_matrix(ch, powers), compact_vector(phases))

