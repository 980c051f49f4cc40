"""Pilot assignment and per-AP MMSE channel estimation with pilot contamination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cfidd.channel import ChannelRealization, complex_normal
from cfidd.errors import ConfigurationError, NumericError


@dataclass(frozen=True)
class PilotBook:
    """Pilot indices are 0-based: UE ``k`` transmits pilot ``assignment[k]``."""

    tau_p: int
    assignment: np.ndarray  # (K,) int

    @property
    def num_ues(self) -> int:
        return self.assignment.shape[0]

    def copilots(self, k: int) -> np.ndarray:
        """UEs sharing UE ``k``'s pilot, including ``k`` itself."""
        return np.flatnonzero(self.assignment == self.assignment[k])

    def users_of(self, t: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == t)


@dataclass(frozen=True)
class ChannelEstimate:
    g_hat: np.ndarray  # (K, L, N)
    err_cov: np.ndarray | None  # (K, L, N, N); None means perfect CSI
    psi: np.ndarray | None = None  # (tau_p, L, N, N)

    @classmethod
    def perfect(cls, channel: ChannelRealization) -> "ChannelEstimate":
        return cls(channel.g.copy(), None, None)

    @property
    def is_perfect(self) -> bool:
        return self.err_cov is None

    def error_covariance(self) -> np.ndarray:
        """Error covariances, zeros under perfect CSI."""
        if self.err_cov is not None:
            return self.err_cov
        K, L, N = self.g_hat.shape
        return np.zeros((K, L, N, N), dtype=complex)


def assign_pilots(num_ues: int, tau_p: int, rng: np.random.Generator | None = None) -> PilotBook:
    """Round-robin assignment ``t_k = k mod tau_p``.

    ``rng`` is accepted for interface symmetry and is not used.
    """
    if tau_p < 1:
        raise ConfigurationError(f"tau_p must be >= 1, got {tau_p}")
    return PilotBook(int(tau_p), np.arange(num_ues) % tau_p)


def _as_power_vector(eta, num_ues: int) -> np.ndarray:
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (num_ues,)).copy()
    if np.any(eta <= 0):
        raise ConfigurationError("pilot powers must be positive")
    return eta


def estimate_channels(correlations: np.ndarray, channel: ChannelRealization, pilots: PilotBook, eta,
                      sigma2: float, rng: np.random.Generator, psi_noise: float | None = None) -> ChannelEstimate:
    """MMSE estimates from the despread pilot observations.

    ``correlations`` holds ``Omega_kl`` with shape ``(K, L, N, N)``; ``eta`` is the
    pilot transmit power (scalar or per UE) and ``sigma2`` the noise power.
    ``psi_noise`` is the noise level the estimator assumes in ``Psi`` (defaults to
    ``sigma2``; ``1.0`` gives the unit-noise form). The returned error covariance
    is the one implied by that assumption.
    """
    K, L, N = channel.g.shape
    eta = _as_power_vector(eta, K)
    tau = pilots.tau_p
    amp = np.sqrt(eta * tau)
    eye = (sigma2 if psi_noise is None else psi_noise) * np.eye(N)

    psi = np.empty((tau, L, N, N), dtype=complex)
    y_pilot = complex_normal((tau, L, N), rng, sigma2)
    for t in range(tau):
        users = pilots.users_of(t)
        psi[t] = eye + np.einsum("j,jlab->lab", eta[users] * tau, correlations[users])
        y_pilot[t] += np.einsum("j,jln->ln", amp[users], channel.g[users])

    try:
        psi_inv = np.linalg.inv(psi[pilots.assignment])  # (K, L, N, N)
    except np.linalg.LinAlgError as exc:
        raise NumericError("pilot observation covariance is singular") from exc

    omega_psi_inv = correlations @ psi_inv
    g_hat = amp[:, None, None] * np.einsum("klab,klb->kla", omega_psi_inv, y_pilot[pilots.assignment])
    err_cov = correlations - (eta * tau)[:, None, None, None] * omega_psi_inv @ correlations
    err_cov = 0.5 * (err_cov + np.conj(np.swapaxes(err_cov, -1, -2)))
    return ChannelEstimate(g_hat, err_cov, psi)


def estimate_covariance(correlations: np.ndarray, estimate: ChannelEstimate, pilots: PilotBook, eta) -> np.ndarray:
    """Covariance of the estimate, ``eta_k tau_p Omega Psi^-1 Omega``, shape ``(K, L, N, N)``."""
    K = correlations.shape[0]
    eta = _as_power_vector(eta, K)
    psi_inv = np.linalg.inv(estimate.psi[pilots.assignment])
    return (eta * pilots.tau_p)[:, None, None, None] * correlations @ psi_inv @ correlations
