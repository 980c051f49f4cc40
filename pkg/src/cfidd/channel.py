"""Network geometry, large-scale fading and correlated Rayleigh channel generation.

Array conventions used throughout the package:

* per-(UE, AP) quantities are indexed ``[k, l]``;
* channel vectors are stored as ``g[k, l, :]`` with shape ``(K, L, N)``;
* the stacked channel matrix ``G`` has shape ``(N*L, K)`` and is AP-major,
  i.e. rows ``l*N:(l+1)*N`` belong to AP ``l``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cfidd.errors import ConfigurationError, NumericError

MIN_DISTANCE_M = 10.0
PATHLOSS_INTERCEPT_DB = -30.5
PATHLOSS_SLOPE_DB = 36.7
SHADOWING_STD_DB = 4.0
ANTENNA_SPACING = 0.5  # in wavelengths


@dataclass(frozen=True)
class Geometry:
    ap_positions: np.ndarray  # (L, 2) metres
    ue_positions: np.ndarray  # (K, 2) metres
    distances: np.ndarray  # (K, L) metres, clamped
    side: float

    @property
    def num_aps(self) -> int:
        return self.ap_positions.shape[0]

    @property
    def num_ues(self) -> int:
        return self.ue_positions.shape[0]

    def azimuths(self) -> np.ndarray:
        """Angle (radians) of each UE as seen from each AP, shape ``(K, L)``."""
        delta = self.ue_positions[:, None, :] - self.ap_positions[None, :, :]
        return np.arctan2(delta[..., 1], delta[..., 0])


@dataclass(frozen=True)
class LargeScale:
    beta_db: np.ndarray  # (K, L)

    @property
    def beta_lin(self) -> np.ndarray:
        return 10.0 ** (self.beta_db / 10.0)


@dataclass(frozen=True)
class ChannelRealization:
    g: np.ndarray  # (K, L, N) complex

    @property
    def num_ues(self) -> int:
        return self.g.shape[0]

    @property
    def num_aps(self) -> int:
        return self.g.shape[1]

    @property
    def num_antennas(self) -> int:
        return self.g.shape[2]

    def stacked(self) -> np.ndarray:
        """AP-major stacked channel matrix of shape ``(N*L, K)``."""
        return stack_channels(self.g)


def stack_channels(g: np.ndarray) -> np.ndarray:
    """Reshape per-(k, l) vectors ``(K, L, N)`` into the ``(N*L, K)`` matrix."""
    K, L, N = g.shape
    return g.transpose(1, 2, 0).reshape(L * N, K)


def pairwise_distances(ue_positions, ap_positions, min_distance=MIN_DISTANCE_M):
    d = np.linalg.norm(ue_positions[:, None, :] - ap_positions[None, :, :], axis=-1)
    return np.maximum(d, min_distance)


def place_network(num_aps: int, num_ues: int, side: float, rng: np.random.Generator,
                  min_distance: float = MIN_DISTANCE_M) -> Geometry:
    """Drop APs and UEs uniformly at random in a ``side x side`` square (no wrap-around)."""
    if num_aps < 1 or num_ues < 1:
        raise ConfigurationError(f"need at least one AP and one UE, got L={num_aps}, K={num_ues}")
    if not side > 0:
        raise ConfigurationError(f"square side must be positive, got {side}")
    ap = rng.uniform(0.0, side, size=(num_aps, 2))
    ue = rng.uniform(0.0, side, size=(num_ues, 2))
    return Geometry(ap, ue, pairwise_distances(ue, ap, min_distance), float(side))


def pathloss_db(distances: np.ndarray) -> np.ndarray:
    """Urban-microcell median gain in dB for distances in metres."""
    return PATHLOSS_INTERCEPT_DB - PATHLOSS_SLOPE_DB * np.log10(distances)


def large_scale_fading(geometry: Geometry, rng: np.random.Generator | None,
                       shadowing_std_db: float = SHADOWING_STD_DB) -> LargeScale:
    """Pathloss plus log-normal shadowing. ``rng=None`` or a zero std disables shadowing."""
    beta_db = pathloss_db(geometry.distances)
    if rng is not None and shadowing_std_db > 0:
        beta_db = beta_db + shadowing_std_db * rng.standard_normal(beta_db.shape)
    return LargeScale(beta_db)


def spatial_correlation(beta: float, nominal_angle: float, asd_deg: float, num_antennas: int,
                        spacing: float = ANTENNA_SPACING) -> np.ndarray:
    """Gaussian local scattering correlation matrix for a uniform linear array.

    Uses the small-angle closed form, which is a Gaussian-kernel Toeplitz matrix
    and therefore Hermitian positive semidefinite. The diagonal equals ``beta``.
    """
    if num_antennas < 1:
        raise ConfigurationError(f"number of antennas must be >= 1, got {num_antennas}")
    if asd_deg < 0:
        raise ConfigurationError(f"angular standard deviation must be >= 0, got {asd_deg}")
    sigma = np.deg2rad(asd_deg)
    lag = np.subtract.outer(np.arange(num_antennas), np.arange(num_antennas))
    phase = 2.0 * np.pi * spacing * lag
    omega = np.exp(1j * phase * np.sin(nominal_angle)) * np.exp(-0.5 * sigma**2 * (phase * np.cos(nominal_angle)) ** 2)
    return beta * omega


def correlation_matrices(large_scale: LargeScale, geometry: Geometry, num_antennas: int,
                         asd_deg: float = 15.0) -> np.ndarray:
    """All ``Omega_kl`` as an array of shape ``(K, L, N, N)``."""
    beta = large_scale.beta_lin
    angles = geometry.azimuths()
    K, L = beta.shape
    omega = np.empty((K, L, num_antennas, num_antennas), dtype=complex)
    for k in range(K):
        for l in range(L):
            omega[k, l] = spatial_correlation(beta[k, l], angles[k, l], asd_deg, num_antennas)
    return omega


def matrix_sqrt(omega: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Hermitian square roots of a stack of PSD matrices ``(..., N, N)``.

    Eigenvalues slightly below zero (roundoff) are floored; an eigenvalue below
    ``-tol * trace`` raises :class:`NumericError` naming the offending index.
    """
    vals, vecs = np.linalg.eigh(omega)
    trace = np.real(np.trace(omega, axis1=-2, axis2=-1))
    bad = vals[..., 0] < -tol * np.maximum(trace, np.finfo(float).tiny)
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NumericError(f"correlation matrix at index {idx} is not positive semidefinite")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)[..., None, :]) @ np.conj(np.swapaxes(vecs, -1, -2))


def complex_normal(shape, rng: np.random.Generator, variance: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian samples with the given per-entry variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_channel(correlations: np.ndarray, rng: np.random.Generator,
                   sqrt_correlations: np.ndarray | None = None) -> ChannelRealization:
    """Draw ``g_kl ~ CN(0, Omega_kl)`` for every pair.

    ``sqrt_correlations`` may be passed to reuse a cached factorization.
    """
    root = matrix_sqrt(correlations) if sqrt_correlations is None else sqrt_correlations
    e = complex_normal(root.shape[:-1], rng)
    return ChannelRealization(np.einsum("klij,klj->kli", root, e))


def sample_noise(dim, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. ``CN(0, sigma2)`` vector (or array, if ``dim`` is a shape tuple)."""
    if sigma2 < 0:
        raise ConfigurationError(f"noise power must be non-negative, got {sigma2}")
    return complex_normal(dim, rng, sigma2)
