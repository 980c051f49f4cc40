"""Gray-labelled constellations, bit-to-symbol mapping and the soft demapper.

LLRs follow the convention ``log P(b = 0) / P(b = 1)``: bit value 0 is the
``+1`` antipodal level, so a positive LLR favours bit 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from cfidd.errors import ConfigurationError, ContractError

LLR_CLIP = 50.0


def _pam_tail(bits: np.ndarray) -> np.ndarray:
    # Gray PAM magnitude recursion of 3GPP TS 38.211 (bits MSB first).
    width = bits.shape[1]
    if width == 0:
        return np.ones(bits.shape[0], dtype=int)
    return 2**width - (1 - 2 * bits[:, 0].astype(int)) * _pam_tail(bits[:, 1:])


def _gray_pam(bits: np.ndarray) -> np.ndarray:
    return (1 - 2 * bits[:, 0].astype(int)) * _pam_tail(bits[:, 1:])


@dataclass(frozen=True)
class Constellation:
    points: np.ndarray  # (M,) complex, index = natural-binary value of the label
    labels: np.ndarray  # (M, Mc) uint8, MSB first
    energies: np.ndarray  # (M,) |s|^2 evaluated from the integer grid
    rho: float

    @classmethod
    def qam(cls, bits_per_symbol: int = 2, rho: float = 1.0) -> "Constellation":
        """Gray-labelled BPSK (``bits_per_symbol=1``) or square QAM with average energy ``rho``."""
        mc = int(bits_per_symbol)
        if mc < 1 or (mc > 1 and mc % 2):
            raise ConfigurationError(f"bits per symbol must be 1 or even, got {bits_per_symbol}")
        if rho <= 0:
            raise ConfigurationError(f"symbol energy must be positive, got {rho}")
        size = 2**mc
        labels = ((np.arange(size)[:, None] >> np.arange(mc - 1, -1, -1)) & 1).astype(np.uint8)
        if mc == 1:
            i_amp, q_amp = _gray_pam(labels), np.zeros(size, dtype=int)
        else:
            i_amp, q_amp = _gray_pam(labels[:, 0::2]), _gray_pam(labels[:, 1::2])
        raw_energy = i_amp**2 + q_amp**2
        mean_energy = raw_energy.mean()
        points = (i_amp + 1j * q_amp) * np.sqrt(rho / mean_energy)
        energies = raw_energy * (rho / mean_energy)
        return cls(points, labels, energies, float(rho))

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def signs(self) -> np.ndarray:
        """Antipodal bit levels ``+1`` (bit 0) / ``-1`` (bit 1), shape ``(M, Mc)``."""
        return 1.0 - 2.0 * self.labels

    def nearest(self, u: np.ndarray) -> np.ndarray:
        """Index of the closest point for each entry of ``u``."""
        return np.argmin(np.abs(np.asarray(u)[..., None] - self.points), axis=-1)

    def slice(self, u: np.ndarray) -> np.ndarray:
        return self.points[self.nearest(u)]

    def log_priors(self, prior_llrs: np.ndarray) -> np.ndarray:
        """``log P(s)`` for every point from per-bit LLRs ``(..., Mc)`` -> ``(..., M)``."""
        llr = np.asarray(prior_llrs, dtype=float)
        # log of prod_l [1 + exp(-s^{b_l} Lambda_l)]^{-1}
        return -np.logaddexp(0.0, -llr[..., None, :] * self.signs).sum(axis=-1)


def map_symbols(bits: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Map ``(..., n)`` bits to ``(..., n / Mc)`` symbols."""
    bits = np.asarray(bits)
    mc = constellation.bits_per_symbol
    if bits.shape[-1] % mc:
        raise ContractError(f"{bits.shape[-1]} bits cannot be split into {mc}-bit symbols")
    groups = bits.reshape(*bits.shape[:-1], -1, mc).astype(int)
    index = groups @ (1 << np.arange(mc - 1, -1, -1))
    return constellation.points[index]


def symbol_bits(indices: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Inverse of :func:`map_symbols` on point indices ``(..., T)`` -> bits ``(..., T*Mc)``."""
    labels = constellation.labels[np.asarray(indices)]
    return labels.reshape(*labels.shape[:-2], -1)


def detector_llrs(u, omega, kappa2, prior_llrs, constellation: Constellation,
                  clip: float = LLR_CLIP) -> np.ndarray:
    """Extrinsic bit LLRs of ``u = omega * s + z`` with ``z ~ CN(0, kappa2)``.

    ``u``, ``omega`` and ``kappa2`` broadcast to a common shape ``S``;
    ``prior_llrs`` has shape ``S + (Mc,)`` or is ``None`` for flat priors.
    Returns an array of shape ``S + (Mc,)`` clipped to ``[-clip, clip]``.
    """
    u, omega, kappa2 = np.broadcast_arrays(np.asarray(u), np.asarray(omega), np.asarray(kappa2, dtype=float))
    mc = constellation.bits_per_symbol
    if prior_llrs is None:
        prior = np.zeros(u.shape + (mc,))
    else:
        prior = np.broadcast_to(np.asarray(prior_llrs, dtype=float), u.shape + (mc,))

    dist = np.abs(u[..., None] - omega[..., None] * constellation.points) ** 2
    metric = -dist / kappa2[..., None] + constellation.log_priors(prior)
    out = np.empty(u.shape + (mc,))
    for b in range(mc):
        zero = constellation.labels[:, b] == 0
        out[..., b] = logsumexp(metric[..., zero], axis=-1) - logsumexp(metric[..., ~zero], axis=-1)
    return np.clip(out - prior, -clip, clip)
