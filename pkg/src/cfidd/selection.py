"""Access-point selection (dynamic cooperation clusters) and the block masks it implies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cfidd.errors import ConfigurationError

MODES = ("all_aps", "aps_sel")
THRESHOLD_RULES = ("relative", "absolute")


@dataclass(frozen=True)
class ServiceMap:
    serve: np.ndarray  # (K, L) bool
    master: np.ndarray  # (K,) int

    @property
    def num_ues(self) -> int:
        return self.serve.shape[0]

    @property
    def num_aps(self) -> int:
        return self.serve.shape[1]

    def serving_aps(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.serve[k])

    def served_ues(self, l: int) -> np.ndarray:
        return np.flatnonzero(self.serve[:, l])

    def antenna_mask(self, num_antennas: int) -> np.ndarray:
        """Diagonal of every ``D_k`` as a boolean ``(K, N*L)`` array (AP-major)."""
        return np.repeat(self.serve, num_antennas, axis=1)

    def block_mask(self, k: int, num_antennas: int) -> np.ndarray:
        """The ``N*L x N*L`` selection matrix ``D_k``."""
        return np.diag(self.antenna_mask(num_antennas)[k].astype(float))


def select_aps(beta_db: np.ndarray, beta_th_db: float = -20.0, mode: str = "aps_sel",
               rule: str = "relative") -> ServiceMap:
    """Build the service map from large-scale fading in dB, shape ``(K, L)``.

    The master AP of UE ``k`` is the one with the largest large-scale fading
    (lowest index on ties) and always serves. Under ``rule="relative"`` AP ``l``
    also serves when ``beta_kl >= beta_k,master + beta_th``; under
    ``rule="absolute"`` when ``beta_kl >= beta_th``.
    """
    beta_db = np.asarray(beta_db, dtype=float)
    if beta_db.ndim != 2 or beta_db.size == 0:
        raise ConfigurationError("large-scale fading must be a non-empty K x L matrix")
    if mode not in MODES:
        raise ConfigurationError(f"unknown AP selection mode {mode!r}; expected one of {MODES}")
    if rule not in THRESHOLD_RULES:
        raise ConfigurationError(f"unknown threshold rule {rule!r}; expected one of {THRESHOLD_RULES}")
    if not np.isfinite(beta_th_db):
        raise ConfigurationError("beta_th must be finite")

    K, L = beta_db.shape
    master = np.argmax(beta_db, axis=1)
    if mode == "all_aps":
        return ServiceMap(np.ones((K, L), dtype=bool), master)

    if rule == "relative":
        floor = beta_db[np.arange(K), master] + beta_th_db
        serve = beta_db >= floor[:, None]
    else:
        serve = beta_db >= beta_th_db
    serve[np.arange(K), master] = True
    return ServiceMap(serve, master)
