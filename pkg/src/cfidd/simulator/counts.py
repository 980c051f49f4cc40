"""Closed-form multiplication counts per detector and fronthaul signaling loads."""

from __future__ import annotations

from typing import NamedTuple

from cfidd.errors import ConfigurationError

DETECTORS = ("mmse", "sic", "list")
_ALIASES = {"lmmse": "mmse", "softic": "mmse"}
MODES = ("centralized", "decentralized")


def _complexity_rows(N: int, L: int, K: int, Mc: int) -> dict:
    Q = 2**Mc
    NL = N * L
    return {
        ("decentralized", "mmse"): 2 * N**2 * L * K + 2 * K**2 * NL + 8 * K * NL + 4 * K * L * Q
        + 2 * Mc * K * L * Q + K * L,
        ("centralized", "mmse"): 2 * N**2 * L**2 * K + 8 * K * NL + 2 * K**2 * NL + 4 * K * Q
        + 2 * Mc * K * Q + K,
        ("decentralized", "sic"): 4 * N**2 * L * K + 2 * K**2 * NL + 8 * K * NL + 9 * K * L * Q
        + 4 * Mc * K * L * Q + K * L,
        ("centralized", "sic"): 2 * (NL * K) ** 2 + 2 * NL**2 * K + K**2 * NL + 5 * NL * K + K
        + 9 * K * Q + 4 * Mc * K * Q,
        ("decentralized", "list"): 4 * N**2 * L * K + 5 * K**2 * NL + 12 * K * NL + 9 * K * L * Q
        + 4 * Mc * K * L * Q + 2 * K * L,
        ("centralized", "list"): 2 * (NL * K) ** 2 + 2 * NL**2 * K + 3 * K**2 * NL + 9 * NL * K + K
        + 9 * K * Q + 4 * Mc * K * Q,
    }


def _positive(**values) -> None:
    for name, value in values.items():
        if int(value) != value or value < 1:
            raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")


def complexity_count(detector_id: str, mode: str, N: int, L: int, K: int, Mc: int = 2) -> int:
    """Multiplications per detection pass for ``detector_id`` in ``mode``."""
    _positive(N=N, L=L, K=K, Mc=Mc)
    rows = _complexity_rows(int(N), int(L), int(K), int(Mc))
    try:
        return rows[(mode, _ALIASES.get(detector_id, detector_id))]
    except KeyError:
        raise ConfigurationError(f"unknown detector {detector_id!r} in mode {mode!r}; "
                                 f"expected one of {DETECTORS} x {MODES}") from None


class SignalingLoad(NamedTuple):
    per_block: int
    statistical: int | float
    llr_load: int = 0


def signaling_count(mode: str, tau_c: int, tau_p: int, N: int, L: int, K: int,
                    C_leng: int = 256) -> SignalingLoad:
    """Complex scalars sent from the APs to the CPU.

    Centralized processing forwards every received sample and the spatial
    correlation statistics; decentralized processing forwards per-UE local
    estimates for the data part of the block and, separately, the LLR frames.
    """
    _positive(tau_c=tau_c, tau_p=tau_p, N=N, L=L, K=K, C_leng=C_leng)
    if tau_p >= tau_c:
        raise ConfigurationError(f"tau_p={tau_p} must be smaller than tau_c={tau_c}")
    if mode == "centralized":
        stats = K * L * N**2 / 2
        return SignalingLoad(tau_c * N * L, int(stats) if stats.is_integer() else stats)
    if mode == "decentralized":
        return SignalingLoad((tau_c - tau_p) * K * L, 0, K * C_leng * L)
    raise ConfigurationError(f"unknown processing mode {mode!r}; expected one of {MODES}")
