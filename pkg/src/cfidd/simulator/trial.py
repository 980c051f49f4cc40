"""Monte-Carlo trials: one coherence block through the full transmit/receive chain.

A trial draws channels, pilot noise, messages and data noise once and runs
every configured scheme on them (common random numbers), so scheme
comparisons at a given SNR are paired. Random streams are keyed by the seed
and the trial index only, hence the same draws are reused at every SNR point
and results do not depend on how trials are scheduled over workers.
"""

from __future__ import annotations

import functools
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from cfidd import channel as chan
from cfidd.coding.ldpc import LdpcCode, default_code, encode, spa_decode
from cfidd.coding.mapping import Constellation, detector_llrs, map_symbols
from cfidd.detection import Receiver, list_sic_pass, lmmse_pass, soft_ic_pass, soft_symbol_stats
from cfidd.estimation import ChannelEstimate, assign_pilots, estimate_channels
from cfidd.fusion import fuse
from cfidd.selection import select_aps
from cfidd.simulator.config import SimConfig

_GEOMETRY_STREAM = 0
_TRIAL_STREAM = 1


class Scheme(NamedTuple):
    mode: str
    detector: str
    csi: str
    ap_mode: str
    fusion: str  # "none" for centralized processing

    @property
    def detector_id(self) -> str:
        return f"{self.mode}_{self.detector}"


def schemes(cfg: SimConfig) -> list[Scheme]:
    out = []
    for mode, det, csi, ap in itertools.product(cfg.modes, cfg.detectors, cfg.csi, cfg.ap_mode):
        fusions = ("none",) if mode == "centralized" else cfg.fusion
        out.extend(Scheme(mode, det, csi, ap, f) for f in fusions)
    return out


def snr_of(g: np.ndarray, rho, sigma2: float) -> float:
    """Average receive SNR ``sum_kl rho_k ||g_kl||^2 / (sigma2 N L K)`` for ``g`` of shape ``(K, L, N)``."""
    K, L, N = g.shape
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (K,))
    power = np.sum(rho[:, None] * np.sum(np.abs(g) ** 2, axis=-1))
    return float(power / (sigma2 * N * L * K))


def noise_for_snr(g: np.ndarray, rho, snr_db: float) -> float:
    """Noise power that puts :func:`snr_of` at ``snr_db``."""
    return snr_of(g, rho, 1.0) / 10.0 ** (snr_db / 10.0)


@dataclass(frozen=True)
class Network:
    geometry: chan.Geometry
    large_scale: chan.LargeScale
    correlations: np.ndarray
    sqrt_correlations: np.ndarray


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@functools.lru_cache(maxsize=8)
def network_for_block(cfg: SimConfig, block: int) -> Network:
    """Geometry, shadowing and correlation matrices shared by a block of trials."""
    rng = _stream(cfg.seed, _GEOMETRY_STREAM, block)
    geometry = chan.place_network(cfg.L, cfg.K, cfg.D, rng)
    large_scale = chan.large_scale_fading(geometry, rng)
    corr = chan.correlation_matrices(large_scale, geometry, cfg.N, cfg.asd_deg)
    return Network(geometry, large_scale, corr, chan.matrix_sqrt(corr))


@functools.lru_cache(maxsize=4)
def _constellation(bits_per_symbol: int, rho: float) -> Constellation:
    return Constellation.qam(bits_per_symbol, rho)


@functools.lru_cache(maxsize=1)
def _default_code() -> LdpcCode:
    return default_code()


@dataclass
class TrialResult:
    errors: dict  # Scheme -> (idd_iters,) float message-bit errors after each IDD iteration
    bits: int  # message bits per scheme
    snr_db: float  # realized average SNR


def _to_symbol_llrs(llrs: np.ndarray, mc: int) -> np.ndarray:
    # (V, K, C) codeword LLRs -> (V, T, K, Mc) per-symbol bit LLRs
    V, K, C = llrs.shape
    return llrs.reshape(V, K, C // mc, mc).transpose(0, 2, 1, 3)


def _to_codeword_llrs(llrs: np.ndarray) -> np.ndarray:
    V, T, K, mc = llrs.shape
    return llrs.transpose(0, 2, 1, 3).reshape(V, K, T * mc)


def _detect(detector: str, y, rx: Receiver, priors: np.ndarray, sigma2: float, cfg: SimConfig,
            const: Constellation):
    if detector == "lmmse":
        # linear MMSE ignores the decoder feedback altogether
        out = lmmse_pass(y, rx, sigma2, cfg.rho)
        return detector_llrs(out.u, out.omega, out.kappa2, None, const)
    flat = not np.any(priors)
    stats = soft_symbol_stats(priors[:, :1] if flat else priors, const)
    if detector == "softic":
        out = soft_ic_pass(y, rx, stats, sigma2, cfg.rho, energy=cfg.energy)
    elif detector == "sic":
        out = list_sic_pass(y, rx, stats, sigma2, cfg.rho, const, d_th=np.inf, list_size=1, energy=cfg.energy,
                            prior_llrs=priors)
    elif detector == "list":
        out = list_sic_pass(y, rx, stats, sigma2, cfg.rho, const, d_th=cfg.d_th, list_size=cfg.list_size,
                            energy=cfg.energy, prior_llrs=priors)
    else:
        raise ValueError(f"unknown detector {detector!r}")
    return detector_llrs(out.u, out.omega, out.kappa2, priors, const)


def idd_loop(y, rx: Receiver, detector: str, sigma2: float, cfg: SimConfig, const: Constellation,
             code: LdpcCode):
    """Iterate detection and decoding, yielding ``(frames, decoded, served)`` per iteration.

    ``frames`` are the detector's extrinsic LLRs ``(V, K, C)``; ``decoded`` is the
    per-view decoder output for the ``served`` ``(V, K)`` pairs, which also
    supplies the priors of the next detection pass.
    """
    V, K = rx.num_views, rx.num_ues
    mc = const.bits_per_symbol
    T = code.n // mc
    served = rx.mask.any(axis=-1)
    priors = np.zeros((V, T, K, mc))
    for _ in range(cfg.idd_iters):
        frames = _to_codeword_llrs(_detect(detector, y, rx, priors, sigma2, cfg, const))
        frames[~served] = 0.0
        decoded = spa_decode(code, frames[served], cfg.decoder_iters)
        feedback = np.zeros_like(frames)
        feedback[served] = decoded.extrinsic
        priors = _to_symbol_llrs(feedback, mc)
        yield frames, decoded, served


def run_trial(cfg: SimConfig, snr_db: float, trial_index: int, code: LdpcCode | None = None) -> TrialResult:
    """Run every configured scheme on one coherence block at average SNR ``snr_db``."""
    code = _default_code() if code is None else code
    const = _constellation(cfg.bits_per_symbol, cfg.rho)
    if code.n % const.bits_per_symbol:
        raise ValueError("codeword length must be a multiple of the bits per symbol")
    net = network_for_block(cfg, trial_index // cfg.geometry_block)
    rng = _stream(cfg.seed, _TRIAL_STREAM, trial_index)
    K = cfg.K

    channel = chan.sample_channel(net.correlations, rng, net.sqrt_correlations)
    if cfg.snr_reference == "realization":
        sigma2 = noise_for_snr(channel.g, cfg.rho, snr_db)
    else:
        expected = np.real(np.trace(net.correlations, axis1=-2, axis2=-1))
        sigma2 = cfg.rho * expected.sum() / (cfg.N * cfg.L * K) / 10.0 ** (snr_db / 10.0)
    pilots = assign_pilots(K, cfg.tau_p)
    estimate = {
        "imperfect": estimate_channels(net.correlations, channel, pilots, cfg.eta, sigma2, rng,
                                       psi_noise=1.0 if cfg.psi_noise == "unit" else None),
        "perfect": ChannelEstimate.perfect(channel),
    }
    messages = rng.integers(0, 2, size=(K, code.k), dtype=np.uint8)
    symbols = map_symbols(encode(code, messages), const)  # (K, T)
    noise = chan.sample_noise((symbols.shape[1], cfg.N * cfg.L), sigma2, rng)
    y = symbols.T @ channel.stacked().T + noise

    service = {
        "all": select_aps(net.large_scale.beta_db, cfg.beta_th, mode="all_aps"),
        "sel": select_aps(net.large_scale.beta_db, cfg.beta_th, mode="aps_sel", rule=cfg.beta_rule),
    }

    def bit_errors(hard):  # (..., K, C) -> errors per UE (..., K)
        return np.sum(code.message_bits(hard) != messages, axis=-1)

    errors = {}
    for mode, det, csi, ap in itertools.product(cfg.modes, cfg.detectors, cfg.csi, cfg.ap_mode):
        build = Receiver.centralized if mode == "centralized" else Receiver.decentralized
        rx = build(estimate[csi], service[ap])
        fusions = ("none",) if mode == "centralized" else cfg.fusion
        tally = {f: np.zeros(cfg.idd_iters) for f in fusions}
        for it, (frames, decoded, served) in enumerate(idd_loop(y, rx, det, sigma2, cfg, const, code)):
            if mode == "centralized":
                tally["none"][it] = bit_errors(decoded.hard_bits).sum()
                continue
            for rule in fusions:
                if rule == "standard":
                    # each serving AP decides on its own; average over the UE's serving APs
                    per_pair = np.zeros(served.shape)
                    per_pair[served] = np.sum(code.message_bits(decoded.hard_bits) != messages[np.nonzero(served)[1]],
                                              axis=-1)
                    tally[rule][it] = np.sum(per_pair.sum(axis=0) / served.sum(axis=0))
                else:
                    fused = fuse(frames, rule, average=cfg.refine_average)
                    tally[rule][it] = bit_errors(spa_decode(code, fused, cfg.decoder_iters).hard_bits).sum()
        for rule, counts in tally.items():
            errors[Scheme(mode, det, csi, ap, rule)] = counts
    return TrialResult(errors, K * code.k, 10.0 * np.log10(snr_of(channel.g, cfg.rho, sigma2)))


# --- sweeps ---------------------------------------------------------------------------------


@dataclass
class Tally:
    """Accumulated counts of a sweep; ``errors`` is indexed ``[snr, scheme, iteration]``."""

    config: SimConfig
    schemes: list
    errors: np.ndarray
    bits: np.ndarray  # (S,) message bits per scheme
    trials: np.ndarray  # (S,)

    def ber(self, iteration: int = -1) -> np.ndarray:
        """BER per ``(snr, scheme)`` after the given IDD iteration (0-based, default last)."""
        return self.errors[:, :, iteration] / np.maximum(self.bits, 1)[:, None]

    def index(self, **match) -> int:
        hits = [i for i, s in enumerate(self.schemes) if all(getattr(s, k) == v for k, v in match.items())]
        if len(hits) != 1:
            raise KeyError(f"{match} matches {len(hits)} schemes")
        return hits[0]


def _run_chunk(cfg: SimConfig, snr_db: float, indices) -> list:
    return [run_trial(cfg, snr_db, i) for i in indices]


def collect(cfg: SimConfig, progress=None) -> Tally:
    """Run trials per SNR point until every scheme has ``min_bit_errors`` errors or ``max_trials`` is hit.

    Trials run in chunks of ``chunk_size``; the stopping rule is checked between
    chunks, so results are identical for any ``n_jobs``. ``min_bit_errors=0``
    disables early stopping.
    """
    keys = schemes(cfg)
    S = len(cfg.snr_grid)
    errors = np.zeros((S, len(keys), cfg.idd_iters))
    bits = np.zeros(S, dtype=np.int64)
    trials = np.zeros(S, dtype=np.int64)
    pool = ProcessPoolExecutor(cfg.n_jobs) if cfg.n_jobs > 1 else None
    try:
        for s, snr_db in enumerate(cfg.snr_grid):
            while trials[s] < cfg.max_trials:
                start = int(trials[s])
                stop = min(start + cfg.chunk_size, cfg.max_trials)
                if pool is None:
                    results = _run_chunk(cfg, snr_db, range(start, stop))
                else:
                    parts = np.array_split(np.arange(start, stop), cfg.n_jobs)
                    futures = [pool.submit(_run_chunk, cfg, snr_db, part.tolist()) for part in parts if part.size]
                    results = [r for f in futures for r in f.result()]
                for res in results:
                    errors[s] += np.array([res.errors[k] for k in keys])
                    bits[s] += res.bits
                trials[s] = stop
                if progress is not None:
                    progress(snr_db, int(trials[s]), errors[s, :, -1])
                if cfg.min_bit_errors > 0 and np.all(errors[s, :, -1] >= cfg.min_bit_errors):
                    break
    finally:
        if pool is not None:
            pool.shutdown()
    return Tally(cfg, keys, errors, bits, trials)


def run_sweep(cfg: SimConfig, progress=None) -> list:
    """BER records after the final IDD iteration for every scheme and SNR point."""
    from cfidd.simulator.results import records_from_tally

    return records_from_tally(collect(cfg, progress))
