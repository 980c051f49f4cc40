"""Soft-input MMSE detectors for centralized and per-AP (decentralized) processing.

All detectors operate on a :class:`Receiver`, a stack of ``V`` receive-side
views of the network. Centralized processing is a single view with all
``N*L`` antennas; decentralized processing has one view per AP with ``N``
antennas. Arrays carry a leading view axis ``V`` and a symbol-slot axis ``T``;
per-UE quantities are indexed last.

AP selection is applied by embedding: rows and columns of inactive antennas
are replaced by the identity and the matched vector is zeroed there, so the
filter is exactly zero outside the serving set and equals the compact
(deleted-rows) solution on it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from cfidd.coding.mapping import Constellation
from cfidd.errors import ConfigurationError, ContractError, NumericError, SingularFilterWarning
from cfidd.estimation import ChannelEstimate
from cfidd.selection import ServiceMap

KAPPA2_FLOOR = 1e-12
OMEGA_IMAG_TOL = 1e-9
ENERGY_MODES = ("mean", "true")


@dataclass(frozen=True)
class SoftSymbolStats:
    mean: np.ndarray  # (..., K) complex
    var: np.ndarray  # (..., K) real


@dataclass(frozen=True)
class DetectorOutput:
    u: np.ndarray  # (V, T, K) soft estimates
    omega: np.ndarray  # (V, T, K) effective gains
    kappa2: np.ndarray  # (V, T, K) residual variances
    hard: np.ndarray | None = None  # (V, T, K) point indices, -1 where a UE was not detected


def soft_symbol_stats(prior_llrs: np.ndarray, constellation: Constellation) -> SoftSymbolStats:
    """Symbol mean and variance from per-bit prior LLRs of shape ``(..., K, Mc)``.

    ``+-inf`` LLRs are allowed and yield point masses.
    """
    prob = np.exp(constellation.log_priors(prior_llrs))
    prob /= prob.sum(axis=-1, keepdims=True)
    mean = prob @ constellation.points
    var = prob @ constellation.energies - np.abs(mean) ** 2
    return SoftSymbolStats(mean, np.clip(var, 0.0, constellation.energies.max()))


@dataclass(frozen=True)
class Receiver:
    mode: str
    g_hat: np.ndarray  # (V, K, n)
    err_cov: np.ndarray | None  # (V, K, n, n)
    mask: np.ndarray  # (V, K, n) bool

    @classmethod
    def centralized(cls, estimate: ChannelEstimate, service: ServiceMap) -> "Receiver":
        K, L, N = estimate.g_hat.shape
        g = estimate.g_hat.reshape(K, L * N)
        cov = None
        if estimate.err_cov is not None:
            cov = np.zeros((K, L * N, L * N), dtype=complex)
            for l in range(L):
                cov[:, l * N:(l + 1) * N, l * N:(l + 1) * N] = estimate.err_cov[:, l]
            cov = cov[None]
        return cls("centralized", g[None], cov, service.antenna_mask(N)[None])

    @classmethod
    def decentralized(cls, estimate: ChannelEstimate, service: ServiceMap) -> "Receiver":
        K, L, N = estimate.g_hat.shape
        g = estimate.g_hat.transpose(1, 0, 2)
        cov = None if estimate.err_cov is None else estimate.err_cov.transpose(1, 0, 2, 3)
        mask = np.repeat(service.serve.T[:, :, None], N, axis=2)
        return cls("decentralized", g, cov, mask)

    @property
    def num_views(self) -> int:
        return self.g_hat.shape[0]

    @property
    def num_ues(self) -> int:
        return self.g_hat.shape[1]

    @property
    def dim(self) -> int:
        return self.g_hat.shape[2]

    @property
    def channel_matrix(self) -> np.ndarray:
        """Estimated channel with UEs as columns, ``(V, n, K)``."""
        return np.swapaxes(self.g_hat, 1, 2)

    def split(self, y: np.ndarray) -> np.ndarray:
        """Arrange stacked observations ``(T, N*L)`` as ``(V, T, n)``."""
        y = np.asarray(y)
        if y.shape[-1] != self.num_views * self.dim:
            raise ContractError(f"observation length {y.shape[-1]} does not match receiver "
                                f"with {self.num_views} views of {self.dim} antennas")
        if self.mode == "centralized":
            return y[None]
        return np.moveaxis(y.reshape(y.shape[0], self.num_views, self.dim), 1, 0)

    def weighted_error_cov(self, weights: np.ndarray) -> np.ndarray | None:
        """``sum_m weights_m C_m`` for weights of shape ``(V, T, K)`` or ``(K,)``."""
        if self.err_cov is None:
            return None
        weights = np.asarray(weights, dtype=float)
        if weights.ndim == 1:
            return np.einsum("m,vmij->vij", weights, self.err_cov)
        return np.einsum("vtm,vmij->vtij", weights, self.err_cov)

    def gains(self) -> np.ndarray:
        """Effective channel gains ``||D_k g_hat_k||``, shape ``(V, K)``."""
        return np.linalg.norm(np.where(self.mask, self.g_hat, 0.0), axis=-1)


def _energy(stats: SoftSymbolStats, rho: np.ndarray, mode: str) -> np.ndarray:
    if mode == "mean":
        return np.abs(stats.mean) ** 2 + stats.var
    if mode == "true":
        return rho + stats.var
    raise ValueError(f"unknown energy mode {mode!r}; expected one of {ENERGY_MODES}")


def _solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(a, b[..., None])[..., 0]
    except np.linalg.LinAlgError:
        warnings.warn("singular filter covariance, using pseudo-inverse", SingularFilterWarning, stacklevel=3)
        return (np.linalg.pinv(a) @ b[..., None])[..., 0]


def _filters(receiver: Receiver, target_var: np.ndarray, energy: np.ndarray, targets: np.ndarray,
             sigma2: float, rho: np.ndarray) -> np.ndarray:
    """Core MMSE solve.

    ``target_var`` has shape ``(V, T, J, K)``: for each of the ``J`` target UEs the
    variance assigned to every UE, with the target's own entry equal to its power.
    Returns filters ``(V, T, J, n)``.
    """
    H = receiver.channel_matrix  # (V, n, K)
    Hh = np.conj(np.swapaxes(H, 1, 2))
    n = receiver.dim
    cov = (H[:, None, None] * target_var[..., None, :]) @ Hh[:, None, None]  # (V, T, J, n, n)
    err = receiver.weighted_error_cov(energy)
    if err is not None:
        cov = cov + err[:, :, None]
    cov = cov + sigma2 * np.eye(n)
    d = receiver.mask[:, targets].astype(float)[:, None]  # (V, 1, J, n)
    cov = cov * d[..., :, None] * d[..., None, :] + np.eye(n) * (1.0 - d)[..., None, :]
    rhs = rho[targets][:, None] * d * receiver.g_hat[:, targets][:, None]  # (V, 1, J, n)
    return _solve(cov, np.broadcast_to(rhs, cov.shape[:-1]))


def mmse_filters(receiver: Receiver, stats: SoftSymbolStats, sigma2: float, rho,
                 energy: str = "mean") -> np.ndarray:
    """Soft-IC MMSE filters for every UE, shape ``(V, T, K, n)``.

    ``stats`` arrays have shape ``(V, T, K)`` (``T`` may be 1 for slot-invariant priors).
    """
    K = receiver.num_ues
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (K,))
    var = np.broadcast_to(stats.var[..., None, :], stats.var.shape[:-1] + (K, K)).copy()
    idx = np.arange(K)
    var[..., idx, idx] = rho
    return _filters(receiver, var, _energy(stats, rho, energy), idx, sigma2, rho)


def awgn_params(filters: np.ndarray, receiver: Receiver, var: np.ndarray, sigma2: float, rho,
                targets: np.ndarray | None = None):
    """Effective gain and residual variance of ``u = omega s + z`` for each filter.

    ``filters`` has shape ``(V, T, J, n)`` for target UEs ``targets`` (all UEs by
    default); ``var`` holds the interferer variances, broadcastable to ``(V, T, J, K)``.
    Returns ``(omega, kappa2)`` of shape ``(V, T, J)``.
    """
    K = receiver.num_ues
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (K,))
    targets = np.arange(K) if targets is None else np.asarray(targets)
    proj = np.conj(filters) @ receiver.channel_matrix[:, None]  # (V, T, J, K)
    j = np.arange(len(targets))
    own = proj[..., j, targets]
    scale = np.maximum(np.abs(own.real), 1.0)
    if np.any(np.abs(own.imag) > OMEGA_IMAG_TOL * scale):
        raise NumericError("effective gain has a non-negligible imaginary part")
    omega = own.real

    var = np.broadcast_to(var, proj.shape).copy()
    var[..., j, targets] = 0.0
    interference = np.sum(var * np.abs(proj) ** 2, axis=-1)
    noise = sigma2 * np.sum(np.abs(filters) ** 2, axis=-1)
    kappa2 = interference + noise
    err = receiver.weighted_error_cov(rho)
    if err is not None:
        kappa2 = kappa2 + np.einsum("vtji,vik,vtjk->vtj", np.conj(filters), err, filters).real
    return omega, np.maximum(kappa2, KAPPA2_FLOOR)


def lmmse_pass(y: np.ndarray, receiver: Receiver, sigma2: float, rho) -> DetectorOutput:
    """Linear MMSE detection without interference cancellation (all priors flat)."""
    V, K = receiver.num_views, receiver.num_ues
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (K,))
    flat = SoftSymbolStats(np.zeros((V, 1, K), dtype=complex), np.broadcast_to(rho, (V, 1, K)).copy())
    w = mmse_filters(receiver, flat, sigma2, rho)
    u = np.einsum("vtkn,vtn->vtk", np.conj(w), receiver.split(y))
    omega, kappa2 = awgn_params(w, receiver, flat.var[..., None, :], sigma2, rho)
    T = u.shape[1]
    return DetectorOutput(u, np.broadcast_to(omega, u.shape).copy(), np.broadcast_to(kappa2, (V, T, K)).copy())


def soft_ic_pass(y: np.ndarray, receiver: Receiver, stats: SoftSymbolStats, sigma2: float, rho,
                 filters: np.ndarray | None = None, energy: str = "mean") -> DetectorOutput:
    """Parallel soft interference cancellation followed by per-UE MMSE filtering."""
    K = receiver.num_ues
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (K,))
    yv = receiver.split(y)
    w = mmse_filters(receiver, stats, sigma2, rho, energy) if filters is None else filters
    if w.shape[-1] != receiver.dim or w.shape[-2] != K:
        raise ContractError(f"filters of shape {w.shape} do not fit the receiver")
    proj = np.conj(w) @ receiver.channel_matrix[:, None]  # (V, T, K, K)
    raw = np.einsum("vtkn,vtn->vtk", np.conj(w), yv)
    mean = np.broadcast_to(stats.mean, raw.shape)
    own = np.diagonal(proj, axis1=-2, axis2=-1)
    interference = (proj @ mean[..., None])[..., 0] - own * mean
    u = raw - interference
    omega, kappa2 = awgn_params(w, receiver, stats.var[..., None, :], sigma2, rho)
    return DetectorOutput(u, np.broadcast_to(omega, u.shape).copy(), np.broadcast_to(kappa2, u.shape).copy())


def detection_order(receiver: Receiver) -> list[np.ndarray]:
    """Per-view SIC order: served UEs by descending ``||D_k g_hat_k||`` (stable on ties)."""
    gains = receiver.gains()
    return [np.array([k for k in np.argsort(-g, kind="stable") if g[k] > 0], dtype=int) for g in gains]


def list_sic_pass(y: np.ndarray, receiver: Receiver, stats: SoftSymbolStats, sigma2: float, rho,
                  constellation: Constellation, d_th: float = np.inf, list_size: int = 1,
                  energy: str = "mean", prior_llrs: np.ndarray | None = None) -> DetectorOutput:
    """Successive MMSE interference cancellation with shadow-area list feedback.

    Layers are detected in :func:`detection_order`. Each layer's filter treats
    already detected UEs as cancelled (zero variance) and the remaining UEs as
    soft interference with their prior statistics, whose means are subtracted.
    When the soft estimate lies farther than ``d_th`` from its nearest point, the
    ``list_size`` best points are tried as the layer's decision, the remaining
    layers are re-sliced with the same filters, and the candidate minimizing
    ``||D_k (y - G_hat phi)||^2`` is kept. With ``d_th=inf`` or ``list_size=1``
    this is plain hard-decision SIC.

    Decisions are nearest-point slices of ``u``. When ``prior_llrs`` of shape
    ``(V, T, K, Mc)`` are given they become MAP decisions under
    ``u = omega s + CN(0, kappa2)`` and the symbol priors; with flat priors and
    QPSK the two coincide. The list metric then also subtracts the log priors
    of the candidate path, with the residual norm scaled by the layer's noise
    plus mean estimation-error power.
    """
    if list_size < 1:
        raise ConfigurationError(f"list size must be >= 1, got {list_size}")
    if not d_th >= 0:
        raise ConfigurationError(f"d_th must be non-negative, got {d_th}")
    K = receiver.num_ues
    M = min(int(list_size), constellation.size)
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (K,))
    yv = receiver.split(y)
    V, T, _ = yv.shape
    mean = np.broadcast_to(stats.mean, (V, T, K))
    var = np.broadcast_to(stats.var, (V, T, K))
    en = np.broadcast_to(_energy(stats, rho, energy), (V, T, K))
    log_prior = None
    if prior_llrs is not None:
        log_prior = constellation.log_priors(np.broadcast_to(prior_llrs, (V, T, K, constellation.bits_per_symbol)))

    u_out = np.zeros((V, T, K), dtype=complex)
    omega_out = np.zeros((V, T, K))
    kappa_out = np.full((V, T, K), KAPPA2_FLOOR)
    hard_out = np.full((V, T, K), -1, dtype=int)

    for v, order in enumerate(detection_order(receiver)):
        if order.size == 0:
            continue
        view = Receiver(receiver.mode, receiver.g_hat[v:v + 1],
                        None if receiver.err_cov is None else receiver.err_cov[v:v + 1], receiver.mask[v:v + 1])
        H = receiver.channel_matrix[v]  # (n, K)
        layers = len(order)

        # Filters per layer: earlier layers cancelled (zero variance, full energy).
        lay_var = np.broadcast_to(var[v][:, None, :], (T, layers, K)).copy()
        lay_en = np.broadcast_to(en[v][:, None, :], (T, layers, K)).copy()
        for p, k in enumerate(order):
            lay_var[:, p, order[:p]] = 0.0
            lay_en[:, p, order[:p]] = rho[order[:p]]
            lay_var[:, p, k] = rho[k]
        w = np.empty((T, layers, receiver.dim), dtype=complex)
        for p, k in enumerate(order):
            w[:, p] = _filters(view, lay_var[None, :, p:p + 1], lay_en[None, :, p], np.array([k]), sigma2, rho)[0, :, 0]
        omega, kappa2 = awgn_params(w[None], view, lay_var[None], sigma2, rho, targets=order)
        omega, kappa2 = omega[0], kappa2[0]  # (T, layers)

        def score(est, slots, p):
            # decision metric of layer p for estimates est (S, ...) at the given slots; larger is better
            pts = constellation.points
            if log_prior is None:
                return -np.abs(est[..., None] - pts) ** 2
            shape = (len(slots),) + (1,) * (est.ndim - 1) + (1,)
            om = omega[slots, p].reshape(shape)
            k2 = kappa2[slots, p].reshape(shape)
            lp = log_prior[v, slots, order[p]].reshape((len(slots),) + (1,) * (est.ndim - 1) + (-1,))
            return -np.abs(est[..., None] - om * pts) ** 2 / k2 + lp

        # per-layer effective noise on the serving rows, scales the candidate metric against the priors
        noise = np.full(K, float(sigma2))
        if view.err_cov is not None:
            diag = np.real(np.diagonal(view.weighted_error_cov(rho)[0], axis1=-2, axis2=-1))
            for k in order:
                rows = receiver.mask[v, k]
                noise[k] += diag[rows].mean()
        all_slots = np.arange(T)
        # Soft means of all UEs; replaced by decisions as layers are detected.
        symbols = mean[v].copy()  # (T, K)
        for p, k in enumerate(order):
            residual = yv[v] - symbols @ H.T + np.outer(symbols[:, k], H[:, k])
            u = np.einsum("tn,tn->t", np.conj(w[:, p]), residual)
            metric = score(u, all_slots, p)
            choice = np.argmax(metric, axis=-1)
            if M > 1:
                gap = np.min(np.abs(u[:, None] - constellation.points), axis=-1)
                unreliable = np.flatnonzero(gap > d_th)
                if unreliable.size:
                    cand = np.argsort(-metric[unreliable], axis=-1, kind="stable")[:, :M]
                    path_prior = None
                    if log_prior is not None:
                        path_prior = log_prior[v, unreliable][:, order[p:]]  # (S, layers left, M)
                    choice[unreliable] = _best_candidate(yv[v, unreliable], symbols[unreliable], cand, order, p,
                                                         w[unreliable], H, receiver.mask[v, k], constellation,
                                                         lambda est, q: score(est, unreliable, q),
                                                         path_prior, noise[k])
            symbols[:, k] = constellation.points[choice]
            u_out[v, :, k] = u
            hard_out[v, :, k] = choice
        omega_out[v][:, order] = omega
        kappa_out[v][:, order] = kappa2
    return DetectorOutput(u_out, omega_out, kappa_out, hard_out)


def _best_candidate(y, symbols, cand, order, p, w, H, rows, constellation, score, path_prior=None, noise=1.0):
    """Pick, per slot, the list candidate for layer ``order[p]`` with the best local metric.

    ``cand`` holds ``(S, M)`` candidate point indices; later layers are re-decided
    with ``score(estimates, layer_position)`` using their own filters. Without
    priors the metric is ``||D_k (y - G_hat phi)||^2``. With ``path_prior`` of shape
    ``(S, layers left, points)`` it becomes the local MAP metric
    ``||D_k (y - G_hat phi)||^2 / noise - sum log P(phi_q)`` over the remaining layers.
    """
    k = order[p]
    S, M = cand.shape
    idx = np.zeros((S, M, len(order) - p), dtype=int)
    idx[:, :, 0] = cand
    phi = np.repeat(symbols[:, None, :], M, axis=1)  # (S, M, K)
    phi[:, :, k] = constellation.points[cand]
    for q_pos in range(p + 1, len(order)):
        q = order[q_pos]
        residual = y[:, None, :] - phi @ H.T + phi[:, :, q:q + 1] * H[:, q]
        est = np.einsum("sn,smn->sm", np.conj(w[:, q_pos]), residual)
        idx[:, :, q_pos - p] = np.argmax(score(est, q_pos), axis=-1)
        phi[:, :, q] = constellation.points[idx[:, :, q_pos - p]]
    err = (y[:, None, :] - phi @ H.T)[:, :, rows]
    metric = np.sum(np.abs(err) ** 2, axis=-1)
    if path_prior is not None:
        layer = np.arange(idx.shape[-1])
        prior = path_prior[np.arange(S)[:, None, None], layer, idx]  # (S, M, layers left)
        metric = metric / noise - prior.sum(axis=-1)
    return cand[np.arange(S), np.argmin(metric, axis=-1)]


def centralized_filter(k: int, estimate: ChannelEstimate, service: ServiceMap, stats: SoftSymbolStats,
                       sigma2: float, rho, energy: str = "mean") -> np.ndarray:
    """Centralized soft-IC MMSE filter of UE ``k``, shape ``(T, N*L)``.

    ``stats`` arrays have shape ``(T, K)``.
    """
    rx = Receiver.centralized(estimate, service)
    s = SoftSymbolStats(np.asarray(stats.mean)[None], np.asarray(stats.var)[None])
    return mmse_filters(rx, s, sigma2, rho, energy)[0, :, k]


def decentralized_filter(k: int, l: int, estimate: ChannelEstimate, service: ServiceMap,
                         stats: SoftSymbolStats, sigma2: float, rho, energy: str = "mean") -> np.ndarray:
    """Local soft-IC MMSE filter of UE ``k`` at AP ``l``, shape ``(T, N)``.

    ``stats`` are the AP's local statistics with shape ``(T, K)``.
    """
    rx = Receiver.decentralized(estimate, service)
    view = Receiver(rx.mode, rx.g_hat[l:l + 1], None if rx.err_cov is None else rx.err_cov[l:l + 1],
                    rx.mask[l:l + 1])
    s = SoftSymbolStats(np.asarray(stats.mean)[None], np.asarray(stats.var)[None])
    return mmse_filters(view, s, sigma2, rho, energy)[0, :, k]
