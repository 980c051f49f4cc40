"""LDPC codes: progressive-edge-growth construction, systematic encoding and box-plus SPA decoding."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

from cfidd.coding.mapping import LLR_CLIP
from cfidd.errors import ConfigurationError, ContractError

log = logging.getLogger(__name__)

# Message value standing in for +infinity on padded edges (identity of box-plus).
_PAD_LLR = 1.0e4
DEFAULT_CODE_FILE = "peg_256_128.alist"


@dataclass
class LdpcCode:
    """Binary LDPC code defined by a parity-check matrix ``h`` of shape ``(m, n)``."""

    h: np.ndarray
    generator: np.ndarray = field(init=False, repr=False)
    info_positions: np.ndarray = field(init=False, repr=False)
    check_vars: np.ndarray = field(init=False, repr=False)
    var_edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.h = (np.asarray(self.h) % 2).astype(np.uint8)
        self.generator, self.info_positions = systematic_generator(self.h)
        self.check_vars, self.var_edges = _edge_tables(self.h)

    @property
    def n(self) -> int:
        return self.h.shape[1]

    @property
    def m(self) -> int:
        return self.h.shape[0]

    @property
    def k(self) -> int:
        return self.generator.shape[0]

    @property
    def rate(self) -> float:
        return self.k / self.n

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        return (np.asarray(bits, dtype=np.int64) @ self.h.T.astype(np.int64)) % 2

    def is_codeword(self, bits: np.ndarray) -> np.ndarray:
        return ~np.any(self.syndrome(bits), axis=-1)

    def message_bits(self, codeword_bits: np.ndarray) -> np.ndarray:
        return np.asarray(codeword_bits)[..., self.info_positions]


class DecodeResult(NamedTuple):
    posterior: np.ndarray  # (..., n) a-posteriori LLRs, clipped
    extrinsic: np.ndarray  # (..., n) posterior minus channel input, clipped
    hard_bits: np.ndarray  # (..., n) uint8
    converged: np.ndarray  # (...) bool
    iterations: np.ndarray  # (...) int


# --- construction ---------------------------------------------------------------------------


def _check_distances(var: int, var_nbrs, chk_nbrs, m: int) -> np.ndarray:
    """Hop distance (in check nodes) from variable ``var`` to every check; ``inf`` if unreachable."""
    dist = np.full(m, np.inf)
    seen_vars = {var}
    queue = deque()
    for c in var_nbrs[var]:
        dist[c] = 0
        queue.append(c)
    while queue:
        c = queue.popleft()
        for v in chk_nbrs[c]:
            if v in seen_vars:
                continue
            seen_vars.add(v)
            for c2 in var_nbrs[v]:
                if dist[c2] == np.inf:
                    dist[c2] = dist[c] + 1
                    queue.append(c2)
    return dist


def peg_parity_matrix(n: int, m: int, column_weight: int, rng: np.random.Generator,
                      row_weight: int | None = None) -> np.ndarray | None:
    """Progressive edge growth with every column of weight ``column_weight``.

    Each new edge of a variable node goes to an admissible check node at maximum
    graph distance (unreachable counts as infinite), breaking ties by lowest
    current degree and then at random. Row degrees are capped at ``row_weight``
    (default ``ceil(n * column_weight / m)``). Returns ``None`` if the cap leaves
    no admissible check node.
    """
    cap = row_weight if row_weight is not None else -(-n * column_weight // m)
    var_nbrs = [[] for _ in range(n)]
    chk_nbrs = [[] for _ in range(m)]
    degree = np.zeros(m, dtype=int)
    for v in range(n):
        for e in range(column_weight):
            admissible = degree < cap
            admissible[var_nbrs[v]] = False
            if not admissible.any():
                return None
            if e == 0:
                dist = np.zeros(m)
            else:
                dist = _check_distances(v, var_nbrs, chk_nbrs, m)
            far = dist[admissible].max()
            cand = np.flatnonzero(admissible & (dist == far))
            cand = cand[degree[cand] == degree[cand].min()]
            c = int(rng.choice(cand))
            var_nbrs[v].append(c)
            chk_nbrs[c].append(v)
            degree[c] += 1
    h = np.zeros((m, n), dtype=np.uint8)
    for v, checks in enumerate(var_nbrs):
        h[checks, v] = 1
    return h


def has_four_cycles(h: np.ndarray) -> bool:
    overlap = h.T.astype(np.int64) @ h.astype(np.int64)
    np.fill_diagonal(overlap, 0)
    return bool(np.any(overlap > 1))


def gf2_rank(h: np.ndarray) -> int:
    return int(len(_gf2_rref(h)[1]))


def _gf2_rref(h: np.ndarray):
    a = (np.asarray(h) % 2).astype(np.uint8).copy()
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hit = np.flatnonzero(a[r:, c]) + r
        if hit.size == 0:
            continue
        p = hit[0]
        if p != r:
            a[[r, p]] = a[[p, r]]
        others = np.flatnonzero(a[:, c])
        others = others[others != r]
        a[others] ^= a[r]
        pivots.append(c)
        r += 1
    return a[:r], pivots


def systematic_generator(h: np.ndarray):
    """Generator ``G`` (``k x n``) with ``G H^T = 0`` and identity on ``info_positions``.

    Parity bits sit on the pivot columns of the reduced row echelon form of ``h``;
    the remaining columns carry the message, in increasing column order.
    """
    rref, pivots = _gf2_rref(h)
    n = h.shape[1]
    info = np.setdiff1d(np.arange(n), pivots)
    g = np.zeros((info.size, n), dtype=np.uint8)
    g[:, info] = np.eye(info.size, dtype=np.uint8)
    g[:, pivots] = rref[:, info].T
    return g, info


def build_ldpc(n: int, m: int, rng: np.random.Generator, column_weight: int = 3,
               row_weight: int | None = None, require_girth6: bool = False,
               max_attempts: int = 10) -> LdpcCode:
    """Construct a regular PEG code of length ``n`` with ``m`` full-rank parity checks."""
    if not (n > m > 0):
        raise ConfigurationError(f"need n > m > 0, got n={n}, m={m}")
    for attempt in range(max_attempts):
        h = peg_parity_matrix(n, m, column_weight, rng, row_weight)
        if h is None:
            log.debug("PEG attempt %d: row-degree cap left no admissible check", attempt)
            continue
        if gf2_rank(h) < m:
            log.debug("PEG attempt %d: parity matrix is rank deficient", attempt)
            continue
        if require_girth6 and has_four_cycles(h):
            log.debug("PEG attempt %d: graph has 4-cycles", attempt)
            continue
        return LdpcCode(h)
    raise ConfigurationError(f"no admissible ({n}, {n - m}) PEG code after {max_attempts} attempts")


# --- alist interchange ----------------------------------------------------------------------


def write_alist(h: np.ndarray, path) -> None:
    h = np.asarray(h)
    m, n = h.shape
    cols = [np.flatnonzero(h[:, j]) + 1 for j in range(n)]
    rows = [np.flatnonzero(h[i]) + 1 for i in range(m)]
    dv, dc = max(map(len, cols)), max(map(len, rows))
    lines = [f"{n} {m}", f"{dv} {dc}", " ".join(str(len(c)) for c in cols), " ".join(str(len(r)) for r in rows)]
    lines += [" ".join(map(str, list(c) + [0] * (dv - len(c)))) for c in cols]
    lines += [" ".join(map(str, list(r) + [0] * (dc - len(r)))) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_alist(text: str) -> np.ndarray:
    tokens = [line.split() for line in text.strip().splitlines()]
    n, m = int(tokens[0][0]), int(tokens[0][1])
    h = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        for i in tokens[4 + j]:
            if int(i) > 0:
                h[int(i) - 1, j] = 1
    for i in range(m):
        for j in tokens[4 + n + i]:
            if int(j) > 0 and not h[i, int(j) - 1]:
                raise ConfigurationError(f"alist row and column lists disagree at ({i + 1}, {j})")
    return h


def read_alist(path) -> np.ndarray:
    return parse_alist(Path(path).read_text())


def default_code() -> LdpcCode:
    """The stored (256, 128) regular (3, 6) PEG code."""
    text = resources.files("cfidd.data").joinpath(DEFAULT_CODE_FILE).read_text()
    return LdpcCode(parse_alist(text))


# --- encoding -------------------------------------------------------------------------------


def encode(code: LdpcCode, message_bits: np.ndarray) -> np.ndarray:
    """Systematic encoding of ``(..., k)`` message bits into ``(..., n)`` codewords."""
    msg = np.asarray(message_bits)
    if msg.shape[-1] != code.k:
        raise ContractError(f"message length {msg.shape[-1]} does not match code dimension {code.k}")
    return ((msg.astype(np.int64) @ code.generator.astype(np.int64)) % 2).astype(np.uint8)


# --- decoding -------------------------------------------------------------------------------


def _edge_tables(h: np.ndarray):
    m, n = h.shape
    rows = [np.flatnonzero(h[i]) for i in range(m)]
    dc = max(len(r) for r in rows)
    check_vars = np.full((m, dc), n, dtype=np.int64)  # n marks a padded slot
    for i, r in enumerate(rows):
        check_vars[i, : len(r)] = r
    n_edges = m * dc
    cols = [[] for _ in range(n)]
    for e, v in enumerate(check_vars.ravel()):
        if v < n:
            cols[v].append(e)
    dv = max(len(c) for c in cols)
    var_edges = np.full((n, dv), n_edges, dtype=np.int64)  # n_edges marks a padded slot
    for v, c in enumerate(cols):
        var_edges[v, : len(c)] = c
    return check_vars, var_edges


def box_plus(a, b):
    """Pairwise check-node combination ``log((1 + e^(a+b)) / (e^a + e^b))``.

    Evaluated as sign-min plus two correction terms, which stays finite for large inputs.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
            + np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b))))


def _extrinsic_box_plus(x: np.ndarray) -> np.ndarray:
    """Box-plus over the last axis excluding each position in turn."""
    d = x.shape[-1]
    out = np.empty_like(x)
    if d == 2:
        out[..., 0], out[..., 1] = x[..., 1], x[..., 0]
        return out
    # forward and backward partial combinations advance together
    fwd = np.empty((d - 1,) + x.shape[:-1])  # fwd[j] combines positions 0 .. j
    bwd = np.empty_like(fwd)  # bwd[j - 1] combines positions j .. d-1
    fwd[0], bwd[d - 2] = x[..., 0], x[..., d - 1]
    for j in range(1, d - 1):
        step = box_plus(np.stack([fwd[j - 1], bwd[d - 1 - j]]), np.stack([x[..., j], x[..., d - 1 - j]]))
        fwd[j], bwd[d - 2 - j] = step
    out[..., 0] = bwd[0]
    out[..., d - 1] = fwd[d - 2]
    out[..., 1:d - 1] = np.moveaxis(box_plus(fwd[:d - 2], bwd[1:d - 1]), 0, -1)
    return out


def spa_decode(code: LdpcCode, channel_llrs: np.ndarray, max_iters: int = 10,
               clip: float = LLR_CLIP) -> DecodeResult:
    """Flooding box-plus sum-product decoding of one or more codewords ``(..., n)``.

    Each codeword stops as soon as its hard decision satisfies all parity checks.
    """
    if max_iters < 1:
        raise ConfigurationError("max_iters must be >= 1")
    llr_in = np.asarray(channel_llrs, dtype=float)
    if llr_in.shape[-1] != code.n:
        raise ContractError(f"expected {code.n} LLRs per codeword, got {llr_in.shape[-1]}")
    lead = llr_in.shape[:-1]
    llr = llr_in.reshape(-1, code.n)
    batch = llr.shape[0]
    m, dc = code.check_vars.shape

    posterior = llr.copy()
    converged = np.zeros(batch, dtype=bool)
    iterations = np.zeros(batch, dtype=int)
    active = np.arange(batch)

    padded = np.concatenate([llr, np.full((batch, 1), _PAD_LLR)], axis=1)
    v2c = padded[:, code.check_vars]  # (B, m, dc)
    pad_edge = code.check_vars == code.n

    for it in range(1, max_iters + 1):
        c2v = _extrinsic_box_plus(v2c)
        c2v[:, pad_edge] = 0.0
        flat = np.concatenate([c2v.reshape(len(active), m * dc), np.zeros((len(active), 1))], axis=1)
        total = llr[active] + flat[:, code.var_edges].sum(axis=-1)
        posterior[active] = total
        iterations[active] = it
        hard = (total < 0).astype(np.int64)
        ok = ~np.any((np.concatenate([hard, np.zeros((len(active), 1), dtype=np.int64)], axis=1)
                      [:, code.check_vars].sum(axis=-1)) % 2, axis=-1)
        converged[active[ok]] = True
        keep = ~ok
        if not keep.any():
            break
        total = np.concatenate([total[keep], np.full((int(keep.sum()), 1), _PAD_LLR)], axis=1)
        v2c = total[:, code.check_vars] - c2v[keep]
        v2c[:, pad_edge] = _PAD_LLR
        active = active[keep]

    hard_bits = (posterior < 0).astype(np.uint8)
    extrinsic = np.clip(posterior - llr, -clip, clip)
    posterior = np.clip(posterior, -clip, clip)
    return DecodeResult(posterior.reshape(llr_in.shape), extrinsic.reshape(llr_in.shape),
                        hard_bits.reshape(llr_in.shape), converged.reshape(lead), iterations.reshape(lead))
