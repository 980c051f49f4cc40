"""CPU-side combination of per-AP LLR frames.

Frames are stacked as an array of shape ``(L, K, C)``: one ``K x C`` block of
extrinsic LLRs per AP. Positive LLRs favour bit 0.
"""

from __future__ import annotations

import numpy as np

from cfidd.coding.mapping import LLR_CLIP
from cfidd.errors import ContractError

FUSION_RULES = ("standard", "censor", "refine")


def _frames(frames) -> np.ndarray:
    frames = np.asarray(frames, dtype=float)
    if frames.ndim != 3 or frames.shape[0] < 1:
        raise ContractError(f"expected at least one K x C frame stacked as (L, K, C), got shape {frames.shape}")
    return frames


def mean_abs(frames) -> np.ndarray:
    """Mean absolute LLR of every frame row, shape ``(L, K)``."""
    return np.mean(np.abs(_frames(frames)), axis=-1)


def fuse_standard(frames) -> np.ndarray:
    """Independent hard decisions of every AP, shape ``(L, K, C)``."""
    return (_frames(frames) < 0).astype(np.uint8)


def censor_llrs(frames) -> np.ndarray:
    """Keep, per UE, the frame row of the AP with the largest mean absolute LLR.

    Ties go to the lowest AP index.
    """
    frames = _frames(frames)
    best = np.argmax(mean_abs(frames), axis=0)
    return frames[best, np.arange(frames.shape[1])]


def refine_llrs(frames, average: bool = False, clip: float = LLR_CLIP) -> np.ndarray:
    """Elementwise sum of all frames (or their mean), clipped to ``[-clip, clip]``."""
    frames = _frames(frames)
    fused = frames.mean(axis=0) if average else frames.sum(axis=0)
    return np.clip(fused, -clip, clip)


def fuse(frames, rule: str, average: bool = False) -> np.ndarray:
    """Fused ``K x C`` frame for ``rule`` in ``("censor", "refine")``."""
    if rule == "censor":
        return censor_llrs(frames)
    if rule == "refine":
        return refine_llrs(frames, average=average)
    raise ValueError(f"rule {rule!r} does not produce a fused frame")
