"""Numeric loss kernels: bidirectional triplet loss, cross-entropy and min-CE over candidates.

All functions work on plain arrays of probabilities or embeddings. There is no
autograd here; these kernels score fixed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyCandidateSet, InvalidDistribution, LengthMismatch, ZeroVector

EPS = 1e-12
ROW_SUM_TOL = 1e-6


@dataclass(frozen=True)
class LossWeights:
    ss: float = 1.0
    pv: float = 0.1
    pt: float = 0.1
    margin: float = 0.3

    def __post_init__(self):
        if min(self.ss, self.pv, self.pt, self.margin) < 0:
            raise ValueError("loss weights and margin must be non-negative")


def cosine_matrix(image: np.ndarray, text: np.ndarray) -> np.ndarray:
    """``s[i, j]`` = cosine similarity of image ``i`` and recipe ``j``."""
    image = np.asarray(image, dtype=np.float64)
    text = np.asarray(text, dtype=np.float64)
    if image.ndim != 2 or image.shape != text.shape:
        raise LengthMismatch(f"embedding batches differ: {image.shape} vs {text.shape}")
    ni = np.linalg.norm(image, axis=1)
    nt = np.linalg.norm(text, axis=1)
    if (ni == 0).any() or (nt == 0).any():
        raise ZeroVector("cosine similarity is undefined for zero vectors")
    return (image / ni[:, None]) @ (text / nt[:, None]).T


def triplet_bidirectional_loss(image, text, margin: float = 0.3, variant: str = "verbatim") -> float:
    """Bidirectional max-margin ranking loss over a batch of aligned pairs.

    ``variant="verbatim"`` sums, for every ``i`` and ``j != i``,
    ``max(0, s(i,j) - s(i,i) + m) + max(0, s(j,i) - s(i,i) + m)`` and divides
    by N. ``variant="own-anchor"`` uses ``s(j,j)`` as the positive in the
    second hinge instead.
    """
    s = cosine_matrix(image, text)
    n = s.shape[0]
    if n < 2:
        raise ValueError("triplet loss needs a batch of at least 2 pairs")
    pos = np.diag(s)
    off = ~np.eye(n, dtype=bool)
    first = np.maximum(0.0, s - pos[:, None] + margin)  # [i, j]: s(i,j) - s(i,i)
    if variant == "verbatim":
        second = np.maximum(0.0, s.T - pos[:, None] + margin)  # [i, j]: s(j,i) - s(i,i)
    elif variant == "own-anchor":
        second = np.maximum(0.0, s.T - pos[None, :] + margin)  # [i, j]: s(j,i) - s(j,j)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return float((first[off].sum() + second[off].sum()) / n)


def softmax(logits, axis: int = -1) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def check_distribution(pred) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    if pred.ndim != 2:
        raise InvalidDistribution(f"predictions must be a T x V matrix, got shape {pred.shape}")
    if (pred < 0).any():
        raise InvalidDistribution("negative probability")
    bad = np.flatnonzero(np.abs(pred.sum(axis=1) - 1.0) > ROW_SUM_TOL)
    if len(bad):
        raise InvalidDistribution(f"row {bad[0]} does not sum to 1")
    return pred


def _ce(pred: np.ndarray, target: Sequence[int]) -> float:
    if len(target) != pred.shape[0]:
        raise LengthMismatch(f"target has {len(target)} tokens, prediction has {pred.shape[0]} steps")
    t = np.asarray(target, dtype=np.int64)
    if len(t) and (t.min() < 0 or t.max() >= pred.shape[1]):
        raise IndexError("target token outside the prediction vocabulary")
    p = pred[np.arange(len(t)), t]
    return float(np.mean(-np.log(np.maximum(p, EPS))))


def cross_entropy(pred, target: Sequence[int]) -> float:
    """Mean over steps of ``-log pred[t, target[t]]`` (probabilities floored at 1e-12)."""
    return _ce(check_distribution(pred), target)


def min_ce_over_candidates(pred, candidates: Sequence[Sequence[int]]) -> tuple[float, int]:
    """Smallest cross-entropy over candidate targets and its index (first on ties)."""
    if len(candidates) == 0:
        raise EmptyCandidateSet("no candidate sequences")
    pred = check_distribution(pred)
    losses = [_ce(pred, c) for c in candidates]
    best = int(np.argmin(losses))
    return losses[best], best


def batch_min_ce(preds: Sequence, candidate_sets: Sequence[Sequence[Sequence[int]]]) -> float:
    """Batch program loss: mean over samples of the per-sample min-CE."""
    if len(preds) != len(candidate_sets):
        raise LengthMismatch("one candidate set is needed per prediction")
    if not preds:
        raise ValueError("empty batch")
    return float(np.mean([min_ce_over_candidates(p, c)[0] for p, c in zip(preds, candidate_sets)]))


def total_loss(l_ss: float, l_pv: float, l_pt: float, w: LossWeights | None = None) -> float:
    w = w or LossWeights()
    values = (l_ss, l_pv, l_pt)
    if not all(np.isfinite(v) for v in values):
        raise ValueError("loss components must be finite")
    return w.ss * l_ss + w.pv * l_pv + w.pt * l_pt
