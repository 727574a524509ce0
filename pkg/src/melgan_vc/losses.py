"""Adversarial, TraVeL, margin and identity objectives.

The TraVeL angular term is applied as ``1 - cosine_similarity`` so that
minimizing the loss aligns source and translated transformation vectors.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 10.0
    gamma: float = 10.0
    delta: float = 10.0

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("loss weights must be non-negative")
        if not self.delta > 0:
            raise ValueError("margin delta must be positive")


VOICE = LossWeights(alpha=1.0, beta=10.0, gamma=10.0)
MUSIC = LossWeights(alpha=0.0, beta=10.0, gamma=10.0)
PRESETS = {"voice": VOICE, "music": MUSIC}


def _nonempty(x: torch.Tensor, what: str) -> None:
    if x.numel() == 0:
        raise ValueError(f"empty {what} batch")


def d_hinge_loss(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    _nonempty(real_scores, "real")
    _nonempty(fake_scores, "fake")
    return F.relu(1.0 - real_scores).mean() + F.relu(1.0 + fake_scores).mean()


def g_adv_loss(fake_scores: torch.Tensor) -> torch.Tensor:
    _nonempty(fake_scores, "fake")
    return -fake_scores.mean()


def transformation_vector(x_i: torch.Tensor, x_j: torch.Tensor) -> torch.Tensor:
    if x_i.shape != x_j.shape:
        raise ValueError(f"shape mismatch {tuple(x_i.shape)} vs {tuple(x_j.shape)}")
    return x_j - x_i


def pair_indices(n: int):
    """All unordered pairs ``i < j`` in row-major order."""
    if n < 2:
        raise ValueError(f"need at least 2 samples to form pairs, got {n}")
    i, j = torch.triu_indices(n, n, offset=1)
    return i, j


def _pair_differences(enc: torch.Tensor) -> torch.Tensor:
    i, j = pair_indices(enc.shape[0])
    # t_ij = S(x_i) - S(x_j)
    return transformation_vector(enc[j], enc[i])


def cosine_similarity(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Row-wise cosine similarity; 0 where either row is the zero vector."""
    dot = (a * b).sum(-1)
    denom = a.norm(dim=-1) * b.norm(dim=-1)
    ok = denom > 0
    return torch.where(ok, dot / torch.where(ok, denom, torch.ones_like(denom)), torch.zeros_like(dot))


def travel_from_encodings(source_enc: torch.Tensor, translated_enc: torch.Tensor) -> torch.Tensor:
    if source_enc.shape != translated_enc.shape:
        raise ValueError("source and translated encodings must be aligned")
    t = _pair_differences(source_enc)
    t_prime = _pair_differences(translated_enc)
    per_pair = (1.0 - cosine_similarity(t, t_prime)) + ((t - t_prime) ** 2).sum(-1)
    return per_pair.mean()


def travel_loss(s, source_chunks: torch.Tensor, translated_chunks: torch.Tensor) -> torch.Tensor:
    """TraVeL loss over every pair in the batch; ``translated[i]`` must be ``G(source[i])``.

    Source and translated chunks are encoded in separate passes, as in training.
    """
    n = source_chunks.shape[0]
    if translated_chunks.shape[0] != n:
        raise ValueError("source and translated batches must be aligned")
    pair_indices(n)
    return travel_from_encodings(s(source_chunks), s(translated_chunks))


def margin_loss(encodings: torch.Tensor, delta: float) -> torch.Tensor:
    """Mean hinge ``max(0, delta - ||S_i - S_j||)`` over pairs of encodings."""
    dist = _pair_differences(encodings).norm(dim=-1)
    return F.relu(delta - dist).mean()


def identity_from_outputs(outputs: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    _nonempty(targets, "identity")
    return ((outputs - targets) ** 2).mean()


def identity_loss(g, target_chunks: torch.Tensor) -> torch.Tensor:
    return identity_from_outputs(g(target_chunks), target_chunks)


def total_d_loss(adv):
    return adv


def total_g_loss(adv, identity, travel, w: LossWeights):
    # alpha = 0 drops the identity term entirely rather than multiplying by zero
    if w.alpha == 0:
        return adv + w.beta * travel
    return adv + w.alpha * identity + w.beta * travel


def total_s_loss(travel, margin, w: LossWeights):
    return w.beta * travel + w.gamma * margin
