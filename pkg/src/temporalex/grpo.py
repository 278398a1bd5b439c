"""Group-relative policy-gradient arithmetic: pure, deterministic numerics.

Rewards from a group of rollouts on the same prompt are standardized
into advantages, optionally raised by an entropy-scaled bonus that is
capped so it can never flip an advantage's sign, broadcast to tokens,
and folded into a clipped-ratio objective. Tokens that came from tool
responses are masked out of every sum. No optimizer lives here; these
are the reference formulas training code is expected to match.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

SIGMA_FLOOR = 1e-8


@dataclass(frozen=True)
class ShapingConfig:
    """Knobs for advantage shaping and the clipped objective.

    ``kappa`` must exceed 1 so the entropy bonus stays strictly below
    |A| and cannot flip the advantage's sign. ``beta`` of zero disables
    the reference-policy KL term.
    """

    alpha: float = 0.1
    kappa: float = 2.0
    epsilon: float = 0.2
    beta: float = 0.0
    sigma_floor: float = SIGMA_FLOOR

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.kappa <= 1:
            raise ValueError("kappa must be greater than 1")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.sigma_floor <= 0:
            raise ValueError("sigma_floor must be positive")


def group_advantages(rewards: Sequence[float], sigma_floor: float = SIGMA_FLOOR) -> np.ndarray:
    """Standardize rewards within a group: (R - mean) / population std.

    Groups need at least two rollouts. When the population std falls
    below the floor (all rewards effectively equal) every advantage is
    exactly zero, which keeps degenerate groups out of the gradient.
    """
    arr = np.asarray(rewards, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("a group needs at least two rollouts")
    std = float(arr.std())
    if std < sigma_floor:
        return np.zeros_like(arr)
    return (arr - arr.mean()) / std


def shape_advantages(
    advantages: np.ndarray, entropies: np.ndarray, config: ShapingConfig | None = None
) -> np.ndarray:
    """Add the entropy bonus min(alpha * H, |A| / kappa) elementwise.

    Shapes must match; entropies must be non-negative. With kappa > 1
    the bonus is strictly smaller than |A| wherever A is nonzero, so the
    shaped advantage always keeps its sign.
    """
    config = config or ShapingConfig()
    adv = np.asarray(advantages, dtype=np.float64)
    ent = np.asarray(entropies, dtype=np.float64)
    if adv.shape != ent.shape:
        raise ValueError(f"shape mismatch: advantages {adv.shape} vs entropies {ent.shape}")
    if ent.size and float(ent.min()) < 0:
        raise ValueError("entropies must be non-negative")
    bonus = np.minimum(config.alpha * ent, np.abs(adv) / config.kappa)
    return adv + bonus


def broadcast_advantage(
    advantages: Sequence[float],
    lengths: Sequence[int],
    masks: Sequence[np.ndarray] | None = None,
) -> list[np.ndarray]:
    """Expand per-rollout advantages to per-token arrays.

    Masked-out positions (tool-response tokens) get zero; everything
    else carries its rollout's advantage.
    """
    if masks is not None and len(masks) != len(lengths):
        raise ValueError("masks and lengths must align")
    if len(advantages) != len(lengths):
        raise ValueError("advantages and lengths must align")
    out = []
    for i, (adv, n) in enumerate(zip(advantages, lengths)):
        tokens = np.full(int(n), float(adv), dtype=np.float64)
        if masks is not None:
            mask = np.asarray(masks[i], dtype=bool)
            if mask.shape != tokens.shape:
                raise ValueError(f"rollout {i}: mask length {mask.shape} != {tokens.shape}")
            tokens = np.where(mask, tokens, 0.0)
        out.append(tokens)
    return out


@dataclass
class RolloutGroup:
    """Token-level log-probs, entropies, and masks for one prompt's group.

    ``masks`` mark the tokens the policy generated itself; tool-response
    tokens are False and never enter the objective. ``ref_logprobs`` is
    only needed when the KL coefficient is positive.
    """

    rewards: np.ndarray
    new_logprobs: list[np.ndarray]
    old_logprobs: list[np.ndarray]
    entropies: list[np.ndarray]
    masks: list[np.ndarray]
    ref_logprobs: Optional[list[np.ndarray]] = None

    def __post_init__(self) -> None:
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        self.new_logprobs = [np.asarray(a, dtype=np.float64) for a in self.new_logprobs]
        self.old_logprobs = [np.asarray(a, dtype=np.float64) for a in self.old_logprobs]
        self.entropies = [np.asarray(a, dtype=np.float64) for a in self.entropies]
        self.masks = [np.asarray(m, dtype=bool) for m in self.masks]
        if self.ref_logprobs is not None:
            self.ref_logprobs = [np.asarray(a, dtype=np.float64) for a in self.ref_logprobs]
        size = self.rewards.size
        if size < 2:
            raise ValueError("a group needs at least two rollouts")
        for name in ("new_logprobs", "old_logprobs", "entropies", "masks"):
            if len(getattr(self, name)) != size:
                raise ValueError(f"{name} must have one array per rollout")
        if self.ref_logprobs is not None and len(self.ref_logprobs) != size:
            raise ValueError("ref_logprobs must have one array per rollout")
        for i in range(size):
            n = self.new_logprobs[i].shape
            for name in ("old_logprobs", "entropies", "masks"):
                if getattr(self, name)[i].shape != n:
                    raise ValueError(f"rollout {i}: {name} length differs from new_logprobs")
            if self.ref_logprobs is not None and self.ref_logprobs[i].shape != n:
                raise ValueError(f"rollout {i}: ref_logprobs length differs from new_logprobs")
            if not self.masks[i].any():
                raise ValueError(f"rollout {i}: mask selects no tokens")

    @property
    def size(self) -> int:
        return int(self.rewards.size)

    def lengths(self) -> list[int]:
        return [int(a.size) for a in self.new_logprobs]

    @classmethod
    def from_dict(cls, raw: dict) -> "RolloutGroup":
        rollouts = raw["rollouts"]
        refs = [r.get("ref_logprobs") for r in rollouts]
        has_ref = all(r is not None for r in refs) and bool(rollouts)
        return cls(
            rewards=np.asarray(raw["rewards"], dtype=np.float64),
            new_logprobs=[np.asarray(r["new_logprobs"]) for r in rollouts],
            old_logprobs=[np.asarray(r["old_logprobs"]) for r in rollouts],
            entropies=[np.asarray(r["entropies"]) for r in rollouts],
            masks=[np.asarray(r["mask"]) for r in rollouts],
            ref_logprobs=[np.asarray(r) for r in refs] if has_ref else None,
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "RolloutGroup":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def grpo_objective(
    group: RolloutGroup,
    advantages: Sequence[np.ndarray],
    config: ShapingConfig | None = None,
) -> float:
    """Clipped-ratio surrogate, averaged over unmasked tokens.

    Per token: min(r * A, clip(r, 1 - eps, 1 + eps) * A) with
    r = exp(new - old), minus beta times the non-negative KL estimate
    exp(ref - new) - (ref - new) - 1 when beta > 0. The sum is
    normalized by the total unmasked token count across the group.
    """
    config = config or ShapingConfig()
    if len(advantages) != group.size:
        raise ValueError("advantages must have one array per rollout")
    if config.beta > 0 and group.ref_logprobs is None:
        raise ValueError("beta > 0 requires ref_logprobs")
    total = 0.0
    tokens = 0
    for i in range(group.size):
        adv = np.asarray(advantages[i], dtype=np.float64)
        if adv.shape != group.new_logprobs[i].shape:
            raise ValueError(f"rollout {i}: advantage length differs from token arrays")
        ratio = np.exp(group.new_logprobs[i] - group.old_logprobs[i])
        clipped = np.clip(ratio, 1.0 - config.epsilon, 1.0 + config.epsilon)
        term = np.minimum(ratio * adv, clipped * adv)
        if config.beta > 0:
            delta = group.ref_logprobs[i] - group.new_logprobs[i]
            term = term - config.beta * (np.exp(delta) - delta - 1.0)
        mask = group.masks[i]
        total += float(np.sum(term * mask))
        tokens += int(np.sum(mask))
    return total / tokens


def group_report(group: RolloutGroup, config: ShapingConfig | None = None) -> dict:
    """Advantages, shaped per-token advantages, and the objective, as JSON."""
    config = config or ShapingConfig()
    adv = group_advantages(group.rewards, config.sigma_floor)
    per_token = broadcast_advantage(adv, group.lengths(), group.masks)
    shaped = []
    for i in range(group.size):
        shaped_i = shape_advantages(per_token[i], group.entropies[i], config)
        shaped.append(np.where(group.masks[i], shaped_i, 0.0))
    objective = grpo_objective(group, shaped, config)
    return {
        "advantages": adv.tolist(),
        "shaped_token_advantages": [a.tolist() for a in shaped],
        "objective": objective,
    }
