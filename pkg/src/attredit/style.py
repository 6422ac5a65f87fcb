"""Categorical style controllers and the mutual-information objective.

Each attribute optionally gets a small bank of styles. A controller is a
per-attribute categorical index, injected into the decoder as tiled
one-hot planes next to the attribute planes. A predictor head on the
shared critic trunk recovers the controller from generated images; the
negative log-likelihood of the injected index is the (constant-offset)
mutual-information surrogate minimized by the predictor and by the
generator alike. When the extension is off nothing here runs, leaving base
training untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from .losses import PROB_EPS


@dataclass(frozen=True)
class StyleConfig:
    """Number of styles per attribute; 1 disables styling for an attribute."""

    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if any(c < 1 for c in self.counts):
            raise ValueError("every attribute needs at least one style")

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def max_nll(self) -> float:
        """Upper end of the expected loss band: sum of log style counts."""
        return float(sum(np.log(c) for c in self.counts))


@dataclass(frozen=True)
class StyleControllers:
    """One active style index per attribute for a batch of samples."""

    indices: np.ndarray  # (batch, n_attrs) int64
    config: StyleConfig

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 2 or idx.shape[1] != len(self.config.counts):
            raise ValueError(
                f"indices shape {idx.shape} does not match "
                f"{len(self.config.counts)} attributes"
            )
        for column, count in zip(idx.T, self.config.counts):
            if (column < 0).any() or (column >= count).any():
                raise ValueError("style index outside its configured range")
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)

    @property
    def batch_size(self) -> int:
        return self.indices.shape[0]

    def onehot(self, dtype=torch.float32) -> torch.Tensor:
        """(batch, sum of counts) one-hot planes in attribute order."""
        batch = self.indices.shape[0]
        out = torch.zeros(batch, self.config.total, dtype=dtype)
        offset = 0
        for column, count in zip(self.indices.T, self.config.counts):
            out[torch.arange(batch), offset + torch.from_numpy(column.copy())] = 1.0
            offset += count
        return out


def sample_style_controllers(
    config: StyleConfig,
    batch_size: int,
    seed: int | np.random.Generator,
) -> StyleControllers:
    """Uniform independent style draws, deterministic under a fixed seed."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    indices = np.stack(
        [rng.integers(0, count, size=batch_size) for count in config.counts],
        axis=1,
    )
    return StyleControllers(indices, config)


def mutual_information_loss(
    predictions: Sequence[torch.Tensor],
    controllers: StyleControllers,
    *,
    active: torch.Tensor | None = None,
) -> torch.Tensor:
    """Negative log-likelihood of the injected style indices, batch mean.

    ``predictions`` holds one (batch, count_i) probability tensor per
    attribute. ``active`` optionally masks per-sample attributes (the
    trainer passes the target attribute values so styles are only scored
    where the attribute is actually expressed).
    """
    counts = controllers.config.counts
    if len(predictions) != len(counts):
        raise ValueError(
            f"{len(predictions)} predictions for {len(counts)} attributes"
        )
    batch = controllers.batch_size
    total = None
    for i, (probs, count) in enumerate(zip(predictions, counts)):
        if probs.shape != (batch, count):
            raise ValueError(
                f"prediction {i} has shape {tuple(probs.shape)}, "
                f"expected ({batch}, {count})"
            )
        picked = probs[
            torch.arange(batch), torch.from_numpy(controllers.indices[:, i].copy())
        ]
        nll = -torch.log(picked.clamp(min=PROB_EPS))
        if active is not None:
            nll = nll * active[:, i].to(nll.dtype)
        total = nll if total is None else total + nll
    return total.mean()
