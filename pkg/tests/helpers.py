"""Shared test utilities: tiny configs, parameter snapshots, finite differences."""

from __future__ import annotations

import numpy as np
import torch

from attredit.data import ArrayDataset, dataset_from_synthetic
from attredit.networks import ArchitectureConfig
from attredit.synthetic import SyntheticSpec, generate_synthetic_dataset


def tiny_arch(n_attrs: int = 2, **overrides) -> ArchitectureConfig:
    """A sub-2k-parameter architecture on 8x8 images for gradient work."""
    defaults = dict(
        resolution=8,
        n_attrs=n_attrs,
        encoder=((4, 3, 2), (6, 3, 2)),
        decoder=((4, 3, 2), (3, 3, 2)),
        trunk=((4, 3, 2), (6, 3, 2)),
        head_dim=8,
        skip_count=1,
        inject_count=1,
    )
    defaults.update(overrides)
    return ArchitectureConfig(**defaults)


def small_dataset(size: int = 64, resolution: int = 32, seed: int = 1) -> ArrayDataset:
    spec = SyntheticSpec(size=size, resolution=resolution)
    return dataset_from_synthetic(generate_synthetic_dataset(spec, seed))


def param_snapshot(params) -> list[np.ndarray]:
    return [p.detach().cpu().numpy().copy() for p in params]


def params_equal(params, snapshot) -> bool:
    current = param_snapshot(params)
    return len(current) == len(snapshot) and all(
        np.array_equal(a, b) for a, b in zip(current, snapshot)
    )


def finite_difference_check(
    loss_fn,
    params: list[torch.Tensor],
    *,
    n_samples: int,
    rng: np.random.Generator,
    h: float = 1e-5,
    floor: float = 1e-6,
) -> float:
    """Max relative error between autograd and central differences.

    ``loss_fn`` rebuilds the loss from scratch on every call; parameters are
    perturbed in place and restored. Gradients of parameters the loss does
    not reach are treated as zero.
    """
    loss = loss_fn()
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    flat = []
    for p_idx, (param, grad) in enumerate(zip(params, grads)):
        for e_idx in range(param.numel()):
            flat.append((p_idx, e_idx))
    picks = rng.choice(len(flat), size=min(n_samples, len(flat)), replace=False)
    worst = 0.0
    for pick in picks:
        p_idx, e_idx = flat[int(pick)]
        param = params[p_idx]
        analytic = (
            0.0 if grads[p_idx] is None else float(grads[p_idx].flatten()[e_idx])
        )
        with torch.no_grad():
            original = float(param.flatten()[e_idx])
            param.flatten()[e_idx] = original + h
        up = float(loss_fn().detach())
        with torch.no_grad():
            param.flatten()[e_idx] = original - h
        down = float(loss_fn().detach())
        with torch.no_grad():
            param.flatten()[e_idx] = original
        fd = (up - down) / (2 * h)
        rel = abs(analytic - fd) / max(abs(analytic), abs(fd), floor)
        worst = max(worst, rel)
    return worst
