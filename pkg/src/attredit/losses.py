"""Training losses and their composition into the two optimization targets.

Generator side (encoder + decoder):

    total_g = lambda_rec * rec + lambda_cls_g * cls_g + adv_g

Critic/classifier side:

    total_dc = lambda_cls_c * cls_c + adv_d + lambda_gp * gp

Every loss reduces over the batch with a mean, so the weights are batch
size independent. The attribute classification terms for real and edited
images share one routine and therefore agree bit for bit on identical
inputs. Extra regime-specific terms (mutual information, latent adversary
confusion) fold into the totals through an explicit extras map so the base
identities above stay exact when those regimes are off.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import torch

PROB_EPS = 1e-7


class NonFiniteLossError(RuntimeError):
    """A loss component stopped being finite; carries the component map."""

    def __init__(self, components: Mapping[str, float]):
        bad = sorted(k for k, v in components.items() if not _is_finite(v))
        super().__init__(f"non-finite loss components: {bad}")
        self.components = dict(components)


def _is_finite(value) -> bool:
    if isinstance(value, torch.Tensor):
        return bool(torch.isfinite(value).all())
    return value == value and abs(value) != float("inf")


@dataclass(frozen=True)
class LossWeights:
    """Balancing coefficients for the composed objectives."""

    rec: float = 100.0
    cls_g: float = 10.0
    cls_c: float = 1.0
    gp: float = 10.0

    def __post_init__(self):
        for name in ("rec", "cls_g", "cls_c", "gp"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name} must be nonnegative")


@dataclass
class LossReport:
    """Scalar snapshot of one optimization step, ready for JSON logging."""

    rec: float = 0.0
    cls_g: float = 0.0
    cls_c: float = 0.0
    adv_g: float = 0.0
    adv_d: float = 0.0
    gp: float = 0.0
    total_g: float = 0.0
    total_dc: float = 0.0
    extras: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, float]:
        out = {
            "rec": self.rec,
            "cls_g": self.cls_g,
            "cls_c": self.cls_c,
            "adv_g": self.adv_g,
            "adv_d": self.adv_d,
            "gp": self.gp,
            "total_g": self.total_g,
            "total_dc": self.total_dc,
        }
        out.update(self.extras)
        return out


def attribute_bce(probs: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Binary cross entropy summed over attributes, averaged over the batch.

    Predictions are clipped to [eps, 1 - eps] so saturated classifiers keep
    the loss finite. This single routine backs both the real-image and the
    edited-image classification losses.
    """
    if probs.shape != targets.shape:
        raise ValueError(
            f"prediction shape {tuple(probs.shape)} does not match "
            f"target shape {tuple(targets.shape)}"
        )
    p = probs.clamp(PROB_EPS, 1.0 - PROB_EPS)
    per_sample = -(targets * torch.log(p) + (1.0 - targets) * torch.log(1.0 - p))
    return per_sample.sum(dim=-1).mean()


def classification_loss_generated(
    probs: torch.Tensor, targets: torch.Tensor
) -> torch.Tensor:
    """Classifier agreement of an edited image with its target attributes."""
    return attribute_bce(probs, targets)


def classification_loss_real(
    probs: torch.Tensor, targets: torch.Tensor
) -> torch.Tensor:
    """Classifier agreement of a real image with its annotated attributes."""
    return attribute_bce(probs, targets)


def reconstruction_loss(x: torch.Tensor, x_hat: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference; the l1 choice keeps reconstructions sharp."""
    if x.shape != x_hat.shape:
        raise ValueError(
            f"shapes {tuple(x.shape)} and {tuple(x_hat.shape)} differ"
        )
    return (x - x_hat).abs().mean()


def adversarial_losses(
    d_real: torch.Tensor, d_fake: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Critic and generator terms of the Wasserstein objective.

    Returns (adv_d, adv_g) where adv_d = mean(fake) - mean(real) and
    adv_g = -mean(fake). In the trainer each term is evaluated against its
    own forward pass; this helper only owns the arithmetic.
    """
    if d_real.numel() == 0 or d_fake.numel() == 0:
        raise ValueError("score batches must be nonempty")
    adv_d = d_fake.mean() - d_real.mean()
    adv_g = -d_fake.mean()
    return adv_d, adv_g


def gradient_penalty(
    critic: Callable[[torch.Tensor], torch.Tensor],
    real: torch.Tensor,
    fake: torch.Tensor,
    *,
    seed: int | None = None,
    generator: torch.Generator | None = None,
    coeffs: torch.Tensor | None = None,
    create_graph: bool = True,
) -> torch.Tensor:
    """One-centered gradient penalty on random interpolates.

    Interpolation coefficients are drawn per sample from U(0, 1) unless
    ``coeffs`` pins them explicitly (used by symmetry tests). With
    ``create_graph`` the result stays differentiable with respect to the
    critic parameters, which the critic update requires.
    """
    if real.shape != fake.shape:
        raise ValueError(
            f"real {tuple(real.shape)} and fake {tuple(fake.shape)} shapes differ"
        )
    batch = real.shape[0]
    if coeffs is None:
        if generator is None:
            generator = torch.Generator(device=real.device)
            if seed is not None:
                generator.manual_seed(seed)
        coeffs = torch.rand(batch, generator=generator, dtype=real.dtype)
    u = coeffs.view(batch, *([1] * (real.dim() - 1))).to(real.dtype)
    interp = (u * real.detach() + (1.0 - u) * fake.detach()).requires_grad_(True)
    scores = critic(interp)
    grads = torch.autograd.grad(
        scores.sum(), interp, create_graph=create_graph
    )[0]
    norms = torch.sqrt(grads.flatten(1).pow(2).sum(dim=1) + 1e-16)
    if not torch.isfinite(norms).all():
        raise NonFiniteLossError({"gp_grad_norm": float("nan")})
    return (norms - 1.0).pow(2).mean()


def compose_objectives(
    *,
    weights: LossWeights,
    rec=0.0,
    cls_g=0.0,
    cls_c=0.0,
    adv_g=0.0,
    adv_d=0.0,
    gp=0.0,
    extra_g: Mapping[str, object] | None = None,
    extra_dc: Mapping[str, object] | None = None,
):
    """Combine weighted components into the two optimization totals.

    Works on python floats or 0-d tensors alike and raises
    ``NonFiniteLossError`` if any component has gone non-finite. Extra
    terms are added to their respective totals unweighted (callers weight
    them) and reported under their own names.
    """
    components: dict[str, object] = {
        "rec": rec,
        "cls_g": cls_g,
        "cls_c": cls_c,
        "adv_g": adv_g,
        "adv_d": adv_d,
        "gp": gp,
    }
    if extra_g and extra_dc and set(extra_g) & set(extra_dc):
        raise ValueError(
            f"extra terms collide across objectives: {sorted(set(extra_g) & set(extra_dc))}"
        )
    for extra in (extra_g, extra_dc):
        if extra:
            components.update(extra)
    if not all(_is_finite(v) for v in components.values()):
        raise NonFiniteLossError(
            {k: _as_float(v) for k, v in components.items()}
        )
    total_g = weights.rec * rec + weights.cls_g * cls_g + adv_g
    total_dc = weights.cls_c * cls_c + adv_d + weights.gp * gp
    for value in (extra_g or {}).values():
        total_g = total_g + value
    for value in (extra_dc or {}).values():
        total_dc = total_dc + value
    components["total_g"] = total_g
    components["total_dc"] = total_dc
    return components


def _as_float(value) -> float:
    if isinstance(value, torch.Tensor):
        return float(value.detach())
    return float(value)


def report_from_components(components: Mapping[str, object]) -> LossReport:
    base = {"rec", "cls_g", "cls_c", "adv_g", "adv_d", "gp", "total_g", "total_dc"}
    values = {k: _as_float(v) for k, v in components.items()}
    return LossReport(
        rec=values.get("rec", 0.0),
        cls_g=values.get("cls_g", 0.0),
        cls_c=values.get("cls_c", 0.0),
        adv_g=values.get("adv_g", 0.0),
        adv_d=values.get("adv_d", 0.0),
        gp=values.get("gp", 0.0),
        total_g=values.get("total_g", 0.0),
        total_dc=values.get("total_dc", 0.0),
        extras={k: v for k, v in values.items() if k not in base},
    )
