"""Alternating optimization of the critic/classifier and the generator.

Each cycle runs ``critic_steps`` critic updates followed by one generator
update; the position within a cycle is a pure function of the global step
counter, so a run checkpointed mid-cycle resumes exactly. All randomness
flows through explicitly seeded generators whose states are checkpointed,
making fixed-seed runs reproducible to the bit.

Loss composition lives in two pure helpers (`generator_loss_components`,
`critic_loss_components`) shared by the step functions and by gradient
verification, so there is exactly one definition of each objective.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Mapping

import numpy as np
import torch

from . import losses
from .attributes import permute_rows
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import ArrayDataset, sample_batch
from .losses import LossReport, LossWeights, NonFiniteLossError
from .networks import ArchitectureConfig, AttrEditModel
from .style import StyleConfig, StyleControllers, mutual_information_loss, \
    sample_style_controllers


class TrainingAborted(RuntimeError):
    """Raised when a loss goes non-finite; carries the diagnostic report."""

    def __init__(self, report: LossReport, checkpoint_path: Path | None):
        super().__init__(
            "training aborted on non-finite loss"
            + (f"; state saved to {checkpoint_path}" if checkpoint_path else "")
        )
        self.report = report
        self.checkpoint_path = checkpoint_path


@dataclass(frozen=True)
class TrainConfig:
    weights: LossWeights = LossWeights()
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 32
    critic_steps: int = 5
    max_steps: int = 0  # total optimizer updates (critic and generator alike)
    seed: int = 0
    use_cls: bool = True
    use_rec: bool = True
    use_adv: bool = True
    use_attr_indep_constraint: bool = False
    indep_weight: float = 1.0
    style_weight: float = 1.0
    style_lr_mult: float = 1.0  # style predictor head tracks the posterior
    flip_augmentation: bool = False
    checkpoint_every: int = 1000

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.critic_steps < 1:
            raise ValueError("critic_steps must be at least 1")
        if self.max_steps < 0:
            raise ValueError("max_steps must be nonnegative")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["weights"] = asdict(self.weights)
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrainConfig":
        data = dict(data)
        if isinstance(data.get("weights"), Mapping):
            data["weights"] = LossWeights(**data["weights"])
        return cls(**data)


class RngBundle:
    """All stochastic streams of a run, with exact state round trips."""

    def __init__(self, seed: int):
        children = np.random.SeedSequence(seed).spawn(5)
        self.data = np.random.default_rng(children[0])
        self.targets = np.random.default_rng(children[1])
        self.style = np.random.default_rng(children[2])
        self.interp = torch.Generator().manual_seed(
            int(children[3].generate_state(1)[0])
        )
        self.init_seed = int(children[4].generate_state(1)[0])

    def numpy_states(self) -> dict:
        return {
            "data": self.data.bit_generator.state,
            "targets": self.targets.bit_generator.state,
            "style": self.style.bit_generator.state,
        }

    def torch_states(self) -> dict[str, np.ndarray]:
        return {"interp": self.interp.get_state().numpy()}

    def restore(self, numpy_states: Mapping, torch_states: Mapping[str, np.ndarray]):
        self.data.bit_generator.state = numpy_states["data"]
        self.targets.bit_generator.state = numpy_states["targets"]
        self.style.bit_generator.state = numpy_states["style"]
        self.interp.set_state(torch.from_numpy(torch_states["interp"].copy()))


@dataclass
class TrainState:
    model: AttrEditModel
    config: TrainConfig
    arch: ArchitectureConfig
    opt_g: torch.optim.Adam
    opt_dc: torch.optim.Adam
    opt_aux: torch.optim.Adam | None
    rng: RngBundle
    step: int = 0
    reports: list[tuple[int, str, LossReport]] = field(default_factory=list)

    @property
    def style_config(self) -> StyleConfig | None:
        if self.model.config.style_counts is None:
            return None
        return StyleConfig(self.model.config.style_counts)


def _adam(params, config: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(
        list(params), lr=config.learning_rate, betas=(config.beta1, config.beta2)
    )


def init_train_state(
    arch: ArchitectureConfig, config: TrainConfig, attr_names
) -> TrainState:
    rng = RngBundle(config.seed)
    model = AttrEditModel(
        arch,
        attr_names,
        init_seed=rng.init_seed,
        with_latent_adversary=config.use_attr_indep_constraint,
    )
    dc_groups = [{"params": list(model.critic_parameters())}]
    if arch.style_counts is not None:
        style_params = list(model.style_parameters())
        if style_params:
            dc_groups.append(
                {
                    "params": style_params,
                    "lr": config.learning_rate * config.style_lr_mult,
                }
            )
    opt_aux = (
        _adam(model.adversary_parameters(), config)
        if config.use_attr_indep_constraint
        else None
    )
    return TrainState(
        model=model,
        config=config,
        arch=arch,
        opt_g=_adam(model.generator_parameters(), config),
        opt_dc=torch.optim.Adam(
            dc_groups,
            lr=config.learning_rate,
            betas=(config.beta1, config.beta2),
        ),
        opt_aux=opt_aux,
        rng=rng,
    )


# ---------------------------------------------------------------------------
# Objective construction (shared by training steps and gradient checks)
# ---------------------------------------------------------------------------


def _styles_for(
    state_or_model, controllers: StyleControllers | None, dtype
) -> torch.Tensor | None:
    if controllers is None:
        return None
    return controllers.onehot(dtype=dtype)


def canonical_style_planes(
    config, batch: int, dtype=torch.float32
) -> torch.Tensor | None:
    """Index-0 one-hot planes for every attribute (the reconstruction style).

    Reconstruction is always conditioned on this fixed code; if it used the
    randomly sampled codes instead, the pixel loss would teach the decoder
    to ignore them entirely and style manipulation could never emerge.
    """
    if config.style_counts is None:
        return None
    planes = torch.zeros(batch, sum(config.style_counts), dtype=dtype)
    offset = 0
    for count in config.style_counts:
        planes[:, offset] = 1.0
        offset += count
    return planes


def generator_loss_components(
    model: AttrEditModel,
    x: torch.Tensor,
    a: torch.Tensor,
    b: torch.Tensor,
    config: TrainConfig,
    *,
    controllers: StyleControllers | None = None,
) -> dict:
    """Tensor-valued components of the encoder/decoder objective."""
    styled = model.config.style_counts is not None
    if styled and controllers is None:
        raise ValueError("style-enabled models need controllers per batch")
    z = model.encode(x)
    style_planes = _styles_for(model, controllers, x.dtype)

    parts: dict = {}
    extra_g: dict = {}
    need_fake = config.use_cls or config.use_adv or styled
    if need_fake:
        fake = model.decode(z, b, style_planes)
        feats = model.critic.features(fake)
        if config.use_adv:
            d_fake = model.critic.critic_head(feats).squeeze(1)
            parts["adv_g"] = -d_fake.mean()
        if config.use_cls:
            c_fake = torch.sigmoid(model.critic.classifier_head(feats))
            parts["cls_g"] = losses.classification_loss_generated(c_fake, b)
        if styled:
            preds = model.critic.style_probs_from(feats)
            raw_mi = mutual_information_loss(preds, controllers, active=b)
            extra_g["mi"] = config.style_weight * raw_mi
    if config.use_rec:
        rec_styles = canonical_style_planes(model.config, x.shape[0], x.dtype)
        rec_hat = model.decode(z, a, rec_styles)
        parts["rec"] = losses.reconstruction_loss(x, rec_hat)
    if config.use_attr_indep_constraint and model.latent_adversary is not None:
        pred = model.latent_adversary(z.bottleneck)
        confusion = losses.attribute_bce(pred, 1.0 - a)
        extra_g["indep_g"] = config.indep_weight * confusion
    components = losses.compose_objectives(
        weights=config.weights, extra_g=extra_g, **parts
    )
    if styled:
        components["mi"] = raw_mi  # report the unweighted surrogate
    return components


def critic_loss_components(
    model: AttrEditModel,
    x: torch.Tensor,
    a: torch.Tensor,
    b: torch.Tensor,
    config: TrainConfig,
    *,
    interp_generator: torch.Generator | None = None,
    interp_coeffs: torch.Tensor | None = None,
    controllers: StyleControllers | None = None,
) -> dict:
    """Tensor-valued components of the critic/classifier objective."""
    styled = model.config.style_counts is not None
    if styled and controllers is None:
        raise ValueError("style-enabled models need controllers per batch")
    style_planes = _styles_for(model, controllers, x.dtype)
    with torch.no_grad():
        fake = model.decode(model.encode(x), b, style_planes)

    parts: dict = {}
    extra_dc: dict = {}
    feats_real = model.critic.features(x)
    if config.use_cls:
        c_real = torch.sigmoid(model.critic.classifier_head(feats_real))
        parts["cls_c"] = losses.classification_loss_real(c_real, a)
    if config.use_adv:
        d_real = model.critic.critic_head(feats_real).squeeze(1)
        d_fake = model.critic.discriminate(fake)
        adv_d, _ = losses.adversarial_losses(d_real, d_fake)
        parts["adv_d"] = adv_d
        parts["gp"] = losses.gradient_penalty(
            model.discriminate,
            x,
            fake,
            generator=interp_generator,
            coeffs=interp_coeffs,
        )
    if styled:
        feats_fake = model.critic.features(fake)
        preds = model.critic.style_probs_from(feats_fake)
        raw_mi = mutual_information_loss(preds, controllers, active=b)
        extra_dc["mi"] = config.style_weight * raw_mi
    components = losses.compose_objectives(
        weights=config.weights, extra_dc=extra_dc, **parts
    )
    if styled:
        components["mi"] = raw_mi  # report the unweighted surrogate
    return components


# ---------------------------------------------------------------------------
# Optimization steps
# ---------------------------------------------------------------------------


def _sample_controllers(state: TrainState) -> StyleControllers | None:
    style = state.style_config
    if style is None:
        return None
    return sample_style_controllers(style, state.config.batch_size, state.rng.style)


def train_step_dc(
    state: TrainState, x: torch.Tensor, a: torch.Tensor, b: torch.Tensor
) -> LossReport:
    """One critic/classifier update; generator tensors are untouched."""
    state.model.train()
    state.opt_dc.zero_grad(set_to_none=True)
    components = critic_loss_components(
        state.model,
        x,
        a,
        b,
        state.config,
        interp_generator=state.rng.interp,
        controllers=_sample_controllers(state),
    )
    total = components["total_dc"]
    if isinstance(total, torch.Tensor):
        total.backward()
        state.opt_dc.step()
    return losses.report_from_components(components)


def train_step_g(
    state: TrainState, x: torch.Tensor, a: torch.Tensor, b: torch.Tensor
) -> LossReport:
    """One encoder/decoder update; critic tensors are untouched."""
    state.model.train()
    state.opt_g.zero_grad(set_to_none=True)
    components = generator_loss_components(
        state.model, x, a, b, state.config, controllers=_sample_controllers(state)
    )
    total = components["total_g"]
    if isinstance(total, torch.Tensor):
        total.backward()
        state.opt_g.step()
    return losses.report_from_components(components)


def attr_indep_adversary_step(
    state: TrainState, x: torch.Tensor, a: torch.Tensor
) -> LossReport:
    """Update the latent adversary to predict source attributes from z."""
    if not state.config.use_attr_indep_constraint or state.opt_aux is None:
        raise RuntimeError(
            "attribute-independence training is disabled in this configuration"
        )
    state.model.train()
    state.opt_aux.zero_grad(set_to_none=True)
    with torch.no_grad():
        z = state.model.encode(x)
    pred = state.model.latent_adversary(z.bottleneck)
    loss = losses.attribute_bce(pred, a)
    value = float(loss.detach())
    if not torch.isfinite(loss):
        raise NonFiniteLossError({"indep": value})
    loss.backward()
    state.opt_aux.step()
    return LossReport(extras={"indep": value})


# ---------------------------------------------------------------------------
# Loop, logging, checkpointing
# ---------------------------------------------------------------------------


def _phase_for_step(step: int, critic_steps: int) -> str:
    return "dc" if (step % (critic_steps + 1)) < critic_steps else "g"


def report_line(step: int, phase: str, report: LossReport) -> str:
    return json.dumps(
        {"step": step, "phase": phase, **report.to_dict()}, sort_keys=True
    )


def train_loop(
    config: TrainConfig,
    dataset: ArrayDataset,
    arch: ArchitectureConfig | None = None,
    *,
    state: TrainState | None = None,
    out_dir: str | Path | None = None,
) -> TrainState:
    """Run the alternating schedule until ``max_steps`` optimizer updates.

    Either a fresh ``arch`` or a resumable ``state`` must be given. With an
    ``out_dir`` the loop appends a JSON-lines loss log and writes periodic,
    final, and abort checkpoints.
    """
    if state is None:
        if arch is None:
            raise ValueError("either arch or state is required")
        if len(dataset) == 0:
            raise ValueError("dataset must be nonempty")
        state = init_train_state(arch, config, dataset.names)
    else:
        state.config = config  # resuming may extend max_steps etc.
    out = Path(out_dir) if out_dir is not None else None
    log_handle = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        log_handle = open(out / "losses.jsonl", "a", encoding="utf-8")

    def emit(phase: str, report: LossReport):
        state.reports.append((state.step, phase, report))
        if log_handle is not None:
            log_handle.write(report_line(state.step, phase, report) + "\n")

    try:
        while state.step < config.max_steps:
            phase = _phase_for_step(state.step, config.critic_steps)
            if phase == "g" and config.use_attr_indep_constraint:
                x, a = sample_batch(
                    dataset, state.rng.data, config.batch_size,
                    config.flip_augmentation,
                )
                emit("aux", attr_indep_adversary_step(state, x, a))
            x, a = sample_batch(
                dataset, state.rng.data, config.batch_size, config.flip_augmentation
            )
            b = torch.from_numpy(
                np.ascontiguousarray(permute_rows(a.numpy(), state.rng.targets))
            )
            if phase == "dc":
                report = train_step_dc(state, x, a, b)
            else:
                report = train_step_g(state, x, a, b)
            state.step += 1
            emit(phase, report)
            if (
                out is not None
                and config.checkpoint_every > 0
                and state.step % config.checkpoint_every == 0
                and state.step < config.max_steps
            ):
                log_handle.flush()
                save_train_state(state, out / f"step_{state.step:08d}.ckpt")
    except NonFiniteLossError as err:
        report = losses.report_from_components(err.components)
        emit("abort", report)
        ckpt = None
        if out is not None:
            log_handle.flush()
            ckpt = save_train_state(state, out / "abort.ckpt")
        raise TrainingAborted(report, ckpt) from err
    finally:
        if log_handle is not None:
            log_handle.close()

    if out is not None:
        save_train_state(state, out / "final.ckpt")
    return state


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _optimizer_tensors(opt: torch.optim.Adam, prefix: str) -> dict[str, np.ndarray]:
    tensors: dict[str, np.ndarray] = {}
    for idx, entry in opt.state_dict()["state"].items():
        for key, value in entry.items():
            array = (
                value.detach().cpu().numpy()
                if isinstance(value, torch.Tensor)
                else np.asarray(value)
            )
            tensors[f"{prefix}/{idx}/{key}"] = array
    return tensors


def _load_optimizer(opt: torch.optim.Adam, tensors: Mapping[str, np.ndarray],
                    prefix: str) -> None:
    entries: dict[int, dict] = {}
    skip = len(prefix) + 1
    for name, array in tensors.items():
        if not name.startswith(prefix + "/"):
            continue
        idx_str, key = name[skip:].split("/", 1)
        entries.setdefault(int(idx_str), {})[key] = torch.from_numpy(array.copy())
    sd = opt.state_dict()
    sd["state"] = entries
    opt.load_state_dict(sd)


def save_train_state(state: TrainState, path: str | Path) -> Path:
    tensors: dict[str, np.ndarray] = {}
    for name, value in state.model.state_dict().items():
        tensors[f"model/{name}"] = value.detach().cpu().numpy()
    tensors.update(_optimizer_tensors(state.opt_g, "opt_g"))
    tensors.update(_optimizer_tensors(state.opt_dc, "opt_dc"))
    if state.opt_aux is not None:
        tensors.update(_optimizer_tensors(state.opt_aux, "opt_aux"))
    for name, array in state.rng.torch_states().items():
        tensors[f"rng/{name}"] = array
    meta = {
        "kind": "train-state",
        "architecture": state.arch.to_dict(),
        "attribute_names": list(state.model.attr_names),
        "step": state.step,
        "train_config": state.config.to_dict(),
        "numpy_rng": state.rng.numpy_states(),
    }
    return save_checkpoint(path, meta, tensors)


def save_model_checkpoint(state: TrainState, path: str | Path) -> Path:
    """Inference-only archive: model tensors plus identifying metadata."""
    tensors = {
        f"model/{name}": value.detach().cpu().numpy()
        for name, value in state.model.state_dict().items()
    }
    meta = {
        "kind": "model",
        "architecture": state.arch.to_dict(),
        "attribute_names": list(state.model.attr_names),
        "step": state.step,
        "train_config": state.config.to_dict(),
    }
    return save_checkpoint(path, meta, tensors)


def model_from_checkpoint(source: str | Path | Checkpoint) -> AttrEditModel:
    ck = source if isinstance(source, Checkpoint) else load_checkpoint(source)
    arch = ArchitectureConfig.from_dict(ck.meta["architecture"])
    has_adversary = any(name.startswith("model/latent_adversary") for name in ck.tensors)
    model = AttrEditModel(
        arch,
        ck.meta["attribute_names"],
        init_seed=0,
        with_latent_adversary=has_adversary,
    )
    state_dict = {
        name[len("model/"):]: torch.from_numpy(array.copy())
        for name, array in ck.tensors.items()
        if name.startswith("model/")
    }
    model.load_state_dict(state_dict)
    model.eval()
    return model


def load_train_state(path: str | Path) -> TrainState:
    ck = load_checkpoint(path)
    if ck.meta.get("kind") != "train-state":
        raise ValueError(f"{path} is not a resumable training checkpoint")
    config = TrainConfig.from_dict(ck.meta["train_config"])
    arch = ArchitectureConfig.from_dict(ck.meta["architecture"])
    state = init_train_state(arch, config, ck.meta["attribute_names"])
    model_state = {
        name[len("model/"):]: torch.from_numpy(array.copy())
        for name, array in ck.tensors.items()
        if name.startswith("model/")
    }
    state.model.load_state_dict(model_state)
    _load_optimizer(state.opt_g, ck.tensors, "opt_g")
    _load_optimizer(state.opt_dc, ck.tensors, "opt_dc")
    if state.opt_aux is not None:
        _load_optimizer(state.opt_aux, ck.tensors, "opt_aux")
    torch_states = {
        name[len("rng/"):]: array
        for name, array in ck.tensors.items()
        if name.startswith("rng/")
    }
    state.rng.restore(ck.meta["numpy_rng"], torch_states)
    state.step = int(ck.meta["step"])
    return state
