"""Editing quality metrics judged by an independent attribute classifier.

The protocol: for every test image and every attribute, invert that
attribute (keeping the rest at their source values), run the editor, and
ask a judge classifier whether the edit took. Editing accuracy is the
fraction of edits where the judge's thresholded prediction matches the
inverted target; preservation error is the judge's mean mismatch rate on
the remaining attributes against the source labels.

The judge shares no code or tensors with any evaluated model. For
procedural datasets the rule-based pixel probe doubles as a perfect
reference judge, which anchors the whole pipeline: a perfect editor under
a perfect judge must score accuracy 1 and preservation error 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch
from scipy import stats
from torch import nn

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import ArrayDataset, to_image_array, to_image_tensor
from .networks import AttrEditModel
from .synthetic import SyntheticDataset, probe_attributes

Editor = Callable[[np.ndarray, np.ndarray], np.ndarray]
JudgeFn = Callable[[np.ndarray], np.ndarray]

THRESHOLD = 0.5


class DegenerateDatasetError(ValueError):
    """Some attribute has a single class; a judge cannot be trained on it."""


@dataclass
class EvalReport:
    names: tuple[str, ...]
    editing_accuracy: tuple[float, ...]
    preservation_error: tuple[float, ...]
    sample_count: int

    def __post_init__(self):
        if self.sample_count <= 0:
            raise ValueError("sample_count must be positive")
        for value in (*self.editing_accuracy, *self.preservation_error):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"metric value {value} outside [0, 1]")

    @property
    def macro_accuracy(self) -> float:
        return float(np.mean(self.editing_accuracy))

    @property
    def macro_preservation_error(self) -> float:
        return float(np.mean(self.preservation_error))

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "editing_accuracy": list(self.editing_accuracy),
            "preservation_error": list(self.preservation_error),
            "macro_accuracy": self.macro_accuracy,
            "macro_preservation_error": self.macro_preservation_error,
            "sample_count": self.sample_count,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text_table(self) -> str:
        width = max(len(n) for n in self.names)
        lines = [
            f"{'attribute':<{width}}  accuracy  preservation_error",
            "-" * (width + 30),
        ]
        for name, acc, err in zip(
            self.names, self.editing_accuracy, self.preservation_error
        ):
            lines.append(f"{name:<{width}}  {acc:8.4f}  {err:18.4f}")
        lines.append("-" * (width + 30))
        lines.append(
            f"{'macro':<{width}}  {self.macro_accuracy:8.4f}  "
            f"{self.macro_preservation_error:18.4f}"
        )
        lines.append(f"samples: {self.sample_count}")
        return "\n".join(lines)

    def write_bar_chart_data(self, path: str | Path) -> Path:
        """Plain per-attribute values for external plotting tools."""
        path = Path(path)
        rows = ["attribute editing_accuracy preservation_error"]
        for name, acc, err in zip(
            self.names, self.editing_accuracy, self.preservation_error
        ):
            rows.append(f"{name} {acc:.6f} {err:.6f}")
        path.write_text("\n".join(rows) + "\n")
        return path


# ---------------------------------------------------------------------------
# The judge
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JudgeConfig:
    resolution: int
    n_attrs: int
    channels: tuple[int, ...] = (24, 48, 96)
    hidden: int = 128
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 3
    seed: int = 0


class JudgeNet(nn.Module):
    """Compact convnet, deliberately unlike the editing model's classifier."""

    def __init__(self, config: JudgeConfig):
        super().__init__()
        self.config = config
        layers: list[nn.Module] = []
        in_ch = 3
        size = config.resolution
        for ch in config.channels:
            layers += [nn.Conv2d(in_ch, ch, 3, 2, 1), nn.ReLU(inplace=True)]
            in_ch = ch
            size = (size + 1) // 2
        self.features = nn.Sequential(*layers)
        self.head = nn.Sequential(
            nn.Flatten(),
            nn.Linear(in_ch * size * size, config.hidden),
            nn.ReLU(inplace=True),
            nn.Linear(config.hidden, config.n_attrs),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x))


def train_independent_classifier(
    train: ArrayDataset, val: ArrayDataset, config: JudgeConfig
) -> tuple[JudgeNet, np.ndarray]:
    """Train the judge and report held-out per-attribute accuracy."""
    for i, name in enumerate(train.names):
        classes = np.unique(train.labels[:, i])
        if classes.size < 2:
            raise DegenerateDatasetError(
                f"attribute {name!r} has a single class in the training split"
            )
    torch_rng = torch.Generator().manual_seed(config.seed)
    data_rng = np.random.default_rng(config.seed)
    judge = JudgeNet(config)
    with torch.no_grad():
        for p in judge.parameters():
            if p.dim() > 1:
                p.copy_(torch.randn(p.shape, generator=torch_rng) * 0.05)
            else:
                p.zero_()
    opt = torch.optim.Adam(judge.parameters(), lr=config.learning_rate)
    bce = nn.BCEWithLogitsLoss()
    n = len(train)
    steps_per_epoch = max(1, n // config.batch_size)
    judge.train()
    for _ in range(config.epochs):
        order = data_rng.permutation(n)
        for s in range(steps_per_epoch):
            idx = order[s * config.batch_size : (s + 1) * config.batch_size]
            x = to_image_tensor(train.images[idx])
            y = torch.from_numpy(np.ascontiguousarray(train.labels[idx]))
            opt.zero_grad(set_to_none=True)
            loss = bce(judge(x), y)
            loss.backward()
            opt.step()
    judge.eval()
    probs = judge_probabilities(judge, val.images)
    accuracy = ((probs >= THRESHOLD) == (val.labels >= THRESHOLD)).mean(axis=0)
    return judge, accuracy.astype(np.float64)


def judge_probabilities(
    judge: JudgeNet, images: np.ndarray, batch_size: int = 256
) -> np.ndarray:
    judge.eval()
    outputs = []
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            x = to_image_tensor(images[start : start + batch_size])
            outputs.append(torch.sigmoid(judge(x)).numpy())
    return np.concatenate(outputs, axis=0)


def judge_fn(judge: JudgeNet) -> JudgeFn:
    return lambda images: judge_probabilities(judge, images)


def probe_judge(names: Sequence[str]) -> JudgeFn:
    """The exact rule-based judge for procedural data."""

    def fn(images: np.ndarray) -> np.ndarray:
        return np.stack([probe_attributes(img, names) for img in images])

    return fn


def save_judge(judge: JudgeNet, accuracy: np.ndarray, path: str | Path) -> Path:
    tensors = {
        f"judge/{name}": value.detach().cpu().numpy()
        for name, value in judge.state_dict().items()
    }
    meta = {
        "kind": "judge",
        "judge_config": {
            "resolution": judge.config.resolution,
            "n_attrs": judge.config.n_attrs,
            "channels": list(judge.config.channels),
            "hidden": judge.config.hidden,
            "learning_rate": judge.config.learning_rate,
            "batch_size": judge.config.batch_size,
            "epochs": judge.config.epochs,
            "seed": judge.config.seed,
        },
        "holdout_accuracy": [float(a) for a in accuracy],
    }
    return save_checkpoint(path, meta, tensors)


def load_judge(path: str | Path) -> tuple[JudgeNet, np.ndarray]:
    ck: Checkpoint = load_checkpoint(path)
    if ck.meta.get("kind") != "judge":
        raise ValueError(f"{path} is not a judge checkpoint")
    raw = dict(ck.meta["judge_config"])
    raw["channels"] = tuple(raw["channels"])
    judge = JudgeNet(JudgeConfig(**raw))
    judge.load_state_dict(
        {
            name[len("judge/"):]: torch.from_numpy(arr.copy())
            for name, arr in ck.tensors.items()
        }
    )
    judge.eval()
    return judge, np.asarray(ck.meta["holdout_accuracy"], dtype=np.float64)


# ---------------------------------------------------------------------------
# Editors
# ---------------------------------------------------------------------------


def model_editor(model: AttrEditModel, batch_size: int = 128) -> Editor:
    """Wrap a trained model as an array-in/array-out editing function."""

    def edit(images: np.ndarray, targets: np.ndarray) -> np.ndarray:
        model.eval()
        outputs = []
        styles = None
        with torch.no_grad():
            for start in range(0, len(images), batch_size):
                x = to_image_tensor(images[start : start + batch_size])
                t = torch.from_numpy(
                    np.ascontiguousarray(targets[start : start + batch_size])
                ).to(x.dtype)
                if model.config.style_counts is not None:
                    styles = torch.zeros(x.shape[0], model.config.style_total,
                                         dtype=x.dtype)
                    offset = 0
                    for count in model.config.style_counts:
                        styles[:, offset] = 1.0
                        offset += count
                outputs.append(to_image_array(model.edit(x, t, styles)))
        return np.concatenate(outputs, axis=0)

    return edit


def oracle_editor(dataset: SyntheticDataset, indices: Sequence[int]) -> Editor:
    """Perfect editor that re-renders procedural images with new labels.

    ``indices`` maps evaluation positions back to dataset rows.
    """
    index_list = list(indices)

    def edit(images: np.ndarray, targets: np.ndarray) -> np.ndarray:
        if len(images) != len(index_list):
            raise ValueError(
                f"oracle editor bound to {len(index_list)} rows, got {len(images)}"
            )
        return np.stack(
            [
                dataset.render_with_labels(index_list[i], targets[i])
                for i in range(len(images))
            ]
        )

    return edit


def identity_editor() -> Editor:
    return lambda images, targets: images.copy()


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _inverted_targets(labels: np.ndarray, attr_index: int) -> np.ndarray:
    targets = labels.copy()
    targets[:, attr_index] = 1.0 - targets[:, attr_index]
    return targets


def editing_accuracy(
    editor: Editor,
    images: np.ndarray,
    labels: np.ndarray,
    attr_index: int,
    judge: JudgeFn,
) -> float:
    """Fraction of inversions of one attribute the judge confirms."""
    if len(images) == 0:
        raise ValueError("test set must be nonempty")
    targets = _inverted_targets(labels, attr_index)
    edited = editor(images, targets)
    predicted = judge(edited)[:, attr_index] >= THRESHOLD
    desired = targets[:, attr_index] >= THRESHOLD
    return float((predicted == desired).mean())


def preservation_error(
    editor: Editor,
    images: np.ndarray,
    labels: np.ndarray,
    attr_index: int,
    judge: JudgeFn,
) -> float:
    """Judge mismatch rate on the untouched attributes after an edit."""
    if len(images) == 0:
        raise ValueError("test set must be nonempty")
    targets = _inverted_targets(labels, attr_index)
    edited = editor(images, targets)
    predictions = judge(edited) >= THRESHOLD
    reference = labels >= THRESHOLD
    others = [j for j in range(labels.shape[1]) if j != attr_index]
    if not others:
        return 0.0
    return float((predictions[:, others] != reference[:, others]).mean())


def evaluate_editor(
    editor: Editor,
    dataset: ArrayDataset,
    judge: JudgeFn,
    *,
    max_samples: int | None = None,
) -> EvalReport:
    images, labels = dataset.images, dataset.labels
    if max_samples is not None:
        images, labels = images[:max_samples], labels[:max_samples]
    acc, err = [], []
    for i in range(len(dataset.names)):
        acc.append(editing_accuracy(editor, images, labels, i, judge))
        err.append(preservation_error(editor, images, labels, i, judge))
    return EvalReport(
        names=dataset.names,
        editing_accuracy=tuple(acc),
        preservation_error=tuple(err),
        sample_count=len(images),
    )


@dataclass(frozen=True)
class SweepPoint:
    value: float
    probability: float
    image: np.ndarray


def intensity_sweep(
    editor: Editor,
    image: np.ndarray,
    labels: np.ndarray,
    attr_index: int,
    steps: int,
    judge: JudgeFn,
) -> list[SweepPoint]:
    """Edit one image at evenly spaced intensities of one attribute."""
    if steps < 2:
        raise ValueError("an intensity sweep needs at least two steps")
    values = np.linspace(0.0, 1.0, steps)
    batch_images = np.repeat(image[None], steps, axis=0)
    targets = np.repeat(labels[None], steps, axis=0).astype(np.float32)
    targets[:, attr_index] = values
    edited = editor(batch_images, targets)
    probs = judge(edited)[:, attr_index]
    return [
        SweepPoint(float(v), float(p), img)
        for v, p, img in zip(values, probs, edited)
    ]


def sweep_rank_correlation(
    editor: Editor,
    dataset: ArrayDataset,
    attr_index: int,
    judge: JudgeFn,
    *,
    steps: int = 11,
    n_images: int = 100,
) -> float:
    """Mean Spearman correlation between intensity and judge probability."""
    n = min(n_images, len(dataset))
    correlations = []
    for i in range(n):
        points = intensity_sweep(
            editor, dataset.images[i], dataset.labels[i], attr_index, steps, judge
        )
        values = [p.value for p in points]
        probs = [p.probability for p in points]
        rho = stats.spearmanr(values, probs).statistic
        correlations.append(0.0 if np.isnan(rho) else float(rho))
    return float(np.mean(correlations))
