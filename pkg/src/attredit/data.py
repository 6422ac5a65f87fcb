"""Image preprocessing and in-memory dataset containers.

All pixel data inside the package lives as H x W x 3 float32 arrays in
[-1, 1]; conversion to channels-first torch tensors happens only at the
model boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from PIL import Image

from .attributes import DatasetManifest, assign_split
from .synthetic import SyntheticDataset


def preprocess_image(raw, resolution: int) -> np.ndarray:
    """Center-crop, resize, and rescale an 8-bit RGB image to [-1, 1].

    Accepts a PIL image or an H x W x 3 uint8 array. The value mapping is
    v / 127.5 - 1 applied after the geometric steps.
    """
    if isinstance(raw, np.ndarray):
        if raw.ndim != 3 or raw.shape[2] != 3 or raw.dtype != np.uint8:
            raise ValueError(
                f"expected an 8-bit RGB array of shape HxWx3, got "
                f"shape {raw.shape} dtype {raw.dtype}"
            )
        image = Image.fromarray(raw, mode="RGB")
    elif isinstance(raw, Image.Image):
        if raw.mode != "RGB":
            raise ValueError(f"expected an RGB image, got mode {raw.mode!r}")
        image = raw
    else:
        raise TypeError(f"unsupported image input type {type(raw).__name__}")

    width, height = image.size
    side = min(width, height)
    left = (width - side) // 2
    top = (height - side) // 2
    image = image.crop((left, top, left + side, top + side))
    if side != resolution:
        image = image.resize((resolution, resolution), Image.BILINEAR)
    pixels = np.asarray(image, dtype=np.float32)
    return pixels / 127.5 - 1.0


@dataclass(frozen=True)
class ArrayDataset:
    """Immutable image/label arrays ready for training or evaluation."""

    images: np.ndarray  # (N, H, W, 3) float32 in [-1, 1]
    labels: np.ndarray  # (N, n) float32 in {0, 1}
    ids: tuple[str, ...]
    names: tuple[str, ...]

    def __post_init__(self):
        if not (self.images.shape[0] == self.labels.shape[0] == len(self.ids)):
            raise ValueError("images, labels and ids must agree in length")
        if self.labels.shape[1] != len(self.names):
            raise ValueError("label width must match the attribute name count")
        self.images.flags.writeable = False
        self.labels.flags.writeable = False

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def resolution(self) -> int:
        return self.images.shape[1]

    def subset(self, indices: Sequence[int]) -> "ArrayDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return ArrayDataset(
            self.images[idx].copy(),
            self.labels[idx].copy(),
            tuple(self.ids[i] for i in idx),
            self.names,
        )


def dataset_from_synthetic(dataset: SyntheticDataset) -> ArrayDataset:
    return ArrayDataset(
        np.array(dataset.images), np.array(dataset.labels), dataset.ids, dataset.names
    )


def split_dataset(
    dataset: ArrayDataset,
    seed: int,
    fractions: Sequence[float] = (0.8, 0.1, 0.1),
) -> dict[str, ArrayDataset]:
    """Partition by hashed id, mirroring manifest splitting."""
    parts: dict[str, list[int]] = {"train": [], "val": [], "test": []}
    for i, sample_id in enumerate(dataset.ids):
        parts[assign_split(sample_id, seed, fractions)].append(i)
    return {split: dataset.subset(indices) for split, indices in parts.items()}


def load_image_dataset(
    manifest: DatasetManifest, image_dir: str | Path, resolution: int
) -> ArrayDataset:
    """Load the images named by a manifest from PNG/JPEG files on disk."""
    image_dir = Path(image_dir)
    images = np.zeros((len(manifest), resolution, resolution, 3), dtype=np.float32)
    for i, (sample_id, _) in enumerate(manifest.records):
        with Image.open(image_dir / sample_id) as img:
            images[i] = preprocess_image(img.convert("RGB"), resolution)
    return ArrayDataset(images, manifest.label_matrix(), manifest.ids, manifest.names)


def to_image_tensor(images: np.ndarray) -> torch.Tensor:
    """(N, H, W, 3) float32 array -> (N, 3, H, W) float32 tensor."""
    array = np.ascontiguousarray(np.moveaxis(images, -1, 1))
    return torch.from_numpy(array)


def to_image_array(tensor: torch.Tensor) -> np.ndarray:
    """(N, 3, H, W) tensor -> (N, H, W, 3) float32 array."""
    return np.moveaxis(tensor.detach().cpu().numpy(), 1, -1).astype(np.float32)


def sample_batch(
    dataset: ArrayDataset,
    rng: np.random.Generator,
    batch_size: int,
    flip: bool = False,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Draw an i.i.d. uniform batch as (images NCHW, labels) tensors.

    Uniform per-step sampling (rather than epoch permutations) keeps the
    data stream a pure function of the generator state, which is what makes
    mid-run checkpoint resume exact.
    """
    idx = rng.integers(0, len(dataset), size=batch_size)
    images = dataset.images[idx]
    if flip:
        flips = rng.random(batch_size) < 0.5
        images = images.copy()
        images[flips] = images[flips, :, ::-1, :]
    labels = torch.from_numpy(np.ascontiguousarray(dataset.labels[idx]))
    return to_image_tensor(images), labels
