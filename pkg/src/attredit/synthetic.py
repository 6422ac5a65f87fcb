"""Procedural face-like dataset with exactly recoverable attribute labels.

Each image is a flat background plus an elliptical "face" carrying glyphs
driven by binary attributes:

    Eyeglasses  near-black band across the eye line
    Bangs       brown fringe band at the top of the face
    Pale_Skin   whitened skin palette instead of the warm default
    Mouth_Open  filled mouth ellipse instead of a thin lip line

Nuisance factors (face position and radii, background color, palette
shades within reserved color ranges) are randomized per image, but glyph
geometry and the reserved palettes are chosen so that a fixed rule-based
pixel probe recovers every label with certainty:

  * probe regions are positioned so that, under the worst-case jitter,
    they are always inside the face and always covered by the glyph when
    its attribute is on;
  * glyph colors live in ranges no other scene element may occupy inside
    the corresponding region.

Because the probe is exact, trained editors can later be scored against
an oracle instead of another learned model. Per-image randomness comes
from two independent child streams of ``(seed, index)``, one for labels
and one for nuisance draws, so any image can be re-rendered with altered
labels while keeping its nuisance factors fixed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .attributes import AttributeVector, DatasetManifest, serialize_annotations

SYNTHETIC_ATTRIBUTE_NAMES: tuple[str, ...] = (
    "Eyeglasses",
    "Bangs",
    "Pale_Skin",
    "Mouth_Open",
)

SUPPORTED_RESOLUTIONS: tuple[int, ...] = (32, 48, 64)

_FACE_RX = 0.30
_FACE_RY = 0.38
_RADIUS_JITTER = 0.02
_CENTER_JITTER = 1.0 / 30.0
_EYE_DY = -0.135
_EYE_DX = 0.135
_EYE_R = 0.045
_GLASSES_HALF = 0.05
_GLASSES_HALF_W = 0.28
_BANGS_TOP = 0.02
_BANGS_BOTTOM = 0.18
_MOUTH_DY = 0.19
_MOUTH_RX = 0.14
_MOUTH_RY = 0.075
_LIP_HALF = 0.012
_LIP_HALF_W = 0.10

# Probe geometry, fixed in normalized image coordinates. Derived from the
# worst-case jitter envelope; see the margin analysis in tests.
_PROBE_GLASSES = ((0.355, 0.375), (0.44, 0.56))
_PROBE_BANGS = ((0.195, 0.245), (0.46, 0.54))
_PROBE_SKIN = ((0.47, 0.53), (0.47, 0.53))
_PROBE_MOUTH = ((0.58, 0.80), (0.32, 0.68))
_MOUTH_AREA_THRESHOLD = 16.0 / (32.0 * 32.0)  # fraction of image area


@dataclass(frozen=True)
class SyntheticSpec:
    """Size, resolution and attribute subset of a procedural dataset."""

    size: int
    resolution: int = 32
    attributes: tuple[str, ...] = SYNTHETIC_ATTRIBUTE_NAMES
    marginal: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        if self.size < 0:
            raise ValueError("size must be nonnegative")
        if self.resolution not in SUPPORTED_RESOLUTIONS:
            raise ValueError(
                f"resolution must be one of {SUPPORTED_RESOLUTIONS}, "
                f"got {self.resolution}"
            )
        unknown = set(self.attributes) - set(SYNTHETIC_ATTRIBUTE_NAMES)
        if unknown:
            raise ValueError(f"unknown synthetic attributes: {sorted(unknown)}")
        if len(set(self.attributes)) != len(self.attributes):
            raise ValueError("attribute names must be unique")
        if not 0.0 <= self.marginal <= 1.0:
            raise ValueError("marginal probability must lie in [0, 1]")


def _ellipse_mask(xs, ys, cx, cy, rx, ry):
    return ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0


def _band_mask(xs, ys, cx, half_w, lo, hi):
    return (np.abs(xs - cx) <= half_w) & (ys >= lo) & (ys <= hi)


class _Nuisance:
    """All per-image nuisance draws, consumed in a fixed order.

    The draw order never depends on the labels, so re-rendering with
    different labels reuses identical nuisance factors.
    """

    def __init__(self, rng: np.random.Generator):
        self.background = rng.uniform(0.05, 0.30, size=3)
        self.cx = 0.5 + rng.uniform(-_CENTER_JITTER, _CENTER_JITTER)
        self.cy = 0.5 + rng.uniform(-_CENTER_JITTER, _CENTER_JITTER)
        self.rx = _FACE_RX + rng.uniform(-_RADIUS_JITTER, _RADIUS_JITTER)
        self.ry = _FACE_RY + rng.uniform(-_RADIUS_JITTER, _RADIUS_JITTER)
        self.skin = np.array(
            [
                rng.uniform(0.58, 0.72),
                rng.uniform(0.44, 0.56),
                rng.uniform(0.34, 0.46),
            ]
        )
        self.pale = np.repeat(rng.uniform(0.88, 0.93), 3) + rng.uniform(
            -0.02, 0.02, size=3
        )
        self.iris = np.array(
            [
                rng.uniform(0.10, 0.28),
                rng.uniform(0.30, 0.60),
                rng.uniform(0.50, 0.85),
            ]
        )
        self.hair = np.array(
            [
                rng.uniform(0.30, 0.42),
                rng.uniform(0.15, 0.26),
                rng.uniform(0.04, 0.13),
            ]
        )
        self.mouth = np.array(
            [
                rng.uniform(0.55, 0.70),
                rng.uniform(0.05, 0.15),
                rng.uniform(0.05, 0.15),
            ]
        )
        self.glasses = np.repeat(rng.uniform(0.0, 0.06), 3)


def render_face(
    resolution: int,
    labels: Mapping[str, int],
    nuisance_rng: np.random.Generator,
) -> np.ndarray:
    """Render one synthetic face as an H x W x 3 float32 image in [-1, 1]."""
    n = _Nuisance(nuisance_rng)
    coords = (np.arange(resolution, dtype=np.float64) + 0.5) / resolution
    xs, ys = np.meshgrid(coords, coords)

    image = np.empty((resolution, resolution, 3), dtype=np.float64)
    image[:] = n.background

    face = _ellipse_mask(xs, ys, n.cx, n.cy, n.rx, n.ry)
    skin = n.pale if labels.get("Pale_Skin", 0) else n.skin
    image[face] = skin

    if labels.get("Bangs", 0):
        top = n.cy - n.ry
        bangs = face & (ys >= top + _BANGS_TOP) & (ys <= top + _BANGS_BOTTOM)
        image[bangs] = n.hair

    for side in (-1.0, 1.0):
        eye = _ellipse_mask(xs, ys, n.cx + side * _EYE_DX, n.cy + _EYE_DY, _EYE_R, _EYE_R)
        image[eye] = n.iris

    if labels.get("Eyeglasses", 0):
        band = _band_mask(
            xs,
            ys,
            n.cx,
            _GLASSES_HALF_W,
            n.cy + _EYE_DY - _GLASSES_HALF,
            n.cy + _EYE_DY + _GLASSES_HALF,
        )
        image[band] = n.glasses

    mouth_cy = n.cy + _MOUTH_DY
    if labels.get("Mouth_Open", 0):
        mouth = _ellipse_mask(xs, ys, n.cx, mouth_cy, _MOUTH_RX, _MOUTH_RY)
    else:
        mouth = _band_mask(
            xs, ys, n.cx, _LIP_HALF_W, mouth_cy - _LIP_HALF, mouth_cy + _LIP_HALF
        )
    image[mouth] = n.mouth

    return (image * 2.0 - 1.0).astype(np.float32)


def _region(image01: np.ndarray, bounds) -> np.ndarray:
    (v_lo, v_hi), (u_lo, u_hi) = bounds
    res = image01.shape[0]
    rows = slice(int(round(v_lo * res)), int(round(v_hi * res)))
    cols = slice(int(round(u_lo * res)), int(round(u_hi * res)))
    return image01[rows, cols]


def probe_attributes(image: np.ndarray, names: Sequence[str]) -> np.ndarray:
    """Recover attribute labels from pixels with fixed rules (no learning).

    ``image`` is an H x W x 3 array in [-1, 1] at a supported resolution.
    Returns a float array of 0/1 labels ordered like ``names``.
    """
    if image.ndim != 3 or image.shape[2] != 3 or image.shape[0] != image.shape[1]:
        raise ValueError(f"expected a square HxWx3 image, got shape {image.shape}")
    image01 = (np.asarray(image, dtype=np.float64) + 1.0) / 2.0
    res = image01.shape[0]

    labels = []
    for name in names:
        if name == "Eyeglasses":
            region = _region(image01, _PROBE_GLASSES)
            value = bool((region.max(axis=2) < 0.12).any())
        elif name == "Bangs":
            region = _region(image01, _PROBE_BANGS)
            value = bool(region[..., 1].mean() < 0.35)
        elif name == "Pale_Skin":
            region = _region(image01, _PROBE_SKIN)
            value = bool(region.mean(axis=(0, 1)).min() > 0.60)
        elif name == "Mouth_Open":
            region = _region(image01, _PROBE_MOUTH)
            red = (
                (region[..., 0] >= 0.45)
                & (region[..., 1] <= 0.25)
                & (region[..., 2] <= 0.25)
            )
            value = bool(red.sum() >= _MOUTH_AREA_THRESHOLD * res * res)
        else:
            raise ValueError(f"unknown synthetic attribute {name!r}")
        labels.append(1.0 if value else 0.0)
    return np.asarray(labels, dtype=np.float32)


class SyntheticDataset:
    """Eagerly rendered procedural dataset with re-render support."""

    def __init__(self, spec: SyntheticSpec, seed: int):
        self.spec = spec
        self.seed = int(seed)
        n = len(spec.attributes)
        self.names = spec.attributes
        self.ids = tuple(f"syn_{i:06d}.png" for i in range(spec.size))
        labels = np.zeros((spec.size, n), dtype=np.float32)
        images = np.zeros(
            (spec.size, spec.resolution, spec.resolution, 3), dtype=np.float32
        )
        for i in range(spec.size):
            label_rng, nuisance_rng = self._streams(i)
            labels[i] = (label_rng.random(n) < spec.marginal).astype(np.float32)
            images[i] = render_face(
                spec.resolution, dict(zip(self.names, labels[i])), nuisance_rng
            )
        labels.flags.writeable = False
        images.flags.writeable = False
        self.labels = labels
        self.images = images

    def _streams(self, index: int):
        children = np.random.SeedSequence([self.seed, int(index)]).spawn(2)
        return np.random.default_rng(children[0]), np.random.default_rng(children[1])

    def __len__(self) -> int:
        return self.spec.size

    def render_with_labels(self, index: int, labels: Sequence[float]) -> np.ndarray:
        """Re-render sample ``index`` with forced labels, nuisance unchanged.

        This is the oracle editor: a perfect attribute edit by construction.
        """
        _, nuisance_rng = self._streams(index)
        mapping = {name: int(round(v)) for name, v in zip(self.names, labels)}
        return render_face(self.spec.resolution, mapping, nuisance_rng)

    def manifest(self, split: str = "train") -> DatasetManifest:
        records = tuple(
            (sample_id, AttributeVector(self.names, tuple(row)))
            for sample_id, row in zip(self.ids, self.labels)
        )
        source = (
            f"synthetic:size={self.spec.size},res={self.spec.resolution},"
            f"seed={self.seed}"
        )
        return DatasetManifest(records, self.names, split, source)


def generate_synthetic_dataset(spec: SyntheticSpec, seed: int) -> SyntheticDataset:
    """Deterministically materialize a procedural dataset in memory."""
    return SyntheticDataset(spec, seed)


def write_synthetic_dataset(dataset: SyntheticDataset, out_dir: str | Path) -> Path:
    """Write PNGs plus a CelebA-layout annotation file and a spec echo."""
    from PIL import Image

    out = Path(out_dir)
    image_dir = out / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    for sample_id, image in zip(dataset.ids, dataset.images):
        u8 = np.clip((image + 1.0) * 127.5, 0, 255).round().astype(np.uint8)
        Image.fromarray(u8, mode="RGB").save(image_dir / sample_id)
    (out / "annotations.txt").write_text(serialize_annotations(dataset.manifest()))
    (out / "spec.json").write_text(
        json.dumps(
            {
                "size": dataset.spec.size,
                "resolution": dataset.spec.resolution,
                "attributes": list(dataset.spec.attributes),
                "marginal": dataset.spec.marginal,
                "seed": dataset.seed,
            },
            indent=2,
        )
    )
    return out
