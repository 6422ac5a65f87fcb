"""Attribute vectors, CelebA-style annotation parsing, and target sampling.

Dataset labels are strictly binary; fractional values are legal only as
editing intensities at inference time. Attribute name order is fixed for
the lifetime of a model and travels with every checkpoint.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

# The thirteen CelebA attributes the default face-editing models handle.
DEFAULT_ATTRIBUTE_NAMES: tuple[str, ...] = (
    "Bald",
    "Bangs",
    "Black_Hair",
    "Blond_Hair",
    "Brown_Hair",
    "Bushy_Eyebrows",
    "Eyeglasses",
    "Male",
    "Mouth_Slightly_Open",
    "Mustache",
    "No_Beard",
    "Pale_Skin",
    "Young",
)

SPLITS: tuple[str, ...] = ("train", "val", "test")

DEFAULT_SPLIT_FRACTIONS: tuple[float, float, float] = (0.8, 0.1, 0.1)


class AnnotationFormatError(ValueError):
    """Annotation text violates the expected layout.

    Carries the 1-based line number where the problem was found.
    """

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class AttributeVector:
    """Ordered attribute values in [0, 1] paired with their names."""

    names: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.names) != len(self.values):
            raise ValueError(
                f"{len(self.names)} names but {len(self.values)} values"
            )
        if len(set(self.names)) != len(self.names):
            raise ValueError("attribute names must be unique")
        for name, v in zip(self.names, self.values):
            if not math.isfinite(v) or not 0.0 <= v <= 1.0:
                raise ValueError(f"attribute {name!r} value {v} outside [0, 1]")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def is_binary(self) -> bool:
        return all(v in (0.0, 1.0) for v in self.values)

    def as_array(self, dtype=np.float32) -> np.ndarray:
        return np.asarray(self.values, dtype=dtype)

    def value_of(self, name: str) -> float:
        try:
            return self.values[self.names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def with_values(self, updates: Mapping[str, float]) -> "AttributeVector":
        """Return a copy with the named entries replaced (bounds-checked)."""
        unknown = set(updates) - set(self.names)
        if unknown:
            raise KeyError(f"unknown attribute names: {sorted(unknown)}")
        values = tuple(
            float(updates.get(name, value))
            for name, value in zip(self.names, self.values)
        )
        return AttributeVector(self.names, values)

    @classmethod
    def binary(cls, names: Sequence[str], bits: Sequence[int]) -> "AttributeVector":
        for b in bits:
            if b not in (0, 1):
                raise ValueError(f"binary labels must be 0 or 1, got {b}")
        return cls(tuple(names), tuple(float(b) for b in bits))


@dataclass(frozen=True)
class DatasetManifest:
    """Immutable index of (image id, binary attribute vector) records."""

    records: tuple[tuple[str, AttributeVector], ...]
    names: tuple[str, ...]
    split: str
    source: str

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "names", tuple(self.names))
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        seen: set[str] = set()
        for sample_id, vector in self.records:
            if sample_id in seen:
                raise ValueError(f"duplicate sample id {sample_id!r}")
            seen.add(sample_id)
            if vector.names != self.names:
                raise ValueError(
                    f"record {sample_id!r} names {vector.names} do not match "
                    f"manifest names {self.names}"
                )
            if not vector.is_binary:
                raise ValueError(f"record {sample_id!r} has non-binary labels")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(sample_id for sample_id, _ in self.records)

    def label_matrix(self, dtype=np.float32) -> np.ndarray:
        if not self.records:
            return np.zeros((0, len(self.names)), dtype=dtype)
        return np.stack([vec.as_array(dtype) for _, vec in self.records])


def _iter_lines(annotation_text: str | Iterable[str]) -> list[str]:
    if isinstance(annotation_text, str):
        return annotation_text.splitlines()
    return [line.rstrip("\n") for line in annotation_text]


def parse_attribute_annotations(
    annotation_text: str | Iterable[str],
    selected_names: Sequence[str],
    *,
    split: str = "train",
    source: str = "<memory>",
) -> DatasetManifest:
    """Parse CelebA-layout annotation text into a manifest.

    Layout: line 1 is the record count, line 2 the whitespace-separated
    attribute names, and each following line an image id plus one +-1 token
    per attribute. Token 1 maps to label 1, token -1 to label 0. Records are
    restricted and reordered to ``selected_names``.
    """
    lines = _iter_lines(annotation_text)
    if not lines:
        raise AnnotationFormatError(1, "empty annotation text")

    try:
        declared = int(lines[0].strip())
    except ValueError:
        raise AnnotationFormatError(
            1, f"malformed record count {lines[0].strip()!r}"
        ) from None
    if declared < 0:
        raise AnnotationFormatError(1, f"negative record count {declared}")

    if len(lines) < 2:
        raise AnnotationFormatError(2, "missing attribute header line")
    header = tuple(lines[1].split())
    if not header:
        raise AnnotationFormatError(2, "empty attribute header line")
    if len(set(header)) != len(header):
        raise AnnotationFormatError(2, "duplicate attribute name in header")

    selected = tuple(selected_names)
    for name in selected:
        if name not in header:
            raise AnnotationFormatError(2, f"selected attribute {name!r} not in header")
    columns = [header.index(name) for name in selected]

    records: list[tuple[str, AttributeVector]] = []
    seen: set[str] = set()
    row_lines = [
        (idx + 3, line) for idx, line in enumerate(lines[2:]) if line.strip()
    ]
    if len(row_lines) != declared:
        raise AnnotationFormatError(
            1, f"record count {declared} does not match {len(row_lines)} data rows"
        )
    for line_no, line in row_lines:
        tokens = line.split()
        if len(tokens) != len(header) + 1:
            raise AnnotationFormatError(
                line_no,
                f"expected id plus {len(header)} tokens, got {len(tokens)}",
            )
        sample_id = tokens[0]
        if sample_id in seen:
            raise AnnotationFormatError(line_no, f"duplicate sample id {sample_id!r}")
        seen.add(sample_id)
        bits = []
        for col in columns:
            token = tokens[1 + col]
            if token == "1":
                bits.append(1)
            elif token == "-1":
                bits.append(0)
            else:
                raise AnnotationFormatError(
                    line_no, f"attribute token must be 1 or -1, got {token!r}"
                )
        records.append((sample_id, AttributeVector.binary(selected, bits)))

    return DatasetManifest(tuple(records), selected, split, source)


def serialize_annotations(manifest: DatasetManifest) -> str:
    """Render a manifest back to CelebA-layout annotation text."""
    lines = [str(len(manifest.records)), " ".join(manifest.names)]
    for sample_id, vector in manifest.records:
        tokens = ["1" if v == 1.0 else "-1" for v in vector.values]
        lines.append(" ".join([sample_id] + tokens))
    return "\n".join(lines) + "\n"


def assign_split(
    sample_id: str,
    seed: int,
    fractions: Sequence[float] = DEFAULT_SPLIT_FRACTIONS,
) -> str:
    """Deterministically assign an id to train/val/test.

    Pure function of (id, seed) so the same split is reproduced on any
    machine regardless of record order.
    """
    if len(fractions) != 3:
        raise ValueError("fractions must have three entries (train, val, test)")
    total = float(sum(fractions))
    digest = hashlib.sha256(f"{seed}:{sample_id}".encode()).digest()
    u = int.from_bytes(digest[:8], "big") / 2**64
    acc = 0.0
    for split, frac in zip(SPLITS, fractions):
        acc += frac / total
        if u < acc:
            return split
    return SPLITS[-1]


def split_manifest(
    manifest: DatasetManifest,
    seed: int,
    fractions: Sequence[float] = DEFAULT_SPLIT_FRACTIONS,
) -> dict[str, DatasetManifest]:
    """Partition a manifest into train/val/test manifests by hashed id."""
    buckets: dict[str, list[tuple[str, AttributeVector]]] = {s: [] for s in SPLITS}
    for sample_id, vector in manifest.records:
        buckets[assign_split(sample_id, seed, fractions)].append((sample_id, vector))
    return {
        split: DatasetManifest(tuple(records), manifest.names, split, manifest.source)
        for split, records in buckets.items()
    }


def permute_rows(matrix: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Uniformly permute the rows of a label matrix (shared sampling core)."""
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise ValueError("expected a nonempty 2-d label matrix")
    return matrix[rng.permutation(matrix.shape[0])]


def sample_target_attributes(
    batch: Sequence[AttributeVector], seed: int
) -> list[AttributeVector]:
    """Draw target attribute vectors for a batch.

    Targets are realized as a uniformly random permutation of the batch's
    own vectors, which keeps every sampled target on the manifold of
    attribute combinations that actually occur in the data. The output
    multiset always equals the input multiset.
    """
    if not batch:
        raise ValueError("batch must be nonempty")
    length = len(batch[0])
    for vec in batch:
        if len(vec) != length:
            raise ValueError("all attribute vectors in a batch must share a length")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(batch))
    return [batch[i] for i in order]
