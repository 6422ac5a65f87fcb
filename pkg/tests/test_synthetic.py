import numpy as np
import pytest

from attredit.attributes import parse_attribute_annotations
from attredit.data import load_image_dataset
from attredit.synthetic import (
    SYNTHETIC_ATTRIBUTE_NAMES,
    SyntheticSpec,
    generate_synthetic_dataset,
    probe_attributes,
    write_synthetic_dataset,
)


def test_generation_is_bit_deterministic():
    spec = SyntheticSpec(size=30, resolution=32)
    a = generate_synthetic_dataset(spec, seed=1)
    b = generate_synthetic_dataset(spec, seed=1)
    assert np.array_equal(a.images, b.images)
    assert np.array_equal(a.labels, b.labels)
    c = generate_synthetic_dataset(spec, seed=2)
    assert not np.array_equal(a.images, c.images)


@pytest.mark.parametrize("resolution", [32, 48, 64])
@pytest.mark.parametrize("seed", [0, 7])
def test_probe_recovers_every_label(resolution, seed):
    spec = SyntheticSpec(size=150, resolution=resolution)
    ds = generate_synthetic_dataset(spec, seed=seed)
    recovered = np.stack([probe_attributes(img, ds.names) for img in ds.images])
    assert np.array_equal(recovered, ds.labels)


def test_probe_recovers_flipped_renders():
    spec = SyntheticSpec(size=40, resolution=32)
    ds = generate_synthetic_dataset(spec, seed=3)
    rng = np.random.default_rng(0)
    for index in range(len(ds)):
        forced = rng.integers(0, 2, size=len(ds.names)).astype(np.float32)
        image = ds.render_with_labels(index, forced)
        assert np.array_equal(probe_attributes(image, ds.names), forced)


def test_all_zero_labels_render_no_glyphs():
    spec = SyntheticSpec(size=25, resolution=32, marginal=0.0)
    ds = generate_synthetic_dataset(spec, seed=4)
    assert not ds.labels.any()
    for img in ds.images:
        assert not probe_attributes(img, ds.names).any()


def test_relabeling_preserves_nuisance_factors():
    spec = SyntheticSpec(size=5, resolution=32)
    ds = generate_synthetic_dataset(spec, seed=5)
    zeros = ds.render_with_labels(0, np.zeros(4))
    ones = ds.render_with_labels(0, np.ones(4))
    # background corners never carry glyphs; identical nuisance -> identical pixels
    assert np.array_equal(zeros[0, 0], ones[0, 0])
    assert np.array_equal(zeros[0, -1], ones[0, -1])
    assert np.array_equal(zeros[-1, 0], ones[-1, 0])


def test_label_marginals_concentrate():
    spec = SyntheticSpec(size=2500, resolution=32)
    ds = generate_synthetic_dataset(spec, seed=6)
    means = ds.labels.mean(axis=0)
    assert ((means >= 0.45) & (means <= 0.55)).all()


def test_subset_attributes_and_errors():
    spec = SyntheticSpec(size=10, resolution=32, attributes=("Eyeglasses",))
    ds = generate_synthetic_dataset(spec, seed=0)
    assert ds.labels.shape == (10, 1)
    with pytest.raises(ValueError):
        SyntheticSpec(size=10, resolution=40)
    with pytest.raises(ValueError):
        SyntheticSpec(size=10, attributes=("Nose",))
    with pytest.raises(ValueError):
        SyntheticSpec(size=-1)
    with pytest.raises(ValueError):
        SyntheticSpec(size=1, marginal=1.5)


def test_pixel_range_and_dtype():
    spec = SyntheticSpec(size=8, resolution=48)
    ds = generate_synthetic_dataset(spec, seed=2)
    assert ds.images.dtype == np.float32
    assert ds.images.min() >= -1.0 and ds.images.max() <= 1.0
    assert not ds.images.flags.writeable


def test_materialized_dataset_survives_png_round_trip(tmp_path):
    spec = SyntheticSpec(size=24, resolution=32)
    ds = generate_synthetic_dataset(spec, seed=8)
    out = write_synthetic_dataset(ds, tmp_path)
    manifest = parse_attribute_annotations(
        (out / "annotations.txt").read_text(), SYNTHETIC_ATTRIBUTE_NAMES
    )
    loaded = load_image_dataset(manifest, out / "images", 32)
    assert np.array_equal(loaded.labels, ds.labels)
    # quantization to 8 bits must not disturb the probe
    recovered = np.stack([probe_attributes(img, ds.names) for img in loaded.images])
    assert np.array_equal(recovered, ds.labels)
    assert np.abs(loaded.images - ds.images).max() < 1.5 / 255.0
