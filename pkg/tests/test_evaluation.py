import json

import numpy as np
import pytest
import torch

from attredit.data import dataset_from_synthetic, split_dataset
from attredit.evaluation import (
    DegenerateDatasetError,
    EvalReport,
    JudgeConfig,
    editing_accuracy,
    evaluate_editor,
    identity_editor,
    intensity_sweep,
    judge_fn,
    load_judge,
    model_editor,
    oracle_editor,
    preservation_error,
    probe_judge,
    save_judge,
    train_independent_classifier,
)
from attredit.networks import AttrEditModel, compact_config
from attredit.synthetic import SyntheticSpec, generate_synthetic_dataset
from helpers import param_snapshot, params_equal


@pytest.fixture(scope="module")
def judged_setup():
    synthetic = generate_synthetic_dataset(SyntheticSpec(size=2500, resolution=32), 21)
    dataset = dataset_from_synthetic(synthetic)
    splits = split_dataset(dataset, seed=0)
    config = JudgeConfig(resolution=32, n_attrs=4, epochs=3, seed=0)
    judge, accuracy = train_independent_classifier(
        splits["train"], splits["val"], config
    )
    return synthetic, dataset, splits, judge, accuracy


def test_judge_reaches_near_perfect_holdout(judged_setup):
    _, _, _, _, accuracy = judged_setup
    assert (accuracy >= 0.99).all()


def test_degenerate_dataset_is_flagged():
    synthetic = generate_synthetic_dataset(
        SyntheticSpec(size=60, resolution=32, marginal=0.0), 3
    )
    dataset = dataset_from_synthetic(synthetic)
    config = JudgeConfig(resolution=32, n_attrs=4, epochs=1)
    with pytest.raises(DegenerateDatasetError):
        train_independent_classifier(dataset, dataset, config)


def test_identity_editor_scores_zero_accuracy_zero_error(judged_setup):
    synthetic, dataset, splits, judge, _ = judged_setup
    test_set = splits["test"]
    probe = probe_judge(test_set.names)
    editor = identity_editor()
    for i in range(len(test_set.names)):
        assert editing_accuracy(editor, test_set.images, test_set.labels, i, probe) == 0.0
        assert preservation_error(editor, test_set.images, test_set.labels, i, probe) == 0.0


def test_oracle_editor_with_probe_judge_is_perfect(judged_setup):
    synthetic, dataset, splits, judge, _ = judged_setup
    test_set = splits["test"]
    positions = [dataset.ids.index(i) for i in test_set.ids]
    editor = oracle_editor(synthetic, positions)
    report = evaluate_editor(editor, test_set, probe_judge(test_set.names))
    assert report.editing_accuracy == (1.0,) * 4
    assert report.preservation_error == (0.0,) * 4


def test_oracle_editor_with_trained_judge(judged_setup):
    synthetic, dataset, splits, judge, _ = judged_setup
    test_set = splits["test"]
    positions = [dataset.ids.index(i) for i in test_set.ids]
    editor = oracle_editor(synthetic, positions)
    report = evaluate_editor(editor, test_set, judge_fn(judge))
    assert all(a >= 0.99 for a in report.editing_accuracy)
    assert all(e <= 0.01 for e in report.preservation_error)


def test_metrics_are_permutation_invariant(judged_setup):
    synthetic, dataset, splits, judge, _ = judged_setup
    test_set = splits["test"].subset(range(40))
    model = AttrEditModel(compact_config(32, 4, base=8), test_set.names, init_seed=0)
    editor = model_editor(model)
    probe = probe_judge(test_set.names)
    direct = editing_accuracy(editor, test_set.images, test_set.labels, 0, probe)
    order = np.random.default_rng(0).permutation(len(test_set))
    shuffled = test_set.subset(order)
    permuted = editing_accuracy(editor, shuffled.images, shuffled.labels, 0, probe)
    assert direct == pytest.approx(permuted)


def test_empty_testset_rejected(judged_setup):
    *_, judge, _ = judged_setup
    with pytest.raises(ValueError):
        editing_accuracy(
            identity_editor(), np.zeros((0, 32, 32, 3), np.float32),
            np.zeros((0, 4), np.float32), 0, judge_fn(judge),
        )


def test_intensity_sweep_contract(judged_setup):
    synthetic, dataset, splits, judge, _ = judged_setup
    test_set = splits["test"]
    model = AttrEditModel(compact_config(32, 4, base=8), test_set.names, init_seed=1)
    editor = model_editor(model)
    probe = judge_fn(judge)
    points = intensity_sweep(
        editor, test_set.images[0], test_set.labels[0], 0, 5, probe
    )
    assert len(points) == 5
    assert [p.value for p in points] == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])

    # endpoints coincide exactly with direct edits at 0 and 1
    endpoints = intensity_sweep(
        editor, test_set.images[0], test_set.labels[0], 0, 2, probe
    )
    targets = np.repeat(test_set.labels[:1], 2, axis=0)
    targets[0, 0] = 0.0
    targets[1, 0] = 1.0
    direct = editor(np.repeat(test_set.images[:1], 2, axis=0), targets)
    assert np.array_equal(endpoints[0].image, direct[0])
    assert np.array_equal(endpoints[1].image, direct[1])

    with pytest.raises(ValueError):
        intensity_sweep(editor, test_set.images[0], test_set.labels[0], 0, 1, probe)


def test_judge_round_trip(tmp_path, judged_setup):
    *_, judge, accuracy = judged_setup
    path = save_judge(judge, accuracy, tmp_path / "judge.ckpt")
    loaded, loaded_accuracy = load_judge(path)
    assert np.array_equal(loaded_accuracy, accuracy)
    images = np.zeros((2, 32, 32, 3), dtype=np.float32)
    assert np.array_equal(judge_fn(loaded)(images), judge_fn(judge)(images))


def test_judge_is_disjoint_from_model(judged_setup):
    *_, judge, _ = judged_setup
    model = AttrEditModel(compact_config(32, 4, base=8), ("A", "B", "C", "D"))
    judge_ids = {id(p) for p in judge.parameters()}
    model_ids = {id(p) for p in model.parameters()}
    assert not judge_ids & model_ids
    # scoring images never mutates the judge
    before = param_snapshot(judge.parameters())
    judge_fn(judge)(np.zeros((4, 32, 32, 3), dtype=np.float32))
    assert params_equal(judge.parameters(), before)


def test_report_serialization(tmp_path):
    report = EvalReport(
        names=("A", "B"),
        editing_accuracy=(0.9, 0.8),
        preservation_error=(0.05, 0.1),
        sample_count=10,
    )
    payload = json.loads(report.to_json())
    assert payload["macro_accuracy"] == pytest.approx(0.85)
    assert payload["macro_preservation_error"] == pytest.approx(0.075)
    table = report.to_text_table()
    assert "A" in table and "macro" in table and "samples: 10" in table
    data_file = report.write_bar_chart_data(tmp_path / "bars.dat")
    lines = data_file.read_text().splitlines()
    assert lines[0].startswith("attribute")
    assert len(lines) == 3
    with pytest.raises(ValueError):
        EvalReport(("A",), (1.2,), (0.0,), 1)
    with pytest.raises(ValueError):
        EvalReport(("A",), (1.0,), (0.0,), 0)
