import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from amdkit.datasets import (Dataset, DatasetError, SyntheticConfig,
                             generate_synthetic, load_dataset,
                             load_dataset_csv, save_dataset, task_targets,
                             union_targets)


def test_generation_is_deterministic():
    cfg = SyntheticConfig(seed=7)
    a = generate_synthetic(cfg)
    b = generate_synthetic(cfg)
    assert np.array_equal(a.targets, b.targets)
    assert a.fingerprint() == b.fingerprint()


def test_different_seeds_differ():
    a = generate_synthetic(SyntheticConfig(seed=1))
    b = generate_synthetic(SyntheticConfig(seed=2))
    assert not np.array_equal(a.targets, b.targets)


def test_desk_shape():
    ds = generate_synthetic(SyntheticConfig())
    assert ds.n_items == 40
    assert ds.n_tasks == 8
    assert ds.n_features == 200
    assert ds.targets.shape == (40, 200)
    assert ds.targets.dtype == np.uint8
    # features are grouped by class, 25 each
    assert np.array_equal(np.bincount(ds.class_of_feature), [25] * 8)


def test_every_item_has_a_positive():
    for seed in range(5):
        ds = generate_synthetic(SyntheticConfig(seed=seed))
        assert ds.targets.sum(axis=1).min() >= 1


def test_positive_rate_is_plausible():
    cfg = SyntheticConfig(n_items=200, seed=0)
    ds = generate_synthetic(cfg)
    rate = ds.targets.mean()
    expected = cfg.positive_rate * cfg.class_expression_rate
    assert abs(rate - expected) < 0.03


def test_class_feature_counts_override():
    cfg = SyntheticConfig(n_classes=2, features_per_class=5,
                          class_feature_counts=(3, 7), seed=0)
    ds = generate_synthetic(cfg)
    assert ds.n_features == 10
    assert np.array_equal(np.bincount(ds.class_of_feature), [3, 7])


def test_class_feature_counts_must_match_classes():
    with pytest.raises(DatasetError):
        SyntheticConfig(n_classes=3, class_feature_counts=(3, 7)).validate()


@pytest.mark.parametrize("field,value", [
    ("n_items", 0),
    ("n_classes", 0),
    ("features_per_class", 0),
    ("positive_rate", 0.0),
    ("positive_rate", 1.0),
    ("class_expression_rate", -0.1),
    ("class_expression_rate", 1.5),
])
def test_config_validation(field, value):
    cfg = SyntheticConfig(**{field: value})
    with pytest.raises(DatasetError):
        cfg.validate()


@given(
    items=st.integers(min_value=2, max_value=12),
    classes=st.integers(min_value=2, max_value=4),
    fpc=st.integers(min_value=1, max_value=6),
    seed=st.integers(min_value=0, max_value=2**32),
)
def test_generation_invariants(items, classes, fpc, seed):
    ds = generate_synthetic(SyntheticConfig(
        n_items=items, n_classes=classes, features_per_class=fpc, seed=seed))
    assert ds.targets.shape == (items, classes * fpc)
    assert set(np.unique(ds.targets)) <= {0, 1}
    assert ds.targets.sum(axis=1).min() >= 1
    assert len(set(ds.feature_names)) == ds.n_features


def test_task_targets_null_is_zero(micro_ds):
    for item in range(micro_ds.n_items):
        t = task_targets(micro_ds, item, None)
        assert t.shape == (micro_ds.n_features,)
        assert not t.any()


def test_task_targets_masks_other_classes(micro_ds):
    t = task_targets(micro_ds, 2, 0)
    in_class = micro_ds.class_of_feature == 0
    assert np.array_equal(t[in_class], micro_ds.targets[2, in_class])
    assert not t[~in_class].any()


def test_union_targets_is_elementwise_max(micro_ds):
    for item in range(micro_ds.n_items):
        u = union_targets(micro_ds, item)
        stacked = np.stack([task_targets(micro_ds, item, t)
                            for t in range(micro_ds.n_tasks)])
        assert np.array_equal(u, stacked.max(axis=0))
        assert np.array_equal(u, micro_ds.targets[item])


def test_save_load_round_trip(tmp_path, micro_ds):
    path = tmp_path / "ds.json"
    save_dataset(micro_ds, path)
    loaded = load_dataset(path)
    assert loaded.fingerprint() == micro_ds.fingerprint()
    assert np.array_equal(loaded.targets, micro_ds.targets)
    assert loaded.task_names == micro_ds.task_names
    # idempotent bytes
    save_dataset(loaded, tmp_path / "ds2.json")
    assert (tmp_path / "ds.json").read_bytes() == (tmp_path / "ds2.json").read_bytes()


def test_load_rejects_tampered_targets(tmp_path, micro_ds):
    path = tmp_path / "ds.json"
    save_dataset(micro_ds, path)
    text = path.read_text().replace('"targets"', '"targets_oops"', 1)
    path.write_text(text)
    with pytest.raises(DatasetError):
        load_dataset(path)


def test_csv_loader(tmp_path):
    csv = "\n".join([
        "item,has_fur|animal,barks|animal,has_handle|tool",
        "dog,1,1,0",
        "hammer,0,0,1",
    ]) + "\n"
    p = tmp_path / "wide.csv"
    p.write_text(csv)
    ds = load_dataset_csv(p)
    assert ds.item_names == ("dog", "hammer")
    assert ds.feature_names == ("has_fur", "barks", "has_handle")
    assert ds.task_names == ("animal", "tool")
    assert np.array_equal(ds.class_of_feature, [0, 0, 1])
    assert np.array_equal(ds.targets, [[1, 1, 0], [0, 0, 1]])


def test_csv_loader_rejects_non_binary(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("item,a|f\nx,2\n")
    with pytest.raises(DatasetError):
        load_dataset_csv(p)


def test_dataset_rejects_duplicate_names():
    with pytest.raises(DatasetError):
        Dataset(item_names=("a", "a"),
                feature_names=("c|f0", "c|f1"),
                class_of_feature=np.zeros(2, dtype=np.int64),
                task_names=("c",),
                targets=np.ones((2, 2), dtype=np.uint8))


def test_dataset_rejects_empty_class():
    with pytest.raises(DatasetError):
        Dataset(item_names=("a", "b"),
                feature_names=("c|f0", "c|f1"),
                class_of_feature=np.zeros(2, dtype=np.int64),
                task_names=("c", "d"),  # class d has no features
                targets=np.ones((2, 2), dtype=np.uint8))


def test_fingerprint_tracks_content(micro_ds):
    other = generate_synthetic(SyntheticConfig(
        n_items=5, n_classes=2, features_per_class=5, seed=4))
    assert micro_ds.fingerprint() != other.fingerprint()
