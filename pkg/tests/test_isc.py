import math

import numpy as np
import pytest

from amdkit.datasets import SyntheticConfig, generate_synthetic
from amdkit.isc import (Hyperparams, ISCModel, ModelDims, TrainingDivergence,
                        TrainingTrace, load_checkpoint, save_checkpoint,
                        task_acquisition_order, total_loss, train)
from amdkit.nn import sigmoid

from helpers import MICRO_DIMS, MICRO_HYPER, finite_difference_check


def test_dims_and_hyper_validation():
    with pytest.raises(ValueError):
        ModelDims(d_item=0).validate()
    with pytest.raises(ValueError):
        Hyperparams(lr=0.0).validate()
    with pytest.raises(ValueError):
        Hyperparams(epochs=0).validate()
    with pytest.raises(ValueError):
        Hyperparams(batch_size=0).validate()


def test_item_representation_is_column_selection(micro_ds, micro_model):
    # one-hot input means layer(one_hot(i)) = sigmoid(W[:, i] + b)
    W, b = micro_model.item_embed.W, micro_model.item_embed.b
    for i in range(micro_ds.n_items):
        direct = sigmoid(W[:, i] + b)
        assert np.allclose(
            micro_model.item_representation(np.array([i]))[0], direct,
            rtol=0, atol=1e-15)


def test_null_task_representation_is_exactly_zero(micro_model):
    h = micro_model.task_representation(None)
    assert h.shape == (MICRO_DIMS.d_task,)
    assert not h.any()  # bypasses the sigmoid, which would give 0.5


def test_real_task_representation_in_unit_interval(micro_model):
    for t in range(2):
        h = micro_model.task_representation(t)
        assert ((0 < h) & (h < 1)).all()


def test_zero_mask_equals_null_forward(micro_model, micro_ds):
    items = np.arange(micro_ds.n_items)
    masked = micro_model.predict_cd(items, 0, mask=np.zeros(MICRO_DIMS.d_task))
    null = micro_model.predict_cd(items, None)
    assert np.array_equal(masked, null)


def test_all_ones_mask_is_identity(micro_model, micro_ds):
    items = np.arange(micro_ds.n_items)
    masked = micro_model.predict_cd(items, 1, mask=np.ones(MICRO_DIMS.d_task))
    plain = micro_model.predict_cd(items, 1)
    assert np.array_equal(masked, plain)


def test_loss_at_zero_weights(micro_ds):
    # every sigmoid output is 0.5, so each of the three heads pays
    # F * ln 2 per example regardless of targets
    model = ISCModel.create(micro_ds.n_items, micro_ds.n_tasks,
                            micro_ds.n_features, MICRO_DIMS,
                            rng=np.random.default_rng(0))
    for p in model.params().values():
        p[:] = 0.0
    items = np.arange(micro_ds.n_items)
    tasks = np.zeros(micro_ds.n_items, dtype=np.int64)
    loss = total_loss(model, micro_ds, items, tasks)
    assert math.isclose(loss, 3 * micro_ds.n_features * math.log(2),
                        rel_tol=1e-12)


def test_gradients_match_finite_differences(micro_ds, micro_model):
    items = np.array([0, 1, 2, 3, 4])
    tasks = np.array([0, 1, 0, 1, 0])
    worst = finite_difference_check(micro_model, micro_ds, items, tasks)
    assert worst <= 1e-4, f"worst relative gradient error {worst:.2e}"


def test_training_is_deterministic(micro_ds):
    hyper = Hyperparams(epochs=5, seed=9)
    m1, t1 = train(micro_ds, hyper, MICRO_DIMS)
    m2, t2 = train(micro_ds, hyper, MICRO_DIMS)
    for name, p in m1.params().items():
        assert np.array_equal(p, m2.params()[name]), name
    assert np.array_equal(t1.accuracy, t2.accuracy)
    assert np.array_equal(t1.loss, t2.loss)


def test_training_seed_changes_outcome(micro_ds):
    m1, _ = train(micro_ds, Hyperparams(epochs=3, seed=1), MICRO_DIMS)
    m2, _ = train(micro_ds, Hyperparams(epochs=3, seed=2), MICRO_DIMS)
    assert not np.array_equal(m1.item_embed.W, m2.item_embed.W)


def test_loss_decreases_early(micro_trained):
    _, trace = micro_trained
    first = trace.loss[:5]
    assert all(b < a for a, b in zip(first, first[1:])), first


def test_divergence_aborts_with_epoch(micro_ds, monkeypatch):
    import amdkit.isc as isc_mod

    def poisoned(model, ds, items, tasks):
        return np.nan, {k: np.zeros_like(v) for k, v in model.params().items()}

    monkeypatch.setattr(isc_mod, "loss_and_grads", poisoned)
    with pytest.raises(TrainingDivergence) as err:
        isc_mod.train(micro_ds, Hyperparams(epochs=2, seed=0), MICRO_DIMS)
    assert err.value.epoch == 1


def test_trace_records_raw_accuracy(micro_trained, micro_ds):
    _, trace = micro_trained
    assert trace.accuracy.shape == (MICRO_HYPER.epochs, micro_ds.n_tasks)
    assert ((0 <= trace.accuracy) & (trace.accuracy <= 1)).all()
    # raw scale: tasks sit at literal zero before any true-positive hit
    assert (trace.accuracy[0] == 0).any() or (trace.accuracy > 0).all()


def test_trace_csv_round_trip(tmp_path, micro_trained, micro_ds):
    from amdkit.cli import load_trace_csv
    _, trace = micro_trained
    p = tmp_path / "trace.csv"
    trace.save_csv(p)
    header = p.read_text().splitlines()[0]
    assert header == "epoch,task,accuracy,loss"
    acc = load_trace_csv(p, micro_ds.task_names)
    assert np.array_equal(acc, trace.accuracy)


def test_acquisition_simple_order():
    # task A crosses at epoch 3, B at epoch 5 (1-based), threshold 0
    acc = np.zeros((6, 2))
    acc[2:, 0] = 0.4
    acc[4:, 1] = 0.2
    assert np.array_equal(task_acquisition_order(acc, 0.0), [1.0, 2.0])


def test_acquisition_tie_shares_mean_rank():
    acc = np.zeros((6, 2))
    acc[3:, :] = 0.5
    assert np.array_equal(task_acquisition_order(acc, 0.0), [1.5, 1.5])


def test_acquisition_never_crossed_gets_bottom_rank():
    acc = np.zeros((6, 3))
    acc[1:, 0] = 0.9
    acc[2:, 1] = 0.9
    order = task_acquisition_order(acc, 0.0)
    assert np.array_equal(order, [1.0, 2.0, 3.0])
    # threshold above the whole trace: everyone is unacquired, rank T
    assert np.array_equal(task_acquisition_order(acc, 0.95), [3.0, 3.0, 3.0])


def test_acquisition_threshold_is_strict(micro_trained):
    _, trace = micro_trained
    peak = float(trace.accuracy.max())
    order = task_acquisition_order(trace, threshold=peak)
    assert np.array_equal(order, [2.0, 2.0])


def test_checkpoint_round_trip(tmp_path, micro_trained, micro_ds):
    model, _ = micro_trained
    hyper = MICRO_HYPER
    p = tmp_path / "ckpt.json"
    save_checkpoint(model, hyper, p)
    loaded, loaded_hyper = load_checkpoint(p)
    assert loaded_hyper == hyper
    assert loaded.dims == model.dims
    assert loaded.dataset_fingerprint == micro_ds.fingerprint()
    for name, param in model.params().items():
        assert np.array_equal(param, loaded.params()[name]), name
    # saving the loaded model reproduces the file byte for byte
    save_checkpoint(loaded, loaded_hyper, tmp_path / "ckpt2.json")
    assert p.read_bytes() == (tmp_path / "ckpt2.json").read_bytes()


def test_trained_desk_micro_accuracy(micro_trained):
    _, trace = micro_trained
    assert trace.accuracy[-1].mean() > 0.5  # sanity: learning happened
