import numpy as np
import pytest

from intdfa.activations import Activation
from intdfa.data import Dataset
from intdfa.loss import TargetEncoding, l2_loss_delta, one_hot_batch
from intdfa.matrix import IntMatrix, Overflow, from_rows, overflow_policy
from intdfa.network import FcLayer, Network, build, dfa_backward, forward, serialize
from intdfa.rng import Rng
from intdfa.trainer import (
    CSV_HEADER,
    EpochMetrics,
    Mode,
    TrainConfig,
    batches,
    best_val_accuracy,
    evaluate,
    lr_inverse_for_epoch,
    metrics_csv,
    shuffle_indices,
    train,
)


def blobs(n, seed, dims=8, classes=3):
    # centres are shared by every split; only the samples depend on the seed
    centres = np.random.default_rng(1234).integers(0, 128, (classes, dims))
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, classes, n)
    x = np.clip(centres[labels] + rng.integers(-15, 16, (n, dims)), 0, 127)
    return Dataset(IntMatrix(x), labels)


def test_lr_schedule():
    cfg = TrainConfig()
    got = [lr_inverse_for_epoch(cfg, e) for e in range(1, 101)]
    assert got[:10] == [1000] * 10
    assert got[10:20] == [2000] * 10
    assert got[90:] == [512000] * 10
    huge = TrainConfig(lr_inverse=1 << 29, lr_double_every=1)
    assert lr_inverse_for_epoch(huge, 5) == 1 << 30
    assert lr_inverse_for_epoch(huge, 500) == 1 << 30


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(lr_inverse=0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=-1)
    assert TrainConfig(mode="bp-int").mode is Mode.BP_INT


def test_batches_partition():
    assert [len(b) for b in batches(np.arange(3), 2)] == [2, 1]
    assert [b.tolist() for b in batches(np.arange(5), 5)] == [[0, 1, 2, 3, 4]]


def test_short_batch_uses_its_own_size():
    data = blobs(3, 0)
    net = build([8, 4, 3], pre_div=8, rng=Rng(1), feedback_range=(-8, 8))
    twin = build([8, 4, 3], pre_div=8, rng=Rng(1), feedback_range=(-8, 8))
    train(net, data, data, TrainConfig(epochs=1, batch_size=2, lr_inverse=1, shuffle=False))
    enc = TargetEncoding(3)
    for idx in ([0, 1], [2]):
        x = IntMatrix(data.features.data[idx])
        yhat = forward(twin, x)
        with overflow_policy(Overflow.SATURATE):
            dfa_backward(twin, l2_loss_delta(yhat, one_hot_batch(data.labels[idx], enc)), 1, len(idx))
    assert net == twin


def test_zero_epochs():
    data = blobs(10, 0)
    net = build([8, 3], rng=Rng(0))
    before = serialize(net)
    assert train(net, data, data, TrainConfig(epochs=0)) == []
    assert serialize(net) == before


def test_training_is_deterministic():
    data, val = blobs(60, 1), blobs(30, 2)
    runs = []
    for _ in range(2):
        net = build([8, 6, 3], pre_div=16, rng=Rng(5), feedback_range=(-8, 8))
        history = train(net, data, val, TrainConfig(epochs=3, batch_size=7, lr_inverse=2, seed=3))
        runs.append((metrics_csv(history), serialize(net)))
    assert runs[0] == runs[1]


def test_training_learns_blobs():
    data, val = blobs(300, 3), blobs(100, 4)
    net = build([8, 10, 3], pre_div=[256, 256], rng=Rng(2), feedback_range=(-8, 8))
    history = train(net, data, val, TrainConfig(epochs=10, batch_size=10, lr_inverse=1000, seed=1))
    assert best_val_accuracy(history) >= 0.95
    assert all(m.overflow_count == 0 for m in history)


XOR_SEEDS = range(10)


def test_xor_toy():
    # Two one-hot outputs: with a single output every zero-initialised hidden unit
    # receives the same scalar error and the layer cannot form two features.
    xor = Dataset(from_rows([[0, 0], [0, 64], [64, 0], [64, 64]]), np.array([0, 1, 1, 0]))
    solved = 0
    for seed in XOR_SEEDS:
        net = build([2, 8, 2], pre_div=[32, 64], rng=Rng(seed), feedback_range=(-8, 8))
        cfg = TrainConfig(epochs=100, batch_size=4, lr_inverse=1000, lr_double_every=10**6, seed=seed)
        history = train(net, xor, xor, cfg)
        solved += best_val_accuracy(history) == 1.0
    assert solved >= 8


def test_bp_mode_runs():
    data = blobs(40, 5)
    net = build([8, 6, 3], pre_div=16, rng=Rng(0))
    history = train(net, data, data, TrainConfig(epochs=2, batch_size=8, lr_inverse=4, mode=Mode.BP_INT))
    assert len(history) == 2 and all(m.overflow_count >= 0 for m in history)


def test_shape_checks():
    data = blobs(10, 0)
    with pytest.raises(ValueError, match="wide"):
        train(build([7, 3]), data, data, TrainConfig(epochs=1))
    with pytest.raises(ValueError, match="labels"):
        train(build([8, 2]), data, data, TrainConfig(epochs=1))


def test_evaluate():
    # zero-initialised PocketTanh net outputs all zeros, so it always predicts class 0
    data = blobs(200, 6)
    want = float(np.mean(data.labels == 0))
    assert evaluate(build([8, 4, 3]), data) == want
    one = Dataset(from_rows([[1]]), np.array([1]))
    layer = FcLayer(from_rows([[0, 50]]), from_rows([[0, 0]]), from_rows([[1, 0], [0, 1]]), Activation.POCKET_RELU8, 1)
    assert evaluate(Network([layer]), one) == 1.0
    wrong = Dataset(from_rows([[1]]), np.array([0]))
    assert evaluate(Network([layer]), wrong) == 0.0


def test_shuffle_indices():
    assert shuffle_indices(1, Rng(0)).tolist() == [0]
    perm = shuffle_indices(1000, Rng(4))
    assert sorted(perm.tolist()) == list(range(1000))
    assert (shuffle_indices(1000, Rng(4)) == perm).all()
    assert not (shuffle_indices(1000, Rng(5)) == perm).all()
    with pytest.raises(ValueError):
        shuffle_indices(0, Rng(0))


def test_shuffle_matches_sequential_draws():
    n = 50
    rng = Rng(12)
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.below(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    fast = Rng(12)
    assert shuffle_indices(n, fast).tolist() == perm
    assert fast.counter == rng.counter


def test_metrics_csv():
    rows = [EpochMetrics(1, 1000, 1234, 0.5, 0.25, 0), EpochMetrics(2, 1000, 99.5, 0.75, 0.5, 3)]
    text = metrics_csv(rows)
    assert text.splitlines() == [CSV_HEADER, "1,1000,1234,0.500000,0.250000,0", "2,1000,99.500000,0.750000,0.500000,3"]
    assert best_val_accuracy(rows) == 0.5
