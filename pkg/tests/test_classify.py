import numpy as np
import pytest

from cityid.classify import (
    FrameDataset,
    MlpHyper,
    aggregate_video_scores,
    cap_frames,
    predict_forest,
    predict_mlp,
    train_mlp,
    train_random_forest,
)
from cityid.classify.mlp import init_params, loss_and_grads
from cityid.errors import DimensionMismatch, EmptyData, EmptyGroup, ValidationError


def blobs(rng, n_per=60, d=6, classes=("A", "B", "C"), sep=3.0, videos_per_class=3):
    X, labels, groups = [], [], []
    for i, c in enumerate(classes):
        centre = np.zeros(d)
        centre[i % d] = sep
        X.append(centre + rng.standard_normal((n_per, d)))
        labels += [c] * n_per
        groups += [f"{c}{j % videos_per_class}" for j in range(n_per)]
    return FrameDataset.from_labels(np.concatenate(X), labels, groups, classes)


def numeric_grad(f, arr, h=1e-6):
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + h
        up = f()
        arr[i] = old - h
        down = f()
        arr[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def rel_error(a, b):
    return np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b)))


CONFIGS = [(4, (5,), 3, 0.0), (6, (7, 4), 2, 1e-3), (3, (8, 8), 4, 0.0), (5, (3, 6, 3), 3, 1e-2), (2, (4,), 5, 0.1)]


@pytest.mark.parametrize("d,hidden,c,decay", CONFIGS)
def test_mlp_gradient_check(d, hidden, c, decay):
    rng = np.random.default_rng(d * 100 + c)
    weights, biases = init_params((d, *hidden, c), rng)
    biases = [b + 0.1 * rng.standard_normal(b.shape) for b in biases]
    X = rng.standard_normal((7, d))
    Y = np.eye(c)[rng.integers(0, c, 7)]
    _, gw, gb = loss_and_grads(weights, biases, X, Y, decay)
    loss = lambda: loss_and_grads(weights, biases, X, Y, decay)[0]
    worst = 0.0
    for w, g in zip(weights + biases, gw + gb):
        worst = max(worst, rel_error(g, numeric_grad(loss, w)))
    assert worst <= 1e-4


def test_mlp_gradient_with_fixed_dropout_mask(rng):
    weights, biases = init_params((4, 6, 3), rng)
    X = rng.standard_normal((5, 4))
    Y = np.eye(3)[[0, 1, 2, 0, 1]]
    masks = [(rng.random((5, 6)) < 0.5) / 0.5]
    _, gw, _ = loss_and_grads(weights, biases, X, Y, 0.0, masks)
    num = numeric_grad(lambda: loss_and_grads(weights, biases, X, Y, 0.0, masks)[0], weights[0])
    assert rel_error(gw[0], num) <= 1e-4


def test_mlp_learns_and_is_deterministic(rng):
    data = blobs(rng)
    hyper = MlpHyper(lr=0.05, batch=32, epochs=15, hidden=(16, 16), dropout=0.2)
    m1 = train_mlp(data, hyper, seed=3)
    m2 = train_mlp(data, hyper, seed=3)
    assert m1.final_loss < m1.initial_loss
    for a, b in zip(m1.weights, m2.weights):
        np.testing.assert_array_equal(a, b)
    p = predict_mlp(m1, data.X)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
    assert np.mean(p.argmax(axis=1) == data.y) > 0.9
    with pytest.raises(DimensionMismatch):
        predict_mlp(m1, data.X[:, :3])


def test_mlp_hyper_validation():
    with pytest.raises(ValidationError):
        MlpHyper(lr=-1).validate()
    with pytest.raises(ValidationError):
        MlpHyper(dropout=1.0).validate()


def test_forest_learns_and_is_deterministic(rng):
    data = blobs(rng)
    f1 = train_random_forest(data, n_trees=10, seed=1)
    f2 = train_random_forest(data, n_trees=10, seed=1)
    p1, p2 = predict_forest(f1, data.X), predict_forest(f2, data.X)
    np.testing.assert_array_equal(p1, p2)
    np.testing.assert_allclose(p1.sum(axis=1), 1.0, atol=1e-9)
    assert np.mean(p1.argmax(axis=1) == data.y) > 0.95
    other = predict_forest(train_random_forest(data, n_trees=10, seed=2), data.X)
    assert not np.array_equal(p1, other)


def test_forest_pure_tree_memorizes_distinct_rows(rng):
    data = blobs(rng, n_per=20, sep=0.5)
    f = train_random_forest(data, n_trees=1, seed=0, max_features=data.width)
    # the bootstrap sample is fitted exactly; most rows are in it
    acc = np.mean(predict_forest(f, data.X).argmax(axis=1) == data.y)
    assert acc > 0.6


def test_forest_constant_features(rng):
    X = np.zeros((10, 3))
    data = FrameDataset.from_labels(X, ["A"] * 5 + ["B"] * 5, ["v"] * 10, ("A", "B"))
    p = predict_forest(train_random_forest(data, n_trees=3, seed=0), X)
    np.testing.assert_allclose(p.sum(axis=1), 1.0)


def test_dataset_validation():
    with pytest.raises(EmptyData):
        FrameDataset.from_labels(np.zeros((0, 3)), [], [], ("A",))
    with pytest.raises(ValidationError):
        FrameDataset.from_labels(np.zeros((2, 3)), ["A", "Z"], ["v", "v"], ("A",))
    with pytest.raises(ValidationError):
        FrameDataset.from_labels(np.full((1, 3), np.nan), ["A"], ["v"], ("A",))


def test_cap_frames_seeded_and_ordered(rng):
    data = blobs(rng, n_per=30, videos_per_class=2)
    capped = cap_frames(data, 5, seed=9)
    assert capped.n_rows == 6 * 5
    assert capped.n_rows == cap_frames(data, 5, seed=9).n_rows
    np.testing.assert_array_equal(capped.X, cap_frames(data, 5, seed=9).X)
    _, counts = np.unique(capped.group_ids, return_counts=True)
    assert set(counts) == {5}
    assert cap_frames(data, None, 0) is data


def test_aggregate_video_scores():
    p = np.array([[0.2, 0.8], [0.6, 0.4], [1.0, 0.0]])
    s = aggregate_video_scores(p, ["v2", "v2", "v1"], ("A", "B"))
    assert s.video_ids == ("v1", "v2")
    np.testing.assert_allclose(s.scores, [[1.0, 0.0], [0.4, 0.6]])
    with pytest.raises(EmptyGroup):
        aggregate_video_scores(np.zeros((0, 2)), [])
