import numpy as np
import pytest

from cityid.errors import DimensionMismatch, MissingClass, RankDeficientBasis, TooFewFrames, ValidationError
from cityid.semantic import (
    URBAN_CLASSES,
    BasisMatrix,
    WeightsMatrix,
    build_basis,
    normalize_weights,
    project_weights,
    pseudo_inverse,
    reconstruct,
    top_k_sounds,
)


def random_basis(rng, k, d=275):
    names = URBAN_CLASSES[:k]
    return BasisMatrix(rng.standard_normal((d, k)) * rng.uniform(0.1, 10, k), names)


def penrose_errors(b, p):
    return (
        np.max(np.abs(b @ p @ b - b)),
        np.max(np.abs(p @ b @ p - p)),
        np.max(np.abs((b @ p) - (b @ p).T)),
        np.max(np.abs((p @ b) - (p @ b).T)),
    )


def test_classes_follow_urbansound_ids():
    assert URBAN_CLASSES[0] == "air_conditioner" and URBAN_CLASSES[9] == "street_music"
    assert len(URBAN_CLASSES) == 10


def test_penrose_conditions(rng):
    for k in range(2, 11):
        b = random_basis(rng, k)
        assert max(penrose_errors(b.columns, pseudo_inverse(b))) <= 1e-8


def test_pinv_matches_numpy_and_rank_deficient(rng):
    b = rng.standard_normal((275, 6))
    np.testing.assert_allclose(pseudo_inverse(b), np.linalg.pinv(b), atol=1e-10)
    b[:, 5] = b[:, 0] + b[:, 1]
    p = pseudo_inverse(b)
    assert max(penrose_errors(b, p)) <= 1e-8


def test_rank_warning():
    cols = np.ones((275, 3))
    with pytest.warns(RankDeficientBasis):
        basis = build_basis({n: [cols[:, 0]] for n in URBAN_CLASSES[:3]}, URBAN_CLASSES[:3])
    assert basis.rank == 1


def test_build_basis_mean_and_median():
    vecs = {"a": [np.zeros(4), np.ones(4), 5 * np.ones(4)], "b": [np.arange(4.0)]}
    mean = build_basis(vecs, ("a", "b"))
    np.testing.assert_allclose(mean.columns[:, 0], 2.0)
    assert mean.counts == (3, 1)
    med = build_basis(vecs, ("a", "b"), "median")
    np.testing.assert_allclose(med.columns[:, 0], 1.0)
    with pytest.raises(MissingClass):
        build_basis(vecs, ("a", "c"))
    with pytest.raises(ValidationError):
        build_basis(vecs, ("a", "b"), "mode")


def test_in_span_round_trip(rng):
    for k in (2, 5, 10):
        b = random_basis(rng, k)
        w_true = rng.standard_normal((k, 30))
        signal = (b.columns @ w_true).T
        w = project_weights(b, signal)
        np.testing.assert_allclose(w.values, w_true, atol=1e-9)
        s_hat = reconstruct(b, w).values
        assert np.linalg.norm(s_hat - signal.T) <= 1e-8 * np.linalg.norm(signal)


def test_least_squares_optimality(rng):
    b = random_basis(rng, 6)
    signal = rng.standard_normal((40, 275))
    w = project_weights(b, signal)
    resid = signal.T - reconstruct(b, w).values
    assert np.max(np.abs(b.columns.T @ resid)) <= 1e-6 * np.linalg.norm(resid) * np.linalg.norm(b.columns)
    best = np.linalg.norm(resid)
    for _ in range(5):
        alt = w.values + 0.01 * rng.standard_normal(w.values.shape)
        assert best <= np.linalg.norm(signal.T - b.columns @ alt)
    # idempotence
    w2 = project_weights(b, reconstruct(b, w).values.T)
    np.testing.assert_allclose(w2.values, w.values, atol=1e-8)


def test_linearity_and_permutation(rng):
    b = random_basis(rng, 5)
    x, y = rng.standard_normal((2, 12, 275))
    lhs = project_weights(b, 2.0 * x - 3.0 * y).values
    rhs = 2.0 * project_weights(b, x).values - 3.0 * project_weights(b, y).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)
    perm = [3, 0, 4, 1, 2]
    bp = BasisMatrix(b.columns[:, perm], tuple(b.class_names[i] for i in perm))
    np.testing.assert_allclose(project_weights(bp, x).values, project_weights(b, x).values[perm], atol=1e-9)


def test_projection_shape_errors(rng):
    b = random_basis(rng, 3)
    with pytest.raises(DimensionMismatch):
        project_weights(b, rng.standard_normal((5, 274)))
    with pytest.raises(DimensionMismatch):
        reconstruct(b, WeightsMatrix(np.zeros((4, 2)), ("a", "b", "c", "d")))


def test_select_keeps_basis_order(rng):
    b = random_basis(rng, 10)
    sub = b.select(["siren", "car_horn", "drilling"])
    assert sub.class_names == ("car_horn", "drilling", "siren")
    np.testing.assert_array_equal(sub.columns[:, 0], b.columns[:, 1])
    with pytest.raises(MissingClass):
        b.select(["tuba"])


def test_normalize_weights():
    w = WeightsMatrix(np.array([[1.0, 3.0], [2.0, 2.0]]), ("a", "b"))
    np.testing.assert_allclose(normalize_weights(w).values, [[-1.0, 1.0], [0.0, 0.0]])
    with pytest.raises(TooFewFrames):
        normalize_weights(WeightsMatrix(np.ones((2, 1)), ("a", "b")))


def test_normalized_moments(rng):
    w = WeightsMatrix(rng.standard_normal((10, 50)) * 4 + 3, URBAN_CLASSES)
    z = normalize_weights(w).values
    np.testing.assert_allclose(z.mean(axis=1), 0.0, atol=1e-9)
    np.testing.assert_allclose(z.var(axis=1), 1.0, atol=1e-9)


def test_top_k(rng):
    v = rng.standard_normal((10, 20))
    v[URBAN_CLASSES.index("siren"), 7] = 50.0
    w = WeightsMatrix(v, URBAN_CLASSES)
    ev = top_k_sounds(w, 3)
    assert ev.classes[0] == "siren" and len(ev.entries) == 3
    full = top_k_sounds(w, 10)
    scores = [s for _, s in full.entries]
    assert scores == sorted(scores, reverse=True)
    # ties keep class order
    tie = top_k_sounds(WeightsMatrix(np.zeros((3, 4)), ("x", "y", "z")), 3)
    assert tie.classes == ["x", "y", "z"]
    # invariant under a uniform increasing transform
    assert top_k_sounds(WeightsMatrix(np.exp(v) * 3 + 1, URBAN_CLASSES), 4).classes == top_k_sounds(w, 4).classes
    with pytest.raises(ValidationError):
        top_k_sounds(w, 11)


def test_burst_of_basis_column_is_retrieved(rng):
    b = random_basis(rng, 10)
    for j in range(10):
        signal = 0.05 * rng.standard_normal((60, 275))
        signal[20:24] += b.columns[:, j]
        ev = top_k_sounds(normalize_weights(project_weights(b, signal)), 3)
        assert URBAN_CLASSES[j] in ev.classes
