from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cityid.errors import CityIdWarning, DegenerateLabels, EmptyInput, SizeExceedsBasis, ValidationError
from cityid.evaluation import (
    ablation_run,
    det_points,
    eer,
    format_sizes_plan,
    mean_eer,
    one_vs_rest_eer,
    parse_sizes_plan,
    sample_groups,
)
from cityid.semantic import URBAN_CLASSES, BasisMatrix


def brute_force_eer(scores, labels):
    """Sweep every threshold with exact rational rates, then interpolate the crossing."""
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    thresholds = [float("-inf")] + sorted(set(scores)) + [float("inf")]
    pts = []
    for t in thresholds:
        far = Fraction(sum(1 for s in neg if s >= t), len(neg))
        frr = Fraction(sum(1 for s in pos if s < t), len(pos))
        pts.append((far, frr))
    for (f0, r0), (f1, r1) in zip(pts, pts[1:]):
        if f0 == r0:
            return f0
        d0, d1 = f0 - r0, f1 - r1
        if d0 > 0 >= d1:
            if d1 == 0:
                return f1
            return f0 + d0 / (d0 - d1) * (f1 - f0)
    raise AssertionError("no crossing")


def test_reference_cases():
    assert eer([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 0.0
    assert eer([0.1, 0.2, 0.9, 0.8], [1, 1, 0, 0]) == 1.0
    assert eer([0.3, 0.7, 0.3, 0.7], [1, 1, 0, 0]) == 0.5
    assert eer([0.5] * 6, [1, 0, 1, 0, 0, 1]) == 0.5


def test_random_instances_match_brute_force():
    rng = np.random.default_rng(77)
    for _ in range(50):
        n = int(rng.integers(2, 15))
        labels = rng.integers(0, 2, n)
        labels[0], labels[1] = 1, 0
        scores = rng.integers(0, 6, n) / 5.0  # plenty of ties
        want = brute_force_eer(scores.tolist(), labels.tolist())
        got = eer(scores, labels)
        assert got == float(want)
        assert 0.0 <= got <= 1.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(-400, 400), st.booleans()), min_size=2, max_size=25))
def test_symmetry_and_invariance(pairs):
    scores = np.array([s / 8.0 for s, _ in pairs])
    labels = np.array([l for _, l in pairs])
    if labels.all() or not labels.any():
        with pytest.raises(DegenerateLabels):
            eer(scores, labels)
        return
    e = eer(scores, labels)
    assert e == pytest.approx(eer(-scores, ~labels), abs=1e-12)
    assert e == pytest.approx(eer(np.exp(scores / 20.0) * 2 + 1, labels), abs=1e-12)
    assert e == pytest.approx(float(brute_force_eer(scores.tolist(), labels.tolist())), abs=1e-12)


def test_det_curve_shape():
    c = det_points([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
    assert c.thresholds[0] == -np.inf and c.thresholds[-1] == np.inf
    assert c.far[0] == 1.0 and c.frr[0] == 0.0 and c.far[-1] == 0.0 and c.frr[-1] == 1.0
    assert np.all(np.diff(c.far) <= 0) and np.all(np.diff(c.frr) >= 0)


def test_input_errors():
    with pytest.raises(ValidationError):
        eer([0.1, np.nan], [0, 1])
    with pytest.raises(ValidationError):
        eer([0.1, 0.2], [0, 1, 1])
    with pytest.raises(EmptyInput):
        mean_eer({})


def test_one_vs_rest():
    scores = np.array([[0.9, 0.1], [0.8, 0.2], [0.3, 0.7], [0.2, 0.8]])
    r = one_vs_rest_eer(scores, ["A", "A", "B", "B"], ("A", "B"), "fp")
    assert r.per_city == {"A": 0.0, "B": 0.0} and r.mean == 0.0 and r.fingerprint == "fp"
    assert r.counts["A"] == (2, 2)
    with pytest.warns(CityIdWarning):
        r = one_vs_rest_eer(np.c_[scores, np.zeros(4)], ["A", "A", "B", "B"], ("A", "B", "C"))
    assert set(r.per_city) == {"A", "B"}


def test_sizes_plan_parsing():
    plan = parse_sizes_plan("2:5, 5:2,8:1,10:1")
    assert plan == {2: 5, 5: 2, 8: 1, 10: 1}
    assert format_sizes_plan(plan) == "2:5,5:2,8:1,10:1"
    for bad in ("2", "a:1", "0:1", "2:0", ""):
        with pytest.raises(ValidationError):
            parse_sizes_plan(bad)


def test_sample_groups():
    plan = {2: 5, 5: 2, 8: 1, 10: 1}
    groups = sample_groups(URBAN_CLASSES, plan, seed=4)
    assert groups == sample_groups(URBAN_CLASSES, plan, seed=4)
    assert groups != sample_groups(URBAN_CLASSES, plan, seed=5)
    assert [len(g) for g in groups] == [2] * 5 + [5] * 2 + [8, 10]
    for g in groups:
        assert len(set(g)) == len(g)
        assert list(g) == sorted(g, key=URBAN_CLASSES.index)
    with pytest.raises(SizeExceedsBasis):
        sample_groups(URBAN_CLASSES[:4], {5: 1}, 0)


def test_ablation_run_uses_subsets(rng):
    basis = BasisMatrix(rng.standard_normal((275, 10)), URBAN_CLASSES)
    seen = []

    def fake_eval(sub):
        seen.append(sub.class_names)
        return 1.0 / sub.n_classes

    r = ablation_run(basis, fake_eval, {2: 3, 10: 1}, seed=1)
    assert len(seen) == 4 and seen[-1] == URBAN_CLASSES
    assert r.mean_by_size[2] == pytest.approx(0.5) and r.mean_by_size[10] == pytest.approx(0.1)
    assert [g.size for g in r.groups] == [2, 2, 2, 10]
