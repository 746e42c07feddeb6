import csv
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermobench.eval import (RESULTS_COLUMNS, build_records, confidence_interval,
                              confusion_and_accuracy, dominates, effect_category,
                              efficiency_score, generalization_gap, pareto_front,
                              write_results_csv, zscores)

# Published twelve-model test accuracies with their z-scores and effect buckets.
REFERENCE = {
    "M3": (63.28, 0.87, "large"), "M5": (62.96, 0.84, "large"),
    "M2": (62.75, 0.82, "large"), "M1": (62.46, 0.80, "medium"),
    "M10": (61.81, 0.75, "medium"), "M4": (61.37, 0.71, "medium"),
    "M7": (56.21, 0.29, "small"), "M9": (50.75, -0.16, "negligible"),
    "M6": (49.52, -0.26, "small"), "M11": (39.28, -1.09, "large"),
    "M8": (36.52, -1.31, "large"), "M12": (24.97, -2.26, "large"),
}


def test_confusion_examples():
    cm, acc, prec, rec = confusion_and_accuracy([0, 1, 2, 3], [0, 1, 2, 3])
    assert acc == 1.0 and np.array_equal(cm.counts, np.eye(4, dtype=int))
    cm, acc, prec, rec = confusion_and_accuracy([0, 1, 2, 3], [0, 1, 1, 3])
    assert acc == 0.75
    assert prec[1] == 0.5
    assert prec[2] == 0.0 and rec[2] == 0.0
    y = np.repeat(np.arange(4), 5)
    assert confusion_and_accuracy(y, np.zeros(20, dtype=int))[1] == 0.25
    assert cm.total == 4 and cm.counts[2, 1] == 1


def test_confusion_errors():
    with pytest.raises(ValueError):
        confusion_and_accuracy([], [])
    with pytest.raises(ValueError):
        confusion_and_accuracy([0, 1], [0])


def test_gap_examples():
    assert generalization_gap(63.58, 63.28) == pytest.approx(0.30)
    assert generalization_gap(24.97, 24.97) == 0.0
    assert generalization_gap(61.20, 61.81) == pytest.approx(-0.61)
    with pytest.raises(ValueError):
        generalization_gap(101.0, 50.0)


def test_efficiency_examples():
    assert efficiency_score(50.0, 2.0) == 25.0
    assert round(efficiency_score(39.28, 1.413), 1) == 27.8
    scores = [efficiency_score(60.0, s) for s in (0.5, 1.0, 10.0, 1e6)]
    assert all(a > b for a, b in zip(scores, scores[1:])) and scores[-1] < 1e-4
    with pytest.raises(ValueError):
        efficiency_score(50.0, 0.0)


def test_zscores_reference_values():
    names = list(REFERENCE)
    z = dict(zip(names, zscores([REFERENCE[n][0] for n in names])))
    for n, (_, zref, _) in REFERENCE.items():
        assert z[n] == pytest.approx(zref, abs=0.01)


def test_effect_categories_reference_agreement():
    names = list(REFERENCE)
    z = zscores([REFERENCE[n][0] for n in names])
    matches = [effect_category(zi) == REFERENCE[n][2] for n, zi in zip(names, z)]
    assert sum(matches) >= 11
    # unrounded z for M1 is 0.799, so it lands in "medium" as listed
    assert z[names.index("M1")] < 0.8 and all(matches)


def test_zscores_two_point():
    np.testing.assert_allclose(zscores([3.0, 3.5]), [-1.0, 1.0])
    with pytest.raises(ValueError):
        zscores([2.0, 2.0])
    with pytest.raises(ValueError):
        zscores([1.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=2, max_size=30), st.floats(-50, 50),
       st.floats(0.1, 10))
def test_zscores_properties(values, shift, scale):
    a = np.array(values)
    if a.std() < 1e-6:
        return
    z = zscores(a)
    assert abs(z.sum()) < 1e-9 * a.size
    assert z.std() == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(zscores(a + shift), z, atol=1e-6)
    np.testing.assert_allclose(zscores(a * scale), z, atol=1e-6)


def test_effect_examples_and_boundaries():
    assert effect_category(0.16) == "negligible"
    assert effect_category(-0.29) == "small"
    assert effect_category(2.26) == "large"
    assert [effect_category(v) for v in (0.2, 0.5, 0.8)] == ["small", "medium", "large"]
    with pytest.raises(ValueError):
        effect_category(float("nan"))


def test_confidence_interval_examples():
    assert confidence_interval([0.7] * 10) == (pytest.approx(0.7), 0.0)
    mean, half = confidence_interval([0.0, 1.0])
    assert mean == 0.5 and half == pytest.approx(0.98, abs=1e-3)
    base = np.array([0.0, 1.0])
    h = [confidence_interval(np.tile(base, r))[1] for r in (4, 16)]
    # sample std changes slightly with n, the 1/sqrt(n) factor dominates
    assert h[1] / h[0] == pytest.approx(0.5 * np.sqrt(7 / 8 * 32 / 31), rel=1e-9)
    with pytest.raises(ValueError):
        confidence_interval([1.0])


def test_confidence_interval_other_level():
    _, h95 = confidence_interval([0.0, 1.0, 2.0])
    _, h99 = confidence_interval([0.0, 1.0, 2.0], level=0.99)
    assert h99 > h95


def test_pareto_reference_example():
    pts = [(63.28, 0.3), (62.75, 0.6), (62.46, 0.7), (61.81, 0.5), (50.75, 24.3), (39.28, 27.8)]
    assert pareto_front(pts) == [0, 1, 2, 4, 5]


def test_pareto_trivial_cases():
    assert pareto_front([(1.0, 2.0)]) == [0]
    assert pareto_front([(1.0, 2.0), (1.0, 2.0)]) == [0, 1]
    assert pareto_front([(1.0, 5.0), (2.0, 3.0)], maximize=[True, False]) == [1]
    with pytest.raises(ValueError):
        pareto_front([])
    with pytest.raises(ValueError):
        pareto_front([(1.0, 2.0)], maximize=[True])


def brute_front(P, flags):
    Q = np.where(flags, P, -P)
    return [i for i in range(len(Q))
            if not any(dominates(Q[j], Q[i]) for j in range(len(Q)) if j != i)]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 100), st.integers(1, 4), st.integers(0, 2**32))
def test_pareto_matches_brute_force(n, d, seed):
    rng = np.random.default_rng(seed)
    # coarse grid values force ties and duplicates
    P = rng.integers(0, 6, size=(n, d)).astype(float)
    flags = rng.integers(0, 2, d).astype(bool)
    assert pareto_front(P, flags) == brute_front(P, flags)


def _entries():
    return [
        {"model_id": "b", "kind": "tree", "category": "traditional", "val_accs": [0.6, 0.62],
         "test_accs": [0.58, 0.6], "train_seconds": [1.0, 3.0], "n_params": 10},
        {"model_id": "a", "kind": "knn", "category": "traditional", "val_accs": [0.6, 0.6],
         "test_accs": [0.59, 0.59], "train_seconds": [0.5, 0.5], "n_params": 5},
        {"model_id": "c", "kind": "majority", "category": "baseline", "val_accs": [0.25, 0.25],
         "test_accs": [0.25, 0.25], "train_seconds": [1e-3, 1e-3], "n_params": 1},
    ]


def test_build_records_ranks_and_fields():
    recs = build_records(_entries())
    assert [r.model_id for r in recs] == ["a", "b", "c"]
    assert [r.rank for r in recs] == [1, 2, 3]
    b = recs[1]
    assert b.test_acc == pytest.approx(59.0) and b.val_acc == pytest.approx(61.0)
    assert b.gen_gap == pytest.approx(b.val_acc - b.test_acc)
    assert b.train_seconds == 2.0 and b.efficiency == pytest.approx(29.5)
    assert b.n_seeds == 2 and b.test_ci > 0
    assert recs[0].test_ci == 0.0
    assert sum(r.zscore for r in recs) == pytest.approx(0.0, abs=1e-9)
    assert recs[2].effect == "large" and not recs[2].significant


def test_build_records_significance_threshold():
    recs = build_records(_entries(), significance_threshold=1.0)
    assert [r.significant for r in recs] == [False, False, True]


def test_rank_ties_broken_by_model_id():
    entries = [dict(e, test_accs=[0.5, 0.5]) for e in _entries()]
    assert [r.model_id for r in build_records(entries)] == ["a", "b", "c"]
    assert all(r.zscore == 0.0 for r in build_records(entries))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 20), min_size=1, max_size=12))
def test_rank_is_descending_accuracy_permutation(accs):
    entries = [{"model_id": f"m{i:02d}", "kind": "tree", "category": "traditional",
                "val_accs": [0.5], "test_accs": [a / 20], "train_seconds": [1.0]}
               for i, a in enumerate(accs)]
    recs = build_records(entries)
    assert sorted(r.rank for r in recs) == list(range(1, len(accs) + 1))
    keys = [(-r.test_acc, r.model_id) for r in recs]
    assert keys == sorted(keys)


def test_results_csv_columns(tmp_path):
    path = tmp_path / "results.csv"
    write_results_csv(build_records(_entries()), path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == RESULTS_COLUMNS
    assert len(rows) == 4
    assert rows[1][RESULTS_COLUMNS.index("model_id")] == "a"


def test_dominates_definition():
    for a, b in itertools.product([(1, 1), (1, 2), (2, 1), (2, 2)], repeat=2):
        a, b = np.array(a), np.array(b)
        assert dominates(a, b) == (bool(np.all(a >= b)) and bool(np.any(a > b)))
