import json
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faultzone.errors import ConfigError, ConvergenceError, DataError
from faultzone.svmcore import (ANCHOR_C, ANCHOR_G, PAIRS, VOTING_TABLES, BinarySvmModel,
                               ZoneClassifier, accuracy, default_grid, dual_objective, gram,
                               grid_search, kkt_residual, load_model, oaa_classify, oaa_train,
                               oaa_vote, oao_classify, oao_train, oao_vote, rbf_kernel,
                               save_model, smo_solve, smo_train, train_multiclass, vote_patterns)
from oracles import brute_force_svm_dual


def blobs(n_per=30, seed=0, spread=0.6, dim=4):
    rng = np.random.default_rng(seed)
    centres = np.array([[0, 0, 0, 0], [3, 0, 0, 0], [0, 3, 0, 0]], float)[:, :dim]
    X = np.vstack([c + spread * rng.normal(size=(n_per, dim)) for c in centres])
    z = np.repeat([1, 2, 3], n_per)
    return X, z


# kernels

def test_rbf_kernel_values():
    assert rbf_kernel([0, 0], [0, 0], 1.0) == 1.0
    assert rbf_kernel([0, 0], [1, 1], 0.5) == pytest.approx(np.exp(-1.0))
    with pytest.raises(ConfigError):
        rbf_kernel([0], [0, 1], 1.0)
    with pytest.raises(ConfigError):
        rbf_kernel([0], [1], 0.0)


def test_gram_matches_pointwise():
    rng = np.random.default_rng(3)
    X, Y = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
    K = gram(X, Y, "rbf", 0.7)
    for i, j in product(range(5), range(4)):
        assert K[i, j] == pytest.approx(rbf_kernel(X[i], Y[j], 0.7), rel=1e-12)


# binary solver

def test_two_point_analytic():
    X = np.array([[0.0], [2.0]])
    y = np.array([1.0, -1.0])
    model = smo_train(X, y, C=10.0, g=1.0, tol=1e-9)
    alpha = np.abs(model.coefficients)
    np.testing.assert_allclose(alpha, 1 / (1 - np.exp(-4)), atol=1e-6)
    assert model.bias == pytest.approx(0.0, abs=1e-6)
    assert model.decision(np.array([0.0])) == pytest.approx(1.0, abs=1e-6)
    assert model.decision(np.array([2.0])) == pytest.approx(-1.0, abs=1e-6)


@pytest.mark.parametrize("seed", range(50))
def test_dual_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    X = rng.normal(size=(n, 2))
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    C = float(rng.choice([0.1, 1.0, 10.0]))
    K = gram(X, X, "rbf", 0.5)
    best, _ = brute_force_svm_dual(K, y, C)
    alpha, _, _ = smo_solve(K, y, C, tol=1e-8)
    assert dual_objective(alpha, y, K) == pytest.approx(best, abs=1e-6)


def test_linear_kernel_margin():
    # separable in 1-D: maximum-margin boundary halfway between the inner points
    X = np.array([[-3.0], [-1.0], [1.0], [4.0]])
    y = np.array([-1.0, -1.0, 1.0, 1.0])
    model = smo_train(X, y, C=1e3, kernel="linear", tol=1e-9)
    assert model.decision(np.array([0.0])) == pytest.approx(0.0, abs=1e-6)
    assert model.decision(np.array([1.0])) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("C", [0.5, 10.0, 1e4, 1.08e6])
def test_kkt_and_feasibility(C):
    X, z = blobs(seed=4, spread=1.2)
    y = np.where(z == 1, 1.0, -1.0)
    K = gram(X, X, "rbf", 0.3)
    alpha, bias, _ = smo_solve(K, y, C, tol=1e-3)
    assert np.all(alpha >= 0) and np.all(alpha <= C)
    assert abs(alpha @ y) <= 1e-8
    sv = alpha > 0
    model = BinarySvmModel(X[sv], (alpha * y)[sv], bias, "rbf", 0.3, C)
    resid, eq = kkt_residual(model, X, y, alpha)
    assert resid <= 1e-3 + 1e-9


def test_objective_monotone():
    X, z = blobs(seed=5, spread=1.0)
    y = np.where(z == 2, 1.0, -1.0)
    trace = []
    smo_train(X, y, C=50.0, g=0.5, trace=trace)
    assert len(trace) > 3
    assert np.all(np.diff(trace) >= -1e-9)


def test_permutation_robustness():
    X, z = blobs(seed=6, spread=1.0)
    y = np.where(z == 3, 1.0, -1.0)
    perm = np.random.default_rng(1).permutation(len(y))
    K = gram(X, X, "rbf", 0.5)
    a1, _, _ = smo_solve(K, y, 10.0)
    a2, _, _ = smo_solve(K[np.ix_(perm, perm)], y[perm], 10.0)
    assert dual_objective(a1, y, K) == pytest.approx(dual_objective(a2, y[perm], K[np.ix_(perm, perm)]), abs=1e-4)
    m1 = smo_train(X, y, 10.0, 0.5)
    m2 = smo_train(X[perm], y[perm], 10.0, 0.5)
    probe = np.random.default_rng(2).uniform(-2, 5, size=(500, 4))
    agree = np.mean(np.sign(m1.decision(probe)) == np.sign(m2.decision(probe)))
    assert agree >= 0.99


def test_solver_errors():
    K = np.eye(3)
    with pytest.raises(DataError):
        smo_solve(K, [1, 1, 1], 1.0)
    with pytest.raises(ConfigError):
        smo_solve(K, [1, -1, 1], 0.0)
    X, z = blobs(seed=7, spread=1.5)
    y = np.where(z == 1, 1.0, -1.0)
    with pytest.raises(ConvergenceError):
        smo_solve(gram(X, X, "rbf", 0.3), y, 1e4, tol=1e-6, max_iter=3)
    with pytest.raises(DataError):
        smo_train(X, np.where(z == 1, 1.0, 0.0), 1.0)


# voting

def test_voting_tables_exhaustive():
    expected = {
        "V": (1, 1, 3, 0, 0, 2, 2, 3),
        "VI": (1, 1, 3, 3, 2, 2, 2, 3),
        "IX": (1, 1, 3, 2, 3, 2, 2, 3),
    }
    patterns = [(1, 1, 0), (1, 1, 1), (1, 0, 0), (1, 0, 1), (0, 1, 0), (0, 1, 1), (0, 0, 1), (0, 0, 0)]
    for name, outs in expected.items():
        for pat, out in zip(patterns, outs):
            dv = np.array([[1.0 if b else -1.0 for b in pat]])
            assert oao_vote(dv, name)[0] == out
            models = {pair: BinarySvmModel(np.zeros((1, 1)), np.zeros(1), float(dv[0, k]))
                      for k, pair in enumerate(PAIRS)}
            clf = ZoneClassifier("oao", models, 1.0, 1.0, name)
            assert oao_classify(clf, name, np.zeros((1, 1)))[0] == out


def test_voting_majority_property():
    for name, table in VOTING_TABLES.items():
        for pat, out in table.items():
            votes = {1: 0, 2: 0, 3: 0}
            for (a, b), bit in zip(PAIRS, pat):
                votes[a if bit else b] += 1
            top = max(votes.values())
            winners = [k for k, v in votes.items() if v == top]
            if top >= 2 and len(winners) == 1:
                assert out == winners[0], (name, pat)


def test_vote_bit_on_zero_decision():
    assert vote_patterns(np.array([[0.0, -0.0, -1e-300]])).tolist() == [[1, 1, 0]]
    with pytest.raises(ConfigError):
        oao_vote(np.zeros((1, 3)), "VII")


def test_oaa_tie_goes_to_lower_zone():
    dv = np.array([[0.5, 0.5, -1.0], [-1.0, 0.2, 0.2], [-1, -1, -1]])
    assert oaa_vote(dv).tolist() == [1, 2, 1]
    assert np.array_equal(oaa_vote(dv), oaa_vote(dv))


# multiclass training

def test_multiclass_separable():
    X, z = blobs(seed=8, spread=0.3)
    for clf in (oaa_train(X, z, 10.0, 0.5), oao_train(X, z, 10.0, 0.5, "VI")):
        pred = clf.classify(X)
        assert accuracy(pred, z) == 1.0
    assert accuracy(oaa_classify(clf, X), z) <= 1.0


def test_missing_zone_rejected():
    X, z = blobs()
    with pytest.raises(DataError):
        train_multiclass(X[z != 3], z[z != 3], 1.0, 1.0, "oaa")
    with pytest.raises(ConfigError):
        train_multiclass(X, z, 1.0, 1.0, "ovr")


def test_accuracy_counts_undecided_as_wrong():
    assert accuracy([1, 0, 3, 0], [1, 2, 3, 1]) == 0.5


def test_model_round_trip(tmp_path):
    X, z = blobs(seed=9, spread=1.0)
    clf = oao_train(X, z, 100.0, 0.4, "IX")
    clf.meta = {"training_ids": [1, 2]}
    path = tmp_path / "m.json"
    save_model(clf, path)
    back = load_model(path)
    probe = np.random.default_rng(0).normal(size=(200, 4)) * 2
    np.testing.assert_array_equal(back.decision_values(probe), clf.decision_values(probe))
    assert back.table == "IX" and back.meta == clf.meta
    doc = json.loads(path.read_text())
    assert doc["strategy"] == "oao" and doc["c"] == 100.0


def test_load_model_rejects_other_documents(tmp_path):
    path = tmp_path / "x.json"
    path.write_text('{"format": "other"}')
    with pytest.raises(DataError):
        load_model(path)


# grid search

def test_grid_singleton():
    X, z = blobs(seed=10)
    res = grid_search(X, z, X, z, [3.0], [0.2], "oaa")
    assert res.best == (3.0, 0.2)
    assert len(res.table) == 1


def test_grid_tie_break_prefers_small_values():
    X, z = blobs(seed=11, spread=0.2)
    res = grid_search(X, z, X, z, [1e3, 10.0, 100.0], [0.5, 0.1], "oao", "V")
    assert res.best_accuracy == 1.0
    assert res.best == (10.0, 0.1)


def test_grid_worse_duplicate_row_keeps_winner():
    X, z = blobs(seed=12, spread=1.2)
    Xe, ze = blobs(seed=13, spread=1.2)
    base = grid_search(X, z, Xe, ze, [1.0, 10.0], [0.1, 1.0], "oaa")
    worst = min(base.table, key=lambda r: r["accuracy"])
    more = grid_search(X, z, Xe, ze, [1.0, 10.0, worst["c"]], [0.1, 1.0, worst["g"]], "oaa")
    assert more.best == base.best


def test_grid_rejects_empty():
    X, z = blobs()
    with pytest.raises(ConfigError):
        grid_search(X, z, X, z, [], [1.0], "oaa")


def test_default_grid_has_anchors():
    Cs, gs = default_grid()
    assert set(ANCHOR_C) <= set(Cs)
    assert set(ANCHOR_G) <= set(gs)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=20))
def test_classification_is_deterministic(rows):
    dv = np.array(rows)
    for table in VOTING_TABLES:
        assert np.array_equal(oao_vote(dv, table), oao_vote(dv.copy(), table))
    assert np.array_equal(oaa_vote(dv), oaa_vote(dv.copy()))
