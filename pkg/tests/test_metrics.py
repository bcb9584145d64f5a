import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from autoen.errors import ShapeMismatch, SingleClassPresent
from autoen.metrics import (accuracy, default_metric, is_better, log_loss_multiclass, midranks, roc_auc_binary,
                            score)


def pair_count_auc(s, y):
    pos, neg = s[y == 1], s[y == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_auc_examples():
    assert roc_auc_binary([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert roc_auc_binary([0.1, 0.2, 0.3, 0.4], [0, 0, 1, 1]) == 1.0
    assert roc_auc_binary([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5


def test_auc_single_class():
    with pytest.raises(SingleClassPresent):
        roc_auc_binary([0.1, 0.2], [1, 1])
    with pytest.raises(ShapeMismatch):
        roc_auc_binary([0.1, 0.2], [1, 0, 1])


def test_midranks():
    assert midranks(np.array([3.0, 1.0, 3.0, 2.0])).tolist() == [3.5, 1.0, 3.5, 2.0]


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_auc_pair_count_oracle(data):
    n = data.draw(st.integers(2, 40))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    y = rng.integers(0, 2, size=n)
    y[:2] = [0, 1]
    s = rng.integers(0, 5, size=n) / 4.0
    assert abs(roc_auc_binary(s, y) - pair_count_auc(s, y)) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_auc_monotone_invariance_and_complement(seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=30)
    y[:2] = [0, 1]
    s = rng.normal(size=30).round(1)
    a = roc_auc_binary(s, y)
    assert roc_auc_binary(np.exp(3 * s) + 1, y) == a
    assert abs(roc_auc_binary(-s, y) - (1 - a)) <= 1e-12


def test_log_loss_uniform_is_ln_c():
    P = np.full((6, 3), 1 / 3)
    assert log_loss_multiclass(P, [0, 1, 2, 0, 1, 2]) == pytest.approx(math.log(3), abs=1e-12)


def test_log_loss_clipping_and_direction():
    perfect = np.eye(3)[[0, 1, 2]]
    assert log_loss_multiclass(perfect, [0, 1, 2]) < 1e-12
    wrong = np.eye(3)[[1, 2, 0]]
    assert math.isfinite(log_loss_multiclass(wrong, [0, 1, 2]))
    good = np.array([[0.8, 0.1, 0.1]])
    bad = np.array([[0.4, 0.3, 0.3]])
    assert log_loss_multiclass(good, [0]) < log_loss_multiclass(bad, [0])


def test_log_loss_oracle():
    rng = np.random.default_rng(0)
    P = rng.dirichlet(np.ones(4), size=20)
    y = rng.integers(0, 4, size=20)
    expected = -sum(math.log(P[i, y[i]]) for i in range(20)) / 20
    assert log_loss_multiclass(P, y) == pytest.approx(expected, abs=1e-12)


def test_accuracy():
    P = np.array([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4]])
    assert accuracy(P, [0, 1, 1]) == pytest.approx(2 / 3)
    with pytest.raises(ShapeMismatch):
        accuracy(P, [0, 1])


def test_score_dispatch_and_direction():
    P = np.array([[0.9, 0.1], [0.2, 0.8]])
    assert score("roc_auc", P, [0, 1]) == 1.0
    assert is_better("roc_auc", 0.8, 0.7) and is_better("log_loss", 0.1, 0.2)
    assert not is_better("log_loss", 0.2, 0.2)
    assert default_metric(2) == "roc_auc" and default_metric(3) == "log_loss"
    with pytest.raises(ShapeMismatch):
        score("roc_auc", np.full((2, 3), 1 / 3), [0, 1])
