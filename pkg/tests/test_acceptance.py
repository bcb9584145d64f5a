"""Acceptance suite: one test per criterion, each at its stated tolerance.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import csv
import math
import time

import numpy as np
import pytest

from autoen import ensemble as ens
from autoen.bench import BenchmarkConfig, DatasetRef, MethodConfig, constant_prior_fit, find_dataset, run_benchmark
from autoen.dataset import stratified_holdout, stratified_kfold
from autoen.ensemble import AutoEnConfig, EconomyConfig, RankedPipeline, autoen_fit, ensemble_predict, greedy_select
from autoen.learners import Classifier, register_family
from autoen.metrics import log_loss_multiclass, roc_auc_binary
from autoen.persist import load_model, save_model
from autoen.pipeline import default_portfolio, parse_portfolio_text
from autoen.stats import ScoreTable, average_ranks, holm_posthoc

from conftest import TABLES, blobs, criterion, mixed_dataset
from oracles import greedy_step_oracle, oracle_score, pair_count_auc

BINARY_DATASETS = ("blood-transfusion", "credit-g")
DESK_DATASETS = ("blood-transfusion", "credit-g", "car")


def published_ranks(name):
    with open(TABLES / name) as f:
        rows = list(csv.reader(line for line in f if not line.startswith("#")))
    return [(r[0], float(r[1])) for r in rows[1:]]


def load(name):
    found = find_dataset(name)
    if found is None:
        return None
    return DatasetRef(name, *found).load()


@criterion(1, "average ranks reproduce the published binary and traffic rankings")
def test_criterion_1_rank_reproduction():
    start = time.perf_counter()
    binary = average_ranks(ScoreTable.read_csv(TABLES / "binary_scores.csv").drop(["ConstPrd"]))
    expected = published_ranks("binary_ranks.csv")
    assert binary.k == 9 and binary.n_datasets == 16
    assert binary.order() == [m for m, _ in expected]
    for method, rank in expected:
        assert abs(binary.average_ranks[binary.methods.index(method)] - rank) <= 0.25, method

    traffic = average_ranks(ScoreTable.read_csv(TABLES / "traffic_scores.csv"))
    expected = published_ranks("traffic_ranks.csv")
    assert traffic.k == 6 and traffic.n_datasets == 18
    assert traffic.order() == [m for m, _ in expected]
    assert abs(traffic.average_ranks[traffic.methods.index("AutoEn")] - 2.1667) <= 0.25
    assert time.perf_counter() - start < 1.0


@criterion(2, "Holm rejections match the published significance pattern")
def test_criterion_2_holm_decisions():
    start = time.perf_counter()
    binary = average_ranks(ScoreTable.read_csv(TABLES / "binary_scores.csv").drop(["ConstPrd"]))
    rejected = {c.method: c.reject for c in holm_posthoc(binary, "AutoSkl_4h", 0.05)}
    assert {m for m, r in rejected.items() if r} == {"AutoW_1h", "AutoW_4h"}
    for m in ("AutoEn", "AutoEn_ec", "tuned_RF", "BestV_ML", "RF"):
        assert not rejected[m]

    traffic = average_ranks(ScoreTable.read_csv(TABLES / "traffic_scores.csv"))
    rejected = {c.method: c.reject for c in holm_posthoc(traffic, "AutoEn", 0.05)}
    assert {m for m, r in rejected.items() if r} == {"BestV_ML", "RF"}
    assert time.perf_counter() - start < 1.0


@criterion(3, "greedy trace equals an exhaustive per-step oracle on 200 random pools")
def test_criterion_3_greedy_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(20240)
    mismatches = []
    for pool in range(200):
        n_cand = int(rng.integers(1, 6))
        n_rows = int(rng.integers(4, 41))
        C = int(rng.integers(2, 5))
        metric = "roc_auc" if C == 2 and rng.random() < 0.7 else "log_loss"
        y = rng.integers(0, C, size=n_rows)
        y[:C] = np.arange(C)
        ids = sorted(rng.choice(np.arange(1, 50), size=n_cand, replace=False).tolist())
        probs = {}
        for i in ids:
            P = rng.dirichlet(np.ones(C), size=n_rows)
            if rng.random() < 0.4:  # coarse probabilities create ties
                P = np.round(P, 1) + 1e-3
                P /= P.sum(axis=1, keepdims=True)
            probs[i] = P
        if n_cand > 1 and rng.random() < 0.2:  # duplicated candidate
            probs[ids[-1]] = probs[ids[0]].copy()
        order = rng.permutation(ids).tolist()
        ranked = [RankedPipeline(i, 0.0, r + 1) for r, i in enumerate(order)]
        B = int(rng.integers(1, 11))
        members, trace = greedy_select(ranked, probs, y, metric, B)
        if members[0] != order[0]:
            mismatches.append((pool, 1))
        if abs(trace[0].validation_score - oracle_score(metric, probs[order[0]], y)) > 1e-12:
            mismatches.append((pool, 1))
        for t in range(1, B):
            near, best, _ = greedy_step_oracle(members[:t], probs, y, metric)
            if members[t] != min(near) or abs(trace[t].validation_score - best) > 1e-12:
                mismatches.append((pool, t + 1))
    assert mismatches == []
    assert time.perf_counter() - start < 30.0


@criterion(4, "roc_auc equals the pair-counting oracle on 1000 instances with ties")
def test_criterion_4_auc_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 51))
        y = rng.integers(0, 2, size=n)
        y[:2] = [0, 1]
        rng.shuffle(y)
        if rng.random() < 0.5:
            s = rng.integers(0, int(rng.integers(1, 6)), size=n).astype(float)  # heavy ties
        else:
            s = rng.random(n)
            s[rng.random(n) < 0.3] = 0.5
        worst = max(worst, abs(roc_auc_binary(s, y) - pair_count_auc(s, y)))
    assert worst <= 1e-12
    assert time.perf_counter() - start < 5.0


@criterion(5, "constant prior gives AUC 0.5 on every binary fold and train log-loss equal to label entropy")
def test_criterion_5_constant_prior():
    published = ScoreTable.read_csv(TABLES / "binary_scores.csv")
    assert np.all(published.scores[published.methods.index("ConstPrd")] == 0.5)
    available = [n for n in BINARY_DATASETS if find_dataset(n)]
    assert available, "no binary dataset available"
    cfg = BenchmarkConfig(datasets=[DatasetRef(n, *find_dataset(n)) for n in available],
                          methods=[MethodConfig("ConstantPrior")], k=10)
    results, _ = run_benchmark(cfg)
    assert len(results) == 10 * len(available)
    for r in results:
        assert abs(r.score - 0.5) <= 1e-9, r
    for name in available + ["car"]:
        d = load(name)
        plan = stratified_kfold(d, 10, 0)
        for i in range(10):
            train = d.take(plan.split(i)[0])
            freq = np.bincount(train.labels, minlength=train.n_classes) / train.n_rows
            entropy = -sum(f * math.log(f) for f in freq if f > 0)
            P = constant_prior_fit(train).predict_proba(train)
            assert abs(log_loss_multiclass(P, train.labels) - entropy) <= 1e-6


@pytest.mark.slow
@criterion(6, "desk-scale ten-fold benchmark on blood-transfusion, credit-g and car within 30 minutes")
def test_criterion_6_desk_benchmark():
    missing = [n for n in DESK_DATASETS if find_dataset(n) is None]
    if missing:
        pytest.fail(f"datasets not available: {', '.join(missing)} "
                    f"(add <name>.csv and <name>.schema to a directory listed in AUTOEN_FIXTURES)")
    cfg = BenchmarkConfig(datasets=[DatasetRef(n, *find_dataset(n)) for n in DESK_DATASETS],
                          methods=[MethodConfig(m) for m in ("AutoEn", "ConstantPrior", "RandomForestUntuned")],
                          k=10)
    start = time.perf_counter()
    results, tables = run_benchmark(cfg)
    elapsed = time.perf_counter() - start
    assert all(r.score is not None for r in results)
    assert elapsed < 30 * 60
    beats_rf = 0
    for metric, t in tables.items():
        sign = 1.0 if t.direction.value == "higher" else -1.0
        row = {m: sign * t.scores[t.methods.index(m)] for m in t.methods}
        assert np.all(row["AutoEn"] > row["ConstantPrior"]), metric
        beats_rf += int(np.sum(row["AutoEn"] > row["RandomForestUntuned"]))
    assert beats_rf >= 1


FAST = """
1 knn: impute -> onehot -> standard_scale -> knn(k=5)
2 knn1: impute -> onehot -> minmax_scale -> knn(k=1)
3 nb: impute -> onehot -> gaussian_nb
4 tree: impute -> onehot -> decision_tree(max_depth=4, min_leaf=2)
5 deep: impute -> onehot -> decision_tree()
6 rf: impute -> onehot -> random_forest(n_trees=6)
7 lr: impute -> onehot -> standard_scale -> logistic(epochs=40)
8 poly: impute -> onehot -> polynomial(degree=2) -> standard_scale -> logistic(epochs=20)
"""


@criterion(7, "ensemble invariants over 50 random runs, identical with 1 and N workers")
def test_criterion_7_structural_invariants(monkeypatch):
    full = parse_portfolio_text(FAST)
    rng = np.random.default_rng(99)
    refits = []
    real_refit = ens._refit
    monkeypatch.setattr(ens, "_refit", lambda spec, data, seed: refits.append(spec.id) or real_refit(spec, data, seed))
    for run in range(50):
        n = int(rng.integers(60, 160))
        C = int(rng.integers(2, 5))
        seed = int(rng.integers(0, 1000))
        d = mixed_dataset(n, C, seed=seed) if rng.random() < 0.5 else blobs(n, C, 3, seed=seed, spread=2.0)
        ids = sorted(rng.choice(full.ids, size=int(rng.integers(2, 7)), replace=False).tolist())
        portfolio = full.subset(ids)
        B = int(rng.integers(1, 15))
        cfg = AutoEnConfig(ensemble_size=B, seed=seed)
        refits.clear()
        m1 = autoen_fit(d, portfolio, cfg)
        assert sum(m1.multiplicities.values()) == B == m1.size
        assert sorted(refits) == sorted(set(m1.members)) == sorted(m1.unique_fitted)
        assert m1.members[0] == m1.ranking[0].spec_id
        P1 = ensemble_predict(m1, d)
        assert np.all(P1 >= 0) and np.max(np.abs(P1.sum(axis=1) - 1)) <= 1e-9
        m2 = autoen_fit(d, portfolio, AutoEnConfig(ensemble_size=B, seed=seed, n_jobs=2))
        assert m2.members == m1.members
        assert [s.validation_score for s in m2.trace] == [s.validation_score for s in m1.trace]
        assert np.array_equal(ensemble_predict(m2, d), P1)


@register_family
class _Sleepy(Classifier):
    """Prior predictor that stalls in fit; stands in for a pipeline too slow for the budget."""

    family = "acceptance_sleepy"
    defaults = {"seconds": 40.0}

    def _fit(self, X, y):
        time.sleep(self.params["seconds"])
        self.prior_ = np.bincount(y, minlength=self.n_classes) / len(y)

    def _predict_proba(self, X):
        return np.tile(self.prior_, (len(X), 1))

    def _learned(self):
        return {"prior": self.prior_}

    def _load(self, learned):
        self.prior_ = learned["prior"]


@pytest.mark.slow
@criterion(8, "economy mode drops exactly the delayed pipeline and finishes sooner than the full run")
def test_criterion_8_economy():
    d = load("credit-g")
    portfolio = parse_portfolio_text(FAST + "99 sleepy: impute -> onehot -> acceptance_sleepy(seconds=40.0)")
    start = time.perf_counter()
    full = autoen_fit(d, portfolio, AutoEnConfig(ensemble_size=10))
    t_full = time.perf_counter() - start
    start = time.perf_counter()
    eco = autoen_fit(d, portfolio, AutoEnConfig(ensemble_size=10, economy=EconomyConfig()))
    t_eco = time.perf_counter() - start
    assert set(portfolio.ids) - set(eco.candidate_ids) == {99}
    assert set(eco.candidate_ids) <= set(portfolio.ids)
    assert full.candidate_ids == portfolio.ids
    assert t_eco < t_full


@criterion(9, "save and load give bitwise identical predictions")
def test_criterion_9_persistence(tmp_path):
    d = load("car")
    m = autoen_fit(d, default_portfolio(), AutoEnConfig(ensemble_size=20))
    save_model(m, tmp_path / "car.zip")
    loaded = load_model(tmp_path / "car.zip")
    probe = d.take(stratified_holdout(d, seed=5).test_idx)
    assert np.array_equal(ensemble_predict(m, probe), ensemble_predict(loaded, probe))
    assert np.array_equal(ensemble_predict(m, d), ensemble_predict(loaded, d))
