import numpy as np
import pytest

from autoen.errors import (ArityMismatch, ChainOrderInvalid, DuplicateId, EmptyPortfolio, InvalidArgument,
                           PipelineError, UnknownClassifier, UnknownColumn, UnknownStep)
from autoen.learners import ClassifierSpec
from autoen.pipeline import (FitPartition, Portfolio, default_portfolio, fit_pipeline, parse_portfolio,
                             parse_portfolio_text)
from autoen.preprocess import ImputeMeanMode, OneHotEncode, StandardScale, apply_chain, fit_transform_chain

from conftest import blobs, mixed_dataset

TEXT = """
# two pipelines
1 std_knn: impute -> onehot -> standard_scale -> knn(k=3)
7 raw_rf : impute -> onehot -> random_forest(n_trees=5, feature_subset_rule=sqrt, max_depth=none)
"""


def test_parse_basic():
    p = parse_portfolio_text(TEXT)
    assert p.ids == [1, 7]
    spec = p.get(7)
    assert spec.name == "raw_rf"
    assert [s.name for s in spec.steps] == ["impute", "onehot"]
    assert spec.classifier == ClassifierSpec("random_forest",
                                             {"n_trees": 5, "feature_subset_rule": "sqrt", "max_depth": None})


def test_describe_round_trips():
    p = parse_portfolio_text(TEXT)
    again = parse_portfolio_text(p.to_text())
    assert [s.describe() for s in again] == [s.describe() for s in p]


def test_parse_file(tmp_path):
    path = tmp_path / "p.txt"
    path.write_text(TEXT)
    assert len(parse_portfolio(path)) == 2


def test_default_portfolio():
    p = default_portfolio()
    assert len(p) == 40
    assert p.ids == list(range(1, 41))
    assert {s.classifier.family for s in p} == {"knn", "gaussian_nb", "decision_tree", "random_forest",
                                                 "logistic"}


@pytest.mark.parametrize("text, error", [
    ("1 a: knn\n1 b: gaussian_nb", DuplicateId),
    ("1 a: pca -> knn", UnknownStep),
    ("1 a: impute -> onehot -> svm", UnknownClassifier),
    ("1 a: knn(q=3)", UnknownClassifier),
    ("1 a: knn(k=0)", InvalidArgument),
    ("# nothing\n\n", EmptyPortfolio),
    ("no id here", InvalidArgument),
])
def test_parse_errors(text, error):
    with pytest.raises(error):
        parse_portfolio_text(text)


def test_portfolio_invariants():
    p = parse_portfolio_text(TEXT)
    with pytest.raises(EmptyPortfolio):
        Portfolio(())
    with pytest.raises(DuplicateId):
        Portfolio((p.get(1), p.get(1)))
    assert p.subset([7]).ids == [7]


def test_empty_chain_with_nb():
    d = blobs()
    spec = parse_portfolio_text("3 nb: gaussian_nb").get(3)
    fitted = fit_pipeline(spec, d)
    P = fitted.predict_proba(d)
    assert P.shape == (d.n_rows, 3) and fitted.tag is FitPartition.TRAIN_ONLY


def test_chain_error_wrapped_with_id():
    spec = parse_portfolio_text("5 bad: standard_scale -> knn").get(5)
    with pytest.raises(PipelineError) as info:
        fit_pipeline(spec, mixed_dataset())
    assert info.value.spec_id == 5
    assert isinstance(info.value.cause, ChainOrderInvalid)


def test_fit_is_deterministic():
    d = mixed_dataset(seed=3)
    spec = parse_portfolio_text(TEXT).get(7)
    a = fit_pipeline(spec, d, seed=4).predict_proba(d)
    b = fit_pipeline(spec, d, seed=4).predict_proba(d)
    assert np.array_equal(a, b)


def test_seed_is_base_xor_id():
    spec = parse_portfolio_text(TEXT).get(7)
    assert spec.seeded(12).params["seed"] == 12 ^ 7
    fixed = parse_portfolio_text("2 r: random_forest(seed=99)").get(2)
    assert fixed.seeded(12).params["seed"] == 99
    assert "seed" not in parse_portfolio_text(TEXT).get(1).seeded(12).params


def test_composition_matches_manual_chain():
    d = mixed_dataset(seed=5)
    spec = parse_portfolio_text(TEXT).get(1)
    fitted = fit_pipeline(spec, d)
    steps, X = fit_transform_chain([ImputeMeanMode(), OneHotEncode(), StandardScale()], d)
    model = ClassifierSpec("knn", {"k": 3}).build().fit(X, d.labels, 2)
    probe = mixed_dataset(30, seed=9)
    assert np.array_equal(fitted.predict_proba(probe), model.predict_proba(apply_chain(steps, probe)))


def test_knn_k1_alpha0_pipeline_one_hot_on_train():
    d = blobs(seed=2)
    spec = parse_portfolio_text("1 a: knn(k=1, alpha=0)").get(1)
    P = fit_pipeline(spec, d).predict_proba(d)
    assert np.array_equal(P, np.eye(3)[d.labels])


def test_layout_checks():
    d = mixed_dataset()
    fitted = fit_pipeline(parse_portfolio_text(TEXT).get(1), d)
    cols = list(d.columns)
    with pytest.raises(ArityMismatch):
        fitted.predict_proba(type(d)(cols[:2], d.labels, d.class_names))
    renamed = [type(cols[0])("zz", cols[0].kind, cols[0].values)] + cols[1:]
    with pytest.raises(UnknownColumn):
        fitted.predict_proba(type(d)(renamed, d.labels, d.class_names))
