"""In-house probabilistic classifiers, one representative per portfolio family."""

from .base import FAMILIES, Classifier, ClassifierSpec, check_matrix, register_family
from .forest import RandomForest
from .knn import KNearestNeighbors
from .logistic import LogisticRegression
from .naive_bayes import GaussianNaiveBayes
from .tree import DecisionTree


def fit(spec: ClassifierSpec, X, y, n_classes: int) -> Classifier:
    return spec.build().fit(X, y, n_classes)


def predict_proba(model: Classifier, X):
    return model.predict_proba(X)


__all__ = [
    "FAMILIES",
    "Classifier",
    "ClassifierSpec",
    "DecisionTree",
    "GaussianNaiveBayes",
    "KNearestNeighbors",
    "LogisticRegression",
    "RandomForest",
    "check_matrix",
    "fit",
    "predict_proba",
    "register_family",
]
