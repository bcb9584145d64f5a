"""Single-file archive for fitted ensembles.

The archive is a zip holding ``manifest.json`` (structure, hyperparameters,
class names, trace) and ``arrays.npz`` (every numeric array, stored
losslessly). Arrays are referenced from the manifest by key.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path
from typing import Any

import numpy as np

from .dataset import FeatureKind
from .ensemble import EnsembleModel, RankedPipeline, TraceStep
from .errors import PersistenceError
from .learners import Classifier
from .pipeline import FitPartition, FittedPipeline, parse_portfolio_text
from .preprocess import FittedTransform

FORMAT_VERSION = 1
_ARRAY_KEY = "__array__"


class _Packer:
    def __init__(self):
        self.arrays: dict[str, np.ndarray] = {}

    def pack(self, obj: Any) -> Any:
        if isinstance(obj, np.ndarray):
            if obj.dtype == object:
                return [self.pack(v) for v in obj.tolist()]
            key = f"a{len(self.arrays)}"
            self.arrays[key] = obj
            return {_ARRAY_KEY: key}
        if isinstance(obj, dict):
            return {str(k): self.pack(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [self.pack(v) for v in obj]
        if isinstance(obj, FeatureKind):
            return obj.value
        if isinstance(obj, np.generic):
            return obj.item()
        return obj


def _unpack(obj: Any, arrays) -> Any:
    if isinstance(obj, dict):
        if set(obj) == {_ARRAY_KEY}:
            return arrays[obj[_ARRAY_KEY]]
        return {k: _unpack(v, arrays) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_unpack(v, arrays) for v in obj]
    return obj


def _pipeline_state(p: FittedPipeline) -> dict[str, Any]:
    return {
        "spec": p.spec.describe(),
        "tag": p.tag.value,
        "input_layout": [[n, k.value] for n, k in p.input_layout],
        "class_names": list(p.class_names),
        "steps": [s.get_state() for s in p.fitted_steps],
        "model": p.model.get_state(),
    }


def _pipeline_from_state(state: dict[str, Any]) -> FittedPipeline:
    spec = parse_portfolio_text(state["spec"]).pipelines[0]
    steps = [FittedTransform.from_state(s) for s in state["steps"]]
    model = Classifier.from_state(state["model"])
    layout = [(n, FeatureKind(k)) for n, k in state["input_layout"]]
    return FittedPipeline(spec, steps, model, FitPartition(state["tag"]), layout, list(state["class_names"]))


def save_model(m: EnsembleModel, path: str | Path) -> None:
    packer = _Packer()
    manifest = {
        "format_version": FORMAT_VERSION,
        "class_names": list(m.class_names),
        "metric": m.metric,
        "members": list(m.members),
        "trace": [[s.step, s.spec_id, s.validation_score, s.elapsed] for s in m.trace],
        "ranking": [[r.spec_id, r.validation_score, r.rank] for r in m.ranking],
        "failures": {str(k): v for k, v in m.failures.items()},
        "candidate_ids": list(m.candidate_ids),
        "timings": dict(m.timings),
        "holdout_test_score": m.holdout_test_score,
        "metadata": m.metadata,
        "pipelines": {str(i): packer.pack(_pipeline_state(p)) for i, p in m.unique_fitted.items()},
    }
    buf = io.BytesIO()
    np.savez(buf, **packer.arrays)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=1))
        zf.writestr("arrays.npz", buf.getvalue())


def load_model(path: str | Path) -> EnsembleModel:
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            arrays = dict(np.load(io.BytesIO(zf.read("arrays.npz")), allow_pickle=False))
    except (OSError, KeyError, zipfile.BadZipFile, json.JSONDecodeError, ValueError) as exc:
        raise PersistenceError(f"cannot read model archive {path}: {exc}") from None
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise PersistenceError(f"unsupported model format version {version!r} (expected {FORMAT_VERSION})")
    try:
        pipelines = {int(i): _pipeline_from_state(_unpack(s, arrays)) for i, s in manifest["pipelines"].items()}
        return EnsembleModel(
            members=[int(i) for i in manifest["members"]],
            unique_fitted=dict(sorted(pipelines.items())),
            trace=[TraceStep(int(a), int(b), float(c), float(d)) for a, b, c, d in manifest["trace"]],
            class_names=list(manifest["class_names"]),
            metric=manifest["metric"],
            ranking=[RankedPipeline(int(a), float(b), int(c)) for a, b, c in manifest["ranking"]],
            failures={int(k): v for k, v in manifest["failures"].items()},
            candidate_ids=[int(i) for i in manifest["candidate_ids"]],
            timings=dict(manifest["timings"]),
            holdout_test_score=manifest["holdout_test_score"],
            metadata=dict(manifest.get("metadata", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise PersistenceError(f"malformed model archive {path}: {exc}") from None
