"""Supervised baseline: a scalar regressor trained on frame features with
speaker-level ratings, evaluated with leave-one-speaker-out cross-validation.

Augmented variants are used for training only; each speaker's fold tests on
that speaker's original utterances alone.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import manifest as manifest_mod
from . import nn
from .errors import ManifestError, TrainingDivergedError


@dataclass
class LosoFold:
    test_speaker: str
    train_rows: list
    test_rows: list


@dataclass
class FoldResult:
    speaker_id: str
    true_rating: float
    predicted_score: float
    status: str  # "ok" or "failed: <reason>"


def build_loso_folds(rows, ratings, oral_only=True):
    """One fold per speaker; the test speaker's rows (originals and augmented
    variants alike) never appear in that fold's training set."""
    if oral_only:
        rows = [r for r in rows if r.get("is_oral", True)]
    speakers = sorted({r["speaker_id"] for r in rows})
    if len(speakers) < 2:
        raise ManifestError(f"LOSO needs at least 2 speakers, got {len(speakers)}")
    missing = [s for s in speakers if s not in ratings]
    if missing:
        raise ManifestError(f"speakers without ratings: {missing}")
    folds = []
    for speaker in speakers:
        train = [r for r in rows if r["speaker_id"] != speaker]
        test = [r for r in rows if r["speaker_id"] == speaker and manifest_mod.is_original(r)]
        folds.append(LosoFold(speaker, train, test))
    return folds


def audit_folds(folds):
    """Count provenance violations: test-speaker rows inside their own fold's
    training set, or augmented rows leaking into a test set."""
    violations = 0
    for fold in folds:
        violations += sum(1 for r in fold.train_rows if r["speaker_id"] == fold.test_speaker)
        violations += sum(1 for r in fold.test_rows if not manifest_mod.is_original(r))
        violations += sum(1 for r in fold.test_rows if r["speaker_id"] != fold.test_speaker)
    return violations


def train_and_predict_fold(fold, ratings, feature_loader, cfg=None, feature_config_hash=0):
    """Train the regressor on the fold's training rows and predict its speaker.

    Every training frame carries its speaker's rating as the target; the
    prediction is the mean network output over all frames of the test
    speaker's original utterances.
    """
    if cfg is None:
        cfg = nn.TrainConfig(loss="mse")
    if cfg.loss != "mse":
        raise ManifestError("regressor folds must train with the mse loss")

    xs, ys = [], []
    for row in fold.train_rows:
        feats = feature_loader(row)
        xs.append(feats)
        ys.append(np.full(len(feats), ratings[row["speaker_id"]]))
    x = np.vstack(xs)
    y = np.concatenate(ys)
    try:
        model, _ = nn.train(
            x, y, nn.REGRESSOR_LAYERS, cfg, feature_config_hash=feature_config_hash
        )
    except TrainingDivergedError as exc:
        return FoldResult(fold.test_speaker, ratings[fold.test_speaker], float("nan"),
                          f"failed: {exc}")

    test_frames = np.vstack([feature_loader(row) for row in fold.test_rows])
    prediction = float(np.mean(nn.forward(model, test_frames)))
    return FoldResult(fold.test_speaker, ratings[fold.test_speaker], prediction, "ok")


def run_loso(rows, ratings, feature_loader, cfg=None, oral_only=True):
    """Full LOSO sweep. Failed folds are reported but do not abort the run."""
    folds = build_loso_folds(rows, ratings, oral_only=oral_only)
    assert audit_folds(folds) == 0
    cache = {}

    def cached_loader(row):
        key = (row["speaker_id"], row["utterance_id"], row.get("aug_type", "none"),
               row.get("aug_param", ""))
        if key not in cache:
            cache[key] = np.asarray(feature_loader(row))
        return cache[key]

    results = []
    for fold in folds:
        result = train_and_predict_fold(fold, ratings, cached_loader, cfg=cfg)
        if result.status != "ok":
            warnings.warn(f"fold {fold.test_speaker}: {result.status}")
        results.append(result)
    return results
