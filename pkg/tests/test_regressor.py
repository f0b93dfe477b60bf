import numpy as np
import pytest

from ohm.errors import ManifestError
from ohm.nn import TrainConfig
from ohm.regressor import audit_folds, build_loso_folds, run_loso, train_and_predict_fold


def _rows(speakers, utts_per_speaker=2, augmented=True):
    rows = []
    for s in speakers:
        for u in range(utts_per_speaker):
            base = {
                "audio_path": f"{s}_{u}.wav",
                "speaker_id": s,
                "utterance_id": f"{s}_u{u}",
                "is_oral": True,
                "aug_type": "none",
                "aug_param": "",
                "aug_seed": 0,
            }
            rows.append(base)
            if augmented:
                rows.append({**base, "aug_type": "noise", "aug_param": "white@10", "aug_seed": 1})
    return rows


def test_fold_count_and_exclusivity():
    rows = _rows(["a", "b", "c"])
    folds = build_loso_folds(rows, {"a": 0.0, "b": 1.0, "c": 2.0})
    assert len(folds) == 3
    assert {f.test_speaker for f in folds} == {"a", "b", "c"}
    for fold in folds:
        assert all(r["speaker_id"] != fold.test_speaker for r in fold.train_rows)
        assert all(r["aug_type"] == "none" for r in fold.test_rows)
    assert audit_folds(folds) == 0


def test_single_speaker_rejected():
    with pytest.raises(ManifestError):
        build_loso_folds(_rows(["only"]), {"only": 1.0})


def test_missing_rating_rejected():
    with pytest.raises(ManifestError):
        build_loso_folds(_rows(["a", "b"]), {"a": 1.0})


def test_non_oral_rows_dropped():
    rows = _rows(["a", "b"])
    for r in rows:
        if r["speaker_id"] == "a" and r["utterance_id"].endswith("u0"):
            r["is_oral"] = False
    folds = build_loso_folds(rows, {"a": 0.0, "b": 1.0})
    fold_a = next(f for f in folds if f.test_speaker == "a")
    assert all(r["is_oral"] for r in fold_a.test_rows)


def test_audit_detects_leakage():
    rows = _rows(["a", "b"])
    folds = build_loso_folds(rows, {"a": 0.0, "b": 1.0})
    folds[0].train_rows.append({"speaker_id": folds[0].test_speaker, "aug_type": "none"})
    assert audit_folds(folds) == 1


def _gaussian_loader(center_by_speaker, frames_per_row=1500):
    def loader(row):
        rng = np.random.default_rng(abs(hash((row["speaker_id"], row["utterance_id"],
                                              row["aug_type"]))) % (1 << 31))
        return center_by_speaker[row["speaker_id"]] + rng.standard_normal((frames_per_row, 39))
    return loader


def test_constant_rating_fit():
    speakers = ["a", "b", "c", "d"]
    rows = _rows(speakers, utts_per_speaker=2, augmented=False)
    ratings = {s: 2.0 for s in speakers}
    centers = {s: np.zeros(39) for s in speakers}
    folds = build_loso_folds(rows, ratings)
    cfg = TrainConfig(epochs=25, loss="mse", seed=0, batch_size=256)
    result = train_and_predict_fold(folds[0], ratings, _gaussian_loader(centers), cfg=cfg)
    assert result.status == "ok"
    assert abs(result.predicted_score - 2.0) <= 0.1


def test_fold_prediction_deterministic():
    speakers = ["a", "b", "c"]
    rows = _rows(speakers, augmented=False)
    ratings = {"a": 0.0, "b": 1.0, "c": 2.0}
    centers = {s: np.full(39, i * 0.5) for i, s in enumerate(speakers)}
    folds = build_loso_folds(rows, ratings)
    cfg = TrainConfig(epochs=3, loss="mse", seed=11)
    loader = _gaussian_loader(centers, frames_per_row=400)
    r1 = train_and_predict_fold(folds[1], ratings, loader, cfg=cfg)
    r2 = train_and_predict_fold(folds[1], ratings, loader, cfg=cfg)
    assert r1.predicted_score == r2.predicted_score


def test_group_rank_ordering():
    # two speaker groups with distinct feature distributions and ratings 0 / 3
    speakers = {"g0a": 0.0, "g0b": 0.0, "g3a": 3.0, "g3b": 3.0}
    centers = {s: (np.full(39, 2.0) if r > 0 else np.full(39, -2.0))
               for s, r in speakers.items()}
    rows = _rows(list(speakers), utts_per_speaker=2, augmented=False)
    cfg = TrainConfig(epochs=10, loss="mse", seed=0)
    results = run_loso(rows, speakers, _gaussian_loader(centers, frames_per_row=800), cfg=cfg)
    by_speaker = {r.speaker_id: r.predicted_score for r in results}
    g0 = np.mean([by_speaker["g0a"], by_speaker["g0b"]])
    g3 = np.mean([by_speaker["g3a"], by_speaker["g3b"]])
    assert g3 > g0


def test_prediction_invariant_to_utterance_order():
    speakers = ["a", "b", "c"]
    ratings = {"a": 0.0, "b": 1.0, "c": 2.0}
    centers = {s: np.full(39, i * 0.5) for i, s in enumerate(speakers)}
    rows = _rows(speakers, augmented=False)
    loader = _gaussian_loader(centers, frames_per_row=300)
    cfg = TrainConfig(epochs=2, loss="mse", seed=5)
    folds = build_loso_folds(rows, ratings)
    fold = folds[0]
    baseline = train_and_predict_fold(fold, ratings, loader, cfg=cfg).predicted_score
    fold.test_rows.reverse()
    reordered = train_and_predict_fold(fold, ratings, loader, cfg=cfg).predicted_score
    assert baseline == pytest.approx(reordered, abs=1e-12)
