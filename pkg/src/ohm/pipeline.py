"""Shared extraction and training plumbing used by the CLI, the regressor
baseline, and the end-to-end tests."""

import numpy as np

from . import alignment, audio_io, augment, features, nn
from .errors import ManifestError


def extract_row_features(row, mfcc_cfg=None, noise_sources=None):
    """Load one manifest row's audio, realize its augmentation variant, and
    return the n_frames x 39 feature matrix.

    VTLP variants are realized in the feature domain via a warped filterbank;
    all other variants are waveform-domain.
    """
    if mfcc_cfg is None:
        mfcc_cfg = features.MfccConfig()
    audio = audio_io.load_wav(row["audio_path"])
    aug_type = row.get("aug_type", "none")
    audio = augment.apply_augmentation(
        audio, aug_type, row.get("aug_param", ""), row.get("aug_seed", 0), noise_sources
    )
    audio = audio_io.resample(audio, audio_io.DEFAULT_SAMPLE_RATE)
    frames = audio_io.frame_signal(audio)
    filterbank = None
    if aug_type == "vtlp":
        filterbank = augment.vtlp_filterbank(
            mfcc_cfg, frames.sample_rate_hz, float(row["aug_param"])
        )
    return features.extract_features(frames, mfcc_cfg, filterbank=filterbank)


def build_nasality_dataset(rows, mfcc_cfg=None, nv_fraction=0.3, seed=42):
    """Aligned manifest rows -> (X, y) frame dataset for the 4-class model.

    Nasalized-vowel sampling is done per-corpus: vowel candidates from every
    utterance are pooled before the seeded fraction is drawn.
    """
    if mfcc_cfg is None:
        mfcc_cfg = features.MfccConfig()
    feats_list, segment_lists = [], []
    for row in rows:
        if not row.get("alignment_path"):
            raise ManifestError(f"row {row['utterance_id']}: alignment_path required for training")
        segment_lists.append(alignment.parse_alignment(row["alignment_path"]))
        feats_list.append(extract_row_features(row, mfcc_cfg))

    classified = _classify_pooled(segment_lists, nv_fraction, seed)
    matrices, labels = [], []
    for feats, utt_classes in zip(feats_list, classified):
        matrices.append(feats.vectors)
        labels.append(alignment.label_frames(utt_classes, feats.frame_times_s))
    return nn.build_classification_dataset(matrices, labels)


def _classify_pooled(segment_lists, nv_fraction, seed):
    """Classify utterances with nasalized-vowel sampling over the pooled
    candidate list, so the selected fraction is exact corpus-wide."""
    base = [
        [(seg, alignment._base_class(seg.phone)) for seg in segs] for segs in segment_lists
    ]
    candidates = []
    for u, segs in enumerate(segment_lists):
        for i, (seg, cls) in enumerate(base[u]):
            if cls is alignment.PhoneClass.OV and alignment._nasal_adjacent(segs, i):
                candidates.append((u, i))
    rng = np.random.default_rng(seed)
    n_select = int(round(nv_fraction * len(candidates)))
    chosen = set(np.asarray(rng.permutation(len(candidates))[:n_select]).tolist())
    for rank, (u, i) in enumerate(candidates):
        seg, _ = base[u][i]
        new = alignment.PhoneClass.NV if rank in chosen else alignment.PhoneClass.EXCLUDED
        base[u][i] = (seg, new)
    return base


def train_nasality_model(rows, train_cfg=None, mfcc_cfg=None, nv_fraction=0.3, log_fn=None):
    """Train the 4-class nasality model from an aligned manifest."""
    if train_cfg is None:
        train_cfg = nn.TrainConfig()
    if mfcc_cfg is None:
        mfcc_cfg = features.MfccConfig()
    x, y = build_nasality_dataset(rows, mfcc_cfg, nv_fraction=nv_fraction, seed=train_cfg.seed)
    return nn.train(
        x,
        y,
        nn.NASALITY_LAYERS,
        train_cfg,
        feature_config_hash=mfcc_cfg.hash32(),
        log_fn=log_fn,
    )
