"""Simple probes certifying what signal a corpus actually carries.

A generated corpus is only useful for the three-arm experiment if the
label is recoverable from weather but not from trivial image statistics.
These probes measure both: a logistic regression on the 8-component
weather vector, and a ranking of frames by mean pixel value.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from smokesense.data.manifest import ManifestEntry, read_manifest, MANIFEST_FILENAME
from smokesense.data.samples import align_weather_to_frames
from smokesense.data.sequences import load_fire_sequence
from smokesense.data.synthetic import WEATHER_DIRNAME
from smokesense.weather.store import SeriesStore


def rank_auc(scores, labels) -> float:
    """Area under the ROC curve by rank statistic (ties get average rank)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D arrays")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative labels")
    order = np.sort(scores)
    lo = np.searchsorted(order, scores, side="left")
    hi = np.searchsorted(order, scores, side="right")
    ranks = (lo + hi + 1) / 2.0  # average rank, 1-based
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def logistic_probe_auc(
    features: np.ndarray,
    labels,
    lr: float = 0.5,
    iters: int = 400,
    l2: float = 1e-3,
) -> float:
    """AUC of a full-batch gradient-descent logistic regression on the
    standardized features (fit and scored on the same data on purpose:
    the probe asks what signal exists, not how well it generalizes)."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError(f"features {x.shape} do not match labels {y.shape}")
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    x = np.where(sd > 0, (x - mean) / np.where(sd > 0, sd, 1.0), 0.0)
    n, d = x.shape
    w = np.zeros(d)
    b = 0.0
    for _ in range(iters):
        z = x @ w + b
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        g = p - y
        w -= lr * (x.T @ g / n + l2 * w)
        b -= lr * float(g.mean())
    return rank_auc(x @ w + b, y.astype(bool))


def corpus_probe_features(
    root: Path | str, entries: Sequence[ManifestEntry] | None = None, k: int = 3
):
    """Per-frame probe inputs across a corpus.

    Returns (weather_features (n, 8), pixel_means (n,), labels (n,)) over
    all frames of all fires, labels from the frame offsets.
    """
    root = Path(root)
    if entries is None:
        entries = read_manifest(root / MANIFEST_FILENAME)
    store = SeriesStore.from_dir(root / WEATHER_DIRNAME)
    weather_rows, pixel_means, labels = [], [], []
    for entry in entries:
        seq = load_fire_sequence(entry, root)
        vectors = align_weather_to_frames(seq, store.registry, store, stats=None, k=k)
        for frame, vec in zip(seq.frames, vectors):
            weather_rows.append(vec.values)
            pixel_means.append(float(frame.pixels.mean()))
            labels.append(frame.label)
    return (
        np.stack(weather_rows),
        np.array(pixel_means),
        np.array(labels, dtype=bool),
    )


def certify_discriminative_corpus(root: Path | str) -> dict[str, float]:
    """Both probe AUCs for a generated corpus, as a dict."""
    weather, pixel_mean, labels = corpus_probe_features(root)
    pm_auc = rank_auc(pixel_mean, labels)
    return {
        "weather_auc": logistic_probe_auc(weather, labels),
        # a probe is free to flip its sign, so score the better direction
        "pixel_mean_auc": max(pm_auc, 1.0 - pm_auc),
    }
