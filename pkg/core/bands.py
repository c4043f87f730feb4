# core/bands.py
"""Quantile score bands shared by Augmentation and Parceling; right-closed."""

from dataclasses import dataclass
from typing import List

import numpy as np

from core.errors import BandError


@dataclass(frozen=True, eq=False)
class ScoreBands:
    k: int
    edges: np.ndarray
    financed_count: np.ndarray
    rejected_count: np.ndarray
    financed_default_rate: np.ndarray  # NaN where a band has no financed record
    acceptance: np.ndarray  # NaN where a band is empty

    @property
    def zero_acceptance(self) -> np.ndarray:
        return self.financed_count == 0

    @property
    def total(self) -> np.ndarray:
        return self.financed_count + self.rejected_count

    def assign(self, scores: np.ndarray) -> np.ndarray:
        return np.digitize(np.asarray(scores, dtype=float), self.edges, right=True)

    def rows(self) -> List[dict]:
        return [
            {
                "band": b,
                "financed": int(self.financed_count[b]),
                "rejected": int(self.rejected_count[b]),
                "financed_default_rate": float(self.financed_default_rate[b]),
                "acceptance": float(self.acceptance[b]),
            }
            for b in range(self.k)
        ]


def make_score_bands(scores_all: np.ndarray, financed: np.ndarray, labels_f: np.ndarray, k: int = 10) -> ScoreBands:
    """Build k bands from scores of all applicants.

    `labels_f` are the labels of the financed applicants, in the order they
    appear in `scores_all`.
    """
    scores = np.asarray(scores_all, dtype=float).reshape(-1)
    f = np.asarray(financed, dtype=bool).reshape(-1)
    y_f = np.asarray(labels_f, dtype=float).reshape(-1)
    if k < 2:
        raise BandError("need at least 2 bands")
    if f.shape[0] != scores.shape[0]:
        raise BandError("financing mask and scores differ in length")
    if y_f.shape[0] != int(f.sum()):
        raise BandError("labels_f must hold one label per financed applicant")
    if np.unique(scores).size < k:
        raise BandError(f"k={k} bands exceed the number of distinct scores")
    edges = np.quantile(scores, np.arange(1, k) / k, method="linear")
    if np.any(np.diff(edges) <= 0):
        raise BandError(f"k={k} bands exceed the number of distinct score levels")

    band = np.digitize(scores, edges, right=True)
    band_f = band[f]
    fin = np.bincount(band_f, minlength=k)
    rej = np.bincount(band[~f], minlength=k)
    bad = np.bincount(band_f, weights=y_f, minlength=k)
    with np.errstate(invalid="ignore", divide="ignore"):
        default_rate = np.where(fin > 0, bad / np.maximum(fin, 1), np.nan)
        acceptance = np.where(fin + rej > 0, fin / np.maximum(fin + rej, 1), np.nan)
    edges.setflags(write=False)
    return ScoreBands(
        k=k,
        edges=edges,
        financed_count=fin,
        rejected_count=rej,
        financed_default_rate=default_rate,
        acceptance=acceptance,
    )
