"""
Module de balayage en alpha.
Pour chaque score et chaque taux de non-couverture : calibration sur le lot de
calibration, évaluation (QWK, couverture, taille moyenne) sur le lot de réglage.
"""

import logging
from typing import Sequence

import numpy as np
import pandas as pd

from src.conformal import calibrate_scores, check_alpha, coverage_from_mask, mask_from_scores
from src.core import LabeledBatch, PredictionSet
from src.decode import decode_mean
from src.metrics import qwk
from src.scores import ScoreKind, gold_scores, score_matrix

logger = logging.getLogger(__name__)

DEFAULT_ALPHA_GRID = (0.05, 0.10, 0.15, 0.20, 0.30, 0.40, 0.50)
SWEEP_COLUMNS = ["kind", "alpha", "qwk", "coverage", "avg_set_size"]


def alpha_sweep(
    cal: LabeledBatch,
    tune: LabeledBatch,
    kinds: Sequence[ScoreKind],
    alphas: Sequence[float] = DEFAULT_ALPHA_GRID,
) -> pd.DataFrame:
    """
    Table du balayage, une ligne par couple (score, alpha).

    Args:
        cal: Lot de calibration annoté
        tune: Lot de réglage annoté
        kinds: Scores à comparer
        alphas: Grille de taux de non-couverture, chacun dans (0, 1)

    Returns:
        DataFrame de colonnes kind, alpha, qwk, coverage, avg_set_size
    """
    alphas = [check_alpha(alpha) for alpha in alphas]
    cal_golds = cal.require_golds()
    tune_golds = tune.require_golds()
    tune_probs = tune.prob_matrix
    rows = []
    for kind in kinds:
        cal_scores = gold_scores(kind, cal.prob_matrix, cal_golds)
        tune_scores = score_matrix(kind, tune_probs)
        for alpha in alphas:
            threshold = calibrate_scores(cal_scores, kind, alpha)
            mask = mask_from_scores(tune_scores, threshold.tau_hat, tune_probs)
            points = [
                decode_mean(PredictionSet.from_probabilities(np.flatnonzero(row) + 1, example.probs))
                for row, example in zip(mask, tune.examples)
            ]
            rows.append({
                "kind": kind.name,
                "alpha": alpha,
                "qwk": qwk(tune_golds, points, tune.k),
                "coverage": coverage_from_mask(mask, tune_golds),
                "avg_set_size": float(mask.sum(axis=1).mean()),
            })
            logger.debug("Balayage %s alpha=%s : %s", kind, alpha, rows[-1])
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def baseline_qwk(tune: LabeledBatch) -> float:
    """QWK de la ligne de base argmax sur le lot de réglage."""
    points = np.argmax(tune.prob_matrix, axis=1) + 1
    return qwk(tune.require_golds(), points, tune.k)
