"""
Module de prédiction conforme par découpage.
Calibration du seuil (statistique d'ordre ⌈(n+1)(1-α)⌉) et construction des
ensembles C(x) = {y : s(x, y) <= τ̂}.
"""

import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.core import LabeledBatch, PredictionSet, ProbabilityVector
from src.exceptions import ConfigError, EmptyBatchError, ParseError
from src.scores import ScoreKind, gold_scores, score_matrix

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.10


def check_alpha(alpha: float) -> float:
    """Valide un taux de non-couverture dans (0, 1)."""
    try:
        alpha = float(alpha)
    except (TypeError, ValueError):
        raise ConfigError(f"alpha invalide : {alpha!r}") from None
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha doit être dans (0, 1) (reçu {alpha!r})")
    return alpha


def quantile_index(n: int, alpha: float) -> int:
    """
    Rang 1-based ⌈(n+1)(1-α)⌉ de la statistique d'ordre retenue.

    Alpha est lu via sa représentation décimale la plus courte, ce qui rend le
    calcul exact (n=9, α=0.1 donne 9 et non 10).
    """
    value = (n + 1) * (1 - Fraction(repr(float(alpha))))
    return math.ceil(value)


@dataclass(frozen=True)
class CalibrationRecord:
    """Scores de calibration à l'étiquette de référence, score utilisé et alpha."""

    scores: Tuple[float, ...]
    kind: ScoreKind
    alpha: float
    n: int

    def __post_init__(self):
        check_alpha(self.alpha)
        if self.n < 1:
            raise EmptyBatchError("la calibration demande au moins un exemple")
        if self.scores and len(self.scores) != self.n:
            raise ConfigError("n ne correspond pas au nombre de scores")
        if not all(math.isfinite(s) for s in self.scores):
            raise ConfigError("score de calibration non fini")


@dataclass(frozen=True)
class CalibratedThreshold:
    """Seuil τ̂ ajusté ; math.inf signifie que toutes les étiquettes sont admises."""

    tau_hat: float
    record: CalibrationRecord

    @property
    def kind(self) -> ScoreKind:
        return self.record.kind

    @property
    def alpha(self) -> float:
        return self.record.alpha

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.tau_hat)

    def to_dict(self) -> Dict[str, object]:
        return {
            "kind": self.kind.name,
            "lambda": self.kind.lam,
            "alpha": self.alpha,
            "n": self.record.n,
            "tau_hat": None if self.is_infinite else self.tau_hat,
        }

    def to_json(self) -> str:
        """Document JSON ; tau_hat null encode +∞. Les réels s'écrivent en repr (aller-retour exact)."""
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CalibratedThreshold":
        """
        Relit un seuil sérialisé par to_json.

        Raises:
            ParseError: si le document est illisible ou incomplet
        """
        try:
            data = json.loads(text)
            kind = ScoreKind.from_name(data["kind"], float(data.get("lambda", 0.01)))
            tau = data["tau_hat"]
            tau_hat = math.inf if tau is None else float(tau)
            record = CalibrationRecord((), kind, float(data["alpha"]), int(data["n"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"fichier de seuil invalide : {exc}") from exc
        return cls(tau_hat, record)


def calibrate_scores(scores: Sequence[float], kind: ScoreKind, alpha: float) -> CalibratedThreshold:
    """
    Ajuste τ̂ à partir des scores de calibration déjà calculés.

    Args:
        scores: Scores s(x_i, y_i) des n exemples de calibration
        kind: Score qui a produit ces valeurs
        alpha: Taux de non-couverture visé

    Returns:
        CalibratedThreshold
    """
    alpha = check_alpha(alpha)
    values = np.sort(np.asarray(scores, dtype=np.float64))
    n = int(values.size)
    if n == 0:
        raise EmptyBatchError("aucun score de calibration")
    index = quantile_index(n, alpha)
    tau_hat = float(values[index - 1]) if index <= n else math.inf
    record = CalibrationRecord(tuple(float(s) for s in scores), kind, alpha, n)
    return CalibratedThreshold(tau_hat, record)


def calibrate(batch: LabeledBatch, kind: ScoreKind, alpha: float) -> CalibratedThreshold:
    """
    Calibre le seuil conforme sur un lot annoté.

    Args:
        batch: Lot de calibration (références obligatoires)
        kind: Score de non-conformité
        alpha: Taux de non-couverture dans (0, 1)

    Returns:
        CalibratedThreshold

    Raises:
        EmptyBatchError: lot vide
        MissingGoldError: exemple sans référence
    """
    alpha = check_alpha(alpha)
    if len(batch) == 0:
        raise EmptyBatchError("lot de calibration vide")
    golds = batch.require_golds()
    threshold = calibrate_scores(gold_scores(kind, batch.prob_matrix, golds), kind, alpha)
    logger.info(
        "Seuil calibré : score=%s alpha=%s n=%d index=%d tau_hat=%r",
        kind, alpha, threshold.record.n, quantile_index(threshold.record.n, alpha), threshold.tau_hat,
    )
    return threshold


def raw_membership_mask(tau: CalibratedThreshold, probs: np.ndarray) -> np.ndarray:
    """Masque n×k des étiquettes de score <= τ̂, sans repli."""
    scores = score_matrix(tau.kind, probs)
    if tau.is_infinite:
        return np.ones(scores.shape, dtype=bool)
    return scores <= tau.tau_hat


def mask_from_scores(scores: np.ndarray, tau_hat: float, probs: np.ndarray) -> np.ndarray:
    """Seuillage de scores déjà calculés, avec repli sur {argmax} pour les lignes vides."""
    mask = np.ones(scores.shape, dtype=bool) if math.isinf(tau_hat) else scores <= tau_hat
    return _fallback(mask, probs)


def membership_mask(tau: CalibratedThreshold, probs: np.ndarray) -> np.ndarray:
    """Masque n×k des ensembles ; une ligne vide reçoit le singleton {argmax}."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    return _fallback(raw_membership_mask(tau, probs), probs)


def _fallback(mask: np.ndarray, probs: np.ndarray) -> np.ndarray:
    empty = ~mask.any(axis=1)
    if empty.any():
        rows = np.flatnonzero(empty)
        mask[rows, np.argmax(probs[rows], axis=1)] = True
    return mask


def predict_set(tau: CalibratedThreshold, p: ProbabilityVector) -> PredictionSet:
    """Construit C(x) et sa distribution renormalisée pour un exemple."""
    row = membership_mask(tau, p.probs)[0]
    return PredictionSet.from_probabilities(np.flatnonzero(row) + 1, p)


def predict_sets(tau: CalibratedThreshold, batch: LabeledBatch) -> List[PredictionSet]:
    """Ensembles de prédiction de tout un lot."""
    mask = membership_mask(tau, batch.prob_matrix)
    return [
        PredictionSet.from_probabilities(np.flatnonzero(mask[i]) + 1, example.probs)
        for i, example in enumerate(batch.examples)
    ]


def coverage_from_mask(mask: np.ndarray, golds: np.ndarray) -> float:
    """Fraction des lignes dont la référence (1-based) est dans le masque."""
    golds = np.asarray(golds, dtype=np.int64)
    return float(mask[np.arange(mask.shape[0]), golds - 1].mean())


def empirical_coverage(tau: CalibratedThreshold, batch: LabeledBatch) -> float:
    """
    Couverture empirique : part des exemples dont la référence est dans C(x).

    Raises:
        MissingGoldError: exemple sans référence
        EmptyBatchError: lot vide
    """
    if len(batch) == 0:
        raise EmptyBatchError("lot vide")
    golds = batch.require_golds()
    return coverage_from_mask(membership_mask(tau, batch.prob_matrix), golds)


def average_set_size(tau: CalibratedThreshold, batch: LabeledBatch) -> float:
    """Taille moyenne des ensembles de prédiction du lot."""
    if len(batch) == 0:
        raise EmptyBatchError("lot vide")
    return float(membership_mask(tau, batch.prob_matrix).sum(axis=1).mean())
