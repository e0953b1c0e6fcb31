"""
Module de décodage.
Transforme un ensemble de prédiction en une étiquette unique : moyenne
renormalisée arrondie, oracle, ensembles de modèles et agrégation par document.
"""

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from src.core import PredictionSet, ProbabilityVector
from src.exceptions import EmptyListError, EmptySetError, MissingGoldError, MixedKError


class Decoder(str, Enum):
    """Décodeurs disponibles."""

    ARGMAX = "argmax"
    CP_MEAN = "cp_mean"
    ORACLE = "oracle"


@dataclass(frozen=True)
class DecodedExample:
    """Résultat du décodage d'un exemple."""

    id: str
    point: int
    set: PredictionSet
    baseline_point: int


def round_half_up(value: float) -> int:
    """Arrondi au plus proche, les demi-entiers positifs vers le haut (8.5 -> 9)."""
    return int(math.floor(value + 0.5))


def in_set_mean(prediction_set: PredictionSet) -> float:
    """Espérance réelle Σ y·p_C(y|x) sur les membres."""
    return math.fsum(y * prediction_set.renormalized[y] for y in prediction_set.members)


def decode_mean(prediction_set: PredictionSet) -> int:
    """
    Moyenne a posteriori arrondie dans l'ensemble conforme.

    Args:
        prediction_set: Ensemble non vide avec ses poids renormalisés

    Returns:
        Étiquette décodée, dans [min membre, max membre]

    Raises:
        EmptySetError: si l'ensemble est vide
    """
    if not prediction_set.members:
        raise EmptySetError("impossible de décoder un ensemble vide")
    point = round_half_up(in_set_mean(prediction_set))
    lo, hi = prediction_set.members[0], prediction_set.members[-1]
    return min(max(point, lo), hi)


def decode_oracle(prediction_set: PredictionSet, gold: int, fallback: int) -> int:
    """Référence si elle est dans l'ensemble, sinon l'étiquette de repli."""
    return int(gold) if gold in prediction_set else int(fallback)


def ensemble_average(ps: Sequence[ProbabilityVector]) -> ProbabilityVector:
    """
    Moyenne arithmétique de plusieurs distributions d'un même exemple.

    La somme colonne par colonne utilise math.fsum : le résultat ne dépend pas
    de l'ordre des modèles.

    Raises:
        EmptyListError: liste vide
        MixedKError: tailles différentes
    """
    if not ps:
        raise EmptyListError("aucune distribution à moyenner")
    k = ps[0].k
    if any(p.k != k for p in ps):
        raise MixedKError("distributions de tailles différentes")
    stacked = np.vstack([p.probs for p in ps])
    mean = np.array([math.fsum(column) for column in stacked.T]) / len(ps)
    return ProbabilityVector(mean)


def ensemble_vote(points: Iterable[int]) -> int:
    """
    Étiquette la plus fréquente.

    Entre ex aequo, on garde la plus proche de la moyenne des ex aequo, puis la
    plus petite.

    Raises:
        EmptyListError: liste vide
    """
    counts = Counter(int(y) for y in points)
    if not counts:
        raise EmptyListError("aucun vote")
    best = max(counts.values())
    tied = sorted(y for y, c in counts.items() if c == best)
    center = sum(tied) / len(tied)
    return min(tied, key=lambda y: (abs(y - center), y))


def document_level(points: Iterable[Tuple[str, int]]) -> Dict[str, int]:
    """
    Niveau d'un document : niveau maximal prédit parmi ses phrases.

    Args:
        points: Couples (doc_id, étiquette)

    Returns:
        Dictionnaire doc_id -> étiquette, trié par doc_id

    Raises:
        EmptyListError: liste vide
    """
    levels: Dict[str, int] = {}
    for doc_id, label in points:
        label = int(label)
        if doc_id not in levels or label > levels[doc_id]:
            levels[doc_id] = label
    if not levels:
        raise EmptyListError("aucune phrase à agréger")
    return {doc_id: levels[doc_id] for doc_id in sorted(levels)}


def decode_point(
    decoder: Decoder,
    prediction_set: PredictionSet,
    baseline: int,
    gold: Optional[int] = None,
    fallback: Optional[int] = None,
) -> int:
    """Applique le décodeur choisi à un ensemble."""
    if decoder is Decoder.ARGMAX:
        return int(baseline)
    point = decode_mean(prediction_set)
    if decoder is Decoder.ORACLE:
        if gold is None:
            raise MissingGoldError("le décodeur oracle demande la référence")
        return decode_oracle(prediction_set, gold, point if fallback is None else fallback)
    return point
