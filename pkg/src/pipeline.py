"""
Module des chaînes de traitement.
Relie calibration, ensembles de prédiction et décodage, pour un modèle seul ou
pour un ensemble de modèles (moyenne des probabilités ou vote).
"""

import logging
from enum import Enum
from typing import List, Sequence

import numpy as np

from src.conformal import CalibratedThreshold, calibrate, membership_mask, predict_sets
from src.core import Example, LabeledBatch, PredictionSet
from src.decode import (
    DecodedExample,
    Decoder,
    decode_point,
    ensemble_average,
    ensemble_vote,
)
from src.exceptions import ConfigError, IdMismatchError, MixedKError
from src.scores import ScoreKind

logger = logging.getLogger(__name__)


class EnsembleMode(str, Enum):
    """Modes de combinaison de plusieurs modèles."""

    NONE = "none"
    AVERAGE = "average"
    VOTE = "vote"


def align_batches(batches: Sequence[LabeledBatch]) -> List[LabeledBatch]:
    """
    Réordonne chaque lot selon les identifiants du premier.

    Raises:
        IdMismatchError: si les lots n'ont pas les mêmes identifiants
        MixedKError: si les lots n'ont pas le même k
    """
    reference = batches[0]
    aligned = [reference]
    for position, batch in enumerate(batches[1:], start=2):
        if batch.k != reference.k:
            raise MixedKError(f"entrée {position}: k={batch.k}, {reference.k} attendu")
        index = {example.id: i for i, example in enumerate(batch.examples)}
        if set(index) != set(reference.ids):
            missing = sorted(set(reference.ids) ^ set(index))
            raise IdMismatchError(
                f"entrée {position}: {len(missing)} identifiant(s) non alignés, dont {missing[0]}"
            )
        aligned.append(batch.subset([index[i] for i in reference.ids]))
    return aligned


def average_batches(batches: Sequence[LabeledBatch]) -> LabeledBatch:
    """Lot dont chaque distribution est la moyenne des distributions alignées."""
    aligned = align_batches(batches)
    examples = []
    for rows in zip(*(batch.examples for batch in aligned)):
        first = rows[0]
        gold = next((row.gold for row in rows if row.gold is not None), None)
        examples.append(
            Example(
                id=first.id,
                probs=ensemble_average([row.probs for row in rows]),
                gold=gold,
                doc_id=first.doc_id,
                groups=first.groups,
            )
        )
    logger.info("Moyenne de %d modèles sur %d exemples", len(aligned), len(examples))
    return LabeledBatch(tuple(examples), aligned[0].label_space)


def calibrate_inputs(
    batches: Sequence[LabeledBatch], kind: ScoreKind, alpha: float, mode: EnsembleMode
) -> List[CalibratedThreshold]:
    """
    Calibre un seuil par modèle, ou un seul seuil sur la moyenne des modèles.

    Le modèle moyenné est calibré comme n'importe quel modèle seul.
    """
    if mode is EnsembleMode.AVERAGE and len(batches) > 1:
        return [calibrate(average_batches(batches), kind, alpha)]
    if mode is EnsembleMode.NONE and len(batches) > 1:
        raise ConfigError("plusieurs entrées demandent --ensemble average ou vote")
    return [calibrate(batch, kind, alpha) for batch in batches]


class ConformalPipeline:
    """Ensembles conformes puis décodage pour un lot."""

    def __init__(self, threshold: CalibratedThreshold, decoder: Decoder = Decoder.CP_MEAN):
        """
        Args:
            threshold: Seuil calibré (porte aussi le score utilisé)
            decoder: Décodeur appliqué à chaque ensemble
        """
        self.threshold = threshold
        self.decoder = Decoder(decoder)

    def run(self, batch: LabeledBatch) -> List[DecodedExample]:
        """
        Décode tout un lot.

        Returns:
            Un DecodedExample par exemple, dans l'ordre du lot
        """
        sets = predict_sets(self.threshold, batch)
        baselines = np.argmax(batch.prob_matrix, axis=1) + 1 if len(batch) else []
        decoded = []
        for example, prediction_set, baseline in zip(batch.examples, sets, baselines):
            point = decode_point(self.decoder, prediction_set, int(baseline), gold=example.gold)
            decoded.append(DecodedExample(example.id, point, prediction_set, int(baseline)))
        return decoded


def run_vote(
    batches: Sequence[LabeledBatch],
    thresholds: Sequence[CalibratedThreshold],
    decoder: Decoder = Decoder.CP_MEAN,
) -> List[DecodedExample]:
    """
    Chaîne complète par modèle puis vote sur les étiquettes décodées.

    L'ensemble émis est l'union des ensembles des modèles ; ses poids sont la
    moyenne des distributions renormalisée sur cette union.
    """
    aligned = align_batches(batches)
    if len(thresholds) == 1:
        thresholds = list(thresholds) * len(aligned)
    if len(thresholds) != len(aligned):
        raise ConfigError("il faut un seuil par entrée, ou un seul seuil partagé")
    runs = [ConformalPipeline(t, decoder).run(b) for t, b in zip(thresholds, aligned)]
    masks = [membership_mask(t, b.prob_matrix) for t, b in zip(thresholds, aligned)]
    union = np.logical_or.reduce(masks)
    decoded = []
    for i, rows in enumerate(zip(*(batch.examples for batch in aligned))):
        mean = ensemble_average([row.probs for row in rows])
        members = np.flatnonzero(union[i]) + 1
        decoded.append(
            DecodedExample(
                id=rows[0].id,
                point=ensemble_vote(run[i].point for run in runs),
                set=PredictionSet.from_probabilities(members, mean),
                baseline_point=ensemble_vote(run[i].baseline_point for run in runs),
            )
        )
    return decoded


def run_inputs(
    batches: Sequence[LabeledBatch],
    thresholds: Sequence[CalibratedThreshold],
    decoder: Decoder,
    mode: EnsembleMode,
) -> List[DecodedExample]:
    """Point d'entrée commun : modèle seul, moyenne ou vote."""
    if mode is EnsembleMode.VOTE:
        return run_vote(batches, thresholds, decoder)
    if len(batches) > 1:
        if mode is not EnsembleMode.AVERAGE:
            raise ConfigError("plusieurs entrées demandent --ensemble average ou vote")
        batch = average_batches(batches)
    else:
        batch = batches[0]
    return ConformalPipeline(thresholds[0], decoder).run(batch)


def merged_batch(batches: Sequence[LabeledBatch]) -> LabeledBatch:
    """Lot portant les métadonnées (références, documents, groupes) des entrées."""
    if len(batches) == 1:
        return batches[0]
    return average_batches(batches)
