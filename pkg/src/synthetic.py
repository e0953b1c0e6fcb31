"""
Module de données synthétiques.
Génère des distributions a posteriori échangeables (loi a priori à longue
traîne, bruit de température) et simule la couverture sur de nombreuses graines.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import softmax

from src.conformal import calibrate_scores, check_alpha, coverage_from_mask, mask_from_scores
from src.core import LabeledBatch
from src.scores import ScoreKind, gold_scores, score_matrix

logger = logging.getLogger(__name__)

# Effectifs par niveau du jeu de développement (19 niveaux, 7310 phrases)
DEV_SPLIT_COUNTS = (
    44, 68, 182, 78, 417, 189, 701, 613, 236, 1012,
    409, 1491, 349, 1072, 258, 114, 49, 13, 15,
)
# Partie calibration publiée, classe par classe. Ces lignes totalisent 4987 alors que
# la ligne de total publiée indique 4981 / 2329.
DEV_CAL_COUNTS = (
    32, 49, 126, 55, 284, 130, 476, 417, 162, 686,
    279, 1010, 239, 727, 177, 80, 36, 10, 12,
)

DOMAINS = ("Arts & Humanities", "STEM", "Social Sciences")
DOMAIN_WEIGHTS = (1625, 163, 535)
TEXT_CLASSES = ("Foundational", "Advanced", "Specialized")


@dataclass(frozen=True)
class SyntheticConfig:
    """Paramètres du générateur de distributions."""

    k: int = 19
    shift_sd: float = 1.2
    width: float = 1.5
    noise_sd: float = 0.5
    temperature_sd: float = 0.35
    sentences_per_doc: int = 4


def class_prior(k: int) -> np.ndarray:
    """Loi a priori des niveaux : forme du jeu de développement pour k=19, uniforme sinon."""
    if k == len(DEV_SPLIT_COUNTS):
        counts = np.asarray(DEV_SPLIT_COUNTS, dtype=np.float64)
        return counts / counts.sum()
    return np.full(k, 1.0 / k)


def sample_golds(n: int, rng: np.random.Generator, k: int) -> np.ndarray:
    """Tire n niveaux de référence selon class_prior(k)."""
    return rng.choice(np.arange(1, k + 1), size=n, p=class_prior(k))


def sample_posteriors(
    golds: np.ndarray, rng: np.random.Generator, config: SyntheticConfig = SyntheticConfig()
) -> np.ndarray:
    """
    Distributions a posteriori bruitées autour de chaque référence.

    Le centre de chaque distribution est décalé aléatoirement de la référence,
    puis les logits sont bruités et divisés par une température tirée par exemple.
    """
    golds = np.asarray(golds, dtype=np.float64)
    labels = np.arange(1, config.k + 1, dtype=np.float64)
    centers = golds + rng.normal(0.0, config.shift_sd, golds.size)
    logits = -((labels[None, :] - centers[:, None]) ** 2) / (2.0 * config.width ** 2)
    logits = logits + rng.normal(0.0, config.noise_sd, logits.shape)
    temperatures = np.exp(rng.normal(0.0, config.temperature_sd, golds.size))
    return softmax(logits / temperatures[:, None], axis=1)


def sample_arrays(
    n: int, rng: np.random.Generator, config: SyntheticConfig = SyntheticConfig()
) -> Tuple[np.ndarray, np.ndarray]:
    """Tire (probabilités n×k, références) de façon i.i.d."""
    golds = sample_golds(n, rng, config.k)
    return sample_posteriors(golds, rng, config), golds


def make_batch(
    n: int,
    seed: int,
    config: SyntheticConfig = SyntheticConfig(),
    golds: Optional[Sequence[int]] = None,
    models: int = 1,
) -> List[LabeledBatch]:
    """
    Lots synthétiques complets : identifiants, documents, domaine et classe de texte.

    Args:
        n: Nombre d'exemples (ignoré si golds est fourni)
        seed: Graine
        config: Paramètres du générateur
        golds: Références imposées (mélangées avec la graine)
        models: Nombre de modèles simulés partageant les mêmes références

    Returns:
        Liste de `models` lots alignés
    """
    rng = np.random.default_rng(seed)
    if golds is None:
        gold_array = sample_golds(n, rng, config.k)
    else:
        gold_array = rng.permutation(np.asarray(golds, dtype=np.int64))
    n = gold_array.size
    ids = [f"s{i:06d}" for i in range(n)]
    doc_ids = [f"d{i // config.sentences_per_doc:05d}" for i in range(n)]
    n_docs = (n + config.sentences_per_doc - 1) // config.sentences_per_doc
    weights = np.asarray(DOMAIN_WEIGHTS, dtype=np.float64)
    domains = rng.choice(len(DOMAINS), size=n_docs, p=weights / weights.sum())
    text_classes = rng.choice(len(TEXT_CLASSES), size=n_docs)
    groups = [
        {"domain": DOMAINS[domains[i // config.sentences_per_doc]],
         "text_class": TEXT_CLASSES[text_classes[i // config.sentences_per_doc]]}
        for i in range(n)
    ]
    batches = []
    for _ in range(models):
        probs = sample_posteriors(gold_array, rng, config)
        batches.append(LabeledBatch.from_arrays(probs, gold_array, ids, doc_ids, groups))
    return batches


def dev_split_golds() -> np.ndarray:
    """Références reproduisant exactement les effectifs du jeu de développement."""
    return np.repeat(np.arange(1, len(DEV_SPLIT_COUNTS) + 1), DEV_SPLIT_COUNTS)


def simulate_coverage(
    kinds: Sequence[ScoreKind],
    alphas: Sequence[float],
    n_cal: int,
    n_test: int,
    seeds: Sequence[int],
    config: SyntheticConfig = SyntheticConfig(),
) -> pd.DataFrame:
    """
    Simulation de Monte-Carlo de la couverture sur des tirages échangeables.

    Chaque graine tire un lot de calibration et un lot de test indépendants.

    Returns:
        DataFrame de colonnes seed, kind, alpha, coverage, avg_set_size
    """
    alphas = [check_alpha(alpha) for alpha in alphas]
    rows = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        cal_probs, cal_golds = sample_arrays(n_cal, rng, config)
        test_probs, test_golds = sample_arrays(n_test, rng, config)
        for kind in kinds:
            cal_scores = gold_scores(kind, cal_probs, cal_golds)
            test_scores = score_matrix(kind, test_probs)
            for alpha in alphas:
                threshold = calibrate_scores(cal_scores, kind, alpha)
                mask = mask_from_scores(test_scores, threshold.tau_hat, test_probs)
                rows.append({
                    "seed": int(seed),
                    "kind": kind.name,
                    "alpha": alpha,
                    "coverage": coverage_from_mask(mask, test_golds),
                    "avg_set_size": float(mask.sum(axis=1).mean()),
                })
    logger.info("Simulation : %d graines, %d cellules", len(seeds), len(rows))
    return pd.DataFrame(rows, columns=["seed", "kind", "alpha", "coverage", "avg_set_size"])


def summarize_simulation(frame: pd.DataFrame) -> pd.DataFrame:
    """Couverture et taille moyennes, et couverture minimale, par (score, alpha)."""
    summary = frame.groupby(["kind", "alpha"], sort=False).agg(
        mean_coverage=("coverage", "mean"),
        min_coverage=("coverage", "min"),
        mean_set_size=("avg_set_size", "mean"),
    ).reset_index()
    summary["target"] = 1.0 - summary["alpha"]
    return summary
