"""
Module des scores de non-conformité.
Naïf (complément de la probabilité), APS (masse cumulée jusqu'au rang de
l'étiquette) et RAPS (APS plus une pénalité linéaire en rang).
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Tuple

import numpy as np

from src.core import ProbabilityVector
from src.exceptions import ConfigError, UnknownLabelError

DEFAULT_LAMBDA = 0.01


class ScoreVariant(str, Enum):
    """Variantes de score disponibles."""

    NAIVE = "naive"
    APS = "aps"
    RAPS = "raps"


@dataclass(frozen=True)
class ScoreKind:
    """Choix du score et de sa régularisation (lambda, utilisé par RAPS seulement)."""

    variant: ScoreVariant = ScoreVariant.APS
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        try:
            variant = ScoreVariant(self.variant)
        except ValueError:
            raise ConfigError(f"score inconnu : {self.variant!r} (naive, aps ou raps)") from None
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ConfigError(f"lambda doit être >= 0 (reçu {self.lam})")
        object.__setattr__(self, "variant", variant)
        object.__setattr__(self, "lam", float(self.lam))

    @classmethod
    def from_name(cls, name: str, lam: float = DEFAULT_LAMBDA) -> "ScoreKind":
        """Construit un ScoreKind depuis son nom de configuration."""
        return cls(str(name).lower(), lam)

    @property
    def name(self) -> str:
        return self.variant.value

    def matches(self, other: "ScoreKind") -> bool:
        """Même variante, et même lambda quand la variante est RAPS."""
        if self.variant is not other.variant:
            return False
        return self.variant is not ScoreVariant.RAPS or self.lam == other.lam

    def to_dict(self) -> Dict[str, object]:
        return {"kind": self.name, "lambda": self.lam}

    def __str__(self) -> str:
        if self.variant is ScoreVariant.RAPS:
            return f"raps(lambda={self.lam!r})"
        return self.name


ALL_KINDS: Tuple[ScoreKind, ...] = (
    ScoreKind(ScoreVariant.NAIVE),
    ScoreKind(ScoreVariant.APS),
    ScoreKind(ScoreVariant.RAPS),
)


@dataclass(frozen=True)
class SortedRanking:
    """Classement des étiquettes par probabilité décroissante."""

    order: Tuple[int, ...]
    rank: Dict[int, int]
    cumprob: Tuple[float, ...]


def ranking_arrays(probs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Classe chaque ligne d'une matrice n×k par probabilité décroissante.

    Les égalités sont départagées par étiquette croissante (tri stable).

    Args:
        probs: Matrice n×k des probabilités

    Returns:
        (order, ranks, cumsum) : indices 0-based triés, rang 1-based de chaque
        colonne, masse cumulée par rang
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    order = np.argsort(-probs, axis=1, kind="stable")
    sorted_probs = np.take_along_axis(probs, order, axis=1)
    cumsum = np.cumsum(sorted_probs, axis=1)
    ranks = np.empty_like(order)
    positions = np.broadcast_to(np.arange(1, probs.shape[1] + 1), order.shape)
    np.put_along_axis(ranks, order, positions, axis=1)
    return order, ranks, cumsum


def rank(p: ProbabilityVector) -> SortedRanking:
    """Retourne le classement π, les rangs r(y) et la masse cumulée par rang."""
    order, ranks, cumsum = ranking_arrays(p.probs)
    labels = tuple(int(i) + 1 for i in order[0])
    return SortedRanking(
        order=labels,
        rank={y: int(ranks[0, y - 1]) for y in range(1, p.k + 1)},
        cumprob=tuple(float(c) for c in cumsum[0]),
    )


def score_matrix(kind: ScoreKind, probs: np.ndarray) -> np.ndarray:
    """
    Calcule les scores de toutes les étiquettes pour une matrice de probabilités.

    Args:
        kind: Score à appliquer
        probs: Matrice n×k

    Returns:
        Matrice n×k ; la colonne j contient le score de l'étiquette j+1
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    if kind.variant is ScoreVariant.NAIVE:
        return 1.0 - probs
    _, ranks, cumsum = ranking_arrays(probs)
    aps = np.take_along_axis(cumsum, ranks - 1, axis=1)
    if kind.variant is ScoreVariant.APS:
        return aps
    return aps + kind.lam * ranks


def score_all(kind: ScoreKind, p: ProbabilityVector) -> np.ndarray:
    """Scores des k étiquettes d'un exemple (un seul classement par appel)."""
    return score_matrix(kind, p.probs)[0]


def score(kind: ScoreKind, p: ProbabilityVector, y: int) -> float:
    """
    Score de non-conformité s(x, y).

    Raises:
        UnknownLabelError: si y est hors de 1..k
    """
    if not 1 <= y <= p.k:
        raise UnknownLabelError(f"étiquette {y} hors de 1..{p.k}")
    return float(score_all(kind, p)[y - 1])


def gold_scores(kind: ScoreKind, probs: np.ndarray, golds: np.ndarray) -> np.ndarray:
    """Score de chaque ligne à son étiquette de référence (1-based)."""
    scores = score_matrix(kind, probs)
    return scores[np.arange(scores.shape[0]), np.asarray(golds, dtype=np.int64) - 1]
