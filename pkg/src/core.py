"""
Module des types de domaine partagés.
Espaces d'étiquettes ordonnées, vecteurs de probabilités, lots d'exemples et
ensembles de prédiction.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.exceptions import (
    AllZeroError,
    EmptySetError,
    InvalidProbabilityError,
    MissingGoldError,
    MixedKError,
    NegativeEntryError,
    ToolkitError,
    UnknownLabelError,
)

DEFAULT_K = 19
SUM_TOLERANCE = 1e-6
NEGATIVE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class LabelSpace:
    """Étiquettes ordonnées 1..k."""

    k: int = DEFAULT_K

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ToolkitError(f"k doit être un entier >= 2 (reçu {self.k})")

    @property
    def labels(self) -> range:
        """Retourne les étiquettes 1..k."""
        return range(1, self.k + 1)

    def contains(self, label: int) -> bool:
        """Indique si l'étiquette appartient à l'espace."""
        return 1 <= label <= self.k

    def check(self, label: int) -> int:
        """
        Valide une étiquette.

        Args:
            label: Étiquette à vérifier

        Returns:
            L'étiquette convertie en entier

        Raises:
            UnknownLabelError: si l'étiquette est hors de 1..k
        """
        if not self.contains(label):
            raise UnknownLabelError(f"étiquette {label} hors de 1..{self.k}")
        return int(label)


@dataclass(frozen=True, eq=False)
class ProbabilityVector:
    """Distribution p(y|x) sur les k étiquettes d'un exemple."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.probs, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 2:
            raise InvalidProbabilityError("un vecteur de probabilités doit avoir au moins 2 entrées")
        if not np.all(np.isfinite(arr)):
            raise InvalidProbabilityError("entrée non finie dans le vecteur de probabilités")
        if np.any(arr < 0):
            raise NegativeEntryError("entrée négative dans le vecteur de probabilités")
        total = float(arr.sum())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise InvalidProbabilityError(f"la somme des probabilités vaut {total!r}, pas 1")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def k(self) -> int:
        return int(self.probs.size)

    def p(self, label: int) -> float:
        """Retourne p(label|x) pour une étiquette 1-based."""
        return float(self.probs[label - 1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProbabilityVector):
            return NotImplemented
        return bool(np.array_equal(self.probs, other.probs))

    def __hash__(self) -> int:
        return hash(self.probs.tobytes())


def normalize(raw: Sequence[float]) -> ProbabilityVector:
    """
    Divise un vecteur brut par sa somme.

    Args:
        raw: k réels non négatifs

    Returns:
        ProbabilityVector dont la somme vaut 1

    Raises:
        NegativeEntryError: si une entrée est inférieure à -1e-12
        AllZeroError: si toutes les entrées sont nulles après écrêtage
    """
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidProbabilityError("le vecteur brut doit être unidimensionnel")
    if np.any(np.isnan(arr)):
        raise InvalidProbabilityError("valeur manquante dans le vecteur brut")
    if np.any(arr < -NEGATIVE_TOLERANCE):
        raise NegativeEntryError(f"entrée négative au-delà de -{NEGATIVE_TOLERANCE}")
    arr = np.clip(arr, 0.0, None)
    total = arr.sum()
    if not total > 0:
        raise AllZeroError("toutes les entrées sont nulles")
    return ProbabilityVector(arr / total)


def argmax_label(p: ProbabilityVector) -> int:
    """Retourne la plus petite étiquette de probabilité maximale."""
    # np.argmax renvoie la première occurrence du maximum
    return int(np.argmax(p.probs)) + 1


@dataclass(frozen=True)
class Example:
    """Un exemple : identifiant, distribution, référence et étiquettes de groupe."""

    id: str
    probs: ProbabilityVector
    gold: Optional[int] = None
    doc_id: Optional[str] = None
    groups: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.gold is not None:
            if not 1 <= self.gold <= self.probs.k:
                raise UnknownLabelError(
                    f"exemple {self.id}: référence {self.gold} hors de 1..{self.probs.k}"
                )
            object.__setattr__(self, "gold", int(self.gold))


@dataclass(frozen=True)
class LabeledBatch:
    """Lot ordonné d'exemples partageant le même espace d'étiquettes."""

    examples: Tuple[Example, ...]
    label_space: LabelSpace = field(default_factory=LabelSpace)

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        seen = set()
        for example in self.examples:
            if example.probs.k != self.label_space.k:
                raise MixedKError(
                    f"exemple {example.id}: {example.probs.k} probabilités, k={self.label_space.k} attendu"
                )
            if example.id in seen:
                raise ToolkitError(f"identifiant dupliqué dans le lot : {example.id}")
            seen.add(example.id)

    @classmethod
    def from_arrays(
        cls,
        probs: np.ndarray,
        golds: Optional[Sequence[Optional[int]]] = None,
        ids: Optional[Sequence[str]] = None,
        doc_ids: Optional[Sequence[Optional[str]]] = None,
        groups: Optional[Sequence[Mapping[str, str]]] = None,
    ) -> "LabeledBatch":
        """
        Construit un lot à partir d'une matrice n×k déjà normalisée.

        Args:
            probs: Matrice des probabilités, une ligne par exemple
            golds: Références optionnelles (1-based)
            ids: Identifiants, générés si absents
            doc_ids: Identifiants de documents optionnels
            groups: Étiquettes de groupe optionnelles

        Returns:
            LabeledBatch
        """
        probs = np.asarray(probs, dtype=np.float64)
        n, k = probs.shape
        ids = list(ids) if ids is not None else [f"ex-{i:06d}" for i in range(n)]
        examples = []
        for i in range(n):
            gold = None if golds is None or golds[i] is None else int(golds[i])
            examples.append(
                Example(
                    id=str(ids[i]),
                    probs=ProbabilityVector(probs[i]),
                    gold=gold,
                    doc_id=None if doc_ids is None else doc_ids[i],
                    groups=dict(groups[i]) if groups is not None else {},
                )
            )
        return cls(tuple(examples), LabelSpace(k))

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[Example]:
        return iter(self.examples)

    @property
    def k(self) -> int:
        return self.label_space.k

    @property
    def ids(self) -> List[str]:
        return [example.id for example in self.examples]

    @cached_property
    def prob_matrix(self) -> np.ndarray:
        """Matrice n×k des probabilités (lecture seule)."""
        if not self.examples:
            matrix = np.zeros((0, self.k))
        else:
            matrix = np.vstack([example.probs.probs for example in self.examples])
        matrix.setflags(write=False)
        return matrix

    @property
    def has_golds(self) -> bool:
        return all(example.gold is not None for example in self.examples)

    def require_golds(self) -> np.ndarray:
        """
        Retourne les références sous forme de tableau d'entiers.

        Raises:
            MissingGoldError: si un exemple n'a pas de référence
        """
        missing = [example.id for example in self.examples if example.gold is None]
        if missing:
            raise MissingGoldError(
                f"{len(missing)} exemple(s) sans référence, dont {missing[0]}"
            )
        return np.array([example.gold for example in self.examples], dtype=np.int64)

    def subset(self, indices: Sequence[int]) -> "LabeledBatch":
        """Retourne le sous-lot des indices donnés, dans l'ordre donné."""
        return LabeledBatch(tuple(self.examples[i] for i in indices), self.label_space)

    def group_tags(self) -> List[str]:
        """Noms des étiquettes de groupe présentes dans le lot, triés."""
        names = set()
        for example in self.examples:
            names.update(example.groups.keys())
        return sorted(names)


@dataclass(frozen=True)
class PredictionSet:
    """Ensemble conforme C(x) et distribution renormalisée p_C(y|x)."""

    members: Tuple[int, ...]
    renormalized: Mapping[int, float]

    def __post_init__(self):
        members = tuple(sorted(int(y) for y in self.members))
        if not members:
            raise EmptySetError("ensemble de prédiction vide")
        if len(set(members)) != len(members):
            raise ToolkitError("étiquettes dupliquées dans l'ensemble de prédiction")
        if set(self.renormalized.keys()) != set(members):
            raise ToolkitError("les poids renormalisés doivent couvrir exactement les membres")
        total = sum(self.renormalized.values())
        if any(w < 0 for w in self.renormalized.values()) or abs(total - 1.0) > 1e-9:
            raise InvalidProbabilityError(f"poids renormalisés invalides (somme {total!r})")
        object.__setattr__(self, "members", members)

    @classmethod
    def from_probabilities(cls, members: Sequence[int], p: ProbabilityVector) -> "PredictionSet":
        """
        Construit l'ensemble en renormalisant p(y|x) sur ses membres.

        Args:
            members: Étiquettes retenues
            p: Distribution complète de l'exemple

        Returns:
            PredictionSet
        """
        members = sorted(int(y) for y in members)
        if not members:
            raise EmptySetError("ensemble de prédiction vide")
        weights = np.array([p.probs[y - 1] for y in members], dtype=np.float64)
        denominator = weights.sum()
        if denominator > 0:
            weights = weights / denominator
        else:
            weights = np.full(len(members), 1.0 / len(members))
        return cls(tuple(members), {y: float(w) for y, w in zip(members, weights)})

    @property
    def size(self) -> int:
        return len(self.members)

    def __contains__(self, label: int) -> bool:
        return label in self.renormalized

    def as_label_string(self) -> str:
        """Format fichier : étiquettes séparées par '|'."""
        return "|".join(str(y) for y in self.members)

    def weights(self) -> Dict[str, float]:
        """Poids indexés par étiquette en texte (format JSON)."""
        return {str(y): self.renormalized[y] for y in self.members}
