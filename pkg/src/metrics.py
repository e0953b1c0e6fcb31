"""
Module des métriques ordinales.
QWK, exactitude, exactitude ±1, distance moyenne, exactitudes grossières,
taux d'échec de couverture par groupe et redistribution des erreurs.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix

from src.core import PredictionSet
from src.decode import document_level
from src.exceptions import (
    ConfigError,
    EmptyInputError,
    LengthMismatchError,
    MissingGoldError,
    ParseError,
    UnknownLabelError,
)

logger = logging.getLogger(__name__)

COARSE_NAMES = ("acc7", "acc5", "acc3")
OVERALL_KEY = "__all__"
SHRINK_BUCKETS = ("1", "2", "3", "4+")


def _check_pair(golds: Sequence[int], preds: Sequence[int], k: int) -> Tuple[np.ndarray, np.ndarray]:
    golds = np.asarray(golds, dtype=np.int64).ravel()
    preds = np.asarray(preds, dtype=np.int64).ravel()
    if golds.size != preds.size:
        raise LengthMismatchError(f"{golds.size} références pour {preds.size} prédictions")
    if golds.size == 0:
        raise EmptyInputError("aucune observation à évaluer")
    for name, values in (("référence", golds), ("prédiction", preds)):
        if values.min() < 1 or values.max() > k:
            raise UnknownLabelError(f"{name} hors de 1..{k}")
    return golds, preds


def qwk_bruteforce(golds: Sequence[int], preds: Sequence[int], k: int) -> float:
    """Kappa pondéré quadratique par double boucle sur la table de contingence k×k."""
    golds, preds = _check_pair(golds, preds, k)
    n = len(golds)
    observed = [[0] * k for _ in range(k)]
    for g, p in zip(golds.tolist(), preds.tolist()):
        observed[g - 1][p - 1] += 1
    hist_gold = [sum(observed[i]) for i in range(k)]
    hist_pred = [sum(observed[i][j] for i in range(k)) for j in range(k)]
    numerator = 0.0
    denominator = 0.0
    for i in range(k):
        for j in range(k):
            weight = (i - j) ** 2 / (k - 1) ** 2
            numerator += weight * observed[i][j]
            denominator += weight * hist_gold[i] * hist_pred[j] / n
    if denominator == 0:
        return 1.0
    return 1.0 - numerator / denominator


class KappaAccumulator:
    """Table de contingence cumulable ; les tables de plusieurs fragments s'additionnent."""

    def __init__(self, k: int):
        """
        Args:
            k: Nombre d'étiquettes ordonnées
        """
        self.k = int(k)
        self.table = np.zeros((self.k, self.k), dtype=np.int64)

    def update(self, golds: Sequence[int], preds: Sequence[int]) -> "KappaAccumulator":
        """Ajoute des couples (référence, prédiction)."""
        golds, preds = _check_pair(golds, preds, self.k)
        self.table += confusion_matrix(golds, preds, labels=np.arange(1, self.k + 1))
        return self

    def merge(self, other: "KappaAccumulator") -> "KappaAccumulator":
        """Fusionne un autre accumulateur de même k."""
        if other.k != self.k:
            raise ConfigError("impossible de fusionner des tables de k différents")
        self.table += other.table
        return self

    @property
    def n(self) -> int:
        return int(self.table.sum())

    def value(self) -> float:
        """
        Kappa pondéré quadratique.

        Returns:
            1 - Σ w·O / Σ w·E ; 1.0 si le dénominateur est nul

        Raises:
            EmptyInputError: table vide
        """
        n = self.n
        if n == 0:
            raise EmptyInputError("aucune observation à évaluer")
        observed = self.table.astype(np.float64)
        expected = np.outer(observed.sum(axis=1), observed.sum(axis=0)) / n
        idx = np.arange(self.k)
        weights = (idx[:, None] - idx[None, :]) ** 2 / (self.k - 1) ** 2
        numerator = float((weights * observed).sum())
        denominator = float((weights * expected).sum())
        if denominator == 0:
            return 1.0
        return 1.0 - numerator / denominator


def qwk(golds: Sequence[int], preds: Sequence[int], k: int) -> float:
    """Kappa pondéré quadratique (poids (i-j)²/(k-1)²)."""
    return KappaAccumulator(k).update(golds, preds).value()


def basic_metrics(golds: Sequence[int], preds: Sequence[int], k: int) -> Tuple[float, float, float]:
    """
    Exactitude, exactitude ±1 et distance absolue moyenne.

    Returns:
        (acc, adj_acc, dist)
    """
    golds, preds = _check_pair(golds, preds, k)
    gap = np.abs(golds - preds)
    return float((gap == 0).mean()), float((gap <= 1).mean()), float(gap.mean())


@dataclass(frozen=True)
class CoarseMap:
    """Regroupement des niveaux fins en classes contiguës."""

    name: str
    mapping: Mapping[int, int]

    def __post_init__(self):
        labels = sorted(self.mapping)
        if not labels or labels != list(range(1, len(labels) + 1)):
            raise ConfigError(f"{self.name}: la table doit couvrir 1..k sans trou")
        bins = [self.mapping[y] for y in labels]
        if any(b2 < b1 for b1, b2 in zip(bins, bins[1:])):
            raise ConfigError(f"{self.name}: les classes doivent être des intervalles contigus")

    @property
    def k(self) -> int:
        return len(self.mapping)

    def apply(self, labels: Sequence[int]) -> np.ndarray:
        lookup = np.zeros(self.k + 1, dtype=np.int64)
        for fine, coarse in self.mapping.items():
            lookup[fine] = coarse
        return lookup[np.asarray(labels, dtype=np.int64)]


def load_coarse_maps(path: Path) -> Dict[str, CoarseMap]:
    """
    Charge les tables acc7/acc5/acc3 depuis un fichier JSON.

    Les clés commençant par '_' sont des commentaires.

    Raises:
        ParseError: fichier illisible
        ConfigError: table manquante ou invalide
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"tables grossières illisibles ({path}): {exc}") from exc
    maps = {}
    for name in COARSE_NAMES:
        if name not in data:
            raise ConfigError(f"{path}: table {name} absente")
        try:
            mapping = {int(fine): int(coarse) for fine, coarse in data[name].items()}
        except (AttributeError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: table {name} invalide ({exc})") from exc
        maps[name] = CoarseMap(name, mapping)
    return maps


def coarse_accuracy(golds: Sequence[int], preds: Sequence[int], cmap: CoarseMap) -> float:
    """Part des exemples dont référence et prédiction tombent dans la même classe grossière."""
    golds, preds = _check_pair(golds, preds, cmap.k)
    return float((cmap.apply(golds) == cmap.apply(preds)).mean())


def failure_rates(
    sets: Sequence[PredictionSet],
    golds: Sequence[Optional[int]],
    groups: Mapping[str, Optional[str]],
    ids: Sequence[str],
) -> Dict[str, float]:
    """
    Taux d'échec de couverture par valeur d'étiquette de groupe.

    Args:
        sets: Ensembles de prédiction
        golds: Références alignées sur les ensembles
        groups: Identifiant -> valeur de l'étiquette (absent ou None : hors groupe)
        ids: Identifiants alignés sur les ensembles

    Returns:
        Valeur -> taux d'échec, plus le taux global sous OVERALL_KEY

    Raises:
        MissingGoldError: référence absente
    """
    if len(sets) != len(golds) or len(sets) != len(ids):
        raise LengthMismatchError("ensembles, références et identifiants doivent être alignés")
    if any(g is None for g in golds):
        raise MissingGoldError("taux d'échec impossible sans référence")
    if not sets:
        raise EmptyInputError("aucun ensemble à évaluer")
    frame = pd.DataFrame({
        "group": [groups.get(i) for i in ids],
        "failed": [g not in s for s, g in zip(sets, golds)],
    })
    rates = frame.dropna(subset=["group"]).groupby("group")["failed"].mean()
    result = {str(tag): float(rate) for tag, rate in rates.sort_index().items()}
    result[OVERALL_KEY] = float(frame["failed"].mean())
    return result


@dataclass(frozen=True)
class RedistributionReport:
    """Comptabilité des erreurs créées et réduites par le décodage conforme."""

    n: int
    newly_wrong: int
    newly_wrong_within_one: float
    improved: int
    improvement_histogram: Dict[str, float]
    worsened: int

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def redistribution(
    golds: Sequence[int], baseline_preds: Sequence[int], cp_preds: Sequence[int]
) -> RedistributionReport:
    """
    Compare les erreurs de la ligne de base (argmax) et du décodage conforme.

    Raises:
        LengthMismatchError: listes de longueurs différentes
    """
    golds = np.asarray(golds, dtype=np.int64)
    baseline = np.asarray(baseline_preds, dtype=np.int64)
    cp = np.asarray(cp_preds, dtype=np.int64)
    if not golds.size == baseline.size == cp.size:
        raise LengthMismatchError("références, ligne de base et prédictions doivent être alignées")
    base_gap = np.abs(baseline - golds)
    cp_gap = np.abs(cp - golds)

    newly = (base_gap == 0) & (cp_gap != 0)
    within_one = float((cp_gap[newly] == 1).mean()) if newly.any() else 0.0

    improved = cp_gap < base_gap
    shrink = (base_gap - cp_gap)[improved]
    histogram = {bucket: 0.0 for bucket in SHRINK_BUCKETS}
    if shrink.size:
        for bucket, count in zip(SHRINK_BUCKETS, (
            (shrink == 1).sum(), (shrink == 2).sum(), (shrink == 3).sum(), (shrink >= 4).sum(),
        )):
            histogram[bucket] = float(count / shrink.size)

    worsened = (cp_gap > base_gap) & (base_gap > 0)
    return RedistributionReport(
        n=int(golds.size),
        newly_wrong=int(newly.sum()),
        newly_wrong_within_one=within_one,
        improved=int(improved.sum()),
        improvement_histogram=histogram,
        worsened=int(worsened.sum()),
    )


@dataclass(frozen=True)
class DocumentReport:
    """Métriques au niveau document (référence = niveau maximal des phrases)."""

    n_docs: int
    qwk: float
    acc: float
    adj_acc: float
    dist: float


@dataclass(frozen=True)
class EvaluationReport:
    """Ensemble complet des métriques d'une évaluation."""

    n: int
    qwk: float
    acc: float
    adj_acc: float
    dist: float
    acc7: Optional[float]
    acc5: Optional[float]
    acc3: Optional[float]
    coverage: float
    avg_set_size: float
    per_group_failure: Dict[str, float]
    redistribution: RedistributionReport
    set_size_histogram: Dict[str, int] = field(default_factory=dict)
    class_coverage: Dict[str, float] = field(default_factory=dict)
    document: Optional[DocumentReport] = None

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)

    def to_frame(self) -> pd.DataFrame:
        """Une ligne par métrique (colonnes metric, value)."""
        rows = []

        def flatten(prefix: str, value):
            if isinstance(value, dict):
                for key, sub in value.items():
                    flatten(f"{prefix}.{key}" if prefix else str(key), sub)
            else:
                rows.append({"metric": prefix, "value": value})

        flatten("", self.to_dict())
        return pd.DataFrame(rows, columns=["metric", "value"])


def document_report(
    doc_ids: Sequence[Optional[str]], golds: Sequence[int], preds: Sequence[int], k: int
) -> Optional[DocumentReport]:
    """Agrège phrases -> documents par le maximum et calcule les métriques."""
    pairs = [(d, g, p) for d, g, p in zip(doc_ids, golds, preds) if d]
    if not pairs:
        return None
    doc_gold = document_level((d, g) for d, g, _ in pairs)
    doc_pred = document_level((d, p) for d, _, p in pairs)
    gold_list = [doc_gold[d] for d in doc_gold]
    pred_list = [doc_pred[d] for d in doc_gold]
    acc, adj_acc, dist = basic_metrics(gold_list, pred_list, k)
    return DocumentReport(len(gold_list), qwk(gold_list, pred_list, k), acc, adj_acc, dist)


def evaluate_predictions(
    golds: Sequence[int],
    preds: Sequence[int],
    baselines: Sequence[int],
    sets: Sequence[PredictionSet],
    k: int,
    ids: Sequence[str],
    coarse_maps: Optional[Mapping[str, CoarseMap]] = None,
    tags: Optional[Sequence[Mapping[str, str]]] = None,
    doc_ids: Optional[Sequence[Optional[str]]] = None,
) -> EvaluationReport:
    """
    Construit le rapport d'évaluation complet.

    Args:
        golds: Références
        preds: Étiquettes décodées
        baselines: Étiquettes argmax de la ligne de base
        sets: Ensembles de prédiction
        k: Nombre d'étiquettes
        ids: Identifiants des exemples
        coarse_maps: Tables acc7/acc5/acc3 (None : métriques grossières absentes)
        tags: Étiquettes de groupe par exemple
        doc_ids: Identifiants de documents par exemple

    Returns:
        EvaluationReport
    """
    golds = [int(g) for g in golds]
    acc, adj_acc, dist = basic_metrics(golds, preds, k)
    coarse = {name: None for name in COARSE_NAMES}
    if coarse_maps:
        for name, cmap in coarse_maps.items():
            coarse[name] = coarse_accuracy(golds, preds, cmap)

    per_group: Dict[str, float] = {}
    tags = tags or [{} for _ in ids]
    tag_names = sorted({name for row in tags for name in row})
    for name in tag_names:
        groups = {i: row.get(name) or None for i, row in zip(ids, tags)}
        for value, rate in failure_rates(sets, golds, groups, ids).items():
            if value != OVERALL_KEY:
                per_group[f"{name}={value}"] = rate
    overall = failure_rates(sets, golds, {}, ids)[OVERALL_KEY]
    per_group[OVERALL_KEY] = overall

    sizes = pd.Series([s.size for s in sets])
    covered = pd.Series([g in s for s, g in zip(sets, golds)])
    class_coverage = covered.groupby(pd.Series(golds)).mean().sort_index()

    report = EvaluationReport(
        n=len(golds),
        qwk=qwk(golds, preds, k),
        acc=acc,
        adj_acc=adj_acc,
        dist=dist,
        acc7=coarse["acc7"],
        acc5=coarse["acc5"],
        acc3=coarse["acc3"],
        coverage=1.0 - overall,
        avg_set_size=float(sizes.mean()),
        per_group_failure=per_group,
        redistribution=redistribution(golds, baselines, preds),
        set_size_histogram={str(size): int(c) for size, c in sizes.value_counts().sort_index().items()},
        class_coverage={str(label): float(c) for label, c in class_coverage.items()},
        document=document_report(doc_ids, golds, preds, k) if doc_ids is not None else None,
    )
    logger.info(
        "Évaluation : n=%d qwk=%.4f acc=%.4f couverture=%.4f taille moyenne=%.2f",
        report.n, report.qwk, report.acc, report.coverage, report.avg_set_size,
    )
    return report
