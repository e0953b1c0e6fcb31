"""
Module de découpage stratifié.
Partage un lot annoté en deux sous-lots (calibration / réglage) classe par
classe, de façon reproductible à graine fixée.
"""

import logging
import math
from typing import Dict, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from src.core import LabeledBatch
from src.exceptions import ConfigError

logger = logging.getLogger(__name__)


def first_split_size(n_class: int, fraction: float) -> int:
    """
    Taille de la première partie pour une classe : floor(fraction·n + 0.5),
    bornée à [1, n-1] dès que n >= 2. Une classe singleton isolée va dans la
    première partie.
    """
    if n_class <= 1:
        return n_class
    size = math.floor(fraction * n_class + 0.5)
    return min(max(size, 1), n_class - 1)


def stratified_split(
    batch: LabeledBatch,
    fraction: float,
    seed: int,
    quotas: Optional[Mapping[int, int]] = None,
) -> Tuple[LabeledBatch, LabeledBatch]:
    """
    Découpage stratifié par étiquette de référence.

    Args:
        batch: Lot annoté
        fraction: Part visée pour la première sortie, dans (0, 1)
        seed: Graine du générateur
        quotas: Tailles explicites de la première partie par classe (prioritaires)

    Returns:
        (première partie, seconde partie), chacune dans l'ordre du lot d'origine

    Raises:
        MissingGoldError: exemple sans référence
        ConfigError: fraction hors de (0, 1) ou quota impossible
    """
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"la fraction doit être dans (0, 1) (reçu {fraction!r})")
    golds = batch.require_golds()
    rng = np.random.default_rng(seed)
    chosen = []
    singletons = []
    for label in np.unique(golds):
        members = np.flatnonzero(golds == label)
        if members.size == 1 and (quotas is None or int(label) not in quotas):
            singletons.append(int(members[0]))
            continue
        if quotas is not None and int(label) in quotas:
            size = int(quotas[int(label)])
            if not 0 <= size <= members.size:
                raise ConfigError(f"quota {size} impossible pour la classe {label} ({members.size} exemples)")
        else:
            size = first_split_size(members.size, fraction)
        chosen.extend(members[rng.permutation(members.size)[:size]].tolist())
    if singletons:
        # Les classes singletons sont réparties ensemble, au moins une en première partie
        size = min(len(singletons), max(1, math.floor(fraction * len(singletons) + 0.5)))
        pool = np.asarray(singletons)
        chosen.extend(pool[rng.permutation(pool.size)[:size]].tolist())
    first_idx = sorted(chosen)
    taken = set(first_idx)
    second_idx = [i for i in range(len(batch)) if i not in taken]
    logger.info(
        "Découpage stratifié : %d -> %d / %d (fraction=%s, graine=%d)",
        len(batch), len(first_idx), len(second_idx), fraction, seed,
    )
    return batch.subset(first_idx), batch.subset(second_idx)


def class_counts(batch: LabeledBatch) -> Dict[int, int]:
    """Nombre d'exemples par étiquette de référence."""
    counts = pd.Series(batch.require_golds()).value_counts().sort_index()
    return {int(label): int(count) for label, count in counts.items()}


def split_manifest(
    original: LabeledBatch, first: LabeledBatch, second: LabeledBatch, fraction: float, seed: int
) -> Dict[str, object]:
    """
    Manifeste du découpage, une ligne par classe.

    Returns:
        Dictionnaire sérialisable : classes (original, %, cal, tune, ratio) et totaux
    """
    total = len(original)
    original_counts = class_counts(original)
    first_counts = class_counts(first) if len(first) else {}
    second_counts = class_counts(second) if len(second) else {}
    rows = []
    for label in sorted(original_counts):
        n = original_counts[label]
        cal = first_counts.get(label, 0)
        rows.append({
            "class": label,
            "original": n,
            "percent": round(100.0 * n / total, 1),
            "cal": cal,
            "tune": second_counts.get(label, 0),
            "ratio": _ratio(cal, n),
        })
    return {
        "fraction": fraction,
        "seed": seed,
        "classes": rows,
        "total": {
            "original": total,
            "cal": len(first),
            "tune": len(second),
            "ratio": _ratio(len(first), total),
        },
    }


def _ratio(part: int, whole: int) -> str:
    share = round(100.0 * part / whole) if whole else 0
    return f"{share}:{100 - share}"
