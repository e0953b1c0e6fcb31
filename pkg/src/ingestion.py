"""
Module de lecture et d'écriture des fichiers.
Fichiers de probabilités (CSV ou JSONL), fichiers de prédictions, et écriture
atomique d'un répertoire de sortie.
"""

import json
import logging
import os
import shutil
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.core import Example, LabeledBatch, LabelSpace, PredictionSet, normalize
from src.decode import DecodedExample
from src.exceptions import InvalidProbabilityError, ParseError

logger = logging.getLogger(__name__)

SUM_TOLERANCE = 1e-6
SUM_REJECT_TOLERANCE = 1e-2
RESERVED_COLUMNS = ("id", "gold", "doc_id", "group", "probs")
PREDICTION_COLUMNS = ["id", "pred", "baseline", "set"]


def prob_columns(k: int) -> List[str]:
    return [f"p{j}" for j in range(1, k + 1)]


def _is_jsonl(path: Path) -> bool:
    return Path(path).suffix.lower() in (".jsonl", ".json", ".ndjson")


def read_table(path: Path) -> pd.DataFrame:
    """
    Lit un fichier CSV ou JSONL en texte brut.

    La colonne '_line' porte le numéro de ligne du fichier (en-tête CSV = ligne 1).

    Raises:
        ParseError: fichier illisible
    """
    path = Path(path)
    try:
        if _is_jsonl(path):
            records = []
            for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"{path}: JSON invalide ({exc.msg})", [number]) from exc
                if not isinstance(record, dict):
                    raise ParseError(f"{path}: objet JSON attendu", [number])
                record["_line"] = number
                records.append(record)
            frame = pd.DataFrame(records)
        else:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
            frame["_line"] = np.arange(len(frame)) + 2
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ParseError(f"{path}: lecture impossible ({exc})") from exc
    if "id" not in frame.columns:
        raise ParseError(f"{path}: colonne 'id' absente")
    return frame


def _text(value) -> Optional[str]:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return None
    text = str(value).strip()
    return text or None


def _parse_golds(frame: pd.DataFrame, k: int, path: Path) -> List[Optional[int]]:
    if "gold" not in frame.columns:
        return [None] * len(frame)
    raw = [_text(v) for v in frame["gold"]]
    numeric = pd.to_numeric(pd.Series([v if v is not None else np.nan for v in raw], dtype=object),
                            errors="coerce")
    bad = [
        int(line) for line, text, value in zip(frame["_line"], raw, numeric)
        if text is not None and (np.isnan(value) or value != int(value) or not 1 <= value <= k)
    ]
    if bad:
        raise ParseError(f"{path}: référence invalide (entier de 1 à {k} attendu)", bad)
    return [None if text is None else int(value) for text, value in zip(raw, numeric)]


def _prob_matrix(frame: pd.DataFrame, k: int, path: Path) -> np.ndarray:
    if "probs" in frame.columns:
        bad = [int(line) for line, row in zip(frame["_line"], frame["probs"])
               if not isinstance(row, list) or len(row) != k]
        if bad:
            raise ParseError(f"{path}: 'probs' doit être une liste de {k} réels", bad)
        values = pd.DataFrame(frame["probs"].tolist(), columns=prob_columns(k))
    else:
        columns = prob_columns(k)
        missing = [c for c in columns if c not in frame.columns]
        if missing:
            raise ParseError(f"{path}: colonnes de probabilités absentes ({', '.join(missing[:5])})")
        extra = [c for c in frame.columns if c.startswith("p") and c[1:].isdigit() and c not in columns]
        if extra:
            raise ParseError(f"{path}: {len(columns) + len(extra)} colonnes de probabilités pour k={k}")
        values = frame[columns].reset_index(drop=True)
    # Même idiome que le chargement CSV : conversion numérique, valeurs invalides -> NaN
    values = values.apply(pd.to_numeric, errors="coerce")
    bad = [int(line) for line, has_nan in zip(frame["_line"], values.isna().any(axis=1)) if has_nan]
    if bad:
        raise ParseError(f"{path}: probabilité non numérique", bad)
    return values.to_numpy(dtype=np.float64)


def read_probability_file(path: Path, k: int) -> LabeledBatch:
    """
    Charge un fichier de probabilités.

    CSV : en-tête id,gold,doc_id,group,p1..pK ; JSONL : mêmes champs et un
    tableau 'probs'. Les colonnes supplémentaires deviennent des étiquettes de
    groupe. Chaque ligne acceptée est divisée par sa somme ; une somme qui
    s'écarte de 1 de plus de 1e-2 fait rejeter la ligne.

    Args:
        path: Chemin du fichier
        k: Nombre d'étiquettes attendu

    Returns:
        LabeledBatch

    Raises:
        ParseError: lignes mal formées (numéros de ligne dans le message)
    """
    path = Path(path)
    frame = read_table(path)
    ids = [_text(v) for v in frame["id"]]
    lines = frame["_line"].astype(int).tolist()
    missing_ids = [line for line, i in zip(lines, ids) if i is None]
    if missing_ids:
        raise ParseError(f"{path}: identifiant vide", missing_ids)
    seen: Dict[str, int] = {}
    duplicates = []
    for line, i in zip(lines, ids):
        if i in seen:
            duplicates.append(line)
        seen.setdefault(i, line)
    if duplicates:
        raise ParseError(f"{path}: identifiant dupliqué", duplicates)

    golds = _parse_golds(frame, k, path)
    matrix = _prob_matrix(frame, k, path)
    tag_columns = [c for c in frame.columns if c not in RESERVED_COLUMNS and c != "_line"
                   and not (c.startswith("p") and c[1:].isdigit())]

    examples = []
    rejected = []
    renormalized = 0
    for row_idx, (line, raw) in enumerate(zip(lines, matrix)):
        deviation = abs(raw.sum() - 1.0)
        if deviation > SUM_REJECT_TOLERANCE:
            rejected.append(line)
            continue
        try:
            probs = normalize(raw)
        except InvalidProbabilityError:
            rejected.append(line)
            continue
        if deviation > SUM_TOLERANCE:
            renormalized += 1
        groups = {}
        if "group" in frame.columns and _text(frame["group"].iat[row_idx]):
            groups["group"] = _text(frame["group"].iat[row_idx])
        for column in tag_columns:
            value = _text(frame[column].iat[row_idx])
            if value:
                groups[column] = value
        doc_id = _text(frame["doc_id"].iat[row_idx]) if "doc_id" in frame.columns else None
        examples.append(Example(ids[row_idx], probs, golds[row_idx], doc_id, groups))
    if rejected:
        raise ParseError(f"{path}: vecteur de probabilités invalide (négatif, nul ou somme loin de 1)", rejected)
    logger.info("%s : %d lignes chargées, %d renormalisées", path, len(examples), renormalized)
    return LabeledBatch(tuple(examples), LabelSpace(k))


def read_probability_files(paths: Sequence[Path], k: int) -> List[LabeledBatch]:
    return [read_probability_file(path, k) for path in paths]


def read_reference_file(path: Path, k: int) -> LabeledBatch:
    """
    Charge un fichier de références.

    Un fichier de probabilités complet est lu tel quel ; un fichier réduit à
    id,gold[,doc_id,group,...] reçoit des distributions uniformes, qui ne
    servent qu'à pondérer les ensembles relus.

    Raises:
        ParseError: fichier mal formé
    """
    path = Path(path)
    frame = read_table(path)
    if "probs" in frame.columns or "p1" in frame.columns:
        return read_probability_file(path, k)
    if "gold" not in frame.columns:
        raise ParseError(f"{path}: colonne 'gold' absente")
    ids = [_text(v) for v in frame["id"]]
    if len(set(ids)) != len(ids) or None in ids:
        raise ParseError(f"{path}: identifiants vides ou dupliqués")
    golds = _parse_golds(frame, k, path)
    tag_columns = [c for c in frame.columns if c not in RESERVED_COLUMNS and c != "_line"]
    if "group" in frame.columns:
        tag_columns = ["group"] + tag_columns
    groups = [
        {c: _text(frame[c].iat[i]) for c in tag_columns if _text(frame[c].iat[i])}
        for i in range(len(frame))
    ]
    doc_ids = [_text(v) for v in frame["doc_id"]] if "doc_id" in frame.columns else None
    uniform = np.full((len(frame), k), 1.0 / k)
    return LabeledBatch.from_arrays(uniform, golds, ids, doc_ids, groups)


def probability_frame(batch: LabeledBatch) -> pd.DataFrame:
    """Lot -> DataFrame au format id,gold,doc_id,group,<étiquettes>,p1..pK."""
    tags = [t for t in batch.group_tags() if t != "group"]
    rows = []
    for example in batch.examples:
        row = {
            "id": example.id,
            "gold": "" if example.gold is None else str(example.gold),
            "doc_id": example.doc_id or "",
            "group": example.groups.get("group", ""),
        }
        for tag in tags:
            row[tag] = example.groups.get(tag, "")
        for j, value in enumerate(example.probs.probs, start=1):
            row[f"p{j}"] = repr(float(value))
        rows.append(row)
    columns = ["id", "gold", "doc_id", "group"] + tags + prob_columns(batch.k)
    return pd.DataFrame(rows, columns=columns)


def predictions_frame(decoded: Sequence[DecodedExample]) -> pd.DataFrame:
    """Prédictions -> DataFrame id,pred,baseline,set."""
    return pd.DataFrame(
        [{"id": d.id, "pred": d.point, "baseline": d.baseline_point, "set": d.set.as_label_string()}
         for d in decoded],
        columns=PREDICTION_COLUMNS,
    )


def weights_lines(decoded: Sequence[DecodedExample]) -> str:
    """Poids renormalisés, une ligne JSON par exemple."""
    return "".join(json.dumps({"id": d.id, "weights": d.set.weights()}) + "\n" for d in decoded)


def parse_label_set(text: str, k: int) -> List[int]:
    """'7|8|9' -> [7, 8, 9] ; lève ValueError si une étiquette est invalide."""
    members = sorted({int(part) for part in str(text).split("|") if part.strip()})
    if not members or members[0] < 1 or members[-1] > k:
        raise ValueError(f"ensemble invalide : {text!r}")
    return members


def read_predictions_file(path: Path, k: int) -> pd.DataFrame:
    """
    Charge un fichier de prédictions id,pred,baseline,set.

    Raises:
        ParseError: colonne absente ou ligne mal formée
    """
    path = Path(path)
    frame = read_table(path)
    missing = [c for c in PREDICTION_COLUMNS if c not in frame.columns]
    if missing:
        raise ParseError(f"{path}: colonnes absentes ({', '.join(missing)})")
    bad = []
    for line, pred, baseline, members in zip(frame["_line"], frame["pred"], frame["baseline"], frame["set"]):
        try:
            parse_label_set(members, k)
            if not (1 <= int(pred) <= k and 1 <= int(baseline) <= k):
                raise ValueError
        except (TypeError, ValueError):
            bad.append(int(line))
    if bad:
        raise ParseError(f"{path}: prédiction mal formée", bad)
    duplicated = frame["id"].astype(str).duplicated()
    if duplicated.any():
        raise ParseError(f"{path}: identifiant dupliqué", frame.loc[duplicated, "_line"].astype(int).tolist())
    frame["id"] = frame["id"].astype(str)
    frame["pred"] = frame["pred"].astype(int)
    frame["baseline"] = frame["baseline"].astype(int)
    frame["set"] = frame["set"].astype(str)
    return frame[PREDICTION_COLUMNS]


def sets_from_frame(members: Iterable[str], examples: Sequence[Example], k: int) -> List[PredictionSet]:
    """Reconstruit les ensembles avec les poids renormalisés des distributions d'origine."""
    return [
        PredictionSet.from_probabilities(parse_label_set(text, k), example.probs)
        for text, example in zip(members, examples)
    ]


def frame_to_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, lineterminator="\n")


def to_json(data) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


class OutputWriter:
    """Écrit dans un répertoire temporaire puis déplace tout dans le répertoire de sortie."""

    def __init__(self, out_dir: Path):
        """
        Args:
            out_dir: Répertoire de sortie (créé au moment de la validation)
        """
        self.out_dir = Path(out_dir)
        self.written: List[Path] = []
        self._tmp: Optional[Path] = None

    def __enter__(self) -> "OutputWriter":
        parent = self.out_dir.resolve().parent
        parent.mkdir(parents=True, exist_ok=True)
        self._tmp = Path(tempfile.mkdtemp(prefix=".tmp-", dir=parent))
        return self

    def write_text(self, name: str, text: str) -> None:
        (self._tmp / name).write_text(text, encoding="utf-8", newline="\n")

    def write_frame(self, name: str, frame: pd.DataFrame) -> None:
        self.write_text(name, frame_to_csv(frame))

    def write_json(self, name: str, data) -> None:
        self.write_text(name, to_json(data))

    def __exit__(self, exc_type, exc, tb) -> bool:
        try:
            if exc_type is None:
                self.out_dir.mkdir(parents=True, exist_ok=True)
                for item in sorted(self._tmp.iterdir()):
                    target = self.out_dir / item.name
                    os.replace(item, target)
                    self.written.append(target)
                logger.info("%d fichier(s) écrits dans %s", len(self.written), self.out_dir)
        finally:
            shutil.rmtree(self._tmp, ignore_errors=True)
        return False
