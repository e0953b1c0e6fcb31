"""
Module de stockage des résultats avec DuckDB.
Gère la connexion, le schéma des prédictions et des références, l'alignement
des identifiants et les tableaux croisés d'échecs de couverture.
"""

from typing import List, Sequence, Tuple

import duckdb
import pandas as pd

from src.core import LabeledBatch


class ResultStore:
    """Base DuckDB des prédictions et des références d'une évaluation."""

    def __init__(self, db_path: str = ":memory:"):
        """
        Initialise la connexion à la base de données DuckDB.

        Args:
            db_path: Chemin vers le fichier de base, en mémoire par défaut
        """
        self.db_path = db_path
        self.conn = duckdb.connect(db_path)
        self._create_schema()

    def _create_schema(self) -> None:
        """Crée les tables predictions, gold_labels et example_tags si besoin."""
        self.conn.execute("""
            CREATE TABLE IF NOT EXISTS predictions (
                row_idx INTEGER,
                id VARCHAR,
                pred INTEGER,
                baseline INTEGER,
                members VARCHAR
            )
        """)
        self.conn.execute("""
            CREATE TABLE IF NOT EXISTS gold_labels (
                row_idx INTEGER,
                id VARCHAR,
                gold INTEGER,
                doc_id VARCHAR
            )
        """)
        self.conn.execute("""
            CREATE TABLE IF NOT EXISTS example_tags (
                id VARCHAR,
                tag VARCHAR,
                value VARCHAR
            )
        """)

        # Index sur les colonnes de jointure
        self.conn.execute("CREATE INDEX IF NOT EXISTS idx_predictions_id ON predictions(id)")
        self.conn.execute("CREATE INDEX IF NOT EXISTS idx_gold_id ON gold_labels(id)")

    def load_predictions(self, frame: pd.DataFrame) -> int:
        """
        Charge un fichier de prédictions (colonnes id, pred, baseline, set).

        Args:
            frame: DataFrame des prédictions

        Returns:
            Nombre de lignes insérées
        """
        df = pd.DataFrame({
            "row_idx": range(len(frame)),
            "id": frame["id"].astype(str),
            "pred": frame["pred"].astype("int64"),
            "baseline": frame["baseline"].astype("int64"),
            "members": frame["set"].astype(str),
        })
        self.conn.register("temp_predictions", df)
        self.conn.execute("INSERT INTO predictions SELECT * FROM temp_predictions")
        self.conn.unregister("temp_predictions")
        return len(df)

    def load_gold(self, batch: LabeledBatch) -> int:
        """
        Charge les références, documents et étiquettes de groupe d'un lot.

        Args:
            batch: Lot annoté

        Returns:
            Nombre de lignes insérées
        """
        golds = batch.require_golds()
        df = pd.DataFrame({
            "row_idx": range(len(batch)),
            "id": batch.ids,
            "gold": golds,
            "doc_id": [example.doc_id for example in batch.examples],
        })
        tags = pd.DataFrame(
            [(e.id, tag, value) for e in batch.examples for tag, value in e.groups.items() if value],
            columns=["id", "tag", "value"],
        )
        self.conn.register("temp_gold", df)
        self.conn.execute("INSERT INTO gold_labels SELECT * FROM temp_gold")
        self.conn.unregister("temp_gold")
        if len(tags) > 0:
            self.conn.register("temp_tags", tags)
            self.conn.execute("INSERT INTO example_tags SELECT * FROM temp_tags")
            self.conn.unregister("temp_tags")
        return len(df)

    def find_id_mismatches(self) -> Tuple[List[str], List[str]]:
        """
        Identifiants présents d'un seul côté.

        Returns:
            (absents des références, absents des prédictions), triés
        """
        only_predictions = self.conn.execute("""
            SELECT p.id FROM predictions p
            WHERE NOT EXISTS (SELECT 1 FROM gold_labels g WHERE g.id = p.id)
            ORDER BY p.id
        """).fetchall()
        only_gold = self.conn.execute("""
            SELECT g.id FROM gold_labels g
            WHERE NOT EXISTS (SELECT 1 FROM predictions p WHERE p.id = g.id)
            ORDER BY g.id
        """).fetchall()
        return [row[0] for row in only_predictions], [row[0] for row in only_gold]

    def aligned_frame(self) -> pd.DataFrame:
        """Prédictions jointes aux références, dans l'ordre du fichier de références."""
        return self.conn.execute("""
            SELECT g.id, g.gold, g.doc_id, p.pred, p.baseline, p.members
            FROM gold_labels g
            JOIN predictions p ON p.id = g.id
            ORDER BY g.row_idx
        """).df()

    def failure_breakdown(self, tags: Sequence[str]) -> pd.DataFrame:
        """
        Taux d'échec de couverture croisés sur une ou plusieurs étiquettes.

        Args:
            tags: Noms des étiquettes (ex. ['domain', 'text_class'])

        Returns:
            DataFrame avec une colonne par étiquette, failures, total et failure_rate
        """
        columns = list(tags)
        if not columns:
            return pd.DataFrame(columns=["failures", "total", "failure_rate"])
        joins = "\n".join(
            f"JOIN example_tags t{i} ON t{i}.id = g.id AND t{i}.tag = ?" for i in range(len(columns))
        )
        keys = ", ".join(f"t{i}.value" for i in range(len(columns)))
        query = f"""
            SELECT {", ".join(f"t{i}.value AS tag_{i}" for i in range(len(columns)))},
                   SUM(CASE WHEN list_contains(string_split(p.members, '|'), CAST(g.gold AS VARCHAR))
                            THEN 0 ELSE 1 END) AS failures,
                   COUNT(*) AS total
            FROM gold_labels g
            JOIN predictions p ON p.id = g.id
            {joins}
            GROUP BY {keys}
            ORDER BY {keys}
        """
        result = self.conn.execute(query, columns).df()
        result.columns = columns + ["failures", "total"]
        result["failures"] = result["failures"].astype("int64")
        result["total"] = result["total"].astype("int64")
        result["failure_rate"] = result["failures"] / result["total"]
        return result

    def get_record_count(self) -> int:
        """Retourne le nombre de prédictions chargées."""
        result = self.conn.execute("SELECT COUNT(*) FROM predictions").fetchone()
        return result[0] if result else 0

    def clear_all_data(self) -> None:
        """Vide toutes les tables."""
        for table in ("predictions", "gold_labels", "example_tags"):
            self.conn.execute(f"DELETE FROM {table}")

    def close(self) -> None:
        """Ferme la connexion à la base de données."""
        self.conn.close()
