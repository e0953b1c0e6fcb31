"""
Tests unitaires pour le module database.py
"""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.core import LabeledBatch
from src.database import ResultStore
from src.exceptions import MissingGoldError


@pytest.fixture
def store():
    """Fixture pour créer une instance de ResultStore en mémoire."""
    manager = ResultStore()
    yield manager
    manager.close()


@pytest.fixture
def gold_batch():
    """Fixture pour créer un lot de références avec domaine et classe de texte."""
    probs = np.full((4, 3), 1 / 3)
    groups = [
        {"domain": "STEM", "text_class": "Advanced"},
        {"domain": "STEM", "text_class": "Foundational"},
        {"domain": "Arts", "text_class": "Advanced"},
        {"domain": "Arts", "text_class": "Advanced"},
    ]
    return LabeledBatch.from_arrays(
        probs, golds=[1, 2, 3, 3], ids=["a", "b", "c", "d"],
        doc_ids=["d1", "d1", "d2", "d2"], groups=groups,
    )


@pytest.fixture
def predictions():
    """Fixture pour créer un tableau de prédictions (c et d non couverts)."""
    return pd.DataFrame({
        "id": ["d", "c", "b", "a"],
        "pred": [2, 2, 2, 1],
        "baseline": [2, 1, 2, 1],
        "set": ["1|2", "2", "2|3", "1"],
    })


class TestResultStore:
    """Tests pour la classe ResultStore."""

    def test_initialization(self, store):
        """Test l'initialisation du stockage."""
        assert store.db_path == ":memory:"
        assert store.conn is not None

    def test_create_schema(self, store):
        """Test la création du schéma."""
        result = store.conn.execute("""
            SELECT COUNT(*) FROM information_schema.tables
            WHERE table_name IN ('predictions', 'gold_labels', 'example_tags')
        """).fetchone()
        assert result[0] == 3

    def test_file_database(self, tmp_path):
        """Test une base sur fichier."""
        db_path = str(tmp_path / "results.duckdb")
        manager = ResultStore(db_path)
        manager.close()
        assert Path(db_path).exists()

    def test_load(self, store, gold_batch, predictions):
        """Test le chargement des prédictions et des références."""
        assert store.load_predictions(predictions) == 4
        assert store.load_gold(gold_batch) == 4
        assert store.get_record_count() == 4

    def test_load_gold_requires_labels(self, store):
        """Test le rejet d'un lot sans référence."""
        batch = LabeledBatch.from_arrays(np.full((1, 2), 0.5))
        with pytest.raises(MissingGoldError):
            store.load_gold(batch)

    def test_aligned_frame_follows_gold_order(self, store, gold_batch, predictions):
        """Test la jointure dans l'ordre du fichier de références."""
        store.load_predictions(predictions)
        store.load_gold(gold_batch)
        frame = store.aligned_frame()
        assert frame["id"].tolist() == ["a", "b", "c", "d"]
        assert frame["pred"].tolist() == [1, 2, 2, 2]
        assert frame["members"].tolist() == ["1", "2|3", "2", "1|2"]

    def test_no_mismatch(self, store, gold_batch, predictions):
        """Test l'absence d'écart d'identifiants."""
        store.load_predictions(predictions)
        store.load_gold(gold_batch)
        assert store.find_id_mismatches() == ([], [])

    def test_mismatch(self, store, gold_batch, predictions):
        """Test la détection des identifiants présents d'un seul côté."""
        predictions.loc[0, "id"] = "z"
        store.load_predictions(predictions)
        store.load_gold(gold_batch)
        assert store.find_id_mismatches() == (["z"], ["d"])

    def test_failure_breakdown_single_tag(self, store, gold_batch, predictions):
        """Test les taux d'échec par domaine."""
        store.load_predictions(predictions)
        store.load_gold(gold_batch)
        result = store.failure_breakdown(["domain"])
        assert result["domain"].tolist() == ["Arts", "STEM"]
        assert result["failures"].tolist() == [2, 0]
        assert result["failure_rate"].tolist() == [1.0, 0.0]

    def test_failure_breakdown_cross_tab(self, store, gold_batch, predictions):
        """Test le tableau croisé domaine x classe de texte."""
        store.load_predictions(predictions)
        store.load_gold(gold_batch)
        result = store.failure_breakdown(["domain", "text_class"])
        assert list(result.columns) == ["domain", "text_class", "failures", "total", "failure_rate"]
        assert len(result) == 3
        assert result["total"].sum() == 4

    def test_failure_breakdown_no_tags(self, store):
        """Test un tableau vide sans étiquette."""
        assert store.failure_breakdown([]).empty

    def test_clear_all_data(self, store, gold_batch, predictions):
        """Test la suppression de toutes les données."""
        store.load_predictions(predictions)
        store.load_gold(gold_batch)
        store.clear_all_data()
        assert store.get_record_count() == 0
