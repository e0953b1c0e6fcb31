"""
Tests unitaires pour le module metrics.py
"""

import json

import numpy as np
import pytest
from sklearn.metrics import cohen_kappa_score

from src.config import DEFAULT_COARSE_MAPS
from src.core import PredictionSet, ProbabilityVector
from src.exceptions import ConfigError, EmptyInputError, LengthMismatchError, UnknownLabelError
from src.metrics import (
    OVERALL_KEY,
    CoarseMap,
    KappaAccumulator,
    basic_metrics,
    coarse_accuracy,
    evaluate_predictions,
    failure_rates,
    load_coarse_maps,
    qwk,
    qwk_bruteforce,
    redistribution,
)


@pytest.fixture
def redistribution_case():
    """Fixture où le décodage conforme réduit une erreur de 4 niveaux et crée une erreur de 1."""
    golds = [10, 10, 5, 15, 8, 12]
    baseline = [14, 10, 5, 15, 8, 12]
    cp = [11, 11, 5, 15, 8, 12]
    return golds, baseline, cp


@pytest.fixture
def coarse_file(tmp_path):
    """Fixture pour créer un fichier de tables grossières sur 4 niveaux."""
    data = {
        "_note": "test",
        "acc7": {"1": 1, "2": 2, "3": 3, "4": 4},
        "acc5": {"1": 1, "2": 1, "3": 2, "4": 2},
        "acc3": {"1": 1, "2": 1, "3": 1, "4": 2},
    }
    path = tmp_path / "maps.json"
    path.write_text(json.dumps(data))
    return path


class TestQWK:
    """Tests pour le kappa pondéré quadratique."""

    def test_perfect(self):
        """Test qwk(g, g) = 1 exactement."""
        golds = [1, 5, 9, 19, 3]
        assert qwk(golds, golds, 19) == 1.0

    def test_antisymmetric_binary(self):
        """Test l'exemple binaire antisymétrique : -1 exactement."""
        assert qwk([1, 2], [2, 1], 2) == -1.0

    def test_matches_bruteforce(self):
        """Test l'accord avec la double somme sur 1000 cas aléatoires."""
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            k = int(rng.integers(2, 20))
            n = int(rng.integers(1, 201))
            golds = rng.integers(1, k + 1, size=n)
            preds = rng.integers(1, k + 1, size=n)
            assert qwk(golds, preds, k) == pytest.approx(qwk_bruteforce(golds, preds, k), abs=1e-12)

    def test_matches_sklearn(self):
        """Test l'accord avec scikit-learn quand toutes les classes sont observées."""
        rng = np.random.default_rng(9)
        golds = np.concatenate([np.arange(1, 8), rng.integers(1, 8, size=200)])
        preds = np.clip(golds + rng.integers(-2, 3, size=golds.size), 1, 7)
        expected = cohen_kappa_score(golds, preds, weights="quadratic")
        assert qwk(golds, preds, 7) == pytest.approx(expected, abs=1e-12)

    def test_reversed_scale(self):
        """Test que renverser l'échelle (i -> k+1-i) des deux côtés ne change pas le QWK."""
        rng = np.random.default_rng(77)
        for _ in range(300):
            k = int(rng.integers(2, 20))
            n = int(rng.integers(1, 201))
            golds = rng.integers(1, k + 1, size=n)
            preds = rng.integers(1, k + 1, size=n)
            expected = qwk(golds, preds, k)
            assert qwk(k + 1 - golds, k + 1 - preds, k) == pytest.approx(expected, abs=1e-12)

    def test_constant_degenerate(self):
        """Test le cas dégénéré où le dénominateur est nul."""
        assert qwk([3, 3, 3], [3, 3, 3], 5) == 1.0

    def test_accumulator_merge(self):
        """Test que la fusion de fragments égale le calcul d'un bloc."""
        rng = np.random.default_rng(4)
        golds = rng.integers(1, 20, size=300)
        preds = rng.integers(1, 20, size=300)
        left = KappaAccumulator(19).update(golds[:120], preds[:120])
        right = KappaAccumulator(19).update(golds[120:], preds[120:])
        assert left.merge(right).value() == pytest.approx(qwk(golds, preds, 19), abs=1e-12)
        assert left.n == 300

    def test_errors(self):
        """Test les erreurs d'entrée."""
        with pytest.raises(LengthMismatchError):
            qwk([1, 2], [1], 3)
        with pytest.raises(EmptyInputError):
            qwk([], [], 3)
        with pytest.raises(UnknownLabelError):
            qwk([1, 4], [1, 2], 3)


class TestBasicMetrics:
    """Tests pour l'exactitude et la distance."""

    def test_values(self):
        """Test exactitude, exactitude ±1 et distance moyenne."""
        acc, adj, dist = basic_metrics([1, 2, 3, 4], [1, 3, 5, 4], 5)
        assert acc == 0.5
        assert adj == 0.75
        assert dist == 0.75

    def test_coarse(self, coarse_file):
        """Test l'exactitude grossière."""
        maps = load_coarse_maps(coarse_file)
        assert coarse_accuracy([1, 3, 4], [2, 4, 4], maps["acc5"]) == 1.0
        assert coarse_accuracy([1, 3, 4], [2, 4, 4], maps["acc7"]) == pytest.approx(1 / 3)

    def test_coarse_non_contiguous(self):
        """Test le rejet d'une table non contiguë."""
        with pytest.raises(ConfigError):
            CoarseMap("acc3", {1: 1, 2: 2, 3: 1})

    def test_shipped_maps(self):
        """Test les tables livrées : 19 niveaux vers 7, 5 et 3 classes."""
        maps = load_coarse_maps(DEFAULT_COARSE_MAPS)
        assert {name: max(m.mapping.values()) for name, m in maps.items()} == {
            "acc7": 7, "acc5": 5, "acc3": 3,
        }
        assert all(m.k == 19 for m in maps.values())


class TestFailureRates:
    """Tests pour les taux d'échec de couverture."""

    def test_per_group(self):
        """Test les taux par groupe et le taux global."""
        p = ProbabilityVector([0.25, 0.25, 0.25, 0.25])
        sets = [PredictionSet.from_probabilities(m, p) for m in ([1, 2], [2], [3, 4], [4])]
        rates = failure_rates(sets, [1, 1, 3, 3], {"a": "x", "b": "x", "c": "y"}, ["a", "b", "c", "d"])
        assert rates == {"x": 0.5, "y": 0.0, OVERALL_KEY: 0.5}


class TestRedistribution:
    """Tests pour la redistribution des erreurs."""

    def test_counts(self, redistribution_case):
        """Test le décompte : une erreur réduite de 3, une nouvelle erreur à ±1."""
        report = redistribution(*redistribution_case)
        assert report.improved == 1
        assert report.improvement_histogram["3"] == 1.0
        assert report.newly_wrong == 1
        assert report.newly_wrong_within_one == 1.0
        assert report.worsened == 0

    def test_qwk_up_accuracy_down(self, redistribution_case):
        """Test que le QWK augmente alors que l'exactitude baisse."""
        golds, baseline, cp = redistribution_case
        assert qwk(golds, cp, 19) > qwk(golds, baseline, 19)
        assert basic_metrics(golds, cp, 19)[0] < basic_metrics(golds, baseline, 19)[0]


class TestEvaluationReport:
    """Tests pour le rapport complet."""

    def test_perfect_predictions(self, coarse_file):
        """Test des prédictions parfaites."""
        p = ProbabilityVector([0.1, 0.2, 0.3, 0.4])
        golds = [1, 2, 3, 4, 4]
        sets = [PredictionSet.from_probabilities([g], p) for g in golds]
        report = evaluate_predictions(
            golds, golds, golds, sets, 4,
            ids=["a", "b", "c", "d", "e"],
            coarse_maps=load_coarse_maps(coarse_file),
            tags=[{"domain": "x"}, {"domain": "x"}, {"domain": "y"}, {}, {"domain": "y"}],
            doc_ids=["d1", "d1", "d2", "d2", None],
        )
        assert report.qwk == 1.0
        assert report.acc == 1.0
        assert report.dist == 0.0
        assert report.acc3 == 1.0
        assert report.coverage == 1.0
        assert report.avg_set_size == 1.0
        assert report.per_group_failure == {"domain=x": 0.0, "domain=y": 0.0, OVERALL_KEY: 0.0}
        assert report.set_size_histogram == {"1": 5}
        assert report.document.n_docs == 2
        frame = report.to_frame()
        assert "redistribution.improvement_histogram.4+" in frame["metric"].tolist()

    def test_without_coarse_maps(self):
        """Test l'absence des exactitudes grossières."""
        p = ProbabilityVector([0.5, 0.5])
        sets = [PredictionSet.from_probabilities([1, 2], p)] * 2
        report = evaluate_predictions([1, 2], [1, 1], [1, 1], sets, 2, ids=["a", "b"])
        assert report.acc7 is None
        assert report.avg_set_size == 2.0
        assert report.class_coverage == {"1": 1.0, "2": 1.0}
        assert report.document is None
