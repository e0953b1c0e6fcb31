"""
Tests unitaires pour le module pipeline.py
"""

import numpy as np
import pytest

from src.conformal import calibrate, coverage_from_mask, membership_mask
from src.core import LabeledBatch
from src.decode import Decoder
from src.exceptions import ConfigError, IdMismatchError, MixedKError
from src.metrics import basic_metrics
from src.pipeline import (
    ConformalPipeline,
    EnsembleMode,
    align_batches,
    average_batches,
    calibrate_inputs,
    run_inputs,
    run_vote,
)
from src.scores import ScoreKind
from src.synthetic import make_batch

APS = ScoreKind.from_name("aps")


@pytest.fixture
def models():
    """Fixture pour créer trois modèles synthétiques alignés (calibration, test)."""
    return make_batch(1500, seed=21, models=3), make_batch(1500, seed=22, models=3)


class TestAlignment:
    """Tests pour l'alignement des lots."""

    def test_reorders_by_id(self):
        """Test le réalignement selon les identifiants du premier lot."""
        first = LabeledBatch.from_arrays(np.array([[0.9, 0.1], [0.2, 0.8]]), ids=["a", "b"])
        second = LabeledBatch.from_arrays(np.array([[0.3, 0.7], [0.6, 0.4]]), ids=["b", "a"])
        aligned = align_batches([first, second])
        assert aligned[1].ids == ["a", "b"]
        assert aligned[1].prob_matrix[0].tolist() == [0.6, 0.4]

    def test_id_mismatch(self):
        """Test le rejet de lots aux identifiants différents."""
        first = LabeledBatch.from_arrays(np.full((2, 2), 0.5), ids=["a", "b"])
        second = LabeledBatch.from_arrays(np.full((2, 2), 0.5), ids=["a", "c"])
        with pytest.raises(IdMismatchError):
            align_batches([first, second])

    def test_mixed_k(self):
        """Test le rejet de lots de k différents."""
        first = LabeledBatch.from_arrays(np.full((1, 2), 0.5), ids=["a"])
        second = LabeledBatch.from_arrays(np.full((1, 4), 0.25), ids=["a"])
        with pytest.raises(MixedKError):
            align_batches([first, second])


class TestConformalPipeline:
    """Tests pour la chaîne calibration -> ensembles -> décodage."""

    def test_single_model(self, models):
        """Test une chaîne complète sur un modèle."""
        cal, test = models[0][0], models[1][0]
        decoded = ConformalPipeline(calibrate(cal, APS, 0.1)).run(test)
        assert [d.id for d in decoded] == test.ids
        assert all(d.set.members[0] <= d.point <= d.set.members[-1] for d in decoded)
        baseline = np.argmax(test.prob_matrix, axis=1) + 1
        assert [d.baseline_point for d in decoded] == baseline.tolist()

    def test_argmax_decoder(self, models):
        """Test que le décodeur argmax reproduit la ligne de base."""
        cal, test = models[0][0], models[1][0]
        decoded = ConformalPipeline(calibrate(cal, APS, 0.1), Decoder.ARGMAX).run(test)
        assert all(d.point == d.baseline_point for d in decoded)

    def test_oracle_dominates_coverage(self, models):
        """Test que l'exactitude de l'oracle est au moins la couverture."""
        cal, test = models[0][0], models[1][0]
        threshold = calibrate(cal, APS, 0.1)
        decoded = ConformalPipeline(threshold, Decoder.ORACLE).run(test)
        golds = test.require_golds()
        acc, _, _ = basic_metrics(golds, [d.point for d in decoded], test.k)
        coverage = coverage_from_mask(membership_mask(threshold, test.prob_matrix), golds)
        assert acc >= coverage

    def test_oracle_accuracy_on_synthetic(self):
        """Test l'exactitude de l'oracle sur 2000 exemples de calibration et 2000 de test."""
        cal, test = make_batch(2000, seed=1)[0], make_batch(2000, seed=2)[0]
        threshold = calibrate(cal, APS, 0.1)
        decoded = ConformalPipeline(threshold, Decoder.ORACLE).run(test)
        golds = test.require_golds()
        acc, _, _ = basic_metrics(golds, [d.point for d in decoded], test.k)
        coverage = coverage_from_mask(membership_mask(threshold, test.prob_matrix), golds)
        assert acc >= 0.88
        assert acc >= coverage


class TestEnsembles:
    """Tests pour les ensembles de modèles."""

    def test_average_calibrates_once(self, models):
        """Test qu'un seul seuil est calibré sur la moyenne."""
        thresholds = calibrate_inputs(models[0], APS, 0.1, EnsembleMode.AVERAGE)
        assert len(thresholds) == 1
        assert thresholds[0].record.n == 1500

    def test_average_batch(self, models):
        """Test la moyenne des distributions alignées."""
        averaged = average_batches(models[1])
        expected = np.mean([b.prob_matrix for b in models[1]], axis=0)
        assert np.allclose(averaged.prob_matrix, expected)
        assert averaged.require_golds().tolist() == models[1][0].require_golds().tolist()

    def test_several_inputs_need_mode(self, models):
        """Test le refus de plusieurs entrées sans mode d'ensemble."""
        with pytest.raises(ConfigError):
            calibrate_inputs(models[0], APS, 0.1, EnsembleMode.NONE)

    def test_vote(self, models):
        """Test le vote : un seuil par modèle, ensemble = union des ensembles."""
        thresholds = calibrate_inputs(models[0], APS, 0.1, EnsembleMode.VOTE)
        assert len(thresholds) == 3
        decoded = run_vote(models[1], thresholds)
        masks = [membership_mask(t, b.prob_matrix) for t, b in zip(thresholds, models[1])]
        for i, d in enumerate(decoded[:50]):
            for mask in masks:
                assert set((np.flatnonzero(mask[i]) + 1).tolist()) <= set(d.set.members)

    def test_vote_threshold_count(self, models):
        """Test le refus d'un nombre de seuils incohérent."""
        thresholds = calibrate_inputs(models[0][:2], APS, 0.1, EnsembleMode.VOTE)
        with pytest.raises(ConfigError):
            run_vote(models[1], thresholds)

    def test_run_inputs_average(self, models):
        """Test le point d'entrée commun en mode moyenne."""
        thresholds = calibrate_inputs(models[0], APS, 0.1, EnsembleMode.AVERAGE)
        decoded = run_inputs(models[1], thresholds, Decoder.CP_MEAN, EnsembleMode.AVERAGE)
        assert len(decoded) == 1500
