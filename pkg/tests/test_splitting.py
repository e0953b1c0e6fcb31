"""
Tests unitaires pour le module splitting.py
"""

import numpy as np
import pytest

from src.core import LabeledBatch
from src.exceptions import ConfigError, MissingGoldError
from src.splitting import class_counts, first_split_size, split_manifest, stratified_split
from src.synthetic import DEV_CAL_COUNTS, DEV_SPLIT_COUNTS, dev_split_golds, make_batch


@pytest.fixture(scope="module")
def dev_batch():
    """Fixture pour créer un lot aux effectifs du jeu de développement (7310 phrases)."""
    return make_batch(0, seed=1, golds=dev_split_golds())[0]


class TestFirstSplitSize:
    """Tests pour la taille de la première partie."""

    def test_rounding(self):
        """Test l'arrondi floor(f·n + 0.5)."""
        assert first_split_size(10, 0.65) == 7
        assert first_split_size(10, 0.25) == 3
        assert first_split_size(15, 0.8) == 12

    def test_clamping(self):
        """Test le bornage à [1, n-1]."""
        assert first_split_size(2, 0.99) == 1
        assert first_split_size(3, 0.01) == 1

    def test_singleton(self):
        """Test qu'une classe singleton va dans la première partie."""
        assert first_split_size(1, 0.3) == 1


class TestStratifiedSplit:
    """Tests pour le découpage stratifié."""

    def test_two_rows(self):
        """Test un lot de deux lignes et deux classes : une ligne de chaque côté."""
        batch = LabeledBatch.from_arrays(
            np.array([[0.5, 0.5], [0.5, 0.5]]), golds=[1, 2], ids=["a", "b"]
        )
        first, second = stratified_split(batch, 0.5, seed=0)
        assert (len(first), len(second)) == (1, 1)

    def test_lone_singleton_goes_first(self):
        """Test qu'une classe singleton isolée va dans la première partie."""
        batch = LabeledBatch.from_arrays(np.full((4, 3), 1 / 3), golds=[1, 1, 1, 3])
        first, second = stratified_split(batch, 0.3, seed=0)
        assert 3 in first.require_golds().tolist()
        assert len(first) == 2

    def test_two_rows_same_class(self):
        """Test deux lignes d'une même classe, fraction 0.5 : partage 1/1."""
        batch = LabeledBatch.from_arrays(np.full((2, 2), 0.5), golds=[1, 1], ids=["a", "b"])
        first, second = stratified_split(batch, 0.5, seed=0)
        assert (len(first), len(second)) == (1, 1)

    def test_deterministic(self, dev_batch):
        """Test la reproductibilité à graine fixée."""
        a = stratified_split(dev_batch, 0.6814, seed=42)
        b = stratified_split(dev_batch, 0.6814, seed=42)
        assert a[0].ids == b[0].ids
        c = stratified_split(dev_batch, 0.6814, seed=43)
        assert a[0].ids != c[0].ids

    def test_partition_keeps_order(self, dev_batch):
        """Test que les deux parties forment une partition dans l'ordre d'origine."""
        first, second = stratified_split(dev_batch, 0.6814, seed=42)
        assert sorted(first.ids + second.ids) == sorted(dev_batch.ids)
        position = {i: n for n, i in enumerate(dev_batch.ids)}
        assert [position[i] for i in first.ids] == sorted(position[i] for i in first.ids)

    def test_fraction_close_to_published(self, dev_batch):
        """Test les tailles par classe avec la fraction du découpage publié."""
        first, second = stratified_split(dev_batch, 0.6814, seed=42)
        counts = class_counts(first)
        expected = [first_split_size(n, 0.6814) for n in DEV_SPLIT_COUNTS]
        assert [counts[c] for c in range(1, 20)] == expected
        assert len(first) == sum(expected)
        # Écart de quelques unités par classe avec la table publiée
        assert all(abs(a - b) <= 6 for a, b in zip(expected, DEV_CAL_COUNTS))
        assert abs(len(first) - 4981) <= 1

    def test_quotas_reproduce_table(self, dev_batch):
        """Test que les quotas reproduisent exactement les lignes de la table publiée."""
        quotas = dict(zip(range(1, 20), DEV_CAL_COUNTS))
        first, second = stratified_split(dev_batch, 0.6814, seed=42, quotas=quotas)
        assert [class_counts(first)[c] for c in range(1, 20)] == list(DEV_CAL_COUNTS)
        assert (len(first), len(second)) == (4987, 2323)

    def test_impossible_quota(self, dev_batch):
        """Test le rejet d'un quota supérieur à l'effectif."""
        with pytest.raises(ConfigError):
            stratified_split(dev_batch, 0.5, seed=0, quotas={18: 14})

    def test_invalid_fraction(self, dev_batch):
        """Test le rejet d'une fraction hors de (0, 1)."""
        with pytest.raises(ConfigError):
            stratified_split(dev_batch, 1.0, seed=0)

    def test_missing_gold(self):
        """Test le rejet d'un lot sans référence."""
        batch = LabeledBatch.from_arrays(np.full((2, 2), 0.5))
        with pytest.raises(MissingGoldError):
            stratified_split(batch, 0.5, seed=0)


class TestManifest:
    """Tests pour le manifeste du découpage."""

    def test_manifest(self, dev_batch):
        """Test les lignes et totaux du manifeste."""
        quotas = dict(zip(range(1, 20), DEV_CAL_COUNTS))
        first, second = stratified_split(dev_batch, 0.6814, seed=42, quotas=quotas)
        manifest = split_manifest(dev_batch, first, second, 0.6814, 42)
        assert manifest["total"] == {"original": 7310, "cal": 4987, "tune": 2323, "ratio": "68:32"}
        assert manifest["classes"][0] == {
            "class": 1, "original": 44, "percent": 0.6, "cal": 32, "tune": 12, "ratio": "73:27",
        }
