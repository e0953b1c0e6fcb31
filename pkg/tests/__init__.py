"""Package de tests de la boîte à outils de prédiction conforme ordinale."""
