"""Package source de la boîte à outils de prédiction conforme ordinale."""
