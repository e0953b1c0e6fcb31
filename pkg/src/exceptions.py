"""
Module des erreurs de la boîte à outils.
Chaque erreur porte le code de sortie renvoyé par la ligne de commande.
"""


class ToolkitError(ValueError):
    """Erreur de base de la boîte à outils."""

    exit_code = 1


class ParseError(ToolkitError):
    """Fichier d'entrée illisible ou lignes mal formées."""

    exit_code = 2

    def __init__(self, message: str, line_numbers=None):
        self.line_numbers = list(line_numbers or [])
        if self.line_numbers:
            shown = ", ".join(str(n) for n in self.line_numbers[:20])
            if len(self.line_numbers) > 20:
                shown += ", ..."
            message = f"{message} (lignes {shown})"
        super().__init__(message)


class MissingGoldError(ToolkitError):
    """Étiquette de référence absente là où elle est requise."""

    exit_code = 3


class ConfigError(ToolkitError):
    """Configuration invalide (alpha, lambda, chemins, choix inconnus)."""

    exit_code = 4


class KindMismatchError(ToolkitError):
    """Le seuil a été calibré avec un autre score que celui demandé."""

    exit_code = 5


class IdMismatchError(ToolkitError):
    """Les identifiants de deux fichiers ne correspondent pas."""

    exit_code = 6


class InvalidProbabilityError(ToolkitError):
    """Vecteur de probabilités qui viole les invariants."""


class AllZeroError(InvalidProbabilityError):
    """Toutes les entrées sont nulles après écrêtage."""


class NegativeEntryError(InvalidProbabilityError):
    """Une entrée est négative au-delà de la tolérance."""


class UnknownLabelError(ToolkitError):
    """Étiquette hors de l'intervalle 1..k."""


class EmptyBatchError(ToolkitError):
    """Lot vide là où au moins un exemple est requis."""


class EmptySetError(ToolkitError):
    """Ensemble de prédiction vide."""


class EmptyListError(ToolkitError):
    """Liste vide passée à un décodeur d'ensemble ou d'agrégation."""


class MixedKError(ToolkitError):
    """Vecteurs de tailles différentes dans un même ensemble."""


class LengthMismatchError(ToolkitError):
    """Listes de longueurs différentes."""


class EmptyInputError(ToolkitError):
    """Aucune observation à évaluer."""
