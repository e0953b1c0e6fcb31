"""
Module de configuration.
Valeurs par défaut, configuration d'une exécution validée avant tout calcul,
et mise en place de la journalisation.
"""

import argparse
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

from src.conformal import DEFAULT_ALPHA, check_alpha
from src.core import DEFAULT_K
from src.decode import Decoder
from src.exceptions import ConfigError
from src.pipeline import EnsembleMode
from src.scores import DEFAULT_LAMBDA, ScoreKind
from src.sweep import DEFAULT_ALPHA_GRID

DEFAULT_SEED = 42
# Part de calibration du découpage publié (4981 / 7310)
DEFAULT_FRACTION = 0.6814
DEFAULT_COARSE_MAPS = Path(__file__).resolve().parent.parent / "config" / "coarse_maps.json"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logger(
    name: str,
    log_file: Optional[Path] = None,
    level: int = logging.INFO,
) -> logging.Logger:
    """
    Configure un logger avec une sortie console et un fichier optionnel.

    Args:
        name: Nom du logger
        log_file: Chemin optionnel du fichier de log
        level: Niveau de journalisation

    Returns:
        Logger configuré
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)
    # Un second appel (tests, exécutions successives) remplace les handlers
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOG_FORMAT)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file is not None:
        log_file = Path(log_file)
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file, mode="a", encoding="utf-8")
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def _float_list(text: Optional[str], default: Tuple[float, ...]) -> Tuple[float, ...]:
    if text is None:
        return tuple(default)
    try:
        return tuple(float(part) for part in str(text).split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"liste de réels invalide : {text!r}") from None


def _name_list(text: Optional[str]) -> Tuple[str, ...]:
    if text is None:
        return ("naive", "aps", "raps")
    return tuple(part.strip().lower() for part in str(text).split(",") if part.strip())


def _paths(values) -> Tuple[Path, ...]:
    return tuple(Path(v) for v in (values or []))


@dataclass(frozen=True)
class RunConfig:
    """Paramètres d'une commande, construits depuis argparse."""

    command: str
    score: Optional[str] = None
    lam: float = DEFAULT_LAMBDA
    alpha: float = DEFAULT_ALPHA
    k: int = DEFAULT_K
    seed: int = DEFAULT_SEED
    inputs: Tuple[Path, ...] = ()
    calibration: Tuple[Path, ...] = ()
    thresholds: Tuple[Path, ...] = ()
    predictions: Optional[Path] = None
    gold: Optional[Path] = None
    coarse_maps: Optional[Path] = None
    decoder: str = Decoder.CP_MEAN.value
    ensemble: str = EnsembleMode.NONE.value
    out: Optional[Path] = None
    emit_weights: bool = False
    fraction: float = DEFAULT_FRACTION
    quotas: Optional[Path] = None
    alphas: Tuple[float, ...] = DEFAULT_ALPHA_GRID
    kinds: Tuple[str, ...] = ("naive", "aps", "raps")
    n: int = 1000
    models: int = 1
    dev_shaped: bool = False
    seeds: int = 100
    n_cal: int = 2000
    n_test: int = 2000

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        """
        Construit la configuration à partir des arguments de la ligne de commande.

        Args:
            args: Espace de noms produit par le parseur

        Returns:
            RunConfig (non encore validée)
        """
        values = vars(args)
        get = values.get
        return cls(
            command=get("command"),
            score=get("score"),
            lam=get("lam", DEFAULT_LAMBDA),
            alpha=get("alpha", DEFAULT_ALPHA),
            k=get("k", DEFAULT_K),
            seed=get("seed", DEFAULT_SEED),
            inputs=_paths(get("input")),
            calibration=_paths(get("calibration")),
            thresholds=_paths(get("threshold")),
            predictions=Path(get("predictions")) if get("predictions") else None,
            gold=Path(get("gold")) if get("gold") else None,
            coarse_maps=Path(get("coarse_maps")) if get("coarse_maps") else None,
            decoder=str(get("decoder", Decoder.CP_MEAN.value)).lower(),
            ensemble=str(get("ensemble", EnsembleMode.NONE.value)).lower(),
            out=Path(get("out")) if get("out") else None,
            emit_weights=bool(get("emit_weights", False)),
            fraction=get("fraction", DEFAULT_FRACTION),
            quotas=Path(get("quotas")) if get("quotas") else None,
            alphas=_float_list(get("alphas"), DEFAULT_ALPHA_GRID),
            kinds=_name_list(get("kinds")),
            n=get("n", 1000),
            models=get("models", 1),
            dev_shaped=bool(get("dev_shaped", False)),
            seeds=get("seeds", 100),
            n_cal=get("n_cal", 2000),
            n_test=get("n_test", 2000),
        )

    @property
    def score_kind(self) -> ScoreKind:
        """Score demandé ; APS si aucun n'est précisé."""
        return ScoreKind.from_name(self.score or "aps", self.lam)

    @property
    def score_kinds(self) -> List[ScoreKind]:
        return [ScoreKind.from_name(name, self.lam) for name in self.kinds]

    @property
    def decoder_choice(self) -> Decoder:
        return Decoder(self.decoder)

    @property
    def ensemble_mode(self) -> EnsembleMode:
        return EnsembleMode(self.ensemble)

    @property
    def coarse_maps_path(self) -> Path:
        return self.coarse_maps or DEFAULT_COARSE_MAPS

    @property
    def seed_list(self) -> List[int]:
        return [self.seed + i for i in range(self.seeds)]

    def validate(self) -> "RunConfig":
        """
        Vérifie la configuration avant tout calcul.

        Returns:
            La configuration elle-même

        Raises:
            ConfigError: valeur hors domaine, choix inconnu, argument requis absent
                ou fichier introuvable
        """
        check_alpha(self.alpha)
        for alpha in self.alphas:
            check_alpha(alpha)
        if not self.alphas:
            raise ConfigError("la grille d'alpha est vide")
        # La construction des ScoreKind valide les noms et lambda
        ScoreKind.from_name(self.score or "aps", self.lam)
        if not self.score_kinds:
            raise ConfigError("aucun score demandé")
        if int(self.k) != self.k or self.k < 2:
            raise ConfigError(f"k doit être un entier >= 2 (reçu {self.k})")
        if self.decoder not in {d.value for d in Decoder}:
            raise ConfigError(f"décodeur inconnu : {self.decoder!r} (argmax, cp_mean ou oracle)")
        if self.ensemble not in {m.value for m in EnsembleMode}:
            raise ConfigError(f"mode d'ensemble inconnu : {self.ensemble!r} (none, average ou vote)")
        if not 0.0 < self.fraction < 1.0:
            raise ConfigError(f"la fraction doit être dans (0, 1) (reçu {self.fraction!r})")
        for name in ("n", "models", "seeds", "n_cal", "n_test"):
            if getattr(self, name) < 1:
                raise ConfigError(f"--{name.replace('_', '-')} doit être >= 1")
        if self.out is None:
            raise ConfigError("--out est obligatoire")

        self._require(self.command)
        for path in self.inputs + self.calibration + self.thresholds + tuple(
            p for p in (self.predictions, self.gold, self.coarse_maps, self.quotas) if p is not None
        ):
            if not path.is_file():
                raise ConfigError(f"fichier introuvable : {path}")
        return self

    def _require(self, command: str) -> None:
        required = {
            "split": [("inputs", "--input")],
            "calibrate": [("calibration", "--calibration")],
            "predict": [("thresholds", "--threshold"), ("inputs", "--input")],
            "evaluate": [("predictions", "--predictions"), ("gold", "--gold")],
            "sweep": [("calibration", "--calibration"), ("inputs", "--input")],
        }.get(command, [])
        for attribute, flag in required:
            if not getattr(self, attribute):
                raise ConfigError(f"{command} : {flag} est obligatoire")
        if command in ("split", "sweep") and len(self.inputs) > 1:
            raise ConfigError(f"{command} : un seul --input attendu")
        if command == "sweep" and len(self.calibration) > 1:
            raise ConfigError("sweep : un seul --calibration attendu")
        if command == "predict" and self.decoder_choice is Decoder.ORACLE:
            raise ConfigError("le décodeur oracle demande la référence : réservé à evaluate")
        if command == "generate" and self.dev_shaped and self.k != DEFAULT_K:
            raise ConfigError(f"--dev-shaped suppose k={DEFAULT_K}")
