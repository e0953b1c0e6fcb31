"""
Module de la ligne de commande.
Sous-commandes split, calibrate, predict, evaluate, sweep, generate et simulate ;
chaque commande valide sa configuration, calcule, puis écrit ses fichiers de
façon atomique.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, Optional, Sequence

import pandas as pd

from src.conformal import CalibratedThreshold
from src.config import DEFAULT_FRACTION, DEFAULT_SEED, RunConfig, setup_logger
from src.core import DEFAULT_K
from src.database import ResultStore
from src.decode import Decoder, decode_oracle, document_level
from src.exceptions import (
    ConfigError,
    IdMismatchError,
    KindMismatchError,
    ParseError,
    ToolkitError,
)
from src.ingestion import (
    OutputWriter,
    predictions_frame,
    probability_frame,
    read_predictions_file,
    read_probability_file,
    read_probability_files,
    read_reference_file,
    sets_from_frame,
    weights_lines,
)
from src.metrics import CoarseMap, evaluate_predictions, load_coarse_maps
from src.pipeline import EnsembleMode, calibrate_inputs, merged_batch, run_inputs
from src.scores import DEFAULT_LAMBDA
from src.splitting import split_manifest, stratified_split
from src.sweep import alpha_sweep, baseline_qwk
from src.synthetic import (
    SyntheticConfig,
    dev_split_golds,
    make_batch,
    simulate_coverage,
    summarize_simulation,
)

logger = logging.getLogger(__name__)


class ToolkitArgumentParser(argparse.ArgumentParser):
    """Parseur dont les erreurs deviennent des erreurs de configuration (code 4)."""

    def error(self, message):
        raise ConfigError(message)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", help="Répertoire de sortie")
    parser.add_argument("--k", type=int, default=DEFAULT_K, help="Nombre de niveaux")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Graine")
    parser.add_argument("--verbose", action="store_true", help="Journalisation DEBUG")
    parser.add_argument("--log-file", dest="log_file", help="Fichier de log")


def _scoring(parser: argparse.ArgumentParser, score_default: Optional[str] = "aps") -> None:
    parser.add_argument("--score", default=score_default, help="naive, aps ou raps")
    parser.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA,
                        help="Pénalité de rang de RAPS")
    parser.add_argument("--alpha", type=float, default=0.10, help="Taux de non-couverture")
    parser.add_argument("--ensemble", default="none", help="none, average ou vote")


def build_parser() -> argparse.ArgumentParser:
    """Construit le parseur et ses sous-commandes."""
    parser = ToolkitArgumentParser(
        prog="conformal-ordinal",
        description="Prédiction conforme pour la classification ordinale",
    )
    commands = parser.add_subparsers(dest="command", parser_class=ToolkitArgumentParser)
    commands.required = True

    split = commands.add_parser("split", help="Découpage stratifié calibration / réglage")
    _common(split)
    split.add_argument("--input", action="append", help="Fichier de probabilités annoté")
    split.add_argument("--fraction", type=float, default=DEFAULT_FRACTION)
    split.add_argument("--quotas", help="JSON classe -> taille de la partie calibration")

    calibrate = commands.add_parser("calibrate", help="Calibration du seuil conforme")
    _common(calibrate)
    _scoring(calibrate)
    calibrate.add_argument("--calibration", action="append", help="Fichier de calibration (répétable)")

    predict = commands.add_parser("predict", help="Ensembles de prédiction et décodage")
    _common(predict)
    _scoring(predict, score_default=None)
    predict.add_argument("--threshold", action="append", help="Fichier de seuil (répétable)")
    predict.add_argument("--input", action="append", help="Fichier de probabilités (répétable)")
    predict.add_argument("--decoder", default="cp_mean", help="argmax, cp_mean ou oracle")
    predict.add_argument("--emit-weights", dest="emit_weights", action="store_true")

    evaluate = commands.add_parser("evaluate", help="Rapport d'évaluation")
    _common(evaluate)
    evaluate.add_argument("--predictions", help="Fichier id,pred,baseline,set")
    evaluate.add_argument("--gold", help="Fichier de références")
    evaluate.add_argument("--decoder", default="cp_mean", help="argmax, cp_mean ou oracle")
    evaluate.add_argument("--coarse-maps", dest="coarse_maps", help="Tables 19 -> 7/5/3")

    sweep = commands.add_parser("sweep", help="Balayage en alpha")
    _common(sweep)
    sweep.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    sweep.add_argument("--calibration", action="append", help="Fichier de calibration")
    sweep.add_argument("--input", action="append", help="Fichier de réglage")
    sweep.add_argument("--alphas", help="Grille, ex. 0.05,0.1,0.2")
    sweep.add_argument("--kinds", help="Scores, ex. naive,aps,raps")

    generate = commands.add_parser("generate", help="Fichier de probabilités synthétique")
    _common(generate)
    generate.add_argument("--n", type=int, default=1000)
    generate.add_argument("--models", type=int, default=1)
    generate.add_argument("--dev-shaped", dest="dev_shaped", action="store_true",
                          help="Reproduit les effectifs par niveau du jeu de développement")

    simulate = commands.add_parser("simulate", help="Simulation de couverture")
    _common(simulate)
    simulate.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    simulate.add_argument("--alphas", help="Grille, ex. 0.05,0.1,0.2")
    simulate.add_argument("--kinds", help="Scores, ex. naive,aps,raps")
    simulate.add_argument("--seeds", type=int, default=100, help="Nombre de graines")
    simulate.add_argument("--n-cal", dest="n_cal", type=int, default=2000)
    simulate.add_argument("--n-test", dest="n_test", type=int, default=2000)

    return parser


def cmd_split(config: RunConfig) -> None:
    """Découpe un fichier annoté en dev-cal / dev-tune et écrit le manifeste."""
    batch = read_probability_file(config.inputs[0], config.k)
    quotas = _read_quotas(config.quotas) if config.quotas else None
    first, second = stratified_split(batch, config.fraction, config.seed, quotas)
    manifest = split_manifest(batch, first, second, config.fraction, config.seed)
    with OutputWriter(config.out) as writer:
        writer.write_frame("dev-cal.csv", probability_frame(first))
        writer.write_frame("dev-tune.csv", probability_frame(second))
        writer.write_json("split_manifest.json", manifest)


def _read_quotas(path: Path) -> Dict[int, int]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return {int(label): int(size) for label, size in data.items() if not str(label).startswith("_")}
    except (OSError, json.JSONDecodeError, AttributeError, ValueError) as exc:
        raise ParseError(f"fichier de quotas invalide ({path}): {exc}") from exc


def cmd_calibrate(config: RunConfig) -> None:
    """Calibre un seuil (ou un seuil par modèle en mode vote)."""
    batches = read_probability_files(config.calibration, config.k)
    thresholds = calibrate_inputs(batches, config.score_kind, config.alpha, config.ensemble_mode)
    with OutputWriter(config.out) as writer:
        if len(thresholds) == 1:
            writer.write_text("threshold.json", thresholds[0].to_json())
        else:
            for i, threshold in enumerate(thresholds, start=1):
                writer.write_text(f"threshold-{i}.json", threshold.to_json())


def _read_threshold(path: Path) -> CalibratedThreshold:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: lecture impossible ({exc})") from exc
    return CalibratedThreshold.from_json(text)


def cmd_predict(config: RunConfig) -> None:
    """Ensembles conformes, étiquettes décodées et niveaux par document."""
    thresholds = [_read_threshold(path) for path in config.thresholds]
    if config.score is not None:
        requested = config.score_kind
        for path, threshold in zip(config.thresholds, thresholds):
            if not requested.matches(threshold.kind):
                raise KindMismatchError(
                    f"{path}: seuil calibré avec {threshold.kind}, score demandé {requested}"
                )
    if config.ensemble_mode is not EnsembleMode.VOTE and len(thresholds) > 1:
        raise ConfigError("plusieurs seuils demandent --ensemble vote")
    batches = read_probability_files(config.inputs, config.k)
    decoded = run_inputs(batches, thresholds, config.decoder_choice, config.ensemble_mode)
    reference = merged_batch(batches) if config.ensemble_mode is not EnsembleMode.VOTE else batches[0]
    doc_ids = {example.id: example.doc_id for example in reference.examples}

    with OutputWriter(config.out) as writer:
        writer.write_frame("predictions.csv", predictions_frame(decoded))
        if config.emit_weights:
            writer.write_text("weights.jsonl", weights_lines(decoded))
        sentences = [(doc_ids[d.id], d.point, d.baseline_point) for d in decoded if doc_ids.get(d.id)]
        if sentences:
            preds = document_level((doc, point) for doc, point, _ in sentences)
            baselines = document_level((doc, base) for doc, _, base in sentences)
            documents = pd.DataFrame(
                {"doc_id": list(preds), "pred": list(preds.values()),
                 "baseline": [baselines[d] for d in preds]},
                columns=["doc_id", "pred", "baseline"],
            )
            writer.write_frame("documents.csv", documents)
    logger.info("%d prédictions décodées (%s, %s)", len(decoded), config.decoder, config.ensemble)


def _coarse_maps(config: RunConfig) -> Optional[Dict[str, CoarseMap]]:
    maps = load_coarse_maps(config.coarse_maps_path)
    if all(cmap.k == config.k for cmap in maps.values()):
        return maps
    if config.coarse_maps is not None:
        raise ConfigError(f"{config.coarse_maps}: les tables ne couvrent pas 1..{config.k}")
    logger.warning("Tables grossières par défaut non adaptées à k=%d : acc7/acc5/acc3 omis", config.k)
    return None


def cmd_evaluate(config: RunConfig) -> None:
    """Aligne prédictions et références, puis écrit le rapport complet."""
    coarse_maps = _coarse_maps(config)
    references = read_reference_file(config.gold, config.k)
    predictions = read_predictions_file(config.predictions, config.k)

    store = ResultStore()
    try:
        store.load_gold(references)
        store.load_predictions(predictions)
        only_predictions, only_gold = store.find_id_mismatches()
        if only_predictions or only_gold:
            sample = (only_predictions or only_gold)[0]
            raise IdMismatchError(
                f"{len(only_predictions)} identifiant(s) sans référence, "
                f"{len(only_gold)} référence(s) sans prédiction (ex. {sample})"
            )
        aligned = store.aligned_frame()
        tags = references.group_tags()
        breakdown = store.failure_breakdown(tags)
    finally:
        store.close()

    golds = aligned["gold"].astype(int).tolist()
    sets = sets_from_frame(aligned["members"], references.examples, config.k)
    stored = aligned["pred"].astype(int).tolist()
    baselines = aligned["baseline"].astype(int).tolist()
    decoder = config.decoder_choice
    if decoder is Decoder.ARGMAX:
        points = baselines
    elif decoder is Decoder.ORACLE:
        points = [decode_oracle(s, g, fallback) for s, g, fallback in zip(sets, golds, stored)]
    else:
        points = stored

    doc_ids = [example.doc_id for example in references.examples]
    report = evaluate_predictions(
        golds,
        points,
        baselines,
        sets,
        config.k,
        ids=references.ids,
        coarse_maps=coarse_maps,
        tags=[example.groups for example in references.examples],
        doc_ids=doc_ids if any(doc_ids) else None,
    )
    with OutputWriter(config.out) as writer:
        writer.write_json("report.json", report.to_dict())
        writer.write_frame("report.csv", report.to_frame())
        writer.write_frame("failure_breakdown.csv", breakdown)


def cmd_sweep(config: RunConfig) -> None:
    """Table QWK / couverture / taille moyenne sur la grille d'alpha."""
    cal = read_probability_file(config.calibration[0], config.k)
    tune = read_probability_file(config.inputs[0], config.k)
    table = alpha_sweep(cal, tune, config.score_kinds, config.alphas)
    summary = {
        "baseline_qwk": baseline_qwk(tune),
        "rows": table.to_dict(orient="records"),
    }
    with OutputWriter(config.out) as writer:
        writer.write_frame("sweep.csv", table)
        writer.write_json("sweep.json", summary)


def cmd_generate(config: RunConfig) -> None:
    """Écrit un ou plusieurs fichiers de probabilités synthétiques alignés."""
    synthetic = SyntheticConfig(k=config.k)
    golds = dev_split_golds() if config.dev_shaped else None
    batches = make_batch(config.n, config.seed, synthetic, golds=golds, models=config.models)
    with OutputWriter(config.out) as writer:
        if len(batches) == 1:
            writer.write_frame("synthetic.csv", probability_frame(batches[0]))
        else:
            for i, batch in enumerate(batches, start=1):
                writer.write_frame(f"synthetic-{i}.csv", probability_frame(batch))


def cmd_simulate(config: RunConfig) -> None:
    """Simulation de Monte-Carlo de la couverture."""
    frame = simulate_coverage(
        config.score_kinds,
        config.alphas,
        config.n_cal,
        config.n_test,
        config.seed_list,
        SyntheticConfig(k=config.k),
    )
    with OutputWriter(config.out) as writer:
        writer.write_frame("simulation.csv", frame)
        writer.write_frame("simulation_summary.csv", summarize_simulation(frame))


COMMANDS = {
    "split": cmd_split,
    "calibrate": cmd_calibrate,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "generate": cmd_generate,
    "simulate": cmd_simulate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Point d'entrée de la ligne de commande.

    Args:
        argv: Arguments (sys.argv[1:] par défaut)

    Returns:
        Code de sortie : 0 succès, 2 lecture, 3 référence absente, 4 configuration,
        5 score incompatible, 6 identifiants non alignés
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    root = setup_logger("src", level=logging.DEBUG if "--verbose" in argv else logging.INFO)
    try:
        args = build_parser().parse_args(argv)
        root = setup_logger(
            "src",
            log_file=args.log_file,
            level=logging.DEBUG if args.verbose else logging.INFO,
        )
        config = RunConfig.from_args(args).validate()
        COMMANDS[config.command](config)
    except ToolkitError as exc:
        root.error("%s", exc)
        return exc.exit_code
    return 0
