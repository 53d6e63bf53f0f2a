#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
FedDis Lab - Command Line Runner

Entry point for generating phantom site data, training a federation,
segmenting lesioned test sets, evaluating and comparing strategies.

    feddis.py data generate --config configs/desk.json --out runs/data
    feddis.py train --config configs/desk.json --strategy feddis --out runs/feddis
    feddis.py segment --model runs/feddis/train/checkpoints/final --data runs/feddis/data --out seg
    feddis.py evaluate --config configs/desk.json --out runs/feddis
    feddis.py run --config configs/desk.json --out runs/feddis
    feddis.py compare --runs runs/feddis runs/fedavg --baseline fedavg --out runs/compare
    feddis.py export-embeddings --model runs/feddis/train/checkpoints/final --data runs/feddis/data --out emb

Exit codes: 0 success, 1 invalid configuration, arguments or input, 2 runtime
failure.

MIT License
See LICENSE file for full license text.
"""

import os
import sys
import json
import logging
import argparse
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

# Add lib to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from lib.analysis.base_analyzer import EvaluationData
from lib.analysis.comparison import compare_strategies
from lib.analysis.evaluation_analyzer import (
    FLOAT_FORMAT,
    SegmentationAnalyzer,
    export_embeddings,
    save_embeddings,
)
from lib.analysis.orchestrator import ExperimentOrchestrator, label_dirname
from lib.analysis.report_generator import ReportGenerator
from lib.analysis.segmentation import save_segmentations
from lib.data.phantom_generator import build_site_datasets
from lib.exceptions import ConfigurationError
from lib.models.config import ExperimentConfig, MetricsConfig, PostprocessConfig
from lib.network.params import ModelParams
from lib.services.checkpoint_service import CheckpointService
from lib.services.dataset_store import DatasetStore
from lib.utils.config_validator import load_validated_config
from lib.utils.formatters import DataFormatter
from lib.visualizations.results_visualizer import ResultsVisualizer

DEFAULT_CONFIG = Path(__file__).resolve().parent / "configs" / "desk.json"

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


def setup_logging(output_dir: Optional[str] = None, verbose: bool = False):
    """Setup logging configuration."""
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if output_dir:
        Path(output_dir).mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(Path(output_dir) / "feddis.log"))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def load_config(args: argparse.Namespace, out_is_run_dir: bool = True) -> ExperimentConfig:
    """Read the config file, apply CLI overrides and validate."""
    path = args.config or DEFAULT_CONFIG
    with open(path, "r", encoding="utf-8") as f:
        raw: Dict[str, Any] = json.load(f)
    if not isinstance(raw, dict):
        raise ConfigurationError(f"Config {path} must hold a JSON object")
    overrides: Dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        raw["seed"] = overrides["seed"] = args.seed
    if getattr(args, "strategy", None):
        overrides["strategy"] = args.strategy
    if overrides and isinstance(raw.get("federation", {}), dict):
        raw.setdefault("federation", {}).update(overrides)
    if out_is_run_dir and getattr(args, "out", None):
        raw["output_dir"] = args.out
    return load_validated_config(raw)


def load_models(model_path: str, label: Optional[str] = None) -> Dict[str, ModelParams]:
    """Models from a checkpoint.

    A directory holding state.json is a saved federation state and yields its
    evaluation models; anything else names a single .npz/.json archive pair.
    """
    path = Path(model_path)
    if (path / "state.json").exists():
        return CheckpointService(str(path.parent)).load_state(path.name).models()
    name = path.name[:-4] if path.suffix == ".npz" else path.name
    params = CheckpointService(str(path.parent)).load(name)
    return {label or params.owner: params}


def cmd_data_generate(args: argparse.Namespace) -> int:
    config = load_config(args)
    store = DatasetStore(args.out)
    datasets = build_site_datasets(config.data, config.seed)
    store.save(datasets, config.data, config.data_hash())
    print(f"✅ Generated {len(datasets)} sites in {args.out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = load_config(args)
    orchestrator = ExperimentOrchestrator(config, resume=args.resume)
    state = orchestrator.run_train_stage()
    last = state.history[-1] if state.history else None
    print(f"✅ {state.strategy}: {state.rounds_completed} rounds")
    if last is not None:
        print(f"   - Final validation L_Rec: {last.val_rec_loss:.5f}")
    return EXIT_OK


def cmd_segment(args: argparse.Namespace) -> int:
    if not args.model:
        config = load_config(args)
        dice_scores = ExperimentOrchestrator(config, resume=args.resume).run_segment_stage()
        print(f"✅ Scored {len(dice_scores)} slices in {config.output_dir}/segment")
        return EXIT_OK

    if not args.data or not args.out:
        raise ValueError("--data and --out are required together with --model")
    postprocess, metrics = PostprocessConfig(), MetricsConfig()
    if args.config:
        config = load_config(args)
        postprocess, metrics = config.postprocess, config.metrics

    store = DatasetStore(args.data)
    data = EvaluationData(datasets=store.load(), roles=store.roles())
    analyzer = SegmentationAnalyzer(load_models(args.model), data, metrics, postprocess=postprocess)
    results = analyzer.analyze_all()

    out_dir = Path(args.out)
    for (label, dataset), masks in sorted(analyzer.segmentations.items()):
        save_segmentations(masks, out_dir / label_dirname(label) / dataset)
    results["dice_scores"].to_csv(out_dir / "dice_scores.csv", index=False, float_format=FLOAT_FORMAT)
    results["stratified_dice"].to_csv(out_dir / "stratified_dice.csv", index=False, float_format=FLOAT_FORMAT)
    print(f"✅ Segmented {len(results['dice_scores'])} slices into {out_dir}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = load_config(args)
    report = ExperimentOrchestrator(config, resume=args.resume).run_evaluate_stage()
    print(DataFormatter.apply_precision_formatting(report.table()).to_string(index=False))
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args)
    start_time = datetime.now()
    orchestrator = ExperimentOrchestrator(config, resume=args.resume)
    orchestrator.run_experiment()
    duration = (datetime.now() - start_time).total_seconds()
    print(f"🎉 Experiment {config.name} complete in {duration:.1f}s")
    print(f"📝 See {config.output_dir}/report/report.md")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    metrics = load_config(args).metrics if args.config else MetricsConfig()
    report = compare_strategies(
        args.runs, args.baseline,
        buckets=metrics.area_buckets_mm2, significance=metrics.significance,
    )
    out_dir = Path(args.out)
    report.save(out_dir)
    visualizer = ResultsVisualizer(str(out_dir / "visuals"))
    viz_paths = visualizer.create_all_visualizations({
        "summary": report.summary,
        "stratified_dice": report.stratified,
    })
    generator = ReportGenerator(str(out_dir))
    generator.save_report(generator.generate_report(report, viz_paths=viz_paths, significance=metrics.significance))
    print(DataFormatter.apply_precision_formatting(report.table()).to_string(index=False))
    return EXIT_OK


def cmd_export_embeddings(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    if args.model:
        if not args.data:
            raise ValueError("--data is required together with --model")
        store = DatasetStore(args.data)
        data = EvaluationData(datasets=store.load(), roles=store.roles())
        models = load_models(args.model)
        seed = args.seed if args.seed is not None else 0
        gamma_range = (0.5, 2.0)
        if args.config:
            config = load_config(args, out_is_run_dir=False)
            seed, gamma_range = config.seed, config.federation.gamma_range
    else:
        config = load_config(args, out_is_run_dir=False)
        orchestrator = ExperimentOrchestrator(config, resume=args.resume)
        data, models = orchestrator.evaluation_data(), orchestrator.models()
        seed, gamma_range = config.seed, config.federation.gamma_range

    healthy = {site: data.datasets[site][0].test for site in data.site_ids()}
    for label, params in models.items():
        records = export_embeddings(params, healthy, gamma_range=gamma_range, seed=seed)
        save_embeddings(records, out_dir / f"{label_dirname(label)}.csv")
    print(f"✅ Exported embeddings of {len(models)} models to {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feddis",
        description="Federated disentangled autoencoders for anomaly segmentation on synthetic phantoms",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log per-batch losses")
    commands = parser.add_subparsers(dest="command", required=True)

    def common(sub: argparse.ArgumentParser, out_required: bool = False) -> None:
        sub.add_argument("--config", help=f"Experiment config JSON (default {DEFAULT_CONFIG.name})")
        sub.add_argument("--out", required=out_required, help="Output directory")
        sub.add_argument("--seed", type=int, help="Override the config seed")
        sub.add_argument("--strategy", help="Override the federation strategy")
        sub.add_argument("--resume", action=argparse.BooleanOptionalAction, default=True,
                         help="Resume completed stages and the latest checkpoint")

    data = commands.add_parser("data", help="Phantom dataset commands")
    data_commands = data.add_subparsers(dest="data_command", required=True)
    generate = data_commands.add_parser("generate", help="Generate and persist site datasets")
    common(generate, out_required=True)
    generate.set_defaults(handler=cmd_data_generate)

    train = commands.add_parser("train", help="Run the federation")
    common(train)
    train.set_defaults(handler=cmd_train)

    segment = commands.add_parser("segment", help="Segment lesioned test sets")
    common(segment)
    segment.add_argument("--model", help="Checkpoint archive or saved federation state directory")
    segment.add_argument("--data", help="Dataset directory written by 'data generate'")
    segment.set_defaults(handler=cmd_segment)

    evaluate = commands.add_parser("evaluate", help="DICE, SSIM and SAS/SCS for a run")
    common(evaluate)
    evaluate.set_defaults(handler=cmd_evaluate)

    run = commands.add_parser("run", help="Run every stage")
    common(run)
    run.set_defaults(handler=cmd_run)

    compare = commands.add_parser("compare", help="Compare completed runs against a baseline")
    compare.add_argument("--runs", nargs="+", required=True, help="Run directories")
    compare.add_argument("--baseline", required=True, help="Baseline model label")
    compare.add_argument("--config", help="Config providing metric settings")
    compare.add_argument("--out", required=True, help="Output directory")
    compare.set_defaults(handler=cmd_compare)

    embeddings = commands.add_parser("export-embeddings", help="Export z_S, z_A and z_gS per slice")
    common(embeddings, out_required=True)
    embeddings.add_argument("--model", help="Checkpoint archive or saved federation state directory")
    embeddings.add_argument("--data", help="Dataset directory written by 'data generate'")
    embeddings.set_defaults(handler=cmd_export_embeddings)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments and dispatch; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors; keep 2 for runtime failures
        return EXIT_OK if e.code in (0, None) else EXIT_INVALID
    setup_logging(args.out, verbose=args.verbose)
    try:
        return args.handler(args)
    except ValueError as e:
        logging.error(f"Invalid input: {e}")
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:
        logging.exception(f"Run failed: {e}")
        print(f"❌ Run failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
