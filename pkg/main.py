#!/usr/bin/env python3
"""
murssl - Main Application

Command-line entry point for training semi-supervised classifiers with
consistency regularization, variational dropout and maximum uncertainty
regularization, and for the sweeps and analyses built on top of training.
"""

import sys
import argparse
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

# Add project root to path for imports
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from config.config_loader import ExperimentConfig, apply_overrides, config_to_dict, reload_config
from src.classifiers.checkpoint import load_checkpoint
from src.datasets.io import read_dataset_csv
from src.experiments import (
    check_kl,
    compare_rr,
    dump_virtual_points,
    resolve_mur_config,
    run_experiment,
    sensitivity_sweep,
    sweep_kl,
    sweep_radius,
    sweep_solver,
)
from src.experiments.runner import DEFAULT_KL_PEAKS, DEFAULT_RADIUS_MULTIPLES, DEFAULT_SOLVER_GRID
from src.utils.errors import MursslError, UsageError
from src.utils.logger import setup_logging

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_ERROR = 2

DEFAULT_RR_RADII = (0.0, 0.05, 0.1, 0.2, 0.4)


def cli_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Dotted config overrides for the flags that were actually given."""
    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["experiment.seeds"] = [args.seed]
    if args.method is not None:
        overrides["experiment.method"] = args.method
    if args.vbi is not None:
        overrides["vbi.enabled"] = args.vbi == "on"
    if args.mur_solver == "off":
        overrides["mur.enabled"] = False
    elif args.mur_solver is not None:
        overrides["mur.enabled"] = True
        overrides["mur.solver"] = args.mur_solver
    if args.radius is not None:
        overrides["mur.radius"] = args.radius
    if args.steps is not None:
        overrides["experiment.total_steps"] = args.steps
    if args.out is not None:
        overrides["experiment.output_dir"] = args.out
    return overrides


def _dataset_for_checkpoint(checkpoint: str, data: Optional[str], n_classes: int):
    path = Path(data) if data else Path(checkpoint).parent / "dataset.csv"
    if not path.exists():
        raise FileNotFoundError(f"Dataset CSV not found: {path} (pass --data)")
    return read_dataset_csv(path, n_classes=n_classes)


def run_command(args: argparse.Namespace, config: ExperimentConfig) -> int:
    """Dispatch one subcommand; returns the exit code."""
    logger = logging.getLogger(__name__)
    out = Path(config.experiment.output_dir)

    if args.command == "train":
        run_experiment(config)
        if config.experiment.rr_baseline and config.mur.enabled:
            logger.info("🔧 Running random-regularization baseline...")
            rr_config = apply_overrides(config, {"mur.solver": "random"})
            run_experiment(rr_config, out / "rr_baseline")

    elif args.command == "sweep-radius":
        result = sweep_radius(config, args.multiples, out)
        logger.info(f"✅ Radius sweep written to {result.grid_path}")

    elif args.command == "compare-rr":
        result = compare_rr(config, args.radii, out)
        logger.info(f"✅ MUR vs RR grid written to {result.grid_path}")

    elif args.command == "sweep-kl":
        result = sweep_kl(config, args.peaks, out)
        logger.info(f"✅ KL sweep written to {result.grid_path}")

    elif args.command == "sweep-solver":
        result = sweep_solver(config, args.solvers, args.step_sizes, args.solver_steps, out)
        logger.info(f"✅ Solver sweep written to {result.grid_path}")

    elif args.command == "sensitivity":
        spec, _, _ = load_checkpoint(args.checkpoint)
        dataset = _dataset_for_checkpoint(args.checkpoint, args.data, spec.n_classes)
        sensitivity_sweep(args.checkpoint, getattr(dataset, args.split), args.bin_width, out)

    elif args.command == "dump-virtual-points":
        spec, _, metadata = load_checkpoint(args.checkpoint)
        dataset = _dataset_for_checkpoint(args.checkpoint, args.data, spec.n_classes)
        mur_cfg = resolve_mur_config(config, dataset)
        if mur_cfg is None:
            raise UsageError("dump-virtual-points needs MUR enabled (choose a --mur-solver)")
        seed = args.seed if args.seed is not None else int(metadata.get("seed", 0))
        dump_virtual_points(args.checkpoint, dataset, mur_cfg, out / "virtual_points.csv", seed, args.split)

    elif args.command == "check-kl":
        validation = check_kl(n_draws=args.draws, seed=args.seed or 0, tolerance=args.tolerance,
                              path=out / "kl_check.csv")
        if not validation.passed(args.tolerance):
            logger.error(f"❌ KL approximation deviates by {validation.max_deviation:.4f} nats")
            return EXIT_ERROR

    elif args.command == "plot":
        # matplotlib is only needed here
        from src.experiments import plots

        target = Path(args.figure)
        if args.kind == "virtual-points":
            plots.plot_virtual_points(args.inputs[0], target, data_csv=args.data)
        elif args.kind == "sensitivity":
            plots.plot_sensitivity_histogram(args.inputs[0], target)
        elif args.kind == "metrics":
            plots.plot_metrics(args.inputs, target)
        else:
            plots.plot_sweep(args.inputs[0], target, x=args.x, metric=args.metric, group=args.group)

    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)

    # Configuration
    common.add_argument('--config', type=str, help='Configuration file path (default: config.yaml)')
    common.add_argument('--print-config', action='store_true',
                        help='Print the fully resolved configuration and exit')
    common.add_argument('--validate-only', action='store_true', help='Validate configuration and exit')

    # Overrides
    common.add_argument('--seed', type=int, help='Run a single seed instead of the configured list')
    common.add_argument('--method', choices=['pi', 'mt', 'ict', 'mut'], help='Training method')
    common.add_argument('--vbi', choices=['on', 'off'], help='Variational dropout on or off')
    common.add_argument('--mur-solver', choices=['direct', 'pga', 'laga', 'lagrangian-ga', 'random', 'off'],
                        help='Virtual point solver, or off to disable MUR')
    common.add_argument('--radius', type=float, help='Fixed MUR radius')
    common.add_argument('--steps', type=int, help='Total training steps')
    common.add_argument('--out', type=str, help='Output directory')

    # Logging
    common.add_argument('--debug', action='store_true', help='Enable debug logging')
    common.add_argument('--log-file', type=str, help='Log to file in addition to console')

    parser = argparse.ArgumentParser(
        description='murssl - Semi-supervised learning with maximum uncertainty regularization',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
COMMANDS:
  train                Train every configured seed, write metrics.csv per seed and summary.yaml
  sweep-radius         Test error over multiples of the data-scaled radius
  compare-rr           MUR (direct solver) against random regularization over radii
  sweep-kl             Test error and pruned fraction over KL coefficient peaks
  sweep-solver         Test error and mean entropy-gradient norm over PGA/LaGA settings
  sensitivity          Jacobian sensitivity of a checkpoint on a dataset split
  dump-virtual-points  Virtual points of a checkpoint as CSV
  check-kl             Closed-form KL against its Monte-Carlo estimate
  plot                 Render figures from emitted CSVs

EXAMPLES:
  python main.py train                                  # Configured experiment
  python main.py train --method mt --vbi on --seed 3    # One Mean Teacher + VD run
  python main.py train --mur-solver pga --radius 0.1    # PGA virtual points with r = 0.1
  python main.py compare-rr --radii 0 0.05 0.1 --out runs/rr
  python main.py sensitivity --checkpoint runs/default/seed_0/model.bin
  python main.py plot sweep --inputs runs/rr/compare_rr_grid.csv --x radius --group method --figure rr.png
  python main.py train --print-config                   # Show the resolved configuration
        """
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    subparsers.add_parser('train', parents=[common], help='Train the configured experiment')

    p = subparsers.add_parser('sweep-radius', parents=[common], help='Radius sweep')
    p.add_argument('--multiples', type=float, nargs='+', default=list(DEFAULT_RADIUS_MULTIPLES),
                   help='Multiples of the configured radius scale')

    p = subparsers.add_parser('compare-rr', parents=[common], help='MUR vs random regularization')
    p.add_argument('--radii', type=float, nargs='+', default=list(DEFAULT_RR_RADII), help='Radii to compare')

    p = subparsers.add_parser('sweep-kl', parents=[common], help='KL coefficient sweep')
    p.add_argument('--peaks', type=float, nargs='+', default=list(DEFAULT_KL_PEAKS), help='KL coefficient peaks')

    p = subparsers.add_parser('sweep-solver', parents=[common], help='Iterative solver ablation')
    p.add_argument('--solvers', nargs='+', default=['pga', 'lagrangian-ga'], help='Iterative solvers')
    p.add_argument('--step-sizes', type=float, nargs='+', default=list(DEFAULT_SOLVER_GRID['step_size']))
    p.add_argument('--solver-steps', type=int, nargs='+', default=list(DEFAULT_SOLVER_GRID['steps']))

    for name, split, helptext in (('sensitivity', 'test', 'Checkpoint sensitivity histogram'),
                                  ('dump-virtual-points', 'unlabeled', 'Checkpoint virtual points')):
        p = subparsers.add_parser(name, parents=[common], help=helptext)
        p.add_argument('--checkpoint', required=True, help='Checkpoint .bin path')
        p.add_argument('--data', help='Dataset CSV (default: dataset.csv next to the checkpoint)')
        p.add_argument('--split', choices=['labeled', 'unlabeled', 'test'], default=split)
        if name == 'sensitivity':
            p.add_argument('--bin-width', type=float, default=0.05, help='Histogram bin width')

    p = subparsers.add_parser('check-kl', parents=[common], help='Validate the KL approximation')
    p.add_argument('--draws', type=int, default=1_000_000, help='Monte-Carlo draws per grid point')
    p.add_argument('--tolerance', type=float, default=0.02, help='Allowed deviation in nats')

    p = subparsers.add_parser('plot', parents=[common], help='Render figures from CSVs')
    p.add_argument('kind', choices=['virtual-points', 'sensitivity', 'metrics', 'sweep'])
    p.add_argument('--inputs', nargs='+', required=True, help='CSV file(s) to plot')
    p.add_argument('--figure', required=True, help='Output image path')
    p.add_argument('--data', help='Dataset CSV to overlay labeled points (virtual-points)')
    p.add_argument('--x', default='radius', help='Sweep column on the x axis')
    p.add_argument('--metric', default='test_error', help='Sweep metric')
    p.add_argument('--group', help='Sweep column that separates curves')

    return parser


def main(argv=None) -> int:
    """Main entry point for murssl."""
    parser = build_parser()
    args = parser.parse_args(argv)

    # Setup logging
    setup_logging(debug_mode=args.debug, log_file=args.log_file)
    logger = logging.getLogger(__name__)

    try:
        # Load configuration
        logger.info("🔧 Loading configuration...")
        config = reload_config(args.config)

        # Apply command line overrides
        config = apply_overrides(config, cli_overrides(args))
        if not args.debug:
            setup_logging(debug_mode=config.logging.debug_mode,
                          log_file=args.log_file or config.logging.log_file,
                          level=config.logging.log_level)

        if args.print_config:
            print(yaml.safe_dump(config_to_dict(config), default_flow_style=False, sort_keys=False))
            return EXIT_OK

        # Validate only mode
        if args.validate_only:
            logger.info("✅ Configuration valid")
            return EXIT_OK

        return run_command(args, config)

    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_OK
    except (MursslError, FileNotFoundError, yaml.YAMLError) as e:
        logger.error(f"❌ {' '.join(str(e).split())}")
        return EXIT_ERROR
    except Exception as e:
        logger.error(f"System error: {e}")
        import traceback
        traceback.print_exc()
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
