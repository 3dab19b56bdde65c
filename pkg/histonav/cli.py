"""histonav command-line interface.

Usage: histonav <command> [--config PATH] [--seed N] [--workers N] [--out DIR]

Commands run one pipeline step each (see histonav.workflows); ``run`` chains
tile, normalize, split, train, evaluate and report. Logs go to standard
error, data only to files under the output directory.

Exit codes: 0 success, 1 other pipeline error, 2 I/O failure, 3 invalid
configuration, 4 artifact mismatch.
"""

import argparse
import logging
import sys

from histonav import workflows
from histonav.config import CONFIG_ENV, list_presets, load_config
from histonav.errors import ArtifactMismatch, ConfigError, DataUnavailable, HistonavError

__all__ = ["main", "build_parser"]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_ARTIFACT = 4


def _synth(config, args):
    workflows.synth(config, slides_per_class=args.slides_per_class)


def _tile(config, args):
    workflows.tile_slides(config)


def _normalize(config, args):
    workflows.normalize_patches(config, reference_from=args.reference_from)


def _split(config, args):
    workflows.split_manifest(config)


def _train(config, args):
    workflows.train(config)


def _evaluate(config, args):
    workflows.evaluate(config)


def _report(config, args):
    workflows.report(config)


def _predict(config, args):
    workflows.predict(config, args.inputs, output=args.output, normalize_inputs=args.normalize)


def _run(config, args):
    workflows.run(config, reference_from=args.reference_from)


def _show_config(config, args):
    sys.stdout.write(config.to_json())


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        help=f"JSON config file or preset ({', '.join(list_presets())}); "
        f"defaults to ${CONFIG_ENV}, then built-in defaults",
    )
    common.add_argument("--seed", type=int, help="override the experiment seed")
    common.add_argument("--workers", type=int, help="worker threads; results do not depend on it")
    common.add_argument("--out", help="override the output directory")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="histonav", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", parents=[common], help="write the synthetic texture corpus")
    synth.add_argument("--slides-per-class", type=int, default=8)
    synth.set_defaults(func=_synth)

    tile = commands.add_parser("tile", parents=[common], help="tile slides into QC'd patches")
    tile.set_defaults(func=_tile)

    normalize = commands.add_parser("normalize", parents=[common], help="stain-normalize patches")
    normalize.add_argument("--reference-from", help="patch image promoted to the reference profile")
    normalize.set_defaults(func=_normalize)

    split = commands.add_parser("split", parents=[common], help="plan test split and folds")
    split.set_defaults(func=_split)

    train = commands.add_parser("train", parents=[common], help="cross-validated training")
    train.set_defaults(func=_train)

    evaluate = commands.add_parser("evaluate", parents=[common], help="score fold checkpoints")
    evaluate.set_defaults(func=_evaluate)

    report = commands.add_parser("report", parents=[common], help="render plots")
    report.set_defaults(func=_report)

    predict = commands.add_parser("predict", parents=[common], help="classify new patches")
    predict.add_argument("inputs", nargs="+", help="patch images or directories")
    predict.add_argument("--output", help="CSV to write, defaults to reports/predictions.csv")
    predict.add_argument("--normalize", action="store_true", help="stain-normalize inputs first")
    predict.set_defaults(func=_predict)

    run = commands.add_parser("run", parents=[common], help="tile through report in one go")
    run.add_argument("--reference-from", help="patch image promoted to the reference profile")
    run.set_defaults(func=_run)

    show = commands.add_parser("config", parents=[common], help="print the merged config")
    show.set_defaults(func=_show_config)
    return parser


def _overrides(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["output_dir"] = args.out
    return overrides


def main(argv=None):
    """Entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = load_config(args.config, _overrides(args))
        args.func(config, args)
    except ConfigError as exception:
        logger.error(f"invalid configuration: {exception}")
        return EXIT_CONFIG
    except ArtifactMismatch as exception:
        logger.error(f"artifact mismatch: {exception}")
        return EXIT_ARTIFACT
    except (DataUnavailable, OSError) as exception:
        logger.error(f"I/O failure: {exception}")
        return EXIT_IO
    except HistonavError as exception:
        logger.error(f"{type(exception).__name__}: {exception}")
        return EXIT_ERROR
    return EXIT_OK
