"""
Texture Pattern Discovery - Main Entry Point
Command-line surface: phantom, extract, train, signature, link, gradcheck.
"""
import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from config.settings import load_config, settings
from config.logger_config import reconfigure_all, setup_logger
from services.pipeline import PipelineRunner
from utils.banner import print_banner
from utils.errors import PipelineError

logger = setup_logger("Main", settings.log_level, settings.log_file)

COMMANDS = ("phantom", "extract", "train", "signature", "link", "gradcheck")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (flat keys)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", dest="out_dir", help="output directory")
    common.add_argument("--workers", type=int, help="threads for per-case / per-fold work")
    common.add_argument("--log-level", dest="log_level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(
        prog="texdcn", description="Texture pattern discovery with a deep clustering network",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    # ============== phantom ==============
    p = sub.add_parser("phantom", parents=[common], help="generate a synthetic texture cohort")
    p.add_argument("--n", dest="phantom_n_cases", type=int, help="number of cases")

    # ============== extract ==============
    p = sub.add_parser("extract", parents=[common], help="draw training patches from a manifest")
    p.add_argument("--manifest", dest="manifest_path")
    p.add_argument("--n-patches", "--n", dest="n_patches", type=int, help="total patches (split equally)")
    p.add_argument("--window-mm", dest="window_mm", type=float)
    p.add_argument("--out-px", dest="out_px", type=int)
    p.add_argument("--patches", dest="patches_path", help="patch set file to write")

    # ============== train ==============
    p = sub.add_parser("train", parents=[common], help="pretrain and jointly train the clustering network")
    p.add_argument("--patches", dest="patches_path")
    p.add_argument("--checkpoint", dest="checkpoint_path", help="checkpoint file to write")
    p.add_argument("--init-checkpoint", type=Path, help="resume joint training from this checkpoint")
    p.add_argument("--lambda", dest="lam", type=float, help="clustering weight λ")
    p.add_argument("--k", type=int, help="number of clusters")
    p.add_argument("--pretrain-epochs", dest="pretrain_epochs", type=int)
    p.add_argument("--joint-epochs", dest="joint_epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--centroid-update", dest="centroid_update_mode", choices=["online", "batch"])

    # ============== signature ==============
    p = sub.add_parser("signature", parents=[common], help="per-case cluster-proportion signatures")
    p.add_argument("--manifest", dest="manifest_path")
    p.add_argument("--checkpoint", dest="checkpoint_path")
    p.add_argument("--stride", dest="stride_px", type=int, help="window stride in pixels")
    p.add_argument("--signatures", dest="signatures_path", help="signature table to write")
    p.add_argument("--label-map", dest="label_map_path", help="label map CSV to write")
    p.add_argument("--truth", action="store_true", help="score windows against phantom truth labels")

    # ============== link ==============
    p = sub.add_parser("link", parents=[common], help="leave-one-out forest / LASSO on signatures")
    p.add_argument("--signatures", dest="signatures_path")
    p.add_argument("--label-map", dest="label_map_path")
    p.add_argument("--task", dest="link_task", choices=["both", "binary_forest", "grade_lasso"])
    p.add_argument("--n-trees", dest="n_trees", type=int)
    p.add_argument("--top", dest="top_clusters", type=int, help="clusters kept in label_map_top.csv")

    # ============== gradcheck ==============
    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient suite")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds (default 5)")

    return parser


# Flags that are not configuration fields
_NON_CONFIG = {"command", "config", "init_checkpoint", "truth", "seeds"}


def overrides_from(args: argparse.Namespace) -> Dict[str, Any]:
    values = {key: value for key, value in vars(args).items() if key not in _NON_CONFIG and value is not None}
    if "lam" in values:
        values["lambda"] = values.pop("lam")
    return values


def run(args: argparse.Namespace) -> int:
    config = load_config(args.config, overrides_from(args))
    reconfigure_all(config.log_level, config.log_file)
    runner = PipelineRunner(config)

    if args.command == "phantom":
        result = runner.phantom()
        print(result.manifest_path)
    elif args.command == "extract":
        runner.extract()
    elif args.command == "train":
        runner.train(args.init_checkpoint)
    elif args.command == "signature":
        runner.signature(truth=args.truth)
    elif args.command == "link":
        runner.link()
    elif args.command == "gradcheck":
        return 0 if runner.gradcheck(args.seeds) else 1
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if getattr(args, "n_patches", None) == 0:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} extract: error: --n-patches must be at least 1", file=sys.stderr)
        return 2
    if args.command == "gradcheck" and args.seeds < 1:
        print(f"{parser.prog} gradcheck: error: --seeds must be at least 1", file=sys.stderr)
        return 2

    print_banner(args.command)
    try:
        return run(args)
    except PipelineError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return 1
    except OSError as e:
        logger.error(f"❌ I/O failure: {e}")
        return 1
    except KeyboardInterrupt:
        logger.info("👋 [bold yellow]Interrupted[/bold yellow]")
        return 1


if __name__ == "__main__":
    sys.exit(main())
