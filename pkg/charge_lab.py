import argparse
import logging
import sys

from src.ddpg.training import Trainer
from src.experiments.commands import (EXIT_CONFIG, cmd_age, cmd_eval, cmd_export, cmd_sim, cmd_train,
                                      exit_code_for)
from src.experiments.experiment_spec import build_spec
from src.spmet.parameters import find_parameter_file

LOG_FORMAT = "[%(name)s:%(funcName)s:%(lineno)s] %(levelname)s: %(message)s"

logger = logging.getLogger(__name__)


class UsageParser(argparse.ArgumentParser):
    """Reports usage errors with the config error status instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def main(argv=None) -> int:
    args = parseargs(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    if args.no_progress:
        Trainer.progress = False

    try:
        if args.command == "export":
            return cmd_export(args.run_dir)

        if args.params:
            #fail early on a wrong --params path
            find_parameter_file(args.params, args.verbose)
        both = getattr(args, "obs", None) == "both"
        spec = build_spec(args.config, None if both else getattr(args, "obs", None), args.seeds,
                          getattr(args, "episodes", None), getattr(args, "scenario", None), args.out, args.params)

        if args.command == "train":
            return cmd_train(spec, ["full", "simplified"] if both else None)
        if args.command == "eval":
            return cmd_eval(spec, args.checkpoint, args.baseline)
        if args.command == "age":
            return cmd_age(spec, args.checkpoint)
        if args.command == "sim":
            return cmd_sim(spec, args.profile)
    except Exception as err:
        code = exit_code_for(err)
        logger.debug("command failed", exc_info=True)
        print(f"error: {err}", file=sys.stderr)
        return code
    return EXIT_CONFIG


def parseargs(argv=None):
    parser = UsageParser(
        description="Simulate, train and evaluate minimum-time battery charging policies.")
    parser.add_argument("-v", "--verbose",
                        action="store_true",
                        help="Log debug output.")
    parser.add_argument("--no-progress",
                        action="store_true",
                        help="Hide the episode progress bar.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config",
                        help="Experiment YAML file (defaults < file < flags).")
    common.add_argument("--seeds",
                        help="Seed count (5 means seeds 0-4) or comma separated seed list.")
    common.add_argument("-o", "--out",
                        help="Output directory.")
    common.add_argument("-p", "--params",
                        help="Cell parameter file. Defaults to $CHARGELAB_PARAMS, then params/graphite_nmc.yaml.")
    common.add_argument("--scenario",
                        help="Aging scenario YAML file, or 'aged' for film x2.0 / heat x1.5.")

    train = subparsers.add_parser("train", parents=[common], help="Train one agent per seed.")
    train.add_argument("--obs",
                       choices=["full", "simplified", "both"],
                       help="Observation mode; 'both' trains each mode into <out>/full and <out>/simplified.")
    train.add_argument("--episodes",
                       type=int,
                       help="Number of training episodes.")

    evaluate = subparsers.add_parser("eval", parents=[common], help="Greedy rollout of a checkpoint.")
    evaluate.add_argument("--checkpoint",
                          required=True,
                          help="Agent checkpoint (.npz) written by train or age.")
    evaluate.add_argument("--obs",
                          choices=["full", "simplified"],
                          help="Observation mode the checkpoint was trained with.")
    evaluate.add_argument("--baseline",
                          action="store_true",
                          help="Also run the CC-CV baseline from the same initial state.")

    age = subparsers.add_parser("age", parents=[common],
                                help="Evaluate a checkpoint on an aged cell, then continue training it there.")
    age.add_argument("--checkpoint",
                     required=True,
                     help="Agent checkpoint trained on the fresh cell.")
    age.add_argument("--obs",
                     choices=["full", "simplified"],
                     help="Observation mode the checkpoint was trained with.")
    age.add_argument("--episodes",
                     type=int,
                     help="Number of continued training episodes.")

    sim = subparsers.add_parser("sim", parents=[common], help="Open-loop simulation of a current profile.")
    sim.add_argument("profile",
                     help="CSV file with time_s and current_A columns (negative current charges).")

    export = subparsers.add_parser("export", help="Aggregate multi-seed run logs into per-panel CSV files.")
    export.add_argument("run_dir",
                        help="Output directory of a train or age run.")

    return parser.parse_args(argv)


if __name__ == "__main__":
    sys.exit(main())
