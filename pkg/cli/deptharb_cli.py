"""Umbrella `deptharb` command dispatching to the individual commands"""

import sys

from cli import ablation_runner, dump_evaluator, grad_checker, guidance_runner, param_sweeper
from cli_utils import utils

COMMANDS = {
    "run": guidance_runner.main,
    "grad-check": grad_checker.main,
    "sweep": param_sweeper.main,
    "eval": dump_evaluator.main,
    "ablate": ablation_runner.main,
}

USAGE_TEXT = """usage: deptharb <command> [flags]

commands:
  run          run staged guidance on a scene
  grad-check   check analytic gradients against finite differences
  sweep        sweep one hyperparameter
  eval         evaluate a saved attention dump
  ablate       compare the full objective with ablated variants

Run `deptharb <command> --help` for the flags of a command.
"""


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(USAGE_TEXT)
        return utils.ExitCode.Success if argv else utils.ExitCode.InputError
    command = COMMANDS.get(argv[0])
    if command is None:
        print(f"Unknown command: {argv[0]}")
        print(USAGE_TEXT)
        return utils.ExitCode.InputError
    return command(argv[1:])


if __name__ == "__main__":
    raise SystemExit(main())
