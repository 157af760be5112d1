"""Compare the full guidance objective with its ablated variants"""

import json
from typing import Any

from cli import guidance_runner, param_sweeper
from cli_utils import utils

INTRO_TEXT__ABLATION_RUNNER = """
This command runs the full objective next to variants with one component
removed, all from the same seeded starting point:

- without layout confinement (no alignment loss)
- without attention arbitration (no orthogonality loss)
- without spatial compactness (no compactness loss)
- single stage (arbitration kept on for every step)
"""

# variant name -> config overrides
ABLATION_VARIANTS = {
    "full": {},
    "no_align": {"use_align": False},
    "no_ortho": {"use_ortho": False},
    "no_compact": {"use_compact": False},
    "single_stage": {"stage1_fraction": 1.0},
}


def build_parser() -> utils.CommandParser:
    parser = utils.CommandParser(prog="deptharb ablate", description=INTRO_TEXT__ABLATION_RUNNER)
    utils.add_scene_argument(parser)
    utils.add_config_arguments(parser)
    utils.add_run_arguments(parser)
    parser.add_argument("--report", metavar="PATH", help="write the JSON table here (default: stdout)")
    utils.add_verbose_argument(parser)
    return parser


def ablation_runner(argv: list[str] | None = None) -> list[dict[str, Any]]:
    """
    Entrypoint body for `deptharb ablate`.
    """
    args = build_parser().parse_args(argv)
    utils.configure_logging(args)
    seed = utils.check_seed(args.seed)
    rel_threshold = utils.check_rel_threshold(args.rel_threshold)

    scene = utils.load_scene(args.scene)
    names = list(ABLATION_VARIANTS)
    configs = [utils.resolve_config(scene, args, ABLATION_VARIANTS[name]) for name in names]
    workers = utils.thread_cap()

    def run_one(cfg):
        _, _, report = guidance_runner.run_scene(scene, cfg, args.mode, seed, rel_threshold)
        return report

    print(f"Running {len(names)} ablation variants with up to {workers} workers...")
    reports = utils.run_concurrently(run_one, configs, workers)
    print("...Done")

    rows = [param_sweeper.summarize_row("variant", name, report) for name, report in zip(names, reports)]
    utils.print_table(
        ["variant", *param_sweeper.SUMMARY_HEADERS],
        [param_sweeper.row_cells("variant", row) for row in rows],
    )

    table = {"seed": seed, "mode": args.mode, "rows": rows}
    if args.report:
        utils.write_json(args.report, table)
        print(f"Wrote ablation table: {args.report}")
    else:
        print(json.dumps(table, indent=2))
    return rows


def main(argv: list[str] | None = None) -> int:
    return utils.run_command(lambda: ablation_runner(argv))


if __name__ == "__main__":
    raise SystemExit(main())
