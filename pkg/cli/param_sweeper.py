"""Sweep one guidance hyperparameter over a list of values"""

import json
from typing import Any

from cli import guidance_runner
from cli_utils import utils
from deptharb.dump import comparable

INTRO_TEXT__PARAM_SWEEPER = """
This command runs one independent, identically seeded guidance run per value
of a single hyperparameter and tabulates the final losses and metrics.

It is helpful when:
- you want to see how the arbitration weight trades interference against layout
e.g. `--param lambda_ortho --values 0.1,0.5,1.0`

- or how the compactness weight concentrates the attention maps
e.g. `--param lambda_compact --values 0.1,0.5,2.0`
"""

SWEEPABLE_PARAMS = (
    "lambda_ortho",
    "lambda_compact",
    "lambda0",
    "alpha",
    "tau",
    "eta0",
    "stage1_fraction",
)


def build_parser() -> utils.CommandParser:
    parser = utils.CommandParser(prog="deptharb sweep", description=INTRO_TEXT__PARAM_SWEEPER)
    utils.add_scene_argument(parser)
    utils.add_config_arguments(parser)
    utils.add_run_arguments(parser)
    parser.add_argument("--param", required=True, metavar="NAME", help=f"one of {', '.join(SWEEPABLE_PARAMS)}")
    parser.add_argument("--values", required=True, metavar="CSV")
    parser.add_argument("--report", metavar="PATH", help="write the JSON table here (default: stdout)")
    utils.add_verbose_argument(parser)
    return parser


def summarize_row(label: str, value: Any, report: dict[str, Any]) -> dict[str, Any]:
    """Sweep/ablation table row; carries the whole run report minus its timestamp"""
    return {label: value, **comparable(report)}


def row_cells(key: str, row: dict[str, Any]) -> list[str]:
    metrics = row["metrics"]
    return [
        str(row[key]),
        utils.format_value(row["losses"]["total"], 6),
        utils.format_value(metrics["mean_interference"], 6),
        utils.format_value(metrics["mean_variance"], 6),
        utils.format_value(metrics["focr_mean"]),
        utils.format_value(metrics["miou_all"]),
    ]


SUMMARY_HEADERS = ["total", "mean_I", "mean_var", "focr", "miou_all"]


def param_sweeper(argv: list[str] | None = None) -> list[dict[str, Any]]:
    """
    Entrypoint body for `deptharb sweep`.
    """
    args = build_parser().parse_args(argv)
    utils.configure_logging(args)
    if args.param not in SWEEPABLE_PARAMS:
        raise utils.UsageError(f"unknown sweep parameter {args.param!r}, choose from {', '.join(SWEEPABLE_PARAMS)}")
    values = utils.parse_csv_floats(args.values)
    seed = utils.check_seed(args.seed)
    rel_threshold = utils.check_rel_threshold(args.rel_threshold)

    scene = utils.load_scene(args.scene)
    # Resolve every config up front so a bad value fails before any run starts.
    configs = [utils.resolve_config(scene, args, {args.param: value}) for value in values]
    workers = utils.thread_cap()

    def run_one(cfg):
        _, _, report = guidance_runner.run_scene(scene, cfg, args.mode, seed, rel_threshold)
        return report

    print(f"Sweeping {args.param} over {len(values)} values with up to {workers} workers...")
    reports = utils.run_concurrently(run_one, configs, workers)
    print("...Done")

    rows = [summarize_row(args.param, value, report) for value, report in zip(values, reports)]
    utils.print_table([args.param, *SUMMARY_HEADERS], [row_cells(args.param, row) for row in rows])

    table = {"param": args.param, "seed": seed, "mode": args.mode, "rows": rows}
    if args.report:
        utils.write_json(args.report, table)
        print(f"Wrote sweep table: {args.report}")
    else:
        print(json.dumps(table, indent=2))
    return rows


def main(argv: list[str] | None = None) -> int:
    return utils.run_command(lambda: param_sweeper(argv))


if __name__ == "__main__":
    raise SystemExit(main())
