"""Evaluate a saved attention dump against its scene"""

from typing import Any

from cli_utils import utils
from deptharb.dump import build_report, read_dump, write_report
from deptharb.losses import LossContext, Stage
from deptharb.metrics import evaluate_field
from deptharb.scene import derive_occlusion_pairs

INTRO_TEXT__DUMP_EVALUATOR = """
This command loads an attention dump (for example one written by
`deptharb run --dump`), checks it against the scene, and reports the losses
and the layout/occlusion metrics of the stored field.
"""


def build_parser() -> utils.CommandParser:
    parser = utils.CommandParser(prog="deptharb eval", description=INTRO_TEXT__DUMP_EVALUATOR)
    parser.add_argument("--dump", required=True, metavar="PATH", help="attention dump to evaluate")
    utils.add_scene_argument(parser)
    utils.add_config_arguments(parser)
    parser.add_argument("--stage", type=int, choices=(1, 2), default=Stage.Textural, help="stage for the loss echo")
    parser.add_argument("--rel-threshold", type=float, default=0.5, metavar="F")
    parser.add_argument("--report", metavar="PATH", help="write the JSON report here")
    utils.add_verbose_argument(parser)
    return parser


def dump_evaluator(argv: list[str] | None = None) -> dict[str, Any]:
    """
    Entrypoint body for `deptharb eval`.
    """
    args = build_parser().parse_args(argv)
    utils.configure_logging(args)
    rel_threshold = utils.check_rel_threshold(args.rel_threshold)

    scene = utils.load_scene(args.scene)
    cfg = utils.resolve_config(scene, args)
    print(f"Loading attention dump: {args.dump}...")
    field, seed = read_dump(args.dump)
    field.check_aligned(scene)
    print("...Loaded")

    pairs = derive_occlusion_pairs(scene)
    breakdown = LossContext(scene, pairs, cfg).breakdown(field, args.stage)
    metrics = evaluate_field(field, scene, pairs, rel_threshold)
    report = build_report(breakdown, metrics, cfg, seed, [o.id for o in scene.objects])

    print(f"mIoU (all): {metrics.layout.miou_all:.4f}")
    print(f"FOCR (mean): {utils.format_value(metrics.focr_mean)}")
    if args.report:
        write_report(args.report, report)
        print(f"Wrote report: {args.report}")
    return report


def main(argv: list[str] | None = None) -> int:
    return utils.run_command(lambda: dump_evaluator(argv))


if __name__ == "__main__":
    raise SystemExit(main())
