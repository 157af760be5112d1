"""Verify the analytic guidance gradients against central finite differences"""

from cli_utils import utils
from deptharb.gradcheck import ABS_TOL_RATIO, DEFAULT_STEP, DEFAULT_TOL, GradCheckResult, grad_check_scene
from deptharb.losses import Stage
from deptharb.surrogate import LatentMode

INTRO_TEXT__GRAD_CHECKER = """
This command compares the closed-form gradients of the staged objective with
central finite differences, both with respect to attention entries and with
respect to the surrogate latent (raster logits or blob parameters).

It exits with code 3 when any sampled coordinate is out of tolerance.
"""


def build_parser() -> utils.CommandParser:
    parser = utils.CommandParser(prog="deptharb grad-check", description=INTRO_TEXT__GRAD_CHECKER)
    utils.add_scene_argument(parser)
    utils.add_config_arguments(parser)
    parser.add_argument(
        "--mode",
        choices=LatentMode.choices(),
        default=None,
        help="latent mode to check (default: both)",
    )
    parser.add_argument("--stage", type=int, choices=(1, 2), default=None, help="stage to check (default: both)")
    parser.add_argument("--seed", type=int, default=0, metavar="N")
    parser.add_argument("--samples", type=int, default=1000, metavar="N")
    parser.add_argument("--tol", type=float, default=DEFAULT_TOL, metavar="F")
    parser.add_argument("--step", type=float, default=DEFAULT_STEP, metavar="H", help="finite-difference step")
    utils.add_verbose_argument(parser)
    return parser


def print_result(result: GradCheckResult) -> None:
    status = "PASS" if result.passed else "FAIL"
    print(
        f"{status} {result.label}: {result.samples} samples, "
        f"worst relative error {result.max_rel_error:.3e} (past the {ABS_TOL_RATIO * result.tol:.0e} floor), "
        f"worst absolute error {result.max_abs_error:.3e}"
    )
    if not result.passed:
        print(f"  {result.failures} coordinates out of tolerance; worst offenders:")
        for probe in result.worst:
            print(
                f"    index {probe.index}: analytic {probe.analytic:.10e} "
                f"numeric {probe.numeric:.10e} rel {probe.rel_error:.3e}"
            )


def grad_checker(argv: list[str] | None = None) -> int:
    """
    Entrypoint body for `deptharb grad-check`.
    """
    args = build_parser().parse_args(argv)
    utils.configure_logging(args)
    seed = utils.check_seed(args.seed)
    if args.samples < 1:
        raise utils.UsageError(f"--samples must be >= 1, got {args.samples}")
    if args.tol < 0:
        raise utils.UsageError(f"--tol must be >= 0, got {args.tol}")
    if args.step <= 0:
        raise utils.UsageError(f"--step must be > 0, got {args.step}")

    scene = utils.load_scene(args.scene)
    cfg = utils.resolve_config(scene, args)
    modes = [args.mode] if args.mode else list(LatentMode.choices())
    stages = [args.stage] if args.stage else [Stage.Structural, Stage.Textural]

    print(f"Checking gradients with {args.samples} samples per space, tol {args.tol:g}...")
    results = grad_check_scene(scene, cfg, modes, stages, args.samples, seed, args.tol, args.step)
    for result in results:
        print_result(result)

    worst = max(r.max_rel_error for r in results)
    print(f"Worst relative error overall: {worst:.3e}")
    if all(r.passed for r in results):
        print("Gradient check passed.")
        return utils.ExitCode.Success
    print("Gradient check FAILED.")
    return utils.ExitCode.GradCheckFailure


def main(argv: list[str] | None = None) -> int:
    return utils.run_command(lambda: grad_checker(argv))


if __name__ == "__main__":
    raise SystemExit(main())
