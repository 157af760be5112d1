import os
import unittest
from unittest.mock import patch

from cli_utils import utils
from deptharb.config import GuidanceConfig
from deptharb.errors import ConfigError, DumpFormatError, NumericalAbortError, SceneValidationError
from deptharb.scene import SceneObject, SceneSpec

SCENE = SceneSpec(
    8,
    8,
    (SceneObject(0, "a", (0.1, 0.1, 0.5, 0.5), 0.3),),
    config_overrides=(("lambda0", 0.9), ("total_steps", 40)),
)


def parse(argv):
    parser = utils.CommandParser(prog="test")
    utils.add_config_arguments(parser)
    return parser.parse_args(argv)


class TestResolveConfig(unittest.TestCase):
    def test_resolve_config__layers(self):
        # GIVEN:
        args = parse(["--steps", "12", "--preset", "appendix"])

        # WHEN:
        cfg = utils.resolve_config(SCENE, args, {"lambda_ortho": 0.7})

        # THEN:
        self.assertEqual(cfg.total_steps, 12)
        self.assertEqual(cfg.lambda0, 0.9)
        self.assertEqual(cfg.lambda_ortho, 0.7)
        self.assertEqual(cfg.lambda_compact, 0.5)

    def test_resolve_config__no_flags(self):
        cfg = utils.resolve_config(SCENE, parse([]))
        self.assertEqual(cfg, GuidanceConfig(lambda0=0.9, total_steps=40))

    def test_flag_overrides__maps_flag_names(self):
        args = parse(["--eta", "0.3", "--stage1-frac", "0.25", "--inner-iters", "2"])
        self.assertEqual(utils.flag_overrides(args), {"eta0": 0.3, "stage1_fraction": 0.25, "inner_iters": 2})


class TestHelpers(unittest.TestCase):
    def test_parse_csv_floats(self):
        self.assertEqual(utils.parse_csv_floats("0.1, 0.5,1"), [0.1, 0.5, 1.0])
        for text in ("", " , ", "1,x"):
            with self.subTest(text=text):
                with self.assertRaises(utils.UsageError):
                    utils.parse_csv_floats(text)

    def test_thread_cap(self):
        with patch.dict(os.environ, {utils.THREADS_ENV_VAR: "3"}):
            self.assertEqual(utils.thread_cap(), 3)
        with patch.dict(os.environ, {utils.THREADS_ENV_VAR: "-2"}):
            with self.assertRaises(utils.UsageError):
                utils.thread_cap()
        with patch.dict(os.environ, {}, clear=True):
            self.assertGreaterEqual(utils.thread_cap(), 1)

    def test_run_concurrently__keeps_order(self):
        items = list(range(20))
        self.assertEqual(utils.run_concurrently(lambda x: x * x, items, 4), [x * x for x in items])
        self.assertEqual(utils.run_concurrently(lambda x: -x, items, 1), [-x for x in items])

    def test_format_value(self):
        self.assertEqual(utils.format_value(None), "-")
        self.assertEqual(utils.format_value(0.123456), "0.1235")
        self.assertEqual(utils.format_value(0.5, 2), "0.50")

    @patch("builtins.print")
    def test_print_table__aligns_columns(self, mock_print):
        utils.print_table(["name", "v"], [["a", "10"], ["long", "2"]])
        self.assertEqual(
            [c.args[0] for c in mock_print.call_args_list],
            ["name  v ", "a     10", "long  2 "],
        )


@patch("builtins.print")
class TestRunCommand(unittest.TestCase):
    def test_run_command__exit_codes(self, mock_print):
        def raising(error):
            def command():
                raise error

            return command

        cases = [
            (lambda: None, utils.ExitCode.Success),
            (lambda: utils.ExitCode.GradCheckFailure, utils.ExitCode.GradCheckFailure),
            (raising(utils.UsageError("bad flag")), utils.ExitCode.InputError),
            (raising(SceneValidationError("missing", 0, "bbox")), utils.ExitCode.InputError),
            (raising(ConfigError("bad", "tau")), utils.ExitCode.InputError),
            (raising(DumpFormatError("bad magic")), utils.ExitCode.InputError),
            (raising(FileNotFoundError(2, "No such file")), utils.ExitCode.InputError),
            (raising(NumericalAbortError(4, "loss")), utils.ExitCode.NumericalAbort),
        ]
        for command, code in cases:
            with self.subTest(code=code):
                self.assertEqual(utils.run_command(command), code)
        mock_print.assert_any_call("Numerical abort: non-finite loss at step 4")

    def test_command_parser__raises_usage_error(self, mock_print):
        parser = utils.CommandParser(prog="test")
        parser.add_argument("--n", type=int)
        with self.assertRaises(utils.UsageError):
            parser.parse_args(["--n", "x"])


if __name__ == "__main__":
    unittest.main()
