import json
import os
import tempfile
import unittest
from unittest.mock import patch

from cli import guidance_runner
from deptharb import CANONICAL_SCENE
from deptharb.config import GuidanceConfig
from deptharb.dump import REPORT_KEYS, comparable
from deptharb.losses import LossContext, Stage
from deptharb.scene import derive_occlusion_pairs, parse_scene
from deptharb.surrogate import LatentMode, init_latent, render_attention

SCENE = str(CANONICAL_SCENE)


def write_scene(directory, **extra):
    data = json.loads(CANONICAL_SCENE.read_text(encoding="utf-8"))
    data.update(extra)
    path = os.path.join(directory, "scene.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f)
    return path


@patch("builtins.print")
class TestGuidanceRunner(unittest.TestCase):
    def test_guidance_runner__happy_path(self, mock_print):
        """Runs a short guidance pass and writes both artifacts"""

        with tempfile.TemporaryDirectory() as tmp:
            # GIVEN:
            dump_path = os.path.join(tmp, "field.darb")
            report_path = os.path.join(tmp, "report.json")

            # WHEN:
            result = guidance_runner.guidance_runner(
                ["--scene", SCENE, "--steps", "10", "--dump", dump_path, "--report", report_path]
            )

            # THEN:
            self.assertTrue(os.path.exists(dump_path))
            with open(report_path, encoding="utf-8") as f:
                report = json.load(f)
        self.assertEqual(result.dump_path, dump_path)
        self.assertEqual(tuple(report), REPORT_KEYS)
        self.assertEqual(report["config"]["mode"], LatentMode.Raster)
        self.assertEqual(report["seed"], 0)
        mock_print.assert_any_call("Running 10 guidance steps in raster mode (seed 0)...")
        mock_print.assert_any_call("...Done")
        mock_print.assert_any_call(f"Wrote report: {report_path}")

    def test_guidance_runner__zero_steps_echo_initial_losses(self, mock_print):
        # GIVEN:
        scene = parse_scene(CANONICAL_SCENE.read_text(encoding="utf-8"))
        field = render_attention(init_latent(scene, LatentMode.Raster, 3), scene)
        expected = LossContext(scene, derive_occlusion_pairs(scene), GuidanceConfig()).breakdown(field, Stage.Textural)

        # WHEN:
        result = guidance_runner.guidance_runner(["--scene", SCENE, "--steps", "0", "--seed", "3"])

        # THEN:
        self.assertEqual(len(result.trajectory), 1)
        self.assertEqual(result.report["losses"]["total"], expected.total)
        self.assertEqual(result.report["losses"]["align"], expected.align)

    def test_guidance_runner__deterministic_reports(self, mock_print):
        with tempfile.TemporaryDirectory() as tmp:
            # GIVEN:
            paths = [os.path.join(tmp, f"report-{i}.json") for i in range(2)]

            # WHEN:
            for path in paths:
                guidance_runner.guidance_runner(["--scene", SCENE, "--seed", "7", "--report", path])

            # THEN:
            reports = []
            for path in paths:
                with open(path, encoding="utf-8") as f:
                    reports.append(comparable(json.load(f)))
        self.assertEqual(reports[0], reports[1])

    def test_guidance_runner__config_precedence(self, mock_print):
        with tempfile.TemporaryDirectory() as tmp:
            # GIVEN:
            scene_path = write_scene(tmp, config={"lambda_ortho": 1.0, "total_steps": 5, "alpha": 2.0})

            # WHEN:
            result = guidance_runner.guidance_runner(
                ["--scene", scene_path, "--steps", "3", "--preset", "appendix"]
            )

        # THEN:
        config = result.report["config"]
        self.assertEqual(config["total_steps"], 3)
        self.assertEqual(config["lambda_ortho"], 1.0)
        self.assertEqual(config["alpha"], 2.0)
        self.assertEqual(config["lambda_compact"], 0.5)
        self.assertEqual(len(result.trajectory), 4)

    def test_guidance_runner__canonical_arbitration(self, mock_print):
        # GIVEN:
        # eta = H * W gives the raster logits unit-scale steps on the 64x64 grid
        argv = ["--scene", SCENE, "--steps", "200", "--seed", "42", "--eta", "4096"]

        # WHEN:
        result = guidance_runner.guidance_runner(argv)

        # THEN:
        metrics = result.report["metrics"]
        self.assertGreaterEqual(metrics["focr_mean"], 0.95)
        self.assertLessEqual(metrics["mean_interference"], 0.05)
        self.assertTrue(all(obj["f"] >= 0.9 for obj in result.report["per_object"]))

    def test_main__exit_codes(self, mock_print):
        with tempfile.TemporaryDirectory() as tmp:
            bad_config = write_scene(tmp, config={"lambda_orth": 1.0})
            cases = [
                (["--scene", os.path.join(tmp, "missing.json")], 1),
                (["--scene", SCENE, "--mode", "voxel"], 1),
                (["--scene", SCENE, "--seed", "-1"], 1),
                (["--scene", SCENE, "--rel-threshold", "0"], 1),
                (["--scene", SCENE, "--stage1-frac", "1.5"], 1),
                (["--scene", bad_config], 1),
                (["--scene", SCENE, "--steps", "3", "--eta", "1e300"], 2),
                (["--scene", SCENE, "--steps", "2"], 0),
            ]
            for argv, code in cases:
                with self.subTest(argv=argv):
                    self.assertEqual(guidance_runner.main(argv), code)

    def test_build_parser__help_names_full_strength_step(self, mock_print):
        # WHEN:
        text = guidance_runner.build_parser().format_help()

        # THEN:
        self.assertIn("eta / (H * W)", text)
        self.assertIn("--eta 4096", text)
        self.assertIn("--eta 0.1", text)


if __name__ == "__main__":
    unittest.main()
