import unittest

import numpy as np

from deptharb.attention import AttentionField
from deptharb.metrics import evaluate_field, focr, layout_miou, mask_iou, overlap_miou
from deptharb.scene import OcclusionPair, SceneObject, SceneSpec, derive_occlusion_pairs, rasterize_mask

FRONT_BOX = (0.0, 0.0, 0.5, 0.5)
BACK_BOX = (0.25, 0.25, 1.0, 1.0)


def pair_scene(front_depth=0.2, back_depth=0.8):
    return SceneSpec(
        8,
        8,
        (
            SceneObject(0, "front", FRONT_BOX, front_depth),
            SceneObject(1, "back", BACK_BOX, back_depth),
        ),
    )


def box_field(scene, inside=1.0, outside=0.0):
    maps = np.stack([rasterize_mask(o.bbox, *scene.shape) for o in scene.objects])
    return AttentionField(maps * inside + (1.0 - maps) * outside)


class TestMaskIou(unittest.TestCase):
    def test_mask_iou__examples(self):
        box = rasterize_mask((0.0, 0.25, 1.0, 0.75), 8, 8)
        self.assertEqual(mask_iou(box, box), 1.0)
        self.assertEqual(mask_iou(box, rasterize_mask((0.0, 0.0, 1.0, 0.25), 8, 8)), 0.0)
        left_half = rasterize_mask((0.0, 0.25, 0.5, 0.75), 8, 8)
        self.assertEqual(mask_iou(left_half, box), 0.5)
        self.assertEqual(mask_iou(np.zeros((4, 4)), np.zeros((4, 4))), 1.0)


class TestLayoutMiou(unittest.TestCase):
    def test_layout_miou__perfect_boxes(self):
        # GIVEN:
        scene = pair_scene()

        # WHEN:
        layout = layout_miou(box_field(scene), scene)

        # THEN:
        self.assertEqual(layout.per_object, (1.0, 1.0))
        self.assertEqual((layout.miou_fg, layout.miou_bg, layout.miou_all), (1.0, 1.0, 1.0))

    def test_layout_miou__tiny_threshold_predicts_everything(self):
        # GIVEN:
        scene = pair_scene()
        maps = np.random.default_rng(1).uniform(0.5, 1.0, size=(2, 8, 8))

        # WHEN:
        layout = layout_miou(AttentionField(maps), scene, rel_threshold=1e-12)

        # THEN:
        self.assertEqual(layout.per_object[0], 16 / 64)
        self.assertEqual(layout.per_object[1], 36 / 64)

    def test_layout_miou__foreground_membership_wins(self):
        # GIVEN:
        # the middle object is foreground of one pair and background of another
        scene = SceneSpec(
            8,
            8,
            (
                SceneObject(0, "near", (0.0, 0.0, 0.5, 0.5), 0.1),
                SceneObject(1, "middle", (0.25, 0.25, 0.75, 0.75), 0.5),
                SceneObject(2, "far", (0.5, 0.5, 1.0, 1.0), 0.9),
            ),
        )
        maps = box_field(scene).maps.copy()
        maps[2] = np.roll(maps[2], -4, axis=1)

        # WHEN:
        layout = layout_miou(AttentionField(maps), scene)

        # THEN:
        self.assertEqual(layout.miou_fg, 1.0)
        self.assertEqual(layout.miou_bg, 0.0)
        self.assertAlmostEqual(layout.miou_all, 2 / 3, places=15)

    def test_layout_miou__scale_invariance(self):
        scene = pair_scene()
        field = AttentionField(np.random.default_rng(2).uniform(0.0, 1.0, size=(2, 8, 8)))
        self.assertEqual(layout_miou(field, scene), layout_miou(field.scaled(3.0), scene))


class TestFocr(unittest.TestCase):
    def test_focr__foreground_dominant(self):
        scene = pair_scene()
        coverage, mean = focr(box_field(scene), scene, derive_occlusion_pairs(scene))
        self.assertEqual(coverage[0].focr, 1.0)
        self.assertEqual(mean, 1.0)

    def test_focr__background_dominant(self):
        # GIVEN:
        scene = pair_scene()
        maps = np.ones((2, 8, 8))
        maps[0] = 0.5

        # WHEN:
        _, mean = focr(AttentionField(maps), scene, derive_occlusion_pairs(scene))

        # THEN:
        self.assertEqual(mean, 0.0)

    def test_focr__tie_goes_to_foreground(self):
        scene = pair_scene()
        _, mean = focr(AttentionField(np.ones((2, 8, 8))), scene, derive_occlusion_pairs(scene))
        self.assertEqual(mean, 1.0)

    def test_focr__sub_pixel_intersection(self):
        # GIVEN:
        # the boxes overlap on a strip that holds no pixel center
        scene = SceneSpec(
            4,
            4,
            (
                SceneObject(0, "a", (0.0, 0.0, 0.3, 1.0), 0.2),
                SceneObject(1, "b", (0.26, 0.0, 1.0, 1.0), 0.8),
            ),
        )

        # WHEN:
        coverage, mean = focr(AttentionField(np.ones((2, 4, 4))), scene, derive_occlusion_pairs(scene))

        # THEN:
        self.assertIsNone(coverage[0].focr)
        self.assertIsNone(mean)

    def test_focr__monotone_in_foreground_scale(self):
        # GIVEN:
        scene = pair_scene()
        pairs = derive_occlusion_pairs(scene)
        maps = np.random.default_rng(3).uniform(0.0, 1.0, size=(2, 8, 8))

        # WHEN:
        values = []
        for c in (1.0, 1.5, 2.0, 4.0, 10.0):
            boosted = maps.copy()
            boosted[0] *= c
            values.append(focr(AttentionField(boosted), scene, pairs)[1])

        # THEN:
        self.assertTrue(all(0.0 <= v <= 1.0 for v in values))
        self.assertTrue(all(a <= b for a, b in zip(values, values[1:])), values)

    def test_focr__scale_invariance(self):
        scene = pair_scene()
        pairs = derive_occlusion_pairs(scene)
        field = AttentionField(np.random.default_rng(4).uniform(0.0, 1.0, size=(2, 8, 8)))
        self.assertEqual(focr(field, scene, pairs), focr(field.scaled(3.0), scene, pairs))


class TestOverlapMiou(unittest.TestCase):
    def test_overlap_miou__clean_arbitration(self):
        # GIVEN:
        scene = pair_scene()
        maps = box_field(scene).maps.copy()
        maps[1] *= 1.0 - rasterize_mask(FRONT_BOX, 8, 8)

        # WHEN / THEN:
        self.assertEqual(overlap_miou(AttentionField(maps), scene, derive_occlusion_pairs(scene)), 1.0)

    def test_overlap_miou__background_on_top(self):
        scene = pair_scene()
        maps = box_field(scene).maps.copy()
        maps[0] *= 1.0 - rasterize_mask(BACK_BOX, 8, 8)
        maps[0, 0, 0] = 1.0
        self.assertEqual(overlap_miou(AttentionField(maps), scene, derive_occlusion_pairs(scene)), 0.0)

    def test_overlap_miou__no_pairs(self):
        scene = pair_scene()
        self.assertIsNone(overlap_miou(box_field(scene), scene, []))


class TestEvaluateField(unittest.TestCase):
    def test_evaluate_field__collects_every_metric(self):
        # GIVEN:
        scene = pair_scene()
        pairs = [OcclusionPair(0, 1)]

        # WHEN:
        report = evaluate_field(box_field(scene), scene, pairs, rel_threshold=0.25)

        # THEN:
        self.assertEqual(report.rel_threshold, 0.25)
        self.assertEqual(report.layout.miou_all, 1.0)
        self.assertEqual(report.focr_mean, 1.0)
        self.assertEqual(len(report.pairs), 1)
        self.assertEqual(report.miou_overlap, 0.5)


if __name__ == "__main__":
    unittest.main()
