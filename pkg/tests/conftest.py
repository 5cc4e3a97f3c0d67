import numpy as np
import pytest

from upqeval import DifficultyRaster, PanopticRaster, SceneSpec, generate_scene


def raster(classes, segments) -> PanopticRaster:
    return PanopticRaster.from_arrays(
        np.asarray(classes, dtype=np.uint8), np.asarray(segments, dtype=np.uint32)
    )


def difficulty(values) -> DifficultyRaster:
    return DifficultyRaster.from_array(np.asarray(values, dtype=np.uint8))


@pytest.fixture
def perturbed_scene():
    spec = SceneSpec(
        seed=42, width=64, height=64, jitter_px=2, class_flip_rate=0.3,
        drop_rate=0.15, difficulty_rate=0.6, mark_errors_difficult=True,
        conf_mode="random",
    )
    return generate_scene(spec)
