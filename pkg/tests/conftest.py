import pytest

from refground.camera import distance
from refground.scene import (SIZE_METRES, AttributeRecord, BoundingBox, CorpusConfig,
                             Region, Scene, _whole_image_region, default_viewpoints)


def make_region(rid, x_world, category="cup", color="red", size="medium",
                config=None, y_world=1.6):
    """Region placed on the table plane, box centered on its projection."""
    config = config or CorpusConfig()
    robot = default_viewpoints(config)["robot"]
    phys = SIZE_METRES[size]
    centroid = (x_world, y_world, config.table_z + phys / 2.0)
    u, v = robot.project(centroid)
    w = config.focal * phys / distance(centroid, robot.position)
    return Region(rid, BoundingBox(u - w / 2.0, v - w / 2.0, w, w),
                  AttributeRecord(category=category, color=color, size_class=size),
                  centroid)


def make_scene(regions, config=None):
    config = config or CorpusConfig()
    viewpoints = default_viewpoints(config)
    whole = _whole_image_region(config.image_w, config.image_h,
                                viewpoints["robot"], 2.5)
    return Scene(regions=tuple(regions), image_w=config.image_w,
                 image_h=config.image_h, viewpoints=viewpoints, whole_image=whole)


@pytest.fixture
def two_cups_scene():
    """Two identical red cups, one in the left third, one in the right."""
    return make_scene([make_region("cup_left", -0.85), make_region("cup_right", 0.85)])


@pytest.fixture
def cup_ball_scene():
    """A red cup and a blue ball with clearly distinct attributes."""
    return make_scene([
        make_region("cup", -0.5, category="cup", color="red"),
        make_region("ball", 0.5, category="ball", color="blue"),
    ])
