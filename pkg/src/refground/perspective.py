"""Speaker-perspective handling: keyword detection and viewpoint transforms.

When an utterance carries a possessive keyword ("my left", "your right"),
all region boxes are re-expressed in the speaker's viewpoint before
scoring: each box is re-centered on the pinhole projection of its 3D
centroid and scaled by the ratio of its distances to the primary and
target viewpoints (nearer objects grow, aspect ratio preserved).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Optional

from . import camera
from .errors import GroundingError
from .scene import BoundingBox, Region, Scene, Viewpoint


def _default_keyword_map() -> Dict[str, str]:
    return {
        "my": "user", "mine": "user", "me": "user",
        "your": "robot", "yours": "robot", "you": "robot",
    }


@dataclass(frozen=True)
class PerspectiveConfig:
    """Possessive keyword → viewpoint name; no keyword means object-centric."""

    keyword_map: Dict[str, str] = field(default_factory=_default_keyword_map)

    def __post_init__(self):
        for kw in self.keyword_map:
            if kw != kw.lower():
                raise GroundingError(f"perspective keyword '{kw}' must be lowercase")


def detect_perspective(expr, cfg: PerspectiveConfig | None = None) -> Optional[str]:
    """Viewpoint named by the first matching keyword, or None."""
    if cfg is None:
        cfg = PerspectiveConfig()
    for token in expr.tokens:
        if token in cfg.keyword_map:
            return cfg.keyword_map[token]
    return None


def transform_region(region: Region, scene: Scene, target: Viewpoint) -> Region:
    """Re-express a region's box in the target viewpoint.

    The new box is centered on the projection of the region's 3D centroid,
    scaled by (distance to primary viewpoint) / (distance to target
    viewpoint), and clamped to the target image bounds.
    """
    primary = scene.primary_viewpoint
    u, v = target.project(region.centroid3d)
    d_ref = camera.distance(region.centroid3d, primary.position)
    d_target = camera.distance(region.centroid3d, target.position)
    scale = d_ref / d_target
    w = region.box.w * scale
    h = region.box.h * scale
    if w > target.image_w or h > target.image_h:
        # Shrink uniformly so the box can fit; aspect ratio stays exact.
        fit = min(target.image_w / w, target.image_h / h)
        w *= fit
        h *= fit
    box = BoundingBox(u - w / 2.0, v - h / 2.0, w, h)
    box = box.clamped(target.image_w, target.image_h)
    return replace(region, box=box)


def transform_scene(scene: Scene, viewpoint_name: str) -> Scene:
    """Scene with every region box re-expressed in the named viewpoint."""
    target = scene.viewpoint(viewpoint_name)
    regions = tuple(transform_region(r, scene, target) for r in scene.regions)
    whole = replace(scene.whole_image,
                    box=BoundingBox(0.0, 0.0, target.image_w, target.image_h))
    return replace(scene, regions=regions, image_w=target.image_w,
                   image_h=target.image_h, whole_image=whole)
