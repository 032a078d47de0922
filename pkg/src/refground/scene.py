"""Scene model: regions, viewpoints, scene I/O, and the synthetic generator.

Scenes are immutable after construction and safe to share across threads.
The scene file format is UTF-8 JSON (see ``scene_to_dict`` for the layout);
its canonical form uses sorted keys and 6-decimal fixed-point numbers.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

from . import camera
from .errors import InfeasibleConfigError, SceneFormatError, UnknownRegionError
from .jsonutil import canonical_bytes

WHOLE_IMAGE_ID = "__image__"

_BOUNDS_TOL = 1e-6


def _load_attribute_pools() -> dict:
    with resources.files("refground.data").joinpath("attributes.json").open("r", encoding="utf-8") as fh:
        return json.load(fh)


_POOLS = _load_attribute_pools()
COLORS: Tuple[str, ...] = tuple(_POOLS["colors"])
CATEGORIES: Tuple[str, ...] = tuple(_POOLS["categories"])
SIZE_CLASSES: Tuple[str, ...] = tuple(_POOLS["sizes"])
SIZE_METRES: Dict[str, float] = dict(_POOLS["size_metres"])


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in image units; (x, y) is the top-left corner."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise SceneFormatError(f"box must have positive size, got w={self.w}, h={self.h}")

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def intersection_area(self, other: "BoundingBox") -> float:
        iw = min(self.x + self.w, other.x + other.w) - max(self.x, other.x)
        ih = min(self.y + self.h, other.y + other.h) - max(self.y, other.y)
        if iw <= 0 or ih <= 0:
            return 0.0
        return iw * ih

    def contains_point(self, u: float, v: float, tol: float = _BOUNDS_TOL) -> bool:
        return (self.x - tol <= u <= self.x + self.w + tol
                and self.y - tol <= v <= self.y + self.h + tol)

    def within_bounds(self, width: float, height: float, tol: float = _BOUNDS_TOL) -> bool:
        return (self.x >= -tol and self.y >= -tol
                and self.x + self.w <= width + tol and self.y + self.h <= height + tol)

    def clamped(self, width: float, height: float) -> "BoundingBox":
        """Shift the box so it lies inside (0, 0, width, height)."""
        if self.w > width or self.h > height:
            raise SceneFormatError("box larger than image bounds")
        x = min(max(self.x, 0.0), width - self.w)
        y = min(max(self.y, 0.0), height - self.h)
        return BoundingBox(x, y, self.w, self.h)

    def as_list(self) -> List[float]:
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True)
class AttributeRecord:
    """Closed-vocabulary attributes standing in for a visual feature vector."""

    category: str
    color: str
    size_class: str
    texture: Optional[str] = None
    label_text: Optional[str] = None


@dataclass(frozen=True)
class Region:
    """One object proposal: box, attributes, and a 3D centroid (metres)."""

    id: str
    box: BoundingBox
    attrs: AttributeRecord
    centroid3d: Tuple[float, float, float]

    @property
    def is_whole_image(self) -> bool:
        return self.id == WHOLE_IMAGE_ID


@dataclass(frozen=True)
class Viewpoint:
    """Named camera: position, unit-quaternion orientation, intrinsics."""

    name: str
    position: Tuple[float, float, float]
    orientation: Tuple[float, float, float, float]
    focal: float
    image_w: float
    image_h: float

    def __post_init__(self):
        norm = camera.quat_norm(self.orientation)
        if abs(norm - 1.0) > 1e-9:
            raise SceneFormatError(
                f"viewpoint '{self.name}' orientation norm {norm} is not 1 within 1e-9")
        if self.focal <= 0:
            raise SceneFormatError(f"viewpoint '{self.name}' focal must be positive")

    def project(self, point: Sequence[float]) -> Tuple[float, float]:
        return camera.project_point(point, self.position, self.orientation,
                                    self.focal, self.image_w, self.image_h)


@dataclass(frozen=True)
class Scene:
    """A set of object regions plus viewpoints and the whole-image region."""

    regions: Tuple[Region, ...]
    image_w: float
    image_h: float
    viewpoints: Dict[str, Viewpoint]
    whole_image: Region
    primary: str = "robot"

    def region(self, region_id: str) -> Region:
        if region_id == WHOLE_IMAGE_ID:
            return self.whole_image
        for r in self.regions:
            if r.id == region_id:
                return r
        raise UnknownRegionError(region_id)

    def has_region(self, region_id: str) -> bool:
        try:
            self.region(region_id)
            return True
        except UnknownRegionError:
            return False

    def viewpoint(self, name: str) -> Viewpoint:
        from .errors import UnknownViewpointError

        if name not in self.viewpoints:
            raise UnknownViewpointError(name)
        return self.viewpoints[name]

    @property
    def primary_viewpoint(self) -> Viewpoint:
        return self.viewpoints[self.primary]

    def restricted_to(self, region_ids: Sequence[str]) -> "Scene":
        """Scene containing only the named object regions (order preserved)."""
        keep = [r for r in self.regions if r.id in set(region_ids)]
        if not keep:
            raise UnknownRegionError(f"no scene regions among {list(region_ids)}")
        return replace(self, regions=tuple(keep))


def _whole_image_region(image_w: float, image_h: float, viewpoint: Viewpoint,
                        depth_hint: float) -> Region:
    # A point on the optical axis projects to the principal point, i.e. the
    # image center, so the centroid-in-box invariant holds for the image box.
    fwd = camera.quat_to_matrix(viewpoint.orientation)[:, 2]
    center = tuple(float(p + depth_hint * f) for p, f in zip(viewpoint.position, fwd))
    return Region(
        id=WHOLE_IMAGE_ID,
        box=BoundingBox(0.0, 0.0, image_w, image_h),
        attrs=AttributeRecord(category="image", color="none", size_class="large"),
        centroid3d=center,  # type: ignore[arg-type]
    )


def _parse_viewpoint(name: str, data: dict) -> Viewpoint:
    try:
        position = tuple(float(v) for v in data["position"])
        orientation = tuple(float(v) for v in data["orientation"])
        focal = float(data["focal"])
        image = tuple(float(v) for v in data["image"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneFormatError(f"viewpoints.{name}: missing or malformed field ({exc})")
    if len(position) != 3:
        raise SceneFormatError(f"viewpoints.{name}.position must have 3 components")
    if len(orientation) != 4:
        raise SceneFormatError(f"viewpoints.{name}.orientation must have 4 components")
    if len(image) != 2:
        raise SceneFormatError(f"viewpoints.{name}.image must be [w, h]")
    # 6-decimal file precision denormalizes unit quaternions by ~1e-8;
    # renormalize near-unit values, reject anything further off.
    norm = camera.quat_norm(orientation)
    if abs(norm - 1.0) > 1e-6:
        raise SceneFormatError(
            f"viewpoints.{name}.orientation norm {norm} is not 1 within 1e-6")
    orientation = tuple(c / norm for c in orientation)
    return Viewpoint(name=name, position=position, orientation=orientation,
                     focal=focal, image_w=image[0], image_h=image[1])


def _parse_attrs(idx: int, data: dict) -> AttributeRecord:
    where = f"regions[{idx}].attrs"
    if not isinstance(data, dict):
        raise SceneFormatError(f"{where} must be an object")
    for key in ("category", "color", "size"):
        if key not in data:
            raise SceneFormatError(f"{where}.{key} is required")
    category = data["category"]
    color = data["color"]
    size = data["size"]
    if category not in CATEGORIES:
        raise SceneFormatError(f"{where}.category: unknown category '{category}'")
    if color not in COLORS:
        raise SceneFormatError(f"{where}.color: unknown color '{color}'")
    if size not in SIZE_CLASSES:
        raise SceneFormatError(f"{where}.size: unknown size class '{size}'")
    return AttributeRecord(category=category, color=color, size_class=size,
                           texture=data.get("texture"), label_text=data.get("label"))


def load_scene(document) -> Scene:
    """Parse and validate a scene document (bytes, str, or parsed dict)."""
    if isinstance(document, (bytes, bytearray)):
        document = document.decode("utf-8")
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SceneFormatError(f"invalid JSON: {exc}")
    if not isinstance(document, dict):
        raise SceneFormatError("scene document must be a JSON object")

    try:
        image_w = float(document["image"]["w"])
        image_h = float(document["image"]["h"])
    except (KeyError, TypeError, ValueError):
        raise SceneFormatError("image: expected {'w': number, 'h': number}")
    if image_w <= 0 or image_h <= 0:
        raise SceneFormatError("image: width and height must be positive")

    vp_data = document.get("viewpoints")
    if not isinstance(vp_data, dict) or not vp_data:
        raise SceneFormatError("viewpoints: at least the robot viewpoint is required")
    viewpoints = {name: _parse_viewpoint(name, data) for name, data in vp_data.items()}
    if "robot" not in viewpoints:
        raise SceneFormatError("viewpoints: 'robot' viewpoint is required")
    robot = viewpoints["robot"]
    if abs(robot.image_w - image_w) > _BOUNDS_TOL or abs(robot.image_h - image_h) > _BOUNDS_TOL:
        raise SceneFormatError("viewpoints.robot.image must match the scene image size")

    regions_data = document.get("regions")
    if not isinstance(regions_data, list) or not regions_data:
        raise SceneFormatError("regions: a non-empty list is required")

    regions: List[Region] = []
    seen = set()
    depths = []
    for idx, rd in enumerate(regions_data):
        where = f"regions[{idx}]"
        if not isinstance(rd, dict):
            raise SceneFormatError(f"{where} must be an object")
        rid = rd.get("id")
        if not isinstance(rid, str) or not rid:
            raise SceneFormatError(f"{where}.id must be a non-empty string")
        if rid == WHOLE_IMAGE_ID:
            raise SceneFormatError(f"{where}.id: '{WHOLE_IMAGE_ID}' is reserved")
        if rid in seen:
            raise SceneFormatError(f"{where}.id: duplicate region id '{rid}'")
        seen.add(rid)
        try:
            bx = [float(v) for v in rd["box"]]
        except (KeyError, TypeError, ValueError):
            raise SceneFormatError(f"{where}.box must be [x, y, w, h]")
        if len(bx) != 4:
            raise SceneFormatError(f"{where}.box must be [x, y, w, h]")
        box = BoundingBox(*bx)
        if not box.within_bounds(image_w, image_h):
            raise SceneFormatError(f"{where}.box lies outside the image bounds")
        attrs = _parse_attrs(idx, rd.get("attrs"))
        try:
            centroid = tuple(float(v) for v in rd["centroid"])
        except (KeyError, TypeError, ValueError):
            raise SceneFormatError(f"{where}.centroid must be [x, y, z]")
        if len(centroid) != 3:
            raise SceneFormatError(f"{where}.centroid must be [x, y, z]")
        try:
            u, v = robot.project(centroid)
        except Exception:
            raise SceneFormatError(f"{where}.centroid does not project into the robot view")
        if not box.contains_point(u, v):
            raise SceneFormatError(
                f"{where}.centroid projects to ({u:.2f}, {v:.2f}), outside its box")
        regions.append(Region(id=rid, box=box, attrs=attrs, centroid3d=centroid))
        depths.append(camera.distance(centroid, robot.position))

    whole = _whole_image_region(image_w, image_h, robot, sum(depths) / len(depths))
    return Scene(regions=tuple(regions), image_w=image_w, image_h=image_h,
                 viewpoints=viewpoints, whole_image=whole)


def scene_to_dict(scene: Scene) -> dict:
    """Plain-JSON form of a scene (whole-image region is implicit)."""
    regions = []
    for r in scene.regions:
        attrs = {"category": r.attrs.category, "color": r.attrs.color,
                 "size": r.attrs.size_class}
        if r.attrs.texture is not None:
            attrs["texture"] = r.attrs.texture
        if r.attrs.label_text is not None:
            attrs["label"] = r.attrs.label_text
        regions.append({
            "id": r.id,
            "box": r.box.as_list(),
            "attrs": attrs,
            "centroid": list(r.centroid3d),
        })
    viewpoints = {
        name: {
            "position": list(vp.position),
            "orientation": list(vp.orientation),
            "focal": vp.focal,
            "image": [vp.image_w, vp.image_h],
        }
        for name, vp in scene.viewpoints.items()
    }
    return {"image": {"w": scene.image_w, "h": scene.image_h},
            "viewpoints": viewpoints, "regions": regions}


def save_scene(scene: Scene) -> bytes:
    """Serialize to canonical scene-file bytes."""
    return canonical_bytes(scene_to_dict(scene))


# --- Synthetic scene generation -------------------------------------------

@dataclass(frozen=True)
class CorpusConfig:
    """Parameters of the synthetic scene corpus.

    ``duplicate_count`` objects share (category, color, size); the paper's
    study capped identical objects at 3, and so does the generator.
    ``y_range`` collapses to a single depth row when min equals max, which
    makes projected left/right order match world order in every viewpoint.
    """

    count_min: int = 6
    count_max: int = 10
    duplicate_count: int = 0
    image_w: float = 640.0
    image_h: float = 480.0
    focal: float = 430.0
    x_range: Tuple[float, float] = (-0.85, 0.85)
    y_range: Tuple[float, float] = (1.1, 2.1)
    table_z: float = 0.0
    robot_position: Tuple[float, float, float] = (0.0, -0.9, 0.85)
    user_position: Tuple[float, float, float] = (0.0, 4.1, 0.85)
    look_at: Tuple[float, float, float] = (0.0, 1.6, 0.0)
    colors: Tuple[str, ...] = COLORS
    categories: Tuple[str, ...] = CATEGORIES
    sizes: Tuple[str, ...] = SIZE_CLASSES
    distinct_thirds_for_duplicates: bool = True
    max_attempts: int = 4000
    # Proposal thresholds of the replaced detector stage; recorded for
    # completeness, unused in the synthetic setting.
    nms_threshold: float = 0.7
    proposal_score_threshold: float = 0.05

    def __post_init__(self):
        if self.count_min < 1 or self.count_max < self.count_min:
            raise InfeasibleConfigError("object count range is empty")
        if self.duplicate_count == 1 or self.duplicate_count > 3:
            raise InfeasibleConfigError("duplicate_count must be 0 or 2..3")
        if self.duplicate_count > self.count_min:
            raise InfeasibleConfigError("duplicate_count exceeds minimum object count")


@dataclass(frozen=True)
class GroundTruth:
    """Benchmark annotation: the intended region and how to describe it."""

    target_id: str
    requires_relation: bool


def default_viewpoints(config: CorpusConfig) -> Dict[str, Viewpoint]:
    robot_q = camera.look_at_quaternion(config.robot_position, config.look_at)
    user_q = camera.look_at_quaternion(config.user_position, config.look_at)
    return {
        "robot": Viewpoint("robot", config.robot_position, robot_q,
                           config.focal, config.image_w, config.image_h),
        "user": Viewpoint("user", config.user_position, user_q,
                          config.focal, config.image_w, config.image_h),
    }


def _image_third(config: CorpusConfig, u: float, v: float) -> str:
    if u < config.image_w / 3.0:
        return "left"
    if u > 2.0 * config.image_w / 3.0:
        return "right"
    if v < config.image_h / 3.0:
        return "top"
    if v > 2.0 * config.image_h / 3.0:
        return "bottom"
    return "middle"


def _pick_attribute_sets(rng: random.Random, config: CorpusConfig, n: int):
    """Choose (category, color, size) per object; non-duplicates are unique.

    Returns the per-object attribute tuples plus the duplicate-group key
    (None when the config has no duplicates).
    """
    dup = config.duplicate_count
    attr_sets = []
    dup_key = None
    if dup:
        dup_cat = rng.choice(config.categories)
        dup_key = (dup_cat, rng.choice(config.colors), rng.choice(config.sizes))
        attr_sets.extend([dup_key] * dup)
        # Ambiguity stays confined to the duplicate group: no other object
        # shares its category.
        combos = [(cat, col) for cat in config.categories if cat != dup_cat
                  for col in config.colors]
    else:
        combos = [(cat, col) for cat in config.categories for col in config.colors]
    if len(combos) < n - dup:
        raise InfeasibleConfigError("attribute pools too small for object count")
    for cat, col in rng.sample(combos, n - dup):
        attr_sets.append((cat, col, rng.choice(config.sizes)))
    # Duplicates stay first: they carry the distinct-thirds placement
    # constraint, so the most constrained objects are placed while the
    # scene is still empty.
    rest = attr_sets[dup:]
    rng.shuffle(rest)
    return attr_sets[:dup] + rest, dup_key


def _place_objects(config: CorpusConfig, rng: random.Random, attr_sets,
                   robot: Viewpoint) -> Optional[List[Region]]:
    """Rejection-sample non-overlapping, in-bounds placements; None on failure."""
    placed: List[Region] = []
    dup_thirds: Dict[Tuple[str, str, str], set] = {}
    for i, (cat, col, size) in enumerate(attr_sets):
        phys = SIZE_METRES[size]
        attempts = 0
        while True:
            attempts += 1
            if attempts > config.max_attempts:
                return None
            x = rng.uniform(*config.x_range)
            y = rng.uniform(*config.y_range)
            centroid = (x, y, config.table_z + phys / 2.0)
            u, v = robot.project(centroid)
            depth = camera.distance(centroid, robot.position)
            w_px = config.focal * phys / depth
            h_px = config.focal * phys / depth
            box = BoundingBox(u - w_px / 2.0, v - h_px / 2.0, w_px, h_px)
            if not box.within_bounds(config.image_w, config.image_h, tol=0.0):
                continue
            if any(box.intersection_area(r.box) > 0.0 for r in placed):
                continue
            key = (cat, col, size)
            if config.distinct_thirds_for_duplicates and attr_sets.count(key) > 1:
                third = _image_third(config, u, v)
                used = dup_thirds.setdefault(key, set())
                if third in used:
                    continue
                used.add(third)
            break
        placed.append(Region(
            id=f"r{i}",
            box=box,
            attrs=AttributeRecord(category=cat, color=col, size_class=size),
            centroid3d=centroid,
        ))
    return placed


def generate_scene(config: CorpusConfig, seed: int) -> Tuple[Scene, GroundTruth]:
    """Deterministically generate an annotated scene for (config, seed).

    Boxes never overlap and lie fully inside the image; each box is centered
    on the projection of its 3D centroid in the robot view. Duplicate
    objects land in distinct image thirds so a whole-image relational phrase
    can single any of them out.
    """
    placed = None
    dup_key = None
    viewpoints = default_viewpoints(config)
    robot = viewpoints["robot"]
    n = 0
    # Placement can paint itself into a corner; re-draw the whole scene from
    # a salted stream rather than failing (still a pure function of the seed).
    for retry in range(3):
        salt = f"scene:{seed}" if retry == 0 else f"scene:{seed}:retry{retry}"
        rng = random.Random(salt)
        n = rng.randint(config.count_min, config.count_max)
        attr_sets, dup_key = _pick_attribute_sets(rng, config, n)
        placed = _place_objects(config, rng, attr_sets, robot)
        if placed is not None:
            break
    if placed is None:
        raise InfeasibleConfigError(
            f"could not place {n} non-overlapping objects (seed {seed})")

    depths = [camera.distance(r.centroid3d, robot.position) for r in placed]
    whole = _whole_image_region(config.image_w, config.image_h, robot,
                                sum(depths) / len(depths))
    scene = Scene(regions=tuple(placed), image_w=config.image_w,
                  image_h=config.image_h, viewpoints=viewpoints, whole_image=whole)

    if dup_key is not None:
        dup_ids = [r.id for r in placed
                   if (r.attrs.category, r.attrs.color, r.attrs.size_class) == dup_key]
        target = rng.choice(dup_ids)
        truth = GroundTruth(target_id=target, requires_relation=True)
    else:
        truth = GroundTruth(target_id=rng.choice(placed).id, requires_relation=False)
    return scene, truth
