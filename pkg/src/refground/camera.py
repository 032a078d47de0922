"""Pinhole camera math: quaternions, look-at frames, and point projection.

Camera convention (OpenCV style): +X right, +Y down, +Z forward. The
orientation quaternion (w, x, y, z) rotates camera coordinates into world
coordinates; the principal point sits at the image center.
"""
from __future__ import annotations

import math
from typing import Sequence, Tuple

import numpy as np

from .errors import ProjectionError

Vec3 = Tuple[float, float, float]
Quat = Tuple[float, float, float, float]


def quat_norm(q: Sequence[float]) -> float:
    return math.sqrt(sum(c * c for c in q))


def quat_to_matrix(q: Sequence[float]) -> np.ndarray:
    """Rotation matrix (camera-to-world) of a unit quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m: np.ndarray) -> Quat:
    """Unit quaternion (w, x, y, z) of a rotation matrix."""
    t = float(np.trace(m))
    if t > 0:
        s = math.sqrt(t + 1.0) * 2
        w = 0.25 * s
        x = (m[2, 1] - m[1, 2]) / s
        y = (m[0, 2] - m[2, 0]) / s
        z = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        w = (m[2, 1] - m[1, 2]) / s
        x = 0.25 * s
        y = (m[0, 1] + m[1, 0]) / s
        z = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        w = (m[0, 2] - m[2, 0]) / s
        x = (m[0, 1] + m[1, 0]) / s
        y = 0.25 * s
        z = (m[1, 2] + m[2, 1]) / s
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        w = (m[1, 0] - m[0, 1]) / s
        x = (m[0, 2] + m[2, 0]) / s
        y = (m[1, 2] + m[2, 1]) / s
        z = 0.25 * s
    norm = quat_norm((w, x, y, z))
    return (w / norm, x / norm, y / norm, z / norm)


def look_at_quaternion(position: Sequence[float], target: Sequence[float],
                       up: Sequence[float] = (0.0, 0.0, 1.0)) -> Quat:
    """Orientation for a camera at ``position`` looking at ``target``.

    ``up`` is the world up direction; the camera +Y (image down) points
    against it.
    """
    pos = np.asarray(position, dtype=float)
    fwd = np.asarray(target, dtype=float) - pos
    norm = np.linalg.norm(fwd)
    if norm < 1e-12:
        raise ValueError("look-at target coincides with camera position")
    fwd = fwd / norm
    right = np.cross(fwd, np.asarray(up, dtype=float))
    r_norm = np.linalg.norm(right)
    if r_norm < 1e-12:
        raise ValueError("look-at direction parallel to the up vector")
    right = right / r_norm
    down = np.cross(fwd, right)
    m = np.column_stack([right, down, fwd])
    return matrix_to_quat(m)


def project_point(point: Sequence[float], position: Sequence[float],
                  orientation: Sequence[float], focal: float,
                  image_w: float, image_h: float) -> Tuple[float, float]:
    """Project a world point onto the image plane; returns (u, v) pixels.

    Raises ProjectionError if the point is not strictly in front of the
    camera.
    """
    rel = np.asarray(point, dtype=float) - np.asarray(position, dtype=float)
    cam = quat_to_matrix(orientation).T @ rel
    if cam[2] <= 1e-9:
        raise ProjectionError(f"point {tuple(point)} is behind the image plane")
    u = focal * cam[0] / cam[2] + image_w / 2.0
    v = focal * cam[1] / cam[2] + image_h / 2.0
    return float(u), float(v)


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))
