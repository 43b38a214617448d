"""Pinhole camera model and rigid transforms.

Conventions used across the whole package:

* World and camera frames are right-handed; the camera looks along +Z,
  X points right, Y points down in the image.
* A camera ``pose`` maps world coordinates into the camera frame
  (p_cam = R @ p_world + t).  Camera-to-world therefore uses the inverse.
* All lengths are millimeters.  Pixel coordinates are (x, y) =
  (column, row); integer coordinates address pixel centers.
* Projection rejects points with camera-frame depth <= Z_MIN_MM instead
  of dividing by a near-zero z.
"""

from dataclasses import dataclass

import numpy as np

# Behind-camera cutoff for projection, in millimeters.
Z_MIN_MM = 1.0


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation; ``apply`` computes R @ p + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one (3,) point or an (..., 3) array of points."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform equal to applying ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def as_matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def rigidity_error(self) -> float:
        """Max deviation of R from an orthonormal, det=+1 matrix."""
        r = self.rotation
        ortho = float(np.max(np.abs(r @ r.T - np.eye(3))))
        det = abs(float(np.linalg.det(r)) - 1.0)
        return max(ortho, det)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera: intrinsics plus its world-to-camera pose."""

    id: int
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    pose: RigidTransform

    def validate(self, tol: float = 1e-9) -> None:
        """Check the model invariants; raises ValueError when violated."""
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"camera {self.id}: focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(f"camera {self.id}: principal point outside the image")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"camera {self.id}: non-positive image size")
        err = self.pose.rigidity_error()
        if err > tol:
            raise ValueError(
                f"camera {self.id}: rotation is not rigid (error {err:.3e} > {tol:.0e})"
            )

    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return self.pose.inverse().translation

    def contains(self, x, y):
        """Vectorized in-frame test for pixel coordinates (real or integer)."""
        return (x >= 0) & (x < self.width) & (y >= 0) & (y < self.height)


def project(cam: CameraModel, points: np.ndarray):
    """Project world points into the image plane.

    Returns ``(pix, z, valid)`` where ``pix`` is (..., 2) real pixel
    coordinates, ``z`` the camera-frame depth in mm, and ``valid`` marks
    points in front of the camera (z > Z_MIN_MM).  Pixels are NaN where
    invalid and are *not* clamped to the frame; callers do the in-frame
    test themselves.
    """
    p_cam = cam.pose.apply(points)
    z = p_cam[..., 2]
    valid = z > Z_MIN_MM
    z_safe = np.where(valid, z, 1.0)
    px = cam.fx * p_cam[..., 0] / z_safe + cam.cx
    py = cam.fy * p_cam[..., 1] / z_safe + cam.cy
    pix = np.stack([px, py], axis=-1)
    pix = np.where(valid[..., None], pix, np.nan)
    return pix, z, valid


def back_project(cam: CameraModel, pix: np.ndarray, depth: np.ndarray) -> np.ndarray:
    """Lift pixels with depths into world space.

    ``pix`` is (..., 2) pixel coordinates, ``depth`` the matching
    camera-frame depths in mm (all > 0; invalid pixels must be masked
    out by the caller).
    """
    pix = np.asarray(pix, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(depth <= 0):
        raise ValueError("back_project requires strictly positive depths")
    dirs = np.stack(
        [
            (pix[..., 0] - cam.cx) / cam.fx,
            (pix[..., 1] - cam.cy) / cam.fy,
            np.ones_like(pix[..., 0]),
        ],
        axis=-1,
    )
    p_cam = depth[..., None] * dirs
    return cam.pose.inverse().apply(p_cam)
