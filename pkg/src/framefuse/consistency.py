"""Cross-view 3D distance consistency weights.

A world point claimed by one camera is checked against the depth maps of
its nearest other cameras: each neighbor's depth at the reprojected pixel
is lifted back to 3D and the disagreement distance d feeds

    V = exp(-(1/K_eff) * sum_j d_j^2 / sigma^2)

where K_eff is the number of neighbors actually used.  A point no other
camera sees keeps V = 1 and falls back to pure measurement confidence.

Depth maps are indexed at the nearest integer pixel (ties to even); no
interpolation, so disagreement across depth discontinuities is penalized
instead of smeared.
"""

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .confidence import DepthFrame
from .errors import ValidationFailure
from .geometry import CameraModel, back_project, project


@dataclass(frozen=True)
class ConsistencyParams:
    """sigma: tolerated spatial deviation in mm; k_cams: total cameras
    (owner included) consulted per point.  Effective K is min(k_cams, N)."""

    sigma: float = 20.0
    k_cams: int = 4

    def validate(self) -> None:
        if self.sigma <= 0:
            raise ValidationFailure("consistency sigma must be > 0")
        if self.k_cams < 2:
            raise ValidationFailure("consistency k_cams must be >= 2")


def fov_check(p_world: np.ndarray, cam: CameraModel, frame: DepthFrame):
    """Real pixel where ``p_world`` lands in ``cam``, or None.

    Present only when the point is in front of the camera and the nearest
    integer pixel is in-frame with a valid observed depth.
    """
    pix, _, valid = project(cam, np.asarray(p_world, dtype=np.float64))
    if not bool(valid):
        return None
    rx = int(np.rint(pix[0]))
    ry = int(np.rint(pix[1]))
    if not (0 <= rx < cam.width and 0 <= ry < cam.height):
        return None
    if frame.depth[ry, rx] <= 0:
        return None
    return float(pix[0]), float(pix[1])


def select_neighbor_cams(
    p_world: np.ndarray,
    owner_id: int,
    rig: Sequence[CameraModel],
    frames: Mapping[int, DepthFrame],
    k_cams: int,
) -> list[int]:
    """Up to k_cams-1 other cameras that see the point, nearest first.

    Distance is Euclidean from camera center to the point; exact ties
    break toward the lower camera id.
    """
    seen = []
    for cam in rig:
        if cam.id == owner_id:
            continue
        if fov_check(p_world, cam, frames[cam.id]) is None:
            continue
        d = float(np.linalg.norm(np.asarray(p_world, dtype=np.float64) - cam.center()))
        seen.append((d, cam.id))
    seen.sort()
    return [cid for _, cid in seen[: max(k_cams - 1, 0)]]


def consistency_weight(
    p_world: np.ndarray,
    owner_id: int,
    neighbor_ids: Sequence[int],
    frames: Mapping[int, DepthFrame],
    rig: Mapping[int, CameraModel],
    sigma: float,
) -> float:
    """Consistency weight of one point given its neighbor cameras.

    Neighbors must have passed ``fov_check``; with no neighbors the weight
    is 1 by convention.
    """
    p = np.asarray(p_world, dtype=np.float64)
    if not neighbor_ids:
        return 1.0
    total = 0.0
    for cid in neighbor_ids:
        cam = rig[cid]
        pix, _, valid = project(cam, p)
        if not bool(valid):
            raise ValidationFailure(
                f"neighbor camera {cid} cannot see the point; run fov_check first"
            )
        rx = int(np.rint(pix[0]))
        ry = int(np.rint(pix[1]))
        q = back_project(
            cam, np.array([rx, ry], dtype=np.float64), frames[cid].depth[ry, rx]
        )
        d = p - q
        total += float(d @ d) / (sigma * sigma)
    return float(np.exp(-total / len(neighbor_ids)))


def consistency_weights(
    points: np.ndarray,
    owner_ids: np.ndarray,
    cams: Sequence[CameraModel],
    frames: Sequence[DepthFrame],
    params: ConsistencyParams,
) -> np.ndarray:
    """Vectorized weights for a batch of points.

    ``cams`` and ``frames`` are aligned and must be sorted by ascending
    camera id so that distance ties break the same way as the scalar path.
    """
    params.validate()
    n_cams = len(cams)
    n_pts = points.shape[0]
    k_take = min(params.k_cams, n_cams) - 1
    if n_pts == 0 or k_take <= 0:
        return np.ones(n_pts)

    dist = np.full((n_cams, n_pts), np.inf)
    d2 = np.zeros((n_cams, n_pts))
    for row, (cam, frame) in enumerate(zip(cams, frames)):
        pix, _, front = project(cam, points)
        rx = np.where(front, np.rint(pix[..., 0]), -1.0)
        ry = np.where(front, np.rint(pix[..., 1]), -1.0)
        ok = front & cam.contains(rx, ry)
        rxi = np.where(ok, rx, 0).astype(np.intp)
        ryi = np.where(ok, ry, 0).astype(np.intp)
        depths = frame.depth[ryi, rxi]
        ok &= depths > 0
        ok &= owner_ids != cam.id
        if np.any(ok):
            q = back_project(
                cam,
                np.stack([rx[ok], ry[ok]], axis=-1),
                depths[ok],
            )
            diff = points[ok] - q
            d2[row, ok] = np.einsum("ij,ij->i", diff, diff)
            dist[row, ok] = np.linalg.norm(points[ok] - cam.center(), axis=1)

    # k nearest seeing cameras per point; stable sort keeps ascending-id ties.
    order = np.argsort(dist, axis=0, kind="stable")[:k_take]
    sel_dist = np.take_along_axis(dist, order, axis=0)
    sel_d2 = np.take_along_axis(d2, order, axis=0)
    chosen = np.isfinite(sel_dist)
    k_eff = chosen.sum(axis=0)
    ssum = np.where(chosen, sel_d2, 0.0).sum(axis=0) / (params.sigma * params.sigma)
    return np.where(k_eff > 0, np.exp(-ssum / np.maximum(k_eff, 1)), 1.0)
