"""Gated back-projection of a depth frame into a world-space point fragment.

Pixels whose confidence clears the gate threshold are lifted to 3D in a
single vectorized pass, so cost stays linear in the pixel count.  Gated
pixels are omitted entirely rather than emitted as placeholder points.
Emission order is row-major, which downstream tie-breaking relies on.
"""

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .confidence import DepthFrame
from .errors import ValidationFailure
from .geometry import CameraModel, back_project

GATE_THRESHOLD_DEFAULT = 0.6


@dataclass
class PointFragment:
    """One camera's per-frame surviving points with their confidences."""

    camera_id: int
    points: np.ndarray      # (n, 3) world mm
    confidence: np.ndarray  # (n,)
    pixels: np.ndarray      # (n, 2) int32 source (x, y)

    def __len__(self) -> int:
        return self.points.shape[0]

    @staticmethod
    def empty(camera_id: int) -> "PointFragment":
        return PointFragment(
            camera_id,
            np.zeros((0, 3)),
            np.zeros(0),
            np.zeros((0, 2), dtype=np.int32),
        )


def preprocess_depth(frame: DepthFrame, median_filter: bool = False) -> DepthFrame:
    """Optional 3x3 median filter over valid neighbors (center included).

    With the flag off the frame passes through untouched.  Invalid pixels
    stay invalid either way.
    """
    if not median_filter:
        return frame
    r = 1
    padded = np.full(
        (frame.height + 2 * r, frame.width + 2 * r), np.nan, dtype=np.float64
    )
    padded[r:-r, r:-r] = np.where(frame.valid_mask, frame.depth, np.nan)
    windows = np.lib.stride_tricks.sliding_window_view(padded, (3, 3))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        med = np.nanmedian(windows, axis=(2, 3))
    out = np.where(frame.valid_mask, med, 0.0)
    return DepthFrame(frame.camera_id, out)


def generate_fragment(
    cam: CameraModel,
    frame: DepthFrame,
    conf: np.ndarray,
    tau: float = GATE_THRESHOLD_DEFAULT,
) -> PointFragment:
    """Back-project every valid pixel whose confidence exceeds ``tau``."""
    if conf.shape != frame.depth.shape:
        raise ValidationFailure(
            f"camera {frame.camera_id}: confidence map shape {conf.shape} does not "
            f"match depth shape {frame.depth.shape}"
        )
    if (cam.height, cam.width) != frame.depth.shape:
        raise ValidationFailure(
            f"camera {frame.camera_id}: frame is {frame.depth.shape[1]}x"
            f"{frame.depth.shape[0]} but the camera model says {cam.width}x{cam.height}"
        )
    keep = frame.valid_mask & (conf > tau)
    ys, xs = np.nonzero(keep)  # row-major order
    if xs.size == 0:
        return PointFragment.empty(frame.camera_id)
    pix = np.stack([xs, ys], axis=-1).astype(np.float64)
    pts = back_project(cam, pix, frame.depth[ys, xs])
    return PointFragment(
        frame.camera_id,
        pts,
        conf[ys, xs].astype(np.float64),
        np.stack([xs, ys], axis=-1).astype(np.int32),
    )


@dataclass
class PointTable:
    """All fragments of one frame concatenated in ascending camera order.

    The global index doubles as the deterministic tie-break rank:
    ascending index means (lower camera id, then row-major pixel order).
    """

    points: np.ndarray      # (p, 3)
    confidence: np.ndarray  # (p,)
    camera_ids: np.ndarray  # (p,) int32
    pixels: np.ndarray      # (p, 2) int32

    def __len__(self) -> int:
        return self.points.shape[0]

    @staticmethod
    def from_fragments(fragments: Sequence[PointFragment]) -> "PointTable":
        frags = sorted(fragments, key=lambda f: f.camera_id)
        if not frags:
            return PointTable(
                np.zeros((0, 3)),
                np.zeros(0),
                np.zeros(0, dtype=np.int32),
                np.zeros((0, 2), dtype=np.int32),
            )
        return PointTable(
            np.concatenate([f.points for f in frags]),
            np.concatenate([f.confidence for f in frags]),
            np.concatenate(
                [np.full(len(f), f.camera_id, dtype=np.int32) for f in frags]
            ),
            np.concatenate([f.pixels for f in frags]),
        )
