"""Per-pixel measurement confidence for depth frames.

A depth observation is trusted less where the surface changes fast
(large depth gradient) and where the local neighborhood is unstable
(large depth standard deviation).  Both cues combine into

    c = alpha / (1 + beta * G) + gamma / (1 + delta * sigma_local)

clamped to [0, 1].  Invalid pixels (depth 0) get confidence 0 and are
excluded from their neighbors' gradient and variance estimates.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationFailure


@dataclass
class DepthFrame:
    """One camera's depth image in millimeters; value 0 marks invalid pixels."""

    camera_id: int
    depth: np.ndarray

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=np.float64)
        if self.depth.ndim != 2:
            raise ValidationFailure("depth image must be 2-D (rows, cols)")

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def valid_mask(self) -> np.ndarray:
        return self.depth > 0

    def validate(self) -> None:
        if not np.all(np.isfinite(self.depth)):
            raise ValidationFailure(f"camera {self.camera_id}: non-finite depth values")
        if np.any(self.depth < 0):
            raise ValidationFailure(f"camera {self.camera_id}: negative depth values")


@dataclass(frozen=True)
class ConfidenceParams:
    """Weights of the two reliability cues plus the variance window size."""

    alpha: float = 0.5
    beta: float = 0.5
    gamma: float = 1.0
    delta: float = 1.0
    window: int = 3

    def validate(self) -> None:
        for name in ("alpha", "beta", "gamma", "delta"):
            if getattr(self, name) < 0:
                raise ValidationFailure(f"confidence weight {name} must be >= 0")
        if self.window < 3 or self.window % 2 == 0:
            raise ValidationFailure("confidence window must be an odd integer >= 3")


def _shifted(depth: np.ndarray, valid: np.ndarray, dy: int, dx: int):
    """Neighbor values at offset (dy, dx); out-of-frame counts as invalid."""
    h, w = depth.shape
    vals = np.zeros_like(depth)
    ok = np.zeros_like(valid)
    ys = slice(max(dy, 0), h + min(dy, 0))
    yd = slice(max(-dy, 0), h + min(-dy, 0))
    xs = slice(max(dx, 0), w + min(dx, 0))
    xd = slice(max(-dx, 0), w + min(-dx, 0))
    vals[yd, xd] = depth[ys, xs]
    ok[yd, xd] = valid[ys, xs]
    return vals, ok


def _axis_gradient(depth, valid, dy, dx):
    """One axis of the gradient: central where both neighbors are valid,
    one-sided where only one is, 0 where neither."""
    fwd, fwd_ok = _shifted(depth, valid, dy, dx)
    bwd, bwd_ok = _shifted(depth, valid, -dy, -dx)
    g = np.zeros_like(depth)
    both = fwd_ok & bwd_ok
    only_fwd = fwd_ok & ~bwd_ok
    only_bwd = bwd_ok & ~fwd_ok
    g[both] = (fwd[both] - bwd[both]) / 2.0
    g[only_fwd] = fwd[only_fwd] - depth[only_fwd]
    g[only_bwd] = depth[only_bwd] - bwd[only_bwd]
    return g


def gradient_map(frame: DepthFrame) -> np.ndarray:
    """Depth gradient magnitude (mm/pixel) per pixel.

    Entries at invalid pixels are set to 0 but carry no meaning there.
    """
    depth = frame.depth
    valid = frame.valid_mask
    gx = _axis_gradient(depth, valid, 0, 1)
    gy = _axis_gradient(depth, valid, 1, 0)
    g = np.hypot(gx, gy)
    g[~valid] = 0.0
    return g


def depth_gradient(frame: DepthFrame, x: int, y: int) -> float:
    """Gradient magnitude at a single valid pixel."""
    if not (0 <= x < frame.width and 0 <= y < frame.height):
        raise ValueError("pixel outside the frame")
    if frame.depth[y, x] <= 0:
        raise ValueError("gradient is undefined at invalid pixels")
    return float(gradient_map(frame)[y, x])


def variance_map(frame: DepthFrame, window: int = 3) -> np.ndarray:
    """Population std-dev of valid depths in a window clipped to the frame.

    Pixels whose window holds fewer than 2 valid samples get 0.
    """
    r = window // 2
    padded = np.full(
        (frame.height + 2 * r, frame.width + 2 * r), np.nan, dtype=np.float64
    )
    padded[r:-r, r:-r] = np.where(frame.valid_mask, frame.depth, np.nan)
    windows = np.lib.stride_tricks.sliding_window_view(padded, (window, window))
    counts = np.sum(~np.isnan(windows), axis=(2, 3))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        var = np.nanvar(windows, axis=(2, 3))
    sigma = np.sqrt(np.where(counts >= 2, var, 0.0))
    return sigma


def local_variance(frame: DepthFrame, x: int, y: int, window: int = 3) -> float:
    """Local depth standard deviation (mm) at a single valid pixel."""
    if not (0 <= x < frame.width and 0 <= y < frame.height):
        raise ValueError("pixel outside the frame")
    if frame.depth[y, x] <= 0:
        raise ValueError("local variance is undefined at invalid pixels")
    return float(variance_map(frame, window)[y, x])


def confidence_map(frame: DepthFrame, params: ConfidenceParams = ConfidenceParams()) -> np.ndarray:
    """Confidence in [0, 1] per pixel; exactly 0 at invalid pixels."""
    params.validate()
    g = gradient_map(frame)
    sigma = variance_map(frame, params.window)
    raw = params.alpha / (1.0 + params.beta * g) + params.gamma / (
        1.0 + params.delta * sigma
    )
    c = np.minimum(raw, 1.0)
    c[~frame.valid_mask] = 0.0
    return c
