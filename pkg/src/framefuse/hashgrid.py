"""Density-adaptive spatial hashing over a frame's point set.

Two levels only: a coarse lattice counts points; coarse cells at or above
the density threshold are replaced by fine cells nested inside them.
Cells are half-open intervals indexed by floor((p - origin) / cell), so
every point lands in exactly one cell.  Keys pack (level, ix, iy, iz)
into one 64-bit integer with 21 bits per axis; the padded bounds keep
lattice coordinates non-negative.
"""

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import ValidationFailure
from .fragments import PointFragment, PointTable

_AXIS_BITS = 21
_AXIS_MAX = (1 << _AXIS_BITS) - 1


@dataclass(frozen=True)
class GridParams:
    """Cell sizes in mm; a coarse cell subdivides at >= dense_threshold points."""

    coarse_cell: float = 100.0
    fine_cell: float = 25.0
    dense_threshold: int = 64

    def validate(self) -> None:
        if self.coarse_cell <= 0 or self.fine_cell <= 0:
            raise ValidationFailure("grid cell sizes must be > 0")
        if self.fine_cell >= self.coarse_cell:
            raise ValidationFailure("fine_cell must be smaller than coarse_cell")
        ratio = self.coarse_cell / self.fine_cell
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValidationFailure("coarse_cell must be an integer multiple of fine_cell")
        if self.dense_threshold < 1:
            raise ValidationFailure("dense_threshold must be >= 1")


@dataclass(frozen=True)
class Aabb:
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "low", np.asarray(self.low, dtype=np.float64))
        object.__setattr__(self, "high", np.asarray(self.high, dtype=np.float64))


def compute_bounds(
    fragments: Sequence[PointFragment], pad: float
) -> Optional[Aabb]:
    """Tight bounds over every fragment point, expanded by ``pad`` mm.

    Returns None for an empty scene; the pipeline then emits an empty cloud.
    """
    pts = [f.points for f in fragments if len(f)]
    if not pts:
        return None
    allp = np.concatenate(pts)
    return Aabb(allp.min(axis=0) - pad, allp.max(axis=0) + pad)


def _pack(level: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """64-bit key from a level flag and (n, 3) lattice coordinates."""
    ix = idx[:, 0].astype(np.uint64)
    iy = idx[:, 1].astype(np.uint64)
    iz = idx[:, 2].astype(np.uint64)
    lvl = level.astype(np.uint64)
    return (
        (lvl << np.uint64(63))
        | (ix << np.uint64(2 * _AXIS_BITS))
        | (iy << np.uint64(_AXIS_BITS))
        | iz
    )


def unpack_key(key: int) -> tuple[int, int, int, int]:
    """(level, ix, iy, iz) from a packed cell key; level 1 means fine."""
    k = int(key)
    return (
        (k >> 63) & 1,
        (k >> (2 * _AXIS_BITS)) & _AXIS_MAX,
        (k >> _AXIS_BITS) & _AXIS_MAX,
        k & _AXIS_MAX,
    )


@dataclass
class AdaptiveGrid:
    """Cells sorted by key; ``order``/``starts`` group point indices per cell."""

    bounds: Aabb
    params: GridParams
    keys: np.ndarray        # (c,) uint64 ascending
    fine_level: np.ndarray  # (c,) bool
    order: np.ndarray       # (p,) point indices grouped by cell, ascending inside
    starts: np.ndarray      # (c + 1,) offsets into order

    @property
    def cell_count(self) -> int:
        return self.keys.shape[0]

    @property
    def point_count(self) -> int:
        return self.order.shape[0]

    def cell_points(self, cell: int) -> np.ndarray:
        return self.order[self.starts[cell] : self.starts[cell + 1]]

    def cells(self) -> Iterator[tuple[int, bool, np.ndarray]]:
        """Yields (key, is_fine, point_indices) per occupied cell."""
        for i in range(self.cell_count):
            yield int(self.keys[i]), bool(self.fine_level[i]), self.cell_points(i)


def build_grid(points: np.ndarray, params: GridParams, bounds: Aabb) -> AdaptiveGrid:
    """Two linear passes: count per coarse cell, then assign at the final level.

    ``points`` is the frame's concatenated point table; indices into it are
    what the grid stores.
    """
    params.validate()
    extent = bounds.high - bounds.low
    if np.any(extent / params.fine_cell > _AXIS_MAX):
        raise ValidationFailure(
            f"scene extent {extent.max():.0f} mm exceeds the grid's addressable "
            f"range at fine_cell={params.fine_cell} mm"
        )
    rel = points - bounds.low
    coarse_idx = np.floor(rel / params.coarse_cell).astype(np.int64)
    coarse_keys = _pack(np.zeros(len(points), dtype=np.uint64), coarse_idx)

    uniq, inverse, counts = np.unique(coarse_keys, return_inverse=True, return_counts=True)
    dense = counts >= params.dense_threshold
    is_fine = dense[inverse]

    final_idx = coarse_idx.copy()
    if np.any(is_fine):
        final_idx[is_fine] = np.floor(
            rel[is_fine] / params.fine_cell
        ).astype(np.int64)
    final_keys = _pack(is_fine.astype(np.uint64), final_idx)

    order = np.lexsort((np.arange(len(points)), final_keys))
    sorted_keys = final_keys[order]
    cell_keys, first = np.unique(sorted_keys, return_index=True)
    starts = np.append(first, len(points)).astype(np.int64)
    fine_level = (cell_keys >> np.uint64(63)).astype(bool)
    return AdaptiveGrid(bounds, params, cell_keys, fine_level, order, starts)


@dataclass
class Representatives:
    """Up to three highest-confidence points per occupied cell.

    ``point_index`` is grouped per cell (``starts`` delimits groups) and
    ordered by descending confidence with ties broken by ascending global
    index, i.e. lower camera id first, then row-major pixel order.
    """

    cell_index: np.ndarray  # (r,) index into grid.keys
    point_index: np.ndarray # (r,) index into the point table
    starts: np.ndarray      # (c + 1,)

    def __len__(self) -> int:
        return self.point_index.shape[0]

    def group(self, cell: int) -> np.ndarray:
        return self.point_index[self.starts[cell] : self.starts[cell + 1]]


def select_representatives(
    grid: AdaptiveGrid, table: PointTable, per_cell: int = 3
) -> Representatives:
    n = grid.point_count
    counts = np.diff(grid.starts)
    cell_of_sorted = np.repeat(np.arange(grid.cell_count), counts)
    conf_sorted = table.confidence[grid.order]
    # (cell, -confidence, global index) ascending == spec's selection order.
    sel = np.lexsort((grid.order, -conf_sorted, cell_of_sorted))
    rank = np.arange(n) - np.repeat(grid.starts[:-1], counts)
    keep = rank < np.minimum(counts, per_cell)[cell_of_sorted]
    point_index = grid.order[sel][keep]
    cell_index = cell_of_sorted[keep]
    rep_counts = np.minimum(counts, per_cell)
    starts = np.concatenate([[0], np.cumsum(rep_counts)]).astype(np.int64)
    return Representatives(cell_index, point_index, starts)
