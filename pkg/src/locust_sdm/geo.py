"""Geodesic primitives and the regular lat/lon grid used for sampling.

Distances are great-circle (haversine) on a sphere of radius 6371 km,
which is accurate enough for quarter-degree work.  The grid is
equirectangular in degrees: cells shrink in area toward the poles, and
buffer membership is decided by cell-center distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import EmptyGrid, OutOfBounds

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 point. Longitude is normalized into [-180, 180)."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise OutOfBounds(f"latitude {self.lat} outside [-90, 90]")
        lon = ((self.lon + 180.0) % 360.0) - 180.0
        object.__setattr__(self, "lon", lon)


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in km between two points."""
    return float(
        haversine_km_arrays(
            np.asarray(a.lat), np.asarray(a.lon), np.asarray(b.lat), np.asarray(b.lon)
        )
    )


def haversine_km_arrays(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Vectorized haversine over degree arrays (broadcasting allowed)."""
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(x, dtype=float)) for x in (lat1, lon1, lat2, lon2))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    # clip guards tiny negative/overshoot from rounding near antipodes
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


@dataclass(frozen=True)
class Grid:
    """Regular mesh of cell centers over a bbox.

    Cells are numbered row-major from 0: row 0 is the southernmost band,
    column 0 the westernmost; id = row * n_cols + col.
    """

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    resolution: float
    n_rows: int
    n_cols: int

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        return (self.lat_min, self.lat_max, self.lon_min, self.lon_max)

    @cached_property
    def center_lats(self) -> np.ndarray:
        """Latitude of every cell center, indexed by cell id."""
        rows = np.arange(self.n_rows)
        lat = self.lat_min + (rows + 0.5) * self.resolution
        return np.repeat(lat, self.n_cols)

    @cached_property
    def center_lons(self) -> np.ndarray:
        cols = np.arange(self.n_cols)
        lon = self.lon_min + (cols + 0.5) * self.resolution
        return np.tile(lon, self.n_rows)

    @property
    def cells(self) -> list[GeoPoint]:
        """Ordered cell centers; index in the list is the cell id."""
        lats, lons = self.center_lats, self.center_lons
        return [GeoPoint(float(lats[i]), float(lons[i])) for i in range(self.n_cells)]

    def cell_center(self, cell_id: int) -> GeoPoint:
        if not (0 <= cell_id < self.n_cells):
            raise OutOfBounds(f"cell id {cell_id} outside 0..{self.n_cells - 1}")
        return GeoPoint(float(self.center_lats[cell_id]), float(self.center_lons[cell_id]))

    def cell_index(self, point: GeoPoint) -> int:
        """Id of the cell containing `point`; OutOfBounds outside the bbox."""
        row = math.floor((point.lat - self.lat_min) / self.resolution)
        col = math.floor((point.lon - self.lon_min) / self.resolution)
        if not (0 <= row < self.n_rows and 0 <= col < self.n_cols):
            raise OutOfBounds(f"point ({point.lat}, {point.lon}) outside grid bbox {self.bbox}")
        return row * self.n_cols + col

    def cell_indices(self, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
        """Vectorized cell_index."""
        rows = np.floor((np.asarray(lats) - self.lat_min) / self.resolution).astype(int)
        cols = np.floor((np.asarray(lons) - self.lon_min) / self.resolution).astype(int)
        bad = (rows < 0) | (rows >= self.n_rows) | (cols < 0) | (cols >= self.n_cols)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise OutOfBounds(
                f"point ({np.asarray(lats).ravel()[i]}, {np.asarray(lons).ravel()[i]}) outside grid bbox {self.bbox}"
            )
        return rows * self.n_cols + cols


def build_grid(bbox: tuple[float, float, float, float], resolution: float = 0.25) -> Grid:
    """Build the regular grid of cell centers for a bbox.

    bbox is (lat_min, lat_max, lon_min, lon_max) in degrees. Raises
    EmptyGrid when the box is smaller than one cell.
    """
    lat_min, lat_max, lon_min, lon_max = bbox
    if resolution <= 0:
        raise EmptyGrid(f"resolution must be positive, got {resolution}")
    if not (lat_min < lat_max and lon_min < lon_max):
        raise EmptyGrid(f"degenerate bbox {bbox}")
    n_rows = int(round((lat_max - lat_min) / resolution))
    n_cols = int(round((lon_max - lon_min) / resolution))
    if n_rows < 1 or n_cols < 1:
        raise EmptyGrid(f"bbox {bbox} smaller than one {resolution}-degree cell")
    return Grid(lat_min, lat_max, lon_min, lon_max, resolution, n_rows, n_cols)


@dataclass
class CellMask:
    """Boolean inclusion flag per grid cell."""

    grid: Grid
    included: np.ndarray

    def __post_init__(self):
        self.included = np.asarray(self.included, dtype=bool)
        if self.included.shape != (self.grid.n_cells,):
            raise ValueError(
                f"mask length {self.included.shape} != grid cell count {self.grid.n_cells}"
            )

    @property
    def count(self) -> int:
        return int(self.included.sum())

    def cell_ids(self) -> np.ndarray:
        return np.flatnonzero(self.included)

    def __and__(self, other: "CellMask") -> "CellMask":
        self._check_same_grid(other)
        return CellMask(self.grid, self.included & other.included)

    def __or__(self, other: "CellMask") -> "CellMask":
        self._check_same_grid(other)
        return CellMask(self.grid, self.included | other.included)

    def __invert__(self) -> "CellMask":
        return CellMask(self.grid, ~self.included)

    def _check_same_grid(self, other: "CellMask"):
        if other.grid != self.grid:
            raise ValueError("masks refer to different grids")


def buffer_mask(grid: Grid, points: list[GeoPoint], radius_km: float) -> CellMask:
    """Mask of cells whose center lies within radius_km of ANY point."""
    if radius_km < 0:
        raise ValueError(f"radius must be non-negative, got {radius_km}")
    included = np.zeros(grid.n_cells, dtype=bool)
    if points:
        lats = np.array([p.lat for p in points])
        lons = np.array([p.lon for p in points])
        # chunk over cells to bound the (cells x points) distance matrix
        step = max(1, 2_000_000 // max(len(points), 1))
        for start in range(0, grid.n_cells, step):
            sl = slice(start, min(start + step, grid.n_cells))
            d = haversine_km_arrays(
                grid.center_lats[sl][:, None], grid.center_lons[sl][:, None], lats[None, :], lons[None, :]
            )
            included[sl] = (d <= radius_km).any(axis=1)
    return CellMask(grid, included)
