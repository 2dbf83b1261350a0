"""Observations, environmental rasters, and the windowed feature pipeline.

For every temporal variable a 95-day history ending on the observation
day is taken, the most recent 7 days (observation day included) are
removed, and the remaining days are bucketed oldest-first into 6-day
windows whose means become features.  The trailing incomplete remainder
is dropped, leaving 14 buckets per variable; with 12 temporal and 6
static variables the design matrix has 12*14 + 6 = 174 columns.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, CoverageError, OutOfBounds, ParseError
from .geo import GeoPoint, Grid, build_grid

HISTORY_DAYS = 95
LEAD_DAYS = 7
BUCKET_DAYS = 6
N_BUCKETS = 14

TEMPORAL_VARIABLES = (
    "AvgSurfT_inst",
    "Albedo_inst",
    "SoilMoi0_10cm_inst",
    "SoilMoi10_40cm_inst",
    "SoilTMP0_10cm_inst",
    "SoilTMP10_40cm_inst",
    "Tveg_tavg",
    "Wind_f_inst",
    "Rainf_f_tavg",
    "Tair_f_inst",
    "Qair_f_inst",
    "Psurf_f_inst",
)

STATIC_VARIABLES = (
    "sand_0.5cm_mean",
    "sand_5.15cm_mean",
    "clay_0.5cm_mean",
    "clay_5.15cm_mean",
    "silt_0.5cm_mean",
    "silt_5.15cm_mean",
)


def feature_schema(
    temporal_names: Sequence[str] = TEMPORAL_VARIABLES,
    static_names: Sequence[str] = STATIC_VARIABLES,
) -> tuple[str, ...]:
    """Ordered feature names: every variable's buckets 1..14, then statics."""
    names = [f"{v}_bucket_{b}" for v in temporal_names for b in range(1, N_BUCKETS + 1)]
    names.extend(static_names)
    return tuple(names)


@dataclass(frozen=True)
class Observation:
    id: int
    location: GeoPoint
    date: dt.date
    presence: bool


@dataclass
class TemporalRaster:
    """Daily values of one variable on a grid; values[day, cell]."""

    variable: str
    grid: Grid
    start_date: dt.date
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.n_cells:
            raise ConfigError(
                f"raster {self.variable}: values shape {self.values.shape} "
                f"does not match grid with {self.grid.n_cells} cells"
            )

    @property
    def n_days(self) -> int:
        return self.values.shape[0]

    @property
    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(self.n_days)]

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=self.n_days - 1)


@dataclass
class StaticRaster:
    """Per-cell values of one non-temporal variable."""

    variable: str
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_cells,):
            raise ConfigError(
                f"raster {self.variable}: {self.values.shape[0]} values for "
                f"{self.grid.n_cells} cells"
            )


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    schema: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.shape != (len(self.schema),):
            raise ConfigError(
                f"feature vector length {self.values.shape} != schema length {len(self.schema)}"
            )


class Featurizer:
    """Assembles bucket-mean feature rows from a raster stack.

    Precomputes per-variable cumulative sums over the date axis so a
    batch of (cell, date) queries reduces to a handful of gathers.
    """

    def __init__(self, temporal: Sequence[TemporalRaster], static: Sequence[StaticRaster]):
        if not temporal:
            raise ConfigError("at least one temporal raster required")
        grid = temporal[0].grid
        start = temporal[0].start_date
        n_days = temporal[0].n_days
        for r in temporal:
            if r.grid != grid or r.start_date != start or r.n_days != n_days:
                raise ConfigError("temporal rasters must share one grid and date axis")
        for r in static:
            if r.grid != grid:
                raise ConfigError("static rasters must share the temporal rasters' grid")
        self.grid = grid
        self.start_date = start
        self.n_days = n_days
        self.temporal_names = tuple(r.variable for r in temporal)
        self.static_names = tuple(r.variable for r in static)
        self.schema = feature_schema(self.temporal_names, self.static_names)
        self._static = np.stack([r.values for r in static]) if static else np.empty((0, grid.n_cells))
        # cumsums[v][d, c] = sum of days 0..d-1; a 6-day window mean becomes
        # two gathers.  NaN days are tracked separately so a hole outside a
        # window never poisons it.
        self._cumsums = []
        self._nan_cumsums = []
        for r in temporal:
            nan = ~np.isfinite(r.values)
            cs = np.zeros((n_days + 1, grid.n_cells))
            np.cumsum(np.where(nan, 0.0, r.values), axis=0, out=cs[1:])
            self._cumsums.append(cs)
            ncs = np.zeros((n_days + 1, grid.n_cells), dtype=np.int32)
            np.cumsum(nan, axis=0, out=ncs[1:])
            self._nan_cumsums.append(ncs)

    @property
    def n_features(self) -> int:
        return len(self.schema)

    def valid_date_range(self) -> tuple[dt.date, dt.date]:
        """Observation dates for which the full 95-day history exists."""
        first = self.start_date + dt.timedelta(days=HISTORY_DAYS - 1)
        last = self.start_date + dt.timedelta(days=self.n_days - 1)
        if first > last:
            raise CoverageError(f"raster stack spans only {self.n_days} days < {HISTORY_DAYS}")
        return first, last

    def _day_index(self, dates: Sequence[dt.date]) -> np.ndarray:
        start_ord = self.start_date.toordinal()
        idx = np.array([d.toordinal() - start_ord for d in dates], dtype=int)
        bad = (idx < HISTORY_DAYS - 1) | (idx >= self.n_days)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise CoverageError(
                f"observation date {dates[i]} lacks the {HISTORY_DAYS}-day history "
                f"within rasters {self.start_date}..{self.start_date + dt.timedelta(days=self.n_days - 1)}"
            )
        return idx

    def features_batch(self, cell_ids: np.ndarray, dates: Sequence[dt.date]) -> np.ndarray:
        """Feature matrix for paired cell ids and observation dates."""
        cell_ids = np.asarray(cell_ids, dtype=int)
        t_idx = self._day_index(dates)
        n = len(cell_ids)
        if n != len(t_idx):
            raise ConfigError("cell_ids and dates must have equal length")
        out = np.empty((n, self.n_features))
        # bucket i (1-based) covers offsets [-94 + 6(i-1), -94 + 6i) from the
        # observation day; boundaries in cumsum coordinates
        bounds = t_idx[:, None] - (HISTORY_DAYS - 1) + BUCKET_DAYS * np.arange(N_BUCKETS + 1)[None, :]
        cols = cell_ids[:, None]
        for v, (cs, ncs) in enumerate(zip(self._cumsums, self._nan_cumsums)):
            if (np.diff(ncs[bounds, cols], axis=1) > 0).any():
                raise CoverageError(
                    f"variable {self.temporal_names[v]} has missing values inside a feature window"
                )
            out[:, v * N_BUCKETS:(v + 1) * N_BUCKETS] = np.diff(cs[bounds, cols], axis=1) / BUCKET_DAYS
        if len(self._static):
            stat = self._static[:, cell_ids].T
            if not np.all(np.isfinite(stat)):
                raise CoverageError("missing static raster value at a requested cell")
            out[:, len(self._cumsums) * N_BUCKETS:] = stat
        return out

    def features_for_observations(self, observations: Sequence[Observation]) -> np.ndarray:
        cells = self.grid.cell_indices(
            np.array([o.location.lat for o in observations]),
            np.array([o.location.lon for o in observations]),
        )
        return self.features_batch(cells, [o.date for o in observations])


def assemble_features(
    obs: Observation,
    temporal: Sequence[TemporalRaster],
    static: Sequence[StaticRaster],
) -> FeatureVector:
    """Feature vector for one observation; requires 12 temporal + 6 static variables."""
    if len(temporal) != len(TEMPORAL_VARIABLES) or len(static) != len(STATIC_VARIABLES):
        raise ConfigError(
            f"expected {len(TEMPORAL_VARIABLES)} temporal and {len(STATIC_VARIABLES)} static "
            f"variables, got {len(temporal)} and {len(static)}"
        )
    fz = Featurizer(temporal, static)
    row = fz.features_for_observations([obs])[0]
    return FeatureVector(row, fz.schema)


# ---------------------------------------------------------------------------
# splits

def temporal_split(rows, train_end_year: int = 2014):
    """Partition anything carrying a .date by year: <= train_end_year goes to train."""
    train = [r for r in rows if r.date.year <= train_end_year]
    test = [r for r in rows if r.date.year > train_end_year]
    return train, test


def train_val_split(train_rows, ratio: float = 0.8, seed: int = 0):
    """Seeded uniform partition into (ceil(ratio*n), rest)."""
    if not (0.0 < ratio < 1.0):
        raise ConfigError(f"ratio must be in (0,1), got {ratio}")
    rows = list(train_rows)
    n = len(rows)
    n_train = math.ceil(ratio * n)
    order = np.random.default_rng(seed).permutation(n)
    train = [rows[i] for i in order[:n_train]]
    val = [rows[i] for i in order[n_train:]]
    return train, val


# ---------------------------------------------------------------------------
# labeled dataset

LABELS = ("presence", "absence")


@dataclass
class LabeledDataset:
    """Columnar design matrix with labels, provenance and split tags."""

    schema: tuple[str, ...]
    X: np.ndarray
    labels: np.ndarray          # bool, True = presence
    origins: list[str]          # observed | pseudo:<METHOD> | background
    dates: list[dt.date]
    locations: list[GeoPoint]
    splits: list[str]           # train | val | test

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.labels = np.asarray(self.labels, dtype=bool)
        n = len(self.X)
        for name, col in (("labels", self.labels), ("origins", self.origins),
                          ("dates", self.dates), ("locations", self.locations),
                          ("splits", self.splits)):
            if len(col) != n:
                raise ConfigError(f"{name} length {len(col)} != {n} rows")
        if self.X.ndim != 2 or self.X.shape[1] != len(self.schema):
            raise ConfigError(f"X shape {self.X.shape} does not match schema of {len(self.schema)}")

    def __len__(self) -> int:
        return len(self.X)

    def subset(self, mask: np.ndarray) -> "LabeledDataset":
        idx = np.flatnonzero(mask)
        return LabeledDataset(
            self.schema,
            self.X[idx],
            self.labels[idx],
            [self.origins[i] for i in idx],
            [self.dates[i] for i in idx],
            [self.locations[i] for i in idx],
            [self.splits[i] for i in idx],
        )

    def split(self, name: str) -> "LabeledDataset":
        return self.subset(np.array([s == name for s in self.splits]))

    @staticmethod
    def concat(parts: Sequence["LabeledDataset"]) -> "LabeledDataset":
        if not parts:
            raise ConfigError("cannot concatenate zero datasets")
        schema = parts[0].schema
        for p in parts:
            if p.schema != schema:
                raise ConfigError("datasets with different schemas cannot be concatenated")
        return LabeledDataset(
            schema,
            np.vstack([p.X for p in parts]),
            np.concatenate([p.labels for p in parts]),
            sum((p.origins for p in parts), []),
            sum((p.dates for p in parts), []),
            sum((p.locations for p in parts), []),
            sum((p.splits for p in parts), []),
        )


# ---------------------------------------------------------------------------
# file formats (comma-separated, leading '#' lines are provenance comments)

OBSERVATION_HEADER = "id,lat,lon,date,presence"
TEMPORAL_HEADER = "variable,lat,lon,date,value"
STATIC_HEADER = "variable,lat,lon,value"


def _open_rows(path):
    """Yield (line_number, raw_line) skipping blank and comment lines."""
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            yield i, line


def _check_header(path, expected: str):
    it = _open_rows(path)
    try:
        lineno, line = next(it)
    except StopIteration:
        raise ParseError(f"{path}: empty file, expected header '{expected}'") from None
    if line.strip() != expected:
        raise ParseError(f"expected header '{expected}', got '{line.strip()}'", lineno)
    return it


def _parse_latlon(lat_s: str, lon_s: str, lineno: int) -> GeoPoint:
    try:
        lat, lon = float(lat_s), float(lon_s)
    except ValueError as e:
        raise ParseError(f"bad coordinate: {e}", lineno) from None
    if not (-90.0 <= lat <= 90.0):
        raise OutOfBounds(f"line {lineno}: latitude {lat} outside [-90, 90]")
    if not (-180.0 <= lon < 180.0):
        raise OutOfBounds(f"line {lineno}: longitude {lon} outside [-180, 180)")
    return GeoPoint(lat, lon)


def _parse_date(s: str, lineno: int) -> dt.date:
    try:
        return dt.date.fromisoformat(s)
    except ValueError:
        raise ParseError(f"bad ISO date '{s}'", lineno) from None


def ingest_observations(path) -> list[Observation]:
    """Read an `id,lat,lon,date,presence` file; row order is preserved."""
    out = []
    for lineno, line in _check_header(path, OBSERVATION_HEADER):
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError(f"expected 5 fields, got {len(parts)}", lineno)
        try:
            oid = int(parts[0])
        except ValueError:
            raise ParseError(f"bad id '{parts[0]}'", lineno) from None
        loc = _parse_latlon(parts[1], parts[2], lineno)
        date = _parse_date(parts[3], lineno)
        if parts[4] not in ("0", "1"):
            raise ParseError(f"presence must be 0 or 1, got '{parts[4]}'", lineno)
        out.append(Observation(oid, loc, date, parts[4] == "1"))
    return out


def write_observations(path, observations: Iterable[Observation], provenance: str | None = None):
    lines = []
    if provenance:
        lines.append(provenance)
    lines.append(OBSERVATION_HEADER)
    for o in observations:
        lines.append(f"{o.id},{o.location.lat!r},{o.location.lon!r},{o.date.isoformat()},{int(o.presence)}")
    _atomic_write(path, "\n".join(lines) + "\n")


def _infer_axis(values: np.ndarray, what: str) -> tuple[np.ndarray, float]:
    """Sorted unique coordinates and their common spacing."""
    uniq = np.unique(values)
    if len(uniq) == 1:
        return uniq, 0.0
    steps = np.diff(uniq)
    res = float(np.median(steps))
    if res <= 0 or not np.allclose(steps, res, rtol=0, atol=1e-9):
        raise ParseError(f"{what} coordinates are not a regular grid")
    return uniq, res


def _grid_from_centers(lats: np.ndarray, lons: np.ndarray) -> Grid:
    ulat, rlat = _infer_axis(lats, "latitude")
    ulon, rlon = _infer_axis(lons, "longitude")
    res = rlat or rlon
    if res == 0.0:
        raise ParseError("cannot infer grid resolution from a single cell")
    if rlat and rlon and not math.isclose(rlat, rlon, rel_tol=1e-9):
        raise ParseError(f"latitude spacing {rlat} != longitude spacing {rlon}")
    bbox = (ulat[0] - res / 2, ulat[-1] + res / 2, ulon[0] - res / 2, ulon[-1] + res / 2)
    return build_grid(bbox, res)


def ingest_temporal_rasters(path) -> list[TemporalRaster]:
    """Read a long-format `variable,lat,lon,date,value` file into per-variable rasters."""
    by_var: dict[str, list[tuple[float, float, str, float]]] = {}
    for lineno, line in _check_header(path, TEMPORAL_HEADER):
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError(f"expected 5 fields, got {len(parts)}", lineno)
        loc = _parse_latlon(parts[1], parts[2], lineno)
        _parse_date(parts[3], lineno)
        try:
            val = float(parts[4])
        except ValueError:
            raise ParseError(f"bad value '{parts[4]}'", lineno) from None
        by_var.setdefault(parts[0], []).append((loc.lat, loc.lon, parts[3], val))
    rasters = []
    for var, rows in by_var.items():
        lats = np.array([r[0] for r in rows])
        lons = np.array([r[1] for r in rows])
        grid = _grid_from_centers(lats, lons)
        dates = sorted({r[2] for r in rows})
        d0 = dt.date.fromisoformat(dates[0])
        d1 = dt.date.fromisoformat(dates[-1])
        n_days = (d1 - d0).days + 1
        if n_days != len(dates):
            raise ParseError(f"variable {var}: dates are not a contiguous daily range")
        if len(rows) != n_days * grid.n_cells:
            raise ParseError(
                f"variable {var}: {len(rows)} rows != {n_days} days x {grid.n_cells} cells"
            )
        values = np.full((n_days, grid.n_cells), np.nan)
        cell = grid.cell_indices(lats, lons)
        day = np.array([(dt.date.fromisoformat(r[2]) - d0).days for r in rows])
        values[day, cell] = [r[3] for r in rows]
        if np.isnan(values).any():
            raise ParseError(f"variable {var}: duplicate or missing (date, cell) rows")
        rasters.append(TemporalRaster(var, grid, d0, values))
    return rasters


def ingest_static_rasters(path) -> list[StaticRaster]:
    by_var: dict[str, list[tuple[float, float, float]]] = {}
    for lineno, line in _check_header(path, STATIC_HEADER):
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", lineno)
        loc = _parse_latlon(parts[1], parts[2], lineno)
        try:
            val = float(parts[3])
        except ValueError:
            raise ParseError(f"bad value '{parts[3]}'", lineno) from None
        by_var.setdefault(parts[0], []).append((loc.lat, loc.lon, val))
    rasters = []
    for var, rows in by_var.items():
        lats = np.array([r[0] for r in rows])
        lons = np.array([r[1] for r in rows])
        grid = _grid_from_centers(lats, lons)
        if len(rows) != grid.n_cells:
            raise ParseError(f"variable {var}: {len(rows)} rows != {grid.n_cells} cells")
        values = np.full(grid.n_cells, np.nan)
        values[grid.cell_indices(lats, lons)] = [r[2] for r in rows]
        if np.isnan(values).any():
            raise ParseError(f"variable {var}: duplicate or missing cell rows")
        rasters.append(StaticRaster(var, grid, values))
    return rasters


def write_temporal_rasters(path, rasters: Sequence[TemporalRaster], provenance: str | None = None):
    def lines():
        if provenance:
            yield provenance
        yield TEMPORAL_HEADER
        for r in rasters:
            lats, lons = r.grid.center_lats, r.grid.center_lons
            coords = [f"{lats[c]!r},{lons[c]!r}" for c in range(r.grid.n_cells)]
            for d_i, date in enumerate(r.dates):
                iso = date.isoformat()
                row_vals = r.values[d_i]
                for c in range(r.grid.n_cells):
                    yield f"{r.variable},{coords[c]},{iso},{row_vals[c]!r}"

    _atomic_write(path, lines())


def write_static_rasters(path, rasters: Sequence[StaticRaster], provenance: str | None = None):
    lines = []
    if provenance:
        lines.append(provenance)
    lines.append(STATIC_HEADER)
    for r in rasters:
        lats, lons = r.grid.center_lats, r.grid.center_lons
        lines.extend(
            f"{r.variable},{lats[c]!r},{lons[c]!r},{r.values[c]!r}" for c in range(r.grid.n_cells)
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def dataset_header(schema: Sequence[str]) -> str:
    return ",".join(list(schema) + ["label", "origin", "date", "lat", "lon", "split"])


def write_dataset(path, ds: LabeledDataset, provenance: str | None = None):
    lines = []
    if provenance:
        lines.append(provenance)
    lines.append(dataset_header(ds.schema))
    for i in range(len(ds)):
        feats = ",".join(repr(v) for v in ds.X[i])
        label = "presence" if ds.labels[i] else "absence"
        loc = ds.locations[i]
        lines.append(
            f"{feats},{label},{ds.origins[i]},{ds.dates[i].isoformat()},{loc.lat!r},{loc.lon!r},{ds.splits[i]}"
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def read_dataset(path) -> LabeledDataset:
    rows = list(_open_rows(path))
    if not rows:
        raise ParseError(f"{path}: empty dataset file")
    lineno, header = rows[0]
    cols = header.split(",")
    if cols[-6:] != ["label", "origin", "date", "lat", "lon", "split"]:
        raise ParseError("dataset header must end with label,origin,date,lat,lon,split", lineno)
    schema = tuple(cols[:-6])
    X, labels, origins, dates, locations, splits = [], [], [], [], [], []
    p = len(schema)
    for lineno, line in rows[1:]:
        parts = line.split(",")
        if len(parts) != p + 6:
            raise ParseError(f"expected {p + 6} fields, got {len(parts)}", lineno)
        try:
            X.append([float(v) for v in parts[:p]])
        except ValueError as e:
            raise ParseError(f"bad feature value: {e}", lineno) from None
        if parts[p] not in LABELS:
            raise ParseError(f"bad label '{parts[p]}'", lineno)
        labels.append(parts[p] == "presence")
        origins.append(parts[p + 1])
        dates.append(_parse_date(parts[p + 2], lineno))
        locations.append(_parse_latlon(parts[p + 3], parts[p + 4], lineno))
        splits.append(parts[p + 5])
    return LabeledDataset(
        schema, np.array(X).reshape(len(labels), p), np.array(labels, dtype=bool),
        origins, dates, locations, splits,
    )


def _atomic_write(path, text):
    """Write via temp file + rename so readers never see partial output.

    `text` is either a complete string or an iterable of lines (without
    trailing newlines), which is streamed to keep memory flat.
    """
    import os
    import tempfile

    path = str(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            if isinstance(text, str):
                fh.write(text)
            else:
                for line in text:
                    fh.write(line)
                    fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
