"""Synthetic virtual-species worlds with a known suitability function.

The generator fills a raster stack with smooth seeded random fields,
defines true suitability as a sigmoid of a weighted sum of the assembled
(standardized) features plus frozen noise, samples presence points
proportionally to suitability, and exposes the true label for every
valid (cell, date) pair.  Because ground truth is known, pipelines can
be scored against it instead of against irreproducible survey data.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .dataset import (
    HISTORY_DAYS,
    N_BUCKETS,
    BUCKET_DAYS,
    STATIC_VARIABLES,
    TEMPORAL_VARIABLES,
    Featurizer,
    Observation,
    StaticRaster,
    TemporalRaster,
)
from .errors import ConfigError, CoverageError
from .geo import GeoPoint, build_grid


@dataclass
class SynthWorldConfig:
    bbox: tuple[float, float, float, float] = (0.0, 10.0, 0.0, 10.0)
    resolution: float = 0.25
    n_temporal: int = 12
    n_static: int = 6
    weights: np.ndarray | None = None   # None -> seeded sparse default
    presence_count: int = 100
    noise_level: float = 0.5
    seed: int = 0
    start_date: dt.date = dt.date(2014, 7, 1)
    n_days: int = 280

    def variable_names(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        """Real variable names when counts match the production layout."""
        if self.n_temporal == len(TEMPORAL_VARIABLES):
            temporal = TEMPORAL_VARIABLES
        else:
            temporal = tuple(f"tvar{i:02d}_inst" for i in range(1, self.n_temporal + 1))
        if self.n_static == len(STATIC_VARIABLES):
            static = STATIC_VARIABLES
        else:
            static = tuple(f"svar{i:02d}_mean" for i in range(1, self.n_static + 1))
        return temporal, static


@dataclass
class SynthWorld:
    config: SynthWorldConfig
    grid: object
    temporal: list[TemporalRaster]
    static: list[StaticRaster]
    presences: list[Observation]
    featurizer: Featurizer
    weights: np.ndarray                  # effective weight vector, one per feature
    margins: np.ndarray                  # (n_valid_dates, n_cells) true log-odds
    valid_dates: list[dt.date] = field(repr=False, default_factory=list)

    def _date_index(self, date: dt.date) -> int:
        i = (date - self.valid_dates[0]).days
        if not (0 <= i < len(self.valid_dates)):
            raise CoverageError(
                f"date {date} outside oracle range {self.valid_dates[0]}..{self.valid_dates[-1]}"
            )
        return i

    def true_label(self, location: GeoPoint, date: dt.date) -> bool:
        """True presence/absence at a point and date (suitability >= 0.5)."""
        cell = self.grid.cell_index(location)
        return bool(self.margins[self._date_index(date), cell] >= 0.0)

    def oracle_labels(self, cell_ids: np.ndarray, dates) -> np.ndarray:
        idx = np.array([self._date_index(d) for d in dates])
        return self.margins[idx, np.asarray(cell_ids, dtype=int)] >= 0.0

    def suitability(self, cell_ids: np.ndarray, dates) -> np.ndarray:
        idx = np.array([self._date_index(d) for d in dates])
        m = self.margins[idx, np.asarray(cell_ids, dtype=int)]
        return 1.0 / (1.0 + np.exp(-m))


def _smooth_field(rng: np.random.Generator, latn, lonn, dayn=None) -> np.ndarray:
    """Sum of a few random low-frequency waves plus a little white noise."""
    shape = latn.shape if dayn is None else np.broadcast_shapes(dayn.shape, latn.shape)
    out = np.zeros(shape)
    for _ in range(4):
        amp = rng.uniform(0.3, 1.0)
        p, q = rng.uniform(0.5, 3.0, size=2)
        phase = rng.uniform(0.0, 2 * np.pi)
        wave = 2 * np.pi * (p * latn + q * lonn) + phase
        if dayn is not None:
            wave = wave + 2 * np.pi * rng.uniform(1.0, 5.0) * dayn
        out = out + amp * np.sin(wave)
    out += 0.05 * rng.standard_normal(shape)
    scale = rng.uniform(0.5, 3.0)
    offset = rng.uniform(-2.0, 2.0)
    return offset + scale * out


def _default_weights(rng: np.random.Generator, schema_len: int, n_temporal: int) -> np.ndarray:
    """Sparse weights: a few strong late-bucket temporal terms plus one static."""
    w = np.zeros(schema_len)
    n_tf = n_temporal * N_BUCKETS
    picks = rng.choice(n_temporal, size=min(4, n_temporal), replace=False)
    for v in picks:
        bucket = int(rng.integers(9, N_BUCKETS))  # lean on recent history
        w[v * N_BUCKETS + bucket] = rng.choice([-2.0, 2.0]) * rng.uniform(0.8, 1.2)
    if schema_len > n_tf:
        w[n_tf + int(rng.integers(0, schema_len - n_tf))] = rng.choice([-1.0, 1.0])
    return w


def synth_generate(config: SynthWorldConfig) -> SynthWorld:
    """Build a seeded world: rasters, presences and the true-label oracle."""
    if config.presence_count < 1:
        raise ConfigError("presence_count must be >= 1")
    if config.n_temporal < 1 or config.n_static < 0:
        raise ConfigError("need at least one temporal variable and non-negative static count")
    if config.n_days < HISTORY_DAYS + 1:
        raise ConfigError(f"n_days must exceed the {HISTORY_DAYS}-day history")
    grid = build_grid(config.bbox, config.resolution)
    temporal_names, static_names = config.variable_names()

    rng = np.random.default_rng(config.seed)
    latn = ((grid.center_lats - grid.lat_min) / (grid.lat_max - grid.lat_min))[None, :]
    lonn = ((grid.center_lons - grid.lon_min) / (grid.lon_max - grid.lon_min))[None, :]
    dayn = (np.arange(config.n_days) / config.n_days)[:, None]

    temporal = [
        TemporalRaster(name, grid, config.start_date, _smooth_field(rng, latn, lonn, dayn))
        for name in temporal_names
    ]
    static = [
        StaticRaster(name, grid, _smooth_field(rng, latn, lonn)[0]) for name in static_names
    ]
    fz = Featurizer(temporal, static)

    p = fz.n_features
    if config.weights is None:
        weights = _default_weights(rng, p, config.n_temporal)
    else:
        weights = np.asarray(config.weights, dtype=float)
        if weights.shape != (p,):
            raise ConfigError(f"weight vector length {weights.shape} != feature count {p}")

    first_valid = HISTORY_DAYS - 1
    n_valid = config.n_days - first_valid
    valid_dates = [config.start_date + dt.timedelta(days=first_valid + i) for i in range(n_valid)]

    # accumulate the margin feature-by-feature so the full (rows x 174)
    # design matrix is never materialized; standardization uses the
    # feature's distribution over every valid (date, cell) pair
    det = np.zeros((n_valid, grid.n_cells))
    t_idx = np.arange(first_valid, config.n_days)
    for j in np.flatnonzero(weights):
        v, b = divmod(int(j), N_BUCKETS)
        if v < config.n_temporal:
            cs = fz._cumsums[v]
            lo = t_idx - (HISTORY_DAYS - 1) + BUCKET_DAYS * b
            col = (cs[lo + BUCKET_DAYS, :] - cs[lo, :]) / BUCKET_DAYS
        else:
            s = int(j) - config.n_temporal * N_BUCKETS
            col = np.broadcast_to(fz._static[s], (n_valid, grid.n_cells))
        mu, sd = col.mean(), col.std()
        det += weights[j] * (col - mu) / (sd if sd > 0 else 1.0)
    if det.any():
        det -= det.mean()
    margins = det + config.noise_level * rng.standard_normal(det.shape)

    s = 1.0 / (1.0 + np.exp(-margins))
    flat = s.ravel()
    if config.presence_count > flat.size:
        raise ConfigError(
            f"presence_count {config.presence_count} exceeds {flat.size} valid (date, cell) pairs"
        )
    picks = rng.choice(flat.size, size=config.presence_count, replace=False, p=flat / flat.sum())
    picks.sort()
    presences = []
    for i, k in enumerate(picks):
        d_i, cell = divmod(int(k), grid.n_cells)
        presences.append(
            Observation(i, grid.cell_center(cell), valid_dates[d_i], presence=True)
        )

    return SynthWorld(
        config=config,
        grid=grid,
        temporal=temporal,
        static=static,
        presences=presences,
        featurizer=fz,
        weights=weights,
        margins=margins,
        valid_dates=valid_dates,
    )
