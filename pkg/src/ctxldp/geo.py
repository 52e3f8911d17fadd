"""Check-in ingestion and geographic gridding.

Loads tab-separated check-in records (user, timestamp, latitude,
longitude, location id), snaps coordinates to a fixed-resolution grid
over a bounding box, builds the empirical cell distribution, and cuts the
grid into latitude/longitude band blocks for block-structured privacy.

Cells are half-open squares [a, a + cell) indexed row-major (latitude
band first); empty cells stay in the domain so the channel dimensions
depend only on the grid, never on the data.  West longitudes are negative
degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Distribution, Partition

__all__ = [
    "CheckinRecord",
    "Grid",
    "GriddedData",
    "load_checkins",
    "grid_empirical",
    "geo_partition",
    "write_synthetic_checkins",
    "DEFAULT_BBOX",
]

# Continental-US style default: 25N..50N, 130W..60W.
DEFAULT_BBOX = (25.0, 50.0, -130.0, -60.0)


@dataclass(frozen=True)
class CheckinRecord:
    user: str
    timestamp: str
    lat: float
    lon: float
    location_id: str


@dataclass(frozen=True)
class Grid:
    """Uniform lat/lon grid over a bounding box.

    ``k = n_lat * n_lon`` counts every cell in the box, occupied or not.
    The default paper-scale grid (0.2 degree cells over the default box)
    has 125 x 350 = 43,750 cells.
    """

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    cell: float

    def __post_init__(self):
        if not self.cell > 0:
            raise ValueError("cell size must be positive")
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ValueError("bounding box is degenerate")

    @property
    def n_lat(self) -> int:
        return max(1, round((self.lat_max - self.lat_min) / self.cell))

    @property
    def n_lon(self) -> int:
        return max(1, round((self.lon_max - self.lon_min) / self.cell))

    @property
    def k(self) -> int:
        return self.n_lat * self.n_lon

    def cell_index(self, lat: float, lon: float) -> int | None:
        """Row-major cell id, or None when the point falls outside the box.

        The 1e-9 nudge keeps exact multiples of the cell size (e.g. a
        cell's own corner) on their boundary row instead of one below.
        """
        if not (self.lat_min <= lat < self.lat_max and self.lon_min <= lon < self.lon_max):
            return None
        row = min(int(math.floor((lat - self.lat_min) / self.cell + 1e-9)), self.n_lat - 1)
        col = min(int(math.floor((lon - self.lon_min) / self.cell + 1e-9)), self.n_lon - 1)
        return row * self.n_lon + col

    def cell_corner(self, index: int) -> tuple[float, float]:
        """South-west corner of a cell; snapping the corner returns the cell."""
        row, col = divmod(index, self.n_lon)
        return self.lat_min + row * self.cell, self.lon_min + col * self.cell

    def to_dict(self) -> dict:
        return {
            "bbox": [self.lat_min, self.lat_max, self.lon_min, self.lon_max],
            "cell": self.cell,
            "n_lat": self.n_lat,
            "n_lon": self.n_lon,
            "k": self.k,
        }


def load_checkins(path) -> tuple[list[CheckinRecord], int]:
    """Parse a 5-column TSV of check-ins; returns (records, skipped count).

    Malformed lines (wrong column count, non-numeric or out-of-range
    coordinates) are skipped and counted; more than 1% malformed aborts.
    """
    records: list[CheckinRecord] = []
    skipped = 0
    total = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            total += 1
            parts = line.split("\t")
            if len(parts) != 5:
                skipped += 1
                continue
            try:
                lat = float(parts[2])
                lon = float(parts[3])
            except ValueError:
                skipped += 1
                continue
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                skipped += 1
                continue
            records.append(CheckinRecord(parts[0], parts[1], lat, lon, parts[4]))
    if total > 0 and skipped > 0.01 * total:
        raise ValueError(f"{skipped} of {total} lines malformed (> 1%); refusing to continue")
    return records, skipped


@dataclass(frozen=True)
class GriddedData:
    distribution: Distribution
    occupancy: dict[int, int]  # nonzero cells only
    kept: int
    dropped: int


def grid_empirical(records, grid: Grid) -> GriddedData:
    """Snap records to cells and normalize counts over the full grid."""
    counts = np.zeros(grid.k)
    dropped = 0
    occupancy: dict[int, int] = {}
    for rec in records:
        idx = grid.cell_index(rec.lat, rec.lon)
        if idx is None:
            dropped += 1
            continue
        counts[idx] += 1.0
        occupancy[idx] = occupancy.get(idx, 0) + 1
    kept = int(counts.sum())
    if kept == 0:
        raise ValueError("no records fall inside the bounding box")
    return GriddedData(
        distribution=Distribution(counts / kept),
        occupancy=occupancy,
        kept=kept,
        dropped=dropped,
    )


def geo_partition(grid: Grid, m1: int, m2: int) -> Partition:
    """Blocks = m1 latitude bands x m2 longitude bands of whole cells.

    Bands hold n // m rows (columns) each, with remainder rows in the last
    band.  Block sizes feed the sum-of-squares term of the error bound.
    """
    if m1 < 1 or m2 < 1:
        raise ValueError("band counts must be >= 1")
    if m1 > grid.n_lat or m2 > grid.n_lon:
        raise ValueError("more bands than grid rows/columns")
    lat_base = grid.n_lat // m1
    lon_base = grid.n_lon // m2
    rows = np.minimum(np.arange(grid.n_lat) // lat_base, m1 - 1)
    cols = np.minimum(np.arange(grid.n_lon) // lon_base, m2 - 1)
    block = rows[:, None] * m2 + cols[None, :]
    return Partition(block.reshape(-1))


def write_synthetic_checkins(path, n: int = 10_000, seed: int = 20100724) -> None:
    """Fabricate a deterministic check-in corpus in the default box.

    Records cluster around a handful of synthetic population centers with
    a small uniform background, mimicking the shape (not the content) of
    real location data.  Intended for tests and demos only.
    """
    rng = np.random.default_rng(seed)
    centers = [
        # (lat, lon, spread_deg, weight)
        (40.7, -74.0, 0.6, 0.16),
        (34.1, -118.2, 0.7, 0.13),
        (41.9, -87.6, 0.5, 0.10),
        (29.8, -95.4, 0.6, 0.08),
        (33.4, -112.1, 0.5, 0.06),
        (39.9, -75.2, 0.4, 0.06),
        (29.4, -98.5, 0.5, 0.05),
        (32.7, -117.2, 0.4, 0.05),
        (32.8, -96.8, 0.5, 0.05),
        (37.3, -121.9, 0.5, 0.05),
        (30.3, -81.7, 0.4, 0.04),
        (47.6, -122.3, 0.5, 0.04),
        (39.7, -104.9, 0.5, 0.04),
        (38.9, -77.0, 0.4, 0.04),
    ]
    weights = np.array([c[3] for c in centers])
    background = 1.0 - weights.sum()
    probs = np.concatenate([weights, [background]])
    lat_min, lat_max, lon_min, lon_max = DEFAULT_BBOX
    which = rng.choice(len(centers) + 1, size=n, p=probs)
    lats = np.empty(n)
    lons = np.empty(n)
    for i, c in enumerate(centers):
        mask = which == i
        cnt = int(mask.sum())
        lats[mask] = np.clip(rng.normal(c[0], c[2], cnt), lat_min, lat_max - 1e-6)
        lons[mask] = np.clip(rng.normal(c[1], c[2] * 1.4, cnt), lon_min, lon_max - 1e-6)
    mask = which == len(centers)
    cnt = int(mask.sum())
    lats[mask] = rng.uniform(lat_min, lat_max, cnt)
    lons[mask] = rng.uniform(lon_min, lon_max, cnt)
    day0 = 1262304000  # 2010-01-01T00:00:00Z
    stamps = day0 + rng.integers(0, 365 * 24 * 3600, size=n)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(n):
            ts = stamps[i]
            days, rem = divmod(int(ts - day0), 24 * 3600)
            hh, rem = divmod(rem, 3600)
            mm, ss = divmod(rem, 60)
            month = 1 + days // 31
            dom = 1 + days % 28
            fh.write(
                f"u{int(rng.integers(0, 2000)):05d}\t2010-{month:02d}-{dom:02d}T{hh:02d}:{mm:02d}:{ss:02d}Z\t"
                f"{lats[i]:.6f}\t{lons[i]:.6f}\t{int(rng.integers(0, 500000))}\n"
            )
