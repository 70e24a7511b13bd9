"""Earthquake catalogs, study regions, and space-magnitude binning.

Coordinates are geographic (lon/lat degrees); distances use an
equirectangular approximation in km. Times are decimal days measured from
the start of the study window.
"""

from __future__ import annotations

import datetime as _dt
import io
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

KM_PER_DEG = 111.32


def km_distance(lon1, lat1, lon2, lat2):
    """Planar km distance between points, equirectangular at the pair's mean latitude."""
    lat_mid = np.radians(0.5 * (np.asarray(lat1) + np.asarray(lat2)))
    dx = KM_PER_DEG * np.cos(lat_mid) * (np.asarray(lon2) - np.asarray(lon1))
    dy = KM_PER_DEG * (np.asarray(lat2) - np.asarray(lat1))
    return np.hypot(dx, dy)


@dataclass(frozen=True)
class Event:
    time: float
    lon: float
    lat: float
    mag: float


class Region:
    """Simple polygon study region (lon/lat ring, implicitly closed).

    The boundary counts as inside. Area and projections use an
    equirectangular km plane anchored at the vertex centroid.
    """

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("region needs at least 3 lon/lat vertices")
        if not np.all(np.isfinite(v)):
            raise ValueError("region vertices must be finite")
        if np.array_equal(v[0], v[-1]):
            raise ValueError("region ring must not repeat the first vertex; closure is implicit")
        self.vertices = v
        self.ref_lon = float(v[:, 0].mean())
        self.ref_lat = float(v[:, 1].mean())
        self._cos_ref = math.cos(math.radians(self.ref_lat))
        x, y = self.to_km(v[:, 0], v[:, 1])
        self._ring_km = np.column_stack([x, y])
        area2 = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        self._area_km2 = float(abs(area2)) / 2.0
        if self._area_km2 <= 0:
            raise ValueError("region polygon has zero area")

    @classmethod
    def rectangle(cls, lon_min, lon_max, lat_min, lat_max) -> "Region":
        return cls([(lon_min, lat_min), (lon_max, lat_min), (lon_max, lat_max), (lon_min, lat_max)])

    def to_km(self, lons, lats):
        x = KM_PER_DEG * self._cos_ref * (np.asarray(lons, dtype=float) - self.ref_lon)
        y = KM_PER_DEG * (np.asarray(lats, dtype=float) - self.ref_lat)
        return x, y

    def from_km(self, x, y):
        lons = self.ref_lon + np.asarray(x, dtype=float) / (KM_PER_DEG * self._cos_ref)
        lats = self.ref_lat + np.asarray(y, dtype=float) / KM_PER_DEG
        return lons, lats

    @property
    def area_km2(self) -> float:
        return self._area_km2

    @property
    def ring_km(self) -> np.ndarray:
        return self._ring_km

    @property
    def bbox(self):
        v = self.vertices
        return float(v[:, 0].min()), float(v[:, 0].max()), float(v[:, 1].min()), float(v[:, 1].max())

    def contains(self, lons, lats):
        """Even-odd point-in-polygon test; points on an edge count as inside."""
        px = np.atleast_1d(np.asarray(lons, dtype=float))
        py = np.atleast_1d(np.asarray(lats, dtype=float))
        v = self.vertices
        x1, y1 = v[:, 0], v[:, 1]
        x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
        inside = np.zeros(px.shape, dtype=bool)
        on_edge = np.zeros(px.shape, dtype=bool)
        scale = max(np.abs(v).max(), 1.0)
        tol = 1e-12 * scale * scale
        with np.errstate(divide="ignore", invalid="ignore"):
            for a, b, c, d in zip(x1, y1, x2, y2):
                cross = (c - a) * (py - b) - (d - b) * (px - a)
                within = (px >= min(a, c) - 1e-15) & (px <= max(a, c) + 1e-15) & \
                         (py >= min(b, d) - 1e-15) & (py <= max(b, d) + 1e-15)
                on_edge |= within & (np.abs(cross) <= tol)
                crosses = ((b > py) != (d > py)) & (px < a + (c - a) * (py - b) / (d - b))
                inside ^= crosses
        result = inside | on_edge
        if np.isscalar(lons) or np.asarray(lons).ndim == 0:
            return bool(result[0])
        return result

    def __eq__(self, other):
        return isinstance(other, Region) and np.array_equal(self.vertices, other.vertices)

    def __repr__(self):
        return f"Region({self.vertices.shape[0]} vertices, {self._area_km2:.6g} km^2)"


def parse_region(text: str) -> Region:
    rows = _read_csv_rows(text, ("lon", "lat"), "region")
    return Region([(r[0], r[1]) for r in rows])


def serialize_region(region: Region) -> str:
    out = ["lon,lat"]
    for lon, lat in region.vertices:
        out.append(f"{_fmt(lon)},{_fmt(lat)}")
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class Catalog:
    """Columnar event catalog, sorted by (time, lon, lat, mag), no duplicates.

    times are days in [0, window_days]; m0 is the magnitude floor the
    catalog is declared complete above.
    """

    times: np.ndarray
    lons: np.ndarray
    lats: np.ndarray
    mags: np.ndarray
    window_days: float
    m0: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.lons, dtype=float)
        y = np.asarray(self.lats, dtype=float)
        m = np.asarray(self.mags, dtype=float)
        if not (t.shape == x.shape == y.shape == m.shape) or t.ndim != 1:
            raise ValueError("catalog columns must be 1-d arrays of equal length")
        for name, col in (("time", t), ("lon", x), ("lat", y), ("mag", m)):
            if not np.all(np.isfinite(col)):
                raise ValueError(f"non-finite {name} value in catalog")
        if t.size and (t.min() < 0 or t.max() > self.window_days):
            raise ValueError("event time outside the declared window")
        order = np.lexsort((m, y, x, t))
        t, x, y, m = t[order], x[order], y[order], m[order]
        if t.size > 1:
            same = (np.diff(t) == 0) & (np.diff(x) == 0) & (np.diff(y) == 0) & (np.diff(m) == 0)
            if same.any():
                i = int(np.flatnonzero(same)[0])
                raise ValueError(
                    f"duplicate event (time={t[i]!r}, lon={x[i]!r}, lat={y[i]!r}, mag={m[i]!r})")
        for name, col in (("times", t), ("lons", x), ("lats", y), ("mags", m)):
            col.setflags(write=False)
            object.__setattr__(self, name, col)
        object.__setattr__(self, "window_days", float(self.window_days))
        object.__setattr__(self, "m0", float(self.m0))

    @property
    def n(self) -> int:
        return self.times.size

    def __len__(self) -> int:
        return self.times.size

    def __iter__(self) -> Iterator[Event]:
        for i in range(self.times.size):
            yield Event(float(self.times[i]), float(self.lons[i]),
                        float(self.lats[i]), float(self.mags[i]))

    def __eq__(self, other):
        return (isinstance(other, Catalog)
                and self.window_days == other.window_days
                and self.m0 == other.m0
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.lons, other.lons)
                and np.array_equal(self.lats, other.lats)
                and np.array_equal(self.mags, other.mags))

    def __repr__(self):
        return f"Catalog({self.n} events, window={self.window_days!r} d, m0={self.m0!r})"


def empty_catalog(window_days: float, m0: float = 0.0) -> Catalog:
    z = np.array([], dtype=float)
    return Catalog(z, z, z, z, window_days, m0)


def _fmt(x: float) -> str:
    # repr gives the shortest decimal string that round-trips the double
    return repr(float(x))


def _read_csv_rows(text: str, header: tuple, what: str):
    """Parse a comment-tolerant numeric CSV into float rows."""
    import csv

    lines = []
    for raw in io.StringIO(text):
        s = raw.strip()
        if s and not s.startswith("#"):
            lines.append(s)
    if not lines:
        raise ValueError(f"{what}: empty file")
    reader = csv.reader(lines)
    got = tuple(h.strip() for h in next(reader))
    if got != header:
        raise ValueError(f"{what}: expected header {','.join(header)!r}, got {','.join(got)!r}")
    rows = []
    for i, rec in enumerate(reader, start=1):
        if len(rec) != len(header):
            raise ValueError(f"{what}: row {i}: expected {len(header)} fields, got {len(rec)}")
        try:
            rows.append([float(v) for v in rec])
        except ValueError:
            bad = next(v for v in rec if not _is_float(v))
            raise ValueError(f"{what}: row {i}: malformed value {bad!r}") from None
    if not rows:
        raise ValueError(f"{what}: no data rows")
    return rows


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _parse_iso_days(value: str) -> float:
    ts = _dt.datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=_dt.timezone.utc)
    return ts.timestamp() / 86400.0


def parse_catalog(text: str) -> Catalog:
    """Parse a catalog CSV (header time,lon,lat,mag).

    The time column is either decimal days or ISO-8601 timestamps; the
    format is detected from the first data row and must be consistent
    within the file. ISO times are converted to days since the earliest
    timestamp. Optional comment lines (# window_days = …, # m0 = …) carry
    catalog metadata; without them the window ends at the last event and
    m0 is the smallest magnitude.
    """
    import csv

    meta = {}
    data_lines = []
    header_seen = False
    for raw in io.StringIO(text):
        s = raw.strip()
        if not s:
            continue
        if s.startswith("#"):
            body = s[1:].strip()
            if "=" in body:
                k, _, val = body.partition("=")
                meta[k.strip()] = val.strip()
            continue
        if not header_seen:
            got = tuple(h.strip() for h in next(csv.reader([s])))
            if got != ("time", "lon", "lat", "mag"):
                raise ValueError(f"catalog: expected header 'time,lon,lat,mag', got {','.join(got)!r}")
            header_seen = True
            continue
        data_lines.append(s)
    if not header_seen:
        raise ValueError("catalog: empty file")

    reader = csv.reader(data_lines)
    times, lons, lats, mags = [], [], [], []
    iso_mode = None
    for i, rec in enumerate(reader, start=1):
        if len(rec) != 4:
            raise ValueError(f"catalog: row {i}: expected 4 fields, got {len(rec)}")
        t_raw = rec[0].strip()
        if iso_mode is None:
            iso_mode = not _is_float(t_raw)
        if iso_mode:
            try:
                times.append(_parse_iso_days(t_raw))
            except ValueError:
                raise ValueError(f"catalog: row {i}: malformed ISO-8601 time {t_raw!r}") from None
        else:
            if not _is_float(t_raw):
                raise ValueError(f"catalog: row {i}: malformed time {t_raw!r}")
            times.append(float(t_raw))
        for name, v in (("lon", rec[1]), ("lat", rec[2]), ("mag", rec[3])):
            if not _is_float(v):
                raise ValueError(f"catalog: row {i}: malformed {name} {v.strip()!r}")
        lons.append(float(rec[1]))
        lats.append(float(rec[2]))
        mags.append(float(rec[3]))

    times = np.asarray(times, dtype=float)
    if iso_mode and times.size:
        times = times - times.min()
    if "window_days" in meta:
        window = float(meta["window_days"])
    else:
        window = float(times.max()) if times.size else 0.0
    if "m0" in meta:
        m0 = float(meta["m0"])
    else:
        m0 = float(np.min(mags)) if mags else 0.0
    return Catalog(times, np.asarray(lons), np.asarray(lats), np.asarray(mags), window, m0)


def serialize_catalog(c: Catalog) -> str:
    out = [f"# window_days = {_fmt(c.window_days)}", f"# m0 = {_fmt(c.m0)}", "time,lon,lat,mag"]
    for i in range(c.n):
        out.append(f"{_fmt(c.times[i])},{_fmt(c.lons[i])},{_fmt(c.lats[i])},{_fmt(c.mags[i])}")
    return "\n".join(out) + "\n"


def filter_catalog(c: Catalog, region: Region | None = None, t0: float = 0.0,
                   t1: float | None = None, m_min: float | None = None) -> Catalog:
    """Restrict a catalog to region x [t0, t1) x mag >= m_min.

    Times are re-expressed relative to t0; the polygon boundary counts as
    inside. The result's m0 is m_min when given.
    """
    if t1 is None:
        t1 = c.window_days
    keep = (c.times >= t0) & (c.times < t1)
    if m_min is not None:
        keep &= c.mags >= m_min
    if region is not None and keep.any():
        idx = np.flatnonzero(keep)
        keep[idx] = region.contains(c.lons[idx], c.lats[idx])
    m0 = c.m0 if m_min is None else float(m_min)
    return Catalog(c.times[keep] - t0, c.lons[keep], c.lats[keep], c.mags[keep],
                   float(t1 - t0), m0)


class BinCounts(NamedTuple):
    counts: np.ndarray
    remainder: int


@dataclass(frozen=True)
class BinGrid:
    """Space-magnitude bins: closed boxes (lon, lat, mag), non-overlapping.

    Cells are ordered row-major by (space cell, then magnitude band) when
    built from a regular product; arbitrary (e.g. masked) cell lists are
    allowed as long as the magnitude banding is globally consistent.
    """

    boxes: np.ndarray  # (n_cells, 6): lon_min, lon_max, lat_min, lat_max, mag_min, mag_max

    def __post_init__(self):
        b = np.asarray(self.boxes, dtype=float)
        if b.ndim != 2 or b.shape[1] != 6 or b.shape[0] == 0:
            raise ValueError("grid needs an (n, 6) box array")
        if not np.all(np.isfinite(b)):
            raise ValueError("grid boxes must be finite")
        if np.any(b[:, 0] >= b[:, 1]) or np.any(b[:, 2] >= b[:, 3]) or np.any(b[:, 4] >= b[:, 5]):
            raise ValueError("grid boxes must have positive extent in lon, lat, and mag")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "boxes", b)
        self._check_overlap(b)
        self._check_banding(b)

    @staticmethod
    def _check_overlap(b):
        n = b.shape[0]
        if n > 4000:
            return  # quadratic check too costly; construction paths guarantee disjointness
        lo = b[:, (0, 2, 4)]
        hi = b[:, (1, 3, 5)]
        # open-interval intersection in every dimension means positive shared measure
        inter = (lo[:, None, :] < hi[None, :, :]) & (hi[:, None, :] > lo[None, :, :])
        clash = inter.all(axis=2)
        np.fill_diagonal(clash, False)
        if clash.any():
            i, j = np.argwhere(clash)[0]
            raise ValueError(f"grid cells {i} and {j} overlap")

    @staticmethod
    def _check_banding(b):
        bands = np.unique(b[:, 4:6], axis=0)
        order = np.argsort(bands[:, 0])
        bands = bands[order]
        starts, stops = bands[:, 0], bands[:, 1]
        if np.any(starts[1:] < stops[:-1]):
            raise ValueError("inconsistent magnitude banding: bands overlap")

    @classmethod
    def regular(cls, lon_edges, lat_edges, mag_edges) -> "BinGrid":
        """Full product grid; space cells run lon-fastest, bands innermost."""
        lon_edges = np.asarray(lon_edges, dtype=float)
        lat_edges = np.asarray(lat_edges, dtype=float)
        mag_edges = np.asarray(mag_edges, dtype=float)
        boxes = []
        for iy in range(lat_edges.size - 1):
            for ix in range(lon_edges.size - 1):
                for im in range(mag_edges.size - 1):
                    boxes.append((lon_edges[ix], lon_edges[ix + 1],
                                  lat_edges[iy], lat_edges[iy + 1],
                                  mag_edges[im], mag_edges[im + 1]))
        return cls(np.asarray(boxes))

    @property
    def n_cells(self) -> int:
        return self.boxes.shape[0]

    @property
    def mag_bands(self) -> np.ndarray:
        bands = np.unique(self.boxes[:, 4:6], axis=0)
        return bands[np.argsort(bands[:, 0])]

    @property
    def space_boxes(self) -> np.ndarray:
        """Distinct spatial boxes in first-appearance order."""
        seen = {}
        for row in self.boxes[:, :4]:
            key = tuple(row)
            if key not in seen:
                seen[key] = len(seen)
        out = np.empty((len(seen), 4))
        for key, i in seen.items():
            out[i] = key
        return out

    @property
    def mag_min(self) -> float:
        return float(self.boxes[:, 4].min())

    def space_index(self) -> np.ndarray:
        """Index of each cell's spatial box within space_boxes."""
        keys = {tuple(row): i for i, row in enumerate(self.space_boxes)}
        return np.array([keys[tuple(row)] for row in self.boxes[:, :4]], dtype=int)

    def band_index(self) -> np.ndarray:
        bands = {tuple(row): i for i, row in enumerate(self.mag_bands)}
        return np.array([bands[tuple(row)] for row in self.boxes[:, 4:6]], dtype=int)

    def cell_area_km2(self) -> np.ndarray:
        b = self.boxes
        lat_mid = np.radians(0.5 * (b[:, 2] + b[:, 3]))
        return (KM_PER_DEG * np.cos(lat_mid) * (b[:, 1] - b[:, 0])) * (KM_PER_DEG * (b[:, 3] - b[:, 2]))

    def __eq__(self, other):
        return isinstance(other, BinGrid) and np.array_equal(self.boxes, other.boxes)


def bin_counts(c: Catalog, g: BinGrid) -> BinCounts:
    """Count events per grid cell.

    Boxes are closed on every face; an event on a shared boundary goes to
    the lowest-index cell containing it. Events in no cell land in the
    remainder count.
    """
    if c.n == 0:
        return BinCounts(np.zeros(g.n_cells, dtype=int), 0)
    b = g.boxes
    x, y, m = c.lons, c.lats, c.mags
    inside = (
        (x >= b[:, 0:1]) & (x <= b[:, 1:2])
        & (y >= b[:, 2:3]) & (y <= b[:, 3:4])
        & (m >= b[:, 4:5]) & (m <= b[:, 5:6])
    )
    hit = inside.any(axis=0)
    first = inside.argmax(axis=0)
    counts = np.bincount(first[hit], minlength=g.n_cells).astype(int)
    return BinCounts(counts, int((~hit).sum()))


@dataclass(frozen=True)
class RegionLattice:
    """Midpoint evaluation lattice over a region's bounding box.

    Flattened cell centers with an inside-region mask and per-cell km^2
    areas (latitude-dependent). Shared by quadrature, extrema scans, and
    the error diagram.
    """

    lons: np.ndarray
    lats: np.ndarray
    inside: np.ndarray
    cell_km2: np.ndarray
    nx: int
    ny: int

    @property
    def area_km2(self) -> float:
        return float(self.cell_km2[self.inside].sum())


def region_lattice(region: Region, n: int = 200, nx: int | None = None,
                   ny: int | None = None) -> RegionLattice:
    nx = nx or n
    ny = ny or n
    lon_min, lon_max, lat_min, lat_max = region.bbox
    dlon = (lon_max - lon_min) / nx
    dlat = (lat_max - lat_min) / ny
    cx = lon_min + dlon * (np.arange(nx) + 0.5)
    cy = lat_min + dlat * (np.arange(ny) + 0.5)
    gx, gy = np.meshgrid(cx, cy)
    lons = gx.ravel()
    lats = gy.ravel()
    inside = region.contains(lons, lats)
    cell = (KM_PER_DEG * np.cos(np.radians(lats)) * dlon) * (KM_PER_DEG * dlat)
    return RegionLattice(lons, lats, inside, cell, nx, ny)
