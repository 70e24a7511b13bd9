"""Residual analysis for fitted point-process models.

Point residuals (thinning, superposition, super-thinning, rescaled times)
transform the observed catalog so that, under the fitted model being
correct, the output is homogeneous Poisson (or unit-rate exponential for
rescaled inter-event times). Cell residuals (raw/Pearson pixels, deviance,
Voronoi) compare observed and integrated-expected counts per region cell.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from .catalog import (BinGrid, Catalog, KM_PER_DEG, Region, bin_counts,
                      region_lattice)
from .forecast import GriddedForecast, poisson_log_pmf
from .rng import RngStream
from .simulate import simulate_homogeneous, simulate_inhomogeneous

# --- shared evaluation helpers -------------------------------------------


def _rate_at(model, lons, lats, times):
    if getattr(model, "time_dependent", False):
        return model.rate_at(lons, lats, times)
    return model.rate_at(lons, lats)


def lattice_extrema(model, region: Region, t_max: float | None = None,
                    n_space: int = 200, n_time: int = 100):
    """(inf, sup) of the model rate over an n_space^2 lattice inside the
    region, crossed with n_time midpoint time slices when time-dependent."""
    lat = region_lattice(region, n_space)
    lons = lat.lons[lat.inside]
    lats = lat.lats[lat.inside]
    if getattr(model, "time_dependent", False):
        if t_max is None:
            raise ValueError("time-dependent extrema need t_max")
        lo, hi = math.inf, -math.inf
        for j in range(n_time):
            t = (j + 0.5) * t_max / n_time
            vals = model.rate_at(lons, lats, np.full(lons.shape, t))
            lo = min(lo, float(vals.min()))
            hi = max(hi, float(vals.max()))
        return lo, hi
    vals = model.rate_at(lons, lats)
    return float(vals.min()), float(vals.max())


class _Deficit:
    """max(0, level - model rate); the superposition target."""

    def __init__(self, model, level: float):
        self.model = model
        self.level = float(level)
        self.time_dependent = getattr(model, "time_dependent", False)

    def rate_at(self, lons, lats, times=None):
        base = _rate_at(self.model, lons, lats, times)
        return np.maximum(0.0, self.level - base)


# --- point residuals ------------------------------------------------------


@dataclass(frozen=True)
class ResidualPointSet:
    """Residual point pattern with provenance tags.

    tags hold "retained" for surviving observed events and "superposed" for
    simulated fill-in points; nominal_rate is the homogeneous rate the
    pattern should follow when the model is right.
    """

    times: np.ndarray
    lons: np.ndarray
    lats: np.ndarray
    tags: np.ndarray
    nominal_rate: float
    region: Region
    window_days: float
    note: str = ""

    @property
    def n(self) -> int:
        return self.times.size

    def retained_mask(self) -> np.ndarray:
        return self.tags == "retained"


def _order(times, lons, lats, tags):
    idx = np.lexsort((tags, lats, lons, times))
    return times[idx], lons[idx], lats[idx], tags[idx]


def thin_residuals(c: Catalog, model, region: Region, rng: RngStream,
                   n_space: int = 200, n_time: int = 100) -> ResidualPointSet:
    """Keep each event with probability b / rate(event), b = lattice infimum.

    A correct model leaves a homogeneous Poisson pattern of rate b. If the
    event's rate falls below b (off-lattice minimum), the keep probability
    clamps at 1. b = 0 degenerates to an empty pattern, reported in note.
    """
    b, _ = lattice_extrema(model, region, c.window_days, n_space, n_time)
    if b <= 0:
        empty = np.array([])
        return ResidualPointSet(empty, empty, empty, empty.astype(str), 0.0,
                                region, c.window_days,
                                note="degenerate: lattice infimum is 0")
    lam = _rate_at(model, c.lons, c.lats, c.times)
    with np.errstate(divide="ignore"):
        probs = np.minimum(1.0, b / lam)
    gen = rng.generator()
    keep = gen.uniform(size=c.n) < probs
    tags = np.full(int(keep.sum()), "retained")
    t, x, y, g = _order(c.times[keep], c.lons[keep], c.lats[keep], tags)
    return ResidualPointSet(t, x, y, g, b, region, c.window_days)


def superpose_residuals(c: Catalog, model, region: Region, rng: RngStream,
                        n_space: int = 200, n_time: int = 100) -> ResidualPointSet:
    """Fill the pattern up to the lattice supremum C with simulated points
    at rate C - rate; observed plus simulated is Poisson(C) under a correct
    model."""
    _, sup = lattice_extrema(model, region, c.window_days, n_space, n_time)
    sim = simulate_inhomogeneous(_Deficit(model, sup), sup, region,
                                 c.window_days, rng)
    times = np.concatenate([c.times, sim.times])
    lons = np.concatenate([c.lons, sim.lons])
    lats = np.concatenate([c.lats, sim.lats])
    tags = np.concatenate([np.full(c.n, "retained"), np.full(sim.n, "superposed")])
    t, x, y, g = _order(times, lons, lats, tags)
    return ResidualPointSet(t, x, y, g, sup, region, c.window_days)


def super_thin(c: Catalog, model, k: float, region: Region,
               rng: RngStream) -> ResidualPointSet:
    """Thin where the rate exceeds k (keep probability k/rate) and superpose
    simulated points at rate max(0, k - rate) where it falls short; the
    result is Poisson(k) under a correct model."""
    if k <= 0:
        raise ValueError("super-thinning level k must be positive")
    lam = _rate_at(model, c.lons, c.lats, c.times)
    gen = rng.substream(0).generator()
    with np.errstate(divide="ignore"):
        keep = gen.uniform(size=c.n) < np.minimum(1.0, k / lam)
    sim = simulate_inhomogeneous(_Deficit(model, k), k, region,
                                 c.window_days, rng.substream(1))
    times = np.concatenate([c.times[keep], sim.times])
    lons = np.concatenate([c.lons[keep], sim.lons])
    lats = np.concatenate([c.lats[keep], sim.lats])
    tags = np.concatenate([np.full(int(keep.sum()), "retained"),
                           np.full(sim.n, "superposed")])
    t, x, y, g = _order(times, lons, lats, tags)
    return ResidualPointSet(t, x, y, g, k, region, c.window_days)


class RescaledTimes(NamedTuple):
    taus: np.ndarray
    total_mass: float


def rescale_times(c: Catalog, rate_fn, n_grid: int = 20001) -> RescaledTimes:
    """Map each event time through the cumulative temporal rate.

    rate_fn is a vectorized rate-per-day callable (or a constant); under a
    correct model the transformed times are a unit-rate Poisson process on
    [0, total_mass]. Integration is trapezoidal on an n_grid time lattice.
    """
    if not callable(rate_fn):
        level = float(rate_fn)
        rate_fn = lambda t: np.full(np.shape(t), level)
    ts = np.linspace(0.0, c.window_days, n_grid)
    vals = np.asarray(rate_fn(ts), dtype=float)
    if vals.shape != ts.shape:
        raise ValueError("rate_fn must return one rate per time")
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValueError("temporal rate must be finite and non-negative")
    dt = ts[1] - ts[0]
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * dt)])
    taus = np.interp(c.times, ts, cum)
    return RescaledTimes(taus, float(cum[-1]))


# --- cell residuals -------------------------------------------------------


@dataclass(frozen=True)
class CellResidualSet:
    """Per-cell residual values with geometry for rendering.

    flags mark cells where the residual is undefined (zero or non-finite
    integrated expectation); expected and counts ride along for reporting.
    """

    kind: str
    values: np.ndarray
    flags: np.ndarray
    cell_polys: list
    expected: np.ndarray
    counts: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.values.size


def _box_ring(box) -> np.ndarray:
    lo_x, hi_x, lo_y, hi_y = box[:4]
    return np.array([[lo_x, lo_y], [hi_x, lo_y], [hi_x, hi_y], [lo_x, hi_y]])


def _model_cell_expectations(model, grid: BinGrid, window_days: float,
                             region: Region | None, n_sub: int,
                             n_time: int) -> np.ndarray:
    if grid.mag_bands.shape[0] != 1:
        raise ValueError("model-based cell expectations need a single-band grid")
    u = (np.arange(n_sub) + 0.5) / n_sub
    out = np.empty(grid.n_cells)
    time_dep = getattr(model, "time_dependent", False)
    for i, box in enumerate(grid.boxes):
        gx, gy = np.meshgrid(box[0] + u * (box[1] - box[0]),
                             box[2] + u * (box[3] - box[2]))
        lons, lats = gx.ravel(), gy.ravel()
        da = (KM_PER_DEG * np.cos(np.radians(lats)) * (box[1] - box[0]) / n_sub) * \
             (KM_PER_DEG * (box[3] - box[2]) / n_sub)
        if region is not None:
            da = np.where(region.contains(lons, lats), da, 0.0)
        if time_dep:
            acc = 0.0
            for j in range(n_time):
                t = (j + 0.5) * window_days / n_time
                vals = model.rate_at(lons, lats, np.full(lons.shape, t))
                acc += float(np.sum(vals * da))
            out[i] = acc * (window_days / n_time)
        else:
            vals = model.rate_at(lons, lats)
            out[i] = float(np.sum(vals * da)) * window_days
    return out


def pixel_residuals(model_or_forecast, c: Catalog, grid: BinGrid,
                    region: Region | None = None, n_sub: int = 8,
                    n_time: int = 20):
    """Raw (count - expectation) and Pearson (raw / sqrt expectation) cell
    residuals. Returns (raw, pearson) CellResidualSets; zero-expectation
    cells are flagged and their Pearson value is NaN."""
    counts = bin_counts(c, grid).counts
    if isinstance(model_or_forecast, GriddedForecast):
        f = model_or_forecast
        if f.grid != grid:
            raise ValueError("forecast grid does not match the requested grid")
        expected = f.rates.copy()
    else:
        expected = _model_cell_expectations(model_or_forecast, grid,
                                            c.window_days, region, n_sub, n_time)
    raw = counts - expected
    flags = expected <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        pearson = np.where(flags, np.nan, raw / np.sqrt(expected))
    polys = [_box_ring(b) for b in grid.boxes]
    return (
        CellResidualSet("raw", raw.astype(float), flags, polys, expected, counts),
        CellResidualSet("pearson", pearson, flags, polys, expected, counts),
    )


def deviance_residuals(fa: GriddedForecast, fb: GriddedForecast,
                       c: Catalog) -> CellResidualSet:
    """Per-cell log-likelihood difference (first minus second forecast).

    The factorial terms cancel cell-by-cell, so the values sum exactly to
    the joint log-likelihood difference; cells where either forecast gives
    a non-finite term are flagged.
    """
    if fa.grid != fb.grid:
        raise ValueError("deviance residuals need both forecasts on the same grid")
    counts = bin_counts(c, fa.grid).counts
    values = poisson_log_pmf(counts, fa.rates) - poisson_log_pmf(counts, fb.rates)
    flags = ~np.isfinite(values)
    polys = [_box_ring(b) for b in fa.grid.boxes]
    return CellResidualSet("deviance", values, flags, polys,
                           fa.rates - fb.rates, counts)


def cell_residuals_to_csv(rs: CellResidualSet) -> str:
    out = ["cell_id,kind,value,flag"]
    for i in range(rs.n_cells):
        v = repr(float(rs.values[i]))
        out.append(f"{i},{rs.kind},{v},{int(bool(rs.flags[i]))}")
    return "\n".join(out) + "\n"


def cell_residuals_to_geojson(rs: CellResidualSet) -> str:
    feats = []
    for i in range(rs.n_cells):
        ring = rs.cell_polys[i]
        coords = [[float(x), float(y)] for x, y in ring]
        if coords:
            coords.append(coords[0])
        feats.append({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [coords]},
            "properties": {
                "cell_id": i,
                "kind": rs.kind,
                "value": None if not math.isfinite(float(rs.values[i]))
                         else float(rs.values[i]),
                "flag": bool(rs.flags[i]),
            },
        })
    doc = {"type": "FeatureCollection", "features": feats}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


# --- Voronoi --------------------------------------------------------------


def _clip_halfplane(poly: np.ndarray, normal: np.ndarray, offset: float,
                    keep_le: bool) -> np.ndarray:
    """Sutherland-Hodgman clip of a polygon against n.x <= c (or >= c)."""
    if poly.shape[0] == 0:
        return poly
    d = poly @ normal - offset
    inside = d <= 0 if keep_le else d >= 0
    m = poly.shape[0]
    out = []
    for i in range(m):
        j = (i + 1) % m
        if inside[i]:
            out.append(poly[i])
        if inside[i] != inside[j]:
            t = d[i] / (d[i] - d[j])
            out.append(poly[i] + t * (poly[j] - poly[i]))
    return np.asarray(out) if out else np.empty((0, 2))


def _poly_area(poly: np.ndarray) -> float:
    if poly.shape[0] < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return abs(float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))) / 2.0


@dataclass(frozen=True)
class VoronoiTessellation:
    gen_lons: np.ndarray
    gen_lats: np.ndarray
    polys_km: list
    areas_km2: np.ndarray
    region: Region

    @property
    def n_cells(self) -> int:
        return self.gen_lons.size

    def polys_lonlat(self) -> list:
        out = []
        for poly in self.polys_km:
            if poly.shape[0] == 0:
                out.append(poly)
                continue
            lons, lats = self.region.from_km(poly[:, 0], poly[:, 1])
            out.append(np.column_stack([lons, lats]))
        return out

    @property
    def partition_defect(self) -> float:
        return abs(float(self.areas_km2.sum()) - self.region.area_km2) \
            / self.region.area_km2


def voronoi_tessellation(lons, lats, region: Region,
                         perturb: float = 1e-9,
                         dedup_cap: int = 1000) -> VoronoiTessellation:
    """Region-clipped planar Voronoi diagram of the generators.

    Each cell is the region polygon cut by the perpendicular bisector
    half-plane against every other generator in the km projection; bisector
    lines are computed once per index pair so shared edges agree to float
    precision and the cells partition the region. Exactly coincident
    generators are separated by deterministic 1e-9-degree nudges.
    """
    lons = np.atleast_1d(np.asarray(lons, dtype=float)).copy()
    lats = np.atleast_1d(np.asarray(lats, dtype=float)).copy()
    if lons.size == 0:
        raise ValueError("tessellation needs at least one generator")
    seen: dict = {}
    for i in range(lons.size):
        key = (lons[i], lats[i])
        k = seen.get(key, 0)
        if k:
            if k >= dedup_cap:
                raise ValueError(f"more than {dedup_cap} coincident generators")
            lons[i] += perturb * k
            lats[i] += perturb * k
        seen[key] = k + 1

    px, py = region.to_km(lons, lats)
    pts = np.column_stack([px, py])
    n = pts.shape[0]
    ring = region.ring_km
    polys = []
    for i in range(n):
        poly = ring
        d2 = np.sum((pts - pts[i]) ** 2, axis=1)
        order = np.argsort(d2, kind="stable")
        for j in order:
            if j == i or poly.shape[0] == 0:
                continue
            half_dist = 0.5 * math.sqrt(d2[j])
            reach = np.sqrt(np.max(np.sum((poly - pts[i]) ** 2, axis=1))) \
                if poly.shape[0] else 0.0
            if half_dist > reach:
                break  # remaining generators are farther; bisectors cannot cut
            lo, hi = (i, j) if i < j else (j, i)
            normal = pts[hi] - pts[lo]
            offset = float(normal @ (0.5 * (pts[lo] + pts[hi])))
            poly = _clip_halfplane(poly, normal, offset, keep_le=(i == lo))
        polys.append(poly)
    areas = np.array([_poly_area(p) for p in polys])
    return VoronoiTessellation(lons, lats, polys, areas, region)


def voronoi_residuals(model, c: Catalog, region: Region, n_grid: int = 200,
                      n_time: int = 20) -> CellResidualSet:
    """Voronoi cell residuals (1 - Lambda_i) / sqrt(Lambda_i).

    Cells are generated by the catalog epicenters themselves, so each holds
    exactly one event; Lambda_i integrates the model over the cell (lattice
    quadrature, owned lattice points decided by nearest generator) and the
    window. Zero-mass cells are flagged.
    """
    if c.n == 0:
        raise ValueError("voronoi residuals need at least one event")
    tess = voronoi_tessellation(c.lons, c.lats, region)
    lat = region_lattice(region, n_grid)
    lons = lat.lons[lat.inside]
    lats = lat.lats[lat.inside]
    da = lat.cell_km2[lat.inside]
    gx, gy = region.to_km(tess.gen_lons, tess.gen_lats)
    qx, qy = region.to_km(lons, lats)
    tree = cKDTree(np.column_stack([gx, gy]))
    _, owner = tree.query(np.column_stack([qx, qy]))
    T = c.window_days
    if getattr(model, "time_dependent", False):
        dens = np.zeros(lons.shape)
        for j in range(n_time):
            t = (j + 0.5) * T / n_time
            dens += model.rate_at(lons, lats, np.full(lons.shape, t))
        dens /= n_time
    else:
        dens = model.rate_at(lons, lats)
    lam = np.zeros(tess.n_cells)
    np.add.at(lam, owner, dens * da)
    lam *= T
    flags = lam <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(flags, np.nan, (1.0 - lam) / np.sqrt(lam))
    return CellResidualSet("voronoi", values, flags, tess.polys_lonlat(),
                           lam, np.ones(tess.n_cells, dtype=int))


# --- homogeneity tests ----------------------------------------------------


@dataclass(frozen=True)
class HomogeneityResult:
    method: str
    statistic: float
    p_value: float
    df: int | None = None
    note: str = ""


def _quadrat_layout(region: Region, n_points: int, n_lattice: int = 200):
    """Pick the quadrat grid size and per-quadrat region areas.

    m starts at floor(sqrt(n/5)) (bounded to [2, 25]) and shrinks until
    every positive-area quadrat expects at least 5 points.
    """
    lat = region_lattice(region, n_lattice)
    lon_min, lon_max, lat_min, lat_max = region.bbox
    m = max(2, min(25, int(math.sqrt(n_points / 5.0))))
    while True:
        ix = np.clip(((lat.lons - lon_min) / (lon_max - lon_min) * m).astype(int), 0, m - 1)
        iy = np.clip(((lat.lats - lat_min) / (lat_max - lat_min) * m).astype(int), 0, m - 1)
        qidx = iy * m + ix
        areas = np.zeros(m * m)
        np.add.at(areas, qidx[lat.inside], lat.cell_km2[lat.inside])
        pos = areas > 0
        expected = n_points * areas[pos] / areas[pos].sum()
        if m == 2 or expected.min() >= 5.0:
            return m, areas
        m -= 1


def homogeneity_test(ps, region: Region, method: str = "quadrat",
                     rng: RngStream | None = None, n_sim: int = 199,
                     nominal_rate: float | None = None) -> HomogeneityResult:
    """Test a point pattern for spatial homogeneity.

    "quadrat": chi-square over an adaptive m x m grid (expected counts
    proportional to region-clipped quadrat area, at least 5 per quadrat).
    "kfunction": centered K-function at 5 lags against envelopes from
    n_sim homogeneous simulations at nominal_rate (defaults to the
    pattern's empirical rate); p by rank of the max deviation.
    """
    lons = np.asarray(ps.lons, dtype=float)
    lats = np.asarray(ps.lats, dtype=float)
    n = lons.size
    if method == "quadrat":
        if n < 10:
            return HomogeneityResult("quadrat", math.nan, math.nan,
                                     note="fewer than 10 points")
        m, areas = _quadrat_layout(region, n)
        lon_min, lon_max, lat_min, lat_max = region.bbox
        ix = np.clip(((lons - lon_min) / (lon_max - lon_min) * m).astype(int), 0, m - 1)
        iy = np.clip(((lats - lat_min) / (lat_max - lat_min) * m).astype(int), 0, m - 1)
        obs = np.bincount(iy * m + ix, minlength=m * m).astype(float)
        pos = areas > 0
        expected = n * areas[pos] / areas[pos].sum()
        stray = float(obs[~pos].sum())
        chi2 = float(np.sum((obs[pos] - expected) ** 2 / expected)) + stray
        df = int(pos.sum()) - 1
        p = float(stats.chi2.sf(chi2, df))
        return HomogeneityResult("quadrat", chi2, p, df=df)

    if method == "kfunction":
        if rng is None:
            raise ValueError("kfunction homogeneity test needs an RngStream")
        if n < 2:
            return HomogeneityResult("kfunction", math.nan, math.nan,
                                     note="fewer than 2 points")
        T = float(getattr(ps, "window_days", 1.0))
        area = region.area_km2
        if nominal_rate is None:
            nominal_rate = n / (area * T)
        lags = math.sqrt(area) * np.array([0.02, 0.04, 0.06, 0.08, 0.10])

        def k_hat(xlon, xlat):
            m_pts = xlon.size
            if m_pts < 2:
                return np.zeros(lags.size)
            x, y = region.to_km(xlon, xlat)
            dist = np.hypot(x[:, None] - x[None, :], y[:, None] - y[None, :])
            np.fill_diagonal(dist, np.inf)
            return np.array([
                area * float((dist <= h).sum()) / (m_pts * (m_pts - 1))
                for h in lags
            ])

        k_obs = k_hat(lons, lats)
        k_sims = np.empty((n_sim, lags.size))
        for s in range(n_sim):
            sim = simulate_homogeneous(nominal_rate, region, T, rng.substream(s))
            k_sims[s] = k_hat(sim.lons, sim.lats)
        center = k_sims.mean(axis=0)
        dev_obs = float(np.max(np.abs(k_obs - center)))
        dev_sims = np.max(np.abs(k_sims - center), axis=1)
        p = (1.0 + float(np.sum(dev_sims >= dev_obs))) / (n_sim + 1.0)
        return HomogeneityResult("kfunction", dev_obs, p)

    raise ValueError(f"unknown homogeneity method {method!r}")
