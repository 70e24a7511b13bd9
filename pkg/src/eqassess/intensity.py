"""Intensity models: kernel smoothers, piecewise grids, and Hawkes clustering.

All rates are event densities per km^2 per day. A model exposes
rate_at(lons, lats, times) (vectorized, equal-length arrays) and a
time_dependent flag; time-independent models ignore the times argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import minimize

from .catalog import KM_PER_DEG, Catalog, Region, km_distance, region_lattice
from .forecast import GriddedForecast
from .rng import RngStream

_CHUNK = 4096


def kernel_density(r, d: float):
    """Isotropic power-law kernel d/(2*pi) * (r^2 + d^2)^(-3/2).

    Normalized to integrate to 1 over the plane; d (km) controls the width.
    """
    if d <= 0:
        raise ValueError("kernel bandwidth d must be positive")
    r = np.asarray(r, dtype=float)
    return (d / (2.0 * math.pi)) * (r * r + d * d) ** -1.5


def kernel_disk_mass(radius: float, d: float) -> float:
    """Kernel mass inside a disk of the given radius: 1 - d/sqrt(r^2+d^2)."""
    return 1.0 - d / math.hypot(radius, d)


class HomogeneousIntensity:
    """Constant rate (events per km^2 per day)."""

    time_dependent = False

    def __init__(self, rate: float):
        if rate < 0:
            raise ValueError("rate must be non-negative")
        self.rate = float(rate)

    def rate_at(self, lons, lats, times=None):
        return np.full(np.shape(np.asarray(lons)), self.rate, dtype=float)

    def __repr__(self):
        return f"HomogeneousIntensity({self.rate!r})"


class KernelIntensity:
    """Sum of power-law kernels centered on source points.

    With scale=1 the plane integral equals the number of sources; scale
    rescales the whole field (used for background rates calibrated to a
    target count).
    """

    time_dependent = False

    def __init__(self, src_lons, src_lats, d: float, scale: float = 1.0):
        self.src_lons = np.atleast_1d(np.asarray(src_lons, dtype=float))
        self.src_lats = np.atleast_1d(np.asarray(src_lats, dtype=float))
        if self.src_lons.shape != self.src_lats.shape or self.src_lons.size == 0:
            raise ValueError("kernel model needs matching, non-empty source arrays")
        if d <= 0:
            raise ValueError("kernel bandwidth d must be positive")
        self.d = float(d)
        self.scale = float(scale)

    def rate_at(self, lons, lats, times=None):
        lons = np.atleast_1d(np.asarray(lons, dtype=float))
        lats = np.atleast_1d(np.asarray(lats, dtype=float))
        out = np.empty(lons.shape, dtype=float)
        for lo in range(0, lons.size, _CHUNK):
            hi = min(lo + _CHUNK, lons.size)
            r = km_distance(lons[lo:hi, None], lats[lo:hi, None],
                            self.src_lons[None, :], self.src_lats[None, :])
            out[lo:hi] = kernel_density(r, self.d).sum(axis=1)
        return self.scale * out


class GridIntensity:
    """Piecewise-constant spatial rate from a gridded forecast.

    Cell rate over the forecast window becomes a density (per km^2 per day);
    magnitude bands are summed. Points outside every cell have rate 0;
    boundary points follow the lowest-index-cell rule.
    """

    time_dependent = False

    def __init__(self, f: GriddedForecast):
        space = f.grid.space_boxes
        space_of = f.grid.space_index()
        totals = np.zeros(space.shape[0])
        np.add.at(totals, space_of, f.rates)
        lat_mid = np.radians(0.5 * (space[:, 2] + space[:, 3]))
        areas = (KM_PER_DEG * np.cos(lat_mid) * (space[:, 1] - space[:, 0])) * \
                (KM_PER_DEG * (space[:, 3] - space[:, 2]))
        self.boxes = space
        self.density = totals / (areas * f.window_days)
        self.window_days = f.window_days

    def rate_at(self, lons, lats, times=None):
        lons = np.atleast_1d(np.asarray(lons, dtype=float))
        lats = np.atleast_1d(np.asarray(lats, dtype=float))
        out = np.zeros(lons.shape, dtype=float)
        unset = np.ones(lons.shape, dtype=bool)
        for box, dens in zip(self.boxes, self.density):
            hit = unset & (lons >= box[0]) & (lons <= box[1]) & \
                (lats >= box[2]) & (lats <= box[3])
            out[hit] = dens
            unset &= ~hit
        return out


@dataclass(frozen=True)
class HawkesParams:
    """ETAS-style triggering parameters.

    mu: background rate (events/km^2/day); k: triggering productivity;
    c (days) and p > 1 shape the temporal decay (t+c)^-p; a >= 0 scales
    productivity with magnitude above the floor m0; d (km^2) and q > 1
    shape the spatial decay (r^2+d)^-q.
    """

    mu: float
    k: float
    c: float
    p: float
    a: float
    d: float
    q: float
    m0: float = 0.0

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.k < 0:
            raise ValueError("k must be non-negative")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.p <= 1:
            raise ValueError("p must exceed 1")
        if self.a < 0:
            raise ValueError("a must be non-negative")
        if self.d <= 0:
            raise ValueError("d must be positive")
        if self.q <= 1:
            raise ValueError("q must exceed 1")


def branching_ratio(params: HawkesParams, mag: float) -> float:
    """Expected direct offspring of an event of the given magnitude."""
    temporal = params.c ** (1.0 - params.p) / (params.p - 1.0)
    spatial = math.pi * params.d ** (1.0 - params.q) / (params.q - 1.0)
    return params.k * math.exp(params.a * (mag - params.m0)) * temporal * spatial


def mean_branching_ratio(params: HawkesParams, b: float = 1.0, mag_span: float = 4.0) -> float:
    """Branching ratio averaged over truncated Gutenberg-Richter magnitudes."""
    beta = b * math.log(10.0)
    a = params.a
    if abs(beta - a) < 1e-12:
        boost = beta * mag_span / (1.0 - math.exp(-beta * mag_span))
    else:
        boost = (beta / (beta - a)) * (1.0 - math.exp(-(beta - a) * mag_span)) \
            / (1.0 - math.exp(-beta * mag_span))
    return branching_ratio(params, params.m0) * boost


def temporal_trigger_cdf(u, c: float, p: float):
    """CDF of the normalized lag density (t+c)^-p at lag u >= 0."""
    u = np.asarray(u, dtype=float)
    return 1.0 - (c / (u + c)) ** (p - 1.0)


def radial_trigger_cdf(r, d: float, q: float):
    """CDF of the offspring distance density 2*pi*r*(r^2+d)^-q at radius r."""
    r = np.asarray(r, dtype=float)
    return 1.0 - (d / (r * r + d)) ** (q - 1.0)


class HawkesIntensity:
    """Conditional intensity mu(s) + sum over strictly earlier events of
    k * (dt+c)^-p * exp(a*(M-m0)) * (r^2+d)^-q."""

    time_dependent = True

    def __init__(self, params: HawkesParams, history: Catalog, background=None):
        self.params = params
        self.history = history
        self.background = background  # None -> constant params.mu

    def rate_at(self, lons, lats, times):
        p = self.params
        lons = np.atleast_1d(np.asarray(lons, dtype=float))
        lats = np.atleast_1d(np.asarray(lats, dtype=float))
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if times.shape != lons.shape:
            times = np.broadcast_to(times, lons.shape)
        h = self.history
        if self.background is None:
            out = np.full(lons.shape, p.mu, dtype=float)
        else:
            out = self.background.rate_at(lons, lats).astype(float).copy()
        if h.n == 0 or p.k == 0:
            return out
        prod = p.k * np.exp(p.a * (h.mags - p.m0))
        for lo in range(0, lons.size, _CHUNK):
            hi = min(lo + _CHUNK, lons.size)
            dt = times[lo:hi, None] - h.times[None, :]
            active = dt > 0
            r = km_distance(lons[lo:hi, None], lats[lo:hi, None],
                            h.lons[None, :], h.lats[None, :])
            g = np.where(
                active,
                (np.where(active, dt, 1.0) + p.c) ** -p.p * (r * r + p.d) ** -p.q,
                0.0,
            )
            out[lo:hi] += g @ prod
        return out


# --- likelihood ---------------------------------------------------------


def _spatial_quadrature_rate(model, region: Region, n_grid: int) -> float:
    """Integral of a time-independent model over the region, per day."""
    lat = region_lattice(region, n_grid)
    vals = model.rate_at(lat.lons[lat.inside], lat.lats[lat.inside])
    return float(np.sum(vals * lat.cell_km2[lat.inside]))


def _ray_segments(origin_xy, ring_km, n_angles: int):
    """Radii where rays from origin cross the polygon boundary.

    Returns (radii, signs): per crossing, +1 starts an inside run and -1
    ends one, so the region-clipped mass along each ray is an alternating
    sum of the radial antiderivative. The origin must lie inside.
    """
    ax = ring_km[:, 0]
    ay = ring_km[:, 1]
    bx = np.roll(ax, -1)
    by = np.roll(ay, -1)
    ex = bx - ax
    ey = by - ay
    theta = (np.arange(n_angles) + 0.5) * (2.0 * math.pi / n_angles)
    ux, uy = np.cos(theta), np.sin(theta)
    px, py = float(origin_xy[0]), float(origin_xy[1])
    # solve p + t u = a + s e per (angle, edge)
    denom = ux[:, None] * ey[None, :] - uy[:, None] * ex[None, :]
    rx = ax[None, :] - px
    ry = ay[None, :] - py
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (rx * ey[None, :] - ry * ex[None, :]) / denom
        s = (rx * uy[:, None] - ry * ux[:, None]) / denom
    valid = (np.abs(denom) > 1e-300) & (t > 0) & (s >= 0.0) & (s < 1.0)
    radii, signs = [], []
    for k in range(n_angles):
        tk = np.sort(t[k][valid[k]])
        if tk.size == 0:
            continue
        # the origin is inside, so crossings alternate exit, entry, exit, ...
        sg = np.where(np.arange(tk.size) % 2 == 0, 1.0, -1.0)
        radii.append(tk)
        signs.append(sg)
    if not radii:
        return np.array([]), np.array([])
    return np.concatenate(radii), np.concatenate(signs)


class _ClippedMass:
    """Per-event region-clipped integral of (r^2+d)^-q over the region.

    Geometry (ray crossing radii per event) is precomputed; evaluation for
    any (d, q) is an exact radial antiderivative summed over ray wedges.
    """

    def __init__(self, c: Catalog, region: Region, n_angles: int = 720):
        x, y = region.to_km(c.lons, c.lats)
        self.n_angles = n_angles
        self.n_events = c.n
        ev_idx, radii, signs = [], [], []
        for i in range(c.n):
            r, s = _ray_segments((x[i], y[i]), region.ring_km, n_angles)
            ev_idx.append(np.full(r.size, i))
            radii.append(r)
            signs.append(s)
        self.ev = np.concatenate(ev_idx) if ev_idx else np.array([], dtype=int)
        self.radii = np.concatenate(radii) if radii else np.array([])
        self.signs = np.concatenate(signs) if signs else np.array([])

    def masses(self, d: float, q: float) -> np.ndarray:
        # wedge integral 0..R of r (r^2+d)^-q dr = (d^(1-q) - (R^2+d)^(1-q)) / (2(q-1))
        seg = (d ** (1.0 - q) - (self.radii ** 2 + d) ** (1.0 - q)) / (2.0 * (q - 1.0))
        per_event = np.zeros(self.n_events)
        np.add.at(per_event, self.ev, self.signs * seg)
        # each of n_angles wedges spans 2*pi/n_angles of arc
        return per_event * (2.0 * math.pi / self.n_angles)


def _hawkes_integral(params: HawkesParams, c: Catalog, region: Region,
                     mode: str, n_grid: int, clipped: "_ClippedMass | None",
                     background=None) -> float:
    p = params
    T = c.window_days
    if background is None:
        bg = p.mu * region.area_km2 * T
    else:
        bg = _spatial_quadrature_rate(background, region, n_grid) * T
    if c.n == 0 or p.k == 0:
        return bg
    prod = p.k * np.exp(p.a * (c.mags - p.m0))
    ti = (p.c ** (1.0 - p.p) - (T - c.times + p.c) ** (1.0 - p.p)) / (p.p - 1.0)
    if mode == "approx":
        spatial = math.pi * p.d ** (1.0 - p.q) / (p.q - 1.0)
        trig = float(np.sum(prod * ti) * spatial)
    elif mode == "quadrature":
        if clipped is None:
            clipped = _ClippedMass(c, region)
        trig = float(np.sum(prod * ti * clipped.masses(p.d, p.q)))
    else:
        raise ValueError(f"unknown integral mode {mode!r}")
    return bg + trig


def log_likelihood(model, c: Catalog, region: Region, mode: str = "approx",
                   n_grid: int = 100) -> float:
    """Point-process log-likelihood: sum of log rates at the events minus
    the integrated rate over region x window.

    mode selects how the Hawkes triggering integral is computed: "approx"
    uses each event's total triggering mass truncated to the window;
    "quadrature" clips the spatial part to the region exactly in radius with
    angular quadrature. Time-independent models integrate by midpoint
    quadrature on an n_grid x n_grid lattice (homogeneous models exactly).
    """
    lam = model.rate_at(c.lons, c.lats, c.times)
    with np.errstate(divide="ignore"):
        point = float(np.sum(np.log(lam)))
    if isinstance(model, HawkesIntensity):
        integral = _hawkes_integral(model.params, c, region, mode, n_grid, None,
                                    model.background)
    elif isinstance(model, HomogeneousIntensity):
        integral = model.rate * region.area_km2 * c.window_days
    elif model.time_dependent:
        raise ValueError("time-dependent models other than Hawkes are not integrable here")
    else:
        integral = _spatial_quadrature_rate(model, region, n_grid) * c.window_days
    return point - integral


# --- fitting ------------------------------------------------------------


class FitResult(NamedTuple):
    params: object
    log_lik: float
    iterations: int
    grad_norm: float
    converged: bool
    family: str
    message: str


def central_gradient(f: Callable, x: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient with per-coordinate relative steps."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def hawkes_pack(params: HawkesParams) -> np.ndarray:
    """Transform to unconstrained space: logs of positives, log(p-1), log(q-1)."""
    return np.array([
        math.log(params.mu), math.log(params.k), math.log(params.c),
        math.log(params.p - 1.0), math.log(params.a), math.log(params.d),
        math.log(params.q - 1.0),
    ])


def hawkes_unpack(theta: np.ndarray, m0: float) -> HawkesParams:
    t = np.asarray(theta, dtype=float)
    return HawkesParams(
        mu=math.exp(t[0]), k=math.exp(t[1]), c=math.exp(t[2]),
        p=1.0 + math.exp(t[3]), a=math.exp(t[4]), d=math.exp(t[5]),
        q=1.0 + math.exp(t[6]), m0=m0,
    )


def hawkes_objective(c: Catalog, region: Region, m0: float, mode: str = "approx",
                     n_grid: int = 100) -> Callable:
    """Negative log-likelihood over the transformed parameter vector.

    Pairwise event structure and region-clipping geometry are precomputed,
    so repeated evaluations during optimization stay cheap.
    """
    dt = c.times[:, None] - c.times[None, :]
    active = dt > 0
    r2 = km_distance(c.lons[:, None], c.lats[:, None],
                     c.lons[None, :], c.lats[None, :]) ** 2
    dmag = c.mags - m0
    T = c.window_days
    area = region.area_km2
    dt_safe = np.where(active, dt, 1.0)
    clipped = _ClippedMass(c, region) if mode == "quadrature" else None

    def negll(theta: np.ndarray) -> float:
        try:
            prm = hawkes_unpack(theta, m0)
        except (OverflowError, ValueError):
            return float("inf")
        prod = prm.k * np.exp(prm.a * dmag)
        g = np.where(active, (dt_safe + prm.c) ** -prm.p * (r2 + prm.d) ** -prm.q, 0.0)
        lam = prm.mu + g @ prod
        with np.errstate(divide="ignore"):
            point = float(np.sum(np.log(lam)))
        if not np.isfinite(point):
            return float("inf")
        ti = (prm.c ** (1.0 - prm.p) - (T - c.times + prm.c) ** (1.0 - prm.p)) / (prm.p - 1.0)
        if mode == "approx":
            spatial = math.pi * prm.d ** (1.0 - prm.q) / (prm.q - 1.0)
            trig = float(np.sum(prod * ti) * spatial)
        else:
            trig = float(np.sum(prod * ti * clipped.masses(prm.d, prm.q)))
        return -(point - (prm.mu * area * T + trig))

    return negll


def _homog_objective(c: Catalog, region: Region) -> Callable:
    n = c.n
    at = region.area_km2 * c.window_days

    def negll(theta: np.ndarray) -> float:
        mu = math.exp(float(theta[0]))
        return -(n * math.log(mu) - mu * at) if n else mu * at

    return negll


def fit_mle(family: str, c: Catalog, region: Region, init,
            mode: str = "approx", n_grid: int = 100, gtol: float = 1e-6,
            max_iter: int = 500, restarts: int = 0,
            rng: RngStream | None = None) -> FitResult:
    """Maximize the log-likelihood by quasi-Newton ascent in transformed space.

    family is "homogeneous" (init: rate) or "hawkes" (init: HawkesParams;
    the magnitude floor is taken from init and held fixed). Convergence is
    declared when the finite-difference gradient max-norm drops below gtol,
    up to max_iter iterations. restarts > 0 adds that many jittered starts
    (multiplicative log-normal, sigma 0.1) and keeps the best optimum.
    """
    if family == "homogeneous":
        rate0 = init.rate if isinstance(init, HomogeneousIntensity) else float(init)
        if rate0 <= 0:
            raise ValueError("homogeneous fit needs a positive starting rate")
        negll = _homog_objective(c, region)
        theta0 = np.array([math.log(rate0)])
        unpack = lambda t: HomogeneousIntensity(math.exp(float(t[0])))
    elif family == "hawkes":
        if not isinstance(init, HawkesParams):
            raise ValueError("hawkes fit needs HawkesParams as the start")
        if init.k <= 0 or init.a <= 0:
            raise ValueError("hawkes fit needs strictly positive k and a at the start")
        negll = hawkes_objective(c, region, init.m0, mode, n_grid)
        theta0 = hawkes_pack(init)
        unpack = lambda t: hawkes_unpack(t, init.m0)
    else:
        raise ValueError(f"unknown model family {family!r}")

    jac = lambda t: central_gradient(negll, t)
    starts = [theta0]
    if restarts > 0:
        if rng is None:
            raise ValueError("restarts need an RngStream")
        for k in range(restarts):
            gen = rng.substream(k).generator()
            starts.append(theta0 + gen.normal(0.0, 0.1, size=theta0.size))

    best = None
    for theta_s in starts:
        res = minimize(negll, theta_s, method="BFGS", jac=jac,
                       options={"gtol": gtol, "maxiter": max_iter})
        if best is None or res.fun < best.fun:
            best = res
    grad_norm = float(np.max(np.abs(best.jac)))
    return FitResult(
        params=unpack(best.x),
        log_lik=-float(best.fun),
        iterations=int(best.nit),
        grad_norm=grad_norm,
        converged=bool(grad_norm < gtol),
        family=family,
        message=str(best.message),
    )


# --- kernel background utilities ----------------------------------------


class BandwidthSelection(NamedTuple):
    d: float
    scores: np.ndarray


def select_bandwidth(c: Catalog, candidates) -> BandwidthSelection:
    """Pick the kernel width maximizing leave-one-out log-likelihood.

    Score(d) = sum_i log(sum_{j != i} kernel(r_ij, d)); ties go to the
    first candidate in the given order.
    """
    candidates = np.asarray(candidates, dtype=float)
    if candidates.size == 0 or np.any(candidates <= 0):
        raise ValueError("bandwidth candidates must be positive")
    if c.n < 2:
        raise ValueError("bandwidth selection needs at least 2 events")
    r = km_distance(c.lons[:, None], c.lats[:, None], c.lons[None, :], c.lats[None, :])
    off = ~np.eye(c.n, dtype=bool)
    scores = np.empty(candidates.size)
    for i, d in enumerate(candidates):
        dens = kernel_density(r, float(d))
        loo = (dens * off).sum(axis=1)
        with np.errstate(divide="ignore"):
            scores[i] = float(np.sum(np.log(loo)))
    return BandwidthSelection(float(candidates[int(np.argmax(scores))]), scores)


def background_from_catalog(training: Catalog, d: float, region: Region,
                            events_per_day: float, n_grid: int = 200) -> KernelIntensity:
    """Kernel field over training epicenters scaled so its region integral
    equals events_per_day."""
    if events_per_day <= 0:
        raise ValueError("target background rate must be positive")
    base = KernelIntensity(training.lons, training.lats, d)
    integral = _spatial_quadrature_rate(base, region, n_grid)
    if integral <= 0:
        raise ValueError("kernel field integrates to zero over the region")
    return KernelIntensity(training.lons, training.lats, d, scale=events_per_day / integral)


# --- parameter file round trip ------------------------------------------


def serialize_hawkes_params(params: HawkesParams, fit: FitResult | None = None) -> str:
    lines = []
    if fit is not None:
        lines.append(f"# log_likelihood = {fit.log_lik!r}")
        lines.append(f"# iterations = {fit.iterations}")
        lines.append(f"# grad_norm = {fit.grad_norm!r}")
        lines.append(f"# converged = {str(fit.converged).lower()}")
    for name in ("mu", "k", "c", "p", "a", "d", "q", "m0"):
        lines.append(f"{name} = {getattr(params, name)!r}")
    return "\n".join(lines) + "\n"


def parse_hawkes_params(text: str) -> HawkesParams:
    vals = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ValueError(f"params: line {lineno}: expected 'name = value'")
        name, _, v = s.partition("=")
        name = name.strip()
        try:
            vals[name] = float(v.strip())
        except ValueError:
            raise ValueError(f"params: line {lineno}: malformed value {v.strip()!r}") from None
    missing = [n for n in ("mu", "k", "c", "p", "a", "d", "q", "m0") if n not in vals]
    if missing:
        raise ValueError(f"params: missing {', '.join(missing)}")
    extra = [n for n in vals if n not in ("mu", "k", "c", "p", "a", "d", "q", "m0")]
    if extra:
        raise ValueError(f"params: unknown names {', '.join(sorted(extra))}")
    return HawkesParams(**vals)
