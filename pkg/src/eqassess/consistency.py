"""Forecast consistency and comparison tests.

Consistency tests (N, L, M, S) score one forecast against an observed
catalog; comparison tests (R, T, W) score two forecasts on the same grid.
Simulation-based tests resolve ties toward the rejection side (<=) and
draw replicate k from substream k of the supplied stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.stats import rankdata

from .catalog import Catalog, bin_counts
from .forecast import (GriddedForecast, expected_total, joint_log_likelihood,
                       marginal_magnitude, marginal_space, poisson_log_pmf,
                       scale_to_count)
from .rng import RngStream, pmap
from .simulate import simulate_poisson_grid


@dataclass(frozen=True)
class TestResult:
    name: str
    statistic: float
    quantile: float
    n_sim: int
    decision: str
    level: float
    sim_statistics: np.ndarray | None = field(default=None, repr=False)
    delta1: float | None = None
    delta2: float | None = None
    note: str = ""


@dataclass(frozen=True)
class PairwiseResult:
    name: str
    statistic: float
    p_value: float
    direction: str
    decision: str
    level: float
    n_used: int = 0
    n_sim: int = 0
    sim_statistics: np.ndarray | None = field(default=None, repr=False)
    note: str = ""


def n_test(f: GriddedForecast, c: Catalog, level: float = 0.05) -> TestResult:
    """Total-count test with analytic Poisson tails.

    delta1 = P(N >= n_obs) flags underprediction, delta2 = P(N <= n_obs)
    overprediction; two-sided rejection when either tail drops below
    level/2. The quantile reported is the smaller tail.
    """
    n_obs = int(bin_counts(c, f.grid).counts.sum())
    mu = expected_total(f)
    delta1 = float(stats.poisson.sf(n_obs - 1, mu))
    delta2 = float(stats.poisson.cdf(n_obs, mu))
    q = min(delta1, delta2)
    decision = "reject" if q < level / 2.0 else "consistent"
    return TestResult("n", float(n_obs), q, 0, decision, level,
                      delta1=delta1, delta2=delta2)


def l_test(f: GriddedForecast, c: Catalog, rng: RngStream, n_sim: int = 1000,
           level: float = 0.05, jobs: int = 1) -> TestResult:
    """Joint log-likelihood consistency test.

    gamma is the fraction of null catalogs (simulated from the forecast,
    binned, scored) whose likelihood is <= the observed one; one-sided
    rejection for small gamma.
    """
    obs = joint_log_likelihood(f, bin_counts(c, f.grid).counts)

    def one(k: int) -> float:
        sim = simulate_poisson_grid(f, rng.substream(k))
        return joint_log_likelihood(f, bin_counts(sim, f.grid).counts)

    sims = np.asarray(pmap(one, n_sim, jobs))
    gamma = float(np.mean(sims <= obs))
    decision = "reject" if gamma < level else "consistent"
    return TestResult("l", obs, gamma, n_sim, decision, level, sim_statistics=sims)


def _conditional_marginal_test(name: str, marg: GriddedForecast,
                               marg_counts: np.ndarray, rng: RngStream,
                               n_sim: int, level: float) -> TestResult:
    n_obs = int(marg_counts.sum())
    if n_obs == 0:
        return TestResult(name, math.nan, math.nan, 0, "not-applicable", level,
                          note="no observed events in the grid")
    scaled = scale_to_count(marg, n_obs)
    obs = joint_log_likelihood(scaled, marg_counts)
    probs = marg.rates / marg.rates.sum()
    gen = rng.substream(0).generator()
    sim_counts = gen.multinomial(n_obs, probs, size=n_sim)
    sims = poisson_log_pmf(sim_counts, scaled.rates[None, :]).sum(axis=1)
    gamma = float(np.mean(sims <= obs))
    decision = "reject" if gamma < level else "consistent"
    return TestResult(name, obs, gamma, n_sim, decision, level, sim_statistics=sims)


def m_test(f: GriddedForecast, c: Catalog, rng: RngStream, n_sim: int = 1000,
           level: float = 0.05) -> TestResult:
    """Magnitude-distribution test, conditional on the observed total.

    The magnitude marginal is rescaled to the observed in-grid count and
    scored by joint Poisson likelihood; null counts are multinomial
    placements of the same total across bands.
    """
    counts = bin_counts(c, f.grid).counts
    band_of = f.grid.band_index()
    marg_counts = np.bincount(band_of, weights=counts,
                              minlength=f.grid.mag_bands.shape[0]).astype(int)
    return _conditional_marginal_test("m", marginal_magnitude(f), marg_counts,
                                      rng, n_sim, level)


def s_test(f: GriddedForecast, c: Catalog, rng: RngStream, n_sim: int = 1000,
           level: float = 0.05) -> TestResult:
    """Spatial-distribution test; the space marginal analogue of m_test."""
    counts = bin_counts(c, f.grid).counts
    space_of = f.grid.space_index()
    marg_counts = np.bincount(space_of, weights=counts,
                              minlength=f.grid.space_boxes.shape[0]).astype(int)
    return _conditional_marginal_test("s", marginal_space(f), marg_counts,
                                      rng, n_sim, level)


def r_test(fa: GriddedForecast, fb: GriddedForecast, c: Catalog,
           rng: RngStream, n_sim: int = 1000, level: float = 0.05,
           jobs: int = 1) -> PairwiseResult:
    """One-directional likelihood-ratio test with the first forecast as null.

    R = L_A - L_B on the observed counts; the null distribution comes from
    catalogs simulated from fa. Small p means the observed R sits in fa's
    low tail. Run with the arguments swapped for the other direction; the
    two directions are never merged.
    """
    if fa.grid != fb.grid:
        raise ValueError("r_test needs both forecasts on the same grid")
    counts = bin_counts(c, fa.grid).counts
    la = joint_log_likelihood(fa, counts)
    lb = joint_log_likelihood(fb, counts)
    if math.isinf(la) and math.isinf(lb):
        raise ValueError("both forecasts assign zero likelihood to the observation")
    r_obs = la - lb

    def one(k: int) -> float:
        sim = simulate_poisson_grid(fa, rng.substream(k))
        cs = bin_counts(sim, fa.grid).counts
        return joint_log_likelihood(fa, cs) - joint_log_likelihood(fb, cs)

    sims = np.asarray(pmap(one, n_sim, jobs))
    p = float(np.mean(sims <= r_obs))
    direction = "A" if r_obs > 0 else ("B" if r_obs < 0 else "tie")
    decision = "reject" if p < level else "consistent"
    return PairwiseResult("r", r_obs, p, direction, decision, level,
                          n_used=counts.size, n_sim=n_sim, sim_statistics=sims)


def student_t_statistic(x: np.ndarray):
    """One-sample t statistic and two-sided Student-t p for mean zero.

    Returns (t, p); (nan, nan) when the sample variance vanishes.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    sd = float(x.std(ddof=1))
    # identical values can leave sd ~ 1e-16 from mean-subtraction noise,
    # which would fabricate an enormous t; treat that as zero variance
    if sd <= 1e-13 * max(float(np.max(np.abs(x))), 1e-300):
        return math.nan, math.nan
    t = float(x.mean()) * math.sqrt(n) / sd
    p = 2.0 * float(stats.t.sf(abs(t), n - 1))
    return t, p


def t_test_pairwise(fa: GriddedForecast, fb: GriddedForecast, c: Catalog,
                    level: float = 0.05) -> PairwiseResult:
    """Paired t test on per-bin log-likelihood differences.

    Bins where either forecast scores -inf are dropped; needs at least two
    usable bins. Zero variance across bins (e.g. identical forecasts) is
    reported as degenerate rather than raising.
    """
    if fa.grid != fb.grid:
        raise ValueError("t_test_pairwise needs both forecasts on the same grid")
    counts = bin_counts(c, fa.grid).counts
    x = poisson_log_pmf(counts, fa.rates) - poisson_log_pmf(counts, fb.rates)
    x = x[np.isfinite(x)]
    if x.size < 2:
        return PairwiseResult("t", math.nan, math.nan, "not-applicable",
                              "not-applicable", level, n_used=int(x.size),
                              note="fewer than 2 bins with finite differences")
    t, p = student_t_statistic(x)
    if math.isnan(t):
        return PairwiseResult("t", float(x.mean()), 1.0, "degenerate",
                              "degenerate", level, n_used=int(x.size),
                              note="zero variance across bins")
    direction = "A" if x.mean() > 0 else ("B" if x.mean() < 0 else "tie")
    decision = "reject" if p < level else "consistent"
    return PairwiseResult("t", t, p, direction, decision, level, n_used=int(x.size))


def wilcoxon_signed_rank(x: np.ndarray):
    """Signed-rank statistic W and two-sided normal-approximation p.

    Zero differences are dropped; ties get average ranks and the null
    variance n(n+1)(2n+1)/24 is reduced by sum(t^3-t)/48 over tie groups.
    Returns (W, p, n_used).
    """
    x = np.asarray(x, dtype=float)
    x = x[x != 0.0]
    n = x.size
    if n == 0:
        return math.nan, math.nan, 0
    ranks = rankdata(np.abs(x))
    w = float(ranks[x > 0].sum())
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(np.abs(x), return_counts=True)
    var -= float(np.sum(tie_counts.astype(float) ** 3 - tie_counts)) / 48.0
    z = (w - mean) / math.sqrt(var)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return w, p, n


def w_test_pairwise(fa: GriddedForecast, fb: GriddedForecast, c: Catalog,
                    level: float = 0.05, min_nonzero: int = 10) -> PairwiseResult:
    """Wilcoxon signed-rank test on per-bin log-likelihood differences.

    Needs at least min_nonzero non-zero finite differences for the normal
    approximation; below that the result is not-applicable.
    """
    if fa.grid != fb.grid:
        raise ValueError("w_test_pairwise needs both forecasts on the same grid")
    counts = bin_counts(c, fa.grid).counts
    x = poisson_log_pmf(counts, fa.rates) - poisson_log_pmf(counts, fb.rates)
    x = x[np.isfinite(x)]
    nz = x[x != 0.0]
    if nz.size < min_nonzero:
        return PairwiseResult("w", math.nan, math.nan, "not-applicable",
                              "not-applicable", level, n_used=int(nz.size),
                              note=f"fewer than {min_nonzero} non-zero differences")
    w, p, n_used = wilcoxon_signed_rank(x)
    mean = n_used * (n_used + 1) / 4.0
    direction = "A" if w > mean else ("B" if w < mean else "tie")
    decision = "reject" if p < level else "consistent"
    return PairwiseResult("w", w, p, direction, decision, level, n_used=n_used)


def paradox_fixture():
    """Two-bin demonstration that pointwise likelihood and the L-test can
    disagree: fa scores the observation higher than fb, yet the L-test
    rejects fa and keeps fb.

    Returns (fa, fb, catalog).
    """
    from .catalog import BinGrid

    grid = BinGrid(np.array([
        [0.0, 1.0, 0.0, 1.0, 4.0, 5.0],
        [1.0, 2.0, 0.0, 1.0, 4.0, 5.0],
    ]))
    fa = GriddedForecast(grid, np.array([0.02, 0.02]), 1.0)
    fb = GriddedForecast(grid, np.array([2.5, 2.5]), 1.0)
    c = Catalog(np.array([0.5]), np.array([0.5]), np.array([0.5]),
                np.array([4.5]), 1.0, 4.0)
    return fa, fb, c


def results_to_csv(results) -> str:
    """Rows of test,statistic,quantile_or_p,n_sim,decision."""
    out = ["test,statistic,quantile_or_p,n_sim,decision"]
    for r in results:
        if isinstance(r, TestResult):
            score = r.quantile
        else:
            score = r.p_value
        out.append(f"{r.name},{repr(float(r.statistic))},{repr(float(score))},"
                   f"{r.n_sim},{r.decision}")
    return "\n".join(out) + "\n"
