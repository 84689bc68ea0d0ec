"""Critical branching symmetric stable process: maximal displacement and occupation."""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import _kernels as K
from ._validation import check_count, check_positive, check_rng, kernel_seed
from .branching import survival_prob_exact
from .levy_path import PathConfig
from .rng import chunk_sizes, parallel_map, substream_seed
from .stable import StableParams, _as_params, stable_tail

#: realisations per task; fixed so results do not depend on the worker count
CHUNK = 20_000


@dataclass(frozen=True)
class CbssConfig:
    stable: StableParams
    path: PathConfig = field(default_factory=PathConfig)
    progeny_cap: int = 10**7
    time_cap: float = math.inf
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "stable", _as_params(self.stable))
        check_count(self.progeny_cap, "progeny_cap")
        check_positive(self.time_cap, "time_cap", allow_zero=True, allow_inf=True)
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def kernel_args(self):
        code, dt, h, rate, sig2 = self.path.resolve(self.stable)
        return self.stable.alpha, self.stable.char_scale, code, dt, h, rate, sig2


@dataclass(frozen=True)
class RealizationResult:
    crossed: bool
    M_lower: float
    censored: bool
    progeny_used: int
    wall_events: int


@dataclass(frozen=True)
class TailEstimate:
    x: float
    n: int
    hits: int
    censored_count: int
    p_hat: float
    ci_low: float
    ci_high: float
    p_hat_bracket_high: float

    @property
    def censored_fraction(self):
        return self.censored_count / self.n

    @property
    def quality_ok(self):
        """False when more than 1% of the runs were censored."""
        return self.censored_fraction <= 0.01

    @property
    def bracket_gap(self):
        return self.p_hat_bracket_high - self.p_hat

    @property
    def std_err(self):
        return math.sqrt(max(self.p_hat * (1.0 - self.p_hat), 0.0) / self.n)


def wilson_interval(k, n, confidence=0.95):
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def _batch(config, x, m, seed, direction=1, early_exit=True):
    crossed = np.empty(m, dtype=np.bool_)
    extreme = np.empty(m)
    censored = np.empty(m, dtype=np.bool_)
    progeny = np.empty(m, dtype=np.int64)
    events = np.empty(m, dtype=np.int64)
    K.cbss_batch(seed, m, *config.kernel_args(), float(x), int(direction), int(config.progeny_cap),
                 float(config.time_cap), bool(early_exit), crossed, extreme, censored, progeny, events)
    return crossed, extreme, censored, progeny, events


def simulate_realization(config, x, rng=None, direction=1, early_exit=True):
    """One realisation tested against level ``x`` (or ``-x`` with ``direction=-1``).

    With ``early_exit`` the run stops at the first skeleton value at or
    beyond the level; ``M_lower`` is then only the extreme seen so far.
    """
    x = check_positive(x, "x")
    rng = check_rng(rng)
    c, e, s, p, ev = _batch(config, x, 1, kernel_seed(rng), direction, early_exit)
    return RealizationResult(bool(c[0]), float(e[0]), bool(s[0]), int(p[0]), int(ev[0]))


def simulate_batch(config, x, n, seed, direction=1, early_exit=True):
    """Arrays ``(crossed, extreme, censored, progeny, events)`` for ``n`` runs from one kernel seed."""
    return _batch(config, check_positive(x, "x"), check_count(n, "n"), int(seed), direction, early_exit)


def _count_task(task):
    config, x, m, seed, direction = task
    crossed, _, censored, _, _ = _batch(config, x, m, seed, direction, True)
    return int(crossed.sum()), int(censored.sum())


def estimate_tail(config, x_list, n, workers=1, direction=1, chunk=CHUNK):
    """``P{M >= x}`` for each ``x`` from ``n`` independent realisations.

    Each ``(x index, chunk index)`` pair draws from its own substream of
    ``config.seed``, so the result is identical for any ``workers``.
    Censored runs count as misses in ``p_hat`` and as hits in the bracket.
    ``direction=-1`` estimates ``P{min <= -x}`` instead.
    """
    xs = [check_positive(float(x), "x") for x in np.atleast_1d(x_list)]
    n = check_count(n, "n")
    tasks = []
    for i, x in enumerate(xs):
        for j, m in enumerate(chunk_sizes(n, chunk)):
            tasks.append((config, x, m, substream_seed(config.seed, i, j, 0 if direction > 0 else 1), direction))
    counts = parallel_map(_count_task, tasks, workers)
    out = []
    pos = 0
    nchunks = len(chunk_sizes(n, chunk))
    for x in xs:
        hits = sum(c[0] for c in counts[pos:pos + nchunks])
        cens = sum(c[1] for c in counts[pos:pos + nchunks])
        pos += nchunks
        lo, hi = wilson_interval(hits, n)
        out.append(TailEstimate(x, n, hits, cens, hits / n, lo, hi, (hits + cens) / n))
    return out


def theory_tail(alpha, x):
    """Asymptotic law ``sqrt(2/alpha) x^(-alpha/2)``."""
    return math.sqrt(2.0 / alpha) * np.asarray(x, dtype=float) ** (-0.5 * alpha)


def loglog_slope(estimates):
    """Weighted least-squares slope of ``log p_hat`` on ``log x`` and its standard error.

    Weights are the binomial delta-method variances ``(1-p)/(n p)``.
    """
    x = np.array([e.x for e in estimates])
    p = np.array([e.p_hat for e in estimates])
    n = np.array([e.n for e in estimates])
    if np.any(p <= 0):
        raise ValueError("cannot fit a slope through zero estimates")
    var = (1.0 - p) / (n * p)
    w = 1.0 / var
    lx = np.log(x)
    ly = np.log(p)
    xb = np.sum(w * lx) / w.sum()
    yb = np.sum(w * ly) / w.sum()
    sxx = np.sum(w * (lx - xb) ** 2)
    slope = np.sum(w * (lx - xb) * (ly - yb)) / sxx
    return float(slope), float(math.sqrt(1.0 / sxx)), float(math.exp(yb - slope * xb))


def refine_dt(config, x, n, dts, workers=1):
    """Estimates at a decreasing sequence of steps.

    Returns ``(estimates, chosen_dt)`` where ``chosen_dt`` is the first step
    whose estimate differs from the previous one by less than a third of
    the confidence-interval width (``None`` if never reached).
    """
    ests = []
    chosen = None
    for dt in dts:
        cfg = replace(config, path=replace(config.path, dt=float(dt)))
        est = estimate_tail(cfg, [x], n, workers)[0]
        if ests and chosen is None and abs(est.p_hat - ests[-1].p_hat) < (est.ci_high - est.ci_low) / 3.0:
            chosen = float(dt)
        ests.append(est)
    return ests, chosen


@dataclass(frozen=True)
class OccupationEstimate:
    mean: float
    std_err: float
    n: int
    capped_count: int

    def __float__(self):
        return self.mean


def occupation_count(config, t, x, n, rng=None, chunk=100_000):
    """Mean number of particles alive at time ``t`` located at or above ``x``.

    Positions use one exact stable draw per lifetime segment, so there is
    no discretisation error. ``x = -inf`` counts every living particle.
    """
    t = check_positive(t, "t")
    n = check_count(n, "n")
    rng = check_rng(rng)
    params = config.stable
    ge = np.empty(n, dtype=np.int64)
    total = np.empty(n, dtype=np.int64)
    capped = np.empty(n, dtype=np.bool_)
    i = 0
    for m in chunk_sizes(n, chunk):
        K.occupation_batch(kernel_seed(rng), m, params.alpha, params.char_scale, t, float(x),
                           int(config.progeny_cap), ge[i:i + m], total[i:i + m], capped[i:i + m])
        i += m
    counts = total if x == -math.inf else ge
    return OccupationEstimate(float(counts.mean()), float(counts.std(ddof=1) / math.sqrt(n)), n, int(capped.sum()))


def tail_upper_bound(params, x, t=None):
    """``2 P{X_t >= x} + P{Y_t >= 1}``, an upper bound on ``P{M >= x}`` for any ``t``.

    Defaults to ``t = x^(alpha/2)``, which balances the two terms.
    """
    params = _as_params(params)
    x = check_positive(x, "x")
    if t is None:
        t = x ** (0.5 * params.alpha)
    return 2.0 * stable_tail(params, t, x) + survival_prob_exact(t)
