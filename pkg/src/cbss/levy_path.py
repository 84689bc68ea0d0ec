"""Pathwise simulation of the symmetric stable process and first-passage tools."""

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels as K
from ._validation import check_count, check_positive, check_rng, kernel_seed
from .rng import chunk_sizes
from .stable import StableParams, _as_params, levy_tail_mass, standard_stable


class Scheme(enum.Enum):
    GridIncrements = "grid"
    HybridJumpDiffusion = "hybrid"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        value = str(value).lower()
        for member in cls:
            if value in (member.value, member.name.lower()):
                return member
        raise ValueError(f"unknown scheme {value!r}; use 'grid' or 'hybrid'")


@dataclass(frozen=True)
class PathConfig:
    """Time step, big-jump threshold ``h`` and discretisation scheme.

    ``jump_threshold=None`` means ``h = dt**(1/alpha)``, resolved per
    exponent by :meth:`resolve`.
    """

    dt: float = 0.05
    jump_threshold: float | None = None
    scheme: Scheme = Scheme.HybridJumpDiffusion

    def __post_init__(self):
        check_positive(self.dt, "dt")
        if self.jump_threshold is not None:
            check_positive(self.jump_threshold, "jump_threshold")
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))

    def threshold(self, params):
        if self.jump_threshold is not None:
            return float(self.jump_threshold)
        return self.dt ** (1.0 / _as_params(params).alpha)

    def resolve(self, params):
        """Kernel arguments ``(scheme_code, dt, h, jump_rate, small_jump_variance_rate)``."""
        params = _as_params(params)
        alpha = params.alpha
        h = self.threshold(params)
        rate = 2.0 * h ** (-alpha) / alpha
        sig2 = 2.0 * h ** (2.0 - alpha) / (2.0 - alpha)
        code = K.GRID if self.scheme is Scheme.GridIncrements else K.HYBRID
        return code, float(self.dt), float(h), float(rate), float(sig2)


def small_jump_variance_rate(params, h):
    """``int_{|y|<h} y^2 |y|^(-1-alpha) dy = 2 h^(2-alpha) / (2-alpha)``."""
    alpha = _as_params(params).alpha
    return 2.0 * h ** (2.0 - alpha) / (2.0 - alpha)


@dataclass
class SamplePath:
    """Skeleton of one trajectory; ``big_jumps`` rows are ``(time, size)``."""

    times: np.ndarray
    values: np.ndarray
    big_jumps: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    censored: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.big_jumps = np.asarray(self.big_jumps, dtype=float).reshape(-1, 2)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have the same length")
        if self.times.size == 0 or self.times[0] != 0.0:
            raise ValueError("a path starts at time 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def start(self):
        return float(self.values[0])

    @property
    def horizon(self):
        return float(self.times[-1])

    def thin(self, factor):
        """Keep every ``factor``-th grid node (plus the last), for refinement studies.

        Only meaningful for grid paths; jump records are dropped.
        """
        idx = np.arange(0, self.times.size, int(factor))
        if idx[-1] != self.times.size - 1:
            idx = np.append(idx, self.times.size - 1)
        return SamplePath(self.times[idx], self.values[idx], censored=self.censored)

    def left_limits(self):
        """Value just before each node: equals the previous value at jump nodes."""
        left = self.values.copy()
        if self.big_jumps.size:
            pos = np.searchsorted(self.times, self.big_jumps[:, 0])
            left[pos] = self.values[pos] - self.big_jumps[:, 1]
        return left


@dataclass(frozen=True)
class FirstPassageRecord:
    tau: float
    position: float
    censored: bool


def simulate_path(params, config, start, horizon, rng=None, max_points=5_000_000):
    """Simulate one skeleton on ``[0, horizon]``.

    Grid scheme: exact stable increments at multiples of ``dt``. Hybrid
    scheme: Poisson big jumps at their own times plus Gaussian increments
    at grid times, so the recorded value changes by exactly the jump size
    at each jump node. Paths longer than ``max_points`` are truncated and
    flagged ``censored``.
    """
    params = _as_params(params)
    rng = check_rng(rng)
    horizon = check_positive(horizon, "horizon", allow_zero=True)
    start = float(start)
    if horizon == 0.0:
        return SamplePath(np.zeros(1), np.array([start]))
    dt = config.dt
    n_grid = int(math.ceil(horizon / dt - 1e-9))
    censored = False
    if n_grid + 1 > max_points:
        n_grid = max_points - 1
        horizon = n_grid * dt
        censored = True
    grid = np.minimum(np.arange(1, n_grid + 1) * dt, horizon)
    if config.scheme is Scheme.GridIncrements:
        steps = np.diff(np.concatenate(([0.0], grid)))
        incr = (params.char_scale * steps) ** (1.0 / params.alpha) * standard_stable(params.alpha, n_grid, rng)
        times = np.concatenate(([0.0], grid))
        values = start + np.concatenate(([0.0], np.cumsum(incr)))
        return SamplePath(times, values, censored=censored)

    _, _, h, rate, sig2 = config.resolve(params)
    n_jumps = rng.poisson(rate * horizon)
    if n_grid + n_jumps + 1 > max_points:
        censored = True
    jump_t = np.sort(rng.uniform(0.0, horizon, n_jumps))
    jump_y = h * (1.0 - rng.random(n_jumps)) ** (-1.0 / params.alpha)
    jump_y *= np.where(rng.random(n_jumps) < 0.5, -1.0, 1.0)
    steps = np.diff(np.concatenate(([0.0], grid)))
    gauss = np.sqrt(sig2 * steps) * rng.standard_normal(n_grid)
    times = np.concatenate((grid, jump_t))
    incr = np.concatenate((gauss, jump_y))
    order = np.argsort(times, kind="stable")
    times, incr = times[order], incr[order]
    keep = np.concatenate(([True], np.diff(times) > 0))
    if not keep.all():
        # a jump landing exactly on a grid time: fold it into that node
        groups = np.cumsum(keep) - 1
        incr = np.bincount(groups, weights=incr)
        times = times[keep]
    times = np.concatenate(([0.0], times))
    values = start + np.concatenate(([0.0], np.cumsum(incr)))
    if censored:
        times, values = times[:max_points], values[:max_points]
        sel = jump_t <= times[-1]
        jump_t, jump_y = jump_t[sel], jump_y[sel]
    return SamplePath(times, values, np.column_stack((jump_t, jump_y)), censored=censored)


def write_path_csv(path, filename):
    """Write ``time,value`` rows and a ``<stem>.jumps.csv`` sidecar; returns the sidecar name."""
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "value"])
        for t, v in zip(path.times, path.values):
            w.writerow([repr(float(t)), repr(float(v))])
    stem = str(filename)
    sidecar = (stem[:-4] if stem.endswith(".csv") else stem) + ".jumps.csv"
    with open(sidecar, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "size"])
        for t, y in path.big_jumps:
            w.writerow([repr(float(t)), repr(float(y))])
    return sidecar


def running_max(path, t):
    """Largest recorded value on ``[0, t]``; a lower bound for the true supremum."""
    t = float(t)
    if not (0.0 <= t <= path.horizon):
        raise ValueError(f"t must lie in [0, {path.horizon}], got {t}")
    k = np.searchsorted(path.times, t, side="right")
    return float(np.max(path.values[:k]))


def _kernel_args(params, config):
    params = _as_params(params)
    code, dt, h, rate, sig2 = config.resolve(params)
    return params.alpha, params.char_scale, code, dt, h, rate, sig2


def passage_times(params, config, start, level, horizon, n, rng=None, direction=1, chunk=100_000):
    """Vectorised first passages: returns arrays ``(tau, position, censored)``.

    ``direction=1`` looks for ``X >= level``, ``direction=-1`` for ``X <= level``.
    Censored entries carry ``tau = horizon``.
    """
    n = check_count(n, "n")
    horizon = check_positive(horizon, "horizon")
    rng = check_rng(rng)
    args = _kernel_args(params, config)
    tau = np.empty(n)
    pos = np.empty(n)
    cens = np.empty(n, dtype=np.bool_)
    i = 0
    for m in chunk_sizes(n, chunk):
        K.passage_batch(kernel_seed(rng), m, *args, float(start), float(level), int(direction),
                        horizon, tau[i:i + m], pos[i:i + m], cens[i:i + m])
        i += m
    return tau, pos, cens


def first_passage_up(params, config, start, A, horizon, rng=None):
    """First skeleton time with ``X >= A`` (overshoot included), censored at ``horizon``."""
    tau, pos, cens = passage_times(params, config, start, A, horizon, 1, rng, direction=1)
    return FirstPassageRecord(float(tau[0]), float(pos[0]), bool(cens[0]))


def first_passage_down(params, config, start, B, horizon, rng=None):
    """First skeleton time with ``X <= B``, censored at ``horizon``."""
    tau, pos, cens = passage_times(params, config, start, B, horizon, 1, rng, direction=-1)
    return FirstPassageRecord(float(tau[0]), float(pos[0]), bool(cens[0]))


def endpoint_and_max(params, config, t, n, rng=None, chunk=100_000):
    """``(X_t, max_{s<=t} X_s)`` on the skeleton for ``n`` paths from 0."""
    n = check_count(n, "n")
    rng = check_rng(rng)
    args = _kernel_args(params, config)
    final = np.empty(n)
    top = np.empty(n)
    i = 0
    for m in chunk_sizes(n, chunk):
        K.endpoint_max_batch(kernel_seed(rng), m, *args, float(t), final[i:i + m], top[i:i + m])
        i += m
    return final, top


@dataclass(frozen=True)
class ConditionalTail:
    """Monte Carlo estimate of a conditional probability, usable as a float."""

    p_hat: float
    std_err: float
    events: int
    n: int
    wide_ci: bool

    def __float__(self):
        return self.p_hat


def overshoot_conditional_tail(params, A, x, eps, n, rng=None, config=None, min_events=400):
    """Estimate ``P(X_{tau_A} > x | tau_A < eps)`` for paths from 0.

    The default configuration uses the hybrid scheme with ``dt = eps/10``
    and ``h = A/10``, so the short-horizon paths cost a handful of events.
    """
    params = _as_params(params)
    A = check_positive(A, "A")
    eps = check_positive(eps, "eps")
    x = float(x)
    if x < A:
        raise ValueError("x must be >= A")
    if x == A:
        return ConditionalTail(1.0, 0.0, 0, int(n), False)
    if config is None:
        config = PathConfig(dt=eps / 10.0, jump_threshold=A / 10.0)
    tau, pos, cens = passage_times(params, config, 0.0, A, eps, n, rng)
    hit = ~cens & (tau < eps)
    k = int(hit.sum())
    if k == 0:
        return ConditionalTail(float("nan"), float("inf"), 0, int(n), True)
    p = float(np.mean(pos[hit] > x))
    se = math.sqrt(max(p * (1 - p), 1.0 / k) / k)
    return ConditionalTail(p, se, k, int(n), k < min_events)


@dataclass(frozen=True)
class JumpIndependenceReport:
    p_value: float
    chi2: float
    table: np.ndarray
    n_events: int
    size_ks_pvalue: float
    insufficient: bool


def first_jump_records(params, J, n, rng=None, config=None):
    """Size, time and pre-jump functional ``sign(X_{nu/2})`` of the first J-jump."""
    params = _as_params(params)
    lo, hi = float(J[0]), float(J[1])
    if not lo < hi:
        raise ValueError("J must be a non-empty interval")
    if lo <= 0.0 <= hi:
        raise ValueError("0 must lie outside the closure of J")
    if config is None:
        config = PathConfig(dt=0.01, jump_threshold=min(1.0, 0.5 * min(abs(lo), abs(hi))))
    h = config.threshold(params)
    if min(abs(lo), abs(hi)) <= h:
        raise ValueError("J must lie beyond the big-jump threshold")
    _, dt, h, rate, sig2 = config.resolve(params)
    rng = check_rng(rng)
    size = np.empty(n)
    func = np.empty(n)
    nu = np.empty(n)
    K.first_jump_batch(kernel_seed(rng), int(n), params.alpha, dt, h, rate, sig2, lo, hi, size, func, nu)
    return size, func, nu


def jump_independence_check(params, J, n, rng=None, functional=None, config=None, min_cell=5):
    """Chi-square test that the first J-jump size is independent of the path before it.

    The jump size is split at its median and crossed with the pre-jump
    functional (by default ``sign(X)`` at half the jump time). A constant
    functional yields p-value 1. Also returns a KS p-value comparing the
    sizes with the normalised Levy density restricted to J.
    """
    params = _as_params(params)
    size, func, nu = first_jump_records(params, J, n, rng, config)
    if functional is not None:
        func = np.asarray(functional(size, func, nu), dtype=float)
    big = size > np.median(size)
    f_pos = func > np.median(func) if np.unique(func).size > 2 else func > 0
    table = np.array([[np.sum(big & f_pos), np.sum(big & ~f_pos)],
                      [np.sum(~big & f_pos), np.sum(~big & ~f_pos)]])
    if np.any(table.sum(axis=0) == 0) or np.any(table.sum(axis=1) == 0):
        chi2, p = 0.0, 1.0
    else:
        chi2, p = stats.chi2_contingency(table, correction=False)[:2]
    lo, hi = float(J[0]), float(J[1])
    alpha = params.alpha
    a, b = (lo, hi) if lo > 0 else (-hi, -lo)

    def restricted_cdf(y):
        y = np.abs(np.asarray(y))
        top = levy_tail_mass(params, a) - (levy_tail_mass(params, b) if math.isfinite(b) else 0.0)
        return (levy_tail_mass(params, a) - np.array([levy_tail_mass(params, v) for v in y])) / top

    ks_p = stats.kstest(np.abs(size), restricted_cdf).pvalue
    return JumpIndependenceReport(float(p), float(chi2), table, int(n), float(ks_p),
                                  bool(table.min() < min_cell))
