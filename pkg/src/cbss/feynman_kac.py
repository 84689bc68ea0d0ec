"""Feynman-Kac representation ``u(x) = E^x exp(-1/2 int_0^tau u(X_s) ds)``, tau the entrance time of (-inf, 0]."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from sklearn.isotonic import IsotonicRegression

from . import _kernels as K
from ._validation import NumericalError, check_count, check_positive, check_rng, kernel_seed
from .bvp import GridFunction
from .levy_path import PathConfig
from .rng import chunk_sizes
from .stable import _as_params, levy_tail_mass

#: paths are dropped once exp(-psi/2) < exp(-PSI_CAP); their weight is negligible
PSI_CAP = 20.0


@dataclass(frozen=True)
class CandidateU:
    """A total function on the line: a grid table or the clipped power ``min(1, c x^(-alpha/2))``.

    Both forms equal ``left_value`` (normally 1) on ``x <= 0``.
    """

    alpha: float
    kind: int
    xs: np.ndarray = field(repr=False)
    vs: np.ndarray = field(repr=False)
    left_value: float = 1.0
    boundary_exponent: float = 0.0
    tail_exponent: float = 0.0
    coef: float = 0.0

    @classmethod
    def from_grid_function(cls, u):
        return cls(u.alpha, 0, np.ascontiguousarray(u.grid.nodes), np.ascontiguousarray(u.values, dtype=float),
                   float(u.left_value), u.boundary_exponent, float(u.far_field_exponent), 0.0)

    @classmethod
    def ansatz(cls, alpha, coef=None):
        """``min(1, coef x^(-alpha/2))``; ``coef`` defaults to ``sqrt(2/alpha)``."""
        alpha = _as_params(alpha).alpha
        if coef is None:
            coef = math.sqrt(2.0 / alpha)
        coef = check_positive(coef, "coef", allow_zero=True)
        return cls(alpha, 1, np.ones(1), np.ones(1), 1.0, 0.0, 0.5 * alpha, coef)

    @classmethod
    def coerce(cls, u):
        if isinstance(u, cls):
            return u
        if isinstance(u, GridFunction):
            return cls.from_grid_function(u)
        raise TypeError("candidate must be a CandidateU or a GridFunction")

    def kernel_args(self):
        return (self.kind, self.xs, self.vs, float(self.left_value), float(self.boundary_exponent),
                float(self.tail_exponent), float(self.coef))

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = np.array([K.u_eval(v, *self.kernel_args()) for v in y.ravel()]).reshape(y.shape)
        return out if out.ndim else float(out)

    def scaled(self, factor):
        """``min(1, factor * u)`` on ``x > 0``, unchanged on ``x <= 0``."""
        if self.kind == 1:
            return CandidateU.ansatz(self.alpha, self.coef * factor)
        return CandidateU(self.alpha, 0, self.xs, np.minimum(1.0, factor * self.vs), self.left_value,
                          self.boundary_exponent, self.tail_exponent, 0.0)


@dataclass(frozen=True)
class FKEstimate:
    """``mean`` counts a censored path with its weight at the horizon; ``mean_low`` counts it as 0."""

    x: float
    n: int
    mean: float
    std_err: float
    censored_count: int
    mean_low: float = float("nan")

    @property
    def censored_weight(self):
        return self.mean - self.mean_low

    @property
    def flagged(self):
        """True when censored paths carry more than 0.1% of the estimate."""
        return self.censored_weight > 1e-3 * max(self.mean, 1e-300)


def path_integral(path, u, t_stop):
    """``int_0^t_stop u(X_s) ds`` on a skeleton.

    Between two nodes the integrand is the trapezoid of ``u`` at the left
    value and the right-hand left limit, so across a recorded big jump the
    path is held flat until the jump time.
    """
    t_stop = check_positive(t_stop, "t_stop", allow_zero=True)
    if t_stop > path.horizon * (1 + 1e-12):
        raise ValueError("t_stop exceeds the path horizon")
    u = u if callable(u) else CandidateU.coerce(u)
    t = path.times
    fv = np.asarray(u(path.values), dtype=float)
    fl = np.asarray(u(path.left_limits()), dtype=float)
    k = int(np.searchsorted(t, t_stop, side="right")) - 1
    total = float(np.sum(0.5 * np.diff(t[: k + 1]) * (fv[:k] + fl[1 : k + 1])))
    if k < t.size - 1 and t_stop > t[k]:
        frac = (t_stop - t[k]) / (t[k + 1] - t[k])
        end = fv[k] + frac * (fl[k + 1] - fv[k])
        total += 0.5 * (t_stop - t[k]) * (fv[k] + end)
    return total


def _fk_raw(x, u, params, path_cfg, n, rng, horizon, psi_cap, chunk):
    code, dt, h, rate, sig2 = path_cfg.resolve(params)
    psi = np.empty(n)
    status = np.empty(n, dtype=np.int64)
    i = 0
    for m in chunk_sizes(n, chunk):
        K.fk_batch(kernel_seed(rng), m, float(x), params.alpha, params.char_scale, code, dt, h, rate, sig2,
                   float(horizon), float(psi_cap), *u.kernel_args(), psi[i:i + m], status[i:i + m])
        i += m
    return psi, status


def fk_estimate(x, u, stable, path_cfg=None, n=10_000, rng=None, horizon=None, horizon_mult=50.0,
                psi_cap=PSI_CAP, chunk=5_000):
    """Monte Carlo value of ``E^x exp(-Psi_tau / 2)`` for the candidate ``u``.

    The horizon defaults to ``horizon_mult * x^alpha``. Paths whose weight
    drops below ``exp(-psi_cap)`` are stopped and contribute that weight.
    """
    x = check_positive(x, "x")
    n = check_count(n, "n")
    params = _as_params(stable)
    u = CandidateU.coerce(u)
    rng = check_rng(rng)
    path_cfg = path_cfg or PathConfig()
    if horizon is None:
        horizon = horizon_mult * x**params.alpha
    psi, status = _fk_raw(x, u, params, path_cfg, n, rng, horizon, psi_cap, chunk)
    w = np.exp(-0.5 * psi)
    cens = status == 1
    low = np.where(cens, 0.0, w)
    return FKEstimate(x, n, float(w.mean()), float(w.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf"),
                      int(cens.sum()), float(low.mean()))


def fk_image(u, xs, stable, path_cfg=None, n=2_000, rng=None, **kw):
    """FK estimates of ``u`` at each point of ``xs``."""
    rng = check_rng(rng)
    return [fk_estimate(float(x), u, stable, path_cfg, n, rng, **kw) for x in xs]


def fk_fixed_point(initial, grid, iters, n_per_node, rng=None, stable=None, path_cfg=None,
                   damping=0.5, tol=None, **kw):
    """Iterate ``u <- (1 - damping) u + damping * iso(FK(u))`` on the nodes of ``grid``.

    ``iso`` is a decreasing isotonic regression weighted by the inverse
    squared standard errors. Stops early once the sup-distance between
    successive iterates falls below ``tol`` (default: twice the largest
    standard error). Raises :class:`NumericalError` if the distance grows
    three iterations in a row.
    """
    iters = check_count(iters, "iters")
    n_per_node = check_count(n_per_node, "n_per_node")
    rng = check_rng(rng)
    cand = CandidateU.coerce(initial)
    params = _as_params(stable if stable is not None else cand.alpha)
    xs = np.asarray(grid.nodes if hasattr(grid, "nodes") else grid, dtype=float)
    cur = np.asarray(cand(xs), dtype=float)
    iso = IsotonicRegression(increasing=False, y_min=0.0, y_max=1.0)
    dists, raw_hist, smooth_hist = [], [], []
    se = np.zeros_like(xs)
    growth = 0
    for it in range(iters):
        ests = fk_image(cand, xs, params, path_cfg, n_per_node, rng, **kw)
        raw = np.array([e.mean for e in ests])
        se = np.array([max(e.std_err, 1e-12) for e in ests])
        smooth = iso.fit_transform(xs, raw, sample_weight=1.0 / se**2)
        new = (1.0 - damping) * cur + damping * smooth
        d = float(np.max(np.abs(new - cur)))
        raw_hist.append(raw)
        smooth_hist.append(smooth)
        if dists and d > dists[-1]:
            growth += 1
        else:
            growth = 0
        dists.append(d)
        cur = new
        if growth >= 3:
            raise NumericalError("fixed-point iteration is not contracting",
                                 {"sup_distances": dists, "iterate": cur, "raw": raw_hist})
        cand = CandidateU(params.alpha, 0, np.ascontiguousarray(xs), np.ascontiguousarray(cur),
                          1.0, 0.5 * params.alpha, 0.5 * params.alpha, 0.0)
        limit = 2.0 * float(se.max()) if tol is None else tol
        if d < limit:
            break
    out = GridFunction(_LooseGrid(xs), cur, params.alpha)
    out.info = {"std_err": se, "sup_distances": dists, "raw": raw_hist, "smoothed": smooth_hist,
                "iterations": len(dists)}
    return out


@dataclass(frozen=True)
class _LooseGrid:
    # a node set without the solver's grid requirements (FK grids are coarse)
    nodes: np.ndarray

    @property
    def L(self):
        return float(self.nodes[-1])

    @property
    def size(self):
        return self.nodes.size


def exp_jump_expectation(rate, theta):
    """``E exp(-theta nu) = rate / (rate + theta)`` for ``nu ~ Exp(rate)``."""
    rate = check_positive(rate, "rate")
    theta = check_positive(theta, "theta", allow_zero=True)
    return rate / (rate + theta)


def asymptotic_tail_constant(alpha, x, delta):
    """Solve ``u = E exp(-nu u/2)`` with ``nu ~ Exp(lambda[x(1-2 delta), inf))``.

    Returns ``(u, x^(alpha/2) u)``. The root is found by bracketing; the
    closed form ``-L + sqrt(L^2 + 2L)`` is only used by the tests.
    """
    params = _as_params(alpha)
    x = check_positive(x, "x")
    if not 0.0 <= delta < 0.5:
        raise ValueError("delta must lie in [0, 1/2)")
    lam = levy_tail_mass(params, x * (1.0 - 2.0 * delta))
    u = optimize.brentq(lambda v: v - exp_jump_expectation(lam, 0.5 * v), 1e-300, 1.0, xtol=1e-300, rtol=1e-15)
    return u, x ** (0.5 * params.alpha) * u


@dataclass(frozen=True)
class MartingaleReport:
    x: float
    times: np.ndarray
    means: np.ndarray
    std_errs: np.ndarray
    initial: float
    max_deviation_se: float
    passed: bool


def martingale_check(u, x, t_list, n, rng=None, stable=None, path_cfg=None, psi_cap=PSI_CAP,
                     threshold=3.0, chunk=20_000):
    """Check that ``E Z_{t ^ tau}`` stays at ``u(x)`` for ``Z_t = exp(-Psi_t/2) u(X_t)``.

    The deviation at each time is measured in standard errors of the
    difference ``Z_t - Z_0`` (``Z_0 = u(x)`` is deterministic).
    """
    x = check_positive(x, "x")
    n = check_count(n, "n")
    cand = CandidateU.coerce(u)
    params = _as_params(stable if stable is not None else cand.alpha)
    rng = check_rng(rng)
    path_cfg = path_cfg or PathConfig()
    times = np.sort(np.asarray(t_list, dtype=float))
    if times[0] < 0:
        raise ValueError("times must be >= 0")
    code, dt, h, rate, sig2 = path_cfg.resolve(params)
    z = np.empty((n, times.size))
    i = 0
    for m in chunk_sizes(n, chunk):
        K.martingale_batch(kernel_seed(rng), m, x, params.alpha, params.char_scale, code, dt, h, rate, sig2,
                           float(psi_cap), *cand.kernel_args(), times, z[i:i + m])
        i += m
    z0 = float(cand(np.array(x)))
    diff = z - z0  # exactly 0 wherever a path still sits at its start
    shift = diff.mean(axis=0)
    means = z0 + shift
    ses = diff.std(axis=0, ddof=1) / math.sqrt(n)
    gap = np.abs(shift)
    dev = np.where(ses > 0, gap / np.where(ses > 0, ses, 1.0), np.where(gap > 0, np.inf, 0.0))
    worst = float(dev.max())
    return MartingaleReport(x, times, means, ses, z0, worst, worst <= threshold)
