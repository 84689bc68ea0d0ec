"""Estimator wrappers: each route to ``u(x) = P{M >= x}`` behind ``fit`` / ``predict``.

``X`` is a 1-d array of positive levels (a column vector is accepted);
``predict`` returns the tail probability at each level.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_alpha, check_array_1d, check_count, check_positive
from .bvp import Grid, SolverConfig, solve_bvp
from .cbss import CbssConfig, estimate_tail, loglog_slope
from .feynman_kac import CandidateU, fk_fixed_point
from .levy_path import PathConfig
from .stable import StableParams


def _levels(X):
    x = check_array_1d(np.ravel(np.asarray(X, dtype=float)), "X")
    if np.any(x <= 0):
        raise ValueError("levels must be > 0")
    return x


def _loglog_interp(x, xs, ys, slope):
    # log-log interpolation inside the fitted range, fitted power law outside
    lx, lxs, lys = np.log(x), np.log(xs), np.log(ys)
    out = np.interp(lx, lxs, lys)
    lo, hi = lx < lxs[0], lx > lxs[-1]
    out[lo] = lys[0] + slope * (lx[lo] - lxs[0])
    out[hi] = lys[-1] + slope * (lx[hi] - lxs[-1])
    return np.exp(out)


class MonteCarloTail(BaseEstimator):
    """Direct particle simulation at the levels passed to ``fit``."""

    def __init__(self, alpha=1.0, n=100_000, dt=0.05, scheme="hybrid", jump_threshold=None,
                 progeny_cap=10**7, time_cap=np.inf, seed=0, workers=1):
        self.alpha = alpha
        self.n = n
        self.dt = dt
        self.scheme = scheme
        self.jump_threshold = jump_threshold
        self.progeny_cap = progeny_cap
        self.time_cap = time_cap
        self.seed = seed
        self.workers = workers

    def _config(self):
        path = PathConfig(self.dt, self.jump_threshold, self.scheme)
        return CbssConfig(StableParams(check_alpha(self.alpha)), path, self.progeny_cap, self.time_cap, self.seed)

    def fit(self, X, y=None):
        x = np.unique(_levels(X))
        self.estimates_ = estimate_tail(self._config(), x, check_count(self.n, "n"), self.workers)
        self.levels_ = x
        self.p_hat_ = np.array([e.p_hat for e in self.estimates_])
        if x.size >= 2 and np.all(self.p_hat_ > 0):
            self.slope_, self.slope_se_, self.constant_ = loglog_slope(self.estimates_)
        else:
            self.slope_, self.slope_se_, self.constant_ = -0.5 * self.alpha, np.nan, np.nan
        return self

    def predict(self, X):
        check_is_fitted(self, "estimates_")
        x = _levels(X)
        if np.any(self.p_hat_ <= 0):
            return np.interp(x, self.levels_, self.p_hat_)
        return _loglog_interp(x, self.levels_, self.p_hat_, self.slope_)


class BVPTail(BaseEstimator):
    """Solution of the half-line boundary value problem; ``fit`` ignores ``X``."""

    def __init__(self, alpha=1.0, L=1e4, nodes=400, x_min=1e-3, tol=1e-8, max_iters=60, damping=1.0):
        self.alpha = alpha
        self.L = L
        self.nodes = nodes
        self.x_min = x_min
        self.tol = tol
        self.max_iters = max_iters
        self.damping = damping

    def fit(self, X=None, y=None):
        grid = Grid.geometric(check_positive(self.L, "L"), self.nodes, self.x_min)
        cfg = SolverConfig(self.damping, self.tol, self.max_iters)
        self.solution_ = solve_bvp(StableParams(check_alpha(self.alpha)), grid, cfg)
        return self

    def predict(self, X):
        check_is_fitted(self, "solution_")
        return np.asarray(self.solution_(_levels(X)), dtype=float)


class FeynmanKacTail(BaseEstimator):
    """Fixed point of the Feynman-Kac map on a coarse node set.

    ``fit(X)`` uses the sorted levels in ``X`` as nodes. The start is the
    supersolution ``min(1, (4/alpha)(1+x)^(-alpha/2))``.
    """

    def __init__(self, alpha=1.0, iters=10, n_per_node=1000, dt=0.05, jump_threshold=0.5,
                 damping=0.5, seed=0):
        self.alpha = alpha
        self.iters = iters
        self.n_per_node = n_per_node
        self.dt = dt
        self.jump_threshold = jump_threshold
        self.damping = damping
        self.seed = seed

    def fit(self, X, y=None):
        alpha = check_alpha(self.alpha)
        xs = np.unique(_levels(X))
        start = np.minimum(1.0, (4.0 / alpha) * (1.0 + xs) ** (-0.5 * alpha))
        init = CandidateU(alpha, 0, xs, start, 1.0, 0.5 * alpha, 0.5 * alpha, 0.0)
        cfg = PathConfig(self.dt, self.jump_threshold)
        self.solution_ = fk_fixed_point(init, xs, self.iters, self.n_per_node, np.random.default_rng(self.seed),
                                        alpha, cfg, self.damping)
        self.candidate_ = CandidateU(alpha, 0, xs, self.solution_.values, 1.0, 0.5 * alpha, 0.5 * alpha, 0.0)
        self.std_err_ = self.solution_.info["std_err"]
        return self

    def predict(self, X):
        check_is_fitted(self, "candidate_")
        return np.asarray(self.candidate_(_levels(X)), dtype=float)
