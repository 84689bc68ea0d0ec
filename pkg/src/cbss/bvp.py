"""Fractional Laplacian on the half-line and the nonlinear boundary value problem.

The operator is ``L u(x) = int (u(x) - u(y)) |x - y|^(-1-alpha) dy`` (principal
value). Grid functions are extended by ``left_value`` on ``y <= 0``, by
``left + (u_0 - left)(y/x_0)^(alpha/2)`` on ``[0, x_0]`` and by the power law
``u_last (y/L)^(-p)`` beyond the cutoff ``L``. With these extensions the
discrete operator is affine in the node values: ``L u = W u + left * b``.

Near the singularity each row integrates a degree-4 local interpolant
exactly against the kernel (the odd moment is a principal value); farther
cells use 8-point Gauss-Legendre on cubic interpolants, and the two
unbounded pieces have closed forms in terms of ``2F1``.
"""

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from ._validation import NumericalError, check_alpha, check_count, check_positive

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class Grading(enum.Enum):
    Uniform = "uniform"
    Geometric = "geometric"


@dataclass(frozen=True)
class Grid:
    nodes: np.ndarray
    grading: Grading = Grading.Geometric

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "grading", Grading(self.grading))
        if nodes.ndim != 1 or nodes.size < 6:
            raise ValueError("a grid needs at least 6 nodes")
        if nodes[0] <= 0:
            raise ValueError("the first node must be > 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if nodes[1] >= 2 * nodes[0]:
            raise ValueError("the first cell must be shorter than the first node")

    @property
    def L(self):
        return float(self.nodes[-1])

    @property
    def size(self):
        return self.nodes.size

    @property
    def ratio(self):
        """Growth factor of a geometric grid (``None`` for uniform grids)."""
        if self.grading is Grading.Uniform:
            return None
        return float(self.nodes[1] / self.nodes[0])

    @classmethod
    def geometric(cls, L, n, x_min=1e-3):
        L = check_positive(L, "L")
        x_min = check_positive(x_min, "x_min")
        n = check_count(n, "n", minimum=6)
        if x_min >= L:
            raise ValueError("x_min must be below L")
        return cls(np.geomspace(x_min, L, n), Grading.Geometric)

    @classmethod
    def uniform(cls, L, n):
        L = check_positive(L, "L")
        n = check_count(n, "n", minimum=6)
        # spacing h with the first node at 1.5 h, so the first cell is shorter
        # than the first node and the last node lands on L
        h = L / (n + 0.5)
        return cls(h * (1.5 + np.arange(n)), Grading.Uniform)

    def refined(self):
        """Grid with every cell halved (same grading, geometric ratio square-rooted)."""
        if self.grading is Grading.Geometric:
            return Grid.geometric(self.L, 2 * self.size - 1, self.nodes[0])
        return Grid.uniform(self.L, 2 * self.size)


@dataclass
class GridFunction:
    """Node values of ``u`` plus the rules that extend it to the whole line."""

    grid: Grid
    values: np.ndarray
    alpha: float
    left_value: float = 1.0
    far_field_exponent: float | None = None
    info: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.alpha = check_alpha(self.alpha)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.nodes.shape:
            raise ValueError("values must match the grid")
        if self.far_field_exponent is None:
            self.far_field_exponent = 0.5 * self.alpha

    @property
    def far_field_coeff(self):
        return float(self.values[-1] * self.grid.L**self.far_field_exponent)

    @property
    def boundary_exponent(self):
        return 0.5 * self.alpha

    def __call__(self, y):
        """Evaluate the extension; linear in ``log x`` between nodes."""
        y = np.asarray(y, dtype=float)
        xs, vs = self.grid.nodes, self.values
        out = np.empty_like(y)
        left = y <= 0
        head = (y > 0) & (y < xs[0])
        tail = y >= xs[-1]
        mid = ~(left | head | tail)
        out[left] = self.left_value
        out[head] = self.left_value + (vs[0] - self.left_value) * (y[head] / xs[0]) ** self.boundary_exponent
        out[tail] = vs[-1] * (y[tail] / xs[-1]) ** (-self.far_field_exponent)
        out[mid] = np.interp(np.log(y[mid]), np.log(xs), vs)
        return out if out.ndim else float(out)

    def tail_constant(self, x):
        """``x^(alpha/2) u(x)``, which tends to ``sqrt(2/alpha)`` for the solution."""
        return float(x ** (0.5 * self.alpha) * self(np.array(float(x))))


@dataclass(frozen=True)
class SolverConfig:
    damping: float = 1.0
    tol: float = 1e-8
    max_iters: int = 60
    quad_tol: float = 1e-10

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        check_positive(self.tol, "tol")
        check_positive(self.quad_tol, "quad_tol")
        check_count(self.max_iters, "max_iters")


# ------------------------------------------------------------------ assembly


def _moment(k, alpha, l, r):
    # int_{-l}^{r} s^k |s|^(-1-alpha) ds (principal value for k = 1)
    e = k - alpha
    if k == 1:
        z = math.log(r / l)
        ez = e * z
        return l**e * z * (math.expm1(ez) / ez if abs(ez) > 1e-12 else 1.0 + 0.5 * ez)
    return (r**e + (-1) ** k * l**e) / e


def _stencil(i, n):
    lo = min(max(i - 2, 0), n - 5)
    return np.arange(lo, lo + 5)


def _window(i, x):
    n = x.size
    if i == 0:
        l, r = x[1] - x[0], x[2] - x[0]
    elif i == 1:
        l, r = x[1] - x[0], x[3] - x[1]
    else:
        l = x[i] - x[i - 2]
        r = x[min(i + 2, n - 1)] - x[i]
    return l, r


def _lagrange_weights(nodes, pts):
    # weights[m, k]: value at pts[m] of the k-th Lagrange basis polynomial
    w = np.ones((pts.size, nodes.size))
    for k in range(nodes.size):
        for j in range(nodes.size):
            if j != k:
                w[:, k] *= (pts - nodes[j]) / (nodes[k] - nodes[j])
    return w


def assemble(grid, alpha, tail_exponent=None, boundary_exponent=None):
    """Return ``(W, b)`` with ``L u = W @ u + left_value * b`` on nodes ``0..N-2``."""
    alpha = check_alpha(alpha)
    p = 0.5 * alpha if tail_exponent is None else float(tail_exponent)
    p0 = 0.5 * alpha if boundary_exponent is None else float(boundary_exponent)
    x = grid.nodes
    n = x.size
    L = x[-1]
    rows = n - 1
    W = np.zeros((rows, n))
    b = np.zeros(rows)
    wl = np.empty(rows)
    wr = np.empty(rows)
    for i in range(rows):
        l, r = _window(i, x)
        wl[i], wr[i] = x[i] - l, x[i] + r
        W[i, i] += (l ** (-alpha) + r ** (-alpha)) / alpha
        b[i] -= x[i] ** (-alpha) / alpha
        # exact moments of the local quartic: a_k = (V^-1 u)_k
        st = _stencil(i, n)
        s = x[st] - x[i]
        V = np.vander(s, 5, increasing=True)
        Vinv = np.linalg.inv(V)
        mom = np.array([_moment(k, alpha, l, r) for k in range(1, 5)])
        W[i, st] -= mom @ Vinv[1:]
        # first piece [0, min(x_0, window left)]
        top = min(x[0], wl[i])
        g0 = ((x[i] - top) ** (-alpha) - x[i] ** (-alpha)) / alpha
        g1 = (x[0] ** (-p0) * top ** (p0 + 1.0) / (p0 + 1.0) * x[i] ** (-1.0 - alpha)
              * special.hyp2f1(1.0 + alpha, p0 + 1.0, p0 + 2.0, top / x[i]))
        W[i, 0] -= g1
        b[i] -= g0 - g1
        # power tail beyond L
        W[i, n - 1] -= L ** (-alpha) / (p + alpha) * special.hyp2f1(1.0 + alpha, p + alpha, p + alpha + 1.0, x[i] / L)
    # interior cells away from each row's window
    for j in range(n - 1):
        a, c = x[j], x[j + 1]
        pts = 0.5 * (c - a) * _GL_X + 0.5 * (a + c)
        wts = 0.5 * (c - a) * _GL_W
        lo = min(max(j - 1, 0), n - 4)
        st = np.arange(lo, lo + 4)
        interp = _lagrange_weights(x[st], pts)
        outside = (c <= wl + 1e-14 * c) | (a >= wr - 1e-14 * a)
        idx = np.nonzero(outside)[0]
        if idx.size == 0:
            continue
        ker = np.abs(x[idx, None] - pts[None, :]) ** (-1.0 - alpha) * wts[None, :]
        W[np.ix_(idx, st)] -= ker @ interp
    return W, b


class Operator:
    """Cached discrete fractional Laplacian for one grid and exponent."""

    def __init__(self, grid, alpha, tail_exponent=None):
        self.grid = grid
        self.alpha = check_alpha(alpha)
        self.tail_exponent = 0.5 * self.alpha if tail_exponent is None else float(tail_exponent)
        self.W, self.b = assemble(grid, self.alpha, self.tail_exponent)

    def apply(self, values, left_value=1.0):
        return self.W @ values + left_value * self.b


def frac_laplacian_apply(u, x):
    """``(-Delta)^(alpha/2) u`` at the grid node ``x`` (any node except the last)."""
    k = np.searchsorted(u.grid.nodes, x)
    if k >= u.grid.size or not np.isclose(u.grid.nodes[k], x, rtol=1e-12, atol=0):
        raise ValueError(f"{x} is not a grid node")
    if k == u.grid.size - 1:
        raise ValueError("the operator is not evaluated at the cutoff node")
    op = Operator(u.grid, u.alpha, u.far_field_exponent)
    return float(op.apply(u.values, u.left_value)[k])


def residual(u, op=None, scaled=False):
    """``L u + u^2/2`` on nodes ``0..N-2``, optionally times :func:`residual_scale`."""
    if op is None:
        op = Operator(u.grid, u.alpha, u.far_field_exponent)
    R = op.apply(u.values, u.left_value) + 0.5 * u.values[:-1] ** 2
    return R * residual_scale(u.grid, u.alpha)[:-1] if scaled else R


# ------------------------------------------------------------------- solver


def residual_scale(grid, alpha):
    """Row weights ``min(1, x^alpha)`` used for the convergence test.

    Rows near the origin carry entries of size ``(cell width)^-alpha`` that
    cancel to O(1), so their round-off floor is far above 1e-8; scaling by
    ``x^alpha`` (the size of the boundary term) puts every row on the same
    footing. Rows with ``x >= 1`` are unchanged.
    """
    return np.minimum(1.0, grid.nodes**alpha)


def supersolution_start(grid, alpha, C2=None):
    """``min(1, C2 (1+x)^(-alpha/2))``; ``C2 = 4/alpha`` exceeds the ``2/alpha`` needed at large x."""
    if C2 is None:
        C2 = 4.0 / alpha
    return np.minimum(1.0, C2 * (1.0 + grid.nodes) ** (-0.5 * alpha))


def solve_bvp(stable, grid, cfg=None, initial=None):
    """Solve ``(-Delta)^(alpha/2) u + u^2/2 = 0`` on ``x > 0`` with ``u = 1`` on ``x <= 0``.

    Each step solves the linearisation ``(W + diag u) d = -F(u)`` and moves by
    ``damping * d``. The last node carries the far-field closure
    ``u_last = u_{N-2} (x_{N-2}/L)^(alpha/2)`` instead of the equation.
    Starting from a supersolution the iterates decrease; violations beyond
    round-off are recorded in ``info['monotone_violation']``.
    """
    alpha = stable.alpha if hasattr(stable, "alpha") else check_alpha(stable)
    cfg = cfg or SolverConfig()
    op = Operator(grid, alpha)
    x = grid.nodes
    n = x.size
    closure = (x[-2] / x[-1]) ** (0.5 * alpha)
    scale = residual_scale(grid, alpha)
    u = supersolution_start(grid, alpha) if initial is None else np.array(initial, dtype=float)
    history = []
    worst_rise = 0.0
    clamped = False
    for it in range(cfg.max_iters + 1):
        F = np.empty(n)
        F[:-1] = op.W @ u + op.b + 0.5 * u[:-1] ** 2
        F[-1] = u[-1] - closure * u[-2]
        res = float(np.max(np.abs(F * scale)))
        history.append(res)
        if res < cfg.tol:
            out = GridFunction(grid, u, alpha)
            out.info = {"iterations": it, "residual_history": history, "residual": F * scale, "raw_residual": F,
                        "monotone_violation": worst_rise, "clamped": clamped}
            return out
        if it == cfg.max_iters:
            break
        J = np.zeros((n, n))
        J[:-1] = op.W
        J[np.arange(n - 1), np.arange(n - 1)] += u[:-1]
        J[-1, -1] = 1.0
        J[-1, -2] = -closure
        d = np.linalg.solve(J, -F)
        new = u + cfg.damping * d
        worst_rise = max(worst_rise, float(np.max(new - u)))
        if np.any(new <= 0) or np.any(new > 1):
            clamped = True
            warnings.warn("iterate left (0, 1]; clamping", RuntimeWarning, stacklevel=2)
            new = np.clip(new, np.finfo(float).tiny, 1.0)
        u = new
    raise NumericalError("nonlinear solve did not reach the residual target",
                         {"residual_history": history, "tol": cfg.tol, "max_iters": cfg.max_iters})


# --------------------------------------------------------------- checks


@dataclass(frozen=True)
class ComparisonReport:
    kind: str
    passed: bool
    worst_violation: float
    worst_node: float
    residual: np.ndarray = field(repr=False)


def comparison_check(candidate, kind, tol=0.0):
    """Sign check of ``L U + U^2/2`` on nodes ``0..N-2`` and of ``U`` on ``x <= 0``.

    ``kind="super"`` needs the residual ``>= -tol`` and ``left_value >= 1``;
    ``kind="sub"`` needs the residual ``<= tol`` and ``left_value <= 1``.
    """
    kind = str(kind).lower()
    if kind not in ("super", "sub"):
        raise ValueError("kind must be 'super' or 'sub'")
    R = residual(candidate)
    sign = 1.0 if kind == "super" else -1.0
    viol = np.maximum(-sign * R, 0.0)
    k = int(np.argmax(viol))
    worst = float(viol[k])
    boundary_ok = candidate.left_value >= 1.0 if kind == "super" else candidate.left_value <= 1.0
    return ComparisonReport(kind, bool(worst <= tol and boundary_ok), worst,
                            float(candidate.grid.nodes[k]), R)


def shifted_w(grid, alpha, C):
    """Candidate ``C w(x+1) = C (2+x)^(-alpha/2)`` on ``grid`` with ``U = 1`` on ``x <= 0``."""
    return GridFunction(grid, C * (2.0 + grid.nodes) ** (-0.5 * alpha), alpha)


def _quad(f, a, b, tol, points=None):
    val, err = integrate.quad(f, a, b, epsabs=tol, epsrel=tol, limit=400, points=points)[:2]
    if not math.isfinite(val) or err > max(1e3 * tol, 1e-8) * max(1.0, abs(val)):
        raise NumericalError("quadrature did not converge", {"a": a, "b": b, "estimate": val, "abs_error": err})
    return val


def _pv_power_integral(alpha, x, f, tol):
    # int_0^inf (f(x) - f(y)) |x - y|^(-1-alpha) dy, f smooth on (0, inf) with
    # an integrable singularity allowed at 0; near y = x the symmetric pairs
    # (second difference) remove the singularity; f must vanish at infinity
    h = 0.5 * x
    fx = f(x)

    def pair(s):
        if s < 1e-4 * x:
            # Taylor: 2f(x) - f(x+s) - f(x-s) = -f''(x) s^2 - f''''(x) s^4 / 12
            eps = 1e-3 * x
            d2 = (f(x + eps) - 2 * fx + f(x - eps)) / eps**2
            return -d2 * s ** (1.0 - alpha)
        return (2.0 * fx - f(x + s) - f(x - s)) * s ** (-1.0 - alpha)

    near = _quad(pair, 0.0, h, tol)
    left = _quad(lambda y: (fx - f(y)) * (x - y) ** (-1.0 - alpha), 0.0, h, tol)
    right = 0.0
    lo = x + h
    for hi in (2 * x, 4 * x, 16 * x):
        right += _quad(lambda y: (fx - f(y)) * (y - x) ** (-1.0 - alpha), lo, hi, tol)
        lo = hi
    # [16x, inf) mapped to t = x/y in (0, 1/16], with the t^(alpha-1) factor
    # handed to QUADPACK's algebraic weight
    val, err = integrate.quad(lambda t: (fx - (f(x / t) if t > 0 else 0.0)) * (1.0 - t) ** (-1.0 - alpha), 0.0, x / lo,
                              weight="alg", wvar=(alpha - 1.0, 0.0), epsabs=tol, epsrel=tol, limit=400)
    if not math.isfinite(val) or err > max(1e3 * tol, 1e-8) * max(1.0, abs(val)):
        raise NumericalError("quadrature did not converge", {"a": lo, "b": math.inf, "abs_error": err})
    right += x ** (-alpha) * val
    return near + left + right


def w_operator(alpha, x, quad_tol=1e-10):
    """``(-Delta)^(alpha/2) w(x)`` for ``w = (1+x)^(-alpha/2)`` on ``x > 0`` and ``w = 1`` on ``x <= 0``.

    Evaluated by adaptive quadrature, independent of any grid.
    """
    alpha = check_alpha(alpha)
    x = check_positive(x, "x")
    p = 0.5 * alpha

    def w(y):
        return (1.0 + y) ** (-p)

    inner = _pv_power_integral(alpha, x, w, quad_tol)
    return inner + (w(x) - 1.0) * x ** (-alpha) / alpha


def w_asymptotic_ratio(alpha, x, quad_tol=1e-10):
    """``alpha x^alpha (-(-Delta)^(alpha/2) w)(x)``; equals 1 when the left-boundary term dominates."""
    return -alpha * x**alpha * w_operator(alpha, x, quad_tol)


def F_value(alpha, x, quad_tol=1e-10):
    """``F(x) = pv int_0^inf (x^(-alpha/2) - y^(-alpha/2)) |x - y|^(-1-alpha) dy``."""
    alpha = check_alpha(alpha)
    x = check_positive(x, "x")
    p = 0.5 * alpha
    return _pv_power_integral(alpha, x, lambda y: y ** (-p), quad_tol)


@dataclass(frozen=True)
class ScalingReport:
    alpha: float
    x: float
    lambda_: float
    F_x: float
    F_scaled: float
    ratio: float
    expected: float
    rel_error: float


def f_scaling_check(alpha, x, lambda_, quad_tol=1e-10):
    """Compare ``F(lambda x) / F(x)`` with ``lambda^(-3 alpha/2)``."""
    x = check_positive(x, "x")
    lambda_ = check_positive(lambda_, "lambda_")
    fx = F_value(alpha, x, quad_tol)
    fl = fx if lambda_ == 1.0 else F_value(alpha, lambda_ * x, quad_tol)
    expected = lambda_ ** (-1.5 * alpha)
    ratio = fl / fx
    return ScalingReport(alpha, x, lambda_, fx, fl, ratio, expected, abs(ratio / expected - 1.0))
