"""Symmetric alpha-stable law normalised by its Levy measure.

The jump intensity is fixed to ``|y|**(-1 - alpha) dy``. Everything else
(the characteristic exponent scale, sampler scale, tails) is derived from
that, so ``levy_tail_mass(A) = A**-alpha / alpha`` holds exactly and
``E exp(i theta X_t) = exp(-t * c_alpha * |theta|**alpha)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from ._validation import NumericalError, check_alpha, check_positive, check_rng

#: relative accuracy target of :func:`stable_tail`; tails are reliable to
#: about 1e-6 absolute, degrading for alpha < 0.2 or alpha > 1.95
TAIL_TOL = 1e-6


def char_exponent_scale(alpha):
    """Return ``c_alpha = 2 * int_0^inf (1 - cos u) u**(-1-alpha) du``.

    Evaluated as ``pi / (Gamma(1 + alpha) sin(pi alpha / 2))``, which equals
    ``2 Gamma(2-alpha) cos(pi alpha/2) / (alpha (1-alpha))`` away from 1 and
    has no removable singularity at ``alpha = 1`` (where it is pi).
    """
    alpha = check_alpha(alpha)
    if alpha == 1.0:
        return math.pi
    return math.pi / (math.gamma(1.0 + alpha) * math.sin(0.5 * math.pi * alpha))


@dataclass(frozen=True)
class StableParams:
    """Exponent of the symmetric stable motion, with derived constants cached."""

    alpha: float
    char_scale: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        alpha = check_alpha(self.alpha)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "char_scale", char_exponent_scale(alpha))

    def scale_at(self, t):
        """Scale ``sigma`` with ``X_t = sigma * Z`` and ``E exp(i theta Z) = exp(-|theta|^alpha)``."""
        return (self.char_scale * t) ** (1.0 / self.alpha)


@dataclass(frozen=True)
class StableSample:
    value: float
    t: float


def _as_params(params):
    return params if isinstance(params, StableParams) else StableParams(params)


def levy_tail_mass(params, A):
    """One-sided Levy measure ``lambda[A, inf) = A**-alpha / alpha``."""
    params = _as_params(params)
    A = check_positive(A, "A", allow_inf=True)
    if math.isinf(A):
        return 0.0
    return A ** (-params.alpha) / params.alpha


def standard_stable(alpha, size, rng):
    """Chambers-Mallows-Stuck draws with characteristic function ``exp(-|theta|^alpha)``."""
    v = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, size)
    if alpha == 1.0:
        return np.tan(v)
    w = rng.standard_exponential(size)
    return (
        np.sin(alpha * v)
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha)
    )


def sample_stable(params, t, rng=None, size=None):
    """Draw ``X_t``. Returns a :class:`StableSample`, or an array when ``size`` is given."""
    params = _as_params(params)
    t = check_positive(t, "t")
    rng = check_rng(rng)
    if size is None:
        z = standard_stable(params.alpha, 1, rng)[0]
        return StableSample(float(params.scale_at(t) * z), t)
    return params.scale_at(t) * standard_stable(params.alpha, size, rng)


def _tail_series(z, alpha, tol=1e-16):
    # sum_k (-1)^(k+1) Gamma(alpha k) sin(pi alpha k / 2) / (pi k!) z^(-alpha k);
    # convergent for alpha < 1, asymptotic above. None if the terms stall.
    lz = alpha * math.log(z)
    total = 0.0
    prev = math.inf
    for k in range(1, 200):
        mag = math.exp(math.lgamma(alpha * k) - math.lgamma(k + 1.0) - k * lz) / math.pi
        if mag > prev:
            return None
        total += (-1) ** (k + 1) * math.sin(0.5 * math.pi * alpha * k) * mag
        if mag < tol * max(total, 1e-300):
            return total
        prev = mag
    return None


def _standard_tail(z, alpha):
    # P(Z >= z) for z > 0 by Gil-Pelaez inversion. The head of the integral
    # is taken in s = log(theta), which copes with both very long periods
    # (small z) and slow decay of exp(-theta^alpha) (small alpha); whatever
    # remains past four periods goes to QUADPACK's Fourier routine (QAWF).
    if alpha == 1.0:
        return 0.5 - math.atan(z) / math.pi
    if z**alpha >= 20.0:
        val = _tail_series(z, alpha)
        if val is not None:
            return val
    theta_max = 50.0 ** (1.0 / alpha)  # exp(-theta^alpha) < 2e-22 beyond
    cut = min(8.0 * math.pi / z, theta_max)
    s_lo = math.log(1e-14 / z)  # the neglected piece is below z * theta = 1e-14

    def head(s):
        th = math.exp(s)
        return math.sin(z * th) * math.exp(-(th**alpha))

    i1, e1 = integrate.quad(head, s_lo, math.log(cut), limit=500, epsabs=1e-13, epsrel=1e-12, full_output=1)[:2]
    i2 = e2 = 0.0
    if cut < theta_max:
        out = integrate.quad(lambda th: math.exp(-(th**alpha)) / th, cut, np.inf, weight="sin", wvar=z,
                             limlst=200, epsabs=1e-13, full_output=1)
        i2, e2 = out[:2]
    err = (e1 + e2) / math.pi
    if not (math.isfinite(i1 + i2) and err <= TAIL_TOL):
        raise NumericalError(
            "Fourier inversion of the stable tail did not converge",
            {"alpha": alpha, "z": z, "abs_error": err},
        )
    return 0.5 - (i1 + i2) / math.pi


def stable_tail(params, t, x):
    """``P{X_t >= x}`` by numerical Fourier inversion of the characteristic function."""
    params = _as_params(params)
    t = check_positive(t, "t")
    x = float(x)
    if x == 0.0:
        return 0.5
    if math.isinf(x):
        return 0.0 if x > 0 else 1.0
    z = x / params.scale_at(t)
    if z < 0:
        return 1.0 - _standard_tail(-z, params.alpha)
    return _standard_tail(z, params.alpha)


def stable_cdf(params, t, x):
    """``P{X_t <= x}``; vectorised over ``x`` for goodness-of-fit tests."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.array([1.0 - stable_tail(params, t, xi) for xi in xs])
    return out if np.ndim(x) else float(out[0])


def char_scale_by_quadrature(alpha):
    """Direct quadrature of ``2 int_0^inf (1 - cos u) u^(-1-alpha) du``.

    Independent of :func:`char_exponent_scale`; used to cross-check it.
    """
    alpha = check_alpha(alpha)
    # (1 - cos u) ~ u^2/2 near 0, so split off [0, 1] and integrate the
    # oscillatory remainder with the cosine weight.
    head = integrate.quad(
        lambda u: 2.0 * math.sin(0.5 * u) ** 2 * u ** (-1.0 - alpha), 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200
    )[0]
    flat = 1.0 / alpha  # int_1^inf u^(-1-alpha) du
    osc = integrate.quad(lambda u: u ** (-1.0 - alpha), 1.0, np.inf, weight="cos", wvar=1.0, limlst=200, full_output=1)[0]
    return 2.0 * (head + flat - osc)


def char_scale_gamma_form(alpha):
    """``2 Gamma(2-alpha) cos(pi alpha/2) / (alpha (1-alpha))``, pi at alpha = 1."""
    alpha = check_alpha(alpha)
    if alpha == 1.0:
        return math.pi
    return 2.0 * special.gamma(2.0 - alpha) * math.cos(0.5 * math.pi * alpha) / (alpha * (1.0 - alpha))
