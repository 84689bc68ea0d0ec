"""Battery of quantitative checks with a JSON report.

Each check is tagged with a short quotation that locates the statement it
tests in the source text (or ``"plumbing"``). ``quick`` runs in a few
minutes; ``full`` uses acceptance-grade sample sizes and adds the
three-way reproduction of the tail law.
"""

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import branching, bvp, cbss, feynman_kac, levy_path, stable
from .rng import substream


@dataclass
class Check:
    check_id: str
    paper_anchor: str
    status: str
    statistic: float
    threshold: str
    detail: str = ""
    seconds: float = 0.0


@dataclass
class VerifyReport:
    level: str
    seed: int
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.status == "PASS" for c in self.checks)

    def to_json(self):
        d = {"level": self.level, "seed": self.seed, "passed": self.passed,
             "checks": [asdict(c) for c in self.checks]}
        return json.dumps(d, indent=2, default=float)


def _z(obs, expected, se):
    return abs(obs - expected) / se if se > 0 else (0.0 if obs == expected else math.inf)


def _binom_se(p, n):
    return math.sqrt(max(p * (1 - p), 1e-300) / n)


# each check returns (statistic, passed, threshold description, detail)

def _levy_mass(rng, size):
    v = stable.levy_tail_mass(stable.StableParams(1.0), 2.0)
    return abs(v - 0.5), abs(v - 0.5) < 1e-15, "|lambda[2,inf) - 1/2| < 1e-15", f"value={v}"


def _char_scale(rng, size):
    worst = max(abs(stable.char_scale_by_quadrature(a) / stable.char_exponent_scale(a) - 1)
                for a in (0.3, 0.7, 1.0, 1.3, 1.9))
    return worst, worst < 1e-8, "relative gap < 1e-8", "alpha in {0.3,0.7,1,1.3,1.9}"


def _cauchy_tail(rng, size):
    v = stable.stable_tail(stable.StableParams(1.0), 1.0, math.pi)
    return abs(v - 0.25), abs(v - 0.25) < 1e-6, "|P{X_1 >= pi} - 1/4| < 1e-6", f"value={v}"


def _scaling(rng, size):
    n = size(20_000, 100_000)
    p = stable.StableParams(1.5)
    a = stable.sample_stable(p, 7.0, rng, n) / 7.0 ** (1 / 1.5)
    b = stable.sample_stable(p, 1.0, rng, n)
    pv = stats.ks_2samp(a, b).pvalue
    return pv, pv > 0.01, "KS p-value > 0.01", f"n={n}, t=7, alpha=1.5"


def _reflection(rng, size):
    n = size(20_000, 100_000)
    p = stable.StableParams(1.0)
    final, top = levy_path.endpoint_and_max(p, levy_path.PathConfig(dt=0.01), 1.0, n, rng)
    worst = -math.inf
    for y in (2.0, 5.0, 10.0):
        lhs = np.mean(top >= y)
        rhs = 2 * np.mean(final >= y)
        se = math.sqrt(_binom_se(lhs, n) ** 2 + 4 * _binom_se(rhs / 2, n) ** 2)
        worst = max(worst, (lhs - rhs) / se)
    return worst, worst < 3.0, "max_y (P{X*>=y} - 2P{X>=y})/SE < 3", f"n={n}, y in {{2,5,10}}"


def _short_time(rng, size):
    n = size(4_000_000, 20_000_000)
    eps, A = 1e-3, 5.0
    p = stable.StableParams(1.0)
    cfg = levy_path.PathConfig(dt=eps / 10, jump_threshold=A / 10)
    tau, _, cens = levy_path.passage_times(p, cfg, 0.0, A, eps, n, rng)
    k = int(np.sum(~cens & (tau < eps)))
    rate = k / n / eps
    target = stable.levy_tail_mass(p, A)
    rel = abs(rate / target - 1)
    tol = 0.1 + 3 / math.sqrt(max(k, 1))
    return rel, rel < tol, f"relative error < {tol:.3f} (10% + 3 SE)", f"rate={rate:.4f}, target={target}, events={k}"


def _overshoot(rng, size):
    n = size(2_000_000, 10_000_000)
    r = levy_path.overshoot_conditional_tail(stable.StableParams(1.0), 1.0, 2.0, 1e-3, n, rng)
    z = _z(r.p_hat, 0.5, r.std_err)
    return z, z < 3 and not r.wide_ci, "|p - 1/2|/SE < 3", f"p={r.p_hat:.4f}, events={r.events}"


def _jump_indep(rng, size):
    n = size(10_000, 100_000)
    rep = levy_path.jump_independence_check(stable.StableParams(1.0), (5.0, math.inf), n, rng)
    return rep.p_value, rep.p_value > 0.01 and not rep.insufficient, "chi-square p > 0.01", \
        f"n={n}, size KS p={rep.size_ks_pvalue:.3f}"


def _survival(rng, size):
    n = size(100_000, 100_000)
    times = np.array([1.0, 2.0, 10.0])
    pop, *_ = branching.skeleton_stats(times, n, rng, time_cap=times[-1])
    zs = [_z(np.mean(pop[:, k] > 0), branching.survival_prob_exact(t), _binom_se(branching.survival_prob_exact(t), n))
          for k, t in enumerate(times)]
    return max(zs), max(zs) < 3, "max |z| < 3", f"n={n}, t in {{1,2,10}}"


def _population(rng, size):
    n = size(100_000, 100_000)
    times = np.array([1.0, 5.0, 20.0])
    pop, *_ = branching.skeleton_stats(times, n, rng, time_cap=times[-1])
    zs = [_z(pop[:, k].mean(), 1.0, pop[:, k].std(ddof=1) / math.sqrt(n)) for k in range(times.size)]
    return max(zs), max(zs) < 3, "max |z| < 3", f"n={n}, t in {{1,5,20}}"


def _progeny(rng, size):
    n = size(100_000, 1_000_000)
    xi = branching.sample_progeny(n, rng)
    zs = []
    for k, m in enumerate((1, 3, 5)):
        p = branching.progeny_pmf(k)
        zs.append(_z(np.mean(xi == m), p, _binom_se(p, n)))
    band = [math.sqrt(m) * np.mean(xi >= m) for m in (100, 1000, 10_000)]
    ok = max(zs) < 3 and all(0.6 < b < 1.0 for b in band)
    return max(zs), ok, "max |z| < 3 and sqrt(m) P(xi>=m) in (0.6, 1.0)", f"band={np.round(band, 3).tolist()}"


def _occupation(rng, size):
    n = size(100_000, 200_000)
    cfg = cbss.CbssConfig(stable.StableParams(1.0))
    e = cbss.occupation_count(cfg, 1.0, math.pi, n, rng)
    tot = cbss.occupation_count(cfg, 1.0, -math.inf, n, rng)
    z = max(_z(e.mean, 0.25, e.std_err), _z(tot.mean, 1.0, tot.std_err))
    return z, z < 3, "|z| < 3 for both counts", f"at-or-above={e.mean:.4f}, all={tot.mean:.4f}"


def _upper_bound(rng, size):
    n = size(50_000, 1_000_000)
    cfg = cbss.CbssConfig(stable.StableParams(1.0), seed=int(rng.integers(2**63)))
    est = cbss.estimate_tail(cfg, [100.0], n)[0]
    bound = cbss.tail_upper_bound(1.0, 100.0)
    z = (est.p_hat - bound) / est.std_err
    return z, z < 3, "(p_hat - bound)/SE < 3", f"p_hat={est.p_hat:.4f}, bound={bound:.4f}"


def _f_scaling(rng, size):
    worst = max(bvp.f_scaling_check(a, 1.0, 4.0).rel_error for a in (0.5, 1.0, 1.5))
    return worst, worst < 0.01, "relative error < 1%", "F(4)/F(1) vs 4^(-3 alpha/2)"


def _w_asymptotic(alphas):
    def check(rng, size):
        vals = {a: bvp.w_asymptotic_ratio(a, 1e3) for a in alphas}
        worst = max(abs(v - 1) for v in vals.values())
        return worst, worst <= 0.05, "|alpha x^alpha (-Lw)(x) - 1| <= 0.05 at x=1e3", \
            ", ".join(f"alpha={a}: {v:.5f}" for a, v in vals.items())
    return check


def _exp_jump(rng, size):
    n = size(100_000, 100_000)
    rate, theta = 0.01, 0.07
    nu = rng.exponential(1 / rate, n)
    w = np.exp(-theta * nu)
    z = _z(w.mean(), feynman_kac.exp_jump_expectation(rate, theta), w.std(ddof=1) / math.sqrt(n))
    return z, z < 3, "|z| < 3", f"closed form={feynman_kac.exp_jump_expectation(rate, theta):.6f}"


def _consistency(rng, size):
    worst = 0.0
    for a in (0.5, 1.0, 1.5):
        _, c = feynman_kac.asymptotic_tail_constant(a, 1e12, 1e-3)
        worst = max(worst, abs(c / math.sqrt(2 / a) - 1))
    return worst, worst < 5e-3, "|x^(a/2) u / sqrt(2/a) - 1| < 5e-3 (O(delta))", "x=1e12, delta=1e-3"


def _bvp_solution(rng, size):
    g = bvp.Grid.geometric(1e4, 400)
    u = bvp.solve_bvp(stable.StableParams(1.0), g)
    c = u.tail_constant(5e3)
    c2 = bvp.solve_bvp(stable.StableParams(1.0), g.refined()).tail_constant(5e3)
    rel = abs(c / math.sqrt(2) - 1)
    ok = rel < 0.15 and abs(c2 / c - 1) < 0.02
    return rel, ok, "|C(L/2)/sqrt2 - 1| < 0.15, refinement change < 2%", f"C={c:.5f}, refined={c2:.5f}"


def _comparison(rng, size):
    g = bvp.Grid.geometric(1e4, 400)
    sup = bvp.comparison_check(bvp.shifted_w(g, 1.0, 4.0), "super")
    sub = bvp.comparison_check(bvp.shifted_w(g, 1.0, 0.5), "sub")
    return max(sup.worst_violation, sub.worst_violation), sup.passed and sub.passed, \
        "no sign violation", "C2=4 super, C1=0.5 sub, alpha=1"


def _martingale(rng, size):
    n = size(20_000, 100_000)
    u = bvp.solve_bvp(stable.StableParams(1.0), bvp.Grid.geometric(1e4, 400))
    rep = feynman_kac.martingale_check(u, 20.0, [0.0, 0.5, 1.0, 2.0, 5.0], n, rng)
    bad = feynman_kac.martingale_check(feynman_kac.CandidateU.coerce(u).scaled(1.5), 20.0,
                                       [0.0, 0.5, 1.0, 2.0, 5.0], n, rng)
    ok = rep.passed and bad.max_deviation_se > 5
    return rep.max_deviation_se, ok, "solution < 3 SE, perturbed > 5 SE", \
        f"perturbed deviation={bad.max_deviation_se:.1f} SE"


def _determinism(rng, size):
    cfg = cbss.CbssConfig(stable.StableParams(1.0), seed=7)
    a = cbss.estimate_tail(cfg, [50.0], 4000, chunk=1000)
    b = cbss.estimate_tail(cfg, [50.0], 4000, chunk=1000)
    return float(a != b), a == b, "identical reruns", f"hits={a[0].hits}"


def _three_way(rng, size):
    alpha = 1.0
    u = bvp.solve_bvp(stable.StableParams(alpha), bvp.Grid.geometric(1e4, 400))
    cfg = cbss.CbssConfig(stable.StableParams(alpha), seed=int(rng.integers(2**63)))
    mc = cbss.estimate_tail(cfg, [25.0, 100.0], size(100_000, 1_000_000))
    path_cfg = levy_path.PathConfig(dt=0.05, jump_threshold=0.5)
    worst = 0.0
    ok = True
    parts = []
    for e in mc:
        ub = float(u(np.array(e.x)))
        gap = abs(ub - e.p_hat)
        allow = (e.ci_high - e.ci_low) / 2 + 0.02 * ub
        fk = feynman_kac.fk_estimate(e.x, u, alpha, path_cfg, size(4_000, 20_000), rng)
        ratio = fk.mean / ub
        ok &= gap <= allow and 0.95 - 3 * fk.std_err / ub <= ratio <= 1.05 + 3 * fk.std_err / ub
        worst = max(worst, gap / allow)
        parts.append(f"x={e.x:g}: mc={e.p_hat:.4f} bvp={ub:.4f} fk/bvp={ratio:.4f}")
    return worst, ok, "|u_bvp - p_mc| <= CI + 2%, FK/u_bvp in [0.95,1.05] +- 3SE", "; ".join(parts)


_QUICK = [
    ("levy_tail_mass", "with L\\'{e}vy measure", _levy_mass),
    ("char_exponent_scale", "The characteristic function of a symmetric", _char_scale),
    ("stable_tail_cauchy", "has a density", _cauchy_tail),
    ("scaling_law", "satisfies the scaling property", _scaling),
    ("reflection_inequality", "X_t^* \\geq y \\} \\leq 2 P", _reflection),
    ("short_time_passage", "first exit time from the interval", _short_time),
    ("overshoot_tail", "uniformly in the region $x>A\\geq 1$", _overshoot),
    ("jump_independence", "Then the jump size", _jump_indep),
    ("survival_exact", "the chance of this is on the order of $1/T$", _survival),
    ("criticality", "the total number of particles", _population),
    ("progeny_law", "Denote by $\\xi$ the total progeny", _progeny),
    ("occupation_identity", "mean particle density at location", _occupation),
    ("upper_bound", "where $Y_{t}$ is the skeletal", _upper_bound),
    ("f_scaling", "This scaling property of $F$", _f_scaling),
    ("w_asymptotics", "The first integral can be easily evaluated", _w_asymptotic((1.0,))),
    ("exp_jump", "exponentially distributed and so the latter", _exp_jump),
    ("tail_consistency_loop", "x^\\alpha (u(x))^2", _consistency),
    ("bvp_tail_constant", "solves the following nonlinear boundary value problem", _bvp_solution),
    ("comparison", "Comparison Principle", _comparison),
    ("martingale", "is a bounded martingale", _martingale),
    ("determinism", "plumbing", _determinism),
]

_FULL_EXTRA = [
    ("w_asymptotics_all_alpha", "The first integral can be easily evaluated", _w_asymptotic((0.5, 1.0, 1.5))),
    ("three_way_reproduction", "the maximal displacement of a critical", _three_way),
]


def verify(level="quick", seed=0, only=None, log=None):
    """Run the battery; failures are collected, never raised."""
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    full = level == "full"

    def size(quick_n, full_n):
        return full_n if full else quick_n

    battery = _QUICK + (_FULL_EXTRA if full else [])
    if only is not None:
        unknown = set(only) - {cid for cid, _, _ in battery}
        if unknown:
            raise ValueError(f"unknown check ids: {sorted(unknown)}")
    report = VerifyReport(level, int(seed))
    for idx, (cid, anchor, fn) in enumerate(battery):
        if only is not None and cid not in only:
            continue
        rng = substream(seed, idx)
        t0 = time.perf_counter()
        try:
            stat, ok, thr, detail = fn(rng, size)
            status = "PASS" if ok else "FAIL"
        except Exception as exc:  # a crashing check is a failed check
            stat, thr, detail, status = math.nan, "", f"{type(exc).__name__}: {exc}", "FAIL"
        check = Check(cid, anchor, status, float(stat), thr, detail, round(time.perf_counter() - t0, 2))
        report.checks.append(check)
        if log is not None:
            log(f"{status} {cid}: {detail}")
    return report
