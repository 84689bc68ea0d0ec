"""Critical binary branching skeleton: rate-1 lifetimes, split or die with probability 1/2."""

import csv
import enum
import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import _kernels as K
from ._validation import check_count, check_positive, check_rng, kernel_seed
from .rng import chunk_sizes


class Fate(enum.Enum):
    Split = "split"
    Die = "die"


@dataclass(frozen=True)
class TreeNode:
    id: int
    parent: int | None
    birth_time: float
    lifetime: float
    fate: Fate

    @property
    def death_time(self):
        return self.birth_time + self.lifetime


@dataclass(frozen=True)
class GWTree:
    """Realised skeleton. ``nodes`` are in birth-time order, root first.

    When ``caps_hit`` is set, some Split nodes have no realised children;
    ``horizon`` is the earliest missing birth time, so population counts are
    exact on ``[0, horizon]``.
    """

    nodes: tuple
    progeny: int
    extinction_time: float
    caps_hit: bool
    horizon: float = math.inf

    def children(self, node_id):
        return [n for n in self.nodes if n.parent == node_id]


def sample_tree(rng=None, progeny_cap=10**6, time_cap=math.inf):
    """Grow one tree in birth-time order.

    A node is created (with its lifetime and fate) when it is born. The
    tree stops growing once a birth would exceed ``progeny_cap`` nodes or
    happen after ``time_cap``; the result is then flagged ``caps_hit``.
    """
    rng = check_rng(rng)
    progeny_cap = check_count(progeny_cap, "progeny_cap")
    time_cap = check_positive(time_cap, "time_cap", allow_inf=True)
    nodes = []
    heap = [(0.0, 0, None)]  # (birth_time, id, parent)
    next_id = 1
    capped = False
    horizon = math.inf
    while heap:
        birth, nid, parent = heapq.heappop(heap)
        life = rng.standard_exponential()
        fate = Fate.Split if rng.random() < 0.5 else Fate.Die
        nodes.append(TreeNode(nid, parent, birth, life, fate))
        if fate is Fate.Split:
            death = birth + life
            if death > time_cap or next_id + 2 > progeny_cap:
                capped = True
                horizon = min(horizon, death)
                continue
            heapq.heappush(heap, (death, next_id, nid))
            heapq.heappush(heap, (death, next_id + 1, nid))
            next_id += 2
    ext = max(n.death_time for n in nodes)
    return GWTree(tuple(nodes), len(nodes), ext, capped, horizon)


def population_at(tree, t):
    """Number of particles alive at time ``t``: ``birth <= t < birth + lifetime``."""
    t = check_positive(t, "t", allow_zero=True)
    if t > tree.horizon:
        raise ValueError(f"tree was capped; counts are exact only up to t={tree.horizon}")
    return sum(1 for n in tree.nodes if n.birth_time <= t < n.death_time)


def survival_prob_exact(t):
    """``P(Y_t > 0) = 2/(t+2)``, solving ``F' = (1-F)^2 / 2`` with ``F(0) = 0`` for ``F = 1 - P``."""
    t = check_positive(t, "t", allow_zero=True, allow_inf=True)
    return 2.0 / (t + 2.0)


def _log_tail(k):
    # log P(xi >= 2k+1) = log C(2k,k) - k log 4 = log G(k+1/2) - log G(k+1) - log(pi)/2
    k = np.asarray(k, dtype=float)
    exact = gammaln(k + 0.5) - gammaln(k + 1.0) - 0.5 * math.log(math.pi)
    big = np.maximum(k, 1.0)
    # asymptotic form where the gammaln difference loses digits
    asym = -0.5 * np.log(np.pi * big) - 1.0 / (8.0 * big) + 1.0 / (192.0 * big**3)
    return np.where(k > 1e6, asym, exact)


def progeny_pmf(k):
    """``P(xi = 2k+1) = Catalan(k) / 2^(2k+1)``; even totals have probability 0."""
    k = check_count(k, "k", minimum=0)
    return float(np.exp(gammaln(2 * k + 1) - gammaln(k + 2) - gammaln(k + 1) - (2 * k + 1) * math.log(2.0)))


def progeny_tail(m):
    """``P(xi >= m)``; equals ``C(2k,k)/4^k`` with ``k = ceil((m-1)/2)``."""
    m = check_count(m, "m", minimum=0)
    if m <= 1:
        return 1.0
    k = m // 2
    return float(np.exp(_log_tail(k)))


def sample_progeny(n, rng=None, cap=10**12, method="inverse", chunk=200_000):
    """Total progeny of ``n`` independent trees.

    ``method="inverse"`` inverts the exact tail ``C(2k,k)/4^k`` (cost
    independent of the size of the tree); ``"walk"`` runs the exploration
    random walk in a compiled loop. Values above ``cap`` are returned as
    ``cap + 1``.
    """
    n = check_count(n, "n")
    cap = check_count(cap, "cap")
    rng = check_rng(rng)
    if method == "walk":
        out = np.empty(n, dtype=np.int64)
        i = 0
        for m in chunk_sizes(n, chunk):
            K.progeny_batch(kernel_seed(rng), m, cap, out[i:i + m])
            i += m
        return out
    if method != "inverse":
        raise ValueError(f"unknown method {method!r}")
    u = 1.0 - rng.random(n)  # (0, 1]
    log_u = np.log(u)
    # K = #{k >= 1 : tail(k) > u}; tail(k) < 1/sqrt(pi k) bounds the search
    kmax = (cap - 1) // 2 + 1
    hi = np.minimum(np.floor(1.0 / (np.pi * u * u)) + 1.0, kmax).astype(np.int64)
    lo = np.zeros(n, dtype=np.int64)  # tail(lo) > u always holds at lo = 0 (u < 1 a.s.)
    while True:
        active = hi - lo > 1
        if not active.any():
            break
        mid = (lo + hi) // 2
        above = _log_tail(mid) > log_u
        lo = np.where(active & above, mid, lo)
        hi = np.where(active & ~above, mid, hi)
    k = np.where(_log_tail(hi) > log_u, hi, lo)
    xi = 2 * k + 1
    return np.where(xi > cap, cap + 1, xi)


def skeleton_stats(times, n, rng=None, progeny_cap=10**7, time_cap=math.inf, chunk=100_000):
    """Population at each of ``times``, extinction time, progeny and cap flags for ``n`` trees."""
    n = check_count(n, "n")
    rng = check_rng(rng)
    times = np.asarray(times, dtype=float)
    pop = np.empty((n, times.size), dtype=np.int64)
    ext = np.empty(n)
    prog = np.empty(n, dtype=np.int64)
    capped = np.empty(n, dtype=np.bool_)
    i = 0
    for m in chunk_sizes(n, chunk):
        K.yule_batch(kernel_seed(rng), m, times, int(progeny_cap), float(time_cap),
                     pop[i:i + m], ext[i:i + m], prog[i:i + m], capped[i:i + m])
        i += m
    return pop, ext, prog, capped


def write_tree_csv(tree, filename):
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "parent", "birth_time", "lifetime", "fate"])
        for nd in tree.nodes:
            w.writerow([nd.id, "" if nd.parent is None else nd.parent,
                        repr(nd.birth_time), repr(nd.lifetime), nd.fate.value])
