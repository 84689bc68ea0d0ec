"""Compiled inner loops.

All kernels seed numba's own generator from a 32-bit seed at entry, so a
call is a pure function of its arguments. Motion uses one of two schemes:

* ``GRID`` (0): exact stable increments ``(c dt)^(1/alpha) Z`` on a regular grid.
* ``HYBRID`` (1): jumps with ``|y| > h`` from a Poisson stream of rate
  ``2 h^-alpha / alpha``, plus a Gaussian increment of variance
  ``sig2 * dt`` applied at each grid time (compensated small jumps).

Levels are crossed when ``direction * z >= direction * level``.
"""

import math

import numpy as np
from numba import njit

GRID = 0
HYBRID = 1

_HALF_PI = 0.5 * math.pi


@njit(cache=True)
def seed_kernel(seed):
    np.random.seed(seed)


@njit(cache=True)
def cms(alpha):
    v = (np.random.random() - 0.5) * math.pi
    if alpha == 1.0:
        return math.tan(v)
    w = np.random.exponential(1.0)
    return (
        math.sin(alpha * v)
        / math.cos(v) ** (1.0 / alpha)
        * (math.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha)
    )


@njit(cache=True)
def big_jump(h, inv_alpha):
    y = h * (1.0 - np.random.random()) ** (-inv_alpha)
    if np.random.random() < 0.5:
        return -y
    return y


@njit(cache=True)
def _hit(z, level, direction):
    if direction > 0:
        return z >= level
    return z <= level


@njit(cache=True)
def advance(z, T, scheme, alpha, c, dt, h, rate, sig2, level, direction, stop):
    """Move one particle from ``z`` for time ``T``.

    Returns ``(z_end, zmax, zmin, t_hit, events)``; ``t_hit`` is -1 if the
    level was not reached on the skeleton. With ``stop`` the motion halts at
    the first hit and ``z_end`` is the hitting position.
    """
    zmax = z
    zmin = z
    t_hit = -1.0
    events = 0
    if T <= 0.0:
        return z, zmax, zmin, t_hit, events
    inv_alpha = 1.0 / alpha
    if scheme == GRID:
        nsteps = int(math.ceil(T / dt - 1e-9))
        t = 0.0
        for k in range(nsteps):
            d = dt if k < nsteps - 1 else T - t
            if d <= 0.0:
                break
            z += (c * d) ** inv_alpha * cms(alpha)
            t += d
            events += 1
            if z > zmax:
                zmax = z
            if z < zmin:
                zmin = z
            if t_hit < 0.0 and _hit(z, level, direction):
                t_hit = t
                if stop:
                    return z, zmax, zmin, t_hit, events
        return z, zmax, zmin, t_hit, events
    # hybrid: merge the Poisson jump stream with the Gaussian grid
    sig = math.sqrt(sig2)
    t_jump = np.random.exponential(1.0 / rate)
    t_prev_grid = 0.0
    t_grid = dt if dt < T else T
    while True:
        if t_jump < t_grid:
            z += big_jump(h, inv_alpha)
            t_now = t_jump
            t_jump = t_now + np.random.exponential(1.0 / rate)
        else:
            z += sig * math.sqrt(t_grid - t_prev_grid) * np.random.standard_normal()
            t_now = t_grid
            t_prev_grid = t_grid
        events += 1
        if z > zmax:
            zmax = z
        if z < zmin:
            zmin = z
        if t_hit < 0.0 and _hit(z, level, direction):
            t_hit = t_now
            if stop:
                return z, zmax, zmin, t_hit, events
        if t_now >= T:
            break
        if t_now == t_grid:
            t_grid = t_grid + dt
            if t_grid > T:
                t_grid = T
    return z, zmax, zmin, t_hit, events


# ---------------------------------------------------------------- branching


@njit(cache=True)
def _grow(a, need):
    if need <= a.shape[0]:
        return a
    b = np.empty(max(need, 2 * a.shape[0]), dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def cbss_batch(seed, n, alpha, c, scheme, dt, h, rate, sig2, x, direction,
               progeny_cap, time_cap, early_exit,
               crossed, extreme, censored, progeny, events):
    """``n`` CBSS realisations tested against level ``direction * x``.

    ``extreme`` receives the largest value of ``direction * z`` seen on the
    skeleton (always >= 0 since the root starts at the origin).
    """
    seed_kernel(seed)
    level = direction * x
    spos = np.empty(256)
    sbirth = np.empty(256)
    for r in range(n):
        spos[0] = 0.0
        sbirth[0] = 0.0
        top = 1
        born = 1
        hit = False
        capped = False
        ext = 0.0
        ev = 0
        while top > 0:
            top -= 1
            z0 = spos[top]
            b = sbirth[top]
            life = np.random.exponential(1.0)
            T = life
            cut = False
            if b + life > time_cap:
                T = time_cap - b
                cut = True
            stop = early_exit and not hit
            z1, zmax, zmin, t_hit, nev = advance(z0, T, scheme, alpha, c, dt, h, rate, sig2,
                                                 level, direction, stop)
            ev += nev
            e = zmax if direction > 0 else -zmin
            if e > ext:
                ext = e
            if t_hit >= 0.0:
                hit = True
                if early_exit:
                    break
            if cut:
                capped = True
                continue
            if np.random.random() < 0.5:
                if born + 2 > progeny_cap:
                    capped = True
                    break
                born += 2
                spos = _grow(spos, top + 2)
                sbirth = _grow(sbirth, top + 2)
                spos[top] = z1
                sbirth[top] = b + life
                spos[top + 1] = z1
                sbirth[top + 1] = b + life
                top += 2
        crossed[r] = hit
        extreme[r] = ext
        censored[r] = capped and not hit
        progeny[r] = born
        events[r] = ev


@njit(cache=True)
def occupation_batch(seed, n, alpha, c, t, x, progeny_cap, count_ge, count_all, capped):
    """Particles alive at time ``t``: total and those at positions >= ``x``.

    Positions are exact: each lifetime's displacement is a single stable draw.
    """
    seed_kernel(seed)
    inv_alpha = 1.0 / alpha
    spos = np.empty(256)
    sbirth = np.empty(256)
    for r in range(n):
        spos[0] = 0.0
        sbirth[0] = 0.0
        top = 1
        born = 1
        k_ge = 0
        k_all = 0
        cap = False
        while top > 0:
            top -= 1
            z = spos[top]
            b = sbirth[top]
            life = np.random.exponential(1.0)
            if b + life > t:
                z += (c * (t - b)) ** inv_alpha * cms(alpha)
                k_all += 1
                if z >= x:
                    k_ge += 1
                continue
            z += (c * life) ** inv_alpha * cms(alpha)
            if np.random.random() < 0.5:
                if born + 2 > progeny_cap:
                    cap = True
                    break
                born += 2
                spos = _grow(spos, top + 2)
                sbirth = _grow(sbirth, top + 2)
                spos[top] = z
                sbirth[top] = b + life
                spos[top + 1] = z
                sbirth[top + 1] = b + life
                top += 2
        count_ge[r] = k_ge
        count_all[r] = k_all
        capped[r] = cap


@njit(cache=True)
def progeny_batch(seed, n, cap, out):
    """Total progeny of the p0 = p2 = 1/2 Galton-Watson tree via its exploration walk.

    Values above ``cap`` are reported as ``cap + 1``.
    """
    seed_kernel(seed)
    for r in range(n):
        pending = 1
        seen = 0
        while pending > 0 and seen <= cap:
            seen += 1
            if np.random.random() < 0.5:
                pending -= 1
            else:
                pending += 1
        out[r] = seen if pending == 0 else cap + 1


@njit(cache=True)
def yule_batch(seed, n, times, progeny_cap, time_cap, pop, extinction, progeny, capped):
    """Skeleton statistics with unit-exponential lifetimes.

    ``pop[r, k]`` counts particles alive at ``times[k]``; nodes born after
    ``time_cap`` are not expanded (flagged in ``capped``).
    """
    seed_kernel(seed)
    sbirth = np.empty(256)
    m = times.shape[0]
    for r in range(n):
        sbirth[0] = 0.0
        top = 1
        born = 1
        ext = 0.0
        cap = False
        for k in range(m):
            pop[r, k] = 0
        while top > 0:
            top -= 1
            b = sbirth[top]
            life = np.random.exponential(1.0)
            d = b + life
            if d > ext:
                ext = d
            for k in range(m):
                if b <= times[k] < d:
                    pop[r, k] += 1
            if np.random.random() < 0.5:
                if d > time_cap or born + 2 > progeny_cap:
                    cap = True
                    continue
                born += 2
                sbirth = _grow(sbirth, top + 2)
                sbirth[top] = d
                sbirth[top + 1] = d
                top += 2
        extinction[r] = ext
        progeny[r] = born
        capped[r] = cap


# ------------------------------------------------------------- single paths


@njit(cache=True)
def passage_batch(seed, n, alpha, c, scheme, dt, h, rate, sig2, start, level, direction, horizon,
                  tau, position, censored):
    seed_kernel(seed)
    for r in range(n):
        if _hit(start, level, direction):
            tau[r] = 0.0
            position[r] = start
            censored[r] = False
            continue
        z1, zmax, zmin, t_hit, ev = advance(start, horizon, scheme, alpha, c, dt, h, rate, sig2,
                                            level, direction, True)
        if t_hit >= 0.0:
            tau[r] = t_hit
            position[r] = z1
            censored[r] = False
        else:
            tau[r] = horizon
            position[r] = z1
            censored[r] = True


@njit(cache=True)
def endpoint_max_batch(seed, n, alpha, c, scheme, dt, h, rate, sig2, t, final, running_max):
    seed_kernel(seed)
    for r in range(n):
        z1, zmax, zmin, t_hit, ev = advance(0.0, t, scheme, alpha, c, dt, h, rate, sig2,
                                            np.inf, 1, False)
        final[r] = z1
        running_max[r] = zmax


@njit(cache=True)
def first_jump_batch(seed, n, alpha, dt, h, rate, sig2, j_low, j_high, size, functional, nu):
    """First jump with size in ``[j_low, j_high)`` on hybrid paths from 0.

    Records the jump size, its time ``nu`` and ``sign(X)`` at ``nu / 2`` read
    off the stored skeleton. ``j_low`` must exceed ``h``.
    """
    seed_kernel(seed)
    inv_alpha = 1.0 / alpha
    sig = math.sqrt(sig2)
    ts = np.empty(1024)
    zs = np.empty(1024)
    for r in range(n):
        z = 0.0
        k = 0
        ts[0] = 0.0
        zs[0] = 0.0
        k = 1
        t_jump = np.random.exponential(1.0 / rate)
        t_prev = 0.0
        t_grid = dt
        while True:
            if t_jump < t_grid:
                y = big_jump(h, inv_alpha)
                t_now = t_jump
                t_jump = t_now + np.random.exponential(1.0 / rate)
                if j_low <= y < j_high:
                    size[r] = y
                    nu[r] = t_now
                    half = 0.5 * t_now
                    # last recorded value at or before nu/2
                    lo = 0
                    hi = k - 1
                    while lo < hi:
                        mid = (lo + hi + 1) // 2
                        if ts[mid] <= half:
                            lo = mid
                        else:
                            hi = mid - 1
                    functional[r] = 1.0 if zs[lo] > 0.0 else -1.0
                    break
                z += y
            else:
                z += sig * math.sqrt(t_grid - t_prev) * np.random.standard_normal()
                t_now = t_grid
                t_prev = t_grid
                t_grid += dt
            ts = _grow(ts, k + 1)
            zs = _grow(zs, k + 1)
            ts[k] = t_now
            zs[k] = z
            k += 1


# --------------------------------------------------------------- Feynman-Kac


@njit(cache=True)
def u_eval(y, kind, xs, vs, left, p0, tail_exp, coef):
    """Candidate function: table (kind 0) or clipped power ansatz (kind 1)."""
    if y <= 0.0:
        return left
    if kind == 1:
        v = coef * y ** (-tail_exp)
        return v if v < 1.0 else 1.0
    m = xs.shape[0]
    if y < xs[0]:
        return left + (vs[0] - left) * (y / xs[0]) ** p0
    if y >= xs[m - 1]:
        return vs[m - 1] * (y / xs[m - 1]) ** (-tail_exp)
    lo = 0
    hi = m - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if xs[mid] <= y:
            lo = mid
        else:
            hi = mid
    w = math.log(y / xs[lo]) / math.log(xs[hi] / xs[lo])
    return vs[lo] + w * (vs[hi] - vs[lo])


@njit(cache=True)
def _step_integral(z, zn, uz, un, d, kind, xs, vs, left, p0, tail_exp, coef):
    # trapezoid over one step; a step ending at or below 0 is cut at the
    # linear crossing point and closed with u(0+), so nothing past tau counts
    if zn > 0.0:
        return 0.5 * d * (uz + un)
    frac = z / (z - zn)
    u0 = u_eval(1e-300, kind, xs, vs, left, p0, tail_exp, coef)
    return 0.5 * frac * d * (uz + u0)


@njit(cache=True)
def fk_path(x0, alpha, c, scheme, dt, h, rate, sig2, horizon, psi_cap,
            kind, xs, vs, left, p0, tail_exp, coef, checkpoints, z_at):
    """One path from ``x0`` stopped below 0, at ``horizon`` or once ``psi/2 > psi_cap``.

    Returns ``(psi, status, t_end)``: status 0 = reached (-inf, 0],
    1 = horizon (censored), 2 = weight negligible. ``z_at[k]`` receives
    ``exp(-psi/2) u(X)`` at ``checkpoints[k]`` (stopped at the passage time).
    """
    inv_alpha = 1.0 / alpha
    z = x0
    uz = u_eval(z, kind, xs, vs, left, p0, tail_exp, coef)
    psi = 0.0
    t = 0.0
    nck = checkpoints.shape[0]
    ck = 0
    while ck < nck and checkpoints[ck] <= 0.0:
        z_at[ck] = uz
        ck += 1
    if z <= 0.0:
        for k in range(ck, nck):
            z_at[k] = 1.0
        return 0.0, 0, 0.0
    status = 1
    if scheme == GRID:
        while t < horizon:
            d = dt
            if ck < nck and checkpoints[ck] - t < d:
                d = checkpoints[ck] - t
            if horizon - t < d:
                d = horizon - t
            zn = z + (c * d) ** inv_alpha * cms(alpha)
            un = u_eval(zn, kind, xs, vs, left, p0, tail_exp, coef)
            psi += _step_integral(z, zn, uz, un, d, kind, xs, vs, left, p0, tail_exp, coef)
            t += d
            z = zn
            uz = un
            while ck < nck and checkpoints[ck] <= t + 1e-12:
                z_at[ck] = math.exp(-0.5 * psi) * uz
                ck += 1
            if z <= 0.0:
                status = 0
                break
            if 0.5 * psi > psi_cap:
                status = 2
                break
    else:
        sig = math.sqrt(sig2)
        t_jump = np.random.exponential(1.0 / rate)
        t_prev_grid = 0.0
        t_grid = dt
        while t < horizon:
            nxt = t_grid
            is_ck = False
            if ck < nck and checkpoints[ck] < nxt:
                nxt = checkpoints[ck]
                is_ck = True
            if horizon < nxt:
                nxt = horizon
                is_ck = False
            if t_jump < nxt:
                # path is flat between events, jump applied at t_jump
                psi += (t_jump - t) * uz
                t = t_jump
                z += big_jump(h, inv_alpha)
                uz = u_eval(z, kind, xs, vs, left, p0, tail_exp, coef)
                t_jump = t + np.random.exponential(1.0 / rate)
            elif nxt == t_grid and not is_ck:
                zn = z + sig * math.sqrt(t_grid - t_prev_grid) * np.random.standard_normal()
                un = u_eval(zn, kind, xs, vs, left, p0, tail_exp, coef)
                # Gaussian part treated as continuous between grid nodes
                psi += _step_integral(z, zn, uz, un, t_grid - t, kind, xs, vs, left, p0, tail_exp, coef)
                t = t_grid
                t_prev_grid = t_grid
                t_grid += dt
                z = zn
                uz = un
            else:
                psi += (nxt - t) * uz
                t = nxt
            while ck < nck and checkpoints[ck] <= t + 1e-12:
                z_at[ck] = math.exp(-0.5 * psi) * uz
                ck += 1
            if z <= 0.0:
                status = 0
                break
            if 0.5 * psi > psi_cap:
                status = 2
                break
    final = math.exp(-0.5 * psi) * uz
    for k in range(ck, nck):
        z_at[k] = final
    return psi, status, t


@njit(cache=True)
def fk_batch(seed, n, x0, alpha, c, scheme, dt, h, rate, sig2, horizon, psi_cap,
             kind, xs, vs, left, p0, tail_exp, coef, psi_out, status_out):
    seed_kernel(seed)
    ck = np.empty(0)
    dummy = np.empty(0)
    for r in range(n):
        psi, status, t_end = fk_path(x0, alpha, c, scheme, dt, h, rate, sig2, horizon, psi_cap,
                                     kind, xs, vs, left, p0, tail_exp, coef, ck, dummy)
        psi_out[r] = psi
        status_out[r] = status


@njit(cache=True)
def martingale_batch(seed, n, x0, alpha, c, scheme, dt, h, rate, sig2, psi_cap,
                     kind, xs, vs, left, p0, tail_exp, coef, checkpoints, z_out):
    seed_kernel(seed)
    horizon = checkpoints[checkpoints.shape[0] - 1]
    row = np.empty(checkpoints.shape[0])
    for r in range(n):
        fk_path(x0, alpha, c, scheme, dt, h, rate, sig2, horizon, psi_cap,
                kind, xs, vs, left, p0, tail_exp, coef, checkpoints, row)
        z_out[r, :] = row
