"""Compiled inner loops for the event simulation.

Both kernels read pre-drawn open-interval uniforms and report exhaustion
instead of drawing, so results depend only on the buffers' contents.
"""

import math

import numpy as np
from numba import njit

from .policy import CEIL_EPS

OK = 0
NEED_DEMAND_UNIFORMS = 1
NEED_LEADTIME_UNIFORMS = 2
EVENT_CEILING = 3
EMPTY_PIPELINE = 4

# Layout of the ``out`` statistics vector.
COST, YPOS, YNEG, ZSUM, Z2SUM, YSUM, Y2SUM, GAPSUM, MAXGAP, MINGAP, EVENTS, CLIPPED, ORDERS = range(13)
N_STATS = 13


@njit(cache=True, nogil=True)
def _quantile(code, a, b, u):
    if code == 0:
        return -a * math.log1p(-u)
    if code == 1:
        return a - b * math.log1p(-u)
    if code == 2:
        return a + (b - a) * u
    if code == 3:
        return ((1.0 - u) ** (-1.0 / a) - 1.0) / b
    return a


@njit(cache=True, nogil=True)
def _target(y, base, gamma, cap):
    x = base - gamma * y
    if x > cap:
        x = cap
    if x < 0.0:
        x = 0.0
    return x


@njit(cache=True, nogil=True)
def _ceil(x):
    return int(math.ceil(x - CEIL_EPS))


@njit(cache=True, nogil=True)
def _level(x, round_up):
    if round_up:
        return int(math.ceil(x - CEIL_EPS))
    return int(math.floor(x + CEIL_EPS))


@njit(cache=True, nogil=True)
def _less(t1, s1, t2, s2):
    return t1 < t2 or (t1 == t2 and s1 < s2)


@njit(cache=True, nogil=True)
def _push(ht, hs, n, t, s):
    i = n
    ht[i] = t
    hs[i] = s
    while i > 0:
        p = (i - 1) >> 1
        if _less(ht[i], hs[i], ht[p], hs[p]):
            ht[i], ht[p] = ht[p], ht[i]
            hs[i], hs[p] = hs[p], hs[i]
            i = p
        else:
            break


@njit(cache=True, nogil=True)
def _pop(ht, hs, n):
    # removes the root of a heap of size n (n >= 1)
    n -= 1
    ht[0] = ht[n]
    hs[0] = hs[n]
    i = 0
    while True:
        c = 2 * i + 1
        if c >= n:
            break
        if c + 1 < n and _less(ht[c + 1], hs[c + 1], ht[c], hs[c]):
            c += 1
        if _less(ht[c], hs[c], ht[i], hs[i]):
            ht[i], ht[c] = ht[c], ht[i]
            hs[i], hs[c] = hs[c], hs[i]
            i = c
        else:
            break


@njit(cache=True, nogil=True)
def _accumulate(out, hist, hist_lo, y, z, gap, dt, h, theta):
    ypos = y if y > 0 else 0
    yneg = -y if y < 0 else 0
    out[COST] += (h * ypos + theta * yneg) * dt
    out[YPOS] += ypos * dt
    out[YNEG] += yneg * dt
    out[ZSUM] += z * dt
    out[Z2SUM] += float(z) * float(z) * dt
    out[YSUM] += y * dt
    out[Y2SUM] += float(y) * float(y) * dt
    out[GAPSUM] += gap * dt
    if gap > out[MAXGAP]:
        out[MAXGAP] = gap
    k = y - hist_lo
    if 0 <= k < hist.size:
        hist[k] += dt
    else:
        out[CLIPPED] += dt


@njit(cache=True, nogil=True)
def gbs_replication(code, la, lb, r, base, gamma, cap, round_up, h, theta, horizon, warmup,
                    u_dem, u_lt, hist_lo, hist, max_events, out):
    """One replication of the policy on a Poisson-demand, random-lead-time system."""
    out[:] = 0.0
    hist[:] = 0.0
    out[MAXGAP] = -1.0
    cap_heap = 1024
    ht = np.empty(cap_heap)
    hs = np.empty(cap_heap, dtype=np.int64)
    n = 0
    seq = 0
    i_dem = 0
    i_lt = 0
    y = 0
    z = 0
    t = 0.0

    # empty system at time 0: order straight up to the target
    tt = _target(y, base, gamma, cap)
    lv = _level(tt, round_up)
    a = lv - z if lv > z else 0
    for _ in range(a):
        if i_lt >= u_lt.size:
            return NEED_LEADTIME_UNIFORMS
        if n >= cap_heap:
            cap_heap *= 2
            ht2 = np.empty(cap_heap)
            hs2 = np.empty(cap_heap, dtype=np.int64)
            ht2[:n] = ht[:n]
            hs2[:n] = hs[:n]
            ht = ht2
            hs = hs2
        seq += 1
        _push(ht, hs, n, t + _quantile(code, la, lb, u_lt[i_lt]), seq)
        i_lt += 1
        n += 1
    z += a
    out[ORDERS] += a
    gap = z - _ceil(tt)
    min_gap = gap

    if i_dem >= u_dem.size:
        return NEED_DEMAND_UNIFORMS
    dem_t = t - math.log(u_dem[i_dem]) / r
    i_dem += 1
    seq += 1
    dem_s = seq

    events = 0
    while True:
        is_item = n > 0 and _less(ht[0], hs[0], dem_t, dem_s)
        te = ht[0] if is_item else dem_t
        lo = t if t > warmup else warmup
        hi = te if te < horizon else horizon
        if hi > lo:
            _accumulate(out, hist, hist_lo, y, z, gap, hi - lo, h, theta)
        if te >= horizon:
            break
        t = te
        if is_item:
            _pop(ht, hs, n)
            n -= 1
            if z < 1:
                return EMPTY_PIPELINE
            y += 1
            z -= 1
        else:
            y -= 1
        tt = _target(y, base, gamma, cap)
        lv = _level(tt, round_up)
        a = lv - z if lv > z else 0
        for _ in range(a):
            if i_lt >= u_lt.size:
                return NEED_LEADTIME_UNIFORMS
            if n >= cap_heap:
                cap_heap *= 2
                ht2 = np.empty(cap_heap)
                hs2 = np.empty(cap_heap, dtype=np.int64)
                ht2[:n] = ht[:n]
                hs2[:n] = hs[:n]
                ht = ht2
                hs = hs2
            seq += 1
            _push(ht, hs, n, t + _quantile(code, la, lb, u_lt[i_lt]), seq)
            i_lt += 1
            n += 1
        z += a
        out[ORDERS] += a
        gap = z - _ceil(tt)
        if gap < min_gap:
            min_gap = gap
        if not is_item:
            if i_dem >= u_dem.size:
                return NEED_DEMAND_UNIFORMS
            dem_t = t - math.log(u_dem[i_dem]) / r
            i_dem += 1
            seq += 1
            dem_s = seq
        events += 1
        if events > max_events:
            return EVENT_CEILING
    out[MINGAP] = min_gap
    out[EVENTS] = events
    return OK


@njit(cache=True, nogil=True)
def artificial_replication(r, beta, base, gamma, cap, round_up, h, theta, horizon, warmup,
                           u, hist_lo, hist, max_events, out):
    """Birth-death chain where the pipeline always equals the rounded target."""
    out[:] = 0.0
    hist[:] = 0.0
    out[MAXGAP] = -1.0
    y = 0
    t = 0.0
    i = 0
    events = 0
    while True:
        if i + 1 >= u.size:
            return NEED_DEMAND_UNIFORMS
        ct = _level(_target(y, base, gamma, cap), round_up)
        up = beta * ct
        total = up + r
        te = t - math.log(u[i]) / total
        lo = t if t > warmup else warmup
        hi = te if te < horizon else horizon
        if hi > lo:
            _accumulate(out, hist, hist_lo, y, ct, 0, hi - lo, h, theta)
        if te >= horizon:
            break
        t = te
        if u[i + 1] * total < up:
            y += 1
        else:
            y -= 1
        i += 2
        events += 1
        if events > max_events:
            return EVENT_CEILING
    out[MINGAP] = 0.0
    out[EVENTS] = events
    return OK
