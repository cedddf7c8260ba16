"""Compiled inner loops for the explicit stepper.

Boundary codes: 0 reflecting (Neumann), 1 zero Dirichlet, 2 periodic.
"""
import numba
import numpy as np

NEUMANN, DIRICHLET_ZERO, PERIODIC = 0, 1, 2


@numba.njit(inline="always")
def _lo(i, n, bc):
    if i > 0:
        return i - 1
    if bc == 0:
        return 1 if n > 1 else 0
    if bc == 2:
        return n - 1
    return -1


@numba.njit(inline="always")
def _hi(i, n, bc):
    if i < n - 1:
        return i + 1
    if bc == 0:
        return n - 2 if n > 1 else 0
    if bc == 2:
        return 0
    return -1


@numba.njit(cache=True)
def laplacian1(u, out, ih2, bc0):
    n = u.shape[0]
    for i in range(n):
        a = _lo(i, n, bc0)
        b = _hi(i, n, bc0)
        s = 0.0
        if a >= 0:
            s += u[a]
        if b >= 0:
            s += u[b]
        out[i] = (s - 2.0 * u[i]) * ih2


@numba.njit(cache=True)
def laplacian2(u, out, ih2, bc0, bc1):
    n0, n1 = u.shape
    for i in range(n0):
        a = _lo(i, n0, bc0)
        b = _hi(i, n0, bc0)
        for j in range(n1):
            p = _lo(j, n1, bc1)
            q = _hi(j, n1, bc1)
            s = 0.0
            if a >= 0:
                s += u[a, j]
            if b >= 0:
                s += u[b, j]
            if p >= 0:
                s += u[i, p]
            if q >= 0:
                s += u[i, q]
            out[i, j] = (s - 4.0 * u[i, j]) * ih2


@numba.njit(cache=True)
def laplacian3(u, out, ih2, bc0, bc1, bc2):
    n0, n1, n2 = u.shape
    for i in range(n0):
        a = _lo(i, n0, bc0)
        b = _hi(i, n0, bc0)
        for j in range(n1):
            p = _lo(j, n1, bc1)
            q = _hi(j, n1, bc1)
            for k in range(n2):
                r = _lo(k, n2, bc2)
                t = _hi(k, n2, bc2)
                s = 0.0
                if a >= 0:
                    s += u[a, j, k]
                if b >= 0:
                    s += u[b, j, k]
                if p >= 0:
                    s += u[i, p, k]
                if q >= 0:
                    s += u[i, q, k]
                if r >= 0:
                    s += u[i, j, r]
                if t >= 0:
                    s += u[i, j, t]
                out[i, j, k] = (s - 6.0 * u[i, j, k]) * ih2


@numba.njit(inline="always")
def ignition_rate(c, amp, th, w, m1, pamp, ua, ub):
    r = 0.0
    z = (c - th) / w
    if z > 0.0:
        if z > 1.0:
            z = 1.0
        v = 1.0 - c
        if v < 0.0:
            v = 0.0
        if m1 == 2.0:
            p = v * v
        else:
            p = v ** m1
        r = amp * p * z * z * (3.0 - 2.0 * z)
    if pamp != 0.0 and c > ua and c < ub:
        q = (c - ua) / (ub - ua)
        r += pamp * 16.0 * q * q * (1.0 - q) * (1.0 - q)
    return r


@numba.njit(cache=True)
def ignition_rates(u, amp, th, w, m1, pamp, has_p, ua, ub, out):
    for i in range(u.shape[0]):
        pa = pamp[i] if has_p else 0.0
        out[i] = ignition_rate(u[i], amp[i], th[i], w, m1, pa, ua, ub)


@numba.njit(cache=True)
def update_ignition(u, lap, out, dt, amp, th, w, m1, pamp, has_p, ua, ub):
    """out = u + dt (lap + f(x, u)); clamps and reports statistics.

    All arrays are flat. Returns (min increment, max excursion, nan count).
    """
    dmin = np.inf
    exc = 0.0
    nan = 0
    for i in range(u.shape[0]):
        c = u[i]
        pa = pamp[i] if has_p else 0.0
        v = c + dt * (lap[i] + ignition_rate(c, amp[i], th[i], w, m1, pa, ua, ub))
        if not (v == v):
            nan += 1
        elif v < 0.0:
            if -v > exc:
                exc = -v
            v = 0.0
        elif v > 1.0:
            if v - 1.0 > exc:
                exc = v - 1.0
            v = 1.0
        if v - c < dmin:
            dmin = v - c
        out[i] = v
    return dmin, exc, nan


@numba.njit(cache=True)
def update_tabulated(u, lap, out, dt, table, du):
    """Same as ``update_ignition`` for an x-independent tabulated reaction."""
    dmin = np.inf
    exc = 0.0
    nan = 0
    n = table.shape[0]
    for i in range(u.shape[0]):
        c = u[i]
        s = c / du
        k = int(s)
        if k < 0:
            r = table[0]
        elif k >= n - 1:
            r = table[n - 1]
        else:
            fr = s - k
            r = table[k] * (1.0 - fr) + table[k + 1] * fr
        v = c + dt * (lap[i] + r)
        if not (v == v):
            nan += 1
        elif v < 0.0:
            if -v > exc:
                exc = -v
            v = 0.0
        elif v > 1.0:
            if v - 1.0 > exc:
                exc = v - 1.0
            v = 1.0
        if v - c < dmin:
            dmin = v - c
        out[i] = v
    return dmin, exc, nan


@numba.njit(cache=True)
def record_arrivals(u_old, u_new, times, t, dt, level):
    """First-crossing times with linear interpolation in t."""
    hit = 0
    for i in range(u_new.shape[0]):
        if times[i] == np.inf and u_new[i] >= level:
            a = u_old[i]
            b = u_new[i]
            if a >= level or b == a:
                times[i] = t
            else:
                times[i] = t + dt * (level - a) / (b - a)
            hit += 1
    return hit
