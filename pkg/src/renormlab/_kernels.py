"""Compiled inner loops for map evaluation, iteration and branch inversion.

Family codes: 0 = affine h, 1 = Moebius h. All kernels take the map as the
scalar tuple ``(fam, t, lam, a)`` so they stay numba-friendly.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

AFFINE = 0
MOEBIUS = 1


@njit(cache=True)
def h_jet(fam, lam, a, u):
    if fam == AFFINE:
        s = 1.0 + lam
        return s * u + lam, s, 0.0, 0.0
    A = (lam + 1.0) * (1.0 + 0.5 * a)
    B = lam
    C = -0.5 * a * (lam + 1.0)
    den = C * u + 1.0
    det = A - B * C
    h1 = det / (den * den)
    h2 = -2.0 * C * h1 / den
    h3 = 6.0 * C * C * h1 / (den * den)
    return (A * u + B) / den, h1, h2, h3


@njit(cache=True)
def h_value(fam, lam, a, u):
    if fam == AFFINE:
        return (1.0 + lam) * u + lam
    A = (lam + 1.0) * (1.0 + 0.5 * a)
    C = -0.5 * a * (lam + 1.0)
    return (A * u + lam) / (C * u + 1.0)


@njit(cache=True)
def q_jet(t, x):
    ax = abs(x)
    s = 1.0 if x > 0.0 else (-1.0 if x < 0.0 else 0.0)
    if ax == 0.0:
        if t == 2.0:
            return 0.0, 0.0, -2.0, 0.0
        if t > 3.0:
            return 0.0, 0.0, 0.0, 0.0
        if t > 2.0:
            return 0.0, 0.0, 0.0, math.nan
        return 0.0, 0.0, math.nan, math.nan
    if t == 2.0:
        return -x * x, -2.0 * x, -2.0, 0.0
    p = ax ** (t - 1.0)
    return (
        -p * ax,
        -t * p * s,
        -t * (t - 1.0) * p / ax,
        -t * (t - 1.0) * (t - 2.0) * p / (ax * ax) * s,
    )


@njit(cache=True)
def f_value(fam, t, lam, a, x):
    if t == 2.0:
        return h_value(fam, lam, a, -x * x)
    return h_value(fam, lam, a, -(abs(x) ** t))


@njit(cache=True)
def f_jet(fam, t, lam, a, x):
    q0, q1, q2, q3 = q_jet(t, x)
    h0, h1, h2, h3 = h_jet(fam, lam, a, q0)
    return (
        h0,
        h1 * q1,
        h2 * q1 * q1 + h1 * q2,
        h3 * q1 * q1 * q1 + 3.0 * h2 * q1 * q2 + h1 * q3,
    )


@njit(cache=True)
def iterate_value(fam, t, lam, a, x, k):
    for _ in range(k):
        x = f_value(fam, t, lam, a, x)
    return x


@njit(cache=True)
def iterate_values(fam, t, lam, a, xs, k):
    out = np.empty_like(xs)
    for i in range(xs.size):
        out[i] = iterate_value(fam, t, lam, a, xs[i], k)
    return out


@njit(cache=True)
def iterate_values_lam(fam, t, lams, a, x0, k):
    """``f_lam^k(x0)`` for an array of parameters ``lams``."""
    out = np.empty_like(lams)
    for i in range(lams.size):
        out[i] = iterate_value(fam, t, lams[i], a, x0, k)
    return out


@njit(cache=True)
def iterate_jet(fam, t, lam, a, x, k, esc):
    """Jet of f^k at x plus orbit extremes; ``bad`` is the first escaping step or -1.

    Escape is tested on the intermediate values that are fed back into f.
    """
    v, d1, d2, d3 = x, 1.0, 0.0, 0.0
    lo = x
    hi = x
    bad = -1
    for step in range(k):
        if step > 0:
            if v < lo:
                lo = v
            if v > hi:
                hi = v
            if bad < 0 and (v < -1.0 - esc or v > 1.0 + esc):
                bad = step
        o0, o1, o2, o3 = f_jet(fam, t, lam, a, v)
        n1 = o1 * d1
        n2 = o2 * d1 * d1 + o1 * d2
        n3 = o3 * d1 * d1 * d1 + 3.0 * o2 * d1 * d2 + o1 * d3
        v, d1, d2, d3 = o0, n1, n2, n3
    return v, d1, d2, d3, lo, hi, bad


@njit(cache=True)
def iterate_jets(fam, t, lam, a, xs, k, esc):
    n = xs.size
    v = np.empty(n)
    d1 = np.empty(n)
    d2 = np.empty(n)
    d3 = np.empty(n)
    lo = np.empty(n)
    hi = np.empty(n)
    bad = np.empty(n, dtype=np.int64)
    for i in range(n):
        v[i], d1[i], d2[i], d3[i], lo[i], hi[i], bad[i] = iterate_jet(fam, t, lam, a, xs[i], k, esc)
    return v, d1, d2, d3, lo, hi, bad


@njit(cache=True)
def iterate_d1(fam, t, lam, a, x, k):
    v = x
    d = 1.0
    for _ in range(k):
        o0, o1, o2, o3 = f_jet(fam, t, lam, a, v)
        d *= o1
        v = o0
    return v, d


@njit(cache=True)
def invert_monotone(fam, t, lam, a, k, lo, hi, flo, fhi, y):
    """Solve f^k(x) = y for x in [lo, hi] where f^k is monotone there.

    ``flo``/``fhi`` are the (precomputed) values at the bracket ends; ``y``
    outside their span is clamped to the matching end. Safeguarded Newton.
    """
    inc = fhi > flo
    ymin = flo if inc else fhi
    ymax = fhi if inc else flo
    if y <= ymin:
        return lo if inc else hi
    if y >= ymax:
        return hi if inc else lo
    a_ = lo
    b_ = hi
    # secant start: exact for affine branches
    x = lo + (y - flo) * (hi - lo) / (fhi - flo)
    if not (x > a_ and x < b_):
        x = 0.5 * (a_ + b_)
    for _ in range(200):
        v, d = iterate_d1(fam, t, lam, a, x, k)
        r = v - y
        if r == 0.0:
            return x
        if (r > 0.0) == inc:
            b_ = x
        else:
            a_ = x
        xn = x - r / d if d != 0.0 else math.nan
        if not (xn > a_ and xn < b_):
            xn = 0.5 * (a_ + b_)
        if abs(xn - x) <= 2.2e-16 * abs(x) + 1e-300 or b_ - a_ <= 4.4e-16 * max(abs(a_), abs(b_)):
            return xn
        x = xn
    return x


@njit(cache=True)
def invert_monotone_many(fam, t, lam, a, k, lo, hi, flo, fhi, ys):
    out = np.empty_like(ys)
    for i in range(ys.size):
        out[i] = invert_monotone(fam, t, lam, a, k, lo, hi, flo, fhi, ys[i])
    return out


# -- double-double arithmetic ------------------------------------------------
# Used where f^(2^n) must be evaluated to better than eps/|I_n|: fixed points,
# renormalised maps and the critical orbit. Values are (hi, lo) pairs.

_SPLIT = 134217729.0  # 2^27 + 1


@njit(cache=True, inline="always")
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@njit(cache=True, inline="always")
def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


@njit(cache=True, inline="always")
def _two_prod(a, b):
    p = a * b
    c = _SPLIT * a
    ah = c - (c - a)
    al = a - ah
    c = _SPLIT * b
    bh = c - (c - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(cache=True, inline="always")
def dd_add(xh, xl, yh, yl):
    s, e = _two_sum(xh, yh)
    t, f = _two_sum(xl, yl)
    e += t
    s, e = _quick_two_sum(s, e)
    e += f
    return _quick_two_sum(s, e)


@njit(cache=True, inline="always")
def dd_mul(xh, xl, yh, yl):
    p, e = _two_prod(xh, yh)
    e += xh * yl + xl * yh
    return _quick_two_sum(p, e)


@njit(cache=True, inline="always")
def dd_div(xh, xl, yh, yl):
    q1 = xh / yh
    ph, pl = dd_mul(yh, yl, q1, 0.0)
    rh, rl = dd_add(xh, xl, -ph, -pl)
    q2 = rh / yh
    ph, pl = dd_mul(yh, yl, q2, 0.0)
    rh, rl = dd_add(rh, rl, -ph, -pl)
    q3 = rh / yh
    s, e = _quick_two_sum(q1, q2)
    return dd_add(s, e, q3, 0.0)


@njit(cache=True)
def f_value_dd(fam, t, lam, a, xh, xl):
    if t == 2.0:
        uh, ul = dd_mul(xh, xl, xh, xl)
    else:
        ax = abs(xh)
        if ax == 0.0:
            uh, ul = 0.0, 0.0
        else:
            v = ax**t
            # first-order correction for the low word of x
            uh, ul = _quick_two_sum(v, v * t * (xl if xh > 0.0 else -xl) / ax)
    uh, ul = -uh, -ul
    sh, sl = _two_sum(1.0, lam)
    if fam == AFFINE:
        ph, pl = dd_mul(sh, sl, uh, ul)
        return dd_add(ph, pl, lam, 0.0)
    Ah, Al = dd_mul(sh, sl, 1.0 + 0.5 * a, 0.0)
    Ch, Cl = dd_mul(sh, sl, -0.5 * a, 0.0)
    nh, nl = dd_mul(Ah, Al, uh, ul)
    nh, nl = dd_add(nh, nl, lam, 0.0)
    dh, dl = dd_mul(Ch, Cl, uh, ul)
    dh, dl = dd_add(dh, dl, 1.0, 0.0)
    return dd_div(nh, nl, dh, dl)


@njit(cache=True)
def iterate_dd(fam, t, lam, a, xh, xl, k):
    for _ in range(k):
        xh, xl = f_value_dd(fam, t, lam, a, xh, xl)
    return xh, xl


@njit(cache=True)
def iterate_values_dd(fam, t, lam, a, xs, k):
    out = np.empty_like(xs)
    for i in range(xs.size):
        h, l = iterate_dd(fam, t, lam, a, xs[i], 0.0, k)
        out[i] = h + l
    return out


@njit(cache=True)
def displacement_dd(fam, t, lam, a, x, k):
    """``f^k(x) - x`` evaluated in double-double, rounded to double."""
    h, l = iterate_dd(fam, t, lam, a, x, 0.0, k)
    h, l = dd_add(h, l, -x, 0.0)
    return h + l


@njit(cache=True)
def critical_orbit_dd(fam, t, lam, a, k):
    out = np.empty(k + 1)
    h, l = 0.0, 0.0
    out[0] = 0.0
    for j in range(1, k + 1):
        h, l = f_value_dd(fam, t, lam, a, h, l)
        out[j] = h + l
    return out


# -- itineraries and the conjugacy -------------------------------------------
# Partition data are passed as ``radii = |p_0| > ... > |p_(N+1)|``. Cell codes:
# 0 = branch, 1 = residual cell, 2 = partition endpoint, 3 = outside [-1, 1].

CELL_BRANCH = 0
CELL_RESIDUAL = 1
CELL_BOUNDARY = 2
CELL_OUTSIDE = 3


@njit(cache=True)
def locate_cell(radii, y, btol):
    """``(code, index, side)``; index is the level or the endpoint index."""
    ay = abs(y)
    side = 1 if y > 0.0 else -1
    m = radii.size
    for j in range(m):
        if abs(ay - radii[j]) <= btol:
            return CELL_BOUNDARY, j, side
    if ay > radii[0]:
        return CELL_OUTSIDE, -1, side
    if ay < radii[m - 1]:
        return CELL_RESIDUAL, -1, 0
    for n in range(m - 1):
        if ay < radii[n] and ay > radii[n + 1]:
            return CELL_BRANCH, n, side
    return CELL_OUTSIDE, -1, side


@njit(cache=True)
def itinerary_kernel(fam, t, lam, a, radii, x, kmax, btol, eps_target, levels, sides):
    """Forward F-itinerary of x, written into ``levels``/``sides``.

    Stops after ``kmax`` symbols, on entering the residual cell or a partition
    endpoint, or once the estimated cylinder length drops below ``eps_target``.
    Returns ``(length, code, index, side, y)`` describing the terminal cell and
    the point of the orbit inside it.
    """
    y = x
    logd = 0.0
    j = 0
    while True:
        code, idx, side = locate_cell(radii, y, btol)
        if code != CELL_BRANCH:
            return j, code, idx, side, y
        levels[j] = idx
        sides[j] = side
        j += 1
        cell = radii[idx] - radii[idx + 1]
        if j >= kmax or math.log(cell) - logd < math.log(eps_target):
            return j, CELL_BRANCH, idx, side, y
        v, d = iterate_d1(fam, t, lam, a, y, 2**idx)
        logd += math.log(abs(d))
        y = v


@njit(cache=True)
def _branch_domain(radii, n, side):
    if side > 0:
        return radii[n + 1], radii[n]
    return -radii[n], -radii[n + 1]


@njit(cache=True)
def _pull_back(fam, t, lam, a, radii, flo, fhi, levels, sides, count, z, rtol):
    """Apply the inverse branches for symbols ``count-1 .. 0`` to z.

    Returns ``(value, ok)``; ok is False when z misses a branch image.
    """
    ok = True
    for i in range(count - 1, -1, -1):
        n = levels[i]
        s = 0 if sides[i] < 0 else 1
        lo, hi = _branch_domain(radii, n, sides[i])
        a_ = flo[n, s]
        b_ = fhi[n, s]
        ymin = min(a_, b_)
        ymax = max(a_, b_)
        slack = rtol * (ymax - ymin)
        if z < ymin - slack or z > ymax + slack:
            ok = False
        z = invert_monotone(fam, t, lam, a, 2**n, lo, hi, a_, b_, z)
    return z, ok


@njit(cache=True)
def conjugacy_kernel(gp, g_radii, fp, f_radii, f_lo, f_hi, xs, kmax, btol, eps_target, rtol):
    """``H(x)`` for ``f o H = H o g`` with rigorous cylinder bounds.

    ``gp``/``fp`` are the ``(fam, t, lam, a)`` tuples of the two maps. The
    terminal cell of the g-itinerary is matched affinely onto the f-cell with
    the same label, then pulled back through the f inverse branches.
    Returns ``(y, err, code, steps, ok)`` arrays.
    """
    gfam, gt, glam, ga = gp
    ffam, ft, flam, fa = fp
    n = xs.size
    ys = np.empty(n)
    errs = np.empty(n)
    codes = np.empty(n, dtype=np.int64)
    steps = np.empty(n, dtype=np.int64)
    oks = np.empty(n, dtype=np.bool_)
    levels = np.empty(kmax, dtype=np.int64)
    sides = np.empty(kmax, dtype=np.int64)
    top = f_radii.size - 1
    for i in range(n):
        x = xs[i]
        j, code, idx, side, y = itinerary_kernel(gfam, gt, glam, ga, g_radii, x, kmax, btol, eps_target, levels, sides)
        if code == CELL_OUTSIDE:
            ys[i] = math.nan
            errs[i] = math.inf
            codes[i] = code
            steps[i] = j
            oks[i] = False
            continue
        if code == CELL_BRANCH:
            # terminal symbol is levels[j-1]; its own branch is not inverted
            count = j - 1
            glo, ghi = _branch_domain(g_radii, idx, side)
            clo, chi = _branch_domain(f_radii, idx, side)
            z = clo + (y - glo) * (chi - clo) / (ghi - glo)
        elif code == CELL_RESIDUAL:
            count = j
            clo, chi = -f_radii[top], f_radii[top]
            z = y * f_radii[top] / g_radii[top]
        else:
            count = j
            z = side * f_radii[idx]
            clo, chi = z, z
        v, ok1 = _pull_back(ffam, ft, flam, fa, f_radii, f_lo, f_hi, levels, sides, count, z, rtol)
        e1, ok2 = _pull_back(ffam, ft, flam, fa, f_radii, f_lo, f_hi, levels, sides, count, clo, rtol)
        e2, ok3 = _pull_back(ffam, ft, flam, fa, f_radii, f_lo, f_hi, levels, sides, count, chi, rtol)
        ys[i] = v
        errs[i] = max(abs(v - e1), abs(e2 - v))
        codes[i] = code
        steps[i] = j
        oks[i] = ok1 and ok2 and ok3
    return ys, errs, codes, steps, oks
