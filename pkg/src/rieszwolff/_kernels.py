"""Compiled inner loops: a mass-annotated k-d tree, range masses,
tree-code kernel summation and batched scale-set measures.

Everything here works on raw arrays so the public modules can stay in
plain numpy.  Distances are always formed as ``sqrt(dx*dx + dy*dy [+ dz*dz])``
with coordinate differences ``atom - x``; node bounds are computed with the
same operation order so that pruning decisions agree with per-atom tests
bit for bit.
"""

from __future__ import annotations

import math

import numba
import numpy as np
from numba import njit, prange

_CACHE = True
_EPS = 2.0 ** -53


@njit(cache=_CACHE, inline="always")
def squared_distance(arr, k, x):
    """|arr[k] - x|^2 summed coordinate by coordinate from the first."""
    diff = arr[k, 0] - x[0]
    acc = diff * diff
    diff = arr[k, 1] - x[1]
    acc += diff * diff
    if x.shape[0] == 3:
        diff = arr[k, 2] - x[2]
        acc += diff * diff
    else:
        for j in range(2, x.shape[0]):
            diff = arr[k, j] - x[j]
            acc += diff * diff
    return acc


@njit(cache=_CACHE, inline="always")
def row_distance(arr, k, x):
    return math.sqrt(squared_distance(arr, k, x))


@njit(cache=_CACHE)
def distances_to(pos, x):
    n = pos.shape[0]
    out = np.empty(n)
    for k in range(n):
        out[k] = row_distance(pos, k, x)
    return out


# ---------------------------------------------------------------------------
# tree construction


@njit(cache=_CACHE)
def build_tree(pos, w, leaf_size):
    """Median-split k-d tree.

    Returns the atom permutation and per-node arrays (index range, children,
    bounding box, mass, centroid, radius about the centroid).  Node 0 is the
    root and every child has a larger id than its parent.
    """
    n, d = pos.shape
    max_nodes = max(2 * n, 1)
    perm = np.arange(n)
    lo = np.zeros(max_nodes, np.int64)
    hi = np.zeros(max_nodes, np.int64)
    left = -np.ones(max_nodes, np.int64)
    right = -np.ones(max_nodes, np.int64)
    box_lo = np.zeros((max_nodes, d))
    box_hi = np.zeros((max_nodes, d))
    stack = np.zeros(max_nodes, np.int64)
    count = 1
    lo[0] = 0
    hi[0] = n
    sp = 1
    stack[0] = 0
    while sp > 0:
        sp -= 1
        node = stack[sp]
        a, b = lo[node], hi[node]
        for j in range(d):
            mn = np.inf
            mx = -np.inf
            for k in range(a, b):
                v = pos[perm[k], j]
                if v < mn:
                    mn = v
                if v > mx:
                    mx = v
            box_lo[node, j] = mn
            box_hi[node, j] = mx
        if b - a <= leaf_size:
            continue
        dim = 0
        ext = -1.0
        for j in range(d):
            e = box_hi[node, j] - box_lo[node, j]
            if e > ext:
                ext = e
                dim = j
        if ext <= 0.0:
            continue
        sub = perm[a:b].copy()
        keys = np.empty(b - a)
        for k in range(b - a):
            keys[k] = pos[sub[k], dim]
        order = np.argsort(keys, kind="mergesort")
        for k in range(b - a):
            perm[a + k] = sub[order[k]]
        mid = (a + b) // 2
        left[node] = count
        right[node] = count + 1
        lo[count], hi[count] = a, mid
        lo[count + 1], hi[count + 1] = mid, b
        stack[sp] = count
        stack[sp + 1] = count + 1
        sp += 2
        count += 2

    mass = np.zeros(count)
    centroid = np.zeros((count, d))
    radius = np.zeros(count)
    for node in range(count - 1, -1, -1):
        a, b = lo[node], hi[node]
        m = 0.0
        c = np.zeros((1, d))
        if left[node] < 0:
            for k in range(a, b):
                wk = w[perm[k]]
                m += wk
                for j in range(d):
                    c[0, j] += wk * pos[perm[k], j]
            for j in range(d):
                c[0, j] /= m
        else:
            l, r = left[node], right[node]
            m = mass[l] + mass[r]
            for j in range(d):
                c[0, j] = (mass[l] * centroid[l, j] + mass[r] * centroid[r, j]) / m
        mass[node] = m
        for j in range(d):
            centroid[node, j] = c[0, j]
        rad = 0.0
        for k in range(a, b):
            dist = row_distance(pos, perm[k], c[0])
            if dist > rad:
                rad = dist
        radius[node] = rad
    return (perm, lo[:count].copy(), hi[:count].copy(), left[:count].copy(),
            right[:count].copy(), box_lo[:count].copy(), box_hi[:count].copy(),
            mass, centroid, radius)


@njit(cache=_CACHE)
def _box_bounds(box_lo, box_hi, node, x):
    """Smallest and largest distance from x to any point of the node box,
    rounded consistently with row_distance."""
    near = 0.0
    far = 0.0
    for j in range(x.shape[0]):
        a = box_lo[node, j] - x[j]
        b = box_hi[node, j] - x[j]
        if a > 0.0:
            g = a
        elif b < 0.0:
            g = -b
        else:
            g = 0.0
        near += g * g
        f = max(abs(a), abs(b))
        far += f * f
    return math.sqrt(near), math.sqrt(far)


@njit(cache=_CACHE)
def shell_mass(ppos, pw, lo, hi, left, right, box_lo, box_hi, mass, x, r_in, r_out):
    """Mass of atoms with r_in <= |a - x| < r_out (pass r_in = 0 for a ball)."""
    if lo.shape[0] == 0:
        return 0.0
    total = 0.0
    stack = np.empty(128, np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        near, far = _box_bounds(box_lo, box_hi, node, x)
        if near >= r_out or far < r_in:
            continue
        if near >= r_in and far < r_out:
            total += mass[node]
            continue
        if left[node] < 0:
            for k in range(lo[node], hi[node]):
                dist = row_distance(ppos, k, x)
                if dist >= r_in and dist < r_out:
                    total += pw[k]
            continue
        stack[sp] = left[node]
        stack[sp + 1] = right[node]
        sp += 2
    return total


@njit(cache=_CACHE)
def shell_mass_batch(ppos, pw, lo, hi, left, right, box_lo, box_hi, mass, xs, r_in, r_out):
    m = xs.shape[0]
    out = np.empty(m)
    for i in range(m):
        out[i] = shell_mass(ppos, pw, lo, hi, left, right, box_lo, box_hi, mass,
                            xs[i], r_in[i], r_out[i])
    return out


@njit(cache=_CACHE)
def nearest_beyond(ppos, lo, hi, left, right, box_lo, box_hi, x, inner):
    """Distance from x to the nearest atom lying strictly beyond ``inner``."""
    best = np.inf
    if lo.shape[0] == 0:
        return best
    stack = np.empty(128, np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        near, far = _box_bounds(box_lo, box_hi, node, x)
        if near >= best or far <= inner:
            continue
        if left[node] < 0:
            for k in range(lo[node], hi[node]):
                dist = row_distance(ppos, k, x)
                if dist > inner and dist < best:
                    best = dist
            continue
        # visit the nearer child first
        l, r = left[node], right[node]
        nl, _ = _box_bounds(box_lo, box_hi, l, x)
        nr, _ = _box_bounds(box_lo, box_hi, r, x)
        if nl <= nr:
            stack[sp] = r
            stack[sp + 1] = l
        else:
            stack[sp] = l
            stack[sp + 1] = r
        sp += 2
    return best


# ---------------------------------------------------------------------------
# kernel sums


@njit(cache=_CACHE)
def direct_field(pos, w, targets, s, inner, outer):
    """Index-order sums of w (a - x) / |a - x|^(1+s) over inner < |a-x| < outer.

    Returns (values, terms, singular) where singular[i] flags an atom sitting
    exactly on target i inside the annulus.
    """
    m = targets.shape[0]
    n, d = pos.shape
    values = np.zeros((m, d))
    terms = np.zeros(m, np.int64)
    singular = np.zeros(m, np.bool_)
    for i in range(m):
        x = targets[i]
        acc = np.zeros(d)
        cnt = 0
        for k in range(n):
            dist = row_distance(pos, k, x)
            if dist > inner[i] and dist < outer[i]:
                coef = w[k] / dist ** (1.0 + s)
                for j in range(d):
                    acc[j] += coef * (pos[k, j] - x[j])
                cnt += 1
            elif dist == 0.0 and inner[i] == 0.0:
                singular[i] = True
        for j in range(d):
            values[i, j] = acc[j]
        terms[i] = cnt
    return values, terms, singular


def multi_index_tables(d, order):
    """Multi-indices of total degree <= order, sorted by degree.

    Returns (degree, minus_one, minus_two, parent, parent_dim, upto,
    exponent, lowered) where minus_one[k, i] is the position of k - e_i
    (or -1), parent/parent_dim give one way of building the monomial h^k
    from a lower one, upto[p] counts the indices of degree <= p, exponent
    holds the indices themselves and lowered[k, i, r] locates k - r e_i.
    """
    import itertools

    idx = []
    for p in range(order + 1):
        level = [k for k in itertools.product(range(p + 1), repeat=d) if sum(k) == p]
        idx.extend(sorted(level, reverse=True))
    where = {k: i for i, k in enumerate(idx)}
    n = len(idx)
    degree = np.array([sum(k) for k in idx], np.int64)
    minus_one = -np.ones((n, d), np.int64)
    minus_two = -np.ones((n, d), np.int64)
    parent = -np.ones(n, np.int64)
    parent_dim = -np.ones(n, np.int64)
    for pos, k in enumerate(idx):
        for i in range(d):
            if k[i] >= 1:
                km = list(k)
                km[i] -= 1
                minus_one[pos, i] = where[tuple(km)]
                if parent[pos] < 0:
                    parent[pos] = minus_one[pos, i]
                    parent_dim[pos] = i
            if k[i] >= 2:
                km = list(k)
                km[i] -= 2
                minus_two[pos, i] = where[tuple(km)]
    upto = np.array([int(np.sum(degree <= p)) for p in range(order + 1)], np.int64)
    exponent = np.array(idx, np.int64).reshape(n, d)
    # lowered[c, i, r] = position of k - r e_i (or -1)
    lowered = -np.ones((n, d, order + 1), np.int64)
    for pos, k in enumerate(idx):
        for i in range(d):
            for r in range(k[i] + 1):
                km = list(k)
                km[i] -= r
                lowered[pos, i, r] = where[tuple(km)]
    return degree, minus_one, minus_two, parent, parent_dim, upto, exponent, lowered


@njit(cache=_CACHE)
def node_moments(ppos, pw, lo, hi, left, right, centroid, parent, parent_dim,
                 exponent, lowered):
    """Moments sum_a w_a (a - c)^k of every node about its centroid.

    Leaves are summed directly; an internal node translates its children's
    moments one coordinate at a time with the binomial theorem.
    """
    count = lo.shape[0]
    ncoef = parent.shape[0]
    d = ppos.shape[1]
    order = lowered.shape[2] - 1
    moments = np.zeros((count, ncoef))
    mono = np.empty(ncoef)
    work = np.empty(ncoef)
    shifted = np.empty(ncoef)
    powers = np.empty(order + 1)
    binom = np.zeros((order + 1, order + 1))
    for a in range(order + 1):
        binom[a, 0] = 1.0
        for b in range(1, a + 1):
            binom[a, b] = binom[a - 1, b - 1] + (binom[a - 1, b] if b <= a - 1 else 0.0)
    h = np.empty(d)
    for node in range(count - 1, -1, -1):
        if left[node] < 0:
            for k in range(lo[node], hi[node]):
                for j in range(d):
                    h[j] = ppos[k, j] - centroid[node, j]
                mono[0] = pw[k]
                for c in range(1, ncoef):
                    mono[c] = mono[parent[c]] * h[parent_dim[c]]
                for c in range(ncoef):
                    moments[node, c] += mono[c]
            continue
        for child in (left[node], right[node]):
            for c in range(ncoef):
                work[c] = moments[child, c]
            for i in range(d):
                t = centroid[child, i] - centroid[node, i]
                powers[0] = 1.0
                for r in range(1, order + 1):
                    powers[r] = powers[r - 1] * t
                for c in range(ncoef):
                    e = exponent[c, i]
                    acc = 0.0
                    for r in range(e + 1):
                        acc += binom[e, r] * powers[r] * work[lowered[c, i, r]]
                    shifted[c] = acc
                for c in range(ncoef):
                    work[c] = shifted[c]
            for c in range(ncoef):
                moments[node, c] += work[c]
    return moments


@njit(cache=_CACHE)
def _tail_bound(rho, p, beta):
    """Majorant of the Taylor remainder beyond degree p, in units of
    mass / distance^s; returns inf when the geometric bound fails."""
    # b_n = binom(n + beta - 1, n) bounds the Gegenbauer coefficients
    b = 1.0
    power = 1.0
    for n in range(1, p + 2):
        b *= (n + beta - 1.0) / n
        power *= rho
    # U_p = sum_{n > p} b_n rho^n and U_{p-1}, via a ratio bound
    q = rho * (p + 1.0 + beta) / (p + 2.0)
    if q >= 1.0:
        return np.inf
    u_p = b * power / (1.0 - q)
    if p == 0:
        u_prev = (1.0 - rho) ** (-beta)
    else:
        b_prev = b * (p + 1.0) / (p + beta)
        q_prev = rho * (p + beta) / (p + 1.0)
        if q_prev >= 1.0:
            return np.inf
        u_prev = b_prev * power / rho / (1.0 - q_prev)
    return u_p + rho * u_prev


@njit(cache=_CACHE)
def _expansion(z, moments_row, ncols, minus_one, minus_two, degree, nu, coef, out):
    """Add sum_k (z a_k + a_{k-e}) M_k to out, where a_k are the Taylor
    coefficients of |z + h|^(-2 nu) in h."""
    d = z.shape[0]
    d2 = 0.0
    for j in range(d):
        d2 += z[j] * z[j]
    coef[0] = d2 ** (-nu)
    for c in range(1, ncols):
        kk = degree[c]
        acc1 = 0.0
        acc2 = 0.0
        for i in range(d):
            m1 = minus_one[c, i]
            if m1 >= 0:
                acc1 += z[i] * coef[m1]
            m2 = minus_two[c, i]
            if m2 >= 0:
                acc2 += coef[m2]
        coef[c] = -((2.0 * kk - 2.0 + 2.0 * nu) * acc1
                    + (kk - 2.0 + 2.0 * nu) * acc2) / (d2 * kk)
    for c in range(ncols):
        m = moments_row[c]
        for j in range(d):
            v = z[j] * coef[c]
            m1 = minus_one[c, j]
            if m1 >= 0:
                v += coef[m1]
            out[j] += v * m


@njit(cache=_CACHE)
def _tree_field_one(ppos, pw, lo, hi, left, right, box_lo, box_hi, mass, centroid,
                    radius, moments, degree, minus_one, minus_two, upto,
                    x, s, inner, theta, tol, dmin, out, coef, z):
    d = x.shape[0]
    order = upto.shape[0] - 1
    beta = 1.0 + s
    nu = 0.5 * beta
    for j in range(d):
        out[j] = 0.0
    truncation = 0.0
    majorant = 0.0
    abs_sum = 0.0
    terms = 0
    budget = tol / dmin ** s
    stack = np.empty(128, np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        near, far = _box_bounds(box_lo, box_hi, node, x)
        if far <= inner:
            continue
        h = radius[node]
        dc = row_distance(centroid, node, x)
        # single atoms are summed directly, so a lone atom is exact
        if hi[node] - lo[node] > 1 and near > inner and h <= theta * dc and h < dc:
            rho = h / dc
            scale = mass[node] / dc ** s
            chosen = -1
            err = 0.0
            for p in range(order + 1):
                err = scale * _tail_bound(rho, p, beta)
                if err <= budget * mass[node]:
                    chosen = p
                    break
            if chosen >= 0:
                for j in range(d):
                    z[j] = centroid[node, j] - x[j]
                _expansion(z, moments[node], upto[chosen], minus_one, minus_two,
                           degree, nu, coef, out)
                truncation += err
                majorant += scale * (1.0 + rho) * (1.0 - rho) ** (-beta)
                terms += 1
                continue
        if left[node] < 0:
            for k in range(lo[node], hi[node]):
                dist = row_distance(ppos, k, x)
                if dist > inner:
                    cf = pw[k] / dist ** (1.0 + s)
                    for j in range(d):
                        out[j] += cf * (ppos[k, j] - x[j])
                    abs_sum += pw[k] / dist ** s
                    terms += 1
            continue
        stack[sp] = left[node]
        stack[sp + 1] = right[node]
        sp += 2
    return truncation, abs_sum, majorant, terms


@njit(cache=_CACHE, parallel=True)
def tree_field(ppos, pw, lo, hi, left, right, box_lo, box_hi, mass, centroid, radius,
               moments, degree, minus_one, minus_two, upto, targets, s, inner, theta,
               tol, n_atoms):
    """Tree-code field with a certified per-target bound.

    A node that is well separated (radius <= theta * centroid distance) is
    replaced by its Taylor expansion about the centroid, at the lowest order
    whose remainder majorant fits the node's share of
    ``tol * total_mass / dmin^s``.  The majorant follows from the
    Gegenbauer expansion of |z + h|^(-1-s) along the segment to each atom.
    The bound returned also carries an allowance for floating-point rounding
    of this sum and of a direct sum over ``n_atoms`` terms.
    """
    m, d = targets.shape
    values = np.zeros((m, d))
    bounds = np.zeros(m)
    terms = np.zeros(m, np.int64)
    dmins = np.zeros(m)
    order = upto.shape[0] - 1
    ncoef = degree.shape[0]
    for i in prange(m):
        x = targets[i]
        dmin = nearest_beyond(ppos, lo, hi, left, right, box_lo, box_hi, x, inner[i])
        dmins[i] = dmin
        if not np.isfinite(dmin):
            continue
        out = np.zeros(d)
        coef = np.empty(ncoef)
        z = np.empty(d)
        trunc, abs_sum, major, cnt = _tree_field_one(
            ppos, pw, lo, hi, left, right, box_lo, box_hi, mass, centroid, radius,
            moments, degree, minus_one, minus_two, upto, x, s, inner[i], theta, tol,
            dmin, out, coef, z)
        for j in range(d):
            values[i, j] = out[j]
        terms[i] = cnt
        rounding = 2.0 * (cnt + n_atoms + 16) * _EPS * (abs_sum + major)
        rounding += 8.0 * d * (order + 1) ** 2 * _EPS * major
        bounds[i] = trunc + rounding
    return values, bounds, terms, dmins


# ---------------------------------------------------------------------------
# scale sets


@njit(cache=_CACHE)
def _log_piece(lo_r, hi_r, mass, delta, s, r_min, r_max):
    """log-length of [lo_r, hi_r) intersected with {r : mass / r^s > delta}
    and the window; mirrors the single-point piece formula."""
    if mass <= 0.0:
        return 0.0
    star = (mass / delta) ** (1.0 / s)
    a = lo_r if lo_r > r_min else r_min
    b = hi_r
    if star < b:
        b = star
    if r_max < b:
        b = r_max
    if b > a:
        return math.log(b / a)
    return 0.0


@njit(cache=_CACHE)
def _exact_segment(dist, wts, base_mass, next_start, delta, s, r_min, r_max):
    """Exact piecewise sum over sorted distances; the final piece runs to
    next_start.  Returns (log measure, mass after segment)."""
    total = 0.0
    m = base_mass
    k = 0
    n = dist.shape[0]
    while k < n:
        dk = dist[k]
        while k < n and dist[k] == dk:
            m += wts[k]
            k += 1
        end = dist[k] if k < n else next_start
        total += _log_piece(dk, end, m, delta, s, r_min, r_max)
    return total, m


_SHIFT = 48  # 16 buckets per octave of squared distance


@njit(cache=_CACHE)
def _bucket_of(v):
    return np.int64(np.float64(v).view(np.int64) >> _SHIFT)


@njit(cache=_CACHE)
def _bucket_edge(b):
    return math.sqrt(np.int64(b << _SHIFT).view(np.float64))


@njit(cache=_CACHE)
def scale_log_measure_one(pos, w, x, delta, s, r_min, r_max, d2, bucket, order_buf):
    """L(E(x, delta)) over [r_min, r_max] using a bucketed distance sort.

    Squared distances are bucketed by the high bits of their IEEE pattern,
    which is monotone for non-negative doubles.  A bucket whose status is
    decided by its mass and radius bounds is resolved in O(1); the rest are
    sorted and handled piece by piece.
    """
    n = pos.shape[0]
    if n == 0:
        return 0.0
    id_min = _bucket_of(r_min * r_min)
    id_top = id_min
    for k in range(n):
        acc = squared_distance(pos, k, x)
        d2[k] = acc
        b = _bucket_of(acc)
        bucket[k] = b
        if b > id_top:
            id_top = b
    if math.isinf(r_max):
        id_max = id_top
    else:
        id_max = min(id_top, _bucket_of(r_max * r_max))
    nb = id_max - id_min + 1
    counts = np.zeros(nb, np.int64)
    bmass = np.zeros(nb)
    bmin = np.full(nb, np.inf)
    bmax = np.zeros(nb)
    base = 0.0
    for k in range(n):
        b = bucket[k]
        if b < id_min:
            base += w[k]
            bucket[k] = -1
        elif b > id_max:
            bucket[k] = -2
        else:
            bi = b - id_min
            bucket[k] = bi
            counts[bi] += 1
            bmass[bi] += w[k]
            if d2[k] < bmin[bi]:
                bmin[bi] = d2[k]
            if d2[k] > bmax[bi]:
                bmax[bi] = d2[k]
    # start of the next nonempty bucket, or r_max
    nxt = np.empty(nb)
    following = r_max
    for bi in range(nb - 1, -1, -1):
        nxt[bi] = following
        if counts[bi] > 0:
            following = math.sqrt(bmin[bi])
    # a bucket lying wholly inside or outside the superlevel set is
    # resolved from its bounds; the clamped formulas below stay exact at
    # the window edges, so only undecided buckets are sorted
    need = np.zeros(nb, np.bool_)
    n_need = 0
    cum = base
    for bi in range(nb):
        if counts[bi] == 0:
            continue
        lo_r = _bucket_edge(bi + id_min)
        hi_r = _bucket_edge(bi + id_min + 1)
        if not (cum + bmass[bi] <= delta * lo_r ** s or cum > delta * hi_r ** s):
            need[bi] = True
            n_need += 1
        cum += bmass[bi]
    starts = np.zeros(nb + 1, np.int64)
    for bi in range(nb):
        starts[bi + 1] = starts[bi] + (counts[bi] if need[bi] else 0)
    fill = starts[:-1].copy()
    if n_need > 0:
        for k in range(n):
            bi = bucket[k]
            if bi >= 0 and need[bi]:
                order_buf[fill[bi]] = k
                fill[bi] += 1

    total = 0.0
    cum = base
    prev_end = r_min
    for bi in range(nb):
        if counts[bi] == 0:
            continue
        first = math.sqrt(bmin[bi])
        total += _log_piece(prev_end, first, cum, delta, s, r_min, r_max)
        if need[bi]:
            a = starts[bi]
            b = starts[bi + 1]
            seg = np.empty(b - a)
            for t in range(a, b):
                seg[t - a] = math.sqrt(d2[order_buf[t]])
            idx = np.argsort(seg, kind="mergesort")
            segs = np.empty(b - a)
            segw = np.empty(b - a)
            for t in range(b - a):
                segs[t] = seg[idx[t]]
                segw[t] = w[order_buf[a + idx[t]]]
            part, cum = _exact_segment(segs, segw, cum, nxt[bi], delta, s, r_min, r_max)
            total += part
        else:
            cum_after = cum + bmass[bi]
            if cum_after > delta * _bucket_edge(bi + id_min) ** s:
                # every piece inside the bucket lies in E: telescope
                last = math.sqrt(bmax[bi])
                a_r = max(first, r_min)
                b_r = min(last, r_max)
                if b_r > a_r:
                    total += math.log(b_r / a_r)
                total += _log_piece(last, nxt[bi], cum_after, delta, s, r_min, r_max)
            cum = cum_after
        prev_end = nxt[bi]
    if prev_end < r_max:
        total += _log_piece(prev_end, r_max, cum, delta, s, r_min, r_max)
    return total


@njit(cache=_CACHE, parallel=True)
def scale_log_measure_batch(pos, w, centers, delta, s, r_min, r_max):
    m = centers.shape[0]
    n = pos.shape[0]
    out = np.zeros(m)
    for i in prange(m):
        d2 = np.empty(n)
        bucket = np.empty(n, np.int64)
        order_buf = np.empty(n, np.int64)
        out[i] = scale_log_measure_one(pos, w, centers[i], delta, s, r_min, r_max,
                                       d2, bucket, order_buf)
    return out


def set_threads(count: int | None) -> None:
    """Cap the number of worker threads used by parallel kernels."""
    if count is None:
        return
    numba.set_num_threads(max(1, min(int(count), numba.config.NUMBA_NUM_THREADS)))
