"""Compiled inner loops.

Everything here works on plain arrays so that it can be shared by the
public API (one structure at a time) and the campaign drivers (millions of
structures).  Status codes are returned instead of raising, the Python
wrappers turn them into exceptions.
"""

import numba as nb
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
M1 = np.uint64(0xBF58476D1CE4E5B9)
M2 = np.uint64(0x94D049BB133111EB)
S30 = np.uint64(30)
S27 = np.uint64(27)
S31 = np.uint64(31)
S11 = np.uint64(11)
INV_2_53 = 1.0 / 9007199254740992.0

MIN_DISTANCE = 1e-9
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
GOLDEN_TOL = 1e-8

OK = 0
ERR_COINCIDENT = 1
ERR_NOCONVERGE = 2

_INVPHI = 0.6180339887498949


# -- random streams ---------------------------------------------------------

@nb.njit(cache=True)
def mix64(z):
    z = (z ^ (z >> S30)) * M1
    z = (z ^ (z >> S27)) * M2
    return z ^ (z >> S31)


@nb.njit(cache=True)
def stream_state(base, key):
    """State of stream ``key`` under ``base`` (see seeding.derive)."""
    return mix64(base ^ key)


@nb.njit(cache=True)
def next_uniform(state):
    state = state + GOLDEN
    x = mix64(state)
    return state, np.float64(x >> S11) * INV_2_53


# -- geometry helpers -------------------------------------------------------

@nb.njit(cache=True)
def min_pair_distance(coords):
    n = coords.shape[0]
    best = np.inf
    for i in range(n):
        for j in range(i + 1, n):
            d = 0.0
            for a in range(3):
                x = coords[i, a] - coords[j, a]
                d += x * x
            if d < best:
                best = d
    return np.sqrt(best)


@nb.njit(cache=True)
def draw_structure(state, n, out):
    """Fill ``out`` (n, 3) with corners plus uniform intermediates.

    Redraws the whole set of intermediates until the distance floor holds.
    Returns the advanced stream state.
    """
    for a in range(3):
        out[0, a] = 0.0
        out[n - 1, a] = 1.0
    while True:
        for i in range(1, n - 1):
            for a in range(3):
                state, u = next_uniform(state)
                out[i, a] = u
        if n <= 2 or min_pair_distance(out) > MIN_DISTANCE:
            return state


@nb.njit(cache=True)
def draw_displaced(state, coords, side, move_terminals, out):
    """Uniform offsets in [-side/2, side/2]^3 per site, redraw on floor hit."""
    n = coords.shape[0]
    lo = 0 if move_terminals else 1
    hi = n if move_terminals else n - 1
    while True:
        for i in range(n):
            for a in range(3):
                out[i, a] = coords[i, a]
        for i in range(lo, hi):
            for a in range(3):
                state, u = next_uniform(state)
                out[i, a] = coords[i, a] + side * (u - 0.5)
        if min_pair_distance(out) > MIN_DISTANCE:
            return state


# -- Hamiltonian and eigensolver --------------------------------------------

@nb.njit(cache=True)
def build_hamiltonian(coords, h):
    n = coords.shape[0]
    for i in range(n):
        h[i, i] = 0.0
        for j in range(i + 1, n):
            d2 = 0.0
            for a in range(3):
                x = coords[i, a] - coords[j, a]
                d2 += x * x
            d = np.sqrt(d2)
            if d <= MIN_DISTANCE:
                return ERR_COINCIDENT
            c = 1.0 / (d2 * d)
            h[i, j] = c
            h[j, i] = c
    return OK


@nb.njit(cache=True)
def jacobi_eigh(h, w, v):
    """Cyclic Jacobi diagonalisation of symmetric ``h``.

    Writes ascending eigenvalues to ``w`` and orthonormal eigenvectors to
    the columns of ``v``.  ``h`` is left untouched.  The stopping rule is an
    off-diagonal Frobenius norm below JACOBI_TOL, relative to the matrix norm
    whenever that exceeds one.
    """
    n = h.shape[0]
    a = h.copy()
    vv = np.eye(n)
    norm = 0.0
    for i in range(n):
        for j in range(n):
            norm += a[i, j] * a[i, j]
    tol = JACOBI_TOL * max(1.0, np.sqrt(norm))

    status = ERR_NOCONVERGE
    for sweep in range(JACOBI_MAX_SWEEPS + 1):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        if np.sqrt(2.0 * off) < tol:
            status = OK
            break
        if sweep == JACOBI_MAX_SWEEPS:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = vv[k, p]
                    vkq = vv[k, q]
                    vv[k, p] = c * vkp - s * vkq
                    vv[k, q] = s * vkp + c * vkq

    diag = np.empty(n)
    for i in range(n):
        diag[i] = a[i, i]
    order = np.argsort(diag, kind="mergesort")
    for j in range(n):
        w[j] = diag[order[j]]
        for i in range(n):
            v[i, j] = vv[i, order[j]]
    return status


# -- transport --------------------------------------------------------------

@nb.njit(cache=True)
def _prob(c, w, t):
    re = 0.0
    im = 0.0
    for k in range(c.shape[0]):
        re += c[k] * np.cos(w[k] * t)
        im -= c[k] * np.sin(w[k] * t)
    return re * re + im * im


@nb.njit(cache=True)
def max_transfer(w, v, src, dst, window, n_grid):
    """Maximum of |<dst|exp(-iHt)|src>|^2 over [0, window].

    Dense uniform grid followed by golden-section refinement around the
    best grid point.  Returns (value, argmax time).
    """
    n = w.shape[0]
    c = np.empty(n)
    for k in range(n):
        c[k] = v[dst, k] * v[src, k]
    dt = window / (n_grid - 1)
    wr = np.ones(n)
    wi = np.zeros(n)
    zr = np.empty(n)
    zi = np.empty(n)
    for k in range(n):
        zr[k] = np.cos(w[k] * dt)
        zi[k] = -np.sin(w[k] * dt)

    best = -1.0
    jbest = 0
    for j in range(n_grid):
        re = 0.0
        im = 0.0
        for k in range(n):
            re += c[k] * wr[k]
            im += c[k] * wi[k]
        p = re * re + im * im
        if p > best:
            best = p
            jbest = j
        for k in range(n):
            r = wr[k] * zr[k] - wi[k] * zi[k]
            wi[k] = wr[k] * zi[k] + wi[k] * zr[k]
            wr[k] = r

    tb = window if jbest == n_grid - 1 else jbest * dt
    pb = _prob(c, w, tb)

    lo = max(0.0, (jbest - 1) * dt)
    hi = min(window, (jbest + 1) * dt)
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1 = _prob(c, w, x1)
    f2 = _prob(c, w, x2)
    while hi - lo > GOLDEN_TOL:
        if f1 < f2:
            lo = x1
            x1 = x2
            f1 = f2
            x2 = lo + _INVPHI * (hi - lo)
            f2 = _prob(c, w, x2)
        else:
            hi = x2
            x2 = x1
            f2 = f1
            x1 = hi - _INVPHI * (hi - lo)
            f1 = _prob(c, w, x1)
    tr = 0.5 * (lo + hi)
    pr = _prob(c, w, tr)
    if pr > pb:
        return pr, tr
    return pb, tb


@nb.njit(cache=True)
def efficiency_coords(coords, window, n_grid):
    """(status, efficiency, t_star) for one coordinate array."""
    n = coords.shape[0]
    h = np.empty((n, n))
    status = build_hamiltonian(coords, h)
    if status != OK:
        return status, np.nan, np.nan
    w = np.empty(n)
    v = np.empty((n, n))
    status = jacobi_eigh(h, w, v)
    if status != OK:
        return status, np.nan, np.nan
    eps, ts = max_transfer(w, v, 0, n - 1, window, n_grid)
    return OK, eps, ts


@nb.njit(cache=True)
def screen_chunk(n, base, start, count, window, n_grid, coords_out, eps_out,
                 tstar_out):
    """Generate and evaluate structures ``start .. start+count-1``."""
    buf = np.empty((n, 3))
    for k in range(count):
        state = stream_state(base, np.uint64(start + k))
        draw_structure(state, n, buf)
        for i in range(n):
            for a in range(3):
                coords_out[k, i, a] = buf[i, a]
        status, eps, ts = efficiency_coords(buf, window, n_grid)
        if status != OK:
            return status, k
        eps_out[k] = eps
        tstar_out[k] = ts
    return OK, count


@nb.njit(cache=True)
def robustness_trials(coords, base, trials, side, move_terminals, window,
                      n_grid, eps_out):
    n = coords.shape[0]
    buf = np.empty((n, 3))
    for k in range(trials):
        state = stream_state(base, np.uint64(k))
        draw_displaced(state, coords, side, move_terminals, buf)
        status, eps, ts = efficiency_coords(buf, window, n_grid)
        if status != OK:
            return status
        eps_out[k] = eps
    return OK


# -- similarity -------------------------------------------------------------

@nb.njit(cache=True)
def _candidate_terms(a, b, perm, mirror):
    """(axial dot, planar dot, planar cross, |b|^2) for one candidate."""
    m = a.shape[0]
    zz = 0.0
    dot = 0.0
    cross = 0.0
    for i in range(m):
        j = perm[i]
        bx = b[j, 0]
        by = -b[j, 1] if mirror else b[j, 1]
        bz = b[j, 2]
        zz += a[i, 2] * bz
        dot += a[i, 0] * bx + a[i, 1] * by
        cross += a[i, 1] * bx - a[i, 0] * by
    return zz, dot, cross


@nb.njit(cache=True)
def _direct_cost(a, b, perm, mirror, angle):
    m = a.shape[0]
    c = np.cos(angle)
    s = np.sin(angle)
    total = 0.0
    for i in range(m):
        j = perm[i]
        bx = b[j, 0]
        by = -b[j, 1] if mirror else b[j, 1]
        rx = c * bx - s * by
        ry = s * bx + c * by
        dx = rx - a[i, 0]
        dy = ry - a[i, 1]
        dz = b[j, 2] - a[i, 2]
        total += dx * dx + dy * dy + dz * dz
    return total


@nb.njit(cache=True)
def best_alignment(a, b, perms):
    """Minimise sum |R M P b - a|^2 over permutations, mirror and rotation.

    ``a`` and ``b`` hold intermediate sites in the canonical frame.  Returns
    (cost, permutation row, mirror flag, angle); cost is the plain sum of
    squared mismatches.  The closed form picks candidates, the cost of every
    near-optimal candidate is then recomputed directly to avoid the
    cancellation of the closed form near zero.
    """
    m = a.shape[0]
    if m == 0:
        return 0.0, 0, False, 0.0
    na = 0.0
    nb_ = 0.0
    for i in range(m):
        for k in range(3):
            na += a[i, k] * a[i, k]
            nb_ += b[i, k] * b[i, k]
    n_perm = perms.shape[0]
    closed = np.empty(2 * n_perm)
    angles = np.empty(2 * n_perm)
    best = np.inf
    for r in range(n_perm):
        for mi in range(2):
            zz, dot, cross = _candidate_terms(a, b, perms[r], mi == 1)
            cost = na + nb_ - 2.0 * zz - 2.0 * np.sqrt(dot * dot + cross * cross)
            if dot == 0.0 and cross == 0.0:
                ang = 0.0
            else:
                ang = np.arctan2(cross, dot)
                if ang < 0.0:
                    ang += 2.0 * np.pi
            closed[2 * r + mi] = cost
            angles[2 * r + mi] = ang
            if cost < best:
                best = cost
    slack = 1e-12 * max(1.0, na + nb_)
    out_cost = np.inf
    out_r = 0
    out_m = False
    out_ang = 0.0
    for idx in range(2 * n_perm):
        if closed[idx] <= best + slack:
            r = idx // 2
            mi = idx % 2 == 1
            cost = _direct_cost(a, b, perms[r], mi, angles[idx])
            if cost < out_cost:
                out_cost = cost
                out_r = r
                out_m = mi
                out_ang = angles[idx]
    return out_cost, out_r, out_m, out_ang


@nb.njit(cache=True)
def pairwise_costs(frames, perms, out):
    """Best alignment cost for every unordered pair, row-major (i < j)."""
    k = frames.shape[0]
    pos = 0
    for i in range(k):
        for j in range(i + 1, k):
            cost, r, mi, ang = best_alignment(frames[i], frames[j], perms)
            out[pos] = cost
            pos += 1
