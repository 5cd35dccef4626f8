"""Compiled stencils and the explicit time-stepping loop.

Everything here works on raw arrays so it can be jitted; the public
wrappers live in :mod:`fbmcf.geometry` and :mod:`fbmcf.flow`.

Conventions
-----------
Nodes are ``(r[i], z[i])`` in the profile half-plane (or ``(x, y)`` in planar
mode).  The tangent ``T`` points along increasing node index, the normal is
``nu = orient * J T`` with ``J`` the counter-clockwise quarter turn, and the
principal curvatures are ``lam1 = -<X_ss, nu>`` (profile) and
``lam2 = nu_r / r`` (rotation).  A round sphere with outward normal has
``lam1 = lam2 = 1/rho``.

End kinds: ``END_FREE`` is unused by the stepper but accepted by the
geometry (one-sided stencils, no constraint); ``END_AXIS`` reflects across
``r = 0``; ``END_BARRIER`` depends on the barrier kind: a plane reflects the
neighbour across the plane (exact symmetry of the free-boundary problem), a
sphere uses one-sided stencils with the tangent pinned to the barrier normal
and a closed-form placement of the boundary node on the sphere.
"""

import numpy as np
from numba import njit

END_FREE = 0
END_AXIS = 1
END_BARRIER = 2

BARRIER_NONE = 0
BARRIER_PLANE = 1
BARRIER_SPHERE = 2

# advance() status codes
ST_STEPS = 0
ST_TIME = 1
ST_BLOWUP = 2
ST_REDISTRIBUTE = 3
ST_STEADY = 4
ST_CFL = 5
ST_MEAN_CONVEX = 6
ST_DT_FLOOR = 7


@njit(cache=True)
def _barrier_normal(kind, bpar, x, y):
    """Unit barrier normal (with orientation) at a point of the profile plane."""
    if kind == BARRIER_PLANE:
        return bpar[6] * bpar[0], bpar[6] * bpar[1]
    dx = x - bpar[3]
    dy = y - bpar[4]
    nr = np.sqrt(dx * dx + dy * dy)
    if nr == 0.0:
        return 0.0, 0.0
    return bpar[6] * dx / nr, bpar[6] * dy / nr


@njit(cache=True)
def _reflect_plane(bpar, x, y):
    s = bpar[0] * x + bpar[1] * y - bpar[2]
    return x - 2.0 * s * bpar[0], y - 2.0 * s * bpar[1]


@njit(cache=True)
def _project_barrier(kind, bpar, x, y):
    if kind == BARRIER_PLANE:
        s = bpar[0] * x + bpar[1] * y - bpar[2]
        return x - s * bpar[0], y - s * bpar[1]
    dx = x - bpar[3]
    dy = y - bpar[4]
    nr = np.sqrt(dx * dx + dy * dy)
    return bpar[3] + bpar[5] * dx / nr, bpar[4] + bpar[5] * dy / nr


@njit(cache=True)
def _fd_weights(x1, x2, x3):
    """Weights for f'(0) and f''(0) from samples at ``0, x1, x2, x3``.

    Lagrange differentiation on four (possibly unevenly spaced) nodes:
    third order for the first derivative, second order for the second.
    """
    xs = np.array([0.0, x1, x2, x3])
    w1 = np.zeros(4)
    w2 = np.zeros(4)
    for j in range(4):
        den = 1.0
        for m in range(4):
            if m != j:
                den *= xs[j] - xs[m]
        # coefficients of prod_{m != j} (x - xs[m]) at x = 0: e1 (linear), e2 (quadratic)
        lin = 0.0
        quad = 0.0
        others = np.empty(3)
        k = 0
        for m in range(4):
            if m != j:
                others[k] = -xs[m]
                k += 1
        # (x + a)(x + b)(x + c) = x^3 + (a+b+c) x^2 + (ab+bc+ca) x + abc
        quad = others[0] + others[1] + others[2]
        lin = others[0] * others[1] + others[1] * others[2] + others[2] * others[0]
        w1[j] = lin / den
        w2[j] = 2.0 * quad / den
    return w1, w2


@njit(cache=True)
def _end_indices(n, end):
    if end == 0:
        return 0, 1, 2, 3
    return n - 1, n - 2, n - 3, n - 4


@njit(cache=True)
def _one_sided(r, z, end):
    """Arclength derivatives ``X_s, X_ss`` at an end from four chord-spaced nodes.

    The derivative is taken along increasing node index.
    """
    a, b, c, d = _end_indices(r.size, end)
    s1 = np.hypot(r[b] - r[a], z[b] - z[a])
    s2 = s1 + np.hypot(r[c] - r[b], z[c] - z[b])
    s3 = s2 + np.hypot(r[d] - r[c], z[d] - z[c])
    w1, w2 = _fd_weights(s1, s2, s3)
    sgn = 1.0 if end == 0 else -1.0
    sr = sgn * (w1[0] * r[a] + w1[1] * r[b] + w1[2] * r[c] + w1[3] * r[d])
    sz = sgn * (w1[0] * z[a] + w1[1] * z[b] + w1[2] * z[c] + w1[3] * z[d])
    ssr = w2[0] * r[a] + w2[1] * r[b] + w2[2] * r[c] + w2[3] * r[d]
    ssz = w2[0] * z[a] + w2[1] * z[b] + w2[2] * z[c] + w2[3] * z[d]
    return sr, sz, ssr, ssz


@njit(cache=True)
def curve_geometry(r, z, axisym, closed, end0, end1, bkind, bpar, orient):
    """Per-node tangent, normal, speed |X_u| and principal curvatures.

    Curvatures use chord-length (nonuniform) stencils so that uneven node
    spacing does not bias them; ``speed`` is the index-parameter metric
    factor, needed for material-coordinate quantities.
    """
    n = r.size
    lam1 = np.empty(n)
    lam2 = np.empty(n)
    nur = np.empty(n)
    nuz = np.empty(n)
    tr = np.empty(n)
    tz = np.empty(n)
    speed = np.empty(n)
    for i in range(n):
        onesided = False
        kind = END_FREE
        if closed:
            im = (i - 1) % n
            ip = (i + 1) % n
            xm, ym = r[im], z[im]
            xp, yp = r[ip], z[ip]
        elif i == 0 or i == n - 1:
            if i == 0:
                kind = end0
                nb = 1
            else:
                kind = end1
                nb = n - 2
            if kind == END_AXIS:
                gx, gy = -r[nb], z[nb]
            elif kind == END_BARRIER and bkind == BARRIER_PLANE:
                gx, gy = _reflect_plane(bpar, r[nb], z[nb])
            else:
                onesided = True
                gx, gy = 0.0, 0.0
            if i == 0:
                xm, ym, xp, yp = gx, gy, r[1], z[1]
            else:
                xm, ym, xp, yp = r[n - 2], z[n - 2], gx, gy
        else:
            xm, ym = r[i - 1], z[i - 1]
            xp, yp = r[i + 1], z[i + 1]

        if onesided:
            e = 0 if i == 0 else 1
            sr, sz, ssr, ssz = _one_sided(r, z, e)
            a, b, c, d = _end_indices(n, e)
            sgn = 1.0 if e == 0 else -1.0
            ur = sgn * (-11.0 * r[a] + 18.0 * r[b] - 9.0 * r[c] + 2.0 * r[d]) / 6.0
            uz = sgn * (-11.0 * z[a] + 18.0 * z[b] - 9.0 * z[c] + 2.0 * z[d]) / 6.0
            sp = np.sqrt(ur * ur + uz * uz)
            if kind == END_BARRIER:
                # pin the tangent to the barrier normal (sign follows the mesh)
                br, bz = _barrier_normal(bkind, bpar, r[i], z[i])
                if br * sr + bz * sz < 0.0:
                    br, bz = -br, -bz
                sr, sz = br, bz
        else:
            hm = np.hypot(r[i] - xm, z[i] - ym)
            hp = np.hypot(xp - r[i], yp - z[i])
            den = hm * hp * (hm + hp)
            sr = (hm * hm * (xp - r[i]) + hp * hp * (r[i] - xm)) / den
            sz = (hm * hm * (yp - z[i]) + hp * hp * (z[i] - ym)) / den
            ssr = 2.0 * (hm * (xp - r[i]) - hp * (r[i] - xm)) / den
            ssz = 2.0 * (hm * (yp - z[i]) - hp * (z[i] - ym)) / den
            ur = 0.5 * (xp - xm)
            uz = 0.5 * (yp - ym)
            sp = np.sqrt(ur * ur + uz * uz)
        tn = np.sqrt(sr * sr + sz * sz)
        t_r = sr / tn
        t_z = sz / tn
        n_r = -orient * t_z
        n_z = orient * t_r
        k1 = -(ssr * n_r + ssz * n_z)
        if axisym:
            if r[i] == 0.0:
                k2 = k1
            else:
                k2 = n_r / r[i]
        else:
            k2 = 0.0
        lam1[i] = k1
        lam2[i] = k2
        nur[i] = n_r
        nuz[i] = n_z
        tr[i] = t_r
        tz[i] = t_z
        speed[i] = sp
    return lam1, lam2, nur, nuz, tr, tz, speed


@njit(cache=True)
def close_sphere_end(r, z, end, bpar):
    """Place a sphere-barrier end node so the one-sided tangent is normal to S.

    The end tangent is ``w0 X0 + sum_j w_j X_j``; it is parallel to
    ``X0 - c`` exactly when ``X0`` lies on the line through the centre and
    ``W = -sum_j w_j X_j / w0``.  The chord-length weights depend on ``X0``
    so the placement is iterated a few times.
    """
    n = r.size
    a, b, c, d = _end_indices(n, end)
    for _ in range(4):
        s1 = np.hypot(r[b] - r[a], z[b] - z[a])
        s2 = s1 + np.hypot(r[c] - r[b], z[c] - z[b])
        s3 = s2 + np.hypot(r[d] - r[c], z[d] - z[c])
        w1, _w2 = _fd_weights(s1, s2, s3)
        wr = -(w1[1] * r[b] + w1[2] * r[c] + w1[3] * r[d]) / w1[0] - bpar[3]
        wz = -(w1[1] * z[b] + w1[2] * z[c] + w1[3] * z[d]) / w1[0] - bpar[4]
        wn = np.sqrt(wr * wr + wz * wz)
        er = wr / wn
        ez = wz / wn
        # pick the antipodal root nearest the current position
        cr = r[a] - bpar[3]
        cz = z[a] - bpar[4]
        if er * cr + ez * cz < 0.0:
            er, ez = -er, -ez
        r[a] = bpar[3] + bpar[5] * er
        z[a] = bpar[4] + bpar[5] * ez


@njit(cache=True)
def enforce_ends(r, z, closed, end0, end1, bkind, bpar):
    if closed:
        return
    for e in range(2):
        kind = end0 if e == 0 else end1
        idx = 0 if e == 0 else r.size - 1
        if kind == END_AXIS:
            r[idx] = 0.0
        elif kind == END_BARRIER:
            if bkind == BARRIER_PLANE:
                r[idx], z[idx] = _project_barrier(bkind, bpar, r[idx], z[idx])
            elif bkind == BARRIER_SPHERE:
                close_sphere_end(r, z, e, bpar)


@njit(cache=True)
def _velocity(r, z, axisym, closed, end0, end1, bkind, bpar, orient, vr, vz):
    lam1, lam2, nur, nuz, tr, tz, speed = curve_geometry(
        r, z, axisym, closed, end0, end1, bkind, bpar, orient
    )
    n = r.size
    amax2 = 0.0
    hmin = np.inf
    for i in range(n):
        h = lam1[i] + lam2[i]
        vr[i] = -h * nur[i]
        vz[i] = -h * nuz[i]
        a2 = lam1[i] * lam1[i] + lam2[i] * lam2[i]
        if a2 > amax2:
            amax2 = a2
        if h < hmin:
            hmin = h
    if not closed:
        if end0 == END_AXIS:
            vr[0] = 0.0
        if end1 == END_AXIS:
            vr[n - 1] = 0.0
    return amax2, hmin


@njit(cache=True)
def segment_lengths(r, z, closed):
    n = r.size
    m = n if closed else n - 1
    out = np.empty(m)
    for i in range(m):
        j = (i + 1) % n
        dr = r[j] - r[i]
        dz = z[j] - z[i]
        out[i] = np.sqrt(dr * dr + dz * dz)
    return out


@njit(cache=True)
def advance(
    r, z, t, t_end, max_steps, axisym, closed, end0, end1, bkind, bpar, orient,
    c_cfl, dt_fixed, dt_min, blowup_amax, ratio_max, steady_tol, rk2, require_mc=True,
):
    """Advance in place by at most ``max_steps`` explicit steps.

    Before each step the state is screened, in order, for: loss of
    mean-convexity (if ``require_mc``), ``max|A| >= blowup_amax``, spacing
    ratio above ``ratio_max``, max speed below ``steady_tol``, ``t >= t_end``
    and the step budget; the matching status code is returned without
    stepping.  ``dt_fixed > 0`` requests a fixed step, which must respect
    the CFL bound ``c_cfl * min(h_min^2, 1/max|A|^2)``.

    Returns ``(status, t, steps_taken, last_dt, max|A|, min H)``.
    """
    n = r.size
    vr = np.empty(n)
    vz = np.empty(n)
    vr2 = np.empty(n)
    vz2 = np.empty(n)
    r1 = np.empty(n)
    z1 = np.empty(n)
    steps = 0
    last_dt = 0.0
    amax = 0.0
    hmin = 0.0
    while True:
        amax2, hmin = _velocity(
            r, z, axisym, closed, end0, end1, bkind, bpar, orient, vr, vz
        )
        amax = np.sqrt(amax2)
        scale = max(1.0, amax)
        if require_mc and hmin < -1e-8 * scale:
            return ST_MEAN_CONVEX, t, steps, last_dt, amax, hmin
        if amax >= blowup_amax:
            return ST_BLOWUP, t, steps, last_dt, amax, hmin
        seg = segment_lengths(r, z, closed)
        smin = seg.min()
        smax = seg.max()
        if smax > ratio_max * smin:
            return ST_REDISTRIBUTE, t, steps, last_dt, amax, hmin
        vmax = 0.0
        for i in range(n):
            v = np.sqrt(vr[i] * vr[i] + vz[i] * vz[i])
            if v > vmax:
                vmax = v
        if vmax < steady_tol:
            return ST_STEADY, t, steps, last_dt, amax, hmin
        if t >= t_end:
            return ST_TIME, t, steps, last_dt, amax, hmin
        if steps >= max_steps:
            return ST_STEPS, t, steps, last_dt, amax, hmin
        limit = smin * smin
        if amax2 > 0.0 and 1.0 / amax2 < limit:
            limit = 1.0 / amax2
        if dt_fixed > 0.0:
            if dt_fixed > c_cfl * limit * (1.0 + 1e-12):
                return ST_CFL, t, steps, last_dt, amax, hmin
            dt = dt_fixed
        else:
            dt = c_cfl * limit
            if dt < dt_min:
                return ST_DT_FLOOR, t, steps, last_dt, amax, hmin
        if t + dt > t_end:
            dt = t_end - t
        if rk2:
            for i in range(n):
                r1[i] = r[i] + dt * vr[i]
                z1[i] = z[i] + dt * vz[i]
            enforce_ends(r1, z1, closed, end0, end1, bkind, bpar)
            _velocity(r1, z1, axisym, closed, end0, end1, bkind, bpar, orient, vr2, vz2)
            for i in range(n):
                r[i] = r[i] + 0.5 * dt * (vr[i] + vr2[i])
                z[i] = z[i] + 0.5 * dt * (vz[i] + vz2[i])
        else:
            for i in range(n):
                r[i] = r[i] + dt * vr[i]
                z[i] = z[i] + dt * vz[i]
        enforce_ends(r, z, closed, end0, end1, bkind, bpar)
        t = t + dt
        last_dt = dt
        steps += 1
