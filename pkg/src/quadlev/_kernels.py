"""Shared numerical kernels for the suspension simulator.

Everything numerically hot lives here as plain functions over numpy arrays
and scalars.  When numba is importable (and not disabled) the functions are
compiled with ``@njit(cache=True)``; setting the environment variable
``QUADLEV_PURE_PYTHON=1`` before import skips compilation and runs the same
source as ordinary Python/numpy.  Both paths execute identical statements in
identical order, so the fallback is a correctness reference, not a fork.

Conventions used throughout:

* a membership term is one row ``(a, b, c, d)`` of a float64 array; triangles
  are stored with ``b == c``.  Membership is exactly 0 outside the support,
  exactly 1 on the core ``[b, c]`` and linear on the edges.  ``a == b`` (or
  ``c == d``) encodes a vertical edge, used for shoulder terms that sit on a
  universe boundary.
* the gap coordinate ``z`` grows when a floater hangs lower.  Gravity opens
  the gap, coil force closes it, hence ``dv/dt = g - f/m``.  The coil force
  ``f = beta/4 * (i/z)**2`` with ``beta = A * N**2 * mu0`` only pulls.
* all per-rig arrays are length 4, one slot per actuator/floater pair.
"""

from __future__ import annotations

import math
import os

import numpy as np

PURE_PYTHON = os.environ.get("QUADLEV_PURE_PYTHON", "") == "1"

if PURE_PYTHON:
    NUMBA_ENABLED = False

    def _jit(func):
        return func
else:
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True

        def _jit(func):
            return _njit(cache=True)(func)
    except ImportError:  # pragma: no cover - exercised only without numba
        NUMBA_ENABLED = False

        def _jit(func):
            return func


# Error codes returned by the integration kernels.
ERR_NONE = 0
ERR_NONFINITE = 1

# Run outcome codes produced by the python layer from kernel flags.
FLAG_EPS = 1e-12


# ---------------------------------------------------------------------------
# fuzzy membership and Mamdani inference
# ---------------------------------------------------------------------------


@_jit
def mf_value(a, b, c, d, x):
    """Piecewise-linear membership of ``x`` in the term ``(a, b, c, d)``."""
    if x < a or x > d:
        return 0.0
    if x <= b:
        if a == b:
            return 1.0
        return (x - a) / (b - a)
    if x <= c:
        return 1.0
    # here c < x <= d, so c < d and the edge is well defined
    return (d - x) / (d - c)


@_jit
def _clipped(terms, acts, k, y):
    m = mf_value(terms[k, 0], terms[k, 1], terms[k, 2], terms[k, 3], y)
    if m > acts[k]:
        m = acts[k]
    return m


@_jit
def aggregate_value(terms, acts, y):
    """Aggregated output membership max_k min(acts[k], mu_k(y))."""
    best = 0.0
    for k in range(terms.shape[0]):
        if acts[k] <= 0.0:
            continue
        m = _clipped(terms, acts, k, y)
        if m > best:
            best = m
    return best


@_jit
def mamdani_centroid(terms, acts, lo, hi):
    """Exact centroid of the aggregated clipped-term union over ``[lo, hi]``.

    The aggregate is piecewise linear, so we gather every breakpoint (term
    corners, clip heights, pairwise crossings of the clipped edges) and
    integrate each linear piece in closed form.  Interior sample points at
    the thirds of each piece pin the line without touching the endpoints,
    which keeps vertical shoulder edges at universe boundaries exact.

    Returns ``(centroid, empty)``; ``empty`` means the aggregate had zero
    area and the universe midpoint was substituted.
    """
    n = terms.shape[0]
    base = np.empty(2 + 6 * n, dtype=np.float64)
    base[0] = lo
    base[1] = hi
    m = 2
    for k in range(n):
        act = acts[k]
        if act <= 0.0:
            continue
        a = terms[k, 0]
        b = terms[k, 1]
        c = terms[k, 2]
        d = terms[k, 3]
        if lo < a < hi:
            base[m] = a
            m += 1
        if lo < b < hi:
            base[m] = b
            m += 1
        if lo < c < hi:
            base[m] = c
            m += 1
        if lo < d < hi:
            base[m] = d
            m += 1
        if act < 1.0:
            if a < b:
                p = a + act * (b - a)
                if lo < p < hi:
                    base[m] = p
                    m += 1
            if c < d:
                p = d - act * (d - c)
                if lo < p < hi:
                    base[m] = p
                    m += 1
    bpts = np.sort(base[:m])

    maxcross = (m - 1) * (n * (n - 1)) // 2
    pts = np.empty(m + maxcross, dtype=np.float64)
    for idx in range(m):
        pts[idx] = bpts[idx]
    cnt = m
    vals1 = np.empty(n, dtype=np.float64)
    vals2 = np.empty(n, dtype=np.float64)
    for idx in range(m - 1):
        p = bpts[idx]
        q = bpts[idx + 1]
        w = q - p
        if w <= 0.0:
            continue
        y1 = p + w / 3.0
        y2 = p + 2.0 * w / 3.0
        for k in range(n):
            vals1[k] = _clipped(terms, acts, k, y1)
            vals2[k] = _clipped(terms, acts, k, y2)
        for k in range(n):
            if acts[k] <= 0.0:
                continue
            for j in range(k + 1, n):
                if acts[j] <= 0.0:
                    continue
                # each clipped term is a + b*t on t in [0, 1] across [p, q]
                bk = 3.0 * (vals2[k] - vals1[k])
                ak = vals1[k] - bk / 3.0
                bj = 3.0 * (vals2[j] - vals1[j])
                aj = vals1[j] - bj / 3.0
                den = bk - bj
                if den == 0.0:
                    continue
                tstar = (aj - ak) / den
                if 0.0 < tstar < 1.0:
                    pts[cnt] = p + tstar * w
                    cnt += 1
    allpts = np.sort(pts[:cnt])

    area = 0.0
    moment = 0.0
    for idx in range(cnt - 1):
        p = allpts[idx]
        q = allpts[idx + 1]
        w = q - p
        if w <= 0.0:
            continue
        y1 = p + w / 3.0
        y2 = p + 2.0 * w / 3.0
        a1 = aggregate_value(terms, acts, y1)
        a2 = aggregate_value(terms, acts, y2)
        ap = 2.0 * a1 - a2
        aq = 2.0 * a2 - a1
        area += 0.5 * (ap + aq) * w
        moment += w / 6.0 * (ap * (2.0 * p + q) + aq * (p + 2.0 * q))
    if area <= 0.0:
        return 0.5 * (lo + hi), True
    return moment / area, False


@_jit
def infer_one(in_terms, cons, out_terms, lo_in, hi_in, lo_out, hi_out, x):
    """Mamdani inference for a single-input system (min/min/max/centroid)."""
    xc = x
    if xc < lo_in:
        xc = lo_in
    elif xc > hi_in:
        xc = hi_in
    n_in = in_terms.shape[0]
    n_out = out_terms.shape[0]
    acts = np.zeros(n_out, dtype=np.float64)
    for k in range(n_in):
        deg = mf_value(in_terms[k, 0], in_terms[k, 1], in_terms[k, 2], in_terms[k, 3], xc)
        if deg <= 0.0:
            continue
        tgt = cons[k]
        if deg > acts[tgt]:
            acts[tgt] = deg
    return mamdani_centroid(out_terms, acts, lo_out, hi_out)


@_jit
def infer_two(
    in1_terms,
    in2_terms,
    cons,
    out_terms,
    lo1,
    hi1,
    lo2,
    hi2,
    lo_out,
    hi_out,
    x1,
    x2,
):
    """Mamdani inference for a two-input system (min/min/max/centroid).

    ``cons[a, b]`` is the 0-based consequent term for input-1 term ``a``
    combined with input-2 term ``b``.
    """
    x1c = x1
    if x1c < lo1:
        x1c = lo1
    elif x1c > hi1:
        x1c = hi1
    x2c = x2
    if x2c < lo2:
        x2c = lo2
    elif x2c > hi2:
        x2c = hi2
    n1 = in1_terms.shape[0]
    n2 = in2_terms.shape[0]
    n_out = out_terms.shape[0]
    deg1 = np.empty(n1, dtype=np.float64)
    deg2 = np.empty(n2, dtype=np.float64)
    for a in range(n1):
        deg1[a] = mf_value(in1_terms[a, 0], in1_terms[a, 1], in1_terms[a, 2], in1_terms[a, 3], x1c)
    for b in range(n2):
        deg2[b] = mf_value(in2_terms[b, 0], in2_terms[b, 1], in2_terms[b, 2], in2_terms[b, 3], x2c)
    acts = np.zeros(n_out, dtype=np.float64)
    for a in range(n1):
        d1 = deg1[a]
        if d1 <= 0.0:
            continue
        for b in range(n2):
            s = deg2[b]
            if d1 < s:
                s = d1
            if s <= 0.0:
                continue
            tgt = cons[a, b]
            if s > acts[tgt]:
                acts[tgt] = s
    return mamdani_centroid(out_terms, acts, lo_out, hi_out)


# ---------------------------------------------------------------------------
# plant dynamics
# ---------------------------------------------------------------------------


@_jit
def pair_rates(beta, res, mass, grav, z_floor, z, v, i, u):
    """Time derivatives (dz, dv, di) of one actuator/floater pair.

    ``z_floor`` guards the ``1/z`` terms against mid-step excursions below
    the physical gap floor; post-step guards restore the state afterwards.
    """
    ze = z
    if ze < z_floor:
        ze = z_floor
    ratio = i / ze
    force = 0.25 * beta * ratio * ratio
    dv = grav - force / mass
    di = (2.0 * ze / beta) * (u - res * i) + ratio * v
    return v, dv, di


@_jit
def guarded_substeps(
    beta,
    res,
    mass,
    grav,
    z_floor,
    u,
    z,
    v,
    i,
    active,
    dt,
    nsteps,
    t0,
    i_max,
    z_min,
    z_drop,
    ev_contact,
    ev_drop,
    ev_iclamp,
):
    """Advance all active pairs ``nsteps`` RK4 steps under held voltages.

    State arrays are updated in place.  After every step the guards run in
    order: current clamped to [0, i_max], gap floor (velocity zeroed), drop
    ceiling (pair frozen).  ``ev_*`` arrays record first-occurrence times
    (NaN = never).  Returns an error code; nonzero means a nonfinite state
    was produced and integration stopped.
    """
    h = 0.5 * dt
    for s in range(nsteps):
        for k in range(4):
            if not active[k]:
                continue
            zk = z[k]
            vk = v[k]
            ik = i[k]
            uk = u[k]
            d1z, d1v, d1i = pair_rates(beta[k], res[k], mass, grav, z_floor, zk, vk, ik, uk)
            d2z, d2v, d2i = pair_rates(
                beta[k], res[k], mass, grav, z_floor, zk + h * d1z, vk + h * d1v, ik + h * d1i, uk
            )
            d3z, d3v, d3i = pair_rates(
                beta[k], res[k], mass, grav, z_floor, zk + h * d2z, vk + h * d2v, ik + h * d2i, uk
            )
            d4z, d4v, d4i = pair_rates(
                beta[k], res[k], mass, grav, z_floor, zk + dt * d3z, vk + dt * d3v, ik + dt * d3i, uk
            )
            sixth = dt / 6.0
            z[k] = zk + sixth * (d1z + 2.0 * (d2z + d3z) + d4z)
            v[k] = vk + sixth * (d1v + 2.0 * (d2v + d3v) + d4v)
            i[k] = ik + sixth * (d1i + 2.0 * (d2i + d3i) + d4i)
        tnow = t0 + (s + 1) * dt
        for k in range(4):
            if not active[k]:
                continue
            if not (math.isfinite(z[k]) and math.isfinite(v[k]) and math.isfinite(i[k])):
                return ERR_NONFINITE
            ik = i[k]
            if ik < 0.0:
                if ik < -FLAG_EPS and math.isnan(ev_iclamp[k]):
                    ev_iclamp[k] = tnow
                i[k] = 0.0
            elif ik > i_max[k]:
                if ik > i_max[k] + FLAG_EPS and math.isnan(ev_iclamp[k]):
                    ev_iclamp[k] = tnow
                i[k] = i_max[k]
            if z[k] < z_min:
                z[k] = z_min
                v[k] = 0.0
                if math.isnan(ev_contact[k]):
                    ev_contact[k] = tnow
            elif z[k] > z_drop:
                active[k] = False
                if math.isnan(ev_drop[k]):
                    ev_drop[k] = tnow
    return ERR_NONE


# ---------------------------------------------------------------------------
# controller step
# ---------------------------------------------------------------------------


@_jit
def control_step(
    main_in1,
    main_in2,
    main_cons,
    main_out,
    main_u1,
    main_u2,
    main_uo,
    main_ge,
    main_gde,
    main_gu,
    sup_in,
    sup_cons,
    sup_out,
    sup_ui,
    sup_uo,
    sup_ge,
    kp,
    kd,
    signs,
    pd_enabled,
    rate_alpha,
    setpoint,
    period,
    u_max,
    z,
    prev_e,
    de_filt,
    prev_l,
    initialized,
    tnow,
    u_out,
    boost_out,
    e_out,
    de_out,
    uraw_out,
    ev_uclamp,
    ev_fis_empty,
):
    """One synchronous control update for all four pairs.

    Updates the memory arrays (``prev_e``, ``de_filt``) in place and fills
    the per-pair output arrays.  Returns ``(l, w)`` where ``l`` is the level
    error ``z1 + z3 - z2 - z4`` and ``w`` the leveling correction (0 when the
    PD stage is disabled).  First call (``initialized`` false) uses zero
    derivatives.
    """
    l = z[0] + z[2] - z[1] - z[3]
    if initialized and pd_enabled:
        dl = (l - prev_l) / period
    else:
        dl = 0.0
    if pd_enabled:
        w = kp * l + kd * dl
    else:
        w = 0.0
    for k in range(4):
        e = z[k] - setpoint
        if initialized:
            de_raw = (e - prev_e[k]) / period
        else:
            de_raw = 0.0
        de = rate_alpha * de_filt[k] + (1.0 - rate_alpha) * de_raw
        boost, empty1 = infer_one(
            sup_in[k],
            sup_cons[k],
            sup_out[k],
            sup_ui[k, 0],
            sup_ui[k, 1],
            sup_uo[k, 0],
            sup_uo[k, 1],
            abs(e) * sup_ge[k],
        )
        base, empty2 = infer_two(
            main_in1[k],
            main_in2[k],
            main_cons[k],
            main_out[k],
            main_u1[k, 0],
            main_u1[k, 1],
            main_u2[k, 0],
            main_u2[k, 1],
            main_uo[k, 0],
            main_uo[k, 1],
            e * main_ge[k],
            de * main_gde[k],
        )
        if empty1 or empty2:
            ev_fis_empty[k] += 1.0
        uraw = boost * main_gu[k] * base + signs[k] * w
        uk = uraw
        if uk < 0.0:
            uk = 0.0
        elif uk > u_max[k]:
            uk = u_max[k]
        if abs(uk - uraw) > FLAG_EPS and math.isnan(ev_uclamp[k]):
            ev_uclamp[k] = tnow
        u_out[k] = uk
        boost_out[k] = boost
        e_out[k] = e
        de_out[k] = de
        uraw_out[k] = uraw
        prev_e[k] = e
        de_filt[k] = de
    return l, w


# ---------------------------------------------------------------------------
# full closed-loop run
# ---------------------------------------------------------------------------


@_jit
def closed_loop_run(
    main_in1,
    main_in2,
    main_cons,
    main_out,
    main_u1,
    main_u2,
    main_uo,
    main_ge,
    main_gde,
    main_gu,
    sup_in,
    sup_cons,
    sup_out,
    sup_ui,
    sup_uo,
    sup_ge,
    kp,
    kd,
    signs,
    pd_enabled,
    rate_alpha,
    setpoint,
    beta,
    res,
    mass,
    grav,
    z_floor,
    i_max,
    u_max,
    z_min,
    z_drop,
    z0,
    v0,
    i0,
    dt,
    substeps,
    n_ctrl,
    t_rows,
    z_rows,
    v_rows,
    i_rows,
    u_rows,
    l_rows,
    w_rows,
    boost_rows,
    ev_contact,
    ev_drop,
    ev_iclamp,
    ev_uclamp,
    ev_fis_empty,
):
    """Simulate the four-pair rig under the fuzzy/PD stack.

    Voltages are held (zero-order) across each control period of
    ``substeps * dt`` seconds.  One row is recorded per control instant,
    including ``t = 0`` and the final instant; the run ends early once every
    pair has dropped.  Returns ``(rows_written, error_code)``.
    """
    period = dt * substeps
    z = z0.copy()
    v = v0.copy()
    i = i0.copy()
    active = np.ones(4, dtype=np.bool_)
    prev_e = np.zeros(4, dtype=np.float64)
    de_filt = np.zeros(4, dtype=np.float64)
    prev_l = 0.0
    initialized = False

    u = np.zeros(4, dtype=np.float64)
    boost = np.zeros(4, dtype=np.float64)
    e_tmp = np.zeros(4, dtype=np.float64)
    de_tmp = np.zeros(4, dtype=np.float64)
    uraw_tmp = np.zeros(4, dtype=np.float64)

    rows = 0
    for step in range(n_ctrl + 1):
        tnow = step * period
        l, w = control_step(
            main_in1,
            main_in2,
            main_cons,
            main_out,
            main_u1,
            main_u2,
            main_uo,
            main_ge,
            main_gde,
            main_gu,
            sup_in,
            sup_cons,
            sup_out,
            sup_ui,
            sup_uo,
            sup_ge,
            kp,
            kd,
            signs,
            pd_enabled,
            rate_alpha,
            setpoint,
            period,
            u_max,
            z,
            prev_e,
            de_filt,
            prev_l,
            initialized,
            tnow,
            u,
            boost,
            e_tmp,
            de_tmp,
            uraw_tmp,
            ev_uclamp,
            ev_fis_empty,
        )
        prev_l = l
        initialized = True

        t_rows[rows] = tnow
        l_rows[rows] = l
        w_rows[rows] = w
        for k in range(4):
            z_rows[rows, k] = z[k]
            v_rows[rows, k] = v[k]
            i_rows[rows, k] = i[k]
            u_rows[rows, k] = u[k]
            boost_rows[rows, k] = boost[k]
        rows += 1

        if step == n_ctrl:
            break
        if not (active[0] or active[1] or active[2] or active[3]):
            break
        err = guarded_substeps(
            beta,
            res,
            mass,
            grav,
            z_floor,
            u,
            z,
            v,
            i,
            active,
            dt,
            substeps,
            tnow,
            i_max,
            z_min,
            z_drop,
            ev_contact,
            ev_drop,
            ev_iclamp,
        )
        if err != ERR_NONE:
            return rows, err
    return rows, ERR_NONE
