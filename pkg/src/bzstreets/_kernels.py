"""Compiled inner loops.

Fields are stored with a one-node ring of zeros around the grid, so the
five-node stencil never needs an edge test: off-grid and non-excitable
neighbours both read as 0. Only excitable nodes are visited, as horizontal
runs ("spans") of consecutive excitable nodes in one row.
"""

import numpy as np
from numba import njit


def mask_spans(excitable):
    """Row-major runs of excitable nodes, in padded coordinates.

    Returns ``(rows, starts, stops)`` int64 arrays; span ``k`` covers
    ``[starts[k], stops[k])`` of padded row ``rows[k]``.
    """
    m = np.asarray(excitable, dtype=np.int8)
    edges = np.diff(np.pad(m, ((0, 0), (1, 1))), axis=1)
    r_on, c_on = np.nonzero(edges == 1)
    r_off, c_off = np.nonzero(edges == -1)
    # both nonzero() calls are row-major so runs pair up in order
    return (
        (r_on + 1).astype(np.int64),
        (c_on + 1).astype(np.int64),
        (c_off + 1).astype(np.int64),
    )


@njit(cache=True, nogil=True)
def step_spans(u, v, un, vn, rows, starts, stops, s0, s1,
               eps, f, q, phi, d_u, dt, dx, u_min, thr,
               counts, ever, record):
    """Advance spans ``s0:s1`` one Euler step from (u, v) into (un, vn).

    Arithmetic order, which reference steppers must follow to match bits::

        lap = N + S + E + W - 4*c
        u'  = max(u + dt*((1/eps)*(u - u*u - (f*v + phi)*(u - q)/(u + q))
                          + (d_u/dx**2)*lap), u_min)
        v'  = v + dt*(u - v)

    Returns ``(activity, bad)`` where ``activity`` counts new u > thr and
    ``bad`` is the last padded flat index holding a non-finite u, or -1.
    With ``record`` set, excited nodes also bump ``counts`` and ``ever``.
    """
    width = u.shape[1]
    inv_eps = 1.0 / eps
    c_diff = d_u / (dx * dx)
    active = 0
    bad = -1
    for s in range(s0, s1):
        i = rows[s]
        for j in range(starts[s], stops[s]):
            uc = u[i, j]
            vc = v[i, j]
            lap = u[i - 1, j] + u[i + 1, j] + u[i, j + 1] + u[i, j - 1] - 4.0 * uc
            a = uc + dt * (inv_eps * (uc - uc * uc - (f * vc + phi) * (uc - q) / (uc + q))
                           + c_diff * lap)
            a = max(a, u_min)
            un[i, j] = a
            vn[i, j] = vc + dt * (uc - vc)
            if a > thr:
                active += 1
                if record:
                    counts[i, j] += 1
                    ever[i, j] = True
            elif not a > -np.inf:
                # NaN or -inf; v only goes bad a step after u does
                bad = i * width + j
    return active, bad


@njit(cache=True, nogil=True)
def observe_spans(u, rows, starts, stops, thr, counts, ever):
    active = 0
    for s in range(rows.shape[0]):
        i = rows[s]
        for j in range(starts[s], stops[s]):
            if u[i, j] > thr:
                active += 1
                counts[i, j] += 1
                ever[i, j] = True
    return active


@njit(cache=True, nogil=True)
def count_spans(u, rows, starts, stops, thr):
    active = 0
    for s in range(rows.shape[0]):
        i = rows[s]
        for j in range(starts[s], stops[s]):
            if u[i, j] > thr:
                active += 1
    return active


@njit(cache=True, nogil=True)
def advance_spans(u, v, un, vn, rows, starts, stops, n_steps,
                  eps, f, q, phi, d_u, dt, dx, u_min, thr,
                  counts, ever, record_on, stride, step0,
                  series, n_rec, zero_run, window):
    """Up to ``n_steps`` whole-grid steps without returning to Python.

    Buffers alternate each step. Stops early after a non-finite value or
    once ``zero_run`` reaches ``window``. Returns ``(executed, swapped, bad,
    n_rec, zero_run)``; when ``swapped`` is set the newest fields are in
    ``(un, vn)``.
    """
    a_u, a_v, b_u, b_v = u, v, un, vn
    swapped = False
    executed = 0
    bad = -1
    n_spans = rows.shape[0]
    for k in range(n_steps):
        record = (step0 + k + 1) % stride == 0
        act, bad = step_spans(a_u, a_v, b_u, b_v, rows, starts, stops, 0, n_spans,
                              eps, f, q, phi, d_u, dt, dx, u_min, thr,
                              counts, ever, record and record_on)
        a_u, b_u = b_u, a_u
        a_v, b_v = b_v, a_v
        swapped = not swapped
        executed += 1
        if record:
            series[n_rec] = act
            n_rec += 1
        if bad >= 0:
            break
        if act == 0:
            zero_run += 1
        else:
            zero_run = 0
        if zero_run >= window:
            break
    return executed, swapped, bad, n_rec, zero_run
