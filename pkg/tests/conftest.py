import re

import numpy as np
import pytest

from bzstreets.medium import GridMask


def naive_laplacian(field, excitable, dx):
    """Plain double loop over the grid; missing neighbours count as zero."""
    h, w = field.shape
    out = np.zeros((h, w))

    def at(i, j):
        if 0 <= i < h and 0 <= j < w and excitable[i, j]:
            return field[i, j]
        return 0.0

    for i in range(h):
        for j in range(w):
            if not excitable[i, j]:
                continue
            c = at(i, j)
            out[i, j] = (at(i - 1, j) + at(i + 1, j) + at(i, j + 1) + at(i, j - 1) - 4.0 * c) / (dx * dx)
    return out


def naive_step(u, v, excitable, p):
    """Reference Euler step, node by node, reading only the old fields."""
    h, w = u.shape
    un = np.zeros((h, w))
    vn = np.zeros((h, w))
    floor = -np.inf if p.u_min is None else p.u_min

    def at(i, j):
        if 0 <= i < h and 0 <= j < w and excitable[i, j]:
            return u[i, j]
        return 0.0

    inv_eps = 1.0 / p.epsilon
    c_diff = p.d_u / (p.dx * p.dx)
    for i in range(h):
        for j in range(w):
            if not excitable[i, j]:
                continue
            uc, vc = u[i, j], v[i, j]
            lap = at(i - 1, j) + at(i + 1, j) + at(i, j + 1) + at(i, j - 1) - 4.0 * uc
            react = inv_eps * (uc - uc * uc - (p.f * vc + p.phi) * (uc - p.q) / (uc + p.q))
            un[i, j] = max(uc + p.dt * (react + c_diff * lap), floor)
            vn[i, j] = vc + p.dt * (uc - vc)
    return un, vn


def bisect_rest(phi, f=1.4, q=0.002, tol=1e-12):
    """Smallest positive root of the cubic fixed-point polynomial.

    (u - u^2)(u + q) - (f u + phi)(u - q) = 0, bracketed on [0, q*(1+...)]
    by walking a fine linear grid from zero.
    """

    def poly(u):
        return (u - u * u) * (u + q) - (f * u + phi) * (u - q)

    lo = 0.0
    step = q / 1000.0
    hi = step
    while poly(hi) > 0:
        lo, hi = hi, hi + step
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if poly(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def flood_components(excitable):
    """4-connected component sizes by explicit BFS."""
    h, w = excitable.shape
    seen = np.zeros_like(excitable, dtype=bool)
    sizes = []
    for i in range(h):
        for j in range(w):
            if excitable[i, j] and not seen[i, j]:
                stack = [(i, j)]
                seen[i, j] = True
                n = 0
                while stack:
                    a, b = stack.pop()
                    n += 1
                    for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                        x, y = a + da, b + db
                        if 0 <= x < h and 0 <= y < w and excitable[x, y] and not seen[x, y]:
                            seen[x, y] = True
                            stack.append((x, y))
                sizes.append(n)
    return sorted(sizes, reverse=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_mask(rng, h, w, density=0.7):
    m = rng.random((h, w)) < density
    return GridMask(m)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []


def _criterion_key(line):
    label = line.split()[1].rstrip(":")
    return int(re.match(r"\d+", label).group()), label


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=_criterion_key):
            terminalreporter.write_line(line)
