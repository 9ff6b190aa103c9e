"""Two-variable Oregonator on a masked street grid.

The activator ``u`` and inhibitor ``v`` evolve as::

    du/dt = (1/eps) * (u - u**2 - (f*v + phi) * (u - q)/(u + q)) + d_u * lap(u)
    dv/dt = u - v

integrated with forward Euler and a five-node Laplacian. Nodes outside the
street mask, and everything beyond the grid edge, are pinned to zero.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import ContractViolation, DivergenceError, InvalidPerturbation

__all__ = [
    "OregonatorParams",
    "GridMask",
    "MediumState",
    "PerturbationSpec",
    "laplacian5",
    "euler_step",
    "perturb",
    "rest_state",
    "Stepper",
]


@dataclass(frozen=True)
class OregonatorParams:
    """Full parameterisation of the model.

    Defaults are the street-network values; ``d_u=1.0`` is the usual
    choice for this model family.

    ``u_min`` floors the activator after every step. Forward Euler at
    ``dt=0.001`` is unstable on the refractory low branch next to a zero
    wall (the stiff ``(u-q)/(u+q)`` term overshoots past ``u=-q``), and the
    floor keeps concentrations non-negative. ``None`` disables it, leaving
    the bare Euler map, which may then raise :class:`DivergenceError`.
    """

    epsilon: float = 0.02
    f: float = 1.4
    q: float = 0.002
    phi: float = 0.05
    d_u: float = 1.0
    dt: float = 0.001
    dx: float = 0.25
    u_min: float | None = 0.0

    def __post_init__(self):
        for name in ("epsilon", "q", "dt", "dx"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ContractViolation(f"{name} must be positive and finite, got {value}")
        if not (self.d_u >= 0 and math.isfinite(self.d_u)):
            raise ContractViolation(f"d_u must be >= 0, got {self.d_u}")
        if not (self.phi >= 0 and math.isfinite(self.phi)):
            raise ContractViolation(f"phi must be >= 0, got {self.phi}")
        if not math.isfinite(self.f):
            raise ContractViolation("f must be finite")

    def with_phi(self, phi: float) -> "OregonatorParams":
        return dataclasses.replace(self, phi=phi)


@dataclass(frozen=True, eq=False)
class GridMask:
    """Boolean excitability raster, ``excitable[row, col]``."""

    excitable: np.ndarray

    def __post_init__(self):
        arr = np.array(self.excitable, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise ContractViolation(f"mask must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 3 or arr.shape[1] < 3:
            raise ContractViolation(f"mask must be at least 3x3, got {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "excitable", arr)

    @property
    def height(self) -> int:
        return self.excitable.shape[0]

    @property
    def width(self) -> int:
        return self.excitable.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.excitable.shape

    @cached_property
    def excitable_count(self) -> int:
        return int(self.excitable.sum())

    @cached_property
    def spans(self):
        return _kernels.mask_spans(self.excitable)

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.height}x{self.width}:".encode())
        h.update(np.packbits(self.excitable).tobytes())
        return h.hexdigest()[:16]

    def __eq__(self, other):
        if not isinstance(other, GridMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.excitable, other.excitable))

    def __hash__(self):
        return hash(self.fingerprint)


@dataclass(frozen=True)
class PerturbationSpec:
    """A square of excitation: top-left ``origin=(row, col)``, ``side`` nodes."""

    origin: tuple[int, int]
    side: int = 20
    u_value: float = 1.0

    def __post_init__(self):
        if self.side < 1:
            raise InvalidPerturbation(f"side must be >= 1, got {self.side}")
        if not self.u_value > 0:
            raise InvalidPerturbation(f"u_value must be > 0, got {self.u_value}")
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))

    def window(self, shape):
        """Row and column slices of the square clipped to a grid, or None."""
        r0, c0 = self.origin
        r1, c1 = r0 + self.side, c0 + self.side
        r0, c0 = max(r0, 0), max(c0, 0)
        r1, c1 = min(r1, shape[0]), min(c1, shape[1])
        if r0 >= r1 or c0 >= c1:
            return None
        return slice(r0, r1), slice(c0, c1)


class MediumState:
    """Activator/inhibitor fields plus the number of completed steps.

    Storage is padded by one zero node on every side; ``u`` and ``v`` are
    views of the interior.
    """

    def __init__(self, mask: GridMask, u=None, v=None, step_index: int = 0):
        self.mask = mask
        shape = (mask.height + 2, mask.width + 2)
        self._u = np.zeros(shape)
        self._v = np.zeros(shape)
        if u is not None:
            self.u[...] = _checked_field(u, mask)
        if v is not None:
            self.v[...] = _checked_field(v, mask)
        off = ~mask.excitable
        self.u[off] = 0.0
        self.v[off] = 0.0
        self.step_index = int(step_index)

    @classmethod
    def zeros(cls, mask: GridMask) -> "MediumState":
        return cls(mask)

    @property
    def u(self) -> np.ndarray:
        return self._u[1:-1, 1:-1]

    @property
    def v(self) -> np.ndarray:
        return self._v[1:-1, 1:-1]

    def copy(self) -> "MediumState":
        out = MediumState.__new__(MediumState)
        out.mask = self.mask
        out._u = self._u.copy()
        out._v = self._v.copy()
        out.step_index = self.step_index
        return out

    def check(self) -> None:
        """Raise if an invariant is broken (non-finite or unpinned values)."""
        for name, arr in (("u", self.u), ("v", self.v)):
            bad = ~np.isfinite(arr)
            if bad.any():
                node = tuple(int(x) for x in np.argwhere(bad)[0])
                raise DivergenceError(self.step_index, node, f"non-finite {name} at {node}")
        off = ~self.mask.excitable
        if np.any(self.u[off] != 0) or np.any(self.v[off] != 0):
            raise ContractViolation("non-excitable nodes must stay at zero")


def _checked_field(arr, mask):
    arr = np.asarray(arr, dtype=float)
    if arr.shape != mask.shape:
        raise ContractViolation(f"field shape {arr.shape} does not match mask {mask.shape}")
    return arr


def laplacian5(field: np.ndarray, mask: GridMask, dx: float) -> np.ndarray:
    """Five-node Laplacian with zero-valued off-grid and non-excitable neighbours."""
    field = _checked_field(field, mask)
    p = np.zeros((mask.height + 2, mask.width + 2))
    p[1:-1, 1:-1] = np.where(mask.excitable, field, 0.0)
    c = p[1:-1, 1:-1]
    lap = (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2] - 4.0 * c) / (dx * dx)
    return np.where(mask.excitable, lap, 0.0)


def _floor(params: OregonatorParams) -> float:
    return -np.inf if params.u_min is None else float(params.u_min)


def _bands(n_spans: int, rows: np.ndarray, workers: int):
    """Split span indices into contiguous row bands of roughly equal size."""
    if workers <= 1 or n_spans == 0:
        return [(0, n_spans)]
    cuts = [0]
    for k in range(1, workers):
        s = (n_spans * k) // workers
        # never split a row between bands
        while 0 < s < n_spans and rows[s] == rows[s - 1]:
            s += 1
        if s > cuts[-1]:
            cuts.append(s)
    if cuts[-1] != n_spans:
        cuts.append(n_spans)
    return list(zip(cuts[:-1], cuts[1:]))


class Stepper:
    """In-place double-buffered integrator bound to one state.

    ``workers > 1`` splits the grid into row bands stepped on a thread
    pool; each node is computed from the pre-step buffers only, so the
    result is bit-identical to ``workers=1``.
    """

    def __init__(self, state: MediumState, params: OregonatorParams, *,
                 workers: int = 1, threshold: float = 0.1,
                 counts: np.ndarray | None = None, ever: np.ndarray | None = None):
        self.state = state
        self.params = params
        self.threshold = float(threshold)
        self.rows, self.starts, self.stops = state.mask.spans
        self.bands = _bands(len(self.rows), self.rows, max(1, int(workers)))
        self._un = np.zeros_like(state._u)
        self._vn = np.zeros_like(state._v)
        self._record = counts is not None
        shape = state._u.shape
        self._counts = counts if counts is not None else np.zeros((1, 1), dtype=np.int64)
        self._ever = ever if ever is not None else np.zeros((1, 1), dtype=np.bool_)
        if self._record and (counts.shape != shape or ever.shape != shape):
            raise ContractViolation("tracker buffers must match the padded grid")
        self._pool = ThreadPoolExecutor(len(self.bands)) if len(self.bands) > 1 else None
        p = params
        self._scalars = (p.epsilon, p.f, p.q, p.phi, p.d_u, p.dt, p.dx, _floor(p), self.threshold)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _band(self, s0, s1, record):
        st = self.state
        return _kernels.step_spans(
            st._u, st._v, self._un, self._vn, self.rows, self.starts, self.stops,
            s0, s1, *self._scalars, self._counts, self._ever, record,
        )

    def step(self, record: bool = True) -> int:
        """One synchronous step; returns the post-step activity count."""
        record = record and self._record
        if self._pool is None:
            results = [self._band(s0, s1, record) for s0, s1 in self.bands]
        else:
            futures = [self._pool.submit(self._band, s0, s1, record) for s0, s1 in self.bands]
            results = [fut.result() for fut in futures]
        st = self.state
        active = 0
        bad = -1
        for a, b in results:
            active += a
            if b >= 0 and (bad < 0 or b > bad):
                bad = b
        st._u, self._un = self._un, st._u
        st._v, self._vn = self._vn, st._v
        st.step_index += 1
        if bad >= 0:
            width = st._u.shape[1]
            node = (bad // width - 1, bad % width - 1)
            raise DivergenceError(st.step_index, node)
        return active

    def advance(self, n_steps: int, series: np.ndarray, n_rec: int = 0, stride: int = 1,
                zero_run: int = 0, window: int | None = None) -> tuple[int, int, int]:
        """Up to ``n_steps`` steps, appending the activity of every
        ``stride``-th step index to ``series[n_rec:]``.

        Stops early when activity has been zero for ``window`` consecutive
        steps. Returns ``(executed, n_rec, zero_run)``.
        """
        window = np.iinfo(np.int64).max if window is None else int(window)
        st = self.state
        if self._pool is not None:
            executed = 0
            while executed < n_steps:
                record = (st.step_index + 1) % stride == 0
                n = self.step(record=record)
                executed += 1
                if record:
                    series[n_rec] = n
                    n_rec += 1
                zero_run = zero_run + 1 if n == 0 else 0
                if zero_run >= window:
                    break
            return executed, n_rec, zero_run
        executed, swapped, bad, n_rec, zero_run = _kernels.advance_spans(
            st._u, st._v, self._un, self._vn, self.rows, self.starts, self.stops, int(n_steps),
            *self._scalars, self._counts, self._ever, self._record, int(stride),
            int(st.step_index), series, int(n_rec), int(zero_run), window,
        )
        if swapped:
            st._u, self._un = self._un, st._u
            st._v, self._vn = self._vn, st._v
        st.step_index += executed
        if bad >= 0:
            width = st._u.shape[1]
            raise DivergenceError(st.step_index, (bad // width - 1, bad % width - 1))
        return executed, n_rec, zero_run


def euler_step(state: MediumState, params: OregonatorParams, workers: int = 1) -> MediumState:
    """Return the state one Euler step later; the input is left untouched."""
    out = state.copy()
    with Stepper(out, params, workers=workers) as stepper:
        stepper.step()
    return out


def perturb(state: MediumState, spec: PerturbationSpec) -> MediumState:
    """Return a copy with ``u = spec.u_value`` on excitable nodes of the square."""
    win = spec.window(state.mask.shape)
    if win is None:
        raise InvalidPerturbation(f"perturbation square at {spec.origin} lies outside the grid")
    out = state.copy()
    rs, cs = win
    sub = out.u[rs, cs]
    sub[state.mask.excitable[rs, cs]] = spec.u_value
    return out


def rest_state(params: OregonatorParams, tol: float = 1e-14) -> float:
    """Homogeneous rest value u* (= v*) of the local kinetics.

    Root of ``u - u**2 - (f*u + phi)(u - q)/(u + q)`` on ``(0, 1)``, found by
    bisection. The function is positive at ``u=0`` when ``phi > 0`` and
    negative at ``u=1``.
    """
    f, q, phi = params.f, params.q, params.phi

    def g(u):
        return u - u * u - (f * u + phi) * (u - q) / (u + q)

    if g(0.0) <= 0:
        return 0.0
    # the stable rest value is the smallest positive root; bracket it by a
    # geometric scan so the excited branch roots are never picked up
    lo, hi = 0.0, q * 1e-3
    while g(hi) > 0:
        lo, hi = hi, hi * 1.25
        if hi > 1.0:
            raise ValueError("no rest state below u=1")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
