"""Observables of a run: integral activity, coverage and excitation frequency."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import ContractViolation, InputFormatError
from .medium import GridMask, MediumState

EXCITE_THRESHOLD = 0.1

OUTCOMES = ("extinct", "sustained", "boundary-exhausted", "not-run", "unresolved")


def activity(state: MediumState, threshold: float = EXCITE_THRESHOLD) -> int:
    """Number of excitable nodes with ``u > threshold``."""
    rows, starts, stops = state.mask.spans
    return int(_kernels.count_spans(state._u, rows, starts, stops, float(threshold)))


class CoverageTracker:
    """Accumulates which street nodes were excited, and how often.

    Per-node buffers are padded like :class:`MediumState` storage so the
    integrator can update them in place; ``ever_excited`` and
    ``excitation_counts`` give the unpadded views.
    """

    def __init__(self, mask: GridMask, excite_threshold: float = EXCITE_THRESHOLD,
                 stride: int = 1):
        if stride < 1:
            raise ContractViolation("stride must be >= 1")
        self.mask = mask
        self.excite_threshold = float(excite_threshold)
        self.stride = int(stride)
        shape = (mask.height + 2, mask.width + 2)
        self._counts = np.zeros(shape, dtype=np.int64)
        self._ever = np.zeros(shape, dtype=np.bool_)
        self._series: list[int] = []

    @property
    def ever_excited(self) -> np.ndarray:
        return self._ever[1:-1, 1:-1]

    @property
    def excitation_counts(self) -> np.ndarray:
        return self._counts[1:-1, 1:-1]

    @property
    def activity_series(self) -> np.ndarray:
        return np.asarray(self._series, dtype=np.int64)

    def _append(self, value: int) -> None:
        self._series.append(int(value))

    def extend_series(self, values) -> None:
        self._series.extend(int(x) for x in values)

    @property
    def coverage(self) -> float:
        n = self.mask.excitable_count
        if n == 0:
            return 0.0
        return int(np.count_nonzero(self.ever_excited & self.mask.excitable)) / n

    def merge(self, other: "CoverageTracker") -> "CoverageTracker":
        """Union of two trackers over the same mask (series concatenated)."""
        if other.mask != self.mask:
            raise ContractViolation("trackers cover different masks")
        out = CoverageTracker(self.mask, self.excite_threshold, self.stride)
        out._counts = self._counts + other._counts
        out._ever = self._ever | other._ever
        out._series = self._series + other._series
        return out

    def observe(self, state: MediumState) -> None:
        observe(self, state)


def observe(tracker: CoverageTracker, state: MediumState) -> CoverageTracker:
    """Record one observation of ``state`` into ``tracker`` (in place)."""
    if state.mask is not tracker.mask and state.mask != tracker.mask:
        raise ContractViolation("tracker and state have different masks")
    rows, starts, stops = state.mask.spans
    n = _kernels.observe_spans(state._u, rows, starts, stops, tracker.excite_threshold,
                               tracker._counts, tracker._ever)
    tracker._append(n)
    return tracker


def frequency_map(tracker: CoverageTracker) -> np.ndarray:
    """Excitation counts normalised to sum to one (all zeros if none)."""
    counts = tracker.excitation_counts.astype(float)
    total = counts.sum()
    if total == 0:
        return np.zeros_like(counts)
    return counts / total


def classify_outcome(series, executed: int, max_steps: int, *,
                     extinction_window: int = 1000, perturbation_size: int = 0,
                     stride: int = 1) -> str:
    """Label how a run ended.

    * ``not-run``: nothing executed.
    * ``extinct``: activity hit zero and stayed there, without ever
      spreading beyond ten times the initial excitation.
    * ``boundary-exhausted``: activity hit zero after peaking above ten
      times the initial excitation (fronts swept out and were absorbed).
    * ``sustained``: the step budget ran out with activity still present in
      the trailing 10% of the run, mean > 0 and coefficient of variation < 1.
    * ``unresolved``: budget exhausted without meeting any of the above.
    """
    series = np.asarray(series, dtype=float)
    if executed == 0:
        return "not-run"
    if series.size == 0 or not series.any():
        return "extinct"
    window = max(1, extinction_window // max(1, stride))
    tail_zero = series.size >= window and not series[-window:].any()
    if tail_zero or (executed < max_steps and series[-1] == 0):
        peak = series.max()
        if perturbation_size > 0 and peak > 10 * perturbation_size:
            return "boundary-exhausted"
        return "extinct"
    if executed >= max_steps:
        n = max(1, int(round(0.1 * series.size)))
        tail = series[-n:]
        mean = tail.mean()
        if mean > 0 and tail.std() / mean < 1.0:
            return "sustained"
    return "unresolved"


@dataclass(frozen=True, eq=False)
class RunRecord:
    """Immutable summary of one completed run."""

    tracker: CoverageTracker
    outcome: str
    steps_executed: int
    coverage: float
    initial_activity: int = 0
    params: object = None

    def __post_init__(self):
        for arr in (self.tracker._counts, self.tracker._ever):
            arr.flags.writeable = False

    @property
    def activity_series(self) -> np.ndarray:
        return self.tracker.activity_series

    def frequency_map(self) -> np.ndarray:
        return frequency_map(self.tracker)

    def digest(self) -> str:
        """Content hash of everything the run produced."""
        h = hashlib.sha256()
        h.update(f"{self.outcome}|{self.steps_executed}|{self.coverage!r}".encode())
        h.update(self.activity_series.tobytes())
        h.update(np.ascontiguousarray(self.tracker.excitation_counts).tobytes())
        h.update(np.packbits(self.tracker.ever_excited).tobytes())
        return h.hexdigest()

    def summary(self) -> dict:
        series = self.activity_series
        return {
            "outcome": self.outcome,
            "steps_executed": self.steps_executed,
            "coverage": repr(self.coverage),
            "excitable_nodes": self.tracker.mask.excitable_count,
            "ever_excited_nodes": int(np.count_nonzero(self.tracker.ever_excited)),
            "initial_activity": self.initial_activity,
            "peak_activity": int(series.max()) if series.size else 0,
            "excite_threshold": self.tracker.excite_threshold,
            "count_stride": self.tracker.stride,
        }


# -- file formats ----------------------------------------------------------

def write_activity_csv(path, series, stride: int = 1) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("step,excited_count\n")
        for k, n in enumerate(series, start=1):
            fh.write(f"{k * stride},{int(n)}\n")


def read_activity_csv(path) -> tuple[np.ndarray, np.ndarray]:
    steps, counts = [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "step,excited_count":
            raise InputFormatError(path, "line 1", f"unexpected header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                a, b = line.strip().split(",")
                steps.append(int(a))
                counts.append(int(b))
            except ValueError:
                raise InputFormatError(path, f"line {lineno}", f"bad row {line.strip()!r}") from None
    return np.asarray(steps, dtype=np.int64), np.asarray(counts, dtype=np.int64)


def write_kv(path, items: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        for key, value in items.items():
            fh.write(f"{key} = {value}\n")


def read_kv(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InputFormatError(path, f"line {lineno}", "expected 'key = value'")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


_GRID_HEADER = struct.Struct("<II")


def write_grid(path, grid: np.ndarray) -> None:
    """Dense float grid: uint32 width, uint32 height, then float64 row-major (LE)."""
    grid = np.ascontiguousarray(grid, dtype="<f8")
    h, w = grid.shape
    with open(path, "wb") as fh:
        fh.write(_GRID_HEADER.pack(w, h))
        fh.write(grid.tobytes())


def read_grid(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _GRID_HEADER.size:
        raise InputFormatError(path, len(data), "truncated header")
    w, h = _GRID_HEADER.unpack_from(data)
    expected = _GRID_HEADER.size + 8 * w * h
    if w == 0 or h == 0:
        raise InputFormatError(path, 0, f"empty grid {w}x{h}")
    if len(data) != expected:
        raise InputFormatError(path, min(len(data), expected),
                               f"size {len(data)} bytes, header implies {expected}")
    arr = np.frombuffer(data, dtype="<f8", offset=_GRID_HEADER.size).reshape(h, w)
    bad = ~np.isfinite(arr)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise InputFormatError(path, _GRID_HEADER.size + 8 * idx, "non-finite value")
    return arr.astype(float)
