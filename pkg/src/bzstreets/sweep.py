"""Coverage as a function of phi, and its split into plateaus and transitions."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BZError, ContractViolation, InputFormatError, InsufficientDataError, SingularFitError
from .medium import GridMask, OregonatorParams, PerturbationSpec
from .metrics import RunRecord
from .runner import RunSchedule, simulate

log = logging.getLogger(__name__)

PHASE_LABELS = ("P1", "T1", "P2", "T2", "P3")


def default_phi_grid(start: float = 0.040, stop: float = 0.080, step: float = 0.001) -> list[float]:
    n = int(round((stop - start) / step))
    return [round(start + k * step, 10) for k in range(n + 1)]


@dataclass(frozen=True)
class SweepSample:
    phi: float
    coverage: float
    outcome: str
    steps: int


@dataclass
class SweepCurve:
    samples: list[SweepSample]
    mask_id: str
    base_params: OregonatorParams
    failures: list[tuple[float, str]] = field(default_factory=list)
    records: dict[float, RunRecord] = field(default_factory=dict, repr=False)

    @property
    def phis(self) -> np.ndarray:
        return np.array([s.phi for s in self.samples])

    @property
    def coverages(self) -> np.ndarray:
        return np.array([s.coverage for s in self.samples])

    @property
    def ok(self) -> bool:
        return not self.failures


def run_sweep(mask: GridMask, phis, base_params: OregonatorParams,
              perturbations: list[PerturbationSpec], schedule: RunSchedule, *,
              threads: int = 1, keep_records: bool = False,
              excite_threshold: float = 0.1, count_stride: int = 1) -> SweepCurve:
    """One independent run per phi. Failed phis are reported, not fatal."""
    phis = [float(p) for p in phis]
    if not phis:
        raise ContractViolation("phi grid is empty")
    if any(b <= a for a, b in zip(phis, phis[1:])):
        raise ContractViolation("phi grid must be strictly increasing")

    def one(phi):
        try:
            rec = simulate(mask, base_params.with_phi(phi), perturbations, schedule,
                           excite_threshold=excite_threshold, count_stride=count_stride)
            return phi, rec, None
        except (BZError, ValueError, FloatingPointError) as exc:
            log.warning("phi=%s failed: %s", phi, exc)
            return phi, None, f"{type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, phis))
    else:
        results = [one(p) for p in phis]

    curve = SweepCurve([], mask.fingerprint, base_params)
    for phi, rec, err in results:
        if err is not None:
            curve.failures.append((phi, err))
            continue
        curve.samples.append(SweepSample(phi, rec.coverage, rec.outcome, rec.steps_executed))
        if keep_records:
            curve.records[phi] = rec
    return curve


def fit_linear(points) -> tuple[float, float]:
    """Ordinary least squares ``y = slope*x + intercept``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise SingularFitError("need at least two (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise SingularFitError("all x values are equal")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    return slope, float(ym - slope * xm)


@dataclass(frozen=True)
class Segment:
    label: str
    indices: tuple[int, ...]
    phi_lo: float
    phi_hi: float


@dataclass
class PhaseSegmentation:
    segments: list[Segment]
    t2_fit: tuple[float, float] | None

    def label_of(self, index: int) -> str:
        for seg in self.segments:
            if index in seg.indices:
                return seg.label
        raise KeyError(index)

    def segment(self, label: str) -> Segment | None:
        return next((s for s in self.segments if s.label == label), None)


def classify_phases(curve, high: float = 0.95, low: float = 0.05,
                    plateau_slope: float = 5.0) -> PhaseSegmentation:
    """Split a coverage curve into P1/T1/P2/T2/P3.

    P1 is the longest prefix with coverage >= ``high`` and P3 the longest
    remaining suffix with coverage <= ``low``. Between them, P2 is the
    widest run of at least two samples whose consecutive slopes all stay
    within ``plateau_slope`` (coverage per unit phi); what precedes it is
    T1 and what follows is T2. Without such a plateau the whole interior is
    T1. ``curve`` is a :class:`SweepCurve` or a sequence of (phi, coverage).
    """
    if isinstance(curve, SweepCurve):
        phis, cov = curve.phis, curve.coverages
    else:
        arr = np.asarray(curve, dtype=float)
        phis, cov = arr[:, 0], arr[:, 1]
    n = len(phis)
    if n < 4:
        raise InsufficientDataError(f"need at least 4 samples, got {n}")

    p1_end = 0
    while p1_end < n and cov[p1_end] >= high:
        p1_end += 1
    p3_start = n
    while p3_start > p1_end and cov[p3_start - 1] <= low:
        p3_start -= 1

    best = None
    a = p1_end
    while a < p3_start:
        b = a
        while b + 1 < p3_start and abs((cov[b + 1] - cov[b]) / (phis[b + 1] - phis[b])) <= plateau_slope:
            b += 1
        if b > a:
            width = phis[b] - phis[a]
            if best is None or width > best[2]:
                best = (a, b, width)
        a = b + 1

    spans = [("P1", 0, p1_end)]
    if best is None:
        spans.append(("T1", p1_end, p3_start))
    else:
        spans += [("T1", p1_end, best[0]), ("P2", best[0], best[1] + 1),
                  ("T2", best[1] + 1, p3_start)]
    spans.append(("P3", p3_start, n))
    segments = [
        Segment(label, tuple(range(lo, hi)), float(phis[lo]), float(phis[hi - 1]))
        for label, lo, hi in spans if hi > lo
    ]
    t2 = next((s for s in segments if s.label == "T2"), None)
    t2_fit = None
    if t2 is not None and len(t2.indices) >= 2:
        idx = list(t2.indices)
        t2_fit = fit_linear(np.column_stack([phis[idx], cov[idx]]))
    return PhaseSegmentation(segments, t2_fit)


# -- file formats ----------------------------------------------------------

def write_sweep_csv(path, curve: SweepCurve) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("phi,coverage,outcome,steps\n")
        for s in curve.samples:
            fh.write(f"{s.phi!r},{s.coverage!r},{s.outcome},{s.steps}\n")
        for phi, err in curve.failures:
            fh.write(f"{phi!r},nan,error,0\n")


def read_sweep_csv(path) -> list[SweepSample]:
    out = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "phi,coverage,outcome,steps":
            raise InputFormatError(path, "line 1", f"unexpected header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.strip().split(",")
            try:
                phi, cov, outcome, steps = parts
                sample = SweepSample(float(phi), float(cov), outcome, int(steps))
            except ValueError:
                raise InputFormatError(path, f"line {lineno}", f"bad row {line.strip()!r}") from None
            if outcome != "error":
                out.append(sample)
    return out


def phase_report(seg: PhaseSegmentation) -> str:
    lines = ["phase  phi_lo   phi_hi   samples"]
    for s in seg.segments:
        lines.append(f"{s.label:<6} {s.phi_lo:.4f}   {s.phi_hi:.4f}   {len(s.indices)}")
    if seg.t2_fit is not None:
        slope, icpt = seg.t2_fit
        lines.append(f"T2 fit: coverage = {icpt:.4f} + ({slope:.3f}) * phi")
    else:
        lines.append("T2 fit: n/a")
    return "\n".join(lines) + "\n"


def phase_kv(seg: PhaseSegmentation) -> dict:
    out = {}
    for s in seg.segments:
        out[f"{s.label}.phi_lo"] = repr(s.phi_lo)
        out[f"{s.label}.phi_hi"] = repr(s.phi_hi)
        out[f"{s.label}.samples"] = len(s.indices)
    if seg.t2_fit is not None:
        out["T2.slope"] = repr(seg.t2_fit[0])
        out["T2.intercept"] = repr(seg.t2_fit[1])
    return out
