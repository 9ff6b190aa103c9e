"""Statistics and clustering over coverage values and superposition maps.

Superposition maps are the normalised excitation-frequency rasters of
individual runs, flattened into vectors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, DegenerateSampleError, DivergenceError, DomainError

# -- sample statistics -----------------------------------------------------


def standardize(sample) -> np.ndarray:
    """z-scores using the population standard deviation."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 2:
        raise DegenerateSampleError("need at least two values")
    sd = x.std()
    if sd == 0 or not np.isfinite(sd):
        raise DegenerateSampleError("sample has zero variance")
    return (x - x.mean()) / sd


# Acklam's rational approximation to the normal quantile (rel. error ~1e-9),
# followed by one Halley step against erfc.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def _lower_quantile(p: float) -> float:
    # p in (0, 0.5]
    if p < _P_LOW:
        t = math.sqrt(-2.0 * math.log(p))
        x = ((((( _C[0] * t + _C[1]) * t + _C[2]) * t + _C[3]) * t + _C[4]) * t + _C[5]) / \
            ((((_D[0] * t + _D[1]) * t + _D[2]) * t + _D[3]) * t + 1.0)
    else:
        t = p - 0.5
        r = t * t
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * t / \
            (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    e = 0.5 * math.erfc(-x / _SQRT2) - p
    u = e * _SQRT2PI * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def normal_quantile(p: float) -> float:
    """Inverse of the standard normal CDF."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    if p > 0.5:
        # 1 - p is exact here, so the upper tail keeps full precision
        return -_lower_quantile(1.0 - p)
    return _lower_quantile(p)


@dataclass(frozen=True)
class QQResult:
    pairs: tuple[tuple[float, float], ...]
    sample_mean: float
    sample_sd: float

    @property
    def theoretical(self) -> np.ndarray:
        return np.array([a for a, _ in self.pairs])

    @property
    def ordered(self) -> np.ndarray:
        return np.array([b for _, b in self.pairs])


def qq_points(sample) -> QQResult:
    """Order statistics against N(0, 1) quantiles at plotting positions (i-0.5)/n."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    if n < 2:
        raise DegenerateSampleError("Q-Q needs at least two values")
    if not np.all(np.isfinite(x)):
        raise DegenerateSampleError("sample contains non-finite values")
    theo = [normal_quantile((i - 0.5) / n) for i in range(1, n + 1)]
    pairs = tuple((float(t), float(s)) for t, s in zip(theo, x))
    return QQResult(pairs, float(x.mean()), float(x.std(ddof=1)))


# -- dissimilarity & hierarchical clustering -------------------------------


def dissimilarity_matrix(maps) -> np.ndarray:
    """Pairwise Euclidean distances between flattened maps."""
    maps = [np.asarray(m, dtype=float) for m in maps]
    if not maps:
        return np.zeros((0, 0))
    shape = maps[0].shape
    for k, m in enumerate(maps):
        if m.shape != shape:
            raise ContractViolation(f"map {k} has shape {m.shape}, expected {shape}")
    flat = [m.ravel() for m in maps]
    n = len(flat)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = float(np.sqrt(np.sum((flat[i] - flat[j]) ** 2)))
            out[i, j] = out[j, i] = d
    return out


LINKAGES = ("single", "complete", "average")


@dataclass(frozen=True)
class Merge:
    a: int
    b: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Agglomeration history. Leaves are 0..n-1; merge ``t`` creates cluster ``n + t``."""

    merges: tuple[Merge, ...]
    leaf_labels: tuple[str, ...]
    linkage: str = "average"

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_labels)

    def linkage_matrix(self) -> np.ndarray:
        """SciPy-style ``Z`` matrix (for plotting)."""
        return np.array([[m.a, m.b, m.height, m.size] for m in self.merges], dtype=float)

    def nested(self):
        n = self.n_leaves
        if not self.merges:
            return self.leaf_labels[0] if n else None

        def build(node):
            if node < n:
                return self.leaf_labels[node]
            m = self.merges[node - n]
            return [build(m.a), build(m.b)]

        return build(n + len(self.merges) - 1)

    def to_text(self) -> str:
        return json.dumps(self.nested()) + "\n"


def hier_cluster(matrix, linkage: str = "average", labels=None) -> Dendrogram:
    """Agglomerative clustering via Lance-Williams updates."""
    if linkage not in LINKAGES:
        raise DomainError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    d = np.array(matrix, dtype=float)
    n = d.shape[0]
    if d.ndim != 2 or d.shape != (n, n) or n < 2:
        raise ContractViolation("need a square matrix over at least two items")
    if not np.allclose(d, d.T, rtol=0, atol=1e-12) or np.any(np.diag(d) != 0):
        raise ContractViolation("matrix must be symmetric with zero diagonal")
    labels = tuple(str(x) for x in (labels if labels is not None else range(n)))
    if len(labels) != n:
        raise ContractViolation("one label per item required")

    d = d.copy()
    np.fill_diagonal(d, np.inf)
    ids = list(range(n))
    sizes = [1] * n
    alive = np.ones(n, dtype=bool)
    merges = []
    for t in range(n - 1):
        masked = np.where(alive[:, None] & alive[None, :], d, np.inf)
        flat = int(np.argmin(masked))
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        height = float(d[i, j])
        na, nb = sizes[i], sizes[j]
        if linkage == "single":
            new = np.minimum(d[i], d[j])
        elif linkage == "complete":
            new = np.maximum(d[i], d[j])
        else:
            new = (na * d[i] + nb * d[j]) / (na + nb)
        a, b = sorted((ids[i], ids[j]))
        merges.append(Merge(a, b, height, na + nb))
        d[i, :] = new
        d[:, i] = new
        d[i, i] = np.inf
        alive[j] = False
        ids[i] = n + t
        sizes[i] = na + nb
    return Dendrogram(tuple(merges), labels, linkage)


def cut(dendrogram: Dendrogram, k: int) -> np.ndarray:
    """Flat labels 0..k-1 after undoing the last ``k-1`` merges.

    Clusters are numbered in order of their first leaf.
    """
    n = dendrogram.n_leaves
    if not 1 <= k <= n:
        raise DomainError(f"k must lie in [1, {n}], got {k}")
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t, m in enumerate(dendrogram.merges[: n - k]):
        parent[find(m.a)] = n + t
        parent[find(m.b)] = n + t
    roots = {}
    out = np.empty(n, dtype=int)
    for leaf in range(n):
        r = find(leaf)
        out[leaf] = roots.setdefault(r, len(roots))
    return out


# -- fuzzy c-means ---------------------------------------------------------


@dataclass
class FuzzyClustering:
    centers: np.ndarray
    memberships: np.ndarray
    m: float
    objective: float
    history: list[float] = field(default_factory=list)
    iterations: int = 0

    def hard_labels(self) -> np.ndarray:
        return np.argmax(self.memberships, axis=1)


def _sq_dists(x, centers):
    return np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)


def _fcm_memberships(d2, m):
    n, k = d2.shape
    u = np.zeros((n, k))
    zero = d2 == 0
    hit = zero.any(axis=1)
    if hit.any():
        # coincident with a center: full membership there
        first = np.argmax(zero[hit], axis=1)
        u[np.flatnonzero(hit), first] = 1.0
    rest = ~hit
    if rest.any():
        # inverse-distance ratios; scale per row first so the power cannot overflow
        r = d2[rest] / d2[rest].min(axis=1, keepdims=True)
        w = r ** (-1.0 / (m - 1.0))
        u[rest] = w / w.sum(axis=1, keepdims=True)
    return u


def _fcm_centers(x, u, m):
    w = u ** m
    return (w.T @ x) / w.sum(axis=0)[:, None]


def fcm(points, k: int, m: float = 2.0, tol: float = 1e-6, max_iter: int = 300,
        seed: int = 0, callback=None) -> FuzzyClustering:
    """Fuzzy c-means by alternating membership/center updates.

    ``history`` holds the objective after each completed iteration and never
    increases: an increase can only be rounding noise at convergence, so the
    iteration stops and keeps the previous solution.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    if not m > 1:
        raise DomainError(f"fuzzifier must exceed 1, got {m}")
    rng = np.random.default_rng(seed)
    u = rng.random((n, k))
    u /= u.sum(axis=1, keepdims=True)
    c = _fcm_centers(x, u, m)
    obj = float(np.sum(u ** m * _sq_dists(x, c)))
    history = [obj]
    it = 0
    for it in range(1, max_iter + 1):
        u_new = _fcm_memberships(_sq_dists(x, c), m)
        c_new = _fcm_centers(x, u_new, m)
        obj_new = float(np.sum(u_new ** m * _sq_dists(x, c_new)))
        if obj_new > obj:
            it -= 1
            break
        u, c = u_new, c_new
        history.append(obj_new)
        if callback is not None:
            callback(it, u, c, obj_new)
        done = obj - obj_new < tol
        obj = obj_new
        if done:
            break
    return FuzzyClustering(c, u, m, obj, history, it)


# -- PSO clustering --------------------------------------------------------


@dataclass
class PsoClustering:
    best_centers: np.ndarray
    cost_history: list[float]
    particles: int
    inertia: float
    c1: float
    c2: float

    @property
    def best_cost(self) -> float:
        return self.cost_history[-1]


def quantization_error(points, centers) -> float:
    """Mean distance from each point to its nearest center."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    c = np.asarray(centers, dtype=float).reshape(-1, x.shape[1])
    return float(np.mean(np.sqrt(np.min(_gram_sq_dists(x, c), axis=1))))


def _gram_sq_dists(x, c):
    # |x|^2 + |c|^2 - 2 x.c keeps memory at n*k for long flattened maps
    d2 = np.sum(x * x, axis=1)[:, None] + np.sum(c * c, axis=1)[None, :] - 2.0 * (x @ c.T)
    return np.maximum(d2, 0.0)


def pso_cluster(points, k: int, particles: int = 30, inertia: float = 0.72,
                c1: float = 1.49, c2: float = 1.49, max_iter: int = 500,
                seed: int = 0) -> PsoClustering:
    """Global-best PSO over sets of ``k`` centers minimising quantization error."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, dim = x.shape
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    if particles < 2:
        raise DomainError("need at least two particles")
    rng = np.random.default_rng(seed)
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = hi - lo
    pos = np.stack([x[rng.choice(n, size=k, replace=False)] for _ in range(particles)])
    vel = rng.uniform(-1.0, 1.0, size=pos.shape) * 0.1 * span

    def cost(p):
        val = quantization_error(x, p)
        if not math.isfinite(val):
            raise DivergenceError(None, None, "non-finite PSO fitness")
        return val

    pbest = pos.copy()
    pbest_cost = np.array([cost(p) for p in pos])
    g = int(np.argmin(pbest_cost))
    gbest, gbest_cost = pbest[g].copy(), float(pbest_cost[g])
    history = [gbest_cost]
    for _ in range(max_iter):
        r1 = rng.random(pos.shape)
        r2 = rng.random(pos.shape)
        vel = inertia * vel + c1 * r1 * (pbest - pos) + c2 * r2 * (gbest[None] - pos)
        vel = np.clip(vel, -span, span)
        pos = np.clip(pos + vel, lo, hi)
        for p in range(particles):
            cp = cost(pos[p])
            if cp < pbest_cost[p]:
                pbest_cost[p] = cp
                pbest[p] = pos[p]
                if cp < gbest_cost:
                    gbest_cost = cp
                    gbest = pos[p].copy()
        history.append(gbest_cost)
    return PsoClustering(gbest, history, particles, inertia, c1, c2)


# -- traffic load classes --------------------------------------------------


@dataclass(frozen=True)
class ZetaClass:
    label: str
    overlap: bool = False


def classify_zeta(zeta: float) -> ZetaClass:
    """Traffic class of a volume/capacity ratio.

    The bands for free (< 0.7) and moving (0.6 to 0.9) traffic
    overlap; inside [0.6, 0.7) the more congested class wins and the result
    is flagged.
    """
    zeta = float(zeta)
    if not zeta >= 0 or math.isnan(zeta):
        raise DomainError(f"zeta must be >= 0, got {zeta}")
    if zeta > 3.1:
        return ZetaClass("congested")
    if zeta > 1.1:
        return ZetaClass("heavy")
    if zeta > 0.9:
        return ZetaClass("moderate")
    if zeta >= 0.6:
        return ZetaClass("moving", overlap=zeta < 0.7)
    return ZetaClass("free")


# -- file formats ----------------------------------------------------------


def write_qq_csv(path, qq: QQResult) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("theoretical_quantile,sample_order_statistic\n")
        for t, s in qq.pairs:
            fh.write(f"{t!r},{s!r}\n")


def write_matrix_csv(path, matrix, labels) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("," + ",".join(str(x) for x in labels) + "\n")
        for lab, row in zip(labels, np.asarray(matrix)):
            fh.write(str(lab) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def write_merges_csv(path, dendro: Dendrogram) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("cluster_a,cluster_b,height,merged_size\n")
        for m in dendro.merges:
            fh.write(f"{m.a},{m.b},{m.height!r},{m.size}\n")


def write_memberships_csv(path, fc: FuzzyClustering, labels) -> None:
    k = fc.memberships.shape[1]
    with open(path, "w", newline="\n") as fh:
        fh.write("item," + ",".join(f"cluster_{j}" for j in range(k)) + "\n")
        for lab, row in zip(labels, fc.memberships):
            fh.write(str(lab) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def write_cost_csv(path, history) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("iteration,global_best_cost\n")
        for i, c in enumerate(history):
            fh.write(f"{i},{c!r}\n")
