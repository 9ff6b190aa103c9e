import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.cluster import hierarchy
from scipy.cluster.vq import kmeans2

from bzstreets.analysis import (classify_zeta, cut, dissimilarity_matrix, fcm, hier_cluster,
                                normal_cdf, normal_quantile, pso_cluster, qq_points,
                                quantization_error, standardize, write_cost_csv,
                                write_matrix_csv, write_memberships_csv, write_merges_csv,
                                write_qq_csv)
from bzstreets.errors import ContractViolation, DegenerateSampleError, DomainError

finite = st.floats(-1e6, 1e6, allow_nan=False)


# -- standardize -----------------------------------------------------------

def test_standardize_fixed_point():
    assert list(standardize([-1, 1])) == [-1.0, 1.0]


def test_standardize_degenerate():
    with pytest.raises(DegenerateSampleError):
        standardize([0, 0, 0])
    with pytest.raises(DegenerateSampleError):
        standardize([3])


def test_standardize_hand_values():
    # mean 2.5, population sd sqrt(1.25)
    sd = math.sqrt(1.25)
    expect = [(v - 2.5) / sd for v in (1, 2, 3, 4)]
    assert standardize([1, 2, 3, 4]) == pytest.approx(expect, abs=1e-15)


@given(st.lists(finite, min_size=2, max_size=50))
@settings(max_examples=100)
def test_standardize_moments(xs):
    if np.std(xs) < 1e-3:
        return
    z = standardize(xs)
    assert abs(z.mean()) < 1e-12 and abs(z.std() - 1) < 1e-12


# -- normal quantile -------------------------------------------------------

def _ref_quantile(p):
    mpmath.mp.dps = 40
    return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(p) - 1))


def test_quantile_at_half():
    assert normal_quantile(0.5) == 0.0


def test_quantile_975():
    assert normal_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-12)


@pytest.mark.parametrize("p", [1e-12, 1e-9, 1e-6, 0.001, 0.02424, 0.02426, 0.1, 0.3,
                               0.5 - 1e-9, 0.7, 0.9, 0.97575, 0.999, 1 - 1e-6, 1 - 1e-12])
def test_quantile_against_high_precision(p):
    assert abs(normal_quantile(p) - _ref_quantile(p)) < 1e-8


@given(st.floats(1e-12, 1 - 1e-12))
@settings(max_examples=300)
def test_quantile_inverts_cdf(p):
    assert abs(normal_cdf(normal_quantile(p)) - p) < 1e-8


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_quantile_domain(p):
    with pytest.raises(DomainError):
        normal_quantile(p)


# -- q-q -------------------------------------------------------------------

def test_qq_rejects_single_value():
    with pytest.raises(DegenerateSampleError):
        qq_points([1.0])


def test_qq_two_points():
    qq = qq_points([5.0, -2.0])
    assert qq.ordered.tolist() == [-2.0, 5.0]
    assert qq.theoretical[0] == pytest.approx(_ref_quantile(0.25), abs=1e-12)
    assert qq.theoretical[1] == pytest.approx(_ref_quantile(0.75), abs=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_qq_order_statistics_within_their_standard_error(seed):
    """Each order statistic of a normal sample sits within four asymptotic
    standard errors, sqrt(p(1-p)/n) / pdf(quantile), of its quantile."""
    n = 1000
    qq = qq_points(np.random.default_rng(seed).standard_normal(n))
    p = (np.arange(1, n + 1) - 0.5) / n
    pdf = np.exp(-0.5 * qq.theoretical ** 2) / math.sqrt(2 * math.pi)
    se = np.sqrt(p * (1 - p) / n) / pdf
    assert np.all(np.abs(qq.ordered - qq.theoretical) < 4 * se)


@given(st.lists(finite, min_size=2, max_size=200))
@settings(max_examples=200)
def test_qq_is_non_decreasing(xs):
    qq = qq_points(xs)
    assert np.all(np.diff(qq.theoretical) > 0)
    assert np.all(np.diff(qq.ordered) >= 0)


# -- dissimilarity ---------------------------------------------------------

def test_identical_maps_are_zero_apart():
    m = np.random.default_rng(0).random((5, 5))
    assert not dissimilarity_matrix([m, m.copy(), m]).any()


def test_single_node_difference():
    a = np.zeros((4, 4))
    b = a.copy()
    b[2, 1] = -0.3
    assert dissimilarity_matrix([a, b])[0, 1] == pytest.approx(0.3, abs=1e-15)


def test_dissimilarity_matches_naive_loop(rng):
    maps = [rng.random((8, 8)) for _ in range(3)]
    got = dissimilarity_matrix(maps)
    for i in range(3):
        for j in range(3):
            s = 0.0
            for r in range(8):
                for c in range(8):
                    s += (maps[i][r, c] - maps[j][r, c]) ** 2
            assert got[i, j] == pytest.approx(math.sqrt(s), rel=1e-13, abs=1e-15)


def test_dissimilarity_shape_mismatch():
    with pytest.raises(ContractViolation):
        dissimilarity_matrix([np.zeros((3, 3)), np.zeros((3, 4))])


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50)
def test_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    d = dissimilarity_matrix([rng.normal(size=(6, 6)) for _ in range(3)])
    assert np.allclose(d, d.T) and not np.diag(d).any()
    assert d[0, 2] <= d[0, 1] + d[1, 2] + 1e-12


# -- hierarchical ----------------------------------------------------------

def _points_matrix(x):
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    return np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))


def test_two_points_one_merge():
    dg = hier_cluster(_points_matrix([0.0, 3.0]))
    assert len(dg.merges) == 1 and dg.merges[0].height == 3.0


def test_collinear_average_linkage():
    dg = hier_cluster(_points_matrix([0.0, 1.0, 10.0]), "average")
    assert [m.height for m in dg.merges] == [1.0, 9.5]
    assert (dg.merges[0].a, dg.merges[0].b) == (0, 1)
    assert dg.nested() == [["0", "1"], "2"] or dg.nested() == ["2", ["0", "1"]]


def _blobs(rng, centres, per, spread):
    pts = np.concatenate([c + spread * rng.standard_normal((per, len(c))) for c in centres])
    truth = np.repeat(np.arange(len(centres)), per)
    order = rng.permutation(len(pts))
    return pts[order], truth[order]


def _same_partition(a, b):
    pairs = set(zip(a.tolist(), b.tolist()))
    return len(pairs) == len(set(a.tolist())) == len(set(b.tolist()))


@pytest.mark.parametrize("linkage", ["single", "complete", "average"])
@pytest.mark.parametrize("seed", range(5))
def test_planted_blobs_recovered(linkage, seed):
    rng = np.random.default_rng(seed)
    pts, truth = _blobs(rng, [(0, 0), (10, 0), (0, 10)], 12, 0.25)
    labels = cut(hier_cluster(_points_matrix(pts), linkage), 3)
    assert _same_partition(labels, truth)


@pytest.mark.parametrize("linkage", ["single", "complete", "average"])
def test_heights_match_scipy(linkage, rng):
    pts = rng.random((15, 2))
    d = _points_matrix(pts)
    ours = hier_cluster(d, linkage).linkage_matrix()
    ref = hierarchy.linkage(pts, method=linkage)
    assert np.allclose(ours[:, 2], ref[:, 2], rtol=1e-12)
    assert np.all(np.diff(ours[:, 2]) >= 0)
    for k in (2, 3, 5):
        a = cut(hier_cluster(d, linkage), k)
        b = hierarchy.fcluster(ref, k, criterion="maxclust")
        assert _same_partition(a, b)


def test_cut_extremes_and_domain():
    dg = hier_cluster(_points_matrix([0.0, 1.0, 5.0, 9.0]))
    assert cut(dg, 1).tolist() == [0, 0, 0, 0]
    assert cut(dg, 4).tolist() == [0, 1, 2, 3]
    for k in (0, 5):
        with pytest.raises(DomainError):
            cut(dg, k)


def test_hier_rejects_bad_input():
    with pytest.raises(DomainError):
        hier_cluster(np.zeros((2, 2)), "ward")
    with pytest.raises(ContractViolation):
        hier_cluster(np.array([[0, 1], [2, 0]]))
    with pytest.raises(ContractViolation):
        hier_cluster(np.zeros((1, 1)))


def test_dendrogram_text_is_nested_list():
    dg = hier_cluster(_points_matrix([0.0, 1.0, 10.0]), labels=["a", "b", "c"])
    assert dg.to_text().strip() in ('[["a", "b"], "c"]', '["c", ["a", "b"]]')


# -- fuzzy c-means ---------------------------------------------------------

def test_fcm_single_cluster_is_the_mean(rng):
    x = rng.random((20, 2))
    fc = fcm(x, 1)
    assert np.allclose(fc.centers[0], x.mean(axis=0))
    assert np.all(fc.memberships == 1.0)


def test_fcm_two_symmetric_points():
    fc = fcm([[0.0, 0.0], [4.0, 0.0]], 2, tol=1e-14)
    centers = sorted(map(tuple, np.round(fc.centers, 6)))
    assert centers == [(0.0, 0.0), (4.0, 0.0)]
    assert np.allclose(np.sort(fc.memberships, axis=1), [[0, 1], [0, 1]], atol=1e-6)


def test_fcm_point_on_a_center():
    fc = fcm([[1.0], [1.0], [1.0], [9.0]], 2, tol=1e-14)
    assert np.all(np.isfinite(fc.memberships))
    assert np.allclose(fc.memberships.sum(axis=1), 1, atol=1e-12)


def _reference_fcm(x, k, m, seed, iters):
    """Loop-by-loop alternating optimisation from the same start."""
    rng = np.random.default_rng(seed)
    u = rng.random((len(x), k))
    u /= u.sum(axis=1, keepdims=True)
    for _ in range(iters + 1):
        c = np.zeros((k, x.shape[1]))
        for j in range(k):
            w = u[:, j] ** m
            c[j] = (w[:, None] * x).sum(0) / w.sum()
        new = np.zeros_like(u)
        for i in range(len(x)):
            d = [np.linalg.norm(x[i] - c[j]) for j in range(k)]
            for j in range(k):
                new[i, j] = 1.0 / sum((d[j] / d[l]) ** (2 / (m - 1)) for l in range(k))
        u = new
    return u


def test_fcm_two_blobs_against_reference():
    rng = np.random.default_rng(9)
    x, truth = _blobs(rng, [(0, 0), (10, 10)], 20, 1.0)
    fc = fcm(x, 2, seed=4, max_iter=50, tol=0)
    ref = _reference_fcm(x, 2, 2.0, 4, fc.iterations)
    assert np.allclose(fc.memberships, ref, atol=1e-9)
    for blob in (0, 1):
        col = np.argmax(fc.memberships[truth == blob].mean(axis=0))
        assert np.all(fc.memberships[truth == blob, col] >= 0.9)


@pytest.mark.parametrize("seed", range(50))
def test_fcm_rows_and_objective(seed):
    rng = np.random.default_rng(1000 + seed)
    x = rng.normal(size=(40, 3))
    rows = []
    fc = fcm(x, 4, seed=seed, callback=lambda it, u, c, obj: rows.append(u.sum(axis=1)))
    assert rows, "at least one iteration"
    for r in rows:
        assert np.max(np.abs(r - 1)) < 1e-9
    assert np.all(np.diff(fc.history) <= 0)


def test_fcm_is_reproducible(rng):
    x = rng.random((30, 2))
    a, b = fcm(x, 3, seed=5), fcm(x, 3, seed=5)
    assert np.array_equal(a.memberships, b.memberships)


@pytest.mark.parametrize("kw", [{"k": 0}, {"k": 11}, {"k": 2, "m": 1.0}])
def test_fcm_domain(kw):
    with pytest.raises(DomainError):
        fcm(np.zeros((10, 2)), **kw)


# -- PSO -------------------------------------------------------------------

def _weiszfeld(x, iters=500):
    y = x.mean(axis=0)
    for _ in range(iters):
        d = np.maximum(np.linalg.norm(x - y, axis=1), 1e-12)
        y = (x / d[:, None]).sum(0) / (1 / d).sum()
    return y


def test_pso_single_center_near_geometric_median(rng):
    x = rng.normal(size=(60, 2)) * [1, 3]
    res = pso_cluster(x, 1, max_iter=200, seed=1)
    oracle = quantization_error(x, _weiszfeld(x)[None])
    assert res.best_cost <= 1.05 * oracle


def test_pso_zero_iterations():
    res = pso_cluster(np.random.default_rng(0).random((10, 2)), 2, max_iter=0)
    assert len(res.cost_history) == 1


@pytest.mark.parametrize("seed", range(10))
def test_pso_two_blobs_close_to_kmeans(seed):
    rng = np.random.default_rng(seed)
    x, _ = _blobs(rng, [(0, 0), (8, 3)], 25, 0.7)
    res = pso_cluster(x, 2, max_iter=300, seed=seed)
    centres, _ = kmeans2(x, 2, seed=seed, minit="++", iter=100)
    oracle = quantization_error(x, centres)
    assert np.all(np.diff(res.cost_history) <= 0)
    assert res.best_cost <= 1.05 * oracle


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_pso_history_non_increasing(seed):
    x = np.random.default_rng(seed).random((20, 2))
    res = pso_cluster(x, 3, particles=8, max_iter=40, seed=seed)
    assert np.all(np.diff(res.cost_history) <= 0)
    assert res.best_centers.shape == (3, 2)


def test_pso_reproducible_and_domain():
    x = np.random.default_rng(3).random((15, 2))
    a, b = pso_cluster(x, 2, max_iter=20, seed=7), pso_cluster(x, 2, max_iter=20, seed=7)
    assert a.cost_history == b.cost_history
    with pytest.raises(DomainError):
        pso_cluster(x, 16)
    with pytest.raises(DomainError):
        pso_cluster(x, 2, particles=1)


def test_quantization_error_by_hand():
    x = np.array([[0.0, 0.0], [3.0, 4.0], [10.0, 0.0]])
    assert quantization_error(x, [[0.0, 0.0], [10.0, 0.0]]) == pytest.approx(5 / 3)


# -- traffic classes -------------------------------------------------------

@pytest.mark.parametrize("zeta,label,flag", [
    (0.5, "free", False), (0.6, "moving", True), (0.65, "moving", True),
    (0.7, "moving", False), (0.9, "moving", False), (0.95, "moderate", False),
    (1.1, "moderate", False), (1.2, "heavy", False), (3.1, "heavy", False),
    (3.2, "congested", False), (4.0, "congested", False), (0.0, "free", False),
])
def test_zeta_classes(zeta, label, flag):
    got = classify_zeta(zeta)
    assert (got.label, got.overlap) == (label, flag)


def test_zeta_negative():
    with pytest.raises(DomainError):
        classify_zeta(-0.01)


# -- writers ---------------------------------------------------------------

def test_writers(tmp_path):
    qq = qq_points([3.0, 1.0, 2.0])
    write_qq_csv(tmp_path / "qq.csv", qq)
    assert (tmp_path / "qq.csv").read_text().splitlines()[1].endswith(",1.0")
    d = _points_matrix([0.0, 1.0, 4.0])
    write_matrix_csv(tmp_path / "d.csv", d, ["a", "b", "c"])
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == ",a,b,c"
    write_merges_csv(tmp_path / "m.csv", hier_cluster(d))
    assert len((tmp_path / "m.csv").read_text().splitlines()) == 3
    fc = fcm(np.array([[0.0], [1.0], [4.0]]), 2)
    write_memberships_csv(tmp_path / "u.csv", fc, ["a", "b", "c"])
    assert (tmp_path / "u.csv").read_text().startswith("item,cluster_0,cluster_1\n")
    write_cost_csv(tmp_path / "c.csv", [3.0, 2.0])
    assert (tmp_path / "c.csv").read_text() == "iteration,global_best_cost\n0,3.0\n1,2.0\n"
