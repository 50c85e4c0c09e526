import numpy as np
import pytest
from scipy.optimize import linprog

from oracles import euclid
from otda.barycenter import (BarycenterConfig, barycenter, barycenter_objective,
                             multisource_adapt, union_support)
from otda.measures import DatasetConfig, DiscreteMeasure, generate, labeled, make_empirical
from otda.ot_entropic import EntropicConfig
from otda.ot_exact import w1


def joint_lp_oracle(S, inputs, a):
    """min_w sum_i a_i <C_i, P_i>, P_i 1 = w, P_i^T 1 = mu_i, sum w = 1, via HiGHS."""
    k = S.shape[0]
    blocks = [mu.size for mu in inputs]
    n_var = k + sum(k * m for m in blocks)
    c = np.zeros(n_var)
    rows, rhs = [], []
    off = k
    for ai, mu, m in zip(a, inputs, blocks):
        c[off:off + k * m] = ai * euclid(S, mu.points).ravel()
        for r in range(k):
            row = np.zeros(n_var)
            row[off + r * m:off + (r + 1) * m] = 1.0
            row[r] = -1.0
            rows.append(row)
            rhs.append(0.0)
        for j in range(m):
            row = np.zeros(n_var)
            row[off + j:off + k * m:m] = 1.0
            rows.append(row)
            rhs.append(mu.weights[j])
        off += k * m
    res = linprog(c, A_eq=np.array(rows), b_eq=np.array(rhs), bounds=(0, None), method="highs")
    assert res.status == 0
    return float(res.fun)


def test_single_input_is_its_own_barycenter(rng):
    mu = DiscreteMeasure(rng.standard_normal((6, 2)), rng.dirichlet(np.ones(6)))
    bary, obj = barycenter([mu])
    assert obj <= 1e-12
    assert w1(bary, mu) <= 1e-12


def test_identical_inputs(rng):
    mu = DiscreteMeasure(rng.standard_normal((5, 2)), rng.dirichlet(np.ones(5)))
    bary, obj = barycenter([mu, mu, mu], BarycenterConfig(weights_a=(0.2, 0.3, 0.5)))
    assert obj <= 1e-6
    assert 0.5 * np.abs(bary.weights - mu.weights).sum() <= 1e-6


def test_two_diracs_weighted_median():
    grid = np.linspace(0.0, 1.0, 11)[:, None]
    inputs = [make_empirical([[0.0]]), make_empirical([[1.0]])]
    bary, obj = barycenter(inputs, BarycenterConfig(weights_a=(0.3, 0.7), support=grid))
    brute = min(0.3 * abs(x) + 0.7 * abs(1 - x) for x in grid[:, 0])
    assert abs(obj - brute) <= 1e-12 and abs(obj - 0.3) <= 1e-12
    assert abs(bary.weights[-1] - 1.0) <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_exact_matches_joint_lp(seed):
    rng = np.random.default_rng(seed)
    inputs = [DiscreteMeasure(rng.standard_normal((4, 2)), rng.dirichlet(np.ones(4)))
              for _ in range(3)]
    a = rng.dirichlet(np.ones(3))
    bary, obj = barycenter(inputs, BarycenterConfig(weights_a=tuple(a / a.sum())))
    S = union_support(inputs)
    assert abs(obj - joint_lp_oracle(S, inputs, a / a.sum())) <= 1e-8


@pytest.mark.parametrize("seed", range(3))
def test_objective_below_input_candidates(seed):
    rng = np.random.default_rng(seed)
    inputs = [make_empirical(rng.standard_normal((5, 2)) + k) for k in range(3)]
    a = (0.2, 0.5, 0.3)
    bary, obj = barycenter(inputs, BarycenterConfig(weights_a=a))
    assert np.all(bary.weights >= 0) and abs(bary.weights.sum() - 1) <= 1e-12
    for mu in inputs:
        assert obj <= barycenter_objective(mu, inputs, a) + 1e-9


def test_entropic_solver_close_to_exact(rng):
    inputs = [make_empirical(rng.standard_normal((6, 2)) + k) for k in range(2)]
    _, exact = barycenter(inputs)
    cfg = BarycenterConfig(solver="entropic", entropic=EntropicConfig(0.01))
    bary, ent = barycenter(inputs, cfg)
    assert ent >= exact - 1e-9
    assert ent <= exact + 0.1
    assert abs(bary.weights.sum() - 1.0) <= 1e-12


def test_config_errors(rng):
    with pytest.raises(ValueError):
        BarycenterConfig(weights_a=(0.5, 0.6))
    with pytest.raises(ValueError):
        BarycenterConfig(solver="free")
    mu = make_empirical(rng.standard_normal((3, 2)))
    with pytest.raises(ValueError, match="dimension"):
        barycenter([mu], BarycenterConfig(support=np.zeros((2, 3))))
    with pytest.raises(ValueError):
        barycenter([])


def test_small_support_gives_large_objective():
    inputs = [make_empirical([[10.0]])]
    _, obj = barycenter(inputs, BarycenterConfig(support=np.array([[0.0]])))
    assert obj == 10.0


def _moons(seed, n=20):
    src, _ = generate(DatasetConfig("two_moons", n_points=n, seed=seed))
    return src


def test_multisource_sources_equal_target():
    s = _moons(0)
    out, rep = multisource_adapt([s, s], s.measure, (0.5, 0.5))
    np.testing.assert_allclose(out.points, np.vstack([s.points, s.points]), atol=1e-6)
    assert rep["eq1_objective"] <= 1e-6
    np.testing.assert_array_equal(out.labels, np.r_[s.labels, s.labels])


def test_multisource_gaussian_symmetry():
    means = []
    for seed in range(10):
        n = 300
        a, _ = generate(DatasetConfig("gaussian_shift", n_points=n, seed=seed))
        b, _ = generate(DatasetConfig("gaussian_shift", n_points=n, seed=seed + 100))
        t, _ = generate(DatasetConfig("gaussian_shift", n_points=n, seed=seed + 200))
        s1 = labeled(a.points + [-2.0, 0.0], a.labels)
        s2 = labeled(b.points + [2.0, 0.0], b.labels)
        _, rep = multisource_adapt([s1, s2], t.measure, (0.5, 0.5))
        B = DiscreteMeasure.from_dict(rep["barycenter"])
        means.append(B.weights @ B.points)
    for m in means:
        assert np.linalg.norm(m) <= 0.3


def test_multisource_triangle_and_report():
    s1, s2, t = _moons(1), _moons(2), _moons(3)
    s2 = labeled(s2.points + [1.0, 0.5], s2.labels)
    out, rep = multisource_adapt([s1, s2], t.measure, (0.7, 0.3))
    assert rep["sum_alpha_w1_source_target"] <= rep["triangle_rhs"] + 1e-9
    assert abs(rep["eq1_objective"] - (rep["sum_alpha_w1_source_barycenter"] / 2
                                       + rep["w1_barycenter_target"])) <= 1e-12
    assert out.size == s1.size + s2.size
    assert abs(out.weights[:s1.size].sum() - 0.7) <= 1e-12


def test_multisource_candidate_comparison():
    s1, s2, t = _moons(4), _moons(5), _moons(6)
    s2 = labeled(s2.points + [0.8, 0.0], s2.labels)
    alphas = (0.5, 0.5)
    _, rep = multisource_adapt([s1, s2], t.measure, alphas)

    def eq1(candidate):
        src = sum(a * w1(s.measure, candidate) for a, s in zip(alphas, (s1, s2)))
        return src / 2 + w1(candidate, t.measure)

    for cand in (t.measure, s1.measure, s2.measure):
        assert rep["eq1_objective"] <= eq1(cand) + 1e-9


def test_multisource_errors():
    s = _moons(7, 10)
    with pytest.raises(ValueError):
        multisource_adapt([s], s.measure, (0.5,))
    with pytest.raises(ValueError):
        multisource_adapt([], s.measure, ())


@pytest.mark.parametrize("seed", range(3))
def test_heavy_input_shortcut_matches_lp(seed):
    rng = np.random.default_rng(seed)
    inputs = [DiscreteMeasure(rng.standard_normal((4, 2)), rng.dirichlet(np.ones(4)))
              for _ in range(3)]
    a = (0.6, 0.25, 0.15)
    bary, obj = barycenter(inputs, BarycenterConfig(weights_a=a))
    assert w1(bary, inputs[0]) <= 1e-12
    assert abs(obj - joint_lp_oracle(union_support(inputs), inputs, a)) <= 1e-8


def test_sq_euclidean_uses_lp():
    from otda.cost import CostSpec
    inputs = [make_empirical([[0.0]]), make_empirical([[1.0]])]
    grid = np.linspace(0.0, 1.0, 11)[:, None]
    bary, obj = barycenter(inputs, BarycenterConfig(weights_a=(0.5, 0.5), support=grid,
                                                    costs=CostSpec("sq_euclidean")))
    # the midpoint beats either endpoint under the squared cost
    assert abs(obj - 0.25) <= 1e-9
