import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from decentopt.problems import (
    NETWORK_SAFETY,
    ProblemError,
    dump_dataset_csv,
    lipschitz_estimates,
    logistic_dataset,
    make_cubic_pair,
    make_cancelling_powers,
    make_logistic_regression,
    make_matrix_factorization,
    make_polynomial_family,
    make_quartic_pair,
    make_softplus_network,
    network_dataset,
)
from oracles import central_fd_grad, sampled_lipschitz_ratio


def _network(activation="softplus", seed=0):
    return make_softplus_network(network_dataset(2, 20, 3, seed=seed), hidden=5, activation=activation, seed=seed)


def _logistic(lam=0.1):
    return make_logistic_regression(logistic_dataset(3, 60, 4, seed=2), lam=lam, rho=1.0)


def _mf():
    return make_matrix_factorization(np.random.default_rng(0).standard_normal((3, 4)), rank=2)


INSTANCES = {
    "cubic": make_cubic_pair,
    "quartic": make_quartic_pair,
    "cancelling_powers": make_cancelling_powers,
    "logistic": _logistic,
    "network": _network,
    "matrix_factorization": _mf,
}


# ---------------------------------------------------------------- cubic pair


def test_cubic_values():
    p = make_cubic_pair()
    assert p.locals[0].eval([2.0]) == pytest.approx(8 / 3)
    assert p.locals[0].grad([2.0])[0] == 4.0
    assert p.locals[1].grad([2.0])[0] == -4.0


def test_cubic_average_is_zero():
    p = make_cubic_pair()
    for u in np.random.default_rng(0).uniform(-50, 50, 100):
        assert p.f_mean([u]) == 0.0
        assert abs(p.grad_mean([u])[0]) <= 1e-14


def test_cubic_lipschitz_examples():
    p = make_cubic_pair()
    assert p.locals[0].lipschitz_on_ball([0.0], 10.0) == 20.0
    est = lipschitz_estimates(p, [0.0], 10.0)
    assert est.per_agent == (20.0, 20.0)
    assert est.l_hat == 20.0
    assert est.l_global == 1.0


def test_cubic_local_constant_unbounded():
    p = make_cubic_pair()
    assert p.locals[0].lipschitz_on_ball([0.0], 1e8) == 2e8


def test_cubic_stacked_grad_matches_locals():
    p = make_cubic_pair()
    x = np.array([[1.5], [-2.0]])
    np.testing.assert_array_equal(p.grad_stack(x), np.stack([p.locals[i].grad(x[i]) for i in range(2)]))


# -------------------------------------------------------------- quartic pair


def test_quartic_values():
    p = make_quartic_pair()
    assert p.locals[0].grad([21.0])[0] == 2.0
    assert p.f_mean([20.0]) == 0.0
    assert p.grad_mean([20.0])[0] == 0.0


def test_quartic_lipschitz_example():
    assert make_quartic_pair().locals[0].lipschitz_on_ball([0.0], 25.0) == 12150.0


def test_quartic_lipschitz_matches_grid_max():
    grid = np.linspace(-25, 25, 50001)
    assert np.max(np.abs(6 * (grid - 20) ** 2)) == pytest.approx(12150.0)


def test_quartic_l_hat_grows_quadratically():
    p = make_quartic_pair()
    lh = [lipschitz_estimates(p, [0.0], float(t)).l_hat for t in range(1, 6)]
    # 6 (20 + t)^2 / t^2 stays bounded in t, so l_hat = Theta(t^2) once t dominates the shift
    ratios = [lipschitz_estimates(p, [0.0], 100.0 * t).l_hat / (100.0 * t) ** 2 for t in range(1, 6)]
    assert lh == sorted(lh)
    assert all(6 <= r <= 6 * 1.2**2 for r in ratios)


def test_quartic_stacked_grad_batched():
    p = make_quartic_pair()
    xs = np.random.default_rng(0).standard_normal((7, 2, 1))
    np.testing.assert_array_equal(p.stacked_grad(xs)[3], p.grad_stack(xs[3]))


# -------------------------------------------------------- polynomial family


def test_polynomial_encodes_cubic_pair():
    poly = make_polynomial_family([(0, (3,), 1 / 3), (1, (3,), -1 / 3)], 2, 1, 3)
    cub = make_cubic_pair()
    for u in np.random.default_rng(1).uniform(-10, 10, 100):
        for i in range(2):
            assert poly.locals[i].eval([u]) == pytest.approx(cub.locals[i].eval([u]), rel=1e-14)
            assert poly.locals[i].grad([u])[0] == pytest.approx(cub.locals[i].grad([u])[0], rel=1e-14)


def test_polynomial_rejects_bad_input():
    with pytest.raises(ProblemError):
        make_polynomial_family([(0, (3,), 1.0)], 1, 1, 2)
    with pytest.raises(ProblemError):
        make_polynomial_family([(0, (1, 1), 1.0)], 1, 1, 2)
    with pytest.raises(ProblemError):
        make_polynomial_family([], 1, 1, 1)


def test_cancelling_powers_average_is_smooth():
    p = make_cancelling_powers(3)
    for u in np.random.default_rng(0).uniform(-20, 20, 50):
        assert p.f_mean([u]) == pytest.approx(u * u / 3, rel=1e-12, abs=1e-12)
    small = lipschitz_estimates(p, [0.0], 1.0)
    big = lipschitz_estimates(p, [0.0], 1e4)
    assert big.l_global == 1.0  # 2/3 clamped up to 1
    assert big.l_hat >= 6e4
    assert small.l_hat <= big.l_hat


def test_polynomial_hessian_bound_two_dims():
    # f = x0^2 x1: Hessian [[2 x1, 2 x0], [2 x0, 0]]; at magnitudes (2, 3) the bound is [[6, 4], [4, 0]]
    p = make_polynomial_family([(0, (2, 1), 1.0)], 1, 2, 3)
    np.testing.assert_array_equal(p.locals[0].hessian_abs_bound([1.0, 2.0], 1.0), [[6.0, 4.0], [4.0, 0.0]])
    assert p.locals[0].lipschitz_on_ball([1.0, 2.0], 1.0) == 10.0


def test_matrix_factorization_is_order_four_polynomial():
    p = _mf()
    assert p.dim == 4 * 2 + 3 * 2
    assert max(loc.order for loc in p.locals) == 4


def test_matrix_factorization_value():
    targets = np.array([[1.0, 2.0]])
    p = make_matrix_factorization(targets, rank=1)
    # stacked variable (U = [u0, u1], w_0)
    x = np.array([0.5, 1.0, 2.0])
    assert p.locals[0].eval(x) == pytest.approx((1.0 - 1.0) ** 2 + (2.0 - 2.0) ** 2)
    x2 = np.array([1.0, 1.0, 1.0])
    assert p.locals[0].eval(x2) == pytest.approx(0.0 + 1.0)


# ------------------------------------------------------------------ logistic


def test_logistic_at_zero():
    data = logistic_dataset(2, 40, 3, seed=0)
    p = make_logistic_regression(data, lam=0.0, rho=1.0)
    for i, pts in enumerate(data):
        a = np.array([pt[0] for pt in pts])
        b = np.array([pt[1] for pt in pts])
        assert p.locals[i].eval(np.zeros(3)) == pytest.approx(np.log(2))
        np.testing.assert_allclose(p.locals[i].grad(np.zeros(3)), -(b[:, None] * a).sum(axis=0) / (2 * len(b)), atol=1e-15)


def test_logistic_bound_formula():
    data = logistic_dataset(2, 40, 3, seed=0)
    p = make_logistic_regression(data, lam=0.3, rho=2.0)
    a = np.array([pt[0] for pt in data[0]])
    expected = max(1.0, np.sum(a * a) / (4 * len(a)) + 2 * 0.3 * 2.0)
    assert p.locals[0].lipschitz_on_ball(np.zeros(3), 1.0) == pytest.approx(expected)
    assert p.locals[0].lipschitz_on_ball(np.zeros(3), 1e6) == p.locals[0].lipschitz_on_ball(np.zeros(3), 1.0)


def test_logistic_rejects_empty_agent():
    with pytest.raises(ProblemError):
        make_logistic_regression([[]], lam=0.1, rho=1.0)


def test_logistic_stacked_matches_loop():
    p = _logistic()
    x = np.random.default_rng(4).standard_normal((3, 4))
    np.testing.assert_allclose(p.stacked_grad(x), np.stack([f.grad(x[i]) for i, f in enumerate(p.locals)]), rtol=1e-12, atol=1e-14)
    u = x[0]
    assert p.f_mean(u) == pytest.approx(np.mean([f.eval(u) for f in p.locals]), rel=1e-12)


@pytest.mark.parametrize("n", [5, 10, 20])
def test_logistic_experiment_split(n):
    data = logistic_dataset(n, 2000, 5, seed=0)
    assert [len(d) for d in data] == [2000 // n] * n
    assert all(len(pt[0]) == 5 for pt in data[0])


def test_dataset_csv_dump(tmp_path):
    data = logistic_dataset(2, 6, 3, seed=0)
    path = tmp_path / "d.csv"
    dump_dataset_csv(data, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "agent,x0,x1,x2,label"
    assert len(lines) == 7


# ------------------------------------------------------------------- network


def test_network_dimension_matches_3x5x1():
    p = make_softplus_network(network_dataset(4, 100, 3, seed=0), hidden=5)
    assert p.dim == 5 * 3 + 5
    assert p.n_agents == 4


def test_network_zero_output_layer():
    data = network_dataset(1, 10, 3, seed=1)
    p = make_softplus_network(data, hidden=5)
    v = np.array([pt[1] for pt in data[0]])
    x = np.concatenate([np.random.default_rng(0).standard_normal(15), np.zeros(5)])
    assert p.locals[0].eval(x) == pytest.approx(np.mean(v**2))


def test_network_grad_many_matches_grad():
    loc = _network().locals[0]
    xs = np.random.default_rng(0).standard_normal((6, loc.dim))
    np.testing.assert_allclose(loc.grad_many(xs), np.stack([loc.grad(x) for x in xs]), rtol=1e-12, atol=1e-13)


def test_network_relu_subgradient_zero_at_kink():
    loc = make_softplus_network(network_dataset(1, 5, 3, seed=0), hidden=2, activation="relu").locals[0]
    x = np.zeros(loc.dim)
    x[6:] = 1.0  # W1 = 0 puts every pre-activation on the kink
    assert np.all(loc.grad(x)[:6] == 0.0)


def test_network_rejects_bad_activation():
    with pytest.raises(ProblemError):
        make_softplus_network(network_dataset(1, 5, 3, seed=0), activation="tanh")


def test_network_bound_holds_on_fresh_pairs():
    p = _network(seed=5)
    loc = p.locals[0]
    center = np.random.default_rng(1).standard_normal(loc.dim)
    for radius in (0.5, 2.0):
        bound = loc.lipschitz_on_ball(center, radius)
        sampled = sampled_lipschitz_ratio(loc.grad, center, radius, 1000, np.random.default_rng(99))
        assert sampled <= bound
        assert bound <= NETWORK_SAFETY * 10 * max(sampled, 0.5)


def test_network_bound_is_cached_and_deterministic():
    a = _network(seed=3).locals[0]
    b = _network(seed=3).locals[0]
    c = np.zeros(a.dim)
    assert a.lipschitz_on_ball(c, 1.0) == b.lipschitz_on_ball(c, 1.0)


# -------------------------------------------------------- cross-instance laws


@pytest.mark.parametrize("name", sorted(INSTANCES))
def test_gradients_match_finite_differences(name):
    p = INSTANCES[name]()
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(100):
        d = rng.standard_normal(p.dim)
        x = d / np.linalg.norm(d) * 10 * rng.random() ** (1 / p.dim)
        for f in p.locals:
            g = f.grad(x)
            fd = central_fd_grad(f.eval, x)
            worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1.0))
    assert worst < 1e-6


@pytest.mark.parametrize("name", ["cubic", "quartic", "cancelling_powers", "logistic", "matrix_factorization"])
def test_analytic_bounds_never_violated(name):
    p = INSTANCES[name]()
    rng = np.random.default_rng(3)
    for radius in (0.5, 3.0):
        center = rng.standard_normal(p.dim)
        for f in p.locals:
            sampled = sampled_lipschitz_ratio(f.grad, center, radius, 1000, rng)
            assert sampled <= f.lipschitz_on_ball(center, radius) * (1 + 1e-12)


@pytest.mark.parametrize("name", sorted(set(INSTANCES) - {"network"}))
@given(r1=st.floats(0.01, 20.0), r2=st.floats(0.01, 20.0))
def test_lipschitz_monotone_and_clamped(name, r1, r2):
    p = INSTANCES[name]()
    lo, hi = sorted((r1, r2))
    c = np.full(p.dim, 0.3)
    a = lipschitz_estimates(p, c, lo)
    b = lipschitz_estimates(p, c, hi)
    assert a.l_hat <= b.l_hat
    assert all(x <= y for x, y in zip(a.per_agent, b.per_agent))
    assert min(a.per_agent) >= 1.0 and a.l_global >= 1.0
    assert a.l_hat >= a.l_global
    assert a.l_hat == max(a.per_agent)


def test_network_envelope_monotone_in_radius():
    # the sampled envelope is costly, so a fixed ladder stands in for the property test
    p = _network(seed=2)
    c = np.full(p.dim, 0.3)
    ests = [lipschitz_estimates(p, c, r) for r in (0.1, 0.5, 2.0, 8.0)]
    assert all(a.l_hat <= b.l_hat for a, b in zip(ests, ests[1:]))
    assert all(e.l_hat >= e.l_global >= 1.0 for e in ests)


def test_lipschitz_estimates_reject_zero_radius():
    with pytest.raises(ProblemError):
        lipschitz_estimates(make_quartic_pair(), [0.0], 0.0)
