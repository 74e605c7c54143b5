import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from decentopt.algorithms import MagentaParams, StageSchedule, run_magenta
from decentopt.graph import build_complete_graph, build_mixing_matrix
from decentopt.metrics import (
    GapComponents,
    GapMode,
    MetricsError,
    RunClass,
    avg_gap,
    boundary_touch,
    classify_run,
    consensus_sq,
    gap_unconstrained,
    potential,
    potential_coefficient,
)
from decentopt.problems import logistic_dataset, make_logistic_regression, make_quartic_pair
from decentopt.state import NetworkState

ZERO = GapComponents(0.0, 0.0, 0.0, 0.0, 0.0)


def test_gap_zero_at_stationary_consensus():
    p = make_quartic_pair()
    s = NetworkState(np.full((2, 1), 20.0), np.zeros((2, 1)))
    g = gap_unconstrained(s, p)
    assert g == GapComponents(0.0, 0.0, 0.0, 0.0, None)
    assert g.eq25 == 0.0 and g.eq26 == 0.0


def test_gap_consensus_two_agents():
    p = make_quartic_pair()
    g = gap_unconstrained(NetworkState(np.array([[0.0], [2.0]]), np.array([[5.0], [-1.0]])), p)
    assert g.x_consensus_sq == 2.0
    assert g.y_norm_sq == 26.0
    assert g.y_consensus_sq == 18.0


def test_gap_without_y():
    p = make_quartic_pair()
    g = gap_unconstrained(NetworkState(np.array([[19.0], [21.0]])), p)
    assert g.y_norm_sq is None and g.y_consensus_sq is None
    assert g.mean_grad_norm_sq == 0.0  # the two local gradients at 19 and 21 cancel
    with pytest.raises(MetricsError):
        _ = g.eq26


def test_y_norm_equals_n_mean_grad_when_y_is_consensual():
    # along a MAGENTA run ybar equals the mean gradient, so replacing y by 1 ybar gives ||y||^2 = N ||mean grad||^2
    p = make_logistic_regression(logistic_dataset(4, 80, 3, seed=5), lam=0.1, rho=1.0)
    w = build_mixing_matrix(build_complete_graph(4))
    seen = []

    def observe(t, r, x, y, xt):
        yc = np.repeat(y.mean(axis=0, keepdims=True), 4, axis=0)
        g = gap_unconstrained(NetworkState(x, yc), p)
        seen.append(abs(g.y_norm_sq - 4 * g.mean_grad_norm_sq) / max(1e-300, g.y_norm_sq))

    x0 = np.random.default_rng(0).standard_normal((4, 3))
    run_magenta(p, w, x0, MagentaParams(epsilon=0.5, d=1.0, eta_used=w.deviation_norm, max_stages=2, max_iters=200), observer=observe)
    assert len(seen) > 50
    assert max(seen) < 1e-10


def test_avg_gap_zero_window():
    assert avg_gap([ZERO] * 4) == 0.0
    assert avg_gap([ZERO] * 4, GapMode.CONSTRAINED) == 0.0


def test_avg_gap_single_element():
    g = GapComponents(1.0, 9.0, 2.0, 3.0, 5.0)
    assert avg_gap([g]) == 6.0
    assert avg_gap([g], GapMode.CONSTRAINED) == 10.0


def test_avg_gap_errors():
    with pytest.raises(MetricsError):
        avg_gap([])
    with pytest.raises(MetricsError):
        avg_gap([GapComponents(1.0, 1.0, 1.0, 1.0, None)], GapMode.CONSTRAINED)


def test_avg_gap_modes_agree_on_boundary_free_stage():
    p = make_logistic_regression(logistic_dataset(3, 60, 3, seed=2), lam=0.1, rho=1.0)
    w = build_mixing_matrix(build_complete_graph(3))
    x0 = np.random.default_rng(3).standard_normal((3, 3))
    res = run_magenta(p, w, x0, MagentaParams(epsilon=0.2, d=10.0, eta_used=w.deviation_norm, max_stages=1))
    rep = res.stages[0]
    assert rep.boundary_free
    a, b = rep.avg_gap_unconstrained, rep.avg_gap_constrained
    assert abs(a - b) <= 1e-9 * (1 + a)


def test_potential_consensus_state_is_f_mean():
    p = make_quartic_pair()
    s = NetworkState(np.full((2, 1), 18.0), np.full((2, 1), 3.0))
    val = potential(s, p, 5.0, 1.0, 1.0, 0.0)
    assert val.value == val.f_mean == p.f_mean([18.0])
    assert val.x_term == 0.0 and val.y_term == 0.0


def test_potential_decomposes():
    p = make_quartic_pair()
    s = NetworkState(np.array([[1.0], [3.0]]), np.array([[2.0], [-2.0]]))
    val = potential(s, p, 4.0, 0.5, 0.5, 0.3)
    coef = (1 - 1.5 * 0.09) / (32 * 3 * 16)
    assert val.y_term == pytest.approx(coef * 8.0)
    assert val.x_term == 2.0
    assert val.value == val.f_mean + val.x_term + val.y_term


def test_potential_coefficient_scaling():
    a = potential_coefficient(2.0, 1.0, 1.0, 0.5)
    b = potential_coefficient(2.0 * np.sqrt(2.0), 1.0, 1.0, 0.5)
    assert b == pytest.approx(a / 2, rel=1e-15)


def test_potential_errors():
    p = make_quartic_pair()
    with pytest.raises(MetricsError):
        potential(NetworkState(np.zeros((2, 1))), p, 1.0, 1.0, 1.0, 0.0)
    with pytest.raises(MetricsError):
        potential_coefficient(1.0, 1.0, 1.0, 0.8)


def test_classify_examples():
    assert classify_run([5.0, 1e3, 1e11]) is RunClass.DIVERGED
    assert classify_run([5.0, 0.5]) is RunClass.CONVERGED
    assert classify_run([2.0, 100.0, 3.0, 50.0]) is RunClass.UNDECIDED
    assert classify_run([1.0]) is RunClass.UNDECIDED
    assert classify_run([0.1, float("nan")]) is RunClass.DIVERGED
    assert classify_run([0.1, float("inf")]) is RunClass.DIVERGED
    with pytest.raises(MetricsError):
        classify_run([])


gap_values = st.one_of(st.floats(0, 1e12, allow_nan=False), st.just(float("inf")), st.just(float("nan")))


@given(st.lists(gap_values, min_size=1, max_size=20), st.lists(gap_values, max_size=20))
def test_classify_divergence_is_absorbing(head, tail):
    if classify_run(head) is RunClass.DIVERGED:
        assert classify_run(head + tail) is RunClass.DIVERGED


def _sched(radius):
    return StageSchedule(1, radius, np.zeros(2), 0.1, 10, 1.0)


def test_boundary_touch_center_and_sphere():
    s = NetworkState(np.array([[0.0, 0.0], [3.0, 4.0], [1.0, 1.0]]))
    fx, ft = boundary_touch(s, _sched(5.0))
    assert list(fx) == [False, True, False]
    assert ft is None


def test_boundary_touch_projected_point():
    from decentopt.algorithms import project_ball

    xt = np.array([project_ball([30.0, -40.0], np.zeros(2), 5.0), [0.5, 0.5]])
    _, ft = boundary_touch(NetworkState(np.zeros((2, 2))), _sched(5.0), x_tilde=xt)
    assert list(ft) == [True, False]


def test_boundary_touch_tolerance():
    s = NetworkState(np.array([[5.0 - 1e-12, 0.0], [4.9, 0.0]]))
    assert list(boundary_touch(s, _sched(5.0))[0]) == [True, False]
    assert list(boundary_touch(s, _sched(5.0), tol=0.2)[0]) == [True, True]


@given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 2**31))
def test_consensus_sq_nonneg_and_shift_invariant(n, k, seed):
    x = np.random.default_rng(seed).standard_normal((n, k))
    assert consensus_sq(x) >= 0
    assert consensus_sq(x + 7.0) == pytest.approx(consensus_sq(x), abs=1e-9)
