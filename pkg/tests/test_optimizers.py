import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfgd.caputo import FracParams, gamma_shift, scaled_direction_quadrature
from cfgd.data import FunctionApproxTask, gen_function_approx, init_network
from cfgd.errors import ConfigError, DomainError, NonFiniteIterate
from cfgd.objectives import QuadraticObjective, TwoLayerTanhNet
from cfgd.optimizers import (AO, AT, GD, LEARNING_RATE_GRID, NA, AOStage, ExactQuadratic, Fixed,
                             GridBest32, ScaledFixed, Trace, ao_stages_from_gammas, compute_stepsize,
                             iterations_to, run, run_nn_training, step_direction)
from cfgd.special import gauss_jacobi

from conftest import random_spd

F10 = QuadraticObjective(np.diag([20.0, 2.0]), [0.0, 0.0])
X0 = np.array([1.0, -10.0])


def test_grid_has_32_values():
    assert len(LEARNING_RATE_GRID) == 32
    assert len(set(LEARNING_RATE_GRID)) == 32
    assert max(LEARNING_RATE_GRID) == 0.1
    assert math.isclose(min(LEARNING_RATE_GRID), 0.25e-8, rel_tol=1e-12)


def test_gd_direction_example():
    assert np.array_equal(step_direction(GD(), F10, X0), [20.0, -20.0])


def test_na_gamma_zero_is_gd(rng):
    A = random_spd(rng, 5)
    q = QuadraticObjective(A, rng.standard_normal(5))
    x = rng.standard_normal(5)
    sched = NA(FracParams(0.3, gamma_shift(0.3)), rng.standard_normal(5))
    assert np.array_equal(step_direction(sched, q, x), step_direction(GD(), q, x))


def test_at_direction_example():
    sched = AT(FracParams.from_gamma(0.5, -1.0), [np.array([-1.0, -1.0])])
    d = step_direction(sched, F10, X0, [np.array([-1.0, -1.0])])
    assert np.allclose(d, [-20.0, -2.0], rtol=1e-14)


def test_at_needs_history():
    with pytest.raises(ConfigError):
        AT(FracParams(0.5, 0.0), [])
    sched = AT(FracParams(0.5, 0.0), [np.zeros(2), np.zeros(2)])
    assert sched.L == 2
    with pytest.raises(ConfigError):
        step_direction(sched, F10, X0, [np.zeros(2)])


def test_exact_stepsize_examples():
    q = QuadraticObjective(np.eye(3), [1.0, 2.0, 3.0])
    x = np.array([0.5, -1.0, 2.0])
    assert math.isclose(compute_stepsize(ExactQuadratic(), q, x, q.gradient(x)), 1.0, rel_tol=1e-15)
    assert math.isclose(compute_stepsize(ExactQuadratic(), F10, X0, np.array([20.0, -20.0])), 1.0 / 11.0,
                        rel_tol=1e-15)


def test_grid_best_example():
    q = QuadraticObjective([[2.0]], [0.0])  # f(x) = x^2
    # (1 - 2 eta)^2 falls monotonically on the grid, whose largest value is 0.1
    assert compute_stepsize(GridBest32(), q, np.array([1.0]), np.array([2.0])) == 0.1
    assert compute_stepsize(GridBest32(grid=(0.25, 0.75)), q, np.array([1.0]), np.array([2.0])) == 0.75


def test_scaled_fixed_stepsize(rng):
    A = random_spd(rng, 4)
    q = QuadraticObjective(A, np.zeros(4))
    eta = compute_stepsize(ScaledFixed(1.5), q, np.zeros(4), np.ones(4), gamma=0.5)
    At = A + 0.5 * np.diag(np.diag(A))
    assert math.isclose(eta, 1.5 / np.linalg.norm(At, 2), rel_tol=1e-12)


def test_fixed_and_policy_errors():
    assert compute_stepsize(Fixed(0.3), F10, X0, X0) == 0.3
    with pytest.raises(ConfigError):
        Fixed(0.0)
    with pytest.raises(ConfigError):
        compute_stepsize(object(), F10, X0, X0)
    net = TwoLayerTanhNet([0.1, 0.2], [0.0, 1.0], 1)
    with pytest.raises(DomainError):
        compute_stepsize(ExactQuadratic(), net, np.zeros(3), np.ones(3))


def test_gd_exact_monotone_and_linear():
    tr = run(GD(), F10, ExactQuadratic(), X0, 60, grad_tol=None)
    f = np.array(tr.objective)
    assert np.all(np.diff(f) < 0)
    ratios = f[1:] / f[:-1]
    # steepest descent on a quadratic: ((kappa-1)/(kappa+1))^2 bounds the per-step ratio
    assert np.all(ratios <= (9.0 / 11.0) ** 2 + 1e-12)


def test_at_reaches_minimum_quickly():
    sched = AT(FracParams.from_gamma(0.5, -1.0), [np.array([-1.0, -1.0])])
    tr = run(sched, F10, ExactQuadratic(), X0, 5, grad_tol=None)
    assert min(tr.objective) <= 1e-15
    assert iterations_to(tr, "objective", 1e-15) <= 5
    gd = run(GD(), F10, ExactQuadratic(), X0, 200, grad_tol=None, obj_tol=1e-15)
    assert iterations_to(gd, "objective", 1e-15) >= 50


def test_na_gamma_zero_reproduces_gd_trace(rng):
    A = random_spd(rng, 6)
    q = QuadraticObjective(A, rng.standard_normal(6))
    x0 = rng.standard_normal(6)
    t1 = run(GD(), q, ExactQuadratic(), x0, 40, grad_tol=None)
    t2 = run(NA(FracParams(0.6, gamma_shift(0.6)), np.ones(6)), q, ExactQuadratic(), x0, 40, grad_tol=None)
    assert np.max(np.abs(t1.X - t2.X)) <= 1e-12


def test_grad_tol_and_obj_tol_stop():
    tr = run(GD(), F10, ExactQuadratic(), X0, 10_000)
    assert tr.metadata["stop_reason"] in ("grad_tol", "degenerate_direction")
    tr = run(GD(), F10, ExactQuadratic(), X0, 10_000, grad_tol=None, obj_tol=1e-3)
    assert tr.metadata["stop_reason"] == "obj_tol"
    assert tr.objective[-1] <= 1e-3 < tr.objective[-2]


def test_distance_columns(rng):
    A = random_spd(rng, 3)
    q = QuadraticObjective(A, rng.standard_normal(3))
    xs = q.minimizer()
    tr = run(GD(), q, ExactQuadratic(), np.zeros(3), 30, x_star=xs, x_tik=xs, grad_tol=None, dist_tol=1e-6)
    assert np.array_equal(tr.column("dist_to_x_star"), tr.column("dist_to_x_tik"))
    assert tr.metadata["stop_reason"] == "dist_tol" or tr.iterations == 30


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_non_finite_raises_with_partial_trace():
    with pytest.raises(NonFiniteIterate) as info:
        run(GD(), F10, Fixed(1e200), X0, 10, grad_tol=None)
    assert len(info.value.trace) >= 1


def test_run_rejects_wrong_dimension():
    with pytest.raises(ConfigError):
        run(GD(), F10, Fixed(0.01), np.zeros(3), 5)


def test_trace_csv_round_trip():
    tr = run(GD(), F10, ExactQuadratic(), X0, 5, grad_tol=None, x_star=np.zeros(2))
    text = tr.csv_text()
    lines = text.strip().split("\n")
    assert lines[0] == "iter,objective,stepsize,dist_to_x_star"
    assert len(lines) == len(tr) + 1
    for k, line in enumerate(lines[1:]):
        fields = line.split(",")
        assert float(fields[1]) == tr.objective[k]  # 17 significant digits round-trip
    assert lines[-1].split(",")[2] == ""  # no step taken from the final iterate
    assert "variant=GD" in tr.metadata_text()


def test_trace_deterministic(rng):
    A = random_spd(rng, 5)
    q = QuadraticObjective(A, np.ones(5))
    sched = AT(FracParams.from_gamma(0.5, -0.5), [np.full(5, 2.0)])
    a = run(sched, q, ExactQuadratic(), np.zeros(5), 50, grad_tol=None, seed=3)
    b = run(sched, q, ExactQuadratic(), np.zeros(5), 50, grad_tol=None, seed=3)
    assert a.csv_text() == b.csv_text()
    assert a.metadata_text() == b.metadata_text()


def test_ao_schedule_and_handoff(rng):
    A = random_spd(rng, 4)
    q = QuadraticObjective(A, rng.standard_normal(4))
    c = np.ones(4)
    gammas = [0.5, 0.25, 0.125]
    stages = ao_stages_from_gammas(gammas, 0.5, 7)
    ao = AO(stages, c)
    assert ao.total_iters == 21
    assert [ao.stage_at(k) for k in (0, 6, 7, 20, 25)] == [0, 0, 1, 2, 2]
    full = run(ao, q, ScaledFixed(1.0), np.zeros(4), 1000, grad_tol=None)
    assert full.iterations == 21
    x = np.zeros(4)
    pieces = [x]
    for st_ in stages:
        tr = run(NA(st_.params, c), q, ScaledFixed(1.0), x, st_.iters, grad_tol=None)
        pieces.extend(tr.iterates[1:])
        x = tr.final
    assert np.allclose(np.array(pieces), full.X, rtol=0, atol=1e-14)


def test_ao_rejects_negative_gamma():
    with pytest.raises(ConfigError):
        AO([AOStage(0.5, 0.0, 5)], np.zeros(2))  # beta = 0 gives gamma = -1/3
    with pytest.raises(ConfigError):
        AO([AOStage(0.5, 1.0, 0)], np.zeros(2))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_exact_line_search_descends(d, seed):
    r = np.random.default_rng(seed)
    A = random_spd(r, d)
    q = QuadraticObjective(A, r.standard_normal(d))
    tr = run(GD(), q, ExactQuadratic(), r.standard_normal(d), 30)
    f = np.array(tr.objective)
    assert np.all(np.diff(f) <= 1e-14 * (1 + np.abs(f[:-1])))


def _na_run(d, eta, gamma, seed):
    from cfgd.analysis import TikhonovProblem, tikhonov_solution, tilde_A
    from cfgd.linalg import condition_number
    from cfgd.objectives import LeastSquaresObjective
    r = np.random.default_rng(seed)
    W = r.standard_normal((d, d + 3)) / math.sqrt(d + 3)
    y = r.standard_normal(d + 3)
    obj = LeastSquaresObjective(W, y)
    c = np.ones(d)
    p = FracParams.from_gamma(0.5, gamma)
    xt = tikhonov_solution(TikhonovProblem(W, y, gamma, c))
    tr = run(NA(p, c), obj, ScaledFixed(eta), r.standard_normal(d), 60, grad_tol=None, x_tik=xt)
    kappa = condition_number(tilde_A(W, 0.5, p.beta))
    floor = (1e-13 * (1 + np.linalg.norm(xt))) ** 2
    return tr.column("dist_to_x_tik"), kappa, floor


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 10), st.floats(0.05, 1.0), st.sampled_from([0.25, 1.0, 10.0]), st.integers(0, 2**32 - 1))
def test_na_contraction_stated_rate(d, eta, gamma, seed):
    dist, kappa, floor = _na_run(d, eta, gamma, seed)
    bound = dist[0] ** 2 * abs(1 - eta / kappa) ** np.arange(len(dist))
    assert np.all(dist**2 <= bound * (1 + 1e-10) + floor)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 10), st.floats(0.05, 1.95), st.sampled_from([0.25, 1.0, 10.0]), st.integers(0, 2**32 - 1))
def test_na_contraction_operator_rate(d, eta, gamma, seed):
    dist, kappa, floor = _na_run(d, eta, gamma, seed)
    q = max(abs(1 - eta / kappa), abs(1 - eta))
    bound = dist[0] ** 2 * q ** (2 * np.arange(len(dist)))
    assert np.all(dist**2 <= bound * (1 + 1e-10) + floor)


def test_stated_rate_can_fail_for_large_eta():
    # well-conditioned problem, eta close to 2: the top eigendirection contracts by |1 - eta| only
    dist, kappa, _ = _na_run(2, 1.75, 0.25, 1)
    bound = dist[0] ** 2 * abs(1 - 1.75 / kappa) ** np.arange(len(dist))
    assert np.any(dist**2 > bound)


# --- network training ---------------------------------------------------------------


@pytest.fixture
def small_task():
    z, y, zt, yt = gen_function_approx(FunctionApproxTask("h1", m=30, test_size=200, seed=4))
    return TwoLayerTanhNet(z, y, 8), zt, yt


def test_nn_gamma_zero_direction_equals_gradient(small_task, rng):
    net, _, _ = small_task
    x = rng.standard_normal(net.dim)
    net.prepare_cache(x)
    for s in (1, 3, 7):
        # gamma = 0 with alpha close to 1: the quadrature direction tends to the gradient
        p = FracParams(1 - 1e-9, gamma_shift(1 - 1e-9))
        d = scaled_direction_quadrature(net, x, x, p, gauss_jacobi(s, p.alpha))
        assert np.allclose(d, net.gradient(x), rtol=1e-12, atol=1e-12)


def test_nn_training_runs_and_records(small_task):
    net, zt, yt = small_task
    x0 = init_network(net.n, 4)
    tr = run_nn_training(net, GD(), 1, 30, x0, test_z=zt, test_y=yt, seed=4)
    assert tr.header() == ["iter", "objective", "stepsize", "train_loss", "eta_coefficients", "test_error"]
    loss = tr.column("train_loss")
    assert loss[-1] < loss[0]
    assert np.all(np.diff(loss) <= 1e-12)  # each block step can only lower the loss
    r = net.predict(tr.final, zt) - yt
    assert math.isclose(tr.column("test_error")[-1], r @ r / r.size, rel_tol=1e-14)


def test_nn_single_quadrature_point_decreases_loss():
    z, y, _, _ = gen_function_approx(FunctionApproxTask("h1", m=100, test_size=10, seed=0))
    net = TwoLayerTanhNet(z, y, 50)
    x0 = init_network(50, 0)
    hist = np.random.default_rng(0).standard_normal(net.dim)
    tr = run_nn_training(net, AT(FracParams.from_gamma(0.7, 70.0), [hist]), 1, 1000, x0)
    assert tr.objective[-1] < tr.objective[0]


def test_nn_training_rejects_bad_config(small_task):
    net, _, _ = small_task
    with pytest.raises(ConfigError):
        run_nn_training(net, GD(), 0, 5, np.zeros(net.dim))
    with pytest.raises(ConfigError):
        run_nn_training(net, NA(FracParams(0.5, 0.0), np.zeros(net.dim)), 2, 5, np.zeros(net.dim))


def test_nn_training_deterministic(small_task):
    net, zt, yt = small_task
    x0 = init_network(net.n, 1)
    sched = AT(FracParams.from_gamma(0.7, 5.0), [np.zeros(net.dim)])
    a = run_nn_training(net, sched, 3, 10, x0, test_z=zt, test_y=yt)
    b = run_nn_training(net, sched, 3, 10, x0, test_z=zt, test_y=yt)
    assert a.csv_text() == b.csv_text()


def test_trace_empty_columns():
    tr = Trace()
    assert tr.header() == ["iter", "objective", "stepsize"]
    assert tr.csv_text() == "iter,objective,stepsize\n"
