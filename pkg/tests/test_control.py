# tests/test_control.py

import logging

import numpy as np
import pytest

from pycmc.cmc import build_embedded, build_two_state
from pycmc.control import (
    DiscountedTask,
    StationaryPolicy,
    ValueFunction,
    bellman_residual,
    evaluate_learned_model,
    evaluate_policy,
    improve_policy,
    policy_evaluation_residual,
    policy_iteration,
    value_iteration_oracle,
)
from pycmc.estimation import CountTensor, DirichletPrior, increment
from pycmc.exceptions import InvalidDiscountError, ShapeMismatchError, ValidationError


@pytest.fixture
def embedded():
    return build_embedded(100)


def random_task(rng, n_states=5, n_controls=3, discount=0.9):
    p = rng.random((n_controls, n_states, n_states))
    p /= p.sum(axis=2, keepdims=True)
    return p, DiscountedTask(rng.random((n_states, n_controls)), discount)


def test_discounted_task_rejects_bad_discount():
    for discount in (1.0, -0.1, 1.5):
        with pytest.raises(InvalidDiscountError):
            DiscountedTask(np.zeros((2, 2)), discount)


def test_stationary_policy_checks():
    policy = StationaryPolicy((0, 1))
    assert policy[1] == 1 and len(policy) == 2
    with pytest.raises(ShapeMismatchError):
        policy.check(3, 2)
    with pytest.raises(ValidationError):
        StationaryPolicy((0, 2)).check(2, 2)


def test_evaluate_policy_leave_costs_two(embedded):
    task = DiscountedTask.from_cmc(embedded, 0.99)
    J = evaluate_policy(embedded.transitions, StationaryPolicy.constant(100, 0), task)
    assert J[0] == pytest.approx(2.0, abs=1e-9)
    assert np.all(np.abs(J.values[1:]) <= 1e-12)


def test_evaluate_policy_stay_costs_one_hundred(embedded):
    task = DiscountedTask.from_cmc(embedded, 0.99)
    choice = [0] * 100
    choice[0] = 1
    J = evaluate_policy(embedded.transitions, StationaryPolicy(choice), task)
    assert J[0] == pytest.approx(100.0, abs=1e-9)


def test_evaluate_policy_zero_costs():
    env = build_two_state(0.3)
    task = DiscountedTask.from_cmc(env, 0.9)
    for choice in ((0, 0), (0, 1), (1, 0), (1, 1)):
        assert np.all(evaluate_policy(env.transitions, StationaryPolicy(choice), task).values == 0.0)


def test_evaluate_policy_residual_is_small():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p, task = random_task(rng)
        policy = StationaryPolicy(rng.integers(0, 3, size=5))
        J = evaluate_policy(p, policy, task)
        assert policy_evaluation_residual(p, policy, task, J) < 1e-9


def test_evaluate_policy_shape_mismatch(embedded):
    with pytest.raises(ShapeMismatchError):
        evaluate_policy(embedded.transitions, StationaryPolicy.constant(100), DiscountedTask(np.zeros((3, 2))))


def test_improve_policy_with_zero_values(embedded):
    task = DiscountedTask.from_cmc(embedded, 0.99)
    policy = improve_policy(embedded.transitions, ValueFunction(np.zeros(100)), task)
    # 状态 0 上 g(0,1)=1 < g(0,0)=2，其余状态代价相同，取最小索引
    assert policy[0] == 1
    assert set(policy.choice[1:]) == {0}


def test_improve_policy_keeps_optimal_policy(embedded):
    task = DiscountedTask.from_cmc(embedded, 0.99)
    policy = StationaryPolicy.constant(100, 0)
    J = evaluate_policy(embedded.transitions, policy, task)
    assert improve_policy(embedded.transitions, J, task) == policy


def test_improve_policy_ties_to_lowest_index():
    p = np.tile(np.eye(2), (3, 1, 1))
    task = DiscountedTask(np.ones((2, 3)), 0.5)
    assert improve_policy(p, ValueFunction([1.0, 1.0]), task).choice == (0, 0)


def test_policy_iteration_single_control():
    p = np.array([[[0.5, 0.5], [0.2, 0.8]]])
    task = DiscountedTask(np.array([[1.0], [2.0]]), 0.9)
    trace = []
    policy, J = policy_iteration(p, task, trace=trace)
    assert policy.choice == (0, 0)
    assert len(trace) == 1
    assert J.sup_distance(evaluate_policy(p, policy, task)) == 0.0


def test_policy_iteration_on_true_embedded_chain(embedded):
    task = DiscountedTask.from_cmc(embedded, 0.99)
    policy, J = policy_iteration(embedded.transitions, task)
    assert policy[0] == 0
    assert J[0] == pytest.approx(2.0, abs=1e-9)
    assert bellman_residual(embedded.transitions, task, J) < 1e-8


def test_policy_iteration_value_is_monotone():
    rng = np.random.default_rng(1)
    for _ in range(20):
        p, task = random_task(rng)
        trace = []
        policy_iteration(p, task, trace=trace)
        for before, after in zip(trace, trace[1:]):
            assert np.all(after.values <= before.values + 1e-9)


def test_policy_iteration_agrees_with_value_iteration():
    rng = np.random.default_rng(2)
    for _ in range(100):
        p, task = random_task(rng)
        _, J = policy_iteration(p, task)
        oracle = value_iteration_oracle(p, task, 1e-9)
        assert J.sup_distance(oracle) < 1e-6
        assert bellman_residual(p, task, J) < 1e-8


def test_value_iteration_oracle(embedded):
    assert np.all(value_iteration_oracle(build_two_state(0.0).transitions,
                                         DiscountedTask(np.zeros((2, 2)), 0.9)).values == 0.0)
    J = value_iteration_oracle(embedded.transitions, DiscountedTask.from_cmc(embedded, 0.99), 1e-9)
    assert J[0] == pytest.approx(2.0, abs=1e-6)
    with pytest.raises(ValidationError):
        value_iteration_oracle(embedded.transitions, DiscountedTask.from_cmc(embedded), 0.0)


def test_value_iteration_oracle_zero_discount():
    p = np.tile(np.eye(2), (2, 1, 1))
    task = DiscountedTask(np.array([[3.0, 1.0], [0.5, 2.0]]), 0.0)
    assert value_iteration_oracle(p, task).values.tolist() == [1.0, 0.5]


def test_evaluate_learned_model_with_exhaustive_counts(embedded):
    counts = np.round(embedded.transitions * 10000).astype(np.int64)
    policy, J = evaluate_learned_model(embedded, CountTensor(counts), DirichletPrior())
    truth, _ = policy_iteration(embedded.transitions, DiscountedTask.from_cmc(embedded))
    assert policy == truth
    assert J[0] == pytest.approx(2.0, abs=1e-9)


def test_evaluate_learned_model_from_unexplored_stay_row(embedded):
    """状态 0 只离开过一次、从未尝试留下时，学到的模型偏向留下，真实代价为 100。"""
    F = increment(CountTensor.for_cmc(embedded), 0, 0, 1)
    for _ in range(10):
        F = increment(F, 0, 1, 1)
    for _ in range(9):
        F = increment(F, 1, 1, 1)
    policy, J = evaluate_learned_model(embedded, F, DirichletPrior())
    assert policy[0] == 1
    assert J[0] == pytest.approx(100.0, abs=1e-9)


def test_evaluate_learned_model_is_never_better_than_truth(embedded):
    task = DiscountedTask.from_cmc(embedded)
    _, optimal = policy_iteration(embedded.transitions, task)
    rng = np.random.default_rng(3)
    for _ in range(10):
        counts = rng.integers(0, 3, size=(2, 100, 100)) * (embedded.transitions > 0)
        _, J = evaluate_learned_model(embedded, CountTensor(counts), DirichletPrior(), task)
        assert np.all(J.values >= optimal.values - 1e-9)


def test_evaluate_policy_logs_large_residual(mocker, caplog, embedded):
    mocker.patch("pycmc.control.constants.RESIDUAL_TOLERANCE", -1.0)
    with caplog.at_level(logging.WARNING, logger="pycmc.control"):
        evaluate_policy(embedded.transitions, StationaryPolicy.constant(100), DiscountedTask.from_cmc(embedded))
    assert "残差" in caplog.text
