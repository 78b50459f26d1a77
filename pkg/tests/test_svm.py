import numpy as np
import pytest

from terradeep.errors import DatasetError, ParameterError
from terradeep.svm import (SvmConfig, kkt_audit, one_vs_one_predict, one_vs_one_train,
                           rbf_kernel, smo_train, svm_predict_binary)


def blobs(n=40, seed=0, sep=6.0):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(-sep / 2, 1.0, (n, 2)), rng.normal(sep / 2, 1.0, (n, 2))])
    y = np.r_[-np.ones(n), np.ones(n)].astype(int)
    return x, y


def test_config_validation():
    with pytest.raises(ParameterError):
        SvmConfig(C=0)
    with pytest.raises(ParameterError):
        SvmConfig(gamma=-1.0)
    assert SvmConfig().resolved_gamma(4) == 0.25


def test_rbf_kernel():
    assert rbf_kernel([1, 2], [1, 2], 0.5) == 1.0
    assert rbf_kernel([0, 0], [1, 1], 0.5) == pytest.approx(np.exp(-1.0))


def test_two_point_symmetric_problem():
    x = np.array([[-1.0], [1.0]])
    m = smo_train(x, [-1, 1], SvmConfig(gamma=0.5))
    assert abs(m.bias) < 1e-6
    assert abs(m.dual_coef[0]) == pytest.approx(abs(m.dual_coef[1]))
    assert abs(m.decision([0.0])) < 1e-6
    assert svm_predict_binary(m, [0.0 + 0.0]) == 1 if m.decision([0.0]) >= 0 else -1
    assert m.decision([0.5]) > 0 and m.decision([-0.5]) < 0


def test_separable_blobs_reach_full_training_accuracy():
    for seed in range(5):
        x, y = blobs(seed=seed)
        m = smo_train(x, y)
        assert m.converged
        assert np.all(svm_predict_binary(m, x) == y)
        assert kkt_audit(m, x, y)


def test_box_and_equality_constraints():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((80, 3))
    y = np.where(x[:, 0] + 0.5 * rng.standard_normal(80) > 0, 1, -1)
    cfg = SvmConfig(C=0.5)
    m = smo_train(x, y, cfg)
    alpha = np.abs(m.dual_coef)
    assert np.all(alpha > 0) and np.all(alpha <= cfg.C + 1e-12)
    assert abs(m.dual_coef.sum()) <= cfg.tol
    assert kkt_audit(m, x, y, 1e-3)


def test_bias_shift_moves_decision_linearly():
    x, y = blobs()
    m = smo_train(x, y)
    f = m.decision(x[:5])
    m.bias += 0.25
    assert np.allclose(m.decision(x[:5]), f + 0.25)


def test_sample_order_permutation_invariance():
    x, y = blobs(n=15, seed=2)
    m1 = smo_train(x, y, SvmConfig(tol=1e-6))
    perm = np.random.default_rng(0).permutation(len(y))
    m2 = smo_train(x[perm], y[perm], SvmConfig(tol=1e-6))
    grid = np.random.default_rng(1).uniform(-5, 5, (50, 2))
    # same dual optimum up to solver tolerance
    assert np.max(np.abs(m1.decision(grid) - m2.decision(grid))) < 1e-3


def test_binary_errors():
    with pytest.raises(DatasetError):
        smo_train(np.zeros((3, 2)), [1, 1, 1])
    with pytest.raises(DatasetError):
        smo_train(np.zeros((2, 2)), [0, 1])


def test_one_vs_one_machine_counts_and_audit():
    rng = np.random.default_rng(0)
    centers = rng.uniform(-10, 10, (3, 2))
    y = np.repeat(np.arange(3), 20)
    x = centers[y] + 0.5 * rng.standard_normal((60, 2))
    m = one_vs_one_train(x, y)
    assert len(m.machines) == 3
    assert np.mean(one_vs_one_predict(m, x) == y) == 1.0
    for (a, b), mach in zip(m.pairs, m.machines):
        mask = (y == a) | (y == b)
        assert kkt_audit(mach, x[mask], np.where(y[mask] == b, 1, -1))


def test_eleven_classes_give_55_machines():
    rng = np.random.default_rng(1)
    y = np.repeat(np.arange(11), 3)
    x = y[:, None] * 5.0 + rng.standard_normal((33, 2)) * 0.1
    assert len(one_vs_one_train(x, y).machines) == 55


def test_k2_matches_binary_machine():
    x, yb = blobs(seed=3, sep=2.0)
    y = (yb > 0).astype(int)
    multi = one_vs_one_train(x, y)
    binary = smo_train(x, yb)
    grid = np.random.default_rng(2).uniform(-4, 4, (200, 2))
    assert np.array_equal(multi.predict(grid), (svm_predict_binary(binary, grid) > 0).astype(int))


def test_vote_invariance_under_positive_scaling():
    rng = np.random.default_rng(5)
    y = np.repeat(np.arange(4), 10)
    x = rng.standard_normal((40, 3)) + y[:, None]
    m = one_vs_one_train(x, y)
    grid = rng.standard_normal((100, 3)) * 2
    before = m.predict(grid)
    for mach in m.machines:
        mach.dual_coef = mach.dual_coef * 3.7
        mach.bias *= 3.7
    assert np.array_equal(m.predict(grid), before)


def test_missing_class_rejected():
    with pytest.raises(DatasetError):
        one_vs_one_train(np.zeros((4, 2)), [0, 0, 2, 2], n_classes=3)
