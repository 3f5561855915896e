import numpy as np
import pytest

from metasep.linalg import SpikedIdentity
from metasep.rng import SeedSpec
from metasep.tasks import (Dataset, MetaInstance, Task, emp_covariance,
                           emp_loss_linear, pop_loss_linear, pop_loss_twolayer,
                           sample_dataset, sample_task)
from metasep.twolayer import ScalarPair, gd_pop_fixed_point


def test_from_config_e1():
    inst = MetaInstance.from_config(4, 2.0, 0.5)
    assert np.allclose(inst.w_star, [2.0, 0.0, 0.0, 0.0])
    assert inst.r == 2.0 and inst.d == 4


def test_from_config_explicit_rescaled():
    inst = MetaInstance.from_config(2, 3.0, 0.0, w_star=[1.0, 1.0])
    assert np.isclose(np.linalg.norm(inst.w_star), 3.0)


def test_from_config_validation():
    with pytest.raises(ValueError):
        MetaInstance.from_config(2, 1.0, 0.0, w_star=[0.0, 0.0])
    with pytest.raises(ValueError):
        MetaInstance.from_config(2, 1.0, -1.0)
    with pytest.raises(ValueError):
        MetaInstance.from_config(3, 1.0, 0.0, w_star="e2")


def test_sample_task_deterministic_and_referencing():
    inst = MetaInstance.from_config(3, 1.0, 1.0)
    t1 = sample_task(inst, SeedSpec(5))
    t2 = sample_task(inst, SeedSpec(5))
    assert t1.sign == t2.sign
    assert t1.instance is inst
    assert np.allclose(t1.target, t1.sign * inst.w_star)


def test_sample_task_sign_balance():
    inst = MetaInstance.from_config(2, 1.0, 0.0)
    signs = [sample_task(inst, SeedSpec(77).child(i)).sign for i in range(10 ** 4)]
    frac = np.mean(np.array(signs) == 1)
    assert abs(frac - 0.5) < 0.02


def test_dataset_label_consistency_noiseless():
    inst = MetaInstance.from_config(5, 1.3, 0.0)
    task = sample_task(inst, SeedSpec(8))
    ds = sample_dataset(task, 12, SeedSpec(9))
    assert np.allclose(ds.y, ds.x @ task.target)
    assert np.all(ds.noise == 0.0)


def test_dataset_hand_example():
    # one sample, d=1: y = x * (s w*) + noise
    inst = MetaInstance(np.array([2.0]), 1.0)
    task = Task(inst, -1)
    ds = Dataset(x=np.array([[0.5]]), noise=np.array([0.1]),
                 y=np.array([[0.5]]) @ (-1 * inst.w_star) + 0.1)
    assert np.isclose(ds.y[0], -0.9)


def test_dataset_covariance_lln():
    inst = MetaInstance.from_config(4, 1.0, 1.0)
    task = sample_task(inst, SeedSpec(11))
    ds = sample_dataset(task, 10 ** 5, SeedSpec(12))
    assert np.max(np.abs(emp_covariance(ds) - np.eye(4))) < 0.02


def test_pop_loss_linear_cases():
    inst = MetaInstance.from_config(3, 1.0, 1.0)
    task = sample_task(inst, SeedSpec(1))
    assert np.isclose(pop_loss_linear(task.target, task), 1.0)  # sigma^2 floor
    assert np.isclose(pop_loss_linear(np.zeros(3), task), 2.0)
    noiseless = Task(MetaInstance.from_config(3, 1.0, 0.0), 1)
    assert np.isclose(pop_loss_linear(-noiseless.target, noiseless), 4.0)


def test_pop_loss_nonnegative_excess():
    inst = MetaInstance.from_config(4, 1.5, 0.7)
    task = Task(inst, -1)
    for k in range(20):
        w = np.sin(np.arange(4) + k)
        assert pop_loss_linear(w, task) - inst.sigma ** 2 >= 0.0


def test_pop_loss_twolayer_reductions():
    inst = MetaInstance.from_config(4, 1.0, 0.5)
    task = Task(inst, 1)
    w = np.array([0.3, -0.2, 0.0, 1.0])
    assert np.isclose(pop_loss_twolayer(np.eye(4), w, task),
                      pop_loss_linear(w, task))
    # at the two-layer minimizer the loss is the noise floor
    fp = gd_pop_fixed_point(ScalarPair(0.5, 0.2), 0.1, 1.0, 1)
    spiked = SpikedIdentity(inst.w_star, fp.a, 0.1)
    assert np.isclose(pop_loss_twolayer(spiked, fp.b * inst.w_star, task),
                      inst.sigma ** 2)


def test_emp_loss_matches_naive_loop():
    inst = MetaInstance.from_config(3, 1.0, 0.8)
    task = sample_task(inst, SeedSpec(21))
    ds = sample_dataset(task, 9, SeedSpec(22))
    w = np.array([0.1, -0.4, 0.9])
    naive = sum((w @ ds.x[i] - ds.y[i]) ** 2 for i in range(ds.n)) / ds.n
    assert abs(emp_loss_linear(w, ds) - naive) < 1e-12
    assert np.isclose(emp_loss_linear(np.zeros(3), ds), np.sum(ds.y ** 2) / ds.n)


def test_emp_loss_interpolation():
    ds = Dataset(x=np.array([[2.0, 0.0]]), noise=np.zeros(1), y=np.array([4.0]))
    assert emp_loss_linear(np.array([2.0, 5.0]), ds) == 0.0


def test_emp_converges_to_pop():
    inst = MetaInstance.from_config(3, 1.0, 1.0)
    w = np.array([0.5, 0.0, -0.5])
    gaps = []
    for k in range(60):
        task = sample_task(inst, SeedSpec(500).child(k, 0))
        ds = sample_dataset(task, 10 ** 4, SeedSpec(500).child(k, 1))
        gaps.append(emp_loss_linear(w, ds) - pop_loss_linear(w, task))
    gaps = np.array(gaps)
    stderr = gaps.std(ddof=1) / np.sqrt(len(gaps))
    assert abs(gaps.mean()) <= 5 * stderr


def test_sample_dataset_validation():
    inst = MetaInstance.from_config(2, 1.0, 0.0)
    with pytest.raises(ValueError):
        sample_dataset(Task(inst, 1), 0, SeedSpec(1))
