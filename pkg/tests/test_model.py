import math

import numpy as np
import pytest

from cvaropt.model import (
    Dataset,
    Iterate,
    LossModel,
    Sample,
    loss_subgradient,
    loss_value,
    loss_values,
    row_norms_sq,
    subgradient_scales,
)
from cvaropt.rng import Stream

ALL_LOSSES = [LossModel.SQUARED, LossModel.ABSOLUTE, LossModel.LOGISTIC]


def _random_sample(stream, d, classification):
    x = stream.normal(d)
    y = 1.0 if stream.uniform(1)[0] < 0.5 else -1.0
    if not classification:
        y = float(stream.normal(1)[0] * 2.0)
    return Sample(values=x, target=y)


def finite_difference_gradient(model, theta, z, h=1e-6):
    """Central differences on the loss value; independent of the subgradient code."""
    g = np.zeros_like(theta)
    for j in range(theta.shape[0]):
        up = theta.copy()
        dn = theta.copy()
        up[j] += h
        dn[j] -= h
        g[j] = (loss_value(model, up, z) - loss_value(model, dn, z)) / (2 * h)
    return g


def test_squared_value_and_subgradient_example():
    z = Sample(values=np.array([1.0, 0.0]), target=2.0)
    assert loss_value(LossModel.SQUARED, np.zeros(2), z) == 2.0
    assert np.array_equal(loss_subgradient(LossModel.SQUARED, np.zeros(2), z), [-2.0, 0.0])


def test_logistic_value_at_zero_margin():
    z = Sample(values=np.array([1.0]), target=1.0)
    assert loss_value(LossModel.LOGISTIC, np.zeros(1), z) == pytest.approx(math.log(2), abs=1e-12)


def test_absolute_value_example_and_kink_convention():
    z = Sample(values=np.array([2.0, -1.0]), target=3.0)
    assert loss_value(LossModel.ABSOLUTE, np.array([1.0, 1.0]), z) == 2.0
    at_kink = Sample(values=np.array([2.0, -1.0]), target=1.0)  # x.theta == y
    g = loss_subgradient(LossModel.ABSOLUTE, np.array([1.0, 1.0]), at_kink)
    assert np.array_equal(g, np.zeros(2))


def test_logistic_is_stable_at_huge_margins():
    z = Sample(values=np.array([1.0]), target=1.0)
    assert loss_value(LossModel.LOGISTIC, np.array([1000.0]), z) == 0.0
    v = loss_value(LossModel.LOGISTIC, np.array([-1000.0]), z)
    assert math.isfinite(v) and v == pytest.approx(1000.0, rel=1e-12)
    g = loss_subgradient(LossModel.LOGISTIC, np.array([-1000.0]), z)
    assert np.isfinite(g).all()


@pytest.mark.parametrize("model", [LossModel.SQUARED, LossModel.LOGISTIC])
def test_smooth_gradients_match_finite_differences(model):
    stream = Stream(101)
    for _ in range(200):
        d = 1 + int(stream.integers(1, 6)[0])
        z = _random_sample(stream, d, model is LossModel.LOGISTIC)
        theta = stream.normal(d)
        if model is LossModel.SQUARED and abs(z.dot(theta) - z.target) < 1e-3:
            continue  # avoid vanishing gradients where relative error is meaningless
        g = loss_subgradient(model, theta, z)
        fd = finite_difference_gradient(model, theta, z)
        denom = max(np.linalg.norm(fd), 1e-8)
        assert np.linalg.norm(g - fd) / denom < 1e-5


@pytest.mark.parametrize("model", ALL_LOSSES)
def test_subgradient_inequality(model):
    # ell(theta') >= ell(theta) + <g, theta' - theta> - 1e-10
    stream = Stream(202)
    for _ in range(300):
        d = 1 + int(stream.integers(1, 5)[0])
        z = _random_sample(stream, d, model is LossModel.LOGISTIC)
        theta = stream.normal(d) * 2
        other = stream.normal(d) * 2
        g = loss_subgradient(model, theta, z)
        lhs = loss_value(model, other, z)
        rhs = loss_value(model, theta, z) + float(g @ (other - theta))
        assert lhs >= rhs - 1e-10


@pytest.mark.parametrize("model", ALL_LOSSES)
def test_convexity_certificate(model):
    stream = Stream(303)
    for _ in range(300):
        d = 1 + int(stream.integers(1, 5)[0])
        z = _random_sample(stream, d, model is LossModel.LOGISTIC)
        t1, t2 = stream.normal(d) * 2, stream.normal(d) * 2
        t = float(stream.uniform(1)[0])
        mid = loss_value(model, t * t1 + (1 - t) * t2, z)
        chord = t * loss_value(model, t1, z) + (1 - t) * loss_value(model, t2, z)
        assert mid <= chord + 1e-12


@pytest.mark.parametrize("model", ALL_LOSSES)
def test_values_are_nonnegative(model):
    stream = Stream(404)
    for _ in range(100):
        z = _random_sample(stream, 4, model is LossModel.LOGISTIC)
        assert loss_value(model, stream.normal(4) * 3, z) >= 0.0


def test_dimension_mismatch_raises():
    z = Sample(values=np.array([1.0, 2.0]), target=0.0)
    with pytest.raises(ValueError, match="dimension"):
        loss_value(LossModel.SQUARED, np.zeros(3), z)
    sp = Sample(values=np.array([1.0]), target=0.0, indices=np.array([5]))
    with pytest.raises(ValueError, match="dimension"):
        loss_value(LossModel.SQUARED, np.zeros(3), sp)


def test_non_finite_inputs_raise():
    z = Sample(values=np.array([1.0]), target=0.0)
    with pytest.raises(ValueError):
        loss_value(LossModel.SQUARED, np.array([np.nan]), z)
    with pytest.raises(ValueError):
        Sample(values=np.array([np.inf]), target=0.0)
    with pytest.raises(ValueError):
        Iterate(theta=np.array([1.0, np.nan]), alpha=0.0)
    with pytest.raises(ValueError):
        Iterate(theta=np.ones(2), alpha=math.inf)


def test_sparse_sample_matches_densified():
    sp = Sample(values=np.array([0.5, -2.0]), target=1.0, indices=np.array([1, 3]))
    theta = np.array([1.0, 2.0, 3.0, 4.0])
    dense = Sample(values=sp.to_dense(4), target=1.0)
    for model in ALL_LOSSES:
        assert loss_value(model, theta, sp) == loss_value(model, theta, dense)
        assert np.array_equal(
            loss_subgradient(model, theta, sp), loss_subgradient(model, theta, dense)
        )


def test_sparse_indices_must_increase():
    with pytest.raises(ValueError, match="strictly increasing"):
        Sample(values=np.array([1.0, 2.0]), target=0.0, indices=np.array([3, 1]))


def test_batch_helpers_match_per_sample():
    stream = Stream(505)
    X = stream.normal(20).reshape(5, 4)
    y = stream.normal(5)
    data = Dataset.dense(X, y)
    theta = stream.normal(4)
    for model in [LossModel.SQUARED, LossModel.ABSOLUTE]:
        vals = loss_values(model, theta, data)
        scales = subgradient_scales(model, theta, data)
        for i in range(5):
            z = data.sample(i)
            assert vals[i] == pytest.approx(loss_value(model, theta, z), abs=1e-15)
            g = loss_subgradient(model, theta, z)
            assert np.allclose(scales[i] * X[i], g, atol=1e-15)
    assert np.allclose(row_norms_sq(data), (X * X).sum(axis=1))


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset.dense(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        Dataset.dense(np.zeros((2, 2)), np.zeros(3))
    with pytest.raises(ValueError):
        Dataset.dense(np.array([[np.nan, 0.0]]), np.zeros(1))
    d = Dataset.dense(np.ones((2, 2)), np.array([1.0, -1.0]))
    d.require_binary_labels()
    bad = Dataset.dense(np.ones((2, 2)), np.array([1.0, 0.5]))
    with pytest.raises(ValueError, match="-1 or \\+1"):
        bad.require_binary_labels()
