import io
import math

import numpy as np
import pytest

from cvaropt.data import (
    LibsvmParseError,
    NoiseKind,
    NoiseSpec,
    SparseDataset,
    SyntheticSpec,
    Task,
    from_dataset,
    generate_synthetic,
    gumbel_icdf,
    maxabs_scale,
    parse_libsvm,
    synthetic_problem,
    to_dataset,
    write_libsvm,
)
from cvaropt.model import LossModel
from cvaropt.rng import Stream


def spec(task=Task.SQUARED_REGRESSION, noise=NoiseKind.NORMAL, d=10, n=200, seed=0):
    return SyntheticSpec(task=task, noise=NoiseSpec.default(noise), d=d, n=n, seed=seed)


# ------------------------------------------------------------------- synthetic


def test_features_lie_on_unit_sphere():
    data = generate_synthetic(spec(n=500))
    norms = np.linalg.norm(data.X, axis=1)
    assert np.abs(norms - 1.0).max() < 1e-12


def test_gumbel_icdf_identity():
    assert gumbel_icdf(1.0 / math.e, mu=0.0, scale=4.0) == pytest.approx(0.0, abs=1e-12)
    assert gumbel_icdf(1.0 / math.e, mu=3.0, scale=7.0) == pytest.approx(3.0, abs=1e-12)


def test_normal_noise_moments():
    # recover the noise from y - X theta_gen and check Normal(0, 2) moments
    s = spec(n=100_000, d=4, seed=0)
    data, theta_gen = synthetic_problem(s)
    noise = data.y - data.X @ theta_gen
    assert abs(noise.mean()) < 0.05
    assert abs(noise.std() - 2.0) < 0.05


def test_lognormal_and_gumbel_noise_shapes():
    s1 = spec(noise=NoiseKind.LOGNORMAL, n=50_000)
    data1, tg1 = synthetic_problem(s1)
    noise1 = data1.y - data1.X @ tg1
    assert (noise1 > 0).all()  # lognormal support
    # median of LogNormal(2, 1) is e^2
    assert abs(np.median(noise1) - math.e**2) < 0.2

    s2 = spec(noise=NoiseKind.GUMBEL, n=50_000)
    data2, tg2 = synthetic_problem(s2)
    noise2 = data2.y - data2.X @ tg2
    # Gumbel(0, 4): median = -4 ln ln 2, mean = 4 * euler-mascheroni
    assert abs(np.median(noise2) + 4.0 * math.log(math.log(2.0))) < 0.15
    assert abs(noise2.mean() - 4.0 * 0.5772156649) < 0.15


def test_classification_labels_and_separability_box():
    s = spec(task=Task.LOGISTIC_CLASSIFICATION, n=5000, seed=3)
    data, theta_gen = synthetic_problem(s)
    assert set(np.unique(data.y)) <= {-1.0, 1.0}
    assert (theta_gen >= 0).all() and (theta_gen <= 10.0).all()
    assert theta_gen.max() > 1.0  # classification uses the wider box
    assert s.loss is LossModel.LOGISTIC
    # labels correlate with the generating margin
    margins = data.X @ theta_gen
    agree = np.mean(np.sign(margins) == data.y)
    assert agree > 0.6


def test_regression_theta_gen_box():
    _, theta_gen = synthetic_problem(spec(seed=5))
    assert (theta_gen >= 0).all() and (theta_gen <= 1.0).all()


def test_generation_is_deterministic_per_seed():
    a = generate_synthetic(spec(seed=4))
    b = generate_synthetic(spec(seed=4))
    c = generate_synthetic(spec(seed=6))
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.X, c.X)


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(task=Task.SQUARED_REGRESSION, noise=NoiseSpec.default(NoiseKind.NORMAL), d=0, n=5, seed=0)


# ---------------------------------------------------------------- libsvm parse


def test_parse_basic_line():
    sp = parse_libsvm(["1 1:0.5 3:-2"])
    assert sp.labels == [1.0]
    assert sp.rows == [[(0, 0.5), (2, -2.0)]]
    assert sp.d == 3


def test_parse_comments_blanks_and_scientific_notation():
    text = """# header comment

1.5 2:1e-3 7:-2.5E+2   # trailing comment
-1 1:0.25
"""
    sp = parse_libsvm(io.StringIO(text))
    assert sp.labels == [1.5, -1.0]
    assert sp.rows[0] == [(1, 1e-3), (6, -250.0)]
    assert sp.d == 7


def test_parse_empty_input_and_dataset_rejection():
    sp = parse_libsvm([])
    assert sp.rows == [] and sp.labels == [] and sp.d == 0
    with pytest.raises(ValueError, match="empty"):
        to_dataset(sp)


@pytest.mark.parametrize(
    "line,match",
    [
        ("1 3:1 2:5", "strictly increasing"),
        ("1 3:1 3:5", "strictly increasing"),
        ("1 0:1", ">= 1"),
        ("1 -2:1", ">= 1"),
        ("abc 1:1", "label"),
        ("1 x:1", "index"),
        ("1 2:zz", "value"),
        ("1 2:", "malformed"),
        ("1 :4", "malformed"),
        ("1 24", "malformed"),
        ("nan 1:1", "label"),
        ("1 2:inf", "value"),
    ],
)
def test_parse_errors_carry_line_numbers(line, match):
    with pytest.raises(LibsvmParseError, match=match) as exc:
        parse_libsvm(["# comment", "1 1:1", line])
    assert exc.value.line_no == 3
    assert "line 3" in str(exc.value)


def test_binary_label_mapping():
    zero_one = parse_libsvm(["0 1:1", "1 1:2"], binary_labels=True)
    assert zero_one.labels == [-1.0, 1.0]
    one_two = parse_libsvm(["2 1:1", "1 1:2"], binary_labels=True)
    assert one_two.labels == [1.0, -1.0]
    passthrough = parse_libsvm(["-1 1:1", "1 1:2"], binary_labels=True)
    assert passthrough.labels == [-1.0, 1.0]
    with pytest.raises(ValueError, match="cannot map"):
        parse_libsvm(["3 1:1", "1 1:2"], binary_labels=True)
    # regression labels pass through untouched without the flag
    regression = parse_libsvm(["0.37 1:1"])
    assert regression.labels == [0.37]


def test_round_trip_random_sparse_dataset():
    stream = Stream(55)
    rows = []
    labels = []
    for _ in range(60):
        nnz = int(stream.integers(1, 6)[0])
        idx = np.unique(stream.integers(nnz, 40))
        vals = stream.normal(len(idx)) * 10.0 ** (stream.uniform(1)[0] * 4 - 2)
        rows.append([(int(i), float(v)) for i, v in zip(idx, vals)])
        labels.append(float(stream.normal(1)[0]))
    sp = SparseDataset(rows=rows, labels=labels, d=40)
    buf = io.StringIO()
    write_libsvm(sp, buf)
    back = parse_libsvm(io.StringIO(buf.getvalue()))
    assert back.labels == sp.labels
    assert back.rows == sp.rows


def test_to_dataset_dense_and_sparse_agree():
    sp = parse_libsvm(["1 1:0.5 3:-2", "-1 2:4", "2.5 1:1 2:1 3:1"])
    dense = to_dataset(sp, dense=True)
    sparse_ds = to_dataset(sp, dense=False)
    assert not dense.is_sparse and sparse_ds.is_sparse
    assert np.array_equal(dense.X, sparse_ds.X.toarray())
    assert np.array_equal(dense.y, sparse_ds.y)


def test_from_dataset_inverts_to_dataset():
    sp = parse_libsvm(["1 1:0.5 3:-2", "-1 2:4"])
    for dense in (True, False):
        back = from_dataset(to_dataset(sp, dense=dense))
        assert back.rows == sp.rows and back.labels == sp.labels and back.d == sp.d


def test_large_sparse_indices_stay_sparse():
    sp = parse_libsvm(["1 100000:1.0", "-1 5:2.0"])
    data = to_dataset(sp)
    assert data.is_sparse and data.d == 100_000
    z = data.sample(0)
    assert z.indices is not None and z.indices[0] == 99_999


def test_maxabs_scale():
    sp = parse_libsvm(["1 1:2 2:-8", "2 1:-4"])
    for dense in (True, False):
        data = to_dataset(sp, dense=dense)
        scaled, scales = maxabs_scale(data)
        assert np.allclose(scales, [4.0, 8.0])
        X = scaled.X.toarray() if scaled.is_sparse else scaled.X
        assert np.abs(X).max() <= 1.0
