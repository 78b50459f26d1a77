import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from terradeep.datasets import SensorFrame
from terradeep.errors import DatasetError, OutlierError, ParameterError
from terradeep.signal_features import (SLIP_CLASS_NAMES, SlipClass, assemble_slip_dataset,
                                       discretize_slip, sliding_variance, slip_windows,
                                       torque_feature)

import oracles


def frames(n, slip=10.0, seed=0, const_imu=False):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        imu = (0.5, -0.2, 9.8) if const_imu else tuple(rng.standard_normal(3))
        out.append(SensorFrame(i * 0.01, float(rng.normal(3, 1)), *imu, slip))
    return out


def test_sliding_variance_examples():
    assert np.all(sliding_variance(np.full(20, 4.2), 5) == 0)
    assert sliding_variance([1, 2, 3], 3)[2] == pytest.approx(2 / 3)
    assert sliding_variance([0, 0, 3, 3], 2).tolist() == [0, 0, 2.25, 0]
    with pytest.raises(ParameterError):
        sliding_variance([1.0, 2.0], 0)
    with pytest.raises(ParameterError):
        sliding_variance([], 3)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=60), st.integers(1, 12))
def test_sliding_variance_matches_two_pass_oracle(series, n_w):
    got = sliding_variance(series, n_w)
    ref = oracles.causal_variance(series, n_w)
    assert np.allclose(got, ref, rtol=1e-9, atol=1e-6)
    assert np.all(got >= 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=40), st.integers(1, 8),
       st.floats(0.1, 10), st.floats(-100, 100))
def test_sliding_variance_scale_and_shift(series, n_w, c, shift):
    base = sliding_variance(series, n_w)
    scaled = sliding_variance(np.array(series) * c, n_w)
    assert np.allclose(scaled, base * c * c, rtol=1e-9, atol=1e-9)
    shifted = sliding_variance(np.array(series) + shift, n_w)
    assert np.allclose(shifted, base, atol=1e-9)


def test_torque_feature():
    assert torque_feature(0.0) == 0.0
    assert torque_feature(-3.2) == 3.2
    assert torque_feature(7.5) == 7.5


def test_discretize_slip_boundaries():
    assert discretize_slip(30) == SlipClass.LOW
    assert discretize_slip(60) == SlipClass.MODERATE
    assert discretize_slip(60.0001) == SlipClass.HIGH
    assert discretize_slip(0) == SlipClass.LOW and discretize_slip(100) == SlipClass.HIGH
    for bad in (101, -0.5):
        with pytest.raises(OutlierError):
            discretize_slip(bad)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 100), st.floats(0, 100))
def test_discretize_slip_monotone(a, b):
    lo, hi = sorted((a, b))
    assert discretize_slip(lo) <= discretize_slip(hi)


def test_assemble_raw_and_filtered():
    fr = frames(10)
    raw = assemble_slip_dataset(fr, "raw")
    assert raw.features.shape == (10, 4)
    assert raw.features[3].tolist() == [fr[3].torque, fr[3].acc_x, fr[3].pitch, fr[3].acc_z]
    flat = assemble_slip_dataset(frames(10, const_imu=True), "filtered", 4)
    assert np.all(flat.features[:, 1:] == 0)
    assert np.all(raw.labels == SlipClass.LOW)
    assert raw.class_names == SLIP_CLASS_NAMES
    with pytest.raises(DatasetError):
        assemble_slip_dataset([], "raw")


def test_filtered_rows_match_direct_window_oracle():
    fr = frames(80, seed=3)
    n_w = 7
    ds = assemble_slip_dataset(fr, "filtered", n_w)
    ax = [f.acc_x for f in fr]
    pitch = [f.pitch for f in fr]
    az = [f.acc_z for f in fr]
    for i in range(len(fr)):
        lo = max(0, i - n_w + 1)
        expect = [abs(fr[i].torque), oracles.population_variance(ax[lo:i + 1]),
                  oracles.population_variance(pitch[lo:i + 1]),
                  oracles.population_variance(az[lo:i + 1])]
        assert np.allclose(ds.features[i], expect, rtol=1e-9, atol=1e-12)


def test_slip_windows_shape_and_labels():
    fr = frames(100, seed=1)
    fr = [SensorFrame(f.t, f.torque, f.acc_x, f.pitch, f.acc_z, 80.0 if i % 2 else 10.0)
          for i, f in enumerate(fr)]
    ds = slip_windows(fr, "raw", length=64, stride=4)
    ends = np.arange(63, 100, 4)
    assert ds.features.shape == (len(ends), 4, 64)
    assert ds.labels.tolist() == [2 if e % 2 else 0 for e in ends]
    assert ds.features[0, 0, -1] == fr[63].torque
    with pytest.raises(DatasetError):
        slip_windows(fr[:10], "raw", length=64)
