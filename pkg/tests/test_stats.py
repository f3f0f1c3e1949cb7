import json
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from coherent_collapse import stats


def rec(t, **series):
    return SimpleNamespace(times=np.asarray(t, float), series={k: np.asarray(v) for k, v in series.items()})


def test_stack_series_checks_grid_and_names():
    t = [0, 1, 2]
    rows = stats.stack_series([rec(t, x=[1, 2, 3]), rec(t, x=[3, 2, 1])], "x")
    assert rows.shape == (2, 3)
    with pytest.raises(stats.MissingSeriesError):
        stats.stack_series([rec(t, x=[1, 2, 3])], "y")
    with pytest.raises(ValueError):
        stats.stack_series([rec(t, x=[1, 2, 3]), rec([0, 1, 3], x=[1, 2, 3])], "x")
    with pytest.raises(ValueError):
        stats.stack_series([], "x")


def test_single_path_has_no_standard_error():
    mean, se = stats.mean_and_se(np.array([[1.0, 2.0]]))
    np.testing.assert_array_equal(mean, [1, 2])
    assert np.all(np.isnan(se))


def test_identical_paths_have_zero_error():
    _, se = stats.mean_and_se(np.ones((5, 4)))
    np.testing.assert_array_equal(se, 0)


def test_cumulative_integral_of_polynomial():
    t = np.linspace(0, 2, 201)
    trap, err = stats.cumulative_integral(t ** 2, t)
    assert trap[-1] == pytest.approx(8 / 3, abs=1e-4)
    # the Simpson gap estimates the trapezoid error itself
    assert err[-1] == pytest.approx(abs(trap[-1] - 8 / 3), rel=1e-6)


def test_checkpoints_exclude_origin_and_reach_the_end():
    idx = stats.checkpoint_indices(101, 8)
    assert idx[0] > 0 and idx[-1] == 100 and len(idx) == 8
    assert list(stats.checkpoint_indices(3, 8)) == [1, 2]


def test_zero_mean_check_verdicts():
    rng = np.random.default_rng(1)
    t = np.linspace(0, 1, 11)
    noise = rng.normal(size=(400, 11))
    assert stats.zero_mean_check("z", noise, t).passed
    bad = stats.zero_mean_check("z", noise + 1.0, t)
    assert bad.verdict == stats.FAIL and bad.max_deviation_se > 3
    single = stats.zero_mean_check("z", noise[:1], t)
    assert single.verdict == stats.INCONCLUSIVE


def test_tolerance_floor_absorbs_deterministic_offset():
    t = np.linspace(0, 1, 11)
    r = np.full((3, 11), 1e-9)
    assert not stats.zero_mean_check("z", r, t).passed
    assert stats.zero_mean_check("z", r, t, atol=2e-9).passed


def test_report_serializes_and_prints_scalars_only():
    rep = stats.AuditReport("a", stats.PASS, 0.5,
                            {"x": np.arange(3), "k": 2, "c": 1 + 2j, "nan": math.nan})
    data = json.loads(rep.to_json())
    assert data["details"]["x"] == [0, 1, 2]
    assert data["details"]["c"] == {"re": 1.0, "im": 2.0}
    assert data["details"]["nan"] is None
    text = rep.text()
    assert "PASS" in text and "k: 2" in text and "x:" not in text


@given(arrays(float, (6, 5), elements=st.floats(-1e3, 1e3)))
def test_standard_error_is_nonnegative_and_scales(values):
    mean, se = stats.mean_and_se(values)
    assert np.all(se >= 0)
    m2, se2 = stats.mean_and_se(2 * values)
    np.testing.assert_allclose(m2, 2 * mean, atol=1e-9)
    np.testing.assert_allclose(se2, 2 * se, atol=1e-9)


def test_critical_value_tends_to_normal_cut():
    assert stats.critical_value(3.0, 3) > 15
    assert stats.critical_value(3.0, 100_000) == pytest.approx(3.0, abs=1e-3)
    assert math.isnan(stats.critical_value(3.0, 1))
