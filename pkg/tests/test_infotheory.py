import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from infoscene.config import WindowConfig
from infoscene.errors import EmptyInput, LengthMismatch, NonFiniteSample, SeriesTooShort, SignalTooShort
from infoscene.infotheory import (
    ScalarSeries,
    build_histogram,
    entropy_series,
    joint_entropy,
    mi_3d,
    mi_series,
    mutual_information,
    series_derivative,
    series_to_csv,
    window_entropy,
)


# independent oracles: count with a dict, then sum p ln p in plain Python
def tally(samples, zeta):
    return Counter(math.floor(s / zeta) for s in samples)


def oracle_entropy(samples, zeta, eps=1.0):
    n = len(samples)
    return -eps * sum(c / n * math.log(c / n) for c in tally(samples, zeta).values())


def oracle_joint(x, y, zeta):
    n = len(x)
    c = Counter((math.floor(a / zeta), math.floor(b / zeta)) for a, b in zip(x, y))
    return -sum(v / n * math.log(v / n) for v in c.values())


samples = st.lists(st.floats(-5, 5, allow_nan=False, allow_infinity=False), min_size=1, max_size=64)
zetas = st.sampled_from([0.01, 0.05, 0.1, 0.25, 1.0])


# --- histogram -------------------------------------------------------------

def test_constant_samples_one_bin():
    h = build_histogram([5.0] * 7, 0.01)
    assert len(h.counts) == 1 and list(h.counts.values()) == [7] and h.total == 7


def test_one_sample_per_bin():
    h = build_histogram([0.05, 0.15, 0.25, 0.35], 0.1)
    assert h.counts == {0: 1, 1: 1, 2: 1, 3: 1}
    assert h.bin_origin == 0.0


def test_histogram_matches_tally():
    x = np.random.default_rng(0).random(16)
    assert build_histogram(x, 0.1).counts == dict(tally(x, 0.1))


def test_histogram_errors():
    with pytest.raises(EmptyInput):
        build_histogram([], 0.1)
    with pytest.raises(NonFiniteSample):
        build_histogram([0.0, math.inf], 0.1)


@given(samples, zetas)
def test_histogram_totals(x, zeta):
    h = build_histogram(x, zeta)
    assert h.total == len(x) == sum(h.counts.values())
    assert all(c > 0 for c in h.counts.values())


# --- entropy ---------------------------------------------------------------

def test_constant_entropy_is_exactly_zero():
    assert window_entropy([0.123] * 20, 0.01) == 0.0


def test_uniform_over_four_bins():
    x = [0.05, 0.05, 0.15, 0.15, 0.25, 0.25, 0.35, 0.35]
    assert window_entropy(x, 0.1) == pytest.approx(math.log(4), abs=1e-12)


def test_entropy_matches_oracle():
    x = np.random.default_rng(1).random(32)
    assert abs(window_entropy(x, 0.05) - oracle_entropy(x, 0.05)) < 1e-12


def test_epsilon_gives_bits():
    x = [0.05, 0.15]
    assert window_entropy(x, 0.1, epsilon=1 / math.log(2)) == pytest.approx(1.0, abs=1e-12)


@given(samples, zetas, st.floats(0.1, 3))
def test_entropy_bounds_and_oracle(x, zeta, eps):
    h = window_entropy(x, zeta, eps)
    k = len(tally(x, zeta))
    assert -1e-12 <= h <= eps * math.log(k) + 1e-12
    assert abs(h - oracle_entropy(x, zeta, eps)) < 1e-12


@given(st.lists(st.integers(-300, 300), min_size=1, max_size=64), st.integers(-50, 50))
def test_grouping_invariance_under_bin_multiple_shifts(ticks, shift):
    # samples at bin centres so that the shift by an exact multiple of zeta is exact
    zeta = 0.25
    x = [(t + 0.5) * zeta for t in ticks]
    y = [v + shift * zeta for v in x]
    assert window_entropy(x, zeta) == window_entropy(y, zeta)


# --- joint entropy and MI --------------------------------------------------

def test_joint_entropy_degenerate_cases():
    x = np.random.default_rng(2).random(40)
    hx = window_entropy(x, 0.1)
    assert joint_entropy(x, np.full(40, 0.3), 0.1) == pytest.approx(hx, abs=1e-12)
    assert joint_entropy(x, x, 0.1) == pytest.approx(hx, abs=1e-12)


def test_joint_entropy_matches_2d_tally():
    rng = np.random.default_rng(3)
    x, y = rng.random(50), rng.random(50)
    assert abs(joint_entropy(x, y, 0.2) - oracle_joint(x, y, 0.2)) < 1e-12


def test_joint_entropy_errors():
    with pytest.raises(LengthMismatch):
        joint_entropy([1.0, 2.0], [1.0], 0.1)
    with pytest.raises(EmptyInput):
        joint_entropy([], [], 0.1)


def test_mi_product_distribution_is_zero():
    x, y = [0, 0, 1, 1], [0, 1, 0, 1]
    assert mutual_information(x, y, 1.0) == pytest.approx(0.0, abs=1e-15)


def test_mi_special_cases():
    x = np.random.default_rng(4).random(30)
    assert mutual_information(x, np.zeros(30), 0.1) == 0.0
    assert mutual_information(x, x, 0.1) == pytest.approx(window_entropy(x, 0.1), abs=1e-12)


@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2)), min_size=1, max_size=64), zetas)
def test_mi_properties(pairs, zeta):
    x = [a for a, _ in pairs]
    y = [b for _, b in pairs]
    mxy = mutual_information(x, y, zeta)
    assert mxy == mutual_information(y, x, zeta)  # bit-exact symmetry
    assert mxy >= -1e-12
    assert abs(mutual_information(x, x, zeta) - window_entropy(x, zeta)) < 1e-12
    assert mutual_information(x, [y[0]] * len(y), zeta) == 0.0
    hj = joint_entropy(x, y, zeta)
    hx, hy = window_entropy(x, zeta), window_entropy(y, zeta)
    assert max(hx, hy) - 1e-12 <= hj <= hx + hy + 1e-12
    assert abs(hj - oracle_joint(x, y, zeta)) < 1e-12


def test_extreme_ranges_still_injective():
    x = [1e17, -1e17, 0.0, 1e17]
    y = [1e17, 1e17, -1e17, 1e17]
    assert abs(joint_entropy(x, y, 0.01) - oracle_joint(x, y, 0.01)) < 1e-12


# --- series ----------------------------------------------------------------

def test_constant_signal_series():
    s = entropy_series(np.full(100, 0.5), WindowConfig(phi=20))
    assert len(s) == 81 and np.all(s.values == 0.0)
    assert s.centers[0] == 10 and s.spacing == 1
    s3 = entropy_series(np.full(100, 0.5), WindowConfig(phi=20, stride=3))
    assert len(s3) == (100 - 20) // 3 + 1 and s3.spacing == 3


def test_step_signal_nonzero_only_across_step():
    x = np.r_[np.zeros(50), np.ones(50)]
    s = entropy_series(x, WindowConfig(phi=20))
    straddle = (s.centers - 10 < 50) & (s.centers + 10 > 50)
    assert np.all(s.values[straddle] > 0) and np.all(s.values[~straddle] == 0)


def test_window_content_matches_direct_slices():
    x = np.random.default_rng(5).random(60)
    cfg = WindowConfig(phi=10, stride=2, zeta=0.1)
    s = entropy_series(x, cfg)
    for c, v in s:
        assert v == pytest.approx(oracle_entropy(x[c - 5:c + 5], 0.1), abs=1e-12)


def test_signal_too_short():
    with pytest.raises(SignalTooShort):
        entropy_series(np.zeros(5), WindowConfig(phi=20))


def test_mi_series_special_cases():
    cfg = WindowConfig(phi=10, zeta=0.1)
    x = np.random.default_rng(6).random(40)
    assert np.all(mi_series(np.zeros(40), np.ones(40), cfg).values == 0)
    assert mi_series(x, x, cfg).values == pytest.approx(entropy_series(x, cfg).values, abs=1e-12)


def test_mi_3d_recomposes_axis_series():
    rng = np.random.default_rng(7)
    a = np.cumsum(rng.normal(0, 0.01, (80, 3)), axis=0)
    b = a + rng.normal(0, 0.002, (80, 3))
    cfg = WindowConfig()
    total = mi_3d(a, b, cfg)
    parts = sum(mi_series(a[:, k], b[:, k], cfg).values for k in range(3))
    assert np.all(total.values == parts)
    assert np.all(mi_3d(a, np.zeros((80, 3)), cfg).values == 0)
    self_info = sum(entropy_series(a[:, k], cfg).values for k in range(3))
    assert mi_3d(a, a, cfg).values == pytest.approx(self_info, abs=1e-12)
    with pytest.raises(LengthMismatch):
        mi_3d(a, b[:-1], cfg)
    with pytest.raises(SignalTooShort):
        mi_3d(a[:5], b[:5], cfg)


def test_derivative():
    const = ScalarSeries(np.arange(10, 20), np.full(10, 2.0))
    assert np.all(series_derivative(const).values == 0)
    ramp = ScalarSeries(np.arange(0, 30, 3), 0.5 * np.arange(10))
    assert series_derivative(ramp, frame_rate=30).values == pytest.approx(np.full(10, 0.5 / (3 / 30)))
    with pytest.raises(SeriesTooShort):
        series_derivative(ScalarSeries([1, 2], [0.0, 1.0]))


def test_derivative_sign_on_canonical_bell(canonical):
    demo, _ = canonical
    s = entropy_series(demo.track("block_0").positions[:, 0], WindowConfig())
    d = series_derivative(s).values
    v = s.values
    peak = int(np.argmax(v))
    rising = (v[:peak] > 0) & (np.diff(v)[:peak] > 0)
    falling = (v[peak + 1:] > 0) & (np.diff(v)[peak:] < 0)
    assert np.all(d[:peak][rising] > 0)
    assert np.all(d[peak + 1:][falling] < 0)


def test_csv_export():
    text = series_to_csv(ScalarSeries([10, 11], [0.0, 0.5]))
    assert text == "center_frame,value\n10,0.0\n11,0.5\n"


def test_scalar_series_validation():
    with pytest.raises(ValueError):
        ScalarSeries([1, 1], [0.0, 0.0])
    with pytest.raises(ValueError):
        ScalarSeries([1, 2, 4], [0.0, 0.0, 0.0])
