import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixspec import (
    EstimatorState,
    RunningEstimate,
    TimeSeries,
    WindowSpec,
    batch_estimate,
    data_budget,
    hann_window,
    make_window,
    segment_transform,
    simulate_markov,
    streaming_run,
    streaming_update,
)
from mixspec.estimators import rank_one_terms, reduce_frequency, segment_vectors
from mixspec.exceptions import InsufficientDataError, InvalidSpecError

FREQ_GRID = np.linspace(-0.5, 0.5, 1024)


def rel_diff(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return np.linalg.norm(a - b) / scale if scale else 0.0


specs = st.one_of(
    st.integers(1, 40).map(WindowSpec.bartlett),
    st.builds(
        lambda M, k, seed: WindowSpec.welch(np.random.default_rng(seed).uniform(0.05, 2.0, M), k),
        st.integers(1, 40), st.integers(1, 40), st.integers(0, 2**32 - 1),
    ),
    st.builds(WindowSpec.hann, st.integers(1, 40), st.integers(1, 40)),
)


# -- windows -----------------------------------------------------------------


def test_bartlett_window_at_zero_frequency():
    np.testing.assert_allclose(make_window(WindowSpec.bartlett(4), 0.0), [0.5] * 4, rtol=0, atol=1e-15)


def test_two_point_window_at_half():
    w = make_window(WindowSpec.welch([1.0, 1.0], 2), 0.5)
    np.testing.assert_allclose(w, [1 / math.sqrt(2), -1 / math.sqrt(2)], atol=1e-15)


def test_hann_window_has_unit_norm_everywhere():
    spec = WindowSpec.hann(16, 8)
    for s in FREQ_GRID:
        assert abs(np.linalg.norm(make_window(spec, s)) - 1) <= 1e-14


def test_hann_convention_has_no_zero_endpoints():
    v = hann_window(16)
    assert v.min() > 0
    np.testing.assert_allclose(v, v[::-1], atol=1e-15)
    assert v[0] == pytest.approx(0.5 * (1 - math.cos(2 * math.pi / 17)))


@settings(max_examples=40, deadline=None)
@given(specs)
def test_window_norm_is_one_on_frequency_grid(spec):
    for s in FREQ_GRID:
        assert abs(np.linalg.norm(make_window(spec, s)) - 1) <= 1e-14


@given(st.floats(-50, 50, allow_nan=False))
def test_frequency_reduction_is_periodic(s):
    r = reduce_frequency(s)
    assert -0.5 <= r <= 0.5
    spec = WindowSpec.hann(7, 3)
    np.testing.assert_allclose(make_window(spec, s), make_window(spec, r), atol=1e-9)


def test_frequency_must_be_finite():
    with pytest.raises(InvalidSpecError):
        reduce_frequency(float("nan"))


# -- specs -------------------------------------------------------------------


def test_bartlett_rejects_mismatched_hop():
    with pytest.raises(InvalidSpecError, match="hop"):
        WindowSpec("bartlett", 5, 3)


@pytest.mark.parametrize("kwargs", [
    dict(method="welch", segment_len=3, hop=1, window=(0.0, 0.0, 0.0)),
    dict(method="welch", segment_len=3, hop=1, window=(1.0, 1.0)),
    dict(method="welch", segment_len=0, hop=1),
    dict(method="welch", segment_len=3, hop=0),
    dict(method="periodogram", segment_len=3),
    dict(method="welch", segment_len=2, hop=1, window=(1.0, float("inf"))),
])
def test_invalid_specs(kwargs):
    with pytest.raises(InvalidSpecError):
        WindowSpec(**kwargs)


def test_bartlett_ignores_supplied_window():
    spec = WindowSpec("bartlett", 3, 3, (1.0, 2.0, 3.0))
    assert spec.window == (1.0, 1.0, 1.0)


def test_overlap_ratio():
    assert WindowSpec.hann(16, 8).overlap_ratio == 2.0


# -- segment transform ---------------------------------------------------------


def test_single_sample_segment():
    y = TimeSeries([3.0])
    for s in (0.0, 0.3, -0.5):
        sv = segment_transform(y, WindowSpec.welch([1.0], 1), s, 0)
        assert sv.value[0] == 3.0 + 0j


def test_two_sample_bartlett_segment():
    sv = segment_transform(TimeSeries([1.0, 1.0]), WindowSpec.bartlett(2), 0.0, 0)
    assert sv.value[0] == pytest.approx(math.sqrt(2), abs=1e-15)


def test_markov_segment_matches_direct_sum(chain):
    y = simulate_markov(chain, 50, seed=3)
    spec = WindowSpec.bartlett(5)
    for i in range(10):
        direct = sum(y.data[5 * i + k, 0] / math.sqrt(5) * cmath.exp(-2j * math.pi * k * 0.5) for k in range(5))
        got = segment_transform(y, spec, 0.5, i).value[0]
        assert abs(got - direct) <= 1e-14


def test_segment_transform_needs_full_segment():
    with pytest.raises(InsufficientDataError) as err:
        segment_transform(TimeSeries(np.zeros(9)), WindowSpec.bartlett(5), 0.5, 1)
    assert err.value.required == 10 and err.value.available == 9
    assert "last index 9" in str(err.value)


def test_segment_vectors_respect_hop(rng):
    y = TimeSeries(rng.standard_normal((40, 2)))
    spec = WindowSpec.hann(8, 3)
    w = make_window(spec, 0.2)
    got = segment_vectors(y, spec, 0.2, 5, first=2)
    for j, i in enumerate(range(2, 7)):
        np.testing.assert_allclose(got[j], w @ y.data[3 * i : 3 * i + 8], atol=1e-14)


# -- batch estimate ---------------------------------------------------------------


def test_zero_data_gives_zero_matrix():
    est = batch_estimate(TimeSeries(np.zeros((60, 2))), WindowSpec.hann(6, 3), 0.1, 10)
    assert np.all(est.matrix == 0) and est.segments == 10


def test_unit_segments_average_squares():
    est = batch_estimate(TimeSeries([2.0, -2.0]), WindowSpec.bartlett(1), 0.37, 2)
    assert est.value == 4.0


def test_markov_batch_matches_per_segment_mean(chain):
    y = simulate_markov(chain, 500, seed=11)
    spec = WindowSpec.bartlett(5)
    terms = []
    for i in range(100):
        seg = y.data[5 * i : 5 * i + 5, 0]
        z = sum(seg[k] / math.sqrt(5) * cmath.exp(-1j * math.pi * k) for k in range(5))
        terms.append(abs(z) ** 2)
    assert batch_estimate(y, spec, 0.5, 100).value == pytest.approx(math.fsum(terms) / 100, rel=1e-13)


def test_zero_segments_allowed():
    est = batch_estimate(TimeSeries(np.zeros((0, 3))), WindowSpec.bartlett(4), 0.0, 0)
    assert est.matrix.shape == (3, 3) and est.segments == 0


def test_batch_needs_enough_data():
    with pytest.raises(InsufficientDataError):
        batch_estimate(TimeSeries(np.ones(499)), WindowSpec.bartlett(5), 0.5, 100)
    with pytest.raises(InvalidSpecError):
        batch_estimate(TimeSeries(np.ones(10)), WindowSpec.bartlett(5), 0.5, -1)


def test_scalar_value_only_for_scalars(rng):
    est = batch_estimate(TimeSeries(rng.standard_normal((20, 2))), WindowSpec.bartlett(4), 0.0, 5)
    with pytest.raises(ValueError):
        est.value


def test_welch_rectangular_full_hop_equals_bartlett(rng):
    for n in (1, 3):
        y = TimeSeries(rng.standard_normal((400, n)))
        for s in (0.0, 0.21, 0.5, -0.33):
            a = batch_estimate(y, WindowSpec.bartlett(8), s, 50).matrix
            b = batch_estimate(y, WindowSpec.welch(np.ones(8), 8), s, 50).matrix
            np.testing.assert_array_equal(a, b)


@settings(max_examples=30, deadline=None)
@given(specs, st.integers(1, 3), st.integers(0, 60), st.floats(-0.5, 0.5), st.integers(0, 2**32 - 1))
def test_estimate_is_hermitian_psd(spec, n, L, s, seed):
    y = TimeSeries(np.random.default_rng(seed).standard_normal((data_budget(max(L, 1), spec.segment_len, spec.hop), n)))
    est = batch_estimate(y, spec, s, L)
    np.testing.assert_array_equal(est.matrix, est.matrix.conj().T)
    eig = np.linalg.eigvalsh(est.matrix)
    assert eig.min() >= -1e-12 * max(1.0, eig.max())
    if n == 1:
        assert est.matrix[0, 0].imag == 0


@settings(max_examples=30, deadline=None)
@given(specs, st.integers(1, 3), st.integers(1, 60), st.floats(0, 0.5), st.integers(0, 2**32 - 1))
def test_frequency_symmetry_for_real_data(spec, n, L, s, seed):
    y = TimeSeries(np.random.default_rng(seed).standard_normal((data_budget(L, spec.segment_len, spec.hop), n)))
    plus = batch_estimate(y, spec, s, L).matrix
    minus = batch_estimate(y, spec, -s, L).matrix
    # conj(yhat(s)) = yhat(-s) for real samples, so the estimate is conjugated (= transposed)
    assert np.linalg.norm(minus - plus.conj()) <= 1e-12 * max(1.0, np.linalg.norm(plus))
    assert np.linalg.norm(minus - plus.T) <= 1e-12 * max(1.0, np.linalg.norm(plus))
    if n == 1:
        assert abs(minus[0, 0] - plus[0, 0]) <= 1e-12 * max(1.0, abs(plus[0, 0]))


# -- streaming -------------------------------------------------------------------


def test_first_update_takes_the_term():
    Z = np.array([[2.0 + 1j, 0.5], [0.5, 3.0 - 1j]])
    st1 = streaming_update(EstimatorState.initial(2), Z)
    np.testing.assert_array_equal(st1.matrix, Z)
    assert st1.k == 1


def test_second_update_is_the_mean():
    Z1, Z2 = np.array([[1.0]]), np.array([[4.0]])
    st2 = streaming_update(streaming_update(EstimatorState.initial(1), Z1), Z2)
    assert st2.matrix[0, 0] == 2.5 and st2.k == 2


def test_update_rejects_shape_mismatch():
    with pytest.raises(InvalidSpecError):
        streaming_update(EstimatorState.initial(2), np.eye(3))


def test_thousand_updates_match_batch(rng):
    y = TimeSeries(rng.standard_normal((8000, 2)))
    spec = WindowSpec.bartlett(8)
    terms = rank_one_terms(segment_vectors(y, spec, 0.3, 1000))
    state = EstimatorState.initial(2, 0.3)
    for z in terms:
        state = streaming_update(state, z)
    assert rel_diff(state.matrix, batch_estimate(y, spec, 0.3, 1000).matrix) <= 1e-12


def test_update_is_deterministic(rng):
    Z = rng.standard_normal((3, 3))
    a = streaming_update(EstimatorState.initial(3), Z)
    b = streaming_update(EstimatorState.initial(3), Z)
    assert np.array_equal(streaming_update(a, Z).matrix, streaming_update(b, Z).matrix)


def test_single_checkpoint_is_one_rank_one_term(rng):
    y = TimeSeries(rng.standard_normal((5, 1)))
    spec = WindowSpec.bartlett(5)
    (snap,) = streaming_run(y, spec, 0.5, [1])
    z = segment_transform(y, spec, 0.5, 0).value
    np.testing.assert_allclose(snap.matrix, np.outer(z, z.conj()), rtol=1e-15)


def test_two_checkpoints_match_batch(rng):
    y = TimeSeries(rng.standard_normal((200, 1)))
    spec = WindowSpec.hann(10, 5)
    snaps = streaming_run(y, spec, 0.1, [4, 16])
    assert [x.segments for x in snaps] == [4, 16]
    for snap in snaps:
        assert rel_diff(snap.matrix, batch_estimate(y, spec, 0.1, snap.segments).matrix) <= 1e-12


def test_empty_checkpoints_give_empty_output():
    assert streaming_run(TimeSeries(np.zeros(0)), WindowSpec.bartlett(5), 0.5, []) == []


def test_checkpoints_must_increase():
    with pytest.raises(InvalidSpecError):
        streaming_run(TimeSeries(np.zeros(100)), WindowSpec.bartlett(5), 0.5, [4, 4])


def test_streaming_run_checks_data_length():
    with pytest.raises(InsufficientDataError):
        streaming_run(TimeSeries(np.zeros(19)), WindowSpec.bartlett(5), 0.5, [2, 4])


@settings(max_examples=40, deadline=None)
@given(specs, st.integers(1, 3), st.integers(1, 1000), st.floats(-0.5, 0.5), st.integers(0, 2**32 - 1))
def test_streaming_matches_batch(spec, n, L, s, seed):
    y = TimeSeries(np.random.default_rng(seed).standard_normal((data_budget(L, spec.segment_len, spec.hop), n)))
    cps = sorted({1, max(1, L // 3), L})
    for snap in streaming_run(y, spec, s, cps):
        assert rel_diff(snap.matrix, batch_estimate(y, spec, s, snap.segments).matrix) <= 1e-12


def test_running_estimate_is_independent_of_block_sizes(rng):
    y = rng.standard_normal((1000, 2))
    spec = WindowSpec.hann(12, 5)
    cps = [3, 50, 150]
    whole = RunningEstimate(spec, 0.25, 2, cps)
    whole.push(y)
    pieces = RunningEstimate(spec, 0.25, 2, cps)
    for chunk in np.array_split(y, [1, 7, 8, 300, 301, 999]):
        pieces.push(chunk)
    assert whole.done and pieces.done
    for a, b in zip(whole.snapshots, pieces.snapshots):
        assert np.array_equal(a.matrix, b.matrix) and a.segments == b.segments


def test_running_estimate_matches_streaming_update_bitwise(rng):
    y = TimeSeries(rng.standard_normal((300, 2)))
    spec = WindowSpec.bartlett(6)
    run = RunningEstimate(spec, 0.4, 2, [50])
    run.push(y.data)
    state = EstimatorState.initial(2, 0.4)
    for z in rank_one_terms(segment_vectors(y, spec, 0.4, 50)):
        state = streaming_update(state, z)
    np.testing.assert_array_equal(run.snapshots[0].matrix, state.matrix)


def test_running_estimate_stops_after_last_checkpoint(rng):
    run = RunningEstimate(WindowSpec.bartlett(2), 0.0, 1, [3])
    run.push(rng.standard_normal(100))
    assert run.k == 3 and run.done
    run.push(rng.standard_normal(10))
    assert run.k == 3


def test_data_budget_examples():
    assert data_budget(1, 7, 3) == 7
    assert data_budget(100, 5, 5) == 500
    assert data_budget(4, 16, 8) == 40
    with pytest.raises(InvalidSpecError):
        data_budget(0, 5, 5)
