import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_flags, brute_groups, median, population_std
from sigsegment.detector import (
    CandidateInterval,
    FlagSet,
    SpikeDetector,
    ThresholdParams,
    detect,
    flag_frames,
    group_segments,
    read_candidates_csv,
    threshold_of,
    write_candidates_csv,
)
from sigsegment.errors import EmptySignal
from sigsegment.signalgen import ResidualSignal

# median 1, mean 3.25, population variance (3 * 2.25**2 + 6.75**2) / 4 = 15.1875
STD_1_1_1_10 = math.sqrt(15.1875)


def test_zero_variance_threshold():
    for k in (0.0, 1.0, 7.5):
        assert threshold_of([5, 5, 5, 5], ThresholdParams(k)) == 5.0


def test_threshold_example():
    oracle = median([1, 1, 1, 10]) + population_std([1, 1, 1, 10])
    assert oracle == pytest.approx(1 + STD_1_1_1_10, abs=1e-15)
    assert threshold_of([1, 1, 1, 10], ThresholdParams(1.0)) == pytest.approx(4.8971143170299736, abs=1e-12)


def test_even_median():
    assert threshold_of([1, 2, 3, 4], ThresholdParams(0.0)) == 2.5


def test_sample_std_mode():
    t = threshold_of([1, 1, 1, 10], ThresholdParams(1.0, "sample"))
    assert t == pytest.approx(1 + math.sqrt(15.1875 * 4 / 3), abs=1e-12)


def test_threshold_empty():
    with pytest.raises(EmptySignal):
        threshold_of([], ThresholdParams())


def test_negative_k_rejected():
    with pytest.raises(ValueError):
        ThresholdParams(-1.0)


def test_flag_example():
    assert flag_frames([1, 1, 1, 10], 4.897114).indices == (4,)


def test_flag_strict_inequality():
    assert len(flag_frames([3.0] * 6, 3.0)) == 0


def test_flag_everything():
    assert flag_frames([0, 1, 2], -1).indices == (1, 2, 3)


def test_group_single_run():
    (c,) = group_segments([4, 5, 6], fps=1, gap_tol_s=0, min_dur_s=0)
    assert (c.start_frame, c.end_frame, c.start_s, c.end_s) == (4, 6, 3.0, 6.0)


@pytest.mark.parametrize("gap,expected", [(3, [(4, 10)]), (1, [(4, 5), (9, 10)])])
def test_group_gap_tolerance(gap, expected):
    got = [(c.start_frame, c.end_frame) for c in group_segments([4, 5, 9, 10], 1, gap, 0)]
    assert got == expected == brute_groups([4, 5, 9, 10], 1, gap, 0)


def test_group_min_duration():
    assert group_segments([7], fps=10, gap_tol_s=0, min_dur_s=0.5) == []


def test_group_empty():
    assert group_segments([], fps=10) == []


def test_group_float_gap_slack():
    # 0.3 s at 10 fps is 3 frames even though 0.3 * 10 is not exactly 3.0 in binary
    got = group_segments([1, 5], fps=10, gap_tol_s=0.3, min_dur_s=0)
    assert [(c.start_frame, c.end_frame) for c in got] == [(1, 5)]


def test_group_peak_value():
    flags = FlagSet((2, 3, 8), 1.0, (4.0, 9.0, 2.0))
    a, b = group_segments(flags, fps=1, gap_tol_s=0, min_dur_s=0)
    assert a.peak_value == 9.0 and b.peak_value == 2.0


@settings(max_examples=200, deadline=None)
@given(
    st.sets(st.integers(1, 60), max_size=30),
    st.sampled_from([1.0, 2.0, 10.0, 25.0]),
    st.sampled_from([0.0, 0.1, 0.3, 0.5, 1.0, 2.0]),
    st.sampled_from([0.0, 0.2, 0.5, 1.0, 3.0]),
)
def test_group_matches_brute_force(flags, fps, gap, min_dur):
    got = group_segments(sorted(flags), fps, gap, min_dur)
    assert [(c.start_frame, c.end_frame) for c in got] == brute_groups(flags, fps, gap, min_dur)
    for a, b in zip(got, got[1:]):
        assert a.end_frame < b.start_frame
        assert b.start_frame - a.end_frame - 1 > gap * fps
    for c in got:
        assert c.end_s - c.start_s >= min_dur - 1e-9
        assert c.start_s < c.end_s
    # kept flags land in exactly one interval
    for f in flags:
        hits = sum(c.start_frame <= f <= c.end_frame for c in got)
        assert hits <= 1


def test_detect_all_zero():
    assert detect(np.zeros(50), ThresholdParams(2.0)) == []


def test_detect_example():
    (c,) = detect([1, 1, 1, 10, 10, 1], ThresholdParams(1.0), gap_tol_s=0, min_dur_s=0, fps=1)
    assert (c.start_frame, c.end_frame) == (4, 5)


def test_detect_constant_signal():
    assert detect(np.full(30, 123.0)) == []


def test_detect_keeps_video_id():
    sig = ResidualSignal("clip", 1.0, [1, 1, 1, 10, 10, 1], 1)
    (c,) = detect(sig, ThresholdParams(1.0), 0, 0)
    assert c.video_id == "clip"


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=60), st.floats(0.01, 1e3))
def test_monotone_in_k_and_scale_covariant(values, c):
    values = np.array(values)
    previous = None
    for k in (0.0, 0.5, 1.0, 2.0, 4.0):
        flags = set(flag_frames(values, threshold_of(values, ThresholdParams(k))).indices)
        if previous is not None:
            assert flags <= previous
        previous = flags
    if values.std() > 0 and np.all(values > 0):
        base = flag_frames(values, threshold_of(values, ThresholdParams(1.0))).indices
        # powers of two scale without rounding
        scale = 2.0 ** round(math.log2(c))
        scaled = values * scale
        assert flag_frames(scaled, threshold_of(scaled, ThresholdParams(1.0))).indices == base


def test_flags_match_brute_force(rng):
    for _ in range(200):
        values = rng.exponential(size=rng.integers(1, 80))
        k = rng.choice([0.0, 0.5, 1.0, 2.0, 4.0])
        assert list(flag_frames(values, threshold_of(values, ThresholdParams(k))).indices) == brute_flags(
            values.tolist(), k
        )


def test_candidate_times():
    c = CandidateInterval(11, 20, fps=10.0)
    assert (c.start_s, c.end_s, c.n_frames) == (1.0, 2.0, 10)
    with pytest.raises(ValueError):
        CandidateInterval(5, 4, fps=1)


def test_candidate_csv_round_trip(tmp_path):
    cands = [CandidateInterval(4, 6, 2.0, 12.5, "a"), CandidateInterval(10, 12, 2.0, 3.0, "a")]
    write_candidates_csv(cands, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "video_id,start_frame,end_frame,start_s,end_s,peak_value"
    assert lines[1] == "a,4,6,1.500000,3.000000,12.5"
    assert read_candidates_csv(tmp_path / "c.csv", 2.0) == cands


def test_spike_detector_estimator():
    det = SpikeDetector(k=1.0, gap_tol_s=0, min_dur_s=0)
    assert det.get_params()["k"] == 1.0
    (c,) = det.fit_predict(np.array([1, 1, 1, 10, 10, 1.0]))
    assert (c.start_frame, c.end_frame) == (4, 5)
    assert det.threshold_ == pytest.approx(1 + math.sqrt(18.0))
    # threshold learned on one signal, applied to another
    assert [x.start_frame for x in det.predict(np.array([0, 6, 0, 0.0]))] == [2]
