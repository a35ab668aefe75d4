import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capgest.errors import (
    DegenerateRange,
    MissingCalibration,
    NotEnoughUsers,
    SegmentTooShort,
)
from capgest.signals import (
    N_CHANNELS,
    N_FEATURES,
    WINDOW_FRAMES,
    CalibrationRange,
    CalibrationTable,
    GestureLabel,
    GestureMark,
    Recording,
    Sample,
    assemble_sliding,
    extract_exact,
    extract_sliding,
    feature_matrix,
    flatten,
    label_array,
    normalize,
    split_by_user,
    unflatten,
)


def make_recording(n_frames=60, user_id="u01", marks=(), values=None):
    channels = (
        values
        if values is not None
        else np.full((N_CHANNELS, n_frames), 0.25)
    )
    return Recording(user_id=user_id, channels=channels, gesture_marks=tuple(marks))


def flat_calib(user_id="u01", lo=0.0, hi=1.0):
    table = CalibrationTable()
    for ch in range(N_CHANNELS):
        table.set(user_id, ch, CalibrationRange(lo, hi))
    return table


class TestLabels:
    def test_text_round_trip(self):
        for label in GestureLabel:
            assert GestureLabel.from_text(label.text) is label

    def test_fixed_order(self):
        assert [int(l) for l in GestureLabel] == [0, 1, 2, 3, 4]


class TestValidation:
    def test_mark_rejects_bad_span(self):
        with pytest.raises(ValueError):
            GestureMark(5, 5, GestureLabel.SHOOT)
        with pytest.raises(ValueError):
            GestureMark(-1, 3, GestureLabel.SHOOT)

    def test_recording_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            Recording(user_id="u", channels=np.zeros((4, 10)))

    def test_recording_rejects_overlapping_marks(self):
        marks = (
            GestureMark(0, 10, GestureLabel.SHOOT),
            GestureMark(10, 20, GestureLabel.FLICK_INDEX),
        )
        with pytest.raises(ValueError, match="overlap"):
            make_recording(30, marks=marks)

    def test_recording_rejects_out_of_bounds_mark(self):
        with pytest.raises(ValueError, match="bounds"):
            make_recording(10, marks=(GestureMark(0, 10, GestureLabel.SHOOT),))

    def test_sample_rejects_out_of_range_values(self):
        with pytest.raises(ValueError):
            Sample(np.full((5, 20), 1.5), GestureLabel.NONE, "u")

    def test_calibration_rejects_degenerate_range(self):
        with pytest.raises(DegenerateRange):
            CalibrationRange(10.0, 10.0)


class TestNormalize:
    def test_affine_map(self):
        rec = make_recording(values=np.full((N_CHANNELS, 4), 600.0))
        table = flat_calib(lo=400.0, hi=800.0)
        out = normalize(rec, table)
        assert np.allclose(out.channels, 0.5)

    def test_clamps_outside_range(self):
        values = np.full((N_CHANNELS, 3), 0.0)
        values[0] = 1e6
        rec = make_recording(values=values)
        out = normalize(rec, flat_calib(lo=100.0, hi=200.0))
        assert out.channels.min() == 0.0 and out.channels.max() == 1.0

    def test_missing_calibration(self):
        with pytest.raises(MissingCalibration):
            normalize(make_recording(), CalibrationTable())


class TestExtract:
    def test_exact_resamples_to_window(self):
        values = np.tile(np.linspace(0.0, 1.0, 50), (N_CHANNELS, 1))
        rec = make_recording(values=values)
        mark = GestureMark(10, 39, GestureLabel.SHOOT)
        sample = extract_exact(rec, mark)
        assert sample.matrix.shape == (N_CHANNELS, WINDOW_FRAMES)
        assert sample.label is GestureLabel.SHOOT
        # linear interpolation keeps the segment endpoints
        assert np.allclose(sample.matrix[:, 0], values[:, 10])
        assert np.allclose(sample.matrix[:, -1], values[:, 39])

    def test_exact_rejects_short_segment(self):
        rec = make_recording()
        with pytest.raises(SegmentTooShort):
            extract_exact(rec, GestureMark(3, 4, GestureLabel.SHOOT))

    def test_sliding_label_rule(self):
        # mark [20, 50]: span 30, eligible window ends are [40, 50]
        mark = GestureMark(20, 50, GestureLabel.FLICK_INDEX)
        rec = make_recording(70, marks=(mark,))
        samples = extract_sliding(rec)
        ends = range(WINDOW_FRAMES - 1, 70)
        for end, sample in zip(ends, samples):
            expected = (
                GestureLabel.FLICK_INDEX if 40 <= end <= 50 else GestureLabel.NONE
            )
            assert sample.label is expected, end

    def test_sliding_stride(self):
        rec = make_recording(60)
        assert len(extract_sliding(rec, stride_frames=5)) == len(range(19, 60, 5))


class TestFlatten:
    def test_channel_major_order(self):
        matrix = np.arange(100).reshape(5, 20) / 100.0
        sample = Sample(matrix, GestureLabel.NONE, "u")
        flat = flatten(sample)
        assert np.array_equal(flat[:20], matrix[0])
        assert np.array_equal(flat[20:40], matrix[1])

    @given(
        st.lists(
            st.floats(min_value=0.0, max_value=1.0), min_size=100, max_size=100
        )
    )
    def test_round_trip(self, values):
        matrix = np.array(values).reshape(5, 20)
        sample = Sample(matrix, GestureLabel.NONE, "u")
        assert np.array_equal(unflatten(flatten(sample)), matrix)

    def test_unflatten_rejects_wrong_size(self):
        with pytest.raises(ValueError):
            unflatten(np.zeros(99))


def make_user_samples(n_users):
    return [
        Sample(np.full((5, 20), 0.5), GestureLabel.NONE, f"u{u:02d}")
        for u in range(n_users)
        for _ in range(3)
    ]


class TestSplit:
    def test_counts_and_disjoint(self):
        split = split_by_user(make_user_samples(15), seed=1)
        users = {
            name: {s.user_id for s in split.partition(name)}
            for name in ("train", "validation", "test", "hold")
        }
        assert tuple(len(users[n]) for n in ("train", "validation", "test", "hold")) == (8, 3, 2, 2)
        all_users = [u for us in users.values() for u in us]
        assert len(all_users) == len(set(all_users))

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=30, deadline=None)
    def test_deterministic_and_disjoint_any_seed(self, seed):
        samples = make_user_samples(16)
        a = split_by_user(samples, seed=seed)
        b = split_by_user(samples, seed=seed)
        assert a.user_assignment == b.user_assignment
        # extras beyond the requested 15 go to train
        assert sum(v == "train" for v in a.user_assignment.values()) == 9

    def test_pinned_hold(self):
        split = split_by_user(make_user_samples(15), seed=3, pinned_hold=("u00", "u07"))
        hold_users = {s.user_id for s in split.hold}
        assert hold_users == {"u00", "u07"}

    def test_not_enough_users(self):
        with pytest.raises(NotEnoughUsers):
            split_by_user(make_user_samples(10))
        with pytest.raises(NotEnoughUsers):
            split_by_user(make_user_samples(15), pinned_hold=("zz",))
        with pytest.raises(NotEnoughUsers):
            split_by_user(make_user_samples(15), pinned_hold=("u00", "u01", "u02"))


class TestAssemble:
    def test_subsamples_none_class(self):
        marks = (GestureMark(25, 45, GestureLabel.SHOOT),)
        recs = [make_recording(200, marks=marks) for _ in range(6)]
        samples = assemble_sliding(recs, flat_calib(), none_ratio=1.0, seed=0)
        labels = label_array(samples)
        n_gesture = int((labels == int(GestureLabel.SHOOT)).sum())
        n_none = int((labels == int(GestureLabel.NONE)).sum())
        assert n_gesture > 0
        assert n_none == n_gesture  # one gesture class, ratio 1.0

    def test_drops_near_duplicate_none_windows(self):
        marks = (GestureMark(25, 45, GestureLabel.SHOOT),)
        rec = make_recording(80, marks=marks)
        samples = assemble_sliding([rec], flat_calib(), none_ratio=1e9, seed=0)
        labels = label_array(samples)
        # window ends 19..79; SHOOT ends are 39..45 (trailing third of the
        # mark); NONE ends 46..49 overlap the mark by >15 of 20 frames and
        # are dropped, leaving 20 + 30 NONE windows
        assert int((labels == int(GestureLabel.SHOOT)).sum()) == 7
        assert int((labels == int(GestureLabel.NONE)).sum()) == 50

    def test_feature_matrix_shape(self):
        samples = make_user_samples(2)
        X = feature_matrix(samples)
        assert X.shape == (len(samples), N_FEATURES)
        assert feature_matrix([]).shape == (0, N_FEATURES)
