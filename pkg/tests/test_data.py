"""Session/dataset validation and the text interchange format."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from offbeat.data import (
    Dataset,
    LoadError,
    Session,
    load_dataset,
    median_spacing,
    save_dataset,
)


def make_session(
    sid="s0",
    times=(0.0, 1.0, 2.5),
    features=None,
    events=(0.4, 2.0),
    labels=None,
):
    times = np.asarray(times, dtype=float)
    if features is None:
        features = np.arange(times.size * 2, dtype=float).reshape(times.size, 2)
    return Session(sid, times, features, np.asarray(events, dtype=float), labels)


class TestSessionValidation:
    def test_basic_properties(self):
        s = make_session(labels=np.array([0, 1, 0]))
        assert s.num_instances == 3
        assert s.num_events == 2
        assert s.feature_dim == 2
        assert s.has_labels

    def test_events_sorted_on_construction(self):
        s = make_session(events=(2.0, -1.0, 0.5))
        assert s.event_times.tolist() == [-1.0, 0.5, 2.0]

    def test_arrays_read_only(self):
        s = make_session()
        with pytest.raises(ValueError):
            s.instance_times[0] = 99.0
        with pytest.raises(ValueError):
            s.features[0, 0] = 99.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(sid="bad id"),
            dict(sid=".hidden"),
            dict(times=(1.0, 1.0, 2.0)),
            dict(times=(2.0, 1.0, 0.0)),
            dict(times=(0.0, np.nan, 2.0)),
            dict(features=np.zeros((2, 2))),
            dict(features=np.zeros((3, 0))),
            dict(events=(0.1, np.inf)),
            dict(labels=np.array([0, 1])),
            dict(labels=np.array([0, 2, 1])),
        ],
    )
    def test_rejects_malformed(self, kwargs):
        with pytest.raises(ValueError):
            make_session(**kwargs)

    def test_with_events_preserves_rest(self):
        s = make_session(labels=np.array([1, 0, 1]))
        s2 = s.with_events(np.array([9.0, -3.0]))
        assert s2.event_times.tolist() == [-3.0, 9.0]
        assert s2.session_id == s.session_id
        assert np.array_equal(s2.true_labels, s.true_labels)
        assert s.event_times.tolist() == [0.4, 2.0]

    def test_single_instance_allowed(self):
        s = make_session(times=(5.0,), features=np.ones((1, 3)), events=())
        assert s.num_instances == 1 and s.num_events == 0


class TestDataset:
    def test_requires_sessions(self):
        with pytest.raises(ValueError):
            Dataset(())

    def test_rejects_duplicate_ids(self):
        with pytest.raises(ValueError, match="duplicate"):
            Dataset((make_session("a"), make_session("a")))

    def test_rejects_mixed_dims(self):
        other = make_session("b", features=np.zeros((3, 4)))
        with pytest.raises(ValueError, match="feature_dim"):
            Dataset((make_session("a"), other))

    def test_totals_and_subset(self):
        data = Dataset((make_session("a"), make_session("b", times=(0.0, 1.0), features=np.zeros((2, 2)), events=())))
        assert len(data) == 2
        assert data.total_instances == 5
        assert data.total_events == 2
        sub = data.subset([1])
        assert len(sub) == 1 and sub[0].session_id == "b"
        rev = data.subset([1, 0])
        assert [s.session_id for s in rev] == ["b", "a"]

    def test_has_labels_all_or_nothing(self):
        labeled = make_session("a", labels=np.array([0, 0, 1]))
        assert Dataset((labeled,)).has_labels
        assert not Dataset((labeled, make_session("b"))).has_labels


class TestMedianSpacing:
    def test_pooled_median(self):
        a = make_session("a", times=(0.0, 1.0, 2.0))
        b = make_session("b", times=(0.0, 3.0, 6.0))
        assert median_spacing(Dataset((a, b))) == 2.0

    def test_single_instance_fallback(self):
        s = make_session(times=(5.0,), features=np.ones((1, 2)), events=())
        assert median_spacing(Dataset((s,))) == 1.0


class TestRoundTrip:
    def test_save_load_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        sessions = []
        for i, labeled in enumerate((True, False)):
            L = 7
            times = np.cumsum(rng.uniform(0.1, 2.0, L))
            feats = rng.normal(size=(L, 3)) * 10 ** rng.integers(-8, 8)
            events = rng.normal(0.0, 5.0, 4)
            labels = rng.integers(0, 2, L) if labeled else None
            sessions.append(Session(f"rt-{i}", times, feats, events, labels))
        data = Dataset(tuple(sessions))
        save_dataset(data, tmp_path)
        back = load_dataset(tmp_path)
        assert len(back) == len(data)
        for s, b in zip(data, back):
            assert s.session_id == b.session_id
            assert np.array_equal(s.instance_times, b.instance_times)
            assert np.array_equal(s.features, b.features)
            assert np.array_equal(s.event_times, b.event_times)
            if s.has_labels:
                assert np.array_equal(s.true_labels, b.true_labels)
            else:
                assert not b.has_labels

    @given(
        st.lists(
            st.floats(
                min_value=-1e12, max_value=1e12, allow_nan=False, allow_infinity=False
            ),
            min_size=1,
            max_size=6,
        )
    )
    def test_float_repr_round_trip(self, values):
        # The format writes repr() floats, which round-trip bit for bit.
        assert all(float(repr(v)) == v for v in values)

    def test_byte_identical_rewrites(self, tmp_path):
        data = Dataset((make_session(labels=np.array([1, 0, 1])),))
        first = save_dataset(data, tmp_path / "a")[0].read_bytes()
        second = save_dataset(data, tmp_path / "b")[0].read_bytes()
        assert first == second

    def test_load_single_file(self, tmp_path):
        paths = save_dataset(Dataset((make_session(),)), tmp_path)
        data = load_dataset(paths[0])
        assert len(data) == 1

    def test_sorted_file_order(self, tmp_path):
        data = Dataset((make_session("zz"), make_session("aa")))
        save_dataset(data, tmp_path)
        back = load_dataset(tmp_path)
        assert [s.session_id for s in back] == ["aa", "zz"]


def write(tmp_path, text, name="bad.session"):
    target = tmp_path / name
    target.write_text(text)
    return target


class TestLoadErrors:
    def test_missing_path(self, tmp_path):
        with pytest.raises(LoadError, match="no such file"):
            load_dataset(tmp_path / "nope")

    def test_empty_directory(self, tmp_path):
        with pytest.raises(LoadError, match="no .session files"):
            load_dataset(tmp_path)

    @pytest.mark.parametrize(
        "text,fragment",
        [
            ("", ":1: empty file"),
            ("nonsense\n", ":1: header"),
            ("session s0 L=x M=0 D=1 labels=0\n", ":1: bad integer"),
            ("session s0 L=0 M=0 D=1 labels=0\n", ":1: need L >= 1"),
            ("session s0 L=1 M=0 D=1 labels=7\n", ":1: labels flag"),
            ("session s0 L=2 M=0 D=1 labels=0\nt 0.0 1.0\n", "expected 3 lines"),
            ("session s0 L=1 M=0 D=1 labels=0\nq 0.0 1.0\n", ":2: expected instance line"),
            ("session s0 L=1 M=0 D=1 labels=0\nt 0.0 1.0 5.0\n", ":2: expected 3 fields"),
            ("session s0 L=1 M=0 D=1 labels=0\nt zero 1.0\n", ":2: bad time"),
            ("session s0 L=1 M=0 D=1 labels=0\nt 0.0 inf\n", ":2: non-finite feature"),
            ("session s0 L=1 M=0 D=1 labels=1\nt 0.0 1.0 3\n", ":2: label must be 0 or 1"),
            (
                "session s0 L=2 M=0 D=1 labels=0\nt 1.0 1.0\nt 0.5 1.0\n",
                ":3: instance_times not strictly increasing",
            ),
            ("session s0 L=1 M=1 D=1 labels=0\nt 0.0 1.0\nzz 1.0\n", ":3: expected event line"),
            ("session s0 L=1 M=1 D=1 labels=0\nt 0.0 1.0\nz nan\n", ":3: non-finite time"),
            (
                "session s0 L=1 M=0 D=1 labels=0\nt 0.0 1.0\nleftover\n",
                ":3: trailing content",
            ),
            ("session bad/id L=1 M=0 D=1 labels=0\nt 0.0 1.0\n", "invalid session_id"),
        ],
    )
    def test_malformed_content(self, tmp_path, text, fragment):
        target = write(tmp_path, text)
        with pytest.raises(LoadError) as err:
            load_dataset(target)
        assert fragment in str(err.value)

    def test_trailing_blank_lines_allowed(self, tmp_path):
        target = write(tmp_path, "session s0 L=1 M=1 D=1 labels=0\nt 0.0 1.0\nz 0.5\n\n\n")
        data = load_dataset(target)
        assert data[0].num_events == 1

    def test_duplicate_ids_across_files(self, tmp_path):
        body = "session dup L=1 M=0 D=1 labels=0\nt 0.0 1.0\n"
        write(tmp_path, body, "a.session")
        write(tmp_path, body, "b.session")
        with pytest.raises(LoadError, match="duplicate"):
            load_dataset(tmp_path)
