from fractions import Fraction
import hashlib
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from hdcoin.dataset import (
    Dataset, canonical_bytes, dataset_hash, load_csv, make_blobs, save_csv, split, task_hash,
)
from hdcoin.errors import ConfigurationError, DatasetError

import oracles


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_three_by_two(self, tmp_path):
        ds = load_csv(write(tmp_path, "1,2,0\n3,4,1\n5,6,0\n"))
        assert ds.features.tolist() == [[1, 2], [3, 4], [5, 6]]
        assert ds.labels.tolist() == [0, 1, 0]
        assert (ds.n_samples, ds.n_features, ds.num_classes) == (3, 2, 2)
        assert ds.name == "data"

    def test_labels_remapped_in_sorted_order(self, tmp_path):
        ds = load_csv(write(tmp_path, "1,7\n2,3\n3,7\n4,10\n"))
        assert ds.labels.tolist() == [1, 0, 1, 2]
        assert ds.num_classes == 3

    def test_header_and_integral_float_labels(self, tmp_path):
        ds = load_csv(write(tmp_path, "a,b,class\n1,2,1.0\n3,4,2\n"), has_header=True)
        assert ds.labels.tolist() == [0, 1]

    def test_blank_lines_are_skipped(self, tmp_path):
        ds = load_csv(write(tmp_path, "1,2,0\n\n3,4,1\n"))
        assert ds.n_samples == 2

    def test_non_numeric_feature_names_row(self, tmp_path):
        with pytest.raises(DatasetError, match="row 3") as exc:
            load_csv(write(tmp_path, "1,2,0\n3,4,1\nx,6,0\n"))
        assert exc.value.row == 3

    def test_ragged_row(self, tmp_path):
        with pytest.raises(DatasetError, match="row 2"):
            load_csv(write(tmp_path, "1,2,0\n3,1\n"))

    def test_fractional_label(self, tmp_path):
        with pytest.raises(DatasetError, match="row 1"):
            load_csv(write(tmp_path, "1,2,0.5\n"))

    def test_non_finite_and_empty(self, tmp_path):
        with pytest.raises(DatasetError):
            load_csv(write(tmp_path, "nan,2,0\n"))
        with pytest.raises(DatasetError):
            load_csv(write(tmp_path, "\n\n"))

    def test_round_trip(self, tmp_path):
        ds = make_blobs(3, 4, 5, seed=9, name="rt")
        save_csv(ds, tmp_path / "rt.csv")
        back = load_csv(tmp_path / "rt.csv")
        assert np.array_equal(back.features, ds.features)
        assert np.array_equal(back.labels, ds.labels)
        assert dataset_hash(back) == dataset_hash(ds)

    def test_arrays_are_read_only(self, tmp_path):
        ds = load_csv(write(tmp_path, "1,2,0\n3,4,1\n"))
        with pytest.raises(ValueError):
            ds.features[0, 0] = 9.0


class TestHash:
    def test_layout_matches_struct_oracle(self):
        ds = Dataset("one", np.array([[1.5, -2.0]]), np.array([0]), 1)
        expected = oracles.dataset_bytes("one", [[1.5, -2.0]], [0], 1)
        assert canonical_bytes(ds) == expected
        assert dataset_hash(ds).hex() == (
            "45996712b216f988fbb0d355ec10409b4a3f62e1148f203db24ec517c4f47366"
        )

    def test_larger_layout(self):
        ds = make_blobs(3, 5, 4, seed=2, name="blobs")
        expected = oracles.dataset_bytes(
            "blobs", ds.features.tolist(), ds.labels.tolist(), 3
        )
        assert dataset_hash(ds) == hashlib.sha256(expected).digest()

    def test_stable(self):
        a = make_blobs(2, 3, 4, seed=1)
        b = make_blobs(2, 3, 4, seed=1)
        assert dataset_hash(a) == dataset_hash(b)

    def test_every_single_mutation_changes_hash(self):
        base = make_blobs(2, 3, 3, seed=4, name="m")
        h = dataset_hash(base)
        for i in range(base.n_samples):
            for j in range(base.n_features):
                x = base.features.copy()
                x[i, j] = np.nextafter(x[i, j], np.inf)
                assert dataset_hash(Dataset("m", x, base.labels, 2)) != h
            y = base.labels.copy()
            y[i] = 1 - y[i]
            assert dataset_hash(Dataset("m", base.features, y, 2)) != h
        assert dataset_hash(Dataset("n", base.features, base.labels, 2)) != h
        assert dataset_hash(Dataset("m", base.features, base.labels, 3)) != h

    def test_task_hash_is_ordered_pair(self):
        a, b = make_blobs(2, 2, 3, seed=1, name="a"), make_blobs(2, 2, 3, seed=1, name="b")
        assert task_hash(a, b) == hashlib.sha256(dataset_hash(a) + dataset_hash(b)).digest()
        assert task_hash(a, b) != task_hash(b, a)


def split_oracle(labels, num_classes, fraction, seed):
    stream = oracles.splitmix64(seed)
    train, test = [], []
    for c in range(num_classes):
        members = [i for i, y in enumerate(labels) if y == c]
        for i in range(len(members) - 1, 0, -1):
            j = next(stream) % (i + 1)
            members[i], members[j] = members[j], members[i]
        cut = math.ceil(fraction * len(members))
        train += members[:cut]
        test += members[cut:]
    return sorted(train), sorted(test)


class TestSplit:
    def _indexed(self, ds):
        # tag each sample by a unique first feature so subsets can be traced back
        x = np.array(ds.features)
        x[:, 0] = np.arange(ds.n_samples)
        return Dataset(ds.name, x, ds.labels, ds.num_classes)

    def test_matches_independent_shuffle(self):
        ds = self._indexed(make_blobs(3, 2, 7, seed=5))
        train, test = split(ds, "7/10", 42)
        exp_train, exp_test = split_oracle(ds.labels.tolist(), 3, Fraction(7, 10), 42)
        assert train.features[:, 0].astype(int).tolist() == exp_train
        assert test.features[:, 0].astype(int).tolist() == exp_test
        assert (train.name, test.name) == ("synthetic/train", "synthetic/test")

    @settings(max_examples=40, deadline=None)
    @given(
        classes=st.integers(1, 5),
        per_class=st.integers(2, 12),
        num=st.integers(1, 9),
        seed=st.integers(0, 2**64 - 1),
    )
    def test_partition_and_stratification(self, classes, per_class, num, seed):
        ds = self._indexed(make_blobs(classes, 2, per_class, seed=1))
        fraction = Fraction(num, 10)
        assume(math.ceil(fraction * per_class) < per_class)  # otherwise the test set is empty
        train, test = split(ds, f"{num}/10", seed)
        tr = train.features[:, 0].astype(int).tolist()
        te = test.features[:, 0].astype(int).tolist()
        assert sorted(tr + te) == list(range(ds.n_samples))
        assert not set(tr) & set(te)
        assert tr == sorted(tr) and te == sorted(te)
        for c in range(classes):
            assert int(train.class_counts()[c]) == math.ceil(fraction * per_class)
            assert int(train.class_counts()[c]) + int(test.class_counts()[c]) == per_class
        assert split(ds, f"{num}/10", seed)[0].features.tolist() == train.features.tolist()

    def test_different_seeds_differ(self):
        ds = make_blobs(2, 2, 20, seed=3)
        a = split(ds, "1/2", 1)[0]
        b = split(ds, "1/2", 2)[0]
        assert not np.array_equal(a.features, b.features)

    def test_bad_fraction(self):
        ds = make_blobs(2, 2, 4)
        for bad in (0, 1, "3/2"):
            with pytest.raises(ConfigurationError):
                split(ds, bad, 0)

    def test_singleton_class(self):
        ds = Dataset("s", np.array([[0.0], [1.0], [2.0]]), np.array([0, 0, 1]), 2)
        with pytest.raises(ConfigurationError, match="class 1"):
            split(ds, "1/2", 0)

    def test_empty_test_set(self):
        ds = make_blobs(2, 2, 2)
        with pytest.raises(ConfigurationError, match="empty"):
            split(ds, "9/10", 0)


class TestBlobs:
    def test_shape_and_balance(self):
        ds = make_blobs(4, 3, 10, seed=0)
        assert ds.features.shape == (40, 3)
        assert ds.class_counts().tolist() == [10] * 4

    def test_seeded(self):
        assert np.array_equal(make_blobs(3, 2, 5, seed=8).features, make_blobs(3, 2, 5, seed=8).features)
        assert not np.array_equal(make_blobs(3, 2, 5, seed=8).features, make_blobs(3, 2, 5, seed=9).features)

    def test_majority_baseline(self):
        ds = Dataset("b", np.zeros((5, 1)), np.array([0, 1, 1, 1, 0]), 2)
        assert ds.majority_baseline() == pytest.approx(3 / 5)
        assert str(ds.majority_baseline()) == "3/5"
