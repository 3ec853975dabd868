"""Identity target codings: one-hot, scaled class-membership, and random.

Frozen values: rows follow directly from the coding definitions; the
1/sqrt(2) entry is hand-computed for a two-sample class; matrix-level
properties use independent closed-form oracles.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irs.coding import fda, onehot, random_coding

INV_SQRT2 = 0.7071067811865476  # hand-computed 1/sqrt(2)


class TestOnehot:
    def test_rows_and_first_appearance_order(self):
        """Each row has a single 1 in its class column; columns ordered by first appearance."""
        coding = onehot(np.array([5, 3, 5]))
        np.testing.assert_array_equal(
            coding.targets, [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]
        )
        assert coding.class_to_col == {5: 0, 3: 1}
        assert coding.scheme == "onehot"

    def test_column_order_many_classes(self):
        """First-appearance ordering holds beyond two classes."""
        coding = onehot(np.array([9, 2, 9, 7]))
        assert coding.class_to_col == {9: 0, 2: 1, 7: 2}

    def test_gram_is_class_counts(self):
        """Y'Y equals diag(class sizes). Oracle: closed form."""
        coding = onehot(np.array([1, 1, 1, 2, 2, 8]))
        np.testing.assert_array_equal(
            coding.targets.T @ coding.targets, np.diag([3.0, 2.0, 1.0])
        )

    def test_wider_target_dimension_pads_zeros(self):
        """m larger than the class count appends all-zero columns."""
        coding = onehot(np.array([4, 6]), m=4)
        np.testing.assert_array_equal(
            coding.targets, [[1, 0, 0, 0], [0, 1, 0, 0]]
        )

    def test_m_below_class_count_rejected(self):
        """Fewer target dimensions than classes cannot encode them."""
        with pytest.raises(ValueError, match="m="):
            onehot(np.array([1, 2, 3]), m=2)


class TestFda:
    def test_two_sample_class_value(self):
        """A class with two samples codes as 1/sqrt(2) = 0.70710678."""
        coding = fda(np.array([11, 11, 30]))
        np.testing.assert_allclose(
            coding.targets,
            [[INV_SQRT2, 0.0], [INV_SQRT2, 0.0], [0.0, 1.0]],
            rtol=0,
            atol=1e-15,
        )

    def test_columns_orthonormal(self):
        """Y'Y = identity: each column has unit norm, columns disjoint. Oracle: closed form."""
        coding = fda(np.array([0, 0, 0, 5, 5, 2, 2, 2, 2]))
        np.testing.assert_allclose(
            coding.targets.T @ coding.targets, np.eye(3), rtol=0, atol=1e-15
        )

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(0, 5), min_size=1, max_size=40))
    def test_orthonormal_property(self, labels):
        """Column orthonormality holds for arbitrary label multisets. Oracle: closed form."""
        coding = fda(np.array(labels))
        c = len(coding.class_to_col)
        np.testing.assert_allclose(
            coding.targets.T @ coding.targets, np.eye(c), rtol=0, atol=1e-12
        )


class TestRandomCoding:
    def test_deterministic_and_class_shared(self):
        """Same seed reproduces rows; samples of one class share one row."""
        ids = np.array([4, 9, 4, 9, 9])
        a = random_coding(ids, seed=3)
        b = random_coding(ids, seed=3)
        np.testing.assert_array_equal(a.targets, b.targets)
        np.testing.assert_array_equal(a.targets[0], a.targets[2])
        np.testing.assert_array_equal(a.targets[1], a.targets[3])
        assert not np.array_equal(a.targets[0], a.targets[1])

    def test_range_and_default_width(self):
        """Entries lie in [0, 1) and m defaults to the class count."""
        coding = random_coding(np.array([1, 2, 3, 1]), seed=0)
        assert coding.targets.shape == (4, 3)
        assert np.all(coding.targets >= 0.0) and np.all(coding.targets < 1.0)

    def test_seed_changes_rows(self):
        """Different seeds draw different class vectors."""
        ids = np.array([1, 2])
        a = random_coding(ids, seed=0)
        b = random_coding(ids, seed=1)
        assert not np.array_equal(a.targets, b.targets)

    def test_wider_target_dimension(self):
        """m above the class count draws full-width class vectors."""
        coding = random_coding(np.array([1, 2]), m=6, seed=0)
        assert coding.targets.shape == (2, 6)
        assert not np.any(coding.targets == 0.0)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.integers(0, 3), min_size=2, max_size=20), st.integers(0, 99))
    def test_rows_depend_only_on_class(self, labels, seed):
        """Row equality matches label equality across the sample axis. Oracle: definition."""
        ids = np.array(labels)
        coding = random_coding(ids, seed=seed)
        for i in range(len(labels)):
            for j in range(i + 1, len(labels)):
                same = np.array_equal(coding.targets[i], coding.targets[j])
                assert same == (labels[i] == labels[j])
