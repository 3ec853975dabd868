"""Exact incremental model updates, the chunk/per-sample policy, the kernel
lift, and checkpointing.

Expected values: the 1/1.1 -> 1/5.1 scalar walk-through is hand-computed
from the inverse-update formula; batch-refit comparisons use fit_linear /
numpy inverses as independent oracles; layout facts are asserted directly.
"""

from __future__ import annotations

import numpy as np
import pytest

from irs.coding import onehot
from irs.incremental import (
    IncrementalState,
    init_state,
    kernel_lift,
    load_state,
    prefers_per_sample,
    save_state,
    update,
    update_auto,
    update_with_ids,
)
from irs.regression import fit_linear, rbf_kernel


def batch_projection(X, ids, lam):
    return fit_linear(X, onehot(ids), lam=lam).projection


class TestScalarWalkthrough:
    def test_init_inverse(self):
        """One scalar sample of value 1 at lambda 0.1: inverse is 1/1.1."""
        state = init_state(np.array([[1.0]]), np.array([[1.0]]), lam=0.1)
        np.testing.assert_allclose(state.gram_inv, [[1.0 / 1.1]], rtol=0, atol=1e-15)

    def test_rank_one_update(self):
        """Absorbing value 2 moves the inverse to 1/5.1 = 0.19608."""
        state = init_state(np.array([[1.0]]), np.array([[1.0]]), lam=0.1)
        new = update(state, np.array([[2.0]]), np.array([[1.0]]))
        np.testing.assert_allclose(new.gram_inv, [[1.0 / 5.1]], rtol=0, atol=1e-15)
        assert round(float(new.gram_inv[0, 0]), 5) == 0.19608


class TestAgainstBatch:
    def test_init_matches_batch_fit(self):
        """Initial state equals the closed-form fit and the explicit inverse. Oracle: fit_linear / numpy inv."""
        rng = np.random.default_rng(0)
        X = rng.standard_normal((12, 10))
        ids = np.repeat(np.arange(5), 2)
        state = init_state(X, onehot(ids), lam=0.1)
        np.testing.assert_allclose(
            state.projection, batch_projection(X, ids, 0.1), rtol=1e-10, atol=1e-12
        )
        np.testing.assert_allclose(
            state.gram_inv,
            np.linalg.inv(X @ X.T + 0.1 * np.eye(12)),
            rtol=1e-10,
            atol=1e-12,
        )
        assert state.class_to_col == {j: j for j in range(5)}
        assert state.n_seen == 10

    def test_update_sequence_matches_batch_fit(self):
        """Mixed chunk sizes with new and repeated classes track the batch fit. Oracle: fit_linear oracle."""
        rng = np.random.default_rng(1)
        d = 30
        all_ids = []
        blocks = []
        for ident in range(5):
            blocks.append(rng.standard_normal((d, 2)))
            all_ids += [ident, ident]
        X0 = np.hstack(blocks)
        state = init_state(X0, onehot(np.array(all_ids)), lam=0.1)

        batches = [
            (rng.standard_normal((d, 2)), [5, 5]),     # one new class
            (rng.standard_normal((d, 3)), [6, 7, 6]),  # two new classes
            (rng.standard_normal((d, 1)), [2]),        # repeat of an old class
            (rng.standard_normal((d, 4)), [8, 8, 0, 9]),
        ]
        for Xp, ids in batches:
            state = update_with_ids(state, Xp, np.array(ids))
            all_ids += ids
            X0 = np.hstack([X0, Xp])

        expected = batch_projection(X0, np.array(all_ids), 0.1)
        rel = np.linalg.norm(state.projection - expected) / np.linalg.norm(expected)
        assert rel < 1e-8
        assert state.class_to_col == {j: j for j in range(10)}

        gram = X0 @ X0.T + 0.1 * np.eye(d)
        np.testing.assert_allclose(
            state.gram_inv @ gram, np.eye(d), rtol=0, atol=1e-8
        )

    def test_inverse_stays_symmetric(self):
        """Each update resymmetrizes, so the stored inverse is exactly symmetric."""
        rng = np.random.default_rng(2)
        state = init_state(
            rng.standard_normal((9, 4)), onehot(np.array([0, 0, 1, 1])), lam=0.1
        )
        for _ in range(5):
            state = update_with_ids(
                state, rng.standard_normal((9, 2)), np.array([2, 2])
            )
        assert np.array_equal(state.gram_inv, state.gram_inv.T)


class TestColumnGrowth:
    def test_new_classes_append_columns(self):
        """c' new classes widen the projection by c' columns, appended last."""
        rng = np.random.default_rng(3)
        state = init_state(
            rng.standard_normal((6, 2)), onehot(np.array([10, 20])), lam=0.1
        )
        assert state.projection.shape == (6, 2)
        new = update_with_ids(state, rng.standard_normal((6, 2)), np.array([30, 40]))
        assert new.projection.shape == (6, 4)
        assert new.class_to_col == {10: 0, 20: 1, 30: 2, 40: 3}

    def test_empty_batch_is_noop(self):
        """An empty update returns the state unchanged."""
        rng = np.random.default_rng(4)
        state = init_state(
            rng.standard_normal((5, 2)), onehot(np.array([0, 1])), lam=0.1
        )
        new = update(state, np.zeros((5, 0)), np.zeros((0, 2)))
        assert new is state

    def test_target_width_must_match_registry(self):
        """Target rows narrower than the grown registry are rejected."""
        rng = np.random.default_rng(5)
        state = init_state(
            rng.standard_normal((5, 2)), onehot(np.array([0, 1])), lam=0.1
        )
        with pytest.raises(ValueError, match="width"):
            update(state, rng.standard_normal((5, 1)), np.array([[1.0]]))


class TestPathPolicy:
    def test_policy_thresholds(self):
        """Per-sample path iff n' <= d/50 and n' <= 32."""
        assert prefers_per_sample(1, 50)
        assert not prefers_per_sample(1, 49)
        assert prefers_per_sample(4, 200)
        assert not prefers_per_sample(5, 200)
        assert prefers_per_sample(32, 1600)
        assert not prefers_per_sample(33, 1650)

    def test_paths_agree_numerically(self):
        """Chunk and per-sample paths give the same state within 1e-8. Oracle: path equivalence."""
        rng = np.random.default_rng(6)
        d = 120
        X0 = rng.standard_normal((d, 8))
        state = init_state(X0, onehot(np.repeat(np.arange(4), 2)), lam=0.1)
        Xp = rng.standard_normal((d, 2))
        Yp = onehot(np.array([4, 4])).targets  # widths aligned below
        Yp = np.hstack([np.zeros((2, 4)), Yp])
        chunk = update(state, Xp, Yp, new_classes=(4,))
        auto = update_auto(state, Xp, Yp, new_classes=(4,))  # 2 <= 120/50 is false -> chunk
        per_sample = update_auto(
            IncrementalState(
                gram_inv=state.gram_inv.copy(),
                projection=state.projection.copy(),
                class_to_col=dict(state.class_to_col),
                lam=state.lam,
                n_seen=state.n_seen,
                update_count=state.update_count,
            ),
            Xp,
            Yp,
            new_classes=(4,),
            force_per_sample=True,
        )
        np.testing.assert_allclose(auto.gram_inv, chunk.gram_inv, rtol=0, atol=1e-12)
        np.testing.assert_allclose(
            per_sample.gram_inv, chunk.gram_inv, rtol=0, atol=1e-8
        )
        np.testing.assert_allclose(
            per_sample.projection, chunk.projection, rtol=0, atol=1e-8
        )

    def test_single_sample_identical_outcome(self):
        """n' = 1: both paths reduce to the same rank-one formula. Oracle: path equivalence."""
        rng = np.random.default_rng(7)
        d = 60
        state = init_state(
            rng.standard_normal((d, 4)), onehot(np.array([0, 0, 1, 1])), lam=0.1
        )
        Xp = rng.standard_normal((d, 1))
        Yp = np.array([[0.0, 1.0]])
        a = update(state, Xp, Yp)
        b = update_auto(state, Xp, Yp, force_per_sample=True)
        np.testing.assert_allclose(a.gram_inv, b.gram_inv, rtol=0, atol=1e-10)
        np.testing.assert_allclose(a.projection, b.projection, rtol=0, atol=1e-10)


class TestKernelLift:
    def test_anchor_self_similarity(self):
        """Lifting an anchor puts value 1 at its own position."""
        rng = np.random.default_rng(8)
        anchors = rng.standard_normal((5, 4))
        lift = kernel_lift(anchors, bandwidth=1.0)
        lifted = lift(anchors)
        np.testing.assert_allclose(np.diag(lifted), np.ones(4), rtol=0, atol=1e-14)

    def test_lift_values_are_kernel_rows(self):
        """The lift of x is exactly k(anchor_i, x) for each anchor. Oracle: rbf_kernel."""
        rng = np.random.default_rng(9)
        anchors = rng.standard_normal((3, 5))
        X = rng.standard_normal((3, 7))
        lift = kernel_lift(anchors, bandwidth=0.8)
        np.testing.assert_allclose(
            lift(X), rbf_kernel(anchors, X, bandwidth=0.8), rtol=0, atol=1e-15
        )

    def test_incremental_in_lifted_space_matches_batch(self):
        """Growing a model on lifted features tracks the batch fit on them. Oracle: fit_linear oracle."""
        rng = np.random.default_rng(10)
        anchors = rng.standard_normal((6, 10))
        lift = kernel_lift(anchors, bandwidth="median")
        X_all = rng.standard_normal((6, 14))
        ids_all = np.repeat(np.arange(7), 2)
        lifted = lift(X_all)

        state = init_state(lifted[:, :6], onehot(ids_all[:6]), lam=0.1)
        for start in range(6, 14, 2):
            state = update_with_ids(
                state, lifted[:, start : start + 2], ids_all[start : start + 2]
            )
        expected = batch_projection(lifted, ids_all, 0.1)
        rel = np.linalg.norm(state.projection - expected) / np.linalg.norm(expected)
        assert rel < 1e-8


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        """Checkpointed state restores every payload bit and the registry. Oracle: identity."""
        rng = np.random.default_rng(11)
        state = init_state(
            rng.standard_normal((7, 4)), onehot(np.array([3, 3, 9, 9])), lam=0.1
        )
        state = update_with_ids(state, rng.standard_normal((7, 2)), np.array([4, 4]))
        path = tmp_path / "state.irs"
        save_state(state, path)
        back = load_state(path)
        assert np.array_equal(
            back.gram_inv.view(np.uint64), state.gram_inv.view(np.uint64)
        )
        assert np.array_equal(
            back.projection.view(np.uint64), state.projection.view(np.uint64)
        )
        assert back.class_to_col == state.class_to_col
        assert back.lam == state.lam
        assert back.n_seen == state.n_seen
        assert back.update_count == state.update_count

    def test_resume_reproduces_updates_bitwise(self, tmp_path):
        """The same update on saved-and-loaded state is bitwise identical. Oracle: identity."""
        rng = np.random.default_rng(12)
        state = init_state(
            rng.standard_normal((6, 4)), onehot(np.array([0, 0, 1, 1])), lam=0.1
        )
        path = tmp_path / "state.irs"
        save_state(state, path)
        Xp = rng.standard_normal((6, 2))
        a = update_with_ids(state, Xp, np.array([2, 2]))
        b = update_with_ids(load_state(path), Xp, np.array([2, 2]))
        assert np.array_equal(a.gram_inv.view(np.uint64), b.gram_inv.view(np.uint64))
        assert np.array_equal(
            a.projection.view(np.uint64), b.projection.view(np.uint64)
        )


class TestValidation:
    def test_lambda_must_be_positive(self):
        """Incremental updates require an invertible regularized Gram matrix."""
        with pytest.raises(ValueError, match="lambda"):
            init_state(np.eye(2), np.eye(2), lam=0.0)

    def test_feature_dimension_mismatch(self):
        """Update samples must live in the model's feature space."""
        state = init_state(np.eye(3), np.eye(3), lam=0.1)
        with pytest.raises(ValueError, match="dimension"):
            update(state, np.ones((2, 1)), np.ones((1, 3)))
