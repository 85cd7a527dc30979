import dataclasses
import math

import numpy as np
import pytest

from tradelab import (
    NodeId,
    NodePhase,
    Phase,
    ScaleLadder,
    TreeParams,
    UnknownLConfig,
    UnknownLipschitzPolicy,
    capped_grid,
    child_containing,
)


def make_policy(d=1, T=16, eps=0.25):
    return UnknownLipschitzPolicy(UnknownLConfig(params=TreeParams.for_horizon(d, T), eps=eps))


def post(policy, x, seed=0):
    return policy.post_price(np.atleast_1d(np.asarray(x, dtype=float)),
                             np.random.default_rng(seed))


def mark_path(policy, x, pbar, depth):
    node = NodeId.root(policy.tree.params.d)
    policy.tree.mark(node, pbar)
    for _ in range(depth):
        node = child_containing(node, np.atleast_1d(np.asarray(x)))
        policy.tree.mark(node, pbar)
    return node


class TestScaleLadder:
    def test_default_base_gives_level_many_scales(self):
        for level in range(1, 8):
            ladder = ScaleLadder.for_level(level)
            assert ladder.j_bar == level
            assert ladder.scales == tuple(0.5 * 2.0**j for j in range(level + 1))

    def test_top_scale_window_covers_unit_interval(self):
        # Top scale times 2^-(l-1) reaches 1, so the clamped price window
        # around any parent price in [0, 1] is the whole interval.
        for level in range(1, 10):
            ladder = ScaleLadder.for_level(level)
            assert ladder.scales[-1] * 2.0 ** -(level - 1) >= 1.0

    def test_coverage_of_true_constants(self):
        # For any true constant L up to the top scale, some rung dominates it.
        for level in range(1, 8):
            ladder = ScaleLadder.for_level(level)
            for L in (0.3, 0.5, 1.0, 1.7, 2.0 ** (level - 1)):
                if L <= ladder.scales[-1]:
                    assert any(s >= L for s in ladder.scales)

    def test_rejects_level_zero(self):
        with pytest.raises(ValueError):
            ScaleLadder.for_level(0)


class TestConfig:
    def test_no_smoothness_input_anywhere(self):
        # Structural: the config carries no Lipschitz constant field.
        names = {f.name for f in dataclasses.fields(UnknownLConfig)}
        assert "L" not in names
        assert names == {"params", "L0", "eps"}

    def test_default_grid_step(self):
        cfg = UnknownLConfig(params=TreeParams.for_horizon(2, 10**4))
        assert cfg.grid_step == pytest.approx((10**4) ** -0.5)


class TestGeoReduce:
    def test_smallest_scale_first(self):
        # level 2, parent price 0.5, scale 0.5: price 0.5 - 0.5*0.5 = 0.25.
        policy = make_policy(d=1, T=16)
        mark_path(policy, 0.1, 0.5, depth=1)
        price, node, phase = post(policy, 0.1)
        assert node.level == 2 and phase is Phase.REDUCE
        assert price == 0.25

    def test_scale_two_clamps_high_price(self):
        # level 2, scale 2 posting high: 0.5 + 2*0.5 = 1.5 clamps to 1.
        policy = make_policy(d=1, T=16)
        mark_path(policy, 0.1, 0.5, depth=1)
        seen = []
        for _ in range(8):
            price, node, phase = post(policy, 0.1)
            if phase is not Phase.REDUCE:
                break
            seen.append(price)
            policy.observe(node, phase, price, accepted=False)
        sub = policy.tree.state(node).substate
        # Scales at level 2: (0.5, 1, 2); windows around 0.5 with half 0.5.
        assert sub.reduce.prices_low == (0.25, 0.0, 0.0)
        assert sub.reduce.prices_high == (0.75, 1.0, 1.0)
        assert seen[:6] == [0.25, 0.75, 0.0, 1.0, 0.0, 1.0]

    def test_rejections_to_completion_is_two_per_scale(self):
        # 2 * (j_bar + 1) = 2 * (level + 1) rejections finish calibration.
        for depth, level in ((1, 2), (2, 3)):
            policy = make_policy(d=1, T=256)
            mark_path(policy, 0.1, 0.5, depth=depth)
            rejections = 0
            for _ in range(50):
                price, node, phase = post(policy, 0.1)
                if phase is not Phase.REDUCE:
                    break
                policy.observe(node, phase, price, accepted=False)
                rejections += 1
            assert node.level == level
            assert rejections == 2 * (level + 1)

    def test_acceptance_stalls_current_scale(self):
        policy = make_policy(d=1, T=16)
        mark_path(policy, 0.1, 0.5, depth=1)
        price, node, phase = post(policy, 0.1)
        policy.observe(node, phase, price, accepted=True)
        price2, _, phase2 = post(policy, 0.1)
        assert (price2, phase2) == (price, phase)


class TestGeoGuess:
    def drive_to_guess(self, policy, x=0.1):
        """Mark a path to level 1, then reject until level 2 starts guessing."""
        mark_path(policy, x, 0.5, depth=1)
        for _ in range(50):
            price, node, phase = post(policy, x)
            policy.observe(node, phase, price, accepted=False)
            if phase is not Phase.REDUCE:
                assert node.level == 2
                return node
        raise AssertionError("never reached the guessing phase")

    def test_small_clock_uses_smallest_grid(self):
        policy = make_policy(d=1, T=16, eps=0.01)
        node = self.drive_to_guess(policy)
        sub = policy.tree.state(node).substate
        assert sub.guess.tau == 1  # one draw made by drive_to_guess's last post
        assert sub.guess.scale_index() == 0  # clamp: no grid fits yet

    def test_scale_index_matches_definition(self):
        policy = make_policy(d=1, T=16, eps=0.01)
        node = self.drive_to_guess(policy)
        sub = policy.tree.state(node).substate
        sizes = [len(g) for g in sub.guess.grids]
        for tau in (0, 1, min(sizes), max(sizes), max(sizes) + 5):
            sub.guess.tau = tau
            fitting = [j for j, s in enumerate(sizes) if s <= tau]
            expected = max(fitting) if fitting else 0
            assert sub.guess.scale_index() == expected

    def test_grids_follow_scale_windows(self):
        policy = make_policy(d=1, T=16, eps=0.05)
        node = self.drive_to_guess(policy)
        sub = policy.tree.state(node).substate
        half = 2.0 ** (1 - node.level)
        for scale, grid in zip(sub.ladder.scales, sub.guess.grids):
            ref = capped_grid(0.5 - scale * half, 0.5 + scale * half, 0.05)
            assert grid.points == ref.points

    def test_tau_increments_per_posted_price(self):
        policy = make_policy(d=1, T=16, eps=0.05)
        node = self.drive_to_guess(policy)
        sub = policy.tree.state(node).substate
        start = sub.guess.tau
        for i in range(5):
            price, node, phase = post(policy, 0.1, seed=i)
            assert phase is Phase.GUESS
            policy.observe(node, phase, price, accepted=False)
        assert sub.guess.tau == start + 5

    def test_acceptance_marks_and_terminates(self):
        policy = make_policy(d=1, T=16, eps=0.05)
        node = self.drive_to_guess(policy)
        price, node, phase = post(policy, 0.1, seed=9)
        policy.observe(node, phase, price, accepted=True)
        st = policy.tree.state(node)
        assert st.phase is NodePhase.MARKED
        assert st.marking_price == price


class TestRootBootstrap:
    def test_root_guesses_over_full_grid(self):
        policy = make_policy(eps=0.25)
        price, node, phase = post(policy, 0.3)
        assert node == NodeId.root(1)
        assert phase is Phase.GUESS
        assert price in capped_grid(0.0, 1.0, 0.25).points

    def test_marked_leaf_replay(self):
        policy = make_policy(d=1, T=4, eps=0.25)  # H = 2
        leaf = mark_path(policy, 0.9, 0.41, depth=2)
        price, got, phase = post(policy, 0.9)
        assert phase is Phase.LEAF and price == 0.41 and got == leaf


class TestProtocolErrors:
    def test_mismatched_feedback_rejected(self):
        policy = make_policy()
        price, node, phase = post(policy, 0.3)
        with pytest.raises(RuntimeError):
            policy.observe(node, phase, price + 0.125, accepted=False)

    def test_determinism(self):
        def stream(seed):
            policy = make_policy(d=2, T=64, eps=0.05)
            rng = np.random.default_rng(seed)
            ctx = np.random.default_rng(42).random((200, 2))
            out = []
            for x in ctx:
                price, node, phase = policy.post_price(x, rng)
                policy.observe(node, phase, price, accepted=0.45 <= price <= 0.55)
                out.append(price)
            return out

        assert stream(5) == stream(5)
