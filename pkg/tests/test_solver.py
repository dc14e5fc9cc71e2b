import numpy as np
import pytest

from oracles import (
    capped_loglik,
    dense_propagation,
    enumerate_paths,
    mc_visitation,
    soft_value_oracle,
)
from travirl.errors import GridError, ShapeError
from travirl.grid import Action, GridMdp, GridSpec, State
from travirl.models import RewardMaps
from travirl.solver import (
    SvfPair,
    demo_svf,
    medirl_grad,
    policy_propagation,
    soft_value_iteration,
)
from test_grid import make_traj


def oracle_mdp(rows, cols):
    return GridMdp(GridSpec(rows=rows, cols=cols, gamma=1.0, allow_gamma_one=True))


class TestSoftValues:
    def test_single_cell_closed_form(self):
        mdp = GridMdp(GridSpec(rows=1, cols=1, gamma=0.5))
        maps = RewardMaps(np.array([[-1.0]]), np.array([[2.0]]))
        sol = soft_value_iteration(mdp, maps, sweeps=3)
        assert sol.v[0] == pytest.approx(-1.0 + 0.5 * 2.0, abs=1e-12)

    def test_two_cell_log_two(self):
        # zero rewards, one sweep: stop now, or step right and stop
        mdp = oracle_mdp(1, 2)
        maps = RewardMaps(np.zeros((1, 2)), np.zeros((1, 2)))
        sol = soft_value_iteration(mdp, maps, sweeps=1, tol=0.0)
        assert sol.v[0] == pytest.approx(np.log(2.0), abs=1e-12)
        assert sol.sweeps == 1

    def test_uniform_policy_on_equal_scores(self):
        # gamma 0 zeroes every successor score, so each available action is
        # equally likely: 1/3 at a corner, 1/5 in the interior
        rng = np.random.default_rng(1)
        mdp = GridMdp(GridSpec(rows=3, cols=3, gamma=0.0))
        maps = RewardMaps(rng.normal(size=(3, 3)), rng.normal(size=(3, 3)))
        sol = soft_value_iteration(mdp, maps, sweeps=2)
        for cell in range(9):
            row = sol.policy[cell]
            avail = row > 0
            np.testing.assert_allclose(row[avail], 1.0 / avail.sum(), atol=1e-12)

    def test_policy_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        mdp = GridMdp(GridSpec(rows=4, cols=5, gamma=0.9))
        maps = RewardMaps(rng.uniform(-2, 2, (4, 5)), rng.uniform(-2, 2, (4, 5)))
        sol = soft_value_iteration(mdp, maps)
        np.testing.assert_allclose(sol.policy.sum(axis=1), 1.0, atol=1e-12)

    @pytest.mark.parametrize("rows,cols", [(1, 1), (1, 3), (2, 2), (3, 3)])
    def test_enumeration_oracle_equivalence(self, rows, cols):
        """At gamma 1 and K sweeps, V equals the log-sum-exp of returns over
        all trajectories with at most K+1 path states."""
        mdp = oracle_mdp(rows, cols)
        rng = np.random.default_rng(rows * 10 + cols)
        for k in (1, 3, 5):
            r_p = rng.uniform(-3, 3, (rows, cols))
            r_g = rng.uniform(-3, 3, (rows, cols))
            sol = soft_value_iteration(mdp, RewardMaps(r_p, r_g), sweeps=k, tol=0.0)
            expected = soft_value_oracle(mdp, r_p, r_g, 1.0, k + 1)
            np.testing.assert_allclose(sol.v, expected, atol=1e-9)

    def test_logsumexp_stability_large_rewards(self):
        mdp = GridMdp(GridSpec(rows=3, cols=3, gamma=0.9))
        maps = RewardMaps(np.full((3, 3), 1e3), np.full((3, 3), -1e3))
        sol = soft_value_iteration(mdp, maps, sweeps=40)
        assert np.isfinite(sol.v).all()
        np.testing.assert_allclose(sol.policy.sum(axis=1), 1.0, atol=1e-12)

    def test_goal_reward_monotonicity(self):
        """Raising one goal reward cannot lower the stop probability there."""
        rng = np.random.default_rng(5)
        mdp = GridMdp(GridSpec(rows=3, cols=3, gamma=0.9))
        r_p = rng.uniform(-2, 0, (3, 3))
        r_g = rng.uniform(-1, 1, (3, 3))
        sol = soft_value_iteration(mdp, RewardMaps(r_p, r_g))
        bumped = r_g.copy()
        bumped[1, 1] += 0.7
        sol2 = soft_value_iteration(mdp, RewardMaps(r_p, bumped))
        cell = mdp.cell_index(1, 1)
        assert sol2.policy[cell, Action.END] >= sol.policy[cell, Action.END] - 1e-12


class TestDemoSvf:
    def test_unit_counts_at_gamma_one(self):
        mdp = oracle_mdp(1, 2)
        traj = make_traj([(0, 0), (0, 1)])
        dp, dg = demo_svf(mdp, traj)
        assert dp.tolist() == [1.0, 1.0]
        assert dg.tolist() == [0.0, 1.0]

    def test_geometric_weights(self):
        mdp = GridMdp(GridSpec(rows=1, cols=2, gamma=0.9))
        traj = make_traj([(0, 0), (0, 1)])
        dp, dg = demo_svf(mdp, traj, discounting=True)
        np.testing.assert_allclose(dp, [1.0, 0.9], atol=1e-15)
        np.testing.assert_allclose(dg, [0.0, 0.81], atol=1e-15)

    def test_discounting_off_gives_plain_counts(self):
        mdp = GridMdp(GridSpec(rows=1, cols=2, gamma=0.9))
        traj = make_traj([(0, 0), (0, 1)])
        dp, dg = demo_svf(mdp, traj, discounting=False)
        assert dp.tolist() == [1.0, 1.0] and dg.tolist() == [0.0, 1.0]

    def test_revisit_accumulates(self):
        mdp = oracle_mdp(1, 2)
        traj = make_traj([(0, 0), (0, 1), (0, 0)])
        dp, _ = demo_svf(mdp, traj)
        assert dp[0] == 2.0

    def test_invalid_trajectory_rejected(self):
        mdp = oracle_mdp(2, 2)
        traj = make_traj([(0, 0), (0, 1)])
        traj.terminal = State.goal(1, 1)
        with pytest.raises(GridError):
            demo_svf(mdp, traj)


class TestPropagation:
    def test_immediate_absorption(self):
        mdp = oracle_mdp(2, 2)
        policy = np.zeros((4, 5))
        policy[:, Action.END] = 1.0
        start = np.zeros(4)
        start[0] = 1.0
        ep, eg = policy_propagation(mdp, policy, start, horizon=10)
        assert ep.tolist() == [1.0, 0.0, 0.0, 0.0]
        assert eg.tolist() == [1.0, 0.0, 0.0, 0.0]

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(3)
        for rows, cols in [(1, 2), (2, 2), (3, 3)]:
            mdp = oracle_mdp(rows, cols)
            maps = RewardMaps(rng.uniform(-3, -1, (rows, cols)), rng.uniform(-1, 0, (rows, cols)))
            sol = soft_value_iteration(mdp, maps, sweeps=60, tol=0.0)
            start = np.zeros(mdp.n_cells)
            start[mdp.n_cells // 2] = 1.0
            ep, eg = policy_propagation(mdp, sol.policy, start, horizon=40, mass_tol=0.0)
            oep, oeg = dense_propagation(mdp, sol.policy, start, 40, 1.0)
            np.testing.assert_allclose(ep, oep, atol=1e-12)
            np.testing.assert_allclose(eg, oeg, atol=1e-12)

    def test_mass_conservation_per_step(self):
        rng = np.random.default_rng(4)
        mdp = oracle_mdp(3, 3)
        maps = RewardMaps(rng.uniform(-2, 0, (3, 3)), rng.uniform(-1, 1, (3, 3)))
        sol = soft_value_iteration(mdp, maps, sweeps=30)
        start = np.full(9, 1.0 / 9.0)
        trace = []
        ep, eg = policy_propagation(mdp, sol.policy, start, horizon=60, mass_tol=0.0, mass_trace=trace)
        for _t, path_mass, goal_mass in trace:
            assert path_mass + goal_mass == pytest.approx(1.0, abs=1e-9)
        assert eg.sum() <= 1.0 + 1e-9

    def test_monte_carlo_consistency(self):
        """Propagated visitation within 3 standard errors of 1e4 rollouts."""
        mdp = oracle_mdp(2, 2)
        rng = np.random.default_rng(6)
        maps = RewardMaps(rng.uniform(-2.5, -1.5, (2, 2)), rng.uniform(-1, 1, (2, 2)))
        sol = soft_value_iteration(mdp, maps, sweeps=60)
        start_cell = 0
        start = np.zeros(4)
        start[start_cell] = 1.0
        ep, eg = policy_propagation(mdp, sol.policy, start, horizon=400, mass_tol=1e-14)
        n = 10_000
        path_counts, goal_counts = mc_visitation(mdp, sol.policy, start_cell, n, seed=123)
        for expected, counts in ((ep, path_counts), (eg, goal_counts)):
            mean = counts.mean(axis=0)
            se = counts.std(axis=0, ddof=1) / np.sqrt(n)
            assert (np.abs(expected - mean) <= 3.0 * se + 1e-12).all()

    def test_unnormalized_start_rejected(self):
        mdp = oracle_mdp(2, 2)
        policy = np.zeros((4, 5))
        policy[:, Action.END] = 1.0
        with pytest.raises(GridError):
            policy_propagation(mdp, policy, np.full(4, 0.5), horizon=5)


class TestMedirlGrad:
    def test_stationary_at_equal_svf(self):
        pair = SvfPair(np.ones(4), np.ones(4), np.ones(4), np.ones(4))
        gp, gg = medirl_grad(pair)
        assert not gp.any() and not gg.any()

    def test_elementwise_difference(self):
        demo = np.zeros(4)
        demo[0] = 1.0
        expected = np.zeros(4)
        expected[0] = 0.25
        gp, _ = medirl_grad(SvfPair(demo, np.zeros(4), expected, np.zeros(4)))
        assert gp[0] == pytest.approx(0.75)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            medirl_grad(SvfPair(np.zeros(4), np.zeros(4), np.zeros(5), np.zeros(4)))

    def test_matches_fd_of_enumerated_loglik(self):
        """On a 2x2 grid at gamma 1 with a converged solve, demo-minus-
        expected visitation equals the finite-difference gradient of the
        capped-enumeration log-likelihood, entry by entry."""
        mdp = oracle_mdp(2, 2)
        rng = np.random.default_rng(7)
        r_p = rng.uniform(-3.0, -2.0, (2, 2))
        r_g = rng.uniform(-1.0, 0.0, (2, 2))
        traj = make_traj([(0, 0), (0, 1), (1, 1)])

        sol = soft_value_iteration(mdp, RewardMaps(r_p, r_g), sweeps=80, tol=0.0)
        dp, dg = demo_svf(mdp, traj)
        start = np.zeros(4)
        start[0] = 1.0
        ep, eg = policy_propagation(mdp, sol.policy, start, horizon=300, mass_tol=1e-15)
        gp, gg = medirl_grad(SvfPair(dp, dg, ep, eg))

        cap = 16
        visits, goals = enumerate_paths(mdp, 0, cap)
        demo_visits = dp  # gamma = 1: plain counts
        demo_goal = dg
        h = 1e-5
        for i in range(4):
            for field, grad in ((r_p, gp), (r_g, gg)):
                flat = field.reshape(-1)
                orig = flat[i]
                flat[i] = orig + h
                hi = capped_loglik(visits, goals, r_p.reshape(-1), r_g.reshape(-1), demo_visits, demo_goal)
                flat[i] = orig - h
                lo = capped_loglik(visits, goals, r_p.reshape(-1), r_g.reshape(-1), demo_visits, demo_goal)
                flat[i] = orig
                assert grad[i] == pytest.approx((hi - lo) / (2 * h), abs=1e-6)
