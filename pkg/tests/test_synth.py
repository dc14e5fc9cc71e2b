import dataclasses

import numpy as np
import pytest

from travirl.errors import ConfigError
from travirl.grid import Action, GridMdp, GridSpec, validate_trajectory
from travirl.models import RewardMaps
from travirl.ranking import aec, trajectory_energy
from travirl.solver import soft_value_iteration
from travirl.synth import (
    C0,
    DEMO_GAMMA,
    ENERGY_SCALE,
    WorldSpec,
    gen_dataset,
    gen_demo,
    gen_energy,
    gen_imu,
    gen_world,
    goal_bonus_field,
    tempered_policy,
)


class TestWorld:
    def test_flat_world_uniform_cost(self):
        spec = WorldSpec(rows=8, cols=8, seed=1, obstacle_density=0.0, roughness=0.0)
        features, gt_cost = gen_world(spec)
        np.testing.assert_allclose(gt_cost, C0, atol=1e-15)
        assert not features.variance.any()

    def test_obstacles_dominate_cost(self):
        spec = WorldSpec(rows=16, cols=16, seed=2, obstacle_density=0.2, roughness=0.5)
        _features, gt_cost = gen_world(spec)
        rng_world = np.random.default_rng(2)
        # regenerate the obstacle mask the same way gen_world drew it
        rng_world.standard_normal((16, 16))
        obstacles = rng_world.random((16, 16)) < 0.2
        assert obstacles.any() and not obstacles.all()
        assert gt_cost[obstacles].min() > gt_cost[~obstacles].max()

    def test_same_seed_identical(self):
        spec = WorldSpec(rows=10, cols=12, seed=7)
        f1, c1 = gen_world(spec)
        f2, c2 = gen_world(spec)
        assert f1.planes.tobytes() == f2.planes.tobytes()
        assert c1.tobytes() == c2.tobytes()

    def test_cost_positive_and_finite(self):
        spec = WorldSpec(rows=12, cols=9, seed=3, obstacle_density=0.15, roughness=0.8)
        features, gt_cost = gen_world(spec)
        assert np.isfinite(gt_cost).all() and (gt_cost > 0).all()
        assert (features.color >= 0).all() and (features.color <= 1).all()


class TestDemo:
    def test_valid_and_deterministic(self):
        spec = WorldSpec(rows=9, cols=9, seed=4)
        _f, gt_cost = gen_world(spec)
        mdp = GridMdp(GridSpec(rows=9, cols=9))
        t1 = gen_demo(spec, gt_cost, (4, 4), seed=11)
        t2 = gen_demo(spec, gt_cost, (4, 4), seed=11)
        assert validate_trajectory(mdp, t1) is None
        assert [s.cell for s, _ in t1.steps] == [s.cell for s, _ in t2.steps]

    def test_horizon_cap_forces_end(self):
        spec = WorldSpec(rows=5, cols=5, seed=5, beta=50.0)  # near-random walk
        _f, gt_cost = gen_world(spec)
        mdp = GridMdp(GridSpec(rows=5, cols=5))
        for seed in range(6):
            traj = gen_demo(spec, gt_cost, (2, 2), seed=seed)
            assert len(traj) <= 4 * (5 + 5)
            assert validate_trajectory(mdp, traj) is None

    def test_greedy_demo_takes_value_optimal_actions(self):
        """At temperature zero every chosen action maximizes the successor
        value, so no single-action deviation looks better under the true
        cost's soft values."""
        spec = WorldSpec(rows=9, cols=9, seed=6, beta=0.0)
        _f, gt_cost = gen_world(spec)
        mdp = GridMdp(GridSpec(rows=9, cols=9, gamma=DEMO_GAMMA))
        r_goal = goal_bonus_field(gt_cost, 13, away_from=(4, 4))
        sol = soft_value_iteration(mdp, RewardMaps(-gt_cost, r_goal))
        traj = gen_demo(spec, gt_cost, (4, 4), seed=13)
        scores = np.full((mdp.n_cells, mdp.n_actions), -np.inf)
        for a in mdp.move_actions:
            ok = mdp.move_ok[:, a]
            scores[ok, a] = mdp.gamma * sol.v[mdp.move_succ[ok, a]]
        scores[:, Action.END] = mdp.gamma * r_goal.reshape(-1)
        for t, (s, a) in enumerate(traj.steps):
            if t == len(traj.steps) - 1:
                continue  # a forced terminal END may be off-policy
            cell = mdp.cell_index(s.row, s.col)
            assert scores[cell, a] == pytest.approx(scores[cell].max(), abs=1e-12)

    def test_tempered_policy_limits(self):
        spec = WorldSpec(rows=4, cols=4, seed=8)
        _f, gt_cost = gen_world(spec)
        mdp = GridMdp(GridSpec(rows=4, cols=4, gamma=DEMO_GAMMA))
        r_goal = goal_bonus_field(gt_cost, 3)
        sol = soft_value_iteration(mdp, RewardMaps(-gt_cost, r_goal))
        greedy = tempered_policy(mdp, sol.v, r_goal, beta=0.0)
        assert ((greedy == 0.0) | (greedy == 1.0)).all()
        np.testing.assert_allclose(greedy.sum(axis=1), 1.0)
        hot = tempered_policy(mdp, sol.v, r_goal, beta=1e7)
        for cell in range(16):
            avail = mdp.move_ok[cell]
            np.testing.assert_allclose(hot[cell, avail], 1.0 / avail.sum(), atol=1e-4)
            assert not hot[cell, ~avail].any()


class TestImu:
    def test_flat_world_std(self):
        spec = WorldSpec(rows=8, cols=8, seed=9, roughness=0.0, obstacle_density=0.0)
        features, gt_cost = gen_world(spec)
        traj = gen_demo(spec, gt_cost, (4, 4), seed=2)
        imu = gen_imu(features, traj, 100, seed=3)
        measured = np.delete(imu.samples, 2, axis=1).std()  # skip gravity channel
        assert abs(measured - 0.05) / 0.05 < 0.2

    def test_gravity_channel(self):
        spec = WorldSpec(rows=8, cols=8, seed=10)
        features, gt_cost = gen_world(spec)
        traj = gen_demo(spec, gt_cost, (4, 4), seed=2)
        imu = gen_imu(features, traj, 400, seed=4)
        std = imu.samples[:, 2].std()
        assert abs(imu.samples[:, 2].mean() - 9.81) < 3 * std / np.sqrt(400) + 1e-6

    def test_deterministic(self):
        spec = WorldSpec(rows=8, cols=8, seed=11)
        features, gt_cost = gen_world(spec)
        traj = gen_demo(spec, gt_cost, (4, 4), seed=2)
        a = gen_imu(features, traj, 32, seed=5)
        b = gen_imu(features, traj, 32, seed=5)
        assert a.samples.tobytes() == b.samples.tobytes()


class TestEnergy:
    def test_aec_consistent_with_energy(self):
        spec = WorldSpec(rows=8, cols=8, seed=12)
        _f, gt_cost = gen_world(spec)
        traj = gen_demo(spec, gt_cost, (4, 4), seed=6)
        log, label = gen_energy(gt_cost, traj, noise_std=0.3, seed=7)
        assert label == aec(trajectory_energy(log), len(traj))

    def test_uniform_world_constant_aec(self):
        spec = WorldSpec(rows=8, cols=8, seed=13, roughness=0.0, obstacle_density=0.0)
        _f, gt_cost = gen_world(spec)
        for seed in range(4):
            traj = gen_demo(spec, gt_cost, (4, 4), seed=seed)
            _log, label = gen_energy(gt_cost, traj, noise_std=0.0, seed=seed)
            assert label == pytest.approx(ENERGY_SCALE * C0, rel=1e-12)

    def test_costlier_cells_mean_higher_aec(self):
        """Noise-free labels order trajectories by mean crossed cost."""
        spec = WorldSpec(rows=10, cols=10, seed=14, obstacle_density=0.2, roughness=0.6)
        _f, gt_cost = gen_world(spec)
        labels = []
        means = []
        sloppy = dataclasses.replace(spec, beta=3.0)
        for seed in range(8):
            traj = gen_demo(sloppy, gt_cost, (5, 5), seed=seed)
            _log, label = gen_energy(gt_cost, traj, noise_std=0.0, seed=seed)
            labels.append(label)
            means.append(np.mean([gt_cost[r, c] for r, c in traj.cells()]))
        order = np.argsort(means)
        assert (np.diff(np.array(labels)[order]) >= -1e-12).all()


class TestDataset:
    def test_split_counts(self):
        spec = WorldSpec(rows=6, cols=6, seed=15)
        samples = gen_dataset(spec, count=10, split_ratio=0.7)
        assert sum(s.split == "train" for s in samples) == 7
        assert sum(s.split == "test" for s in samples) == 3

    def test_deterministic(self):
        spec = WorldSpec(rows=6, cols=6, seed=16)
        a = gen_dataset(spec, 4)
        b = gen_dataset(spec, 4)
        for s1, s2 in zip(a, b):
            assert s1.features.planes.tobytes() == s2.features.planes.tobytes()
            assert s1.trajectory.aec == s2.trajectory.aec
            assert [x[0].cell for x in s1.trajectory.steps] == [x[0].cell for x in s2.trajectory.steps]

    def test_samples_valid(self):
        spec = WorldSpec(rows=6, cols=6, seed=17, beta=1.0, energy_noise=0.01)
        samples = gen_dataset(spec, 6)
        mdp = GridMdp(GridSpec(rows=6, cols=6))
        for s in samples:
            assert validate_trajectory(mdp, s.trajectory) is None
            assert np.isfinite(s.trajectory.aec)
            assert s.trajectory.aec >= 0

    def test_too_few(self):
        with pytest.raises(ConfigError):
            gen_dataset(WorldSpec(rows=4, cols=4, seed=1), count=1)
