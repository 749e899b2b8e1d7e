import numpy as np
import pytest

from conftest import joint, random_joint
from mvib.anneal import (
    AnnealConfig,
    BifurcationTree,
    _eps_rng,
    anneal,
    detect_split,
    duplicate_and_perturb,
    info_curve_point,
    merge_pair,
    pair_shares,
    single_cluster_state,
)
from mvib.errors import ArgumentError, CapacityError
from mvib.problem import preset_original_ib, preset_parallel, random_state, state_from_tables
from mvib.solver import SolverConfig, lagrangian_l1


class TestSurgery:
    def test_duplicate_mass_is_exact(self, rng):
        prob = preset_original_ib(random_joint(rng, (6, 4)), 3)
        s = random_state(prob, seed=1)
        new, pairs = duplicate_and_perturb(s, 0, 0.7, np.random.default_rng(0))
        assert new.cardinalities == (6,)
        old = s.tables[0]
        for a, b in pairs:
            assert np.array_equal(new.tables[0][:, a] + new.tables[0][:, b], old[:, a])

    def test_eps_stream_reproduced(self, rng):
        prob = preset_original_ib(random_joint(rng, (5, 3)), 2)
        s = random_state(prob, seed=2)
        alpha = 0.4
        new, pairs = duplicate_and_perturb(s, 0, alpha, _eps_rng(7, 3, 0))
        eps = _eps_rng(7, 3, 0).uniform(-0.5, 0.5, size=(5, 2))
        share = 0.5 + alpha * eps
        for i, (a, b) in enumerate(pairs):
            got = new.tables[0][:, a] / s.tables[0][:, a]
            assert np.allclose(got, share[:, i], atol=1e-14)
        # a different key gives a different stream
        other, _ = duplicate_and_perturb(s, 0, alpha, _eps_rng(7, 4, 0))
        assert not np.allclose(other.tables[0], new.tables[0])

    def test_partial_duplication_and_cap(self, rng):
        prob = preset_original_ib(random_joint(rng, (4, 3)), 3)
        s = random_state(prob, seed=3)
        new, pairs = duplicate_and_perturb(s, 0, 0.1, np.random.default_rng(0), values=[1])
        assert pairs == [(1, 3)] and new.cardinalities == (4,)
        with pytest.raises(CapacityError):
            duplicate_and_perturb(s, 0, 0.1, np.random.default_rng(0), max_values=5)
        with pytest.raises(ArgumentError):
            duplicate_and_perturb(s, 0, 0.0, np.random.default_rng(0))

    def test_detect_split_examples(self, rng):
        prob = preset_original_ib(random_joint(rng, (3, 2)), 2)
        equal = state_from_tables(prob, [np.full((3, 2), 0.5)])
        assert not detect_split(equal, 0, (0, 1), 0.05)
        skew = state_from_tables(prob, [np.array([[0.5, 0.5], [0.5, 0.5], [0.9, 0.1]])])
        assert detect_split(skew, 0, (0, 1), 0.05)
        # a departure exactly at the threshold is not a split
        edge = state_from_tables(prob, [np.array([[0.75, 0.25]] * 3)])
        assert np.allclose(pair_shares(edge, 0, (0, 1)), 0.75)
        assert not detect_split(edge, 0, (0, 1), 0.25)
        assert detect_split(edge, 0, (0, 1), 0.2499)

    def test_merge_undoes_duplicate(self, rng):
        prob = preset_original_ib(random_joint(rng, (5, 3)), 3)
        s = random_state(prob, seed=4, beta=2.0)
        dup, pairs = duplicate_and_perturb(s, 0, 0.5, np.random.default_rng(1))
        back = dup
        for a, b in sorted(pairs, key=lambda ab: -ab[1]):
            back = merge_pair(back, 0, (a, b))
        assert np.allclose(back.tables[0], s.tables[0], atol=1e-15)
        assert abs(lagrangian_l1(prob, back, 2.0) - lagrangian_l1(prob, s, 2.0)) < 1e-6


class TestTree:
    def test_split_bookkeeping(self):
        tree = BifurcationTree("T")
        a, b = tree.split(0, 1.0)
        tree.split(a, 2.0)
        assert tree.n_leaves == 3
        assert tree.n_leaves_at(0.5) == 1 and tree.n_leaves_at(1.5) == 2 and tree.n_leaves_at(2.0) == 3
        with pytest.raises(ArgumentError):
            tree.split(0, 3.0)
        with pytest.raises(ArgumentError):
            tree.split(b, 0.5)
        assert tree.lines()[0] == "0\tT\t0\t0"
        assert [ln.split("\t")[0] for ln in tree.lines()] == ["0", "1", "2", "2", "1"]


class TestAnneal:
    def test_independent_product_never_splits(self, rng):
        pab = joint(np.outer(rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(3))))
        res = anneal(preset_original_ib(pab, 1), AnnealConfig(beta_start=0.5, beta_end=40, beta_factor=1.3))
        assert res.trees["T"].n_leaves == 1
        assert all(pt.cardinalities["T"] == 1 for pt in res.curve)

    def test_diagonal_splits_and_tree_matches_state(self):
        pab = joint(np.diag([0.3, 0.3, 0.2, 0.2]))
        cfg = AnnealConfig(beta_start=0.5, beta_factor=1.2, beta_end=60, max_values=4)
        res = anneal(preset_original_ib(pab, 1), cfg)
        tree = res.trees["T"]
        assert tree.n_leaves == res.state.cardinalities[0] >= 2
        for pt in res.curve:
            assert tree.n_leaves_at(pt.beta) == pt.cardinalities["T"]
        # every split happens at a larger trade-off than its parent's
        for node in tree.nodes[1:]:
            assert node.beta > tree.nodes[node.parent].beta

    def test_curve_bounds_and_monotone(self, rng):
        pab = random_joint(rng, (6, 4), concentration=0.3)
        res = anneal(preset_original_ib(pab, 1), AnnealConfig(beta_start=0.5, beta_end=50, beta_factor=1.2, max_values=6))
        prev = None
        for pt in res.curve:
            comp, frac = pt.compression["T"]
            assert -1e-12 <= frac <= 1 + 1e-9
            pred, pfrac = pt.prediction["I(T;B)"]
            assert -1e-12 <= pfrac <= 1 + 1e-9
            assert pred <= comp + 1e-9  # data processing: T - A - B
            if prev is not None and pt.cardinalities == prev.cardinalities:
                assert comp >= prev.compression["T"][0] - 1e-6
            prev = pt

    def test_deterministic(self, rng):
        prob = preset_original_ib(random_joint(rng, (5, 3)), 1)
        cfg = AnnealConfig(beta_start=1, beta_end=20, beta_factor=1.3, max_values=4, seed=3)
        r1, r2 = anneal(prob, cfg), anneal(prob, cfg)
        assert r1.trees["T"].lines() == r2.trees["T"].lines()
        assert np.array_equal(r1.state.tables[0], r2.state.tables[0])

    def test_stops_at_cap(self):
        pab = joint(np.diag([0.25] * 4))
        cfg = AnnealConfig(beta_start=0.5, beta_factor=1.2, beta_end=1e4, max_values=2)
        res = anneal(preset_original_ib(pab, 1), cfg)
        assert res.curve[-1].beta < 1e4 / 1.2
        full = anneal(preset_original_ib(pab, 1), AnnealConfig(**{**cfg.__dict__, "continue_at_cap": True}))
        assert len(full.curve) == len(cfg.schedule())

    def test_zero_reference_flag(self, rng):
        pab = joint(np.outer([0.5, 0.5], [0.3, 0.7]))
        prob = preset_parallel(pab, 1, 1)
        pt = info_curve_point(prob, single_cluster_state(prob), 1.0)
        assert "I(T1;B)" in pt.zero_reference
        assert pt.prediction["I(T1;B)"] == (0.0, 0.0)

    def test_config_validation(self):
        with pytest.raises(ArgumentError):
            AnnealConfig(beta_start=2, beta_end=1)
        with pytest.raises(ArgumentError):
            AnnealConfig(beta_factor=1.0)
        with pytest.raises(ArgumentError):
            AnnealConfig(alpha=1.5)
        assert AnnealConfig(beta_start=1, beta_factor=2, beta_end=8).schedule() == [1, 2, 4, 8]
        assert AnnealConfig(solver=SolverConfig(mode="l2")).solver.mode == "l2"
