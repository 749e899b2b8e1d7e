import math

import numpy as np
import pytest

import oracles
from conftest import I_AB_TWO_BY_TWO, KL_82_28, joint, random_joint
from mvib import core_prob
from mvib.core_prob import (
    Variable,
    conditional_mutual_information,
    entropy,
    mi_array,
    mutual_information,
)
from mvib.errors import (
    ArgumentError,
    BoundaryError,
    DegenerateRowError,
    DomainError,
    ValidationError,
)
from mvib.graph import DagStructure, edgeless_over, kl_projection
from mvib.problem import (
    MibProblem,
    build_joint,
    joint_array,
    preset_original_ib,
    preset_parallel,
    preset_symmetric,
    random_state,
    state_from_tables,
    uniform_state,
    validate,
)
from mvib.solver import (
    SolverConfig,
    _update_rows,
    auxiliary_f,
    beta_from_gamma,
    distortion,
    fixed_point_residual,
    gamma_from_beta,
    info_gradient_check,
    iterate,
    lagrangian_l1,
    lagrangian_l2,
    reduced_distortion,
    solve,
    update_step,
)


def copy_state(problem, beta=0.0):
    n = problem.px.shape[0]
    return state_from_tables(problem, [np.eye(n)], beta)


def info(problem, state, y, z):
    p = joint_array(problem, state.tables)
    names = problem.names
    return mi_array(p, tuple(names.index(n) for n in y), tuple(names.index(n) for n in z))


class TestValidate:
    def test_presets_valid(self, two_by_two):
        for build in (preset_original_ib, preset_parallel, preset_symmetric):
            for variant in "ab":
                args = (2,) if build is preset_original_ib else (2, 2)
                assert validate(build(two_by_two, *args, out_variant=variant))

    def test_leaf_violation(self, two_by_two):
        names = ("A", "B", "T1", "T2")
        prob = MibProblem(
            two_by_two,
            (Variable("T1", 2), Variable("T2", 2)),
            {"T1": ("A",), "T2": ("T1",)},
            DagStructure(names, {"B": ("T1", "T2")}),
        )
        with pytest.raises(ValidationError) as e:
            validate(prob)
        assert "leaf" in e.value.codes

    def test_overlap_violation(self, two_by_two):
        names = ("A", "B", "T_A", "T_B")
        gout = DagStructure(names, {"T_A": ("A",), "B": ("T_B",), "T_B": ("T_A",)})
        prob = MibProblem(two_by_two, (Variable("T_A", 2), Variable("T_B", 2)), {"T_A": ("A",), "T_B": ("B",)}, gout)
        with pytest.raises(ValidationError) as e:
            validate(prob)
        assert "overlap" in e.value.codes

    def test_cycle_and_unknown(self, two_by_two):
        names = ("A", "B", "T")
        gout = DagStructure(names, {"B": ("T",), "T": ("B",)})
        prob = MibProblem(two_by_two, (Variable("T", 2),), {"T": ("A",)}, gout)
        with pytest.raises(ValidationError) as e:
            validate(prob)
        assert "cycle" in e.value.codes
        prob = MibProblem(two_by_two, (Variable("T", 2),), {"T": ("Z",)}, DagStructure(names, {}))
        with pytest.raises(ValidationError) as e:
            validate(prob)
        assert "unknown-name" in e.value.codes

    def test_inconsistent_observed_part(self, two_by_two):
        prob = MibProblem(
            two_by_two,
            (Variable("T", 2),),
            {"T": ("A",)},
            DagStructure(("A", "B", "T"), {"B": ("T",)}),
            gin_observed=edgeless_over(["A", "B"]),
        )
        with pytest.raises(ValidationError) as e:
            validate(prob)
        assert "inconsistent" in e.value.codes

    def test_capacity(self, two_by_two):
        old = core_prob.set_max_cells(10)
        try:
            with pytest.raises(ValidationError) as e:
                validate(preset_original_ib(two_by_two, 3))
            assert "capacity" in e.value.codes
        finally:
            core_prob.set_max_cells(old)


class TestBuildJoint:
    def test_copy(self, rng):
        pab = random_joint(rng, (3, 2))
        prob = preset_original_ib(pab, 3)
        joint_t = build_joint(prob, copy_state(prob))
        assert mutual_information(joint_t, ["T"], ["A"]) == pytest.approx(entropy(pab, ["A"]), abs=1e-12)

    def test_uniform_rows(self, rng):
        prob = preset_parallel(random_joint(rng, (3, 2)), 2, 3)
        j = build_joint(prob, uniform_state(prob))
        for t in ("T1", "T2"):
            assert mutual_information(j, [t], ["A", "B"]) == pytest.approx(0, abs=1e-14)

    def test_parallel_conditional_independence(self, rng):
        prob = preset_parallel(random_joint(rng, (4, 3)), 2, 3)
        j = build_joint(prob, random_state(prob, seed=3))
        assert conditional_mutual_information(j, ["T1"], ["T2"], ["A"]) == pytest.approx(0, abs=1e-12)

    def test_matches_oracle_and_marginal(self, rng):
        prob = preset_symmetric(random_joint(rng, (3, 2)), 2, 2)
        state = random_state(prob, seed=1)
        p = joint_array(prob, state.tables)
        expected = oracles.build_joint(prob.px.array, state.tables, prob.layout.u_axes)
        assert np.allclose(p, expected, atol=1e-15)
        assert np.allclose(p.sum(axis=(2, 3)), prob.px.array, atol=1e-12)


class TestLagrangians:
    def test_l1_examples(self, two_by_two):
        prob = preset_original_ib(two_by_two, 2)
        assert lagrangian_l1(prob, copy_state(prob), 1.0) == pytest.approx(math.log(2), abs=1e-12)
        for beta in (0.0, 0.3, 2.0):
            expected = math.log(2) + (1 - beta) * I_AB_TWO_BY_TWO
            assert lagrangian_l1(prob, copy_state(prob), beta) == pytest.approx(expected, abs=1e-12)
        assert lagrangian_l1(prob, uniform_state(prob), 1.0) == pytest.approx(I_AB_TWO_BY_TWO, abs=1e-12)

    def test_l1_at_zero_is_gin_information(self, rng):
        prob = preset_symmetric(random_joint(rng, (3, 3)), 2, 2)
        s = random_state(prob, seed=2)
        gin = info(prob, s, ["A"], ["B"]) + info(prob, s, ["T_A"], ["A"]) + info(prob, s, ["T_B"], ["B"])
        assert lagrangian_l1(prob, s, 0.0) == pytest.approx(gin, abs=1e-12)

    def test_l2_examples(self, rng):
        prob = preset_parallel(random_joint(rng, (3, 3)), 2, 2, "b")
        s = random_state(prob, seed=5)
        assert lagrangian_l2(prob, s, 0.0) == pytest.approx(lagrangian_l1(prob, s, 0.0), abs=1e-12)
        for gamma in (0.5, 3.0, 40.0):
            beta = beta_from_gamma(gamma)
            assert lagrangian_l2(prob, s, gamma) == pytest.approx((1 + gamma) * lagrangian_l1(prob, s, beta), abs=1e-10)

    def test_l2_when_consistent_with_gout(self, rng):
        pab = joint(np.outer(rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(2))))
        prob = preset_original_ib(pab, 2, "b")
        s = uniform_state(prob)
        for gamma in (0.1, 1.0, 100.0):
            assert lagrangian_l2(prob, s, gamma) == pytest.approx(lagrangian_l1(prob, s, 0.0), abs=1e-12)

    def test_beta_gamma(self, rng):
        assert beta_from_gamma(0.0) == 0.0
        assert beta_from_gamma(1.0) == 0.5
        for g in rng.exponential(10, size=100):
            assert gamma_from_beta(beta_from_gamma(g)) == pytest.approx(g, rel=1e-12)
        assert beta_from_gamma(2.0) < beta_from_gamma(3.0) < 1
        with pytest.raises(DomainError):
            gamma_from_beta(1.0)


class TestPresetObjectives:
    def test_ib_forms(self, rng):
        pab = random_joint(rng, (4, 3))
        iab = mutual_information(pab, ["A"], ["B"])
        prob_a = preset_original_ib(pab, 3, "a")
        s = random_state(prob_a, seed=4)
        ita, itb = info(prob_a, s, ["T"], ["A"]), info(prob_a, s, ["T"], ["B"])
        assert lagrangian_l1(prob_a, s, 2.5) - iab == pytest.approx(ita - 2.5 * itb, abs=1e-12)
        prob_b = preset_original_ib(pab, 3, "b")
        sb = state_from_tables(prob_b, s.tables)
        gamma = 7.0
        assert lagrangian_l2(prob_b, sb, gamma) == pytest.approx(ita - gamma * itb + (1 + gamma) * iab, abs=1e-10)

    def test_ib_single_value(self, two_by_two):
        prob = preset_original_ib(two_by_two, 1)
        assert lagrangian_l1(prob, uniform_state(prob), 3.0) == pytest.approx(I_AB_TWO_BY_TWO, abs=1e-12)

    def test_parallel_form(self, rng):
        pab = random_joint(rng, (4, 3))
        prob = preset_parallel(pab, 2, 3, "a")
        s = random_state(prob, seed=8)
        beta = 1.7
        expected = (
            info(prob, s, ["T1"], ["A"]) + info(prob, s, ["T2"], ["A"])
            - beta * info(prob, s, ["T1", "T2"], ["B"]) + mutual_information(pab, ["A"], ["B"])
        )
        assert lagrangian_l1(prob, s, beta) == pytest.approx(expected, abs=1e-10)

    def test_parallel_with_constant_t1_is_ib(self, rng):
        pab = random_joint(rng, (4, 3))
        par = preset_parallel(pab, 1, 3, "a")
        ib = preset_original_ib(pab, 3, "a")
        t2 = rng.dirichlet(np.ones(3), size=4)
        s_par = state_from_tables(par, [np.ones((4, 1)), t2])
        s_ib = state_from_tables(ib, [t2])
        assert lagrangian_l1(par, s_par, 2.0) == pytest.approx(lagrangian_l1(ib, s_ib, 2.0), abs=1e-12)

    def test_symmetric_form(self, rng):
        pab = random_joint(rng, (4, 3))
        prob = preset_symmetric(pab, 3, 2, "a")
        s = random_state(prob, seed=9)
        gamma = 4.0
        const = (1 + gamma) * mutual_information(pab, ["A"], ["B"])
        expected = (
            info(prob, s, ["T_A"], ["A"]) + info(prob, s, ["T_B"], ["B"])
            - gamma * info(prob, s, ["T_A"], ["T_B"]) + const
        )
        assert lagrangian_l2(prob, s, gamma) == pytest.approx(expected, abs=1e-10)
        single = preset_symmetric(pab, 1, 1, "a")
        assert lagrangian_l2(single, uniform_state(single), gamma) == pytest.approx(const, abs=1e-12)


class TestDistortion:
    def test_ib_copy_values(self, two_by_two):
        prob = preset_original_ib(two_by_two, 2, "a")
        d = distortion(prob, copy_state(prob), 0)
        assert d[0, 0] == pytest.approx(0, abs=1e-15)
        assert d[0, 1] == pytest.approx(KL_82_28, abs=1e-12)

    def test_ib_variant_a_matches_oracle(self, rng):
        pab = random_joint(rng, (5, 4))
        prob = preset_original_ib(pab, 3, "a")
        s = random_state(prob, seed=11)
        assert np.allclose(distortion(prob, s, "T"), oracles.ib_distortion(pab.array, s.tables[0]), atol=1e-12)

    def test_ib_variant_b_full_and_reduced(self, rng):
        pab = random_joint(rng, (5, 4))
        prob = preset_original_ib(pab, 3, "b")
        s = random_state(prob, seed=12)
        kl = oracles.ib_distortion(pab.array, s.tables[0])
        red, reducible = reduced_distortion(prob, s, 0)
        assert reducible
        assert np.allclose(red, kl, atol=1e-12)
        # the full form carries the self-prediction term -log P(a|t)
        p = joint_array(prob, s.tables)
        pat = p.sum(axis=1)
        log_a_given_t = np.log(pat / pat.sum(axis=0, keepdims=True))
        assert np.allclose(distortion(prob, s, 0), kl - log_a_given_t, atol=1e-12)

    def test_parallel_hand_built(self, rng):
        pab = random_joint(rng, (4, 3))
        prob = preset_parallel(pab, 2, 2, "a")
        s = random_state(prob, seed=13)
        p = oracles.build_joint(pab.array, s.tables, prob.layout.u_axes)  # axes A, B, T1, T2
        pa = p.sum(axis=(1, 2, 3))
        p_bt1t2 = p.sum(axis=0)
        p_abt2 = p.sum(axis=2)
        d = np.zeros((4, 2))
        for a in range(4):
            for t1 in range(2):
                total = 0.0
                for t2 in range(2):
                    w = p_abt2[a, :, t2].sum() / pa[a]
                    pb_a_t2 = p_abt2[a, :, t2] / p_abt2[a, :, t2].sum()
                    pb_t1_t2 = p_bt1t2[:, t1, t2] / p_bt1t2[:, t1, t2].sum()
                    total += w * oracles.kl_rows(pb_a_t2, pb_t1_t2)
                d[a, t1] = total
        assert np.allclose(distortion(prob, s, "T1"), d, atol=1e-10)

    def test_symmetric_closed_form(self, rng):
        pab = random_joint(rng, (4, 3))
        prob = preset_symmetric(pab, 3, 2, "a")
        s = random_state(prob, seed=14)
        p = joint_array(prob, s.tables)  # axes A, B, T_A, T_B
        p_a_tb = p.sum(axis=(1, 2))
        p_ta_tb = p.sum(axis=(0, 1))
        p_a_ta = p.sum(axis=(1, 3))
        kl = np.array([
            [oracles.kl_rows(p_a_tb[a] / p_a_tb[a].sum(), p_ta_tb[t] / p_ta_tb[t].sum()) for t in range(3)]
            for a in range(4)
        ])
        self_term = -np.log(p_a_ta / p_a_ta.sum(axis=0, keepdims=True))
        assert np.allclose(distortion(prob, s, "T_A"), kl + self_term, atol=1e-10)
        red, reducible = reduced_distortion(prob, s, "T_A")
        assert reducible and np.allclose(red, kl, atol=1e-10)


class TestUpdate:
    def test_beta_zero_gives_marginal(self, rng):
        prob = preset_original_ib(random_joint(rng, (4, 3)), 3)
        s = random_state(prob, seed=1)
        new = update_step(prob, s, 0, beta=0.0)
        pt = joint_array(prob, s.tables).sum(axis=(0, 1))
        assert np.allclose(new.rows, pt[None, :], atol=1e-15)

    def test_fixed_point_is_preserved(self, rng):
        prob = preset_original_ib(random_joint(rng, (5, 4)), 3, "a")
        res = iterate(prob, None, SolverConfig(tradeoff=4.0, tolerance=1e-15, max_sweeps=50000))
        new = update_step(prob, res.state, 0)
        assert np.max(np.abs(new.table - res.state.tables[0])) < 1e-6
        assert fixed_point_residual(prob, res.state) < 1e-6

    def test_rows_normalized(self, rng):
        for preset, args in ((preset_parallel, (2, 3)), (preset_symmetric, (3, 2))):
            prob = preset(random_joint(rng, (3, 4)), *args, out_variant="b")
            s = random_state(prob, seed=2, beta=0.6)
            for j in range(2):
                rows = update_step(prob, s, j).rows
                assert np.all(rows >= 0) and np.allclose(rows.sum(axis=1), 1, atol=1e-14)

    def test_infinite_distortion_gets_zero_mass(self):
        prob = preset_original_ib(joint([[0.5, 0], [0, 0.5]]), 2, "a")
        s = copy_state(prob, beta=1.0)
        new = update_step(prob, s, 0)
        assert new.table[0, 1] == 0.0 and new.table[1, 0] == 0.0

    def test_degenerate_row(self):
        with pytest.raises(DegenerateRowError):
            _update_rows(np.array([0.5, 0.5]), np.array([[np.inf, np.inf]]), 1.0, "T")


class TestIterate:
    def test_low_beta_single_cluster(self, rng):
        prob = preset_original_ib(random_joint(rng, (8, 5)), 4, "a")
        res = iterate(prob, None, SolverConfig(tradeoff=0.01, seed=3))
        rows = res.state.conditionals[0].rows
        assert np.max(np.abs(rows - rows[0])) < 1e-6

    def test_hard_limit_two_by_two(self, two_by_two):
        prob = preset_original_ib(two_by_two, 2, "b")
        res = iterate(prob, random_state(prob, seed=7), SolverConfig(mode="l2", tradeoff=1e3))
        best = oracles.best_hard_partition_information(two_by_two.array, 2)
        assert info(prob, res.state, ["T"], ["B"]) == pytest.approx(best, abs=1e-6)

    def test_async_monotone_and_converges(self, rng):
        prob = preset_symmetric(random_joint(rng, (4, 3)), 3, 2, "a")
        res = iterate(prob, None, SolverConfig(mode="l2", tradeoff=6.0, tolerance=1e-13, seed=1))
        assert res.converged
        assert np.all(np.diff(res.trace.l2) <= 1e-12)
        assert fixed_point_residual(prob, res.state) < 1e-6

    def test_sync_mode_runs(self, rng):
        prob = preset_parallel(random_joint(rng, (4, 3)), 2, 2, "a")
        res = iterate(prob, None, SolverConfig(tradeoff=3.0, update_variant="sync", seed=2))
        assert len(res.trace) == res.sweeps

    def test_non_convergence_flag(self, rng):
        prob = preset_original_ib(random_joint(rng, (6, 4)), 3)
        res = iterate(prob, None, SolverConfig(tradeoff=5.0, max_sweeps=1, tolerance=1e-15))
        assert not res.converged and res.sweeps == 1

    def test_solve_restarts_pick_best(self, rng):
        prob = preset_original_ib(random_joint(rng, (6, 4)), 2, "b")
        cfg = SolverConfig(mode="l2", tradeoff=50.0)
        best = solve(prob, cfg, restarts=5)
        single = solve(prob, cfg, restarts=1)
        assert best.trace.l2[-1] <= single.trace.l2[-1] + 1e-12

    def test_config_errors(self):
        with pytest.raises(ArgumentError):
            SolverConfig(mode="l3")
        with pytest.raises(ArgumentError):
            SolverConfig(update_variant="random")
        with pytest.raises(DomainError):
            SolverConfig(tradeoff=-1.0)


class TestAuxiliary:
    def _setup(self, rng):
        prob = preset_parallel(random_joint(rng, (3, 3)), 2, 2, "b")
        return prob, random_state(prob, seed=6, beta=0.75)

    def test_equals_l2_at_projections(self, rng):
        prob, s = self._setup(rng)
        j = build_joint(prob, s)
        f = auxiliary_f(prob, s, kl_projection(j, prob.gout), kl_projection(j, edgeless_over(j.names)))
        assert f == pytest.approx(lagrangian_l2(prob, s, gamma_from_beta(0.75)), abs=1e-10)

    def test_perturbing_q_increases(self, rng):
        prob, s = self._setup(rng)
        j = build_joint(prob, s)
        q = kl_projection(j, prob.gout)
        r = kl_projection(j, edgeless_over(j.names))
        base = auxiliary_f(prob, s, q, r)
        # perturb one conditional row of A given (T1, T2) and rebuild
        w = q.array.copy()
        w[:, :, 0, 0] *= np.array([1.2, 0.9, 0.9])[:, None]
        w[:, :, 0, 0] *= q.array[:, :, 0, 0].sum() / w[:, :, 0, 0].sum()
        q2 = type(q)(q.variables, w / w.sum(), tol=1e-9)
        q2 = kl_projection(q2, prob.gout)
        assert auxiliary_f(prob, s, q2, r) > base

    def test_domain(self, rng):
        prob, s = self._setup(rng)
        j = build_joint(prob, s)
        with pytest.raises(DomainError):
            auxiliary_f(prob, s.with_beta(1.0), j, j)
        with pytest.raises(ArgumentError):
            auxiliary_f(prob, s, j, kl_projection(j, edgeless_over(j.names)))


class TestGradient:
    def test_ib_pairs(self, rng):
        for k in range(10):
            prob = preset_original_ib(random_joint(rng, (4, 3)), 3)
            s = random_state(prob, seed=k)
            a, n = info_gradient_check(prob, s, ["B"], ["T"], 0, [int(rng.integers(4))], int(rng.integers(3)))
            assert a == pytest.approx(n, rel=1e-5)

    def test_independent_of_t(self, rng):
        prob = preset_original_ib(random_joint(rng, (3, 3)), 2)
        s = random_state(prob, seed=1)
        a, n = info_gradient_check(prob, s, ["A"], ["B"], 0, {"A": 1}, 0)
        assert a == pytest.approx(n, rel=1e-5)

    def test_zero_information(self):
        pab = joint(np.full((2, 3), 1 / 6))
        prob = preset_original_ib(pab, 2)
        s = uniform_state(prob)
        a, n = info_gradient_check(prob, s, ["B"], ["T"], 0, [1], 0)
        assert a == pytest.approx(-0.5, abs=1e-12)
        assert n == pytest.approx(a, abs=1e-6)

    def test_boundary(self, two_by_two):
        prob = preset_original_ib(two_by_two, 2)
        with pytest.raises(BoundaryError):
            info_gradient_check(prob, copy_state(prob), ["B"], ["T"], 0, [0], 0)
