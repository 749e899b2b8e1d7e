"""Deterministic annealing over the trade-off parameter.

Each step duplicates every cluster value into a perturbed pair, re-solves at
the new trade-off, and keeps a pair only if the two copies ended up behaving
differently. Accepted splits are recorded in a per-variable bifurcation tree,
and each step emits one information-curve point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core_prob import ConditionalTable, Variable, entropy_array, marginal_array, mi_array
from .errors import ArgumentError, CapacityError
from .problem import MibProblem, SolverState, joint_array, state_from_tables, validate
from .solver import SolverConfig, iterate


@dataclass(frozen=True)
class AnnealConfig:
    """Schedule and split-detection settings.

    The schedule is geometric, ``beta_start * beta_factor**k`` up to
    ``beta_end``, and is read as beta or gamma according to ``solver.mode``.
    The run stops once every bottleneck reaches its cap unless
    ``continue_at_cap`` is set, in which case the capped solution is tracked
    to the end of the schedule.
    """

    beta_start: float = 0.05
    beta_factor: float = 1.15
    beta_end: float = 50.0
    alpha: float = 0.1
    split_threshold: float = 0.05
    max_values: int | Mapping[str, int] = 16
    prune_mass: float = 1e-12
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(max_sweeps=5000))
    seed: int = 0
    continue_at_cap: bool = False

    def __post_init__(self):
        if not 0 < self.beta_start < self.beta_end:
            raise ArgumentError("need 0 < beta_start < beta_end")
        if not self.beta_factor > 1:
            raise ArgumentError("beta_factor must exceed 1")
        if not 0 < self.alpha <= 1:
            raise ArgumentError("alpha must lie in (0, 1]")
        if not self.split_threshold > 0:
            raise ArgumentError("split_threshold must be positive")

    def schedule(self) -> list[float]:
        out, b = [], self.beta_start
        while b <= self.beta_end * (1 + 1e-12):
            out.append(b)
            b *= self.beta_factor
        return out

    def cap(self, name: str) -> int:
        if isinstance(self.max_values, Mapping):
            return int(self.max_values.get(name, 16))
        return int(self.max_values)


# ----------------------------------------------------------------------------
# bifurcation tree


@dataclass
class TreeNode:
    id: int
    beta: float
    parent: int | None = None
    children: list[int] = field(default_factory=list)
    pruned_at: float | None = None


class BifurcationTree:
    """Binary tree of cluster values for one bottleneck variable."""

    def __init__(self, variable: str):
        self.variable = variable
        self.nodes: list[TreeNode] = [TreeNode(0, 0.0)]

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def split(self, node_id: int, beta: float) -> tuple[int, int]:
        node = self.nodes[node_id]
        if node.children:
            raise ArgumentError(f"node {node_id} has already split")
        if not beta > node.beta:
            raise ArgumentError("a split must happen at a larger trade-off than its parent")
        ids = []
        for _ in range(2):
            child = TreeNode(len(self.nodes), float(beta), parent=node_id)
            self.nodes.append(child)
            node.children.append(child.id)
            ids.append(child.id)
        return ids[0], ids[1]

    def leaves(self, include_pruned: bool = False) -> list[TreeNode]:
        return [
            n for n in self.nodes
            if not n.children and (include_pruned or n.pruned_at is None)
        ]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves())

    def n_leaves_at(self, beta: float) -> int:
        """Number of clusters alive at trade-off ``beta``."""
        count = 0
        for n in self.nodes:
            born = n.beta <= beta
            ended = (n.children and self.nodes[n.children[0]].beta <= beta) or (
                n.pruned_at is not None and n.pruned_at <= beta
            )
            count += born and not ended
        return count

    def depth(self, node_id: int) -> int:
        d, n = 0, self.nodes[node_id]
        while n.parent is not None:
            d, n = d + 1, self.nodes[n.parent]
        return d

    def lines(self) -> list[str]:
        """Depth-first rendering, one ``depth\\tvariable\\tvalue_id\\tbeta`` line per node."""
        out = []
        stack = [0]
        while stack:
            nid = stack.pop()
            node = self.nodes[nid]
            out.append(f"{self.depth(nid)}\t{self.variable}\t{nid}\t{node.beta:.9g}")
            stack.extend(reversed(node.children))
        return out


# ----------------------------------------------------------------------------
# cluster surgery


def _rebuild(state: SolverState, j: int, table: np.ndarray) -> SolverState:
    old = state.conditionals[j]
    target = Variable(old.target.name, table.shape[-1])
    return state.replace(j, ConditionalTable(target, old.given, table))


def duplicate_and_perturb(
    state: SolverState,
    j: int,
    alpha: float,
    rng: np.random.Generator,
    values: Sequence[int] | None = None,
    max_values: int | None = None,
) -> tuple[SolverState, list[tuple[int, int]]]:
    """Split each listed value of bottleneck ``j`` into a perturbed pair.

    Copy ``a`` keeps the value's index and carries ``P(t|u)(1/2 + alpha eps(u))``;
    copy ``b`` is appended at the end with the remainder, so the two masses add
    back to ``P(t|u)`` exactly. ``eps`` is drawn from ``rng`` as a
    ``(n_inputs, len(values))`` block of U[-1/2, 1/2] variates.

    Returns the new state and the ``(a, b)`` index pairs.
    """
    if not 0 < alpha <= 1:
        raise ArgumentError("alpha must lie in (0, 1]")
    table = np.array(state.tables[j])
    k = table.shape[-1]
    values = list(range(k)) if values is None else [int(v) for v in values]
    if max_values is not None and k + len(values) > max_values:
        raise CapacityError(
            f"duplicating {len(values)} values of {state.conditionals[j].target.name} "
            f"gives {k + len(values)} > {max_values}"
        )
    rows = table.reshape(-1, k)
    eps = rng.uniform(-0.5, 0.5, size=(rows.shape[0], len(values)))
    share = 0.5 + alpha * eps
    new = np.empty((rows.shape[0], k + len(values)))
    new[:, :k] = rows
    pairs = []
    for i, v in enumerate(values):
        mass = rows[:, v]
        big = np.maximum(share[:, i], 1.0 - share[:, i])
        larger = mass * big
        smaller = mass - larger  # exact difference keeps a + b == mass
        a_is_big = share[:, i] >= 0.5
        new[:, v] = np.where(a_is_big, larger, smaller)
        new[:, k + i] = np.where(a_is_big, smaller, larger)
        pairs.append((v, k + i))
    return _rebuild(state, j, new.reshape(table.shape[:-1] + (k + len(values),))), pairs


def pair_shares(state: SolverState, j: int, pair: tuple[int, int]) -> np.ndarray:
    """``P(t_a|u) / (P(t_a|u) + P(t_b|u))`` per input configuration (nan where both are 0)."""
    rows = state.conditionals[j].rows
    a, b = rows[:, pair[0]], rows[:, pair[1]]
    tot = a + b
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(tot > 0, a / np.where(tot > 0, tot, 1.0), np.nan)


def detect_split(state: SolverState, j: int, pair: tuple[int, int], threshold: float) -> bool:
    """True when the pair's relative share departs from 1/2 by more than ``threshold`` somewhere."""
    share = pair_shares(state, j, pair)
    share = share[~np.isnan(share)]
    if share.size == 0:
        return False
    return bool(np.max(np.abs(share - 0.5)) > threshold)


def merge_pair(state: SolverState, j: int, pair: tuple[int, int]) -> SolverState:
    """Fold value ``pair[1]`` back into ``pair[0]`` by adding their masses."""
    a, b = pair
    table = np.array(state.tables[j])
    if a == b or not (0 <= a < table.shape[-1] and 0 <= b < table.shape[-1]):
        raise ArgumentError(f"invalid pair {pair}")
    table[..., a] = table[..., a] + table[..., b]
    return _rebuild(state, j, np.delete(table, b, axis=-1))


def remove_value(state: SolverState, j: int, value: int) -> SolverState:
    """Drop a value carrying (numerically) no mass and renormalize rows."""
    table = np.delete(np.array(state.tables[j]), value, axis=-1)
    return _rebuild(state, j, table / table.sum(axis=-1, keepdims=True))


# ----------------------------------------------------------------------------
# information curves


@dataclass(frozen=True)
class InfoCurvePoint:
    """Informations at one trade-off value.

    ``compression`` maps a bottleneck name to ``(I(T_j;U_j), I(T_j;U_j)/H(U_j))``;
    ``prediction`` maps labels such as ``"I(T_A;B)"`` to
    ``(nats, fraction of the reference information)``.
    """

    beta: float
    cardinalities: dict[str, int]
    compression: dict[str, tuple[float, float]]
    prediction: dict[str, tuple[float, float]]
    zero_reference: tuple[str, ...] = ()
    converged: bool = True
    splits: tuple[str, ...] = ()


def _fraction(value: float, ref: float, key: str, flags: list[str]) -> float:
    if ref <= 1e-15:
        flags.append(key)
        return 0.0
    return value / ref


def info_curve_point(problem: MibProblem, state: SolverState, beta: float, *, converged: bool = True, splits: Sequence[str] = ()) -> InfoCurvePoint:
    """Compression and prediction fractions for the joint implied by ``state``.

    Compression for ``T_j`` is normalized by ``H(U_j)``. Each bottleneck is
    scored on every observed variable outside its inputs, normalized by the
    information its inputs carry about that variable; bottlenecks sharing
    the same inputs are also scored jointly.
    """
    validate(problem)
    lay = problem.layout
    names = problem.names
    p = joint_array(problem, state.tables)
    flags: list[str] = []
    comp, pred = {}, {}
    for j, t in enumerate(problem.bottleneck_names):
        u, ta = lay.u_axes[j], lay.t_axes[j]
        info = mi_array(p, (ta,), u)
        comp[t] = (info, _fraction(info, entropy_array(p, u), t, flags))
        for y, yname in enumerate(problem.observed_names):
            if y in u:
                continue
            key = f"I({t};{yname})"
            val = mi_array(p, (ta,), (y,))
            pred[key] = (val, _fraction(val, mi_array(p, u, (y,)), key, flags))
    groups: dict[tuple[int, ...], list[int]] = {}
    for j, u in enumerate(lay.u_axes):
        groups.setdefault(tuple(sorted(u)), []).append(j)
    for u, members in groups.items():
        if len(members) < 2:
            continue
        t_axes = tuple(lay.t_axes[j] for j in members)
        tnames = ",".join(names[a] for a in t_axes)
        for y, yname in enumerate(problem.observed_names):
            if y in u:
                continue
            key = f"I({tnames};{yname})"
            val = mi_array(p, t_axes, (y,))
            pred[key] = (val, _fraction(val, mi_array(p, u, (y,)), key, flags))
    cards = {t: c for t, c in zip(problem.bottleneck_names, state.cardinalities)}
    return InfoCurvePoint(float(beta), cards, comp, pred, tuple(flags), converged, tuple(splits))


# ----------------------------------------------------------------------------
# driver


@dataclass
class AnnealResult:
    trees: dict[str, BifurcationTree]
    curve: list[InfoCurvePoint]
    state: SolverState
    value_nodes: dict[str, list[int]]
    converged: bool
    states: list[SolverState] = field(default_factory=list)  # one per curve point


def _eps_rng(seed: int, step: int, j: int) -> np.random.Generator:
    # keyed by (seed, step, variable) so draws do not depend on processing order
    return np.random.Generator(np.random.Philox(key=np.random.SeedSequence([seed, step, j]).generate_state(2, np.uint64)))


def single_cluster_state(problem: MibProblem) -> SolverState:
    tables = []
    for name in problem.bottleneck_names:
        shape = tuple(problem.px.variable(u).cardinality for u in problem.gin_parents[name])
        tables.append(np.ones(shape + (1,)))
    return state_from_tables(problem, tables)


def anneal(problem: MibProblem, config: AnnealConfig | None = None) -> AnnealResult:
    """Track solutions from a single cluster per bottleneck up the trade-off schedule."""
    validate(problem)
    config = config or AnnealConfig()
    names = problem.bottleneck_names
    trees = {t: BifurcationTree(t) for t in names}
    nodes_of = {t: [0] for t in names}
    state = single_cluster_state(problem)
    curve: list[InfoCurvePoint] = []
    states: list[SolverState] = []
    all_converged = True
    for step, value in enumerate(config.schedule()):
        solver_cfg = config.solver.with_tradeoff(value)
        pairs: dict[int, list[tuple[int, int]]] = {}
        trial = state
        for j, t in enumerate(names):
            k = trial.cardinalities[j]
            room = config.cap(t) - k
            if room <= 0:
                continue
            # heaviest values first when the cap allows only part of a doubling
            mass = marginal_array(joint_array(problem, trial.tables), (problem.layout.t_axes[j],))
            chosen = sorted(np.argsort(-mass, kind="stable")[: min(k, room)].tolist())
            trial, pairs[j] = duplicate_and_perturb(
                trial, j, config.alpha, _eps_rng(config.seed, step, j), chosen
            )
        res = iterate(problem, trial, solver_cfg)
        if not res.converged:
            all_converged = False
            state = state.with_beta(solver_cfg.beta)
            curve.append(info_curve_point(problem, state, value, converged=False))
            states.append(state)
            continue
        state = res.state
        split_log = []
        for j, t in enumerate(names):
            nodes = nodes_of[t] + [-1] * len(pairs.get(j, []))
            for a, b in sorted(pairs.get(j, []), key=lambda ab: -ab[1]):
                if detect_split(state, j, (a, b), config.split_threshold):
                    nodes[a], nodes[b] = trees[t].split(nodes[a], value)
                    split_log.append(f"{t}:{a}")
                else:
                    state = merge_pair(state, j, (a, b))
                    del nodes[b]
            nodes_of[t] = nodes
            # drop values that lost all their mass
            mass = marginal_array(joint_array(problem, state.tables), (problem.layout.t_axes[j],))
            for v in sorted(np.flatnonzero(mass < config.prune_mass).tolist(), reverse=True):
                if state.cardinalities[j] == 1:
                    break
                trees[t].nodes[nodes_of[t][v]].pruned_at = value
                del nodes_of[t][v]
                state = remove_value(state, j, v)
        curve.append(info_curve_point(problem, state, value, splits=split_log))
        states.append(state)
        if not config.continue_at_cap and all(
            state.cardinalities[j] >= config.cap(t) for j, t in enumerate(names)
        ):
            break
    return AnnealResult(trees, curve, state, nodes_of, all_converged, states)


def hard_assignments(state: SolverState, j: int) -> np.ndarray:
    """Most probable value of bottleneck ``j`` for each input configuration (flattened)."""
    return np.argmax(state.conditionals[j].rows, axis=1)
