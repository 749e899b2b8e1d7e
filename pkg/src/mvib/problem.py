"""Problem definition: observed joint, bottleneck variables, and the (G_in, G_out) pair.

Axis convention for every joint built here: observed variables first, in the
order of ``px``, then the bottleneck variables in declared order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from . import core_prob
from .core_prob import ConditionalTable, JointTable, Variable, mi_array
from .errors import ArgumentError, CycleError, ValidationError
from .graph import DagStructure, complete_dag, is_consistent, network_information_array, topological_order

CONSISTENCY_TOL = 1e-9


@dataclass(frozen=True)
class DistortionTerm:
    """One expected-KL summand of the distortion for a bottleneck.

    ``y`` are the predicted variables, ``z`` the remaining conditioning set.
    ``is_self`` marks the child term of the bottleneck's own single input,
    which can be folded into the trade-off (see ``Layout.reducible``).
    """

    kind: str  # "child" or "parents"
    target: str
    y: tuple[int, ...]
    z: tuple[int, ...]
    is_self: bool = False


@dataclass(frozen=True)
class Layout:
    """Axis bookkeeping derived once per problem."""

    names: tuple[str, ...]
    u_axes: tuple[tuple[int, ...], ...]
    t_axes: tuple[int, ...]
    gout_families: tuple[tuple[int, tuple[int, ...]], ...]
    gin_observed_families: tuple[tuple[int, tuple[int, ...]], ...]
    terms: tuple[tuple[DistortionTerm, ...], ...]
    reducible: tuple[bool, ...]


@dataclass(frozen=True, eq=False)
class MibProblem:
    """A multivariate bottleneck problem.

    Args:
        px: joint over the observed variables.
        bottlenecks: the compression variables with their (initial) cardinalities.
        gin_parents: for each bottleneck, the observed variables it compresses.
        gout: target network over observed and bottleneck names.
        gin_observed: G_in restricted to the observed variables. Defaults to the
            complete DAG in ``px`` order, which every ``P(X)`` satisfies.
    """

    px: JointTable
    bottlenecks: tuple[Variable, ...]
    gin_parents: Mapping[str, tuple[str, ...]]
    gout: DagStructure
    gin_observed: DagStructure | None = None
    label: str = ""
    _validated: bool = field(default=False, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "bottlenecks", tuple(self.bottlenecks))
        object.__setattr__(
            self, "gin_parents", {k: tuple(v) for k, v in dict(self.gin_parents).items()}
        )
        if self.gin_observed is None:
            object.__setattr__(self, "gin_observed", complete_dag(self.px.names))

    @property
    def observed(self) -> tuple[Variable, ...]:
        return self.px.variables

    @property
    def observed_names(self) -> tuple[str, ...]:
        return self.px.names

    @property
    def bottleneck_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.bottlenecks)

    @property
    def names(self) -> tuple[str, ...]:
        return self.observed_names + self.bottleneck_names

    def bottleneck_index(self, j) -> int:
        if isinstance(j, str):
            try:
                return self.bottleneck_names.index(j)
            except ValueError:
                raise ArgumentError(f"{j!r} is not a bottleneck variable") from None
        return int(j)

    def parents_in(self, j) -> tuple[str, ...]:
        return self.gin_parents[self.bottlenecks[self.bottleneck_index(j)].name]

    def gin_full(self) -> DagStructure:
        """G_in over all variables: the observed part plus ``U_j -> T_j``."""
        parents = dict(self.gin_observed.parents)
        for t in self.bottlenecks:
            parents[t.name] = self.gin_parents[t.name]
        return DagStructure(self.names, parents)

    @cached_property
    def layout(self) -> Layout:
        axis = {n: i for i, n in enumerate(self.names)}
        n_obs = len(self.observed_names)
        u_axes = tuple(tuple(axis[u] for u in self.gin_parents[t.name]) for t in self.bottlenecks)
        t_axes = tuple(n_obs + j for j in range(len(self.bottlenecks)))
        gout_fams = tuple(
            (axis[n], tuple(axis[q] for q in self.gout.parents[n])) for n in self.gout.nodes
        )
        gin_obs_fams = tuple(
            (axis[n], tuple(axis[q] for q in self.gin_observed.parents[n]))
            for n in self.gin_observed.nodes
        )
        terms, reducible = [], []
        for j, t in enumerate(self.bottlenecks):
            u = set(self.gin_parents[t.name])
            own: list[DistortionTerm] = []
            for node in self.gout.nodes:
                pa = self.gout.parents[node]
                if t.name in pa:
                    z = tuple(axis[q] for q in pa if q != t.name)
                    own.append(
                        DistortionTerm(
                            "child", node, (axis[node],), z, is_self=(node in u and not z)
                        )
                    )
            v = self.gout.parents[t.name]
            if v:
                own.append(DistortionTerm("parents", t.name, tuple(axis[q] for q in v), ()))
            terms.append(tuple(own))
            # a single input X whose only G_out parent is T_j: the self term is
            # -log P(x|t_j) and folds into the trade-off as beta -> beta/(1-beta)
            ins = self.gin_parents[t.name]
            reducible.append(len(ins) == 1 and self.gout.parents.get(ins[0], ()) == (t.name,))
        return Layout(
            names=self.names,
            u_axes=u_axes,
            t_axes=t_axes,
            gout_families=gout_fams,
            gin_observed_families=gin_obs_fams,
            terms=tuple(terms),
            reducible=tuple(reducible),
        )

    @cached_property
    def observed_information(self) -> float:
        """The constant observed part of ``I^{G_in}``."""
        return network_information_array(self.px.array, self.layout.gin_observed_families)


def problem_violations(problem: MibProblem) -> list[tuple[str, str]]:
    """All structural problems with ``problem``, as ``(code, message)`` pairs."""
    out: list[tuple[str, str]] = []
    obs = set(problem.observed_names)
    bn = problem.bottleneck_names
    if len(set(bn)) != len(bn):
        out.append(("unknown-name", f"duplicate bottleneck names {list(bn)}"))
    clash = obs.intersection(bn)
    if clash:
        out.append(("unknown-name", f"bottleneck names reuse observed names {sorted(clash)}"))
    for t in problem.bottlenecks:
        if t.name not in problem.gin_parents:
            out.append(("unknown-name", f"no G_in parents declared for {t.name!r}"))
    for name, us in problem.gin_parents.items():
        if name not in bn:
            out.append(("unknown-name", f"G_in parents given for non-bottleneck {name!r}"))
            continue
        for u in us:
            if u in bn:
                out.append(
                    ("leaf", f"{u!r} is a parent of {name!r} in G_in but bottlenecks must be leaves")
                )
            elif u not in obs:
                out.append(("unknown-name", f"{name!r} has unknown G_in parent {u!r}"))
    if set(problem.gout.nodes) != set(problem.names):
        out.append(
            (
                "unknown-name",
                f"G_out nodes {sorted(problem.gout.nodes)} differ from variables {sorted(problem.names)}",
            )
        )
    else:
        try:
            topological_order(problem.gout)
        except CycleError as e:
            out.append(("cycle", f"G_out is cyclic: {e}"))
        for t in bn:
            both = set(problem.gin_parents.get(t, ())).intersection(problem.gout.parents[t])
            if both:
                out.append(
                    ("overlap", f"{t!r} has {sorted(both)} as parents in both G_in and G_out")
                )
    cells = math.prod(v.cardinality for v in problem.observed) * math.prod(
        t.cardinality for t in problem.bottlenecks
    )
    if cells > core_prob.MAX_CELLS:
        out.append(("capacity", f"joint needs {cells} cells, cap is {core_prob.MAX_CELLS}"))
    gin_obs = problem.gin_observed
    if set(gin_obs.nodes) != obs:
        out.append(("unknown-name", "G_in observed part must span exactly the observed variables"))
    else:
        try:
            topological_order(gin_obs)
        except CycleError as e:
            out.append(("cycle", f"G_in is cyclic: {e}"))
        else:
            if not is_consistent(problem.px, gin_obs, CONSISTENCY_TOL):
                out.append(("inconsistent", "P(X) does not factorize over G_in's observed part"))
    return out


def validate(problem: MibProblem) -> MibProblem:
    """Return ``problem`` unchanged or raise :class:`ValidationError` listing every violation."""
    if problem._validated:
        return problem
    violations = problem_violations(problem)
    if violations:
        raise ValidationError(violations)
    object.__setattr__(problem, "_validated", True)
    return problem


# ----------------------------------------------------------------------------
# solver state and joint construction


@dataclass(frozen=True, eq=False)
class SolverState:
    """Free parameters: one ``P(T_j | U_j)`` per bottleneck, plus the trade-off ``beta``."""

    conditionals: tuple[ConditionalTable, ...]
    beta: float = 0.0

    @property
    def tables(self) -> tuple[np.ndarray, ...]:
        return tuple(c.table for c in self.conditionals)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(c.target.cardinality for c in self.conditionals)

    def replace(self, j: int, table: ConditionalTable) -> "SolverState":
        conds = list(self.conditionals)
        conds[j] = table
        return SolverState(tuple(conds), self.beta)

    def with_beta(self, beta: float) -> "SolverState":
        return SolverState(self.conditionals, float(beta))


def make_conditional(problem: MibProblem, j: int, table: np.ndarray, labels=None) -> ConditionalTable:
    t = problem.bottlenecks[j]
    table = np.asarray(table, dtype=np.float64)
    target = Variable(t.name, table.shape[-1], labels)
    given = tuple(problem.px.variable(u) for u in problem.gin_parents[t.name])
    return ConditionalTable(target, given, table)


def state_from_tables(problem: MibProblem, tables: Sequence[np.ndarray], beta: float = 0.0) -> SolverState:
    return SolverState(
        tuple(make_conditional(problem, j, tb) for j, tb in enumerate(tables)), float(beta)
    )


def random_state(problem: MibProblem, seed=0, beta: float = 0.0, cardinalities=None) -> SolverState:
    """Rows drawn from a symmetric Dirichlet(1), reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    tables = []
    for j, t in enumerate(problem.bottlenecks):
        k = t.cardinality if cardinalities is None else cardinalities[j]
        shape = tuple(problem.px.variable(u).cardinality for u in problem.gin_parents[t.name])
        tables.append(rng.dirichlet(np.ones(k), size=shape) if shape else rng.dirichlet(np.ones(k)))
    return state_from_tables(problem, tables, beta)


def uniform_state(problem: MibProblem, beta: float = 0.0, cardinalities=None) -> SolverState:
    tables = []
    for j, t in enumerate(problem.bottlenecks):
        k = t.cardinality if cardinalities is None else cardinalities[j]
        shape = tuple(problem.px.variable(u).cardinality for u in problem.gin_parents[t.name])
        tables.append(np.full(shape + (k,), 1.0 / k))
    return state_from_tables(problem, tables, beta)


def expand_conditional(table: np.ndarray, u_axes: Sequence[int], t_axis: int, ndim: int) -> np.ndarray:
    """Broadcastable view of ``P(T_j | U_j)`` inside an ``ndim``-axis joint."""
    order = sorted(range(len(u_axes)), key=lambda i: u_axes[i])
    moved = np.transpose(table, order + [len(u_axes)])
    shape = [1] * ndim
    for ax, size in zip(u_axes, table.shape[:-1]):
        shape[ax] = size
    shape[t_axis] = table.shape[-1]
    return moved.reshape(shape)


def joint_array(problem: MibProblem, tables: Sequence[np.ndarray]) -> np.ndarray:
    """``P(X) prod_j P(T_j | U_j)`` as a dense array (no object overhead)."""
    lay = problem.layout
    ndim = len(lay.names)
    cards = [t.shape[-1] for t in tables]
    core_prob.check_capacity(problem.px.shape + tuple(cards))
    p = problem.px.array.reshape(problem.px.shape + (1,) * len(tables))
    for j, tb in enumerate(tables):
        p = p * expand_conditional(tb, lay.u_axes[j], lay.t_axes[j], ndim)
    return p


def build_joint(problem: MibProblem, state: SolverState) -> JointTable:
    """The joint over observed and bottleneck variables implied by ``state``."""
    validate(problem)
    p = joint_array(problem, state.tables)
    variables = problem.observed + tuple(c.target for c in state.conditionals)
    return JointTable(variables, p)


def gin_information_array(problem: MibProblem, p: np.ndarray) -> float:
    lay = problem.layout
    return problem.observed_information + sum(
        mi_array(p, (t,), u) for t, u in zip(lay.t_axes, lay.u_axes)
    )


def gout_information_array(problem: MibProblem, p: np.ndarray) -> float:
    return network_information_array(p, problem.layout.gout_families)


# ----------------------------------------------------------------------------
# preset constructors


def _pair_names(pab: JointTable) -> tuple[str, str]:
    if len(pab.variables) != 2:
        raise ArgumentError("presets take a joint over exactly two variables")
    return pab.names  # type: ignore[return-value]


def _check_variant(variant: str) -> str:
    if variant not in ("a", "b"):
        raise ArgumentError(f"out_variant must be 'a' or 'b', got {variant!r}")
    return variant


def _card(k: int) -> int:
    if int(k) != k or k < 1:
        raise ArgumentError("bottleneck cardinalities must be positive integers")
    return int(k)


def preset_original_ib(pab: JointTable, t_card: int, out_variant: str = "a") -> MibProblem:
    """Compress ``A`` into ``T`` to predict ``B``.

    Variant ``a``: G_out is ``T -> B``. Variant ``b``: ``A <- T -> B``.
    """
    a, b = _pair_names(pab)
    variant = _check_variant(out_variant)
    names = (a, b, "T")
    if variant == "a":
        gout = DagStructure(names, {b: ("T",)})
    else:
        gout = DagStructure(names, {a: ("T",), b: ("T",)})
    return MibProblem(pab, (Variable("T", _card(t_card)),), {"T": (a,)}, gout, label=f"ib-{variant}")


def preset_parallel(pab: JointTable, t1_card: int, t2_card: int, out_variant: str = "a") -> MibProblem:
    """Two bottlenecks ``T1``, ``T2`` compressing ``A`` side by side.

    Variant ``a``: ``T1 -> B <- T2``. Variant ``b``: both ``T1`` and ``T2`` are
    parents of ``A`` and of ``B``.
    """
    a, b = _pair_names(pab)
    variant = _check_variant(out_variant)
    names = (a, b, "T1", "T2")
    if variant == "a":
        gout = DagStructure(names, {b: ("T1", "T2")})
    else:
        gout = DagStructure(names, {a: ("T1", "T2"), b: ("T1", "T2")})
    bns = (Variable("T1", _card(t1_card)), Variable("T2", _card(t2_card)))
    return MibProblem(pab, bns, {"T1": (a,), "T2": (a,)}, gout, label=f"parallel-{variant}")


def preset_symmetric(pab: JointTable, ta_card: int, tb_card: int, out_variant: str = "a") -> MibProblem:
    """Compress ``A`` into ``T_A`` and ``B`` into ``T_B`` simultaneously.

    Variant ``a``: ``A <- T_A -> T_B -> B``. Variant ``b``: ``T_A`` and ``T_B``
    are independent roots and both are parents of ``A`` and ``B``.
    """
    a, b = _pair_names(pab)
    variant = _check_variant(out_variant)
    ta, tb = f"T_{a}", f"T_{b}"
    names = (a, b, ta, tb)
    if variant == "a":
        gout = DagStructure(names, {a: (ta,), b: (tb,), tb: (ta,)})
    else:
        gout = DagStructure(names, {a: (ta, tb), b: (ta, tb)})
    bns = (Variable(ta, _card(ta_card)), Variable(tb, _card(tb_card)))
    return MibProblem(pab, bns, {ta: (a,), tb: (b,)}, gout, label=f"symmetric-{variant}")


PRESETS = {
    "ib": preset_original_ib,
    "parallel": preset_parallel,
    "symmetric": preset_symmetric,
}
