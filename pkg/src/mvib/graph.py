"""Bayesian network structures and the information they account for.

For a DAG ``G`` and a joint ``P``:

* ``network_information(P, G)`` is the sum over nodes of ``I(X_i; Pa_i)``;
* ``divergence_from_network(P, G)`` is the KL distance from ``P`` to the
  closest distribution that factorizes over ``G``;
* ``kl_projection(P, G)`` is that closest distribution, ``prod_i P(X_i | Pa_i)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core_prob import (
    JointTable,
    cmi_array,
    marginal_array,
    mi_array,
    multi_information_array,
)
from .errors import ArgumentError, ConsistencyError, CycleError, VariableNameError

DIVERGENCE_CHECK_TOL = 1e-10


@dataclass(frozen=True)
class DagStructure:
    """Directed graph over named nodes, given by each node's parent set.

    Parent tuples are stored in declared node order. Acyclicity is checked by
    :func:`topological_order`, so a cyclic graph can still be built and then
    reported by validation code.
    """

    nodes: tuple[str, ...]
    parents: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        nodes = tuple(self.nodes)
        if len(set(nodes)) != len(nodes):
            raise ArgumentError(f"duplicate node names in {nodes}")
        rank = {n: i for i, n in enumerate(nodes)}
        parents = {}
        for child, pa in dict(self.parents).items():
            if child not in rank:
                raise VariableNameError(f"parent map mentions unknown node {child!r}")
            for q in pa:
                if q not in rank:
                    raise VariableNameError(f"{child!r} has unknown parent {q!r}")
            parents[child] = tuple(sorted(set(pa), key=rank.__getitem__))
        full = {n: parents.get(n, ()) for n in nodes}
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "parents", full)

    @classmethod
    def from_edges(cls, nodes: Sequence[str], edges: Iterable[tuple[str, str]]) -> "DagStructure":
        """Build from ``(parent, child)`` pairs."""
        parents: dict[str, list[str]] = {n: [] for n in nodes}
        for a, b in edges:
            if b not in parents:
                raise VariableNameError(f"edge {a}->{b} ends at an unknown node")
            parents[b].append(a)
        return cls(tuple(nodes), parents)

    @property
    def edges(self) -> list[tuple[str, str]]:
        return [(p, c) for c in self.nodes for p in self.parents[c]]

    def children(self, node: str) -> tuple[str, ...]:
        return tuple(c for c in self.nodes if node in self.parents[c])

    def with_edge(self, parent: str, child: str) -> "DagStructure":
        parents = dict(self.parents)
        parents[child] = parents[child] + (parent,)
        return DagStructure(self.nodes, parents)

    def restricted(self, names: Iterable[str]) -> "DagStructure":
        """Induced subgraph on ``names`` (kept in declared order)."""
        keep = set(names)
        nodes = tuple(n for n in self.nodes if n in keep)
        return DagStructure(nodes, {n: tuple(p for p in self.parents[n] if p in keep) for n in nodes})

    def is_acyclic(self) -> bool:
        try:
            topological_order(self)
        except CycleError:
            return False
        return True


def topological_order(g: DagStructure) -> tuple[str, ...]:
    """Parents-first order; ties go to the node declared earliest."""
    placed: set[str] = set()
    order: list[str] = []
    remaining = list(g.nodes)
    while remaining:
        for n in remaining:
            if all(p in placed for p in g.parents[n]):
                break
        else:
            raise CycleError(f"cycle among nodes {remaining}")
        remaining.remove(n)
        placed.add(n)
        order.append(n)
    return tuple(order)


def edgeless_over(names: Iterable[str]) -> DagStructure:
    names = tuple(names)
    if not names:
        raise ArgumentError("edgeless graph needs at least one node")
    return DagStructure(names, {})


def complete_dag(names: Sequence[str]) -> DagStructure:
    """Every node is a parent of every later node."""
    names = tuple(names)
    return DagStructure(names, {n: names[:i] for i, n in enumerate(names)})


def _require_same_nodes(p: JointTable, g: DagStructure) -> None:
    if set(g.nodes) != set(p.names):
        raise VariableNameError(
            f"graph nodes {sorted(g.nodes)} differ from table variables {sorted(p.names)}"
        )


def families(p: JointTable, g: DagStructure) -> list[tuple[int, tuple[int, ...]]]:
    """``(child_axis, parent_axes)`` for every node of ``g``, in ``p``'s axis numbering."""
    return [(p.axis(n), p.axes(g.parents[n])) for n in g.nodes]


# ----------------------------------------------------------------------------
# array kernels


def network_information_array(p: np.ndarray, fams: Sequence[tuple[int, Sequence[int]]]) -> float:
    return sum(mi_array(p, (c,), pa) for c, pa in fams)


def projection_array(p: np.ndarray, fams: Sequence[tuple[int, Sequence[int]]]) -> np.ndarray:
    """``prod_i P(X_i | Pa_i)`` as a dense array; zero-mass parent rows are uniform."""
    q = np.ones(p.shape)
    for c, pa in fams:
        fam = marginal_array(p, (c, *pa), keepdims=True)
        par = fam.sum(axis=c, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = np.where(par > 0, fam / np.where(par > 0, par, 1.0), 1.0 / p.shape[c])
        q = q * cond
    return q


# ----------------------------------------------------------------------------
# table-level operations


def is_consistent(p: JointTable, g: DagStructure, tol: float = 1e-9) -> bool:
    """True when ``p`` equals its own factorization over ``g`` within ``tol`` (max-norm)."""
    _require_same_nodes(p, g)
    q = projection_array(p.array, families(p, g))
    return bool(np.max(np.abs(q - p.array)) < tol)


def network_information(p: JointTable, g: DagStructure) -> float:
    """Sum over the nodes of ``g`` of ``I(X_i; Pa_i)`` under ``p`` (nats)."""
    return network_information_array(p.array, families(p, g))


def _divergence_by_markov_terms(p: JointTable, g: DagStructure, order: Sequence[str]) -> float:
    total = 0.0
    seen: list[str] = []
    for n in order:
        pa = set(g.parents[n])
        rest = [q for q in seen if q not in pa]
        total += cmi_array(p.array, (p.axis(n),), p.axes(rest), p.axes(g.parents[n]))
        seen.append(n)
    return total


def divergence_from_network(
    p: JointTable,
    g: DagStructure,
    *,
    check: bool = True,
    order: Sequence[str] | None = None,
) -> float:
    """Minimal KL divergence from ``p`` to distributions that factorize over ``g``.

    Returns ``multi_information(p) - network_information(p, g)``. With
    ``check`` the sum of conditional-independence violations along a
    topological order (``order`` if given) is evaluated too and the two must
    agree within 1e-10.
    """
    _require_same_nodes(p, g)
    value = multi_information_array(p.array) - network_information(p, g)
    if check or order is not None:
        if order is None:
            order = topological_order(g)
        else:
            pos = {n: i for i, n in enumerate(order)}
            if set(order) != set(g.nodes) or any(
                pos[q] > pos[n] for n in g.nodes for q in g.parents[n]
            ):
                raise ArgumentError(f"{list(order)} is not a topological order of the graph")
        other = _divergence_by_markov_terms(p, g, order)
        if abs(other - value) > DIVERGENCE_CHECK_TOL:
            raise ConsistencyError(
                f"D(P||G) disagrees between formulas: {value!r} vs {other!r}"
            )
    return max(value, 0.0) if value > -DIVERGENCE_CHECK_TOL else value


def divergence_by_markov_terms(p: JointTable, g: DagStructure, order: Sequence[str] | None = None) -> float:
    """The conditional-information form of ``D(P||G)`` on its own."""
    _require_same_nodes(p, g)
    return _divergence_by_markov_terms(p, g, order or topological_order(g))


def kl_projection(p: JointTable, g: DagStructure) -> JointTable:
    """The distribution ``prod_i P(X_i | Pa_i)`` built from ``p``'s own conditionals."""
    _require_same_nodes(p, g)
    topological_order(g)
    q = projection_array(p.array, families(p, g))
    return JointTable(p.variables, q, tol=1e-9)
