"""Text format for bottleneck models and plain DAGs.

One statement per line; ``#`` starts a comment::

    bottleneck T_A 2        # name and cardinality
    in A -> T_A             # G_in edge (comma-separated parents allowed)
    out T_A -> A            # G_out edge
    out T_A, T_B -> B

Files given to ``project`` contain bare ``X -> Y`` edges (``node X`` declares
an isolated node). An ``in`` edge between observed variables replaces the
default complete G_in over the observed part.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .core_prob import JointTable, Variable
from .errors import ParseError, ValidationError
from .graph import DagStructure
from .problem import MibProblem

Edge = tuple[str, str]


@dataclass
class ModelSpec:
    bottlenecks: list[tuple[str, int]] = field(default_factory=list)
    gin_edges: list[Edge] = field(default_factory=list)
    gout_edges: list[Edge] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)
    nodes: list[str] = field(default_factory=list)


def _parse_edges(text: str, lineno: int) -> list[Edge]:
    if text.count("->") != 1:
        raise ParseError(f"expected 'parents -> child', got {text!r}", lineno)
    left, right = (s.strip() for s in text.split("->"))
    parents = [p.strip() for p in left.split(",")]
    if not right or " " in right or "," in right or not all(parents) or any(" " in p for p in parents):
        raise ParseError(f"malformed edge {text!r}", lineno)
    return [(p, right) for p in parents]


def parse_model_spec(text: str) -> ModelSpec:
    spec = ModelSpec()
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if head == "bottleneck":
            parts = rest.split()
            if len(parts) != 2:
                raise ParseError("expected 'bottleneck NAME CARDINALITY'", lineno)
            try:
                card = int(parts[1])
            except ValueError:
                raise ParseError(f"cardinality {parts[1]!r} is not an integer", lineno) from None
            if card < 1:
                raise ParseError("cardinality must be positive", lineno)
            if parts[0] in seen:
                raise ParseError(f"bottleneck {parts[0]!r} declared twice", lineno)
            seen.add(parts[0])
            spec.bottlenecks.append((parts[0], card))
        elif head == "in":
            spec.gin_edges += _parse_edges(rest, lineno)
        elif head == "out":
            spec.gout_edges += _parse_edges(rest, lineno)
        elif head == "node":
            if not rest or " " in rest:
                raise ParseError("expected 'node NAME'", lineno)
            spec.nodes.append(rest)
        else:
            spec.edges += _parse_edges(line, lineno)
    return spec


def read_model_spec(path) -> ModelSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_model_spec(fh.read())


def dag_from_spec(spec: ModelSpec, names) -> DagStructure:
    """Plain DAG over ``names`` from the bare edges of ``spec``."""
    names = tuple(names)
    unknown = sorted(({n for e in spec.edges for n in e} | set(spec.nodes)) - set(names))
    if unknown:
        raise ValidationError([("unknown-name", f"unknown variable(s) {', '.join(unknown)}")])
    return DagStructure.from_edges(names, spec.edges)


def problem_from_spec(spec: ModelSpec, px: JointTable, cards: dict[str, int] | None = None) -> MibProblem:
    """Assemble a :class:`MibProblem`; ``cards`` overrides declared cardinalities."""
    if spec.edges:
        raise ValidationError([("unknown-name", "bare edges need an 'in' or 'out' prefix in a model file")])
    if not spec.bottlenecks:
        raise ValidationError([("leaf", "model declares no bottleneck variables")])
    cards = dict(cards or {})
    tnames = [t for t, _ in spec.bottlenecks]
    clash = sorted(set(tnames) & set(px.names))
    unknown = sorted(
        {n for e in spec.gin_edges + spec.gout_edges for n in e} - set(tnames) - set(px.names)
    ) + sorted(set(cards) - set(tnames))
    if clash or unknown:
        msgs = [f"bottleneck name {n!r} clashes with an observed variable" for n in clash]
        msgs += [f"unknown variable {n!r}" for n in unknown]
        raise ValidationError([("unknown-name", m) for m in msgs])
    bns = tuple(Variable(t, int(cards.get(t, k))) for t, k in spec.bottlenecks)
    gin_parents = {t: tuple(p for p, c in spec.gin_edges if c == t) for t in tnames}
    obs_edges = [(p, c) for p, c in spec.gin_edges if c in px.names]
    gin_observed = DagStructure.from_edges(px.names, obs_edges) if obs_edges else None
    gout = DagStructure.from_edges(px.names + tuple(tnames), spec.gout_edges)
    return MibProblem(px, bns, gin_parents, gout, gin_observed, label="model")
