"""Dense discrete probability tables and information functionals.

Every quantity is computed in nats. A :class:`JointTable` stores its
probabilities as an n-dimensional float64 array with one axis per variable,
so the flat C-order view is the mixed-radix layout over the declared
variable order.

The ``*_array`` kernels at the bottom work on raw arrays and axis tuples;
the solver uses them directly to avoid rebuilding table objects in its
inner loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import entr, rel_entr

from .errors import (
    ArgumentError,
    CapacityError,
    NormalizationError,
    ShapeError,
    VariableNameError,
    ZeroProbabilityError,
)

NORMALIZATION_TOL = 1e-12
LN2 = math.log(2.0)

#: Largest number of cells any dense joint may hold. Adjust with :func:`set_max_cells`.
MAX_CELLS = 10**7


def set_max_cells(n: int) -> int:
    """Set the global dense-table capacity and return the previous value."""
    global MAX_CELLS
    if n < 1:
        raise ValueError("capacity must be positive")
    old, MAX_CELLS = MAX_CELLS, int(n)
    return old


def check_capacity(shape: Sequence[int], what: str = "joint table") -> int:
    cells = math.prod(int(s) for s in shape)
    if cells > MAX_CELLS:
        raise CapacityError(
            f"{what} would hold {cells} cells, above the cap of {MAX_CELLS}"
        )
    return cells


@dataclass(frozen=True)
class Variable:
    """A named discrete variable with values ``0..cardinality-1``.

    ``labels`` optionally names the values; it is carried along for I/O
    and does not take part in equality.
    """

    name: str
    cardinality: int
    labels: tuple[str, ...] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ArgumentError("variable name must be a non-empty string")
        if int(self.cardinality) != self.cardinality or self.cardinality < 1:
            raise ArgumentError(
                f"variable {self.name!r}: cardinality must be a positive integer"
            )
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != self.cardinality:
                raise ArgumentError(f"variable {self.name!r}: wrong number of labels")
            if len(set(labels)) != len(labels):
                raise ArgumentError(f"variable {self.name!r}: labels must be unique")
            object.__setattr__(self, "labels", labels)

    def label(self, value: int) -> str:
        return self.labels[value] if self.labels is not None else str(value)


def _unique_names(variables: Iterable[Variable]) -> tuple[Variable, ...]:
    variables = tuple(variables)
    names = [v.name for v in variables]
    if len(set(names)) != len(names):
        raise ArgumentError(f"duplicate variable names in {names}")
    return variables


class JointTable:
    """Normalized probability table over an ordered tuple of variables.

    Construction checks nonnegativity and that the entries sum to one within
    ``tol``, then renormalizes exactly. The stored array is read-only.
    """

    __slots__ = ("variables", "_p", "_index")

    def __init__(
        self,
        variables: Sequence[Variable],
        probabilities,
        *,
        tol: float = NORMALIZATION_TOL,
    ):
        variables = _unique_names(variables)
        shape = tuple(v.cardinality for v in variables)
        check_capacity(shape)
        p = np.array(probabilities, dtype=np.float64)
        if p.size != math.prod(shape):
            raise ShapeError(
                f"{p.size} probabilities given for a table of shape {shape}"
            )
        p = p.reshape(shape)
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise NormalizationError("probabilities must be finite and nonnegative")
        total = p.sum()
        if abs(total - 1.0) > tol:
            raise NormalizationError(f"probabilities sum to {total!r}, not 1")
        p = p / total
        p.flags.writeable = False
        self.variables = variables
        self._p = p
        self._index = {v.name: i for i, v in enumerate(variables)}

    @classmethod
    def from_weights(cls, variables: Sequence[Variable], weights) -> "JointTable":
        """Normalize arbitrary nonnegative weights into a table."""
        w = np.asarray(weights, dtype=np.float64)
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise NormalizationError("weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise NormalizationError("weights must contain a positive entry")
        return cls(variables, w / total)

    @classmethod
    def uniform(cls, variables: Sequence[Variable]) -> "JointTable":
        shape = tuple(v.cardinality for v in variables)
        return cls.from_weights(variables, np.ones(shape))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def shape(self) -> tuple[int, ...]:
        return self._p.shape

    @property
    def array(self) -> np.ndarray:
        """Read-only n-dimensional view, one axis per variable."""
        return self._p

    @property
    def flat(self) -> np.ndarray:
        return self._p.reshape(-1)

    def variable(self, name: str) -> Variable:
        return self.variables[self.axis(name)]

    def axis(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise VariableNameError(
                f"unknown variable {name!r}; table has {list(self.names)}"
            ) from None

    def axes(self, names: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.axis(n) for n in names)

    def __getitem__(self, assignment: Mapping[str, int]) -> float:
        """Probability of a full assignment."""
        idx = tuple(int(assignment[v.name]) for v in self.variables)
        return float(self._p[idx])

    def __repr__(self):
        return f"JointTable({list(self.names)}, shape={self.shape})"

    def allclose(self, other: "JointTable", atol: float = 1e-12) -> bool:
        return self.names == other.names and bool(
            np.max(np.abs(self._p - other._p), initial=0.0) <= atol
        )


@dataclass(frozen=True, eq=False)
class ConditionalTable:
    """``P(target | given)`` as an array of shape ``(*given_cards, target_card)``."""

    target: Variable
    given: tuple[Variable, ...]
    table: np.ndarray

    def __post_init__(self):
        given = _unique_names(self.given)
        object.__setattr__(self, "given", given)
        t = np.array(self.table, dtype=np.float64)
        shape = tuple(v.cardinality for v in given) + (self.target.cardinality,)
        if t.size != math.prod(shape):
            raise ShapeError(f"conditional table needs shape {shape}, got {t.shape}")
        t = t.reshape(shape)
        if not np.all(np.isfinite(t)) or np.any(t < 0):
            raise NormalizationError("conditional entries must be finite and nonnegative")
        sums = t.sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise NormalizationError("every conditional row must sum to 1")
        # rows already within rounding of 1 are kept bit-for-bit
        off = np.abs(sums - 1.0) > 1e-14
        if np.any(off):
            t = np.where(off[..., None], t / sums[..., None], t)
        t.flags.writeable = False
        object.__setattr__(self, "table", t)

    @property
    def rows(self) -> np.ndarray:
        """Rows flattened to ``(n_configs, target_card)``."""
        return self.table.reshape(-1, self.target.cardinality)

    def row(self, given: Mapping[str, int]) -> np.ndarray:
        return self.table[tuple(int(given[v.name]) for v in self.given)]


# ----------------------------------------------------------------------------
# table-level operations


def marginalize(joint: JointTable, keep: Iterable[str]) -> JointTable:
    """Sum out every variable not in ``keep``; the declared order is preserved."""
    keep = set(keep)
    for name in keep:
        joint.axis(name)
    axes = tuple(i for i, v in enumerate(joint.variables) if v.name in keep)
    variables = [joint.variables[i] for i in axes]
    return JointTable(variables, marginal_array(joint.array, axes))


def condition(joint: JointTable, given: Mapping[str, int]) -> JointTable:
    """Distribution of the unbound variables given the evidence ``given``."""
    index: list = [slice(None)] * len(joint.variables)
    for name, value in given.items():
        ax = joint.axis(name)
        card = joint.variables[ax].cardinality
        if not 0 <= int(value) < card:
            raise ArgumentError(f"value {value} out of range for {name!r} (|{name}|={card})")
        index[ax] = int(value)
    sub = joint.array[tuple(index)]
    mass = sub.sum()
    if mass <= 0:
        raise ZeroProbabilityError(f"evidence {dict(given)} has probability zero")
    rest = [v for v in joint.variables if v.name not in given]
    return JointTable(rest, sub / mass)


def _as_distribution(x) -> np.ndarray:
    return np.asarray(x.array if isinstance(x, JointTable) else x, dtype=np.float64)


def kl_divergence(p, q) -> float:
    """``D(p || q)`` in nats; ``+inf`` when ``p`` puts mass where ``q`` has none."""
    if isinstance(p, JointTable) and isinstance(q, JointTable) and p.names != q.names:
        raise ShapeError(f"outcome spaces differ: {p.names} vs {q.names}")
    pa, qa = _as_distribution(p), _as_distribution(q)
    if pa.shape != qa.shape:
        raise ShapeError(f"outcome spaces differ: shapes {pa.shape} vs {qa.shape}")
    return float(rel_entr(pa, qa).sum())


def entropy(joint: JointTable, names: Iterable[str] | None = None) -> float:
    """Shannon entropy (nats) of the marginal over ``names`` (all by default)."""
    axes = tuple(range(joint.array.ndim)) if names is None else joint.axes(names)
    return entropy_array(joint.array, axes)


def _disjoint_axes(joint: JointTable, *sets: Iterable[str]) -> list[tuple[int, ...]]:
    out = [tuple(joint.axis(n) for n in dict.fromkeys(s)) for s in sets]
    seen: set[int] = set()
    for axes in out:
        if seen.intersection(axes):
            raise ArgumentError("variable sets must be pairwise disjoint")
        seen.update(axes)
    return out


def mutual_information(joint: JointTable, set_y: Iterable[str], set_z: Iterable[str]) -> float:
    """``I(Y; Z)`` in nats between two disjoint groups of variables."""
    y, z = _disjoint_axes(joint, set_y, set_z)
    return mi_array(joint.array, y, z)


def conditional_mutual_information(
    joint: JointTable,
    set_y: Iterable[str],
    set_z: Iterable[str],
    set_w: Iterable[str],
) -> float:
    """``I(Y; Z | W)`` in nats for three pairwise-disjoint groups."""
    y, z, w = _disjoint_axes(joint, set_y, set_z, set_w)
    return cmi_array(joint.array, y, z, w)


def multi_information(joint: JointTable) -> float:
    """``D(P(X_1..X_n) || P(X_1)...P(X_n))`` in nats."""
    return multi_information_array(joint.array)


def to_bits(nats: float) -> float:
    return nats / LN2


# ----------------------------------------------------------------------------
# array kernels


def marginal_array(p: np.ndarray, keep_axes: Sequence[int], keepdims: bool = False) -> np.ndarray:
    """Sum ``p`` over all axes outside ``keep_axes`` (result keeps ascending axis order)."""
    keep = set(keep_axes)
    drop = tuple(i for i in range(p.ndim) if i not in keep)
    return p.sum(axis=drop, keepdims=keepdims) if drop else p


def _grouped(p: np.ndarray, groups: Sequence[Sequence[int]]) -> np.ndarray:
    """Marginal over the union of ``groups``, reshaped to one axis per group."""
    flat = [a for g in groups for a in g]
    m = marginal_array(p, flat)
    kept = sorted(flat)
    m = np.transpose(m, [kept.index(a) for a in flat])
    sizes = [math.prod(p.shape[a] for a in g) for g in groups]
    return m.reshape(sizes)


def entropy_array(p: np.ndarray, axes: Sequence[int]) -> float:
    if len(axes) == 0:
        return 0.0
    return float(entr(marginal_array(p, axes)).sum())


def mi_array(p: np.ndarray, y_axes: Sequence[int], z_axes: Sequence[int]) -> float:
    if len(y_axes) == 0 or len(z_axes) == 0:
        return 0.0
    m = _grouped(p, [y_axes, z_axes])
    total = m.sum()
    py = m.sum(axis=1, keepdims=True)
    pz = m.sum(axis=0, keepdims=True)
    # total==1 for normalized input; kept so unnormalized probes stay well defined
    return float(rel_entr(m, py * pz / total).sum())


def cmi_array(
    p: np.ndarray,
    y_axes: Sequence[int],
    z_axes: Sequence[int],
    w_axes: Sequence[int],
) -> float:
    if len(w_axes) == 0:
        return mi_array(p, y_axes, z_axes)
    if len(y_axes) == 0 or len(z_axes) == 0:
        return 0.0
    m = _grouped(p, [y_axes, z_axes, w_axes])
    pyw = m.sum(axis=1, keepdims=True)
    pzw = m.sum(axis=0, keepdims=True)
    pw = m.sum(axis=(0, 1), keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ref = np.where(pw > 0, pyw * pzw / np.where(pw > 0, pw, 1.0), 0.0)
    return float(rel_entr(m, ref).sum())


def multi_information_array(p: np.ndarray) -> float:
    if p.ndim <= 1:
        return 0.0
    prod = np.ones(p.shape)
    for ax in range(p.ndim):
        prod = prod * marginal_array(p, (ax,), keepdims=True)
    return float(rel_entr(p, prod).sum())
