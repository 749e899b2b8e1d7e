"""Co-occurrence input, planted block data, and informative-row ranking.

Co-occurrence files are UTF-8 text with one ``row<TAB>col<TAB>weight``
record per line; lines without a tab are split on whitespace. Blank lines
and lines starting with ``#`` are skipped. If the first record's weight
field is not a number, that line is a header and its first two fields name
the row and column variables (default ``A``, ``B``).
"""
from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from typing import Sequence
from pathlib import Path

import numpy as np

from .core_prob import JointTable, Variable, mi_array
from .errors import ArgumentError, ParseError


@dataclass(frozen=True, eq=False)
class CooccurrenceInput:
    """Labelled nonnegative weights over (row, column) pairs.

    ``row_blocks``/``col_blocks`` hold planted block ids when the data came
    from :func:`generate_planted`; ``noise_width`` is then the largest amount
    the noise part can add to a single cell.
    """

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    weights: np.ndarray
    row_name: str = "A"
    col_name: str = "B"
    row_blocks: np.ndarray | None = None
    col_blocks: np.ndarray | None = None
    noise_width: float | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (len(self.row_labels), len(self.col_labels)):
            raise ArgumentError("weights shape must be (n_rows, n_cols)")
        if len(set(self.row_labels)) != len(self.row_labels) or len(set(self.col_labels)) != len(self.col_labels):
            raise ArgumentError("labels must be unique along each axis")
        if np.any(w < 0) or not np.any(w > 0):
            raise ArgumentError("weights must be nonnegative with at least one positive entry")
        object.__setattr__(self, "weights", w)

    def to_joint(self) -> JointTable:
        a = Variable(self.row_name, len(self.row_labels), self.row_labels)
        b = Variable(self.col_name, len(self.col_labels), self.col_labels)
        return JointTable.from_weights([a, b], self.weights)


def _parse_weight(text: str) -> float | None:
    try:
        value = float(text)
    except ValueError:
        return None
    return value


def read_cooccurrence(path) -> CooccurrenceInput:
    rows: dict[str, int] = {}
    cols: dict[str, int] = {}
    cells: dict[tuple[int, int], float] = {}
    names = ("A", "B")
    first = True
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t") if "\t" in line else line.split()
            if len(fields) != 3:
                raise ParseError(f"expected 3 tab-separated fields, got {len(fields)}", lineno)
            r, c, w = (f.strip() for f in fields)
            weight = _parse_weight(w)
            if weight is None:
                if first:
                    names = (r, c)
                    first = False
                    continue
                raise ParseError(f"weight {w!r} is not a number", lineno)
            first = False
            if not math.isfinite(weight) or weight < 0:
                raise ParseError(f"weight {w!r} must be finite and nonnegative", lineno)
            i = rows.setdefault(r, len(rows))
            k = cols.setdefault(c, len(cols))
            if (i, k) in cells:
                raise ParseError(f"duplicate pair ({r!r}, {c!r})", lineno)
            cells[i, k] = weight
    if not cells:
        raise ParseError(f"{path}: no records")
    w = np.zeros((len(rows), len(cols)))
    for (i, k), v in cells.items():
        w[i, k] = v
    if not np.any(w > 0):
        raise ParseError(f"{path}: all weights are zero")
    if names[0] == names[1]:
        raise ParseError(f"{path}: header names must differ")
    return CooccurrenceInput(tuple(rows), tuple(cols), w, names[0], names[1])


def load_cooccurrence(path) -> JointTable:
    """Read a co-occurrence file and normalize it into a two-variable joint."""
    return read_cooccurrence(path).to_joint()


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_cooccurrence(table: JointTable | CooccurrenceInput, header: bool = True) -> str:
    """Render a two-variable table (or raw input) in the co-occurrence format.

    Values use ``repr`` so a load of the output reproduces the table exactly.
    """
    if isinstance(table, CooccurrenceInput):
        rl, cl, w = table.row_labels, table.col_labels, table.weights
        names = (table.row_name, table.col_name)
    else:
        if len(table.variables) != 2:
            raise ArgumentError("co-occurrence output needs a two-variable table")
        a, b = table.variables
        rl = tuple(a.label(i) for i in range(a.cardinality))
        cl = tuple(b.label(i) for i in range(b.cardinality))
        w, names = table.array, table.names
    lines = [f"{names[0]}\t{names[1]}\tweight"] if header else []
    for i, r in enumerate(rl):
        for k, c in enumerate(cl):
            lines.append(f"{r}\t{c}\t{float(w[i, k])!r}")
    return "\n".join(lines) + "\n"


def write_cooccurrence(path, table: JointTable | CooccurrenceInput) -> None:
    atomic_write_text(path, format_cooccurrence(table))


# ----------------------------------------------------------------------------
# planted structure


def generate_planted(
    rows: int,
    cols: int,
    row_blocks: int,
    col_blocks: int,
    noise: float,
    seed: int = 0,
) -> CooccurrenceInput:
    """Block-constant joint with distinct block levels, mixed with uniform noise.

    Rows and columns are split into near-equal blocks and then shuffled. Each
    block gets its own level, a distinct value from ``1..row_blocks*col_blocks``
    in random order, so all row-block and column-block profiles differ. The
    result is ``(1 - noise) * blocks + noise * U`` where ``U`` has i.i.d.
    Uniform(0, 1) cells; both parts are normalized before mixing, so the
    result sums to one and cells within a block differ by at most
    ``noise_width``.
    """
    if not (1 <= row_blocks <= rows and 1 <= col_blocks <= cols):
        raise ArgumentError("need 1 <= blocks <= size on each axis")
    if not 0 <= noise < 1:
        raise ArgumentError("noise must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    rb = rng.permutation(np.repeat(np.arange(row_blocks), [len(c) for c in np.array_split(np.arange(rows), row_blocks)]))
    cb = rng.permutation(np.repeat(np.arange(col_blocks), [len(c) for c in np.array_split(np.arange(cols), col_blocks)]))
    levels = rng.permutation(np.arange(1, row_blocks * col_blocks + 1, dtype=np.float64)).reshape(row_blocks, col_blocks)
    block = levels[rb][:, cb]
    block = block / block.sum()
    u = rng.uniform(0.0, 1.0, size=(rows, cols))
    s = u.sum()
    w = (1.0 - noise) * block + noise * (u / s)
    width_r, width_c = len(str(rows - 1)), len(str(cols - 1))
    return CooccurrenceInput(
        tuple(f"a{i:0{width_r}d}" for i in range(rows)),
        tuple(f"b{k:0{width_c}d}" for k in range(cols)),
        w,
        row_blocks=rb,
        col_blocks=cb,
        noise_width=noise / s,
    )


# ----------------------------------------------------------------------------
# word ranking


def rank_informative(joint: JointTable) -> list[tuple[str, float]]:
    """Rows scored by ``P(w) D(P(C|w) || P(C))`` in nats, highest first.

    The scores add up to ``I(W; C)``. Ties keep label order.
    """
    if len(joint.variables) != 2:
        raise ArgumentError("ranking needs a two-variable joint")
    p = joint.array
    pw = p.sum(axis=1)
    pc = p.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(p) - np.log(pw)[:, None] - np.log(pc)[None, :]), 0.0)
    scores = terms.sum(axis=1)
    w = joint.variables[0]
    labelled = [(w.label(i), float(scores[i])) for i in range(w.cardinality)]
    return sorted(labelled, key=lambda x: (-x[1], x[0]))


def filter_top_k(joint: JointTable, k: int) -> JointTable:
    """Keep the ``k`` highest-scoring rows and renormalize."""
    w = joint.variables[0]
    if not 1 <= k <= w.cardinality:
        raise ArgumentError(f"k must lie in [1, {w.cardinality}]")
    keep_labels = {lab for lab, _ in rank_informative(joint)[:k]}
    idx = [i for i in range(w.cardinality) if w.label(i) in keep_labels]
    labels = tuple(w.label(i) for i in idx) if w.labels is not None else None
    new_w = Variable(w.name, len(idx), labels)
    return JointTable.from_weights([new_w, joint.variables[1]], joint.array[idx])


def total_information(joint: JointTable) -> float:
    return mi_array(joint.array, (0,), (1,))


def generate_factorized(agreement: Sequence[float] = (0.9, 0.9)) -> JointTable:
    """Joint over composite ``A = (A_1, ..., A_m)`` and ``B = (B_1, ..., B_m)``.

    Factor ``i`` pairs two fair bits that agree with probability
    ``agreement[i]``; factors are independent, so ``I(A;B)`` is the sum of the
    per-factor informations. Values are labelled by their bit strings.
    """
    agreement = [float(x) for x in agreement]
    if not agreement or any(not 0 <= q <= 1 for q in agreement):
        raise ArgumentError("agreement values must lie in [0, 1]")
    p = np.ones((1, 1))
    for q in agreement:
        pair = np.array([[q, 1 - q], [1 - q, q]]) / 2
        p = np.einsum("ab,cd->acbd", p, pair).reshape(p.shape[0] * 2, p.shape[1] * 2)
    m = len(agreement)
    labels = tuple(format(i, f"0{m}b") for i in range(2 ** m))
    return JointTable([Variable("A", 2 ** m, labels), Variable("B", 2 ** m, labels)], p)
