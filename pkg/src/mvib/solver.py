"""Self-consistent iteration for the multivariate bottleneck.

Two objectives are available over the same free parameters:

* ``L1 = I^{G_in} - beta * I^{G_out}``
* ``L2 = I^{G_in} + gamma * D(P || G_out)``, equal to ``(1 + gamma) * L1`` at
  ``beta = gamma / (1 + gamma)``.

L2 runs are carried out with the L1 machinery after converting ``gamma`` to
``beta``. Each update replaces ``P(t_j | u_j)`` by
``P(t_j) exp(-beta d(t_j, u_j)) / Z``, where ``d`` sums expected KL terms over
the G_out families that ``T_j`` takes part in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .core_prob import JointTable, kl_divergence, marginal_array
from .errors import (
    ArgumentError,
    BoundaryError,
    ConsistencyError,
    DegenerateRowError,
    DomainError,
)
from .graph import divergence_from_network, edgeless_over, is_consistent, network_information
from .problem import (
    MibProblem,
    SolverState,
    build_joint,
    gin_information_array,
    gout_information_array,
    joint_array,
    make_conditional,
    random_state,
    validate,
)

LAGRANGIAN_CHECK_TOL = 1e-10


# ----------------------------------------------------------------------------
# trade-off conversions


def beta_from_gamma(gamma: float) -> float:
    if not gamma >= 0:
        raise DomainError(f"gamma must be nonnegative, got {gamma!r}")
    if math.isinf(gamma):
        return 1.0
    return gamma / (1.0 + gamma)


def gamma_from_beta(beta: float) -> float:
    if not 0 <= beta < 1:
        raise DomainError(f"L2 covers only 0 <= beta < 1, got {beta!r}")
    return beta / (1.0 - beta)


@dataclass(frozen=True)
class SolverConfig:
    """Settings for one fixed trade-off run.

    ``tradeoff`` is beta in ``l1`` mode and gamma in ``l2`` mode.
    ``reduce_self_terms`` lets bottlenecks whose single input is predicted
    only by themselves in G_out use the equivalent gamma-scaled update (same
    fixed points, much faster near beta = 1); it applies only when beta < 1.
    """

    mode: str = "l1"
    tradeoff: float = 1.0
    update_variant: str = "async"
    tolerance: float = 1e-9
    max_sweeps: int = 10000
    seed: int = 0
    reduce_self_terms: bool = True

    def __post_init__(self):
        if self.mode not in ("l1", "l2"):
            raise ArgumentError(f"mode must be 'l1' or 'l2', got {self.mode!r}")
        if self.update_variant not in ("async", "sync"):
            raise ArgumentError(f"update_variant must be 'async' or 'sync', got {self.update_variant!r}")
        if not self.tolerance > 0:
            raise ArgumentError("tolerance must be positive")
        if not self.tradeoff >= 0:
            raise DomainError("trade-off parameter must be nonnegative")
        if self.max_sweeps < 1:
            raise ArgumentError("max_sweeps must be at least 1")

    @property
    def beta(self) -> float:
        return self.tradeoff if self.mode == "l1" else beta_from_gamma(self.tradeoff)

    def with_tradeoff(self, value: float) -> "SolverConfig":
        return SolverConfig(
            self.mode, float(value), self.update_variant, self.tolerance,
            self.max_sweeps, self.seed, self.reduce_self_terms,
        )


@dataclass
class IterationTrace:
    """Per-sweep record: both Lagrangians and each bottleneck's largest row change."""

    l1: list[float] = field(default_factory=list)
    l2: list[float] = field(default_factory=list)
    max_change: list[tuple[float, ...]] = field(default_factory=list)

    def __len__(self):
        return len(self.l1)


@dataclass(frozen=True)
class SolveResult:
    state: SolverState
    trace: IterationTrace
    converged: bool
    sweeps: int


# ----------------------------------------------------------------------------
# objectives


def lagrangian_l1(problem: MibProblem, state: SolverState, beta: float | None = None) -> float:
    """``I^{G_in} - beta I^{G_out}`` on the joint built from ``state``."""
    beta = state.beta if beta is None else beta
    joint = build_joint(problem, state)
    return network_information(joint, problem.gin_full()) - beta * network_information(joint, problem.gout)


def lagrangian_l2(problem: MibProblem, state: SolverState, gamma: float) -> float:
    """``I^{G_in} + gamma D(P || G_out)``, cross-checked against the multi-information form."""
    if not gamma >= 0:
        raise DomainError("gamma must be nonnegative")
    joint = build_joint(problem, state)
    i_in = network_information(joint, problem.gin_full())
    i_out = network_information(joint, problem.gout)
    value = i_in + gamma * divergence_from_network(joint, problem.gout, check=True)
    other = (1.0 + gamma) * i_in - gamma * i_out
    if abs(value - other) > LAGRANGIAN_CHECK_TOL * max(1.0, gamma):
        raise ConsistencyError(f"L2 forms disagree: {value!r} vs {other!r}")
    return value


def _lagrangians(problem: MibProblem, p: np.ndarray, beta: float) -> tuple[float, float]:
    i_in = gin_information_array(problem, p)
    i_out = gout_information_array(problem, p)
    l1 = i_in - beta * i_out
    l2 = l1 / (1.0 - beta) if beta < 1 else math.nan
    return l1, l2


# ----------------------------------------------------------------------------
# distortion


def _expected_kl(
    p: np.ndarray,
    y: Sequence[int],
    z: Sequence[int],
    u: Sequence[int],
    t: int,
) -> np.ndarray:
    """``sum_{y,z} P(y,z|u) [log P(y|z,u) - log P(y|z,t)]`` with keepdims over ``u`` and ``t``.

    Entries for zero-probability ``u`` are 0; a missing-support term gives +inf.
    """
    yzu = marginal_array(p, (*y, *z, *u), keepdims=True)
    zu = marginal_array(p, (*z, *u), keepdims=True)
    pu = marginal_array(p, tuple(u), keepdims=True)
    yzt = marginal_array(p, (*y, *z, t), keepdims=True)
    zt = marginal_array(p, (*z, t), keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(pu > 0, yzu / np.where(pu > 0, pu, 1.0), 0.0)
        log_a = np.log(yzu) - np.log(zu)
        log_b = np.where(zt > 0, np.log(yzt) - np.log(np.where(zt > 0, zt, 1.0)), -np.inf)
        contrib = np.where(w > 0, w * (log_a - log_b), 0.0)
    keep = set(u) | {t}
    drop = tuple(i for i in range(p.ndim) if i not in keep and contrib.shape[i] > 1)
    out = contrib.sum(axis=drop, keepdims=True) if drop else contrib
    # broadcast back so every u/t axis is present even when a term did not touch it
    shape = [1] * p.ndim
    for ax in keep:
        shape[ax] = p.shape[ax]
    return np.broadcast_to(out, shape)


def _to_table(arr: np.ndarray, u: Sequence[int], t: int) -> np.ndarray:
    """Keepdims ``(u..., t)`` array to table layout ``(*U in declared order, |T|)``."""
    axes = sorted(u) + [t]
    sq = arr.reshape([arr.shape[a] for a in axes])
    perm = [sorted(u).index(a) for a in u] + [len(u)]
    return np.transpose(sq, perm)


def _distortion_table(problem: MibProblem, p: np.ndarray, j: int, skip_self: bool = False) -> np.ndarray:
    lay = problem.layout
    u, t = lay.u_axes[j], lay.t_axes[j]
    shape = [1] * p.ndim
    for ax in (*u, t):
        shape[ax] = p.shape[ax]
    d = np.zeros(shape)
    for term in lay.terms[j]:
        if skip_self and term.is_self:
            continue
        d = d + _expected_kl(p, term.y, term.z, u, t)
    return _to_table(d, u, t)


def distortion(problem: MibProblem, state: SolverState, j) -> np.ndarray:
    """General distortion ``d(t_j, u_j)`` for bottleneck ``j`` (index or name).

    Returns an array shaped like ``P(T_j | U_j)``: one axis per input variable
    in declared order, then the bottleneck's values. Entries are in nats and
    may be ``+inf``.
    """
    validate(problem)
    j = problem.bottleneck_index(j)
    return _distortion_table(problem, joint_array(problem, state.tables), j)


def reduced_distortion(problem: MibProblem, state: SolverState, j) -> tuple[np.ndarray, bool]:
    """Distortion with the self-prediction term folded into the trade-off.

    When bottleneck ``j`` compresses a single variable ``X`` whose only G_out
    parent is ``T_j``, the full distortion contains ``-log P(x | t_j)``.
    Moving that term to the left-hand side of the fixed-point equation leaves
    ``P(t_j|x) ∝ P(t_j) exp(-gamma d'(t_j, x))`` with ``gamma = beta/(1-beta)``.
    Returns ``(d', True)`` in that case and ``(d, False)`` otherwise.
    """
    validate(problem)
    j = problem.bottleneck_index(j)
    red = problem.layout.reducible[j]
    return _distortion_table(problem, joint_array(problem, state.tables), j, skip_self=red), red


# ----------------------------------------------------------------------------
# update step


def _marginal_t(problem: MibProblem, p: np.ndarray, j: int) -> np.ndarray:
    return marginal_array(p, (problem.layout.t_axes[j],))


def _update_rows(pt: np.ndarray, d: np.ndarray, scale: float, name: str) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_pt = np.log(pt)
    if scale == 0:
        expo = np.zeros_like(d)
    else:
        expo = np.where(np.isinf(d), -np.inf, -scale * np.where(np.isinf(d), 0.0, d))
    logw = log_pt + expo
    lse = logsumexp(logw, axis=-1, keepdims=True)
    if not np.all(np.isfinite(lse)):
        raise DegenerateRowError(
            f"{name}: every value has zero weight for some input configuration "
            "(the input distributions have disjoint supports)"
        )
    return np.exp(logw - lse)


def _new_table(problem: MibProblem, p: np.ndarray, j: int, beta: float, reduce: bool) -> np.ndarray:
    red = reduce and beta < 1 and problem.layout.reducible[j]
    d = _distortion_table(problem, p, j, skip_self=red)
    scale = beta / (1.0 - beta) if red else beta
    return _update_rows(_marginal_t(problem, p, j), d, scale, problem.bottlenecks[j].name)


def update_step(problem: MibProblem, state: SolverState, j, beta: float | None = None, *, reduced: bool = False):
    """One application of the self-consistent update to bottleneck ``j``.

    Returns the new ``ConditionalTable``. ``beta`` defaults to ``state.beta``.
    With ``reduced=True`` the gamma-scaled form is used where it applies.
    """
    validate(problem)
    j = problem.bottleneck_index(j)
    beta = state.beta if beta is None else beta
    if not beta >= 0:
        raise DomainError("beta must be nonnegative")
    p = joint_array(problem, state.tables)
    table = _new_table(problem, p, j, beta, reduced)
    return make_conditional(problem, j, table, state.conditionals[j].target.labels)


def fixed_point_residual(problem: MibProblem, state: SolverState, beta: float | None = None) -> float:
    """Max-norm change that one full-form update of each bottleneck would make."""
    validate(problem)
    beta = state.beta if beta is None else beta
    p = joint_array(problem, state.tables)
    res = 0.0
    for j, cur in enumerate(state.tables):
        new = _new_table(problem, p, j, beta, reduce=False)
        res = max(res, float(np.max(np.abs(new - cur))))
    return res


# ----------------------------------------------------------------------------
# iteration


def iterate(problem: MibProblem, state: SolverState | None = None, config: SolverConfig | None = None) -> SolveResult:
    """Apply update steps until the Lagrangian settles.

    Stops once a full sweep changes the run's Lagrangian (L1 or L2 per
    ``config.mode``) by less than ``tolerance`` and no row moves by more than
    ``sqrt(tolerance)``. Hitting ``max_sweeps`` returns with ``converged=False``.
    """
    validate(problem)
    config = config or SolverConfig()
    beta = config.beta
    if state is None:
        state = random_state(problem, config.seed)
    tables = [np.array(t) for t in state.tables]
    p = joint_array(problem, tables)
    l1, l2 = _lagrangians(problem, p, beta)
    use_l2 = config.mode == "l2"
    prev = l2 if use_l2 else l1
    trace = IterationTrace()
    row_tol = math.sqrt(config.tolerance)
    converged = False
    sweeps = 0
    for sweeps in range(1, config.max_sweeps + 1):
        changes = []
        if config.update_variant == "async":
            for j in range(len(tables)):
                new = _new_table(problem, p, j, beta, config.reduce_self_terms)
                changes.append(float(np.max(np.abs(new - tables[j]))))
                tables[j] = new
                p = joint_array(problem, tables)
        else:
            news = [_new_table(problem, p, j, beta, config.reduce_self_terms) for j in range(len(tables))]
            changes = [float(np.max(np.abs(n - o))) for n, o in zip(news, tables)]
            tables = news
            p = joint_array(problem, tables)
        l1, l2 = _lagrangians(problem, p, beta)
        trace.l1.append(l1)
        trace.l2.append(l2)
        trace.max_change.append(tuple(changes))
        cur = l2 if use_l2 else l1
        if abs(prev - cur) < config.tolerance and max(changes, default=0.0) < row_tol:
            converged = True
            break
        prev = cur
    labels = [c.target.labels for c in state.conditionals]
    final = SolverState(
        tuple(make_conditional(problem, j, tb, labels[j]) for j, tb in enumerate(tables)), beta
    )
    return SolveResult(final, trace, converged, sweeps)


def solve(problem: MibProblem, config: SolverConfig, restarts: int = 1) -> SolveResult:
    """Best of ``restarts`` Dirichlet-initialized runs (lowest final Lagrangian)."""
    best = None
    for r in range(restarts):
        init = random_state(problem, np.random.SeedSequence([config.seed, r]))
        res = iterate(problem, init, config)
        key = res.trace.l2[-1] if config.mode == "l2" else res.trace.l1[-1]
        if best is None or key < best[0]:
            best = (key, res)
    return best[1]


# ----------------------------------------------------------------------------
# oracles


def auxiliary_f(problem: MibProblem, state: SolverState, q: JointTable, r: JointTable) -> float:
    """``D(P||r) + beta/(1-beta) D(P||q)`` with ``P`` the joint built from ``state``.

    ``q`` must factorize over G_out and ``r`` must be a product of marginals.
    """
    beta = state.beta
    if not 0 <= beta < 1:
        raise DomainError(f"auxiliary functional needs 0 <= beta < 1, got {beta!r}")
    joint = build_joint(problem, state)
    for name, other in (("q", q), ("r", r)):
        if other.names != joint.names or other.shape != joint.shape:
            raise ArgumentError(f"{name} must be a table over {joint.names} with shape {joint.shape}")
    if not is_consistent(q, problem.gout, 1e-9):
        raise ArgumentError("q does not factorize over G_out")
    if not is_consistent(r, edgeless_over(joint.names), 1e-9):
        raise ArgumentError("r is not a product of its marginals")
    return kl_divergence(joint, r) + beta / (1.0 - beta) * kl_divergence(joint, q)


def _raw_information(m: np.ndarray, y: Sequence[int], z: Sequence[int]) -> float:
    """``sum P(y,z) log P(y,z)/(P(y)P(z))`` on an unnormalized measure."""
    yz = marginal_array(m, (*y, *z), keepdims=True)
    py = marginal_array(m, tuple(y), keepdims=True)
    pz = marginal_array(m, tuple(z), keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(yz > 0, yz * (np.log(yz) - np.log(py) - np.log(pz)), 0.0)
    return float(terms.sum())


def info_gradient_check(
    problem: MibProblem,
    state: SolverState,
    term_y: Sequence[str],
    term_z: Sequence[str],
    j,
    u_j: Mapping[str, int] | Sequence[int],
    t_j: int,
    step: float = 1e-6,
) -> tuple[float, float]:
    """Analytic and central-difference derivative of ``I(Y; Z)`` w.r.t. ``P(t_j | u_j)``.

    The entry is perturbed on its own, without renormalizing the row.
    Returns ``(analytic, numeric)``.
    """
    validate(problem)
    j = problem.bottleneck_index(j)
    names = problem.names
    y = tuple(names.index(n) for n in term_y)
    z = tuple(names.index(n) for n in term_z)
    if not y or not z or set(y) & set(z):
        raise ArgumentError("term_y and term_z must be nonempty and disjoint")
    given = problem.gin_parents[problem.bottlenecks[j].name]
    if isinstance(u_j, Mapping):
        u_idx = tuple(int(u_j[g]) for g in given)
    else:
        u_idx = tuple(int(v) for v in u_j)
    if len(u_idx) != len(given):
        raise ArgumentError(f"u_j must assign {list(given)}")
    entry = u_idx + (int(t_j),)
    tables = [np.array(t) for t in state.tables]
    theta = tables[j][entry]
    if not (step < theta < 1.0 - step):
        raise BoundaryError(f"P(t_j|u_j) = {theta!r} is too close to the boundary for step {step}")

    lay = problem.layout
    p = joint_array(problem, tables)
    # analytic: P(u_j) (E_{P(.|t_j,u_j)}[log P(Y|Z)/P(Y)] - 1)
    sel: list = [slice(None)] * p.ndim
    for ax, v in zip(lay.u_axes[j], u_idx):
        sel[ax] = slice(v, v + 1)
    sel[lay.t_axes[j]] = slice(int(t_j), int(t_j) + 1)
    sub = np.zeros_like(p)
    sub[tuple(sel)] = p[tuple(sel)]
    sel_u = [s if a in lay.u_axes[j] else slice(None) for a, s in enumerate(sel)]
    pu = float(p[tuple(sel_u)].sum())
    cond = sub / sub.sum()
    yz = marginal_array(p, (*y, *z), keepdims=True)
    py = marginal_array(p, y, keepdims=True)
    pz = marginal_array(p, z, keepdims=True)
    cond_yz = marginal_array(cond, (*y, *z), keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(cond_yz > 0, np.log(yz) - np.log(pz) - np.log(py), 0.0)
    analytic = pu * (float((cond_yz * ratio).sum()) - 1.0)

    def value(delta):
        tb = [t.copy() for t in tables]
        tb[j][entry] += delta
        return _raw_information(joint_array(problem, tb), y, z)

    numeric = (value(step) - value(-step)) / (2 * step)
    return analytic, numeric
