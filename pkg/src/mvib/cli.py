"""Command-line front end: ``mvib info|project|solve|anneal|rank-words|generate``.

Every command writes its files into ``--out`` (default ``mvib-out``) through
write-then-rename, including a ``manifest.json`` that records the resolved
settings. Exit codes: 0 success, 1 invalid problem or arguments, 2 unreadable
or malformed input, 3 non-convergence (outputs are still written).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .anneal import AnnealConfig, AnnealResult, anneal, info_curve_point
from .core_prob import LN2, JointTable, entropy, multi_information, mutual_information
from .data import (
    atomic_write_text,
    format_cooccurrence,
    generate_factorized,
    generate_planted,
    load_cooccurrence,
    rank_informative,
    filter_top_k,
)
from .errors import MibError, ParseError
from .graph import divergence_from_network, kl_projection
from .modelspec import dag_from_spec, problem_from_spec, read_model_spec
from .problem import PRESETS, MibProblem, SolverState, validate
from .solver import SolverConfig, beta_from_gamma, gamma_from_beta, lagrangian_l1, solve

EXIT_OK, EXIT_VALIDATION, EXIT_PARSE, EXIT_NOT_CONVERGED = 0, 1, 2, 3


def fmt(x: float) -> str:
    return f"{float(x):.9g}"


def nats_bits(label: str, nats: float) -> str:
    return f"{label} = {nats:.6f} nats ({nats / LN2:.6f} bits)"


@dataclass
class RunManifest:
    """Resolved settings of one invocation, echoed as ``manifest.json``."""

    command: str
    argv: list[str]
    input: str | None
    input_sha256: str | None
    output: str
    problem: dict[str, Any] = field(default_factory=dict)
    mode: str | None = None
    beta: float | None = None
    gamma: float | None = None
    schedule: dict[str, float] | None = None
    solver: dict[str, Any] | None = None
    anneal: dict[str, Any] | None = None
    extra: dict[str, Any] = field(default_factory=dict)
    version: str = __version__

    def __post_init__(self):
        fixed = self.beta is not None or self.gamma is not None
        if fixed and self.schedule is not None:
            raise MibError("a run has either a fixed trade-off or a schedule, not both")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


# ----------------------------------------------------------------------------
# output formatting


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def conditionals_csv(state: SolverState) -> str:
    rows = [["variable", "given", "value", "probability"]]
    for ct in state.conditionals:
        cards = [v.cardinality for v in ct.given]
        for r, idx in enumerate(np.ndindex(*cards)):
            given = ";".join(f"{v.name}={v.label(i)}" for v, i in zip(ct.given, idx))
            for t, prob in enumerate(ct.rows[r]):
                rows.append([ct.target.name, given, ct.target.label(t), fmt(prob)])
    return _csv(rows)


def trace_csv(trace) -> str:
    rows = [["sweep", "l1", "l2", "max_change"]]
    for i, (l1, l2, ch) in enumerate(zip(trace.l1, trace.l2, trace.max_change), start=1):
        rows.append([i, fmt(l1), fmt(l2), fmt(max(ch, default=0.0))])
    return _csv(rows)


def curve_csv(result: AnnealResult) -> str:
    if not result.curve:
        return "beta\n"
    first = result.curve[0]
    tnames = list(first.cardinalities)
    pkeys = list(first.prediction)
    header = ["beta", "converged", "splits"]
    header += [f"card_{t}" for t in tnames]
    header += [c for t in tnames for c in (f"compression_{t}", f"compression_frac_{t}")]
    header += [c for k in pkeys for c in (k, f"frac_{k}")]
    header += ["zero_reference"]
    rows = [header]
    for pt in result.curve:
        row = [fmt(pt.beta), int(pt.converged), ";".join(pt.splits)]
        row += [pt.cardinalities[t] for t in tnames]
        row += [fmt(v) for t in tnames for v in pt.compression[t]]
        row += [fmt(v) for k in pkeys for v in pt.prediction[k]]
        row += [";".join(pt.zero_reference)]
        rows.append(row)
    return _csv(rows)


def tree_text(result: AnnealResult) -> str:
    lines = [line for tree in result.trees.values() for line in tree.lines()]
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------------
# argument handling


def _sha256(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def parse_schedule(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    try:
        start, factor, end = (float(x) for x in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"schedule must be start:factor:end, got {text!r}") from None
    return start, factor, end


def parse_cards(text: str) -> dict[str, int]:
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, sep, value = item.partition("=")
        try:
            out[name.strip()] = int(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"cards entries look like T1=4, got {item!r}") from None
        if not sep or not name.strip():
            raise argparse.ArgumentTypeError(f"cards entries look like T1=4, got {item!r}")
    return out


def _match_cards(cards: dict[str, int], names) -> dict[str, int]:
    """Map user card keys onto bottleneck names, case-insensitively if needed."""
    out = {}
    lower = {n.lower(): n for n in names}
    for key, value in cards.items():
        name = key if key in names else lower.get(key.lower())
        if name is None:
            raise MibError(f"--cards names unknown bottleneck {key!r} (have {', '.join(names)})")
        out[name] = value
    return out


def _preset_names(preset: str, pab: JointTable) -> list[str]:
    if preset == "ib":
        return ["T"]
    if preset == "parallel":
        return ["T1", "T2"]
    return [f"T_{n}" for n in pab.names]


def build_problem(args, pab: JointTable, default_card: int) -> tuple[MibProblem, dict[str, Any], dict[str, int]]:
    """Problem plus its manifest description and per-bottleneck cardinalities."""
    if args.model:
        spec = read_model_spec(args.model)
        declared = {t: k for t, k in spec.bottlenecks}
        cards = {**declared, **_match_cards(args.cards, list(declared))}
        problem = problem_from_spec(spec, pab, cards)
        desc = {"model": args.model, "model_sha256": _sha256(args.model)}
    else:
        names = _preset_names(args.preset, pab)
        cards = {n: default_card for n in names}
        cards.update(_match_cards(args.cards, names))
        problem = PRESETS[args.preset](pab, *[cards[n] for n in names], out_variant=args.out_variant)
        desc = {"preset": args.preset, "out_variant": args.out_variant}
    validate(problem)
    desc["cards"] = dict(cards)
    return problem, desc, cards


def resolve_tradeoff(args) -> tuple[str, float]:
    """Mode and the trade-off value in that mode's parameterization."""
    mode = args.mode or ("l2" if args.gamma is not None else "l1")
    if args.beta is not None:
        return mode, args.beta if mode == "l1" else gamma_from_beta(args.beta)
    return mode, args.gamma if mode == "l2" else beta_from_gamma(args.gamma)


def solver_config(args, mode: str, tradeoff: float = 1.0, default_sweeps: int = 10000) -> SolverConfig:
    return SolverConfig(
        mode=mode,
        tradeoff=tradeoff,
        update_variant=args.update,
        tolerance=args.tol,
        max_sweeps=args.max_sweeps if args.max_sweeps is not None else default_sweeps,
        seed=args.seed,
    )


def _manifest(args, argv, **kw) -> RunManifest:
    path = getattr(args, "input", None)
    return RunManifest(
        command=args.command,
        argv=list(argv),
        input=path,
        input_sha256=_sha256(path) if path else None,
        output=args.out,
        **kw,
    )


def _write(out: str, files: dict[str, str]) -> None:
    for name, text in files.items():
        atomic_write_text(Path(out) / name, text)


# ----------------------------------------------------------------------------
# commands


def cmd_info(args, argv) -> int:
    pab = load_cooccurrence(args.input)
    a, b = pab.names
    rows = [
        (f"H({a})", entropy(pab, [a])),
        (f"H({b})", entropy(pab, [b])),
        (f"H({a},{b})", entropy(pab)),
        (f"I({a};{b})", mutual_information(pab, [a], [b])),
        ("multi-information", multi_information(pab)),
    ]
    for label, v in rows:
        print(nats_bits(label, v))
    table = [["quantity", "nats", "bits"]] + [[k, fmt(v), fmt(v / LN2)] for k, v in rows]
    _write(args.out, {"info.csv": _csv(table), "manifest.json": _manifest(args, argv).to_json()})
    return EXIT_OK


def cmd_project(args, argv) -> int:
    pab = load_cooccurrence(args.input)
    g = dag_from_spec(read_model_spec(args.model), pab.names)
    q = kl_projection(pab, g)
    div = divergence_from_network(pab, g)
    print(nats_bits("D(P||G)", div))
    rows = [list(pab.names) + ["probability"]]
    for idx in np.ndindex(*q.shape):
        rows.append([v.label(i) for v, i in zip(q.variables, idx)] + [fmt(q.array[idx])])
    man = _manifest(args, argv, problem={"model": args.model, "model_sha256": _sha256(args.model)})
    man.extra["divergence_nats"] = fmt(div)
    _write(args.out, {"projection.csv": _csv(rows), "manifest.json": man.to_json()})
    return EXIT_OK


def cmd_solve(args, argv) -> int:
    pab = load_cooccurrence(args.input)
    problem, desc, _ = build_problem(args, pab, default_card=2)
    mode, value = resolve_tradeoff(args)
    cfg = solver_config(args, mode, value)
    res = solve(problem, cfg, restarts=args.restarts)
    beta = cfg.beta
    point = info_curve_point(problem, res.state, value, converged=res.converged)
    print(f"sweeps: {res.sweeps}  converged: {'yes' if res.converged else 'no'}")
    print(f"L1 = {fmt(lagrangian_l1(problem, res.state, beta))} nats")
    for t, (nats, frac) in point.compression.items():
        print(nats_bits(f"I({t};{','.join(problem.gin_parents[t])})", nats) + f"  fraction {frac:.4f}")
    for key, (nats, frac) in point.prediction.items():
        print(nats_bits(key, nats) + f"  fraction {frac:.4f}")
    man = _manifest(
        args, argv, problem=desc, mode=mode,
        beta=beta, gamma=gamma_from_beta(beta) if beta < 1 else None,
        solver=asdict(cfg),
    )
    man.extra["restarts"] = args.restarts
    man.extra["converged"] = res.converged
    _write(args.out, {
        "conditionals.csv": conditionals_csv(res.state),
        "trace.csv": trace_csv(res.trace),
        "manifest.json": man.to_json(),
    })
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_anneal(args, argv) -> int:
    pab = load_cooccurrence(args.input)
    problem, desc, cards = build_problem(args, pab, default_card=args.max_values)
    mode = args.mode or "l1"
    start, factor, end = args.schedule
    cfg = AnnealConfig(
        beta_start=start,
        beta_factor=factor,
        beta_end=end,
        alpha=args.alpha,
        split_threshold=args.split_threshold,
        max_values=dict(cards),
        solver=solver_config(args, mode, default_sweeps=5000),
        seed=args.seed,
        continue_at_cap=args.continue_at_cap,
    )
    res = anneal(problem, cfg)
    for t, tree in res.trees.items():
        print(f"{t}: {tree.n_leaves} leaves")
    if res.curve:
        last = res.curve[-1]
        for key, (nats, frac) in last.prediction.items():
            print(nats_bits(key, nats) + f"  fraction {frac:.4f}")
    settings = asdict(cfg)
    settings.pop("solver")
    man = _manifest(
        args, argv, problem=desc, mode=mode,
        schedule={"start": start, "factor": factor, "end": end},
        solver=asdict(cfg.solver), anneal=settings,
    )
    man.extra["converged"] = res.converged
    _write(args.out, {
        "tree.txt": tree_text(res),
        "curve.csv": curve_csv(res),
        "conditionals.csv": conditionals_csv(res.state),
        "manifest.json": man.to_json(),
    })
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_rank_words(args, argv) -> int:
    pab = load_cooccurrence(args.input)
    ranked = rank_informative(pab)
    shown = ranked if args.top is None else ranked[: args.top]
    for label, score in shown:
        print(f"{label}\t{fmt(score)}")
    files = {"scores.csv": _csv([["label", "score"]] + [[w, fmt(s)] for w, s in ranked])}
    if args.top is not None:
        files["filtered.tsv"] = format_cooccurrence(filter_top_k(pab, args.top))
    man = _manifest(args, argv)
    man.extra["top"] = args.top
    files["manifest.json"] = man.to_json()
    _write(args.out, files)
    return EXIT_OK


def cmd_generate(args, argv) -> int:
    if args.kind == "planted":
        data = generate_planted(args.rows, args.cols, args.row_blocks, args.col_blocks, args.noise, args.seed)
        labels = [["axis", "label", "block"]]
        labels += [["row", r, int(b)] for r, b in zip(data.row_labels, data.row_blocks)]
        labels += [["col", c, int(b)] for c, b in zip(data.col_labels, data.col_blocks)]
        files = {"joint.tsv": format_cooccurrence(data), "planted.csv": _csv(labels)}
        params = {k: getattr(args, k) for k in ("rows", "cols", "row_blocks", "col_blocks", "noise", "seed")}
    else:
        files = {"joint.tsv": format_cooccurrence(generate_factorized(args.agreement))}
        params = {"agreement": args.agreement}
    man = _manifest(args, argv)
    man.extra.update(kind=args.kind, **params)
    files["manifest.json"] = man.to_json()
    _write(args.out, files)
    print(f"wrote {Path(args.out) / 'joint.tsv'}")
    return EXIT_OK


# ----------------------------------------------------------------------------
# parser


def _agreement(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mvib", description="Multivariate information bottleneck tools.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def with_io(sp, needs_input=True):
        if needs_input:
            sp.add_argument("input", help="co-occurrence file (row<TAB>col<TAB>weight)")
        sp.add_argument("--out", default="mvib-out", help="output directory (default: mvib-out)")
        return sp

    def with_problem(sp):
        g = sp.add_mutually_exclusive_group(required=True)
        g.add_argument("--preset", choices=sorted(PRESETS))
        g.add_argument("--model", help="model-spec file")
        sp.add_argument("--out-variant", choices=["a", "b"], default="a")
        sp.add_argument("--cards", type=parse_cards, default={}, help="e.g. t1=4,t2=2")
        sp.add_argument("--mode", choices=["l1", "l2"])
        sp.add_argument("--update", choices=["sync", "async"], default="async")
        sp.add_argument("--tol", type=float, default=1e-9)
        sp.add_argument("--max-sweeps", type=int)
        sp.add_argument("--seed", type=int, default=0)

    with_io(sub.add_parser("info", help="entropies and informations of the input"))

    sp = with_io(sub.add_parser("project", help="KL projection onto a DAG"))
    sp.add_argument("--model", required=True, help="file of 'X -> Y' edges")

    sp = with_io(sub.add_parser("solve", help="solve at a fixed trade-off"))
    with_problem(sp)
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--beta", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--schedule", type=parse_schedule, help=argparse.SUPPRESS)
    sp.add_argument("--restarts", type=int, default=1)

    sp = with_io(sub.add_parser("anneal", help="deterministic annealing over a schedule"))
    with_problem(sp)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--schedule", type=parse_schedule, default=(0.05, 1.15, 50.0), help="start:factor:end")
    g.add_argument("--beta", type=float, help=argparse.SUPPRESS)
    g.add_argument("--gamma", type=float, help=argparse.SUPPRESS)
    sp.add_argument("--alpha", type=float, default=0.1)
    sp.add_argument("--split-threshold", type=float, default=0.05)
    sp.add_argument("--max-values", type=int, default=16, help="cap for bottlenecks not named in --cards")
    sp.add_argument("--continue-at-cap", action="store_true", help="keep tracking after every cap is reached")

    sp = with_io(sub.add_parser("rank-words", help="score rows by informativeness"))
    sp.add_argument("--top", type=int, help="print the top K and write the filtered joint")

    sp = with_io(sub.add_parser("generate", help="write a synthetic co-occurrence file"), needs_input=False)
    sp.add_argument("kind", choices=["planted", "factorized"])
    sp.add_argument("--rows", type=int, default=80)
    sp.add_argument("--cols", type=int, default=20)
    sp.add_argument("--row-blocks", type=int, default=6)
    sp.add_argument("--col-blocks", type=int, default=3)
    sp.add_argument("--noise", type=float, default=0.05)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--agreement", type=_agreement, default=[0.9, 0.9])
    return p


COMMANDS = {
    "info": cmd_info,
    "project": cmd_project,
    "solve": cmd_solve,
    "anneal": cmd_anneal,
    "rank-words": cmd_rank_words,
    "generate": cmd_generate,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "solve" and args.schedule is not None:
        parser.error("solve takes --beta or --gamma; --schedule belongs to anneal")
    if args.command == "anneal" and (args.beta is not None or args.gamma is not None):
        parser.error("anneal takes --schedule; --beta/--gamma belong to solve")
    if args.command == "anneal" and args.schedule is not None and args.mode is None:
        args.mode = "l1"
    try:
        return COMMANDS[args.command](args, argv)
    except (ParseError, OSError, UnicodeDecodeError) as e:
        print(f"mvib: input error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except MibError as e:
        print(f"mvib: error: {' '.join(str(e).split())}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
