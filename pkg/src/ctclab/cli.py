"""Command-line front end.

Exit codes: 0 and 1 are verdicts (HALT/ACCEPT and LOOP/REJECT), 2 means
budgets ran out, 64 is an input error and 65 an input that violates a
numerical invariant.
"""

from __future__ import annotations

import argparse
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from ctclab import quantum as qm
from ctclab.deutsch import (
    EMPTY_TUPLE,
    OracleProgram,
    decide_halt_via_ctc,
    decide_oracle_program,
    halting_kernel,
    truncated_halting_kernel,
)
from ctclab.dist import is_fixed_point
from ctclab.errors import ContractError, InvariantViolation, MachineParseError, ResourceError, StructuralError
from ctclab.machine import MachineSpec, format_machine, load_machine
from ctclab.oracle import Halts, MachineCorpus, budgeted_query
from ctclab.outcomes import Outcome, Verdict
from ctclab.postselect import (
    CoinProgram,
    DeepeningOracle,
    TableOracle,
    build_halt_gadget,
    build_wtt_gadget,
    decide_finite_post,
    decide_infty_post,
    distribution_program,
    halt_gadget_probabilities,
    wtt_branches,
    wtt_conditional_correctness,
)
from ctclab.report import Report, sha256_file, sha256_text

EXIT_YES, EXIT_NO, EXIT_EXHAUSTED = 0, 1, 2
EXIT_INPUT, EXIT_INVARIANT = 64, 65
MAX_REPORTED_SUPPORT = 2000

VERDICT_EXIT = {
    Verdict.HALT: EXIT_YES,
    Verdict.ACCEPT: EXIT_YES,
    Verdict.LOOP_TRUNCATED: EXIT_NO,
    Verdict.REJECT: EXIT_NO,
    Verdict.EXHAUSTED: EXIT_EXHAUSTED,
    Verdict.NOT_FOUND: EXIT_EXHAUSTED,
}


class InputError(Exception):
    pass


class Context:
    """Resolves machine references and records input digests."""

    def __init__(self):
        self.inputs: dict[str, str] = {}
        self._corpus: Optional[MachineCorpus] = None

    @property
    def corpus(self) -> MachineCorpus:
        if self._corpus is None:
            self._corpus = MachineCorpus.load()
        return self._corpus

    def machine(self, ref: str) -> MachineSpec:
        """A path to a machine file, or the name of a bundled corpus machine."""
        path = Path(ref)
        if path.is_file():
            self.inputs[str(path)] = sha256_file(path)
            return load_machine(path)
        if ref in self.corpus:
            spec = self.corpus.spec(ref)
            self.inputs[f"corpus:{ref}"] = sha256_text(format_machine(spec))
            return spec
        raise InputError(f"{ref}: no such file or corpus machine")

    def halts(self, ref: str, spec: MachineSpec, budget: int) -> bool:
        """Ground truth from the corpus, else a budgeted run that must finish."""
        if not Path(ref).is_file() and ref in self.corpus:
            return self.corpus[ref].halts
        answer = budgeted_query(spec, budget)
        if isinstance(answer, Halts):
            return True
        raise InputError(f"{ref}: no ground truth and no halt within {budget} steps; use a corpus machine")

    def text(self, ref: str) -> str:
        path = Path(ref)
        if not path.is_file():
            raise InputError(f"{ref}: no such file")
        self.inputs[str(path)] = sha256_file(path)
        return path.read_text()


def _summarize(d, limit=MAX_REPORTED_SUPPORT) -> dict:
    out = {"support_size": len(d), "mass": d.mass}
    if len(d) <= limit:
        out["distribution"] = d
    return out


# -- decide-halt ------------------------------------------------------------


def cmd_decide_halt(args, ctx: Context, rep: Report) -> int:
    spec = ctx.machine(args.machine)
    d = decide_halt_via_ctc(spec, args.cap, args.depth)
    rep.outcome = d.verdict.value
    rep.details = {"explored_states": len(d.report.states), "horizon": d.horizon, "leaked": d.report.leaked}
    if d.verdict == Verdict.HALT:
        ok = is_fixed_point(halting_kernel(spec).kernel, d.witness)
        rep.witness = {"fixed_point": d.witness, "halt_step": d.halt_step, "is_fixed_point": ok}
    elif d.verdict == Verdict.LOOP_TRUNCATED:
        ok = is_fixed_point(truncated_halting_kernel(spec, args.depth).kernel, d.witness)
        rep.witness = {
            "fixed_point": d.witness,
            "depth": args.depth,
            "residual_bound": d.residual_bound,
            "is_fixed_point_of_truncation": ok,
        }
    else:
        rep.witness = {"reason": f"no closed class within {args.cap} states and depth {args.depth} exceeds horizon {d.horizon}"}
    return VERDICT_EXIT[d.verdict]


# -- compose ----------------------------------------------------------------


def _machine_refs(prog: OracleProgram, pairs: list[str]) -> dict[str, str]:
    """Query name -> machine reference; unbound names refer to themselves."""
    given = {}
    for item in pairs or []:
        name, sep, ref = item.partition("=")
        if not sep:
            raise InputError(f"--machine expects NAME=PATH, got {item!r}")
        given[name] = ref
    return {name: given.get(name, name) for name in prog.machines()}


def _machine_map(ctx: Context, prog: OracleProgram, pairs: list[str]) -> dict[str, MachineSpec]:
    return {name: ctx.machine(ref) for name, ref in _machine_refs(prog, pairs).items()}


def cmd_compose(args, ctx: Context, rep: Report) -> int:
    prog = OracleProgram.parse(ctx.text(args.program), source=args.program)
    specs = _machine_map(ctx, prog, args.machine)
    r = decide_oracle_program(prog, specs, args.cap, args.depth)
    rep.outcome = r.verdict.value
    rep.witness["components"] = {
        name: {
            "verdict": d.verdict.value,
            "fixed_point": _summarize(d.witness) if d.witness is not None else None,
            "halt_step": d.halt_step,
        }
        for name, d in r.components.items()
    }
    if r.fixed_point is not None:
        rep.witness["product"] = _summarize(r.fixed_point)
        rep.witness["product_is_fixed_point"] = r.product_is_fixed
        rep.witness["accept_mass"] = r.machine.accept_mass(r.fixed_point)
        rep.witness["reject_mass"] = r.machine.reject_mass(r.fixed_point)
        rep.details = {"path": [[n, b] for n, b in r.path], "final": r.final.value, "queries": prog.max_queries}
    if prog.max_queries == 0:
        rep.details["delta"] = EMPTY_TUPLE
    return VERDICT_EXIT[r.verdict]


# -- quantum ----------------------------------------------------------------


def _builtin_channel(ref: str) -> Optional[qm.KrausChannel]:
    parts = ref.split(":")
    if parts[0] != "builtin":
        return None
    kind = parts[1] if len(parts) > 1 else ""
    dim = int(parts[2]) if len(parts) > 2 else 2
    if kind == "identity":
        return qm.KrausChannel.identity(dim)
    if kind == "bitflip":
        return qm.KrausChannel.bit_flip()
    if kind == "depolarizing":
        return qm.KrausChannel.depolarizing(dim)
    raise InputError(f"unknown builtin channel {ref!r} (identity[:N], bitflip, depolarizing[:N])")


def _load_channel(ctx: Context, ref: str) -> qm.KrausChannel:
    ch = _builtin_channel(ref)
    if ch is not None:
        ctx.inputs[ref] = sha256_text(ref)
        return ch
    ctx.text(ref)
    return qm.channel_from_json(qm.load_json(ref))


def _load_effect(ctx: Context, ref: Optional[str], dim: int) -> qm.AcceptEffect:
    if ref is None:
        raise InputError("--effect is required for this mode")
    if ref.startswith("diag:"):
        ctx.inputs[ref] = sha256_text(ref)
        vals = [float(Fraction(v)) for v in ref[5:].split(",")]
        if len(vals) != dim:
            raise InputError(f"effect has {len(vals)} diagonal entries, channel has dim {dim}")
        return qm.AcceptEffect(np.diag(vals))
    ctx.text(ref)
    return qm.effect_from_json(qm.load_json(ref))


def cmd_quantum(args, ctx: Context, rep: Report) -> int:
    if args.mode == "norms":
        return _quantum_norms(args, rep)
    ch = _load_channel(ctx, args.channel)
    rep.details["dim"] = ch.dim
    if args.mode == "cesaro":
        seed = np.zeros((ch.dim, ch.dim), dtype=complex)
        seed[0, 0] = 1
        r = qm.cesaro_fixpoint(ch, seed, args.T)
        qm.validate_density(r.rho, "Cesaro average")
        rep.outcome = "residual"
        rep.witness = {"rho": r.rho, "residual": r.residual, "T": args.T, "bound_2_over_T": 2 / args.T}
        rep.details["residual_curve"] = [[t, v] for t, v in r.curve]
        return EXIT_YES
    effect = _load_effect(ctx, args.effect, ch.dim)
    schedule = qm.grid_schedule(ch.dim, args.max_denom)
    r = qm.fixed_point_search_A(ch, effect, schedule, args.t_budget, args.max_states)
    rep.outcome = r.verdict.value
    rep.witness = {
        "state": r.state,
        "grid": None if r.grid is None else {"k": r.grid.k, "denom": r.grid.denom},
        "accept_probability": r.accept_probability,
        "threshold": None if r.grid is None else qm.search_threshold(r.grid.k),
    }
    rep.details.update({"states_tried": r.states_tried, "t_budget": args.t_budget})
    return VERDICT_EXIT[r.verdict]


def _quantum_norms(args, rep: Report) -> int:
    rng = np.random.default_rng(args.rng_seed)
    contraction = trlb = trub = 0
    worst = {"contraction": -np.inf, "trlb": -np.inf, "trub": -np.inf}
    for i in range(args.trials):
        dim = (2, 4, 8)[i % 3]
        ch = qm.random_channel(dim, rng, 1 + i % 3)
        rho, sigma = qm.random_density(dim, rng), qm.random_density(dim, rng)
        gap = qm.trace_distance(ch(rho), ch(sigma)) - qm.trace_distance(rho, sigma)
        worst["contraction"] = max(worst["contraction"], gap)
        contraction += gap > qm.SLACK
        if not qm.check_trlb(rho, sigma):
            trlb += 1
        worst["trlb"] = max(worst["trlb"], qm.vec_distance(rho, sigma) - qm.trace_norm(rho - sigma))
        k = 1 + i % 3
        big = qm.level_size(k + 1)
        s = qm.embed(qm.random_density(qm.level_size(k), rng, rank=1 + i % 2), big)
        r = qm.random_density(big, rng)
        if not qm.check_trub(r, k, s):
            trub += 1
        worst["trub"] = max(worst["trub"], qm.trace_norm(s - r) - qm.trub_bound(k, r, s))
    rep.outcome = "no_violations" if contraction + trlb + trub == 0 else "violations"
    rep.witness = {
        "trials": args.trials,
        "violations": {"contraction": contraction, "trlb": trlb, "trub": trub},
        "worst_gap": {k: float(v) for k, v in worst.items()},
        "slack": qm.SLACK,
    }
    rep.details["rng_seed"] = args.rng_seed
    return EXIT_YES if rep.outcome == "no_violations" else EXIT_NO


# -- postselect -------------------------------------------------------------


def _parse_outcomes(spec: str) -> list[tuple[Fraction, Outcome]]:
    out = []
    for part in spec.split(","):
        name, sep, p = part.partition("=")
        if not sep:
            raise InputError(f"--program expects outcome=prob,..., got {part!r}")
        try:
            out.append((Fraction(p), Outcome(name.strip().lower())))
        except ValueError:
            raise InputError(f"bad outcome entry {part!r}") from None
    return out


def _gadget(args, ctx: Context) -> tuple[CoinProgram, Optional[tuple[Fraction, Fraction]], dict]:
    """The coin program plus exact (p, q) when ground truth is available."""
    if args.halt:
        spec = ctx.machine(args.halt)
        h = ctx.halts(args.halt, spec, args.budget)
        return build_halt_gadget(spec), halt_gadget_probabilities(h), {"gadget": "halt", "machine_halts": h}
    if args.wtt:
        prog = OracleProgram.parse(ctx.text(args.wtt), source=args.wtt)
        if not prog.is_nonadaptive():
            raise InputError("wtt gadget needs a nonadaptive oracle program")
        names = prog.query_list()
        refs = _machine_refs(prog, args.machine)
        specs = {n: ctx.machine(r) for n, r in refs.items()}
        halts = [ctx.halts(refs[n], specs[n], args.budget) for n in names]
        branches = wtt_branches(prog, halts)
        p = sum((b.weight for b in branches if b.halts and b.outcome == Outcome.ACCEPT), Fraction(0))
        q = sum((b.weight for b in branches if b.halts and b.outcome == Outcome.REJECT), Fraction(0))
        info = {
            "gadget": "wtt",
            "queries": names,
            "answers": [int(h) for h in halts],
            "conditional_correctness": wtt_conditional_correctness(prog, halts),
        }
        return build_wtt_gadget(prog, [specs[n] for n in names]), (p, q), info
    if args.program:
        items = _parse_outcomes(args.program)
        ctx.inputs["program"] = sha256_text(args.program)
        p = sum((w for w, o in items if o == Outcome.ACCEPT), Fraction(0))
        q = sum((w for w, o in items if o == Outcome.REJECT), Fraction(0))
        return distribution_program(items, args.program), (p, q), {"gadget": "distribution"}
    raise InputError("one of --halt, --wtt or --program is required")


def cmd_postselect(args, ctx: Context, rep: Report) -> int:
    prog, exact, info = _gadget(args, ctx)
    rep.details.update(info)
    if args.mode == "finite":
        r = decide_finite_post(prog, args.budget)
        rep.outcome = r.verdict.value
        rep.witness = {
            "epsilon": r.epsilon,
            "epsilon_depth": r.epsilon_depth,
            "final": None if r.final is None else _stats(r.final),
        }
        tail = r.table if len(r.table) <= 64 else r.table[:32] + r.table[-32:]
        rep.details["path_stats"] = [_stats(s) for s in tail]
        return VERDICT_EXIT[r.verdict]
    if args.oracle == "table":
        if exact is None:
            raise InputError("table oracle needs exact probabilities")
        oracle = TableOracle(*exact)
        rep.details["oracle"] = {"kind": "table", "p": exact[0], "q": exact[1]}
    else:
        oracle = DeepeningOracle(prog, args.budget)
        rep.details["oracle"] = {"kind": "deepening", "budget": args.budget}
    r = decide_infty_post(prog, oracle, eps_budget=args.budget)
    rep.outcome = r.verdict.value
    rep.witness = {
        "epsilon": r.epsilon,
        "p_bracket": None if r.p is None else r.p.to_dict(),
        "q_bracket": None if r.q is None else r.q.to_dict(),
        "queries": [[w, k, beta, reply.answer] for w, k, beta, reply in r.queries],
        "query_count": len(r.queries),
    }
    return VERDICT_EXIT[r.verdict]


def _stats(s) -> dict:
    return {"depth": s.depth, "p_lo": s.p_lo, "q_lo": s.q_lo, "star_lo": s.star_lo, "live": s.live}


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctclab", description="CTC fixed-point experiments with JSON reports.")
    p.add_argument("--no-timing", action="store_true", help="omit the timing section (byte-stable output)")
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    sub = p.add_subparsers(dest="command", required=True)

    h = sub.add_parser("decide-halt", help="decide HALT through the halting kernel's fixed point")
    h.add_argument("machine", help="machine file or corpus name")
    h.add_argument("--cap", type=int, default=8192, help="state cap for chain exploration")
    h.add_argument("--depth", type=int, default=32, help="truncation depth for the geometric witness")
    h.set_defaults(func=cmd_decide_halt)

    c = sub.add_parser("compose", help="compose per-machine CTC kernels along an oracle program")
    c.add_argument("program", help="oracle program file")
    c.add_argument("--machine", action="append", metavar="NAME=PATH", help="bind a queried name to a machine file")
    c.add_argument("--cap", type=int, default=8192)
    c.add_argument("--depth", type=int, default=32)
    c.set_defaults(func=cmd_compose)

    q = sub.add_parser("quantum", help="Cesaro fixed points, grid search and norm inequalities")
    q.add_argument("channel", nargs="?", default="builtin:bitflip",
                   help="channel JSON file or builtin:identity[:N] | builtin:bitflip | builtin:depolarizing[:N]")
    q.add_argument("--effect", help="effect JSON file or diag:q1,q2,...")
    q.add_argument("--mode", choices=["cesaro", "search", "norms"], default="cesaro")
    q.add_argument("-T", type=int, default=1000, help="Cesaro iterations")
    q.add_argument("--t-budget", type=int, default=1000)
    q.add_argument("--max-denom", type=int, default=8)
    q.add_argument("--max-states", type=int, default=10_000)
    q.add_argument("--trials", type=int, default=10_000)
    q.add_argument("--rng-seed", type=int, default=0)
    q.set_defaults(func=cmd_quantum)

    s = sub.add_parser("postselect", help="finite or infinite postselection deciders")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--halt", metavar="MACHINE", help="halt gadget for a machine file or corpus name")
    g.add_argument("--wtt", metavar="PROGRAM", help="wtt gadget for a nonadaptive oracle program file")
    g.add_argument("--program", metavar="SPEC", help="explicit outcome distribution, e.g. accept=3/4,reject=1/8,diverge=1/8")
    s.add_argument("--machine", action="append", metavar="NAME=PATH")
    s.add_argument("--mode", choices=["finite", "infty"], default="finite")
    s.add_argument("--oracle", choices=["table", "deepening"], default="table")
    s.add_argument("--budget", type=int, default=10_000, help="depth budget for enumeration")
    s.set_defaults(func=cmd_postselect)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    ctx = Context()
    rep = Report(command=["ctclab"] + argv)
    start = time.perf_counter()
    try:
        rep.exit_code = args.func(args, ctx, rep)
    except (InputError, MachineParseError, StructuralError, ContractError, OSError, ValueError, KeyError) as exc:
        print(f"ctclab: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantViolation as exc:
        print(f"ctclab: invariant violated: {exc.invariant} (magnitude {exc.magnitude:.3e}, "
              f"tolerance {exc.tolerance:.1e})", file=sys.stderr)
        return EXIT_INVARIANT
    except ResourceError as exc:
        rep.outcome = Verdict.EXHAUSTED.value
        rep.exit_code = EXIT_EXHAUSTED
        rep.details["resource_error"] = str(exc)
    rep.inputs = dict(sorted(ctx.inputs.items()))
    rep.timing = {"wall_seconds": round(time.perf_counter() - start, 6)}
    text = rep.to_json(include_timing=not args.no_timing)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return rep.exit_code
