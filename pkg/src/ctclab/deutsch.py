"""Deutschian-CTC kernels over execution histories.

The halting kernel acts on a CTC register holding a candidate history y of
a machine P:

* a halting history is left unchanged (output HALT),
* a non-halting sigma_t becomes sigma_{t+1} or sigma_0 with probability 1/2
  each (output LOOP),
* anything else is reset to sigma_0 (output LOOP).

If P halts at step t the unique fixed point is the point mass on sigma_t;
otherwise it is geometric, sigma_t with probability 2^-(t+1). The latter
has infinite support, so finite solvers work with the depth-d truncation
whose sigma_d always resets to sigma_0. That chain is a renewal process
with stationary law 2^-t / (2 - 2^-d).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Union

from ctclab.bits import bits_to_bytes, bytes_to_bits, gamma, is_binary, read_gamma
from ctclab.dist import (
    ChainReport,
    Kernel,
    StringDist,
    explore_chain,
    is_fixed_point,
)
from ctclab.errors import ContractError, StructuralError
from ctclab.machine import HistoryBook, MachineSpec, StillRunningAfter, run
from ctclab.outcomes import Outcome, Verdict

HALF = Fraction(1, 2)
TWO_THIRDS = Fraction(2, 3)


@dataclass
class CtcMachine:
    """A kernel on the CTC register plus the output produced for each register value."""

    kernel: Kernel
    label: Callable[[str], Outcome]
    description: str = ""
    histories: Optional[HistoryBook] = field(default=None, repr=False)

    def accept_mass(self, d: StringDist) -> Fraction:
        return d.mass_where(lambda y: self.label(y) == Outcome.ACCEPT)

    def reject_mass(self, d: StringDist) -> Fraction:
        return d.mass_where(lambda y: self.label(y) == Outcome.REJECT)

    def decision(self, d: StringDist) -> Optional[Verdict]:
        """ACCEPT/REJECT at the 2/3 threshold, None if ``d`` is neither."""
        if self.accept_mass(d) >= TWO_THIRDS:
            return Verdict.ACCEPT
        if self.reject_mass(d) >= TWO_THIRDS:
            return Verdict.REJECT
        return None


def constant_label(outcome: Outcome) -> Callable[[str], Outcome]:
    return lambda y: outcome


def _history_kernel(spec: MachineSpec, depth: Optional[int]) -> CtcMachine:
    book = HistoryBook(spec)
    sigma0 = book.raw(0)
    reset = StringDist.point(sigma0)

    def fn(y: str) -> StringDist:
        v = book.classify(y)
        if v is None:
            return reset
        if v.halting:
            return StringDist.point(y)
        if depth is not None and v.t >= depth:
            return reset
        return StringDist({book.successor(y, v.t): HALF, sigma0: HALF})

    def label(y: str) -> Outcome:
        v = book.classify(y)
        return Outcome.ACCEPT if v is not None and v.halting else Outcome.REJECT

    name = spec.name or "P"
    desc = f"halting kernel of {name}" if depth is None else f"halting kernel of {name} truncated at depth {depth}"
    return CtcMachine(Kernel(fn, desc), label, desc, book)


def halting_kernel(spec: MachineSpec) -> CtcMachine:
    """The HALT-deciding CTC machine for ``spec``; label ACCEPT means HALT."""
    return _history_kernel(spec, None)


def truncated_halting_kernel(spec: MachineSpec, depth: int) -> CtcMachine:
    """Halting kernel whose non-halting sigma_t, t >= depth, resets to sigma_0."""
    if depth < 1:
        raise ContractError("depth must be positive")
    return _history_kernel(spec, depth)


def geometric_fixpoint(spec: MachineSpec, depth: int) -> StringDist:
    """Exact stationary law of the depth-truncated halting chain."""
    if depth < 1:
        raise ContractError("depth must be positive")
    if not isinstance(run(spec, depth), StillRunningAfter):
        raise ContractError(f"{spec.name or 'machine'} halts within {depth} steps")
    book = HistoryBook(spec)
    denom = 2 ** (depth + 1) - 1
    return StringDist({book.raw(t): Fraction(2 ** (depth - t), denom) for t in range(depth + 1)})


def geometric_tv_to_ideal(book: HistoryBook, d: StringDist, below: Optional[int] = None) -> Fraction:
    """Total variation from ``d`` (supported on histories) to the ideal geometric law.

    The ideal law puts 2^-(t+1) on sigma_t for every t. With ``below`` set,
    only the terms t < below are compared (no tail term).
    """
    times = {}
    for y in d:
        v = book.classify(y)
        if v is None or v.halting:
            raise ContractError("distribution is not supported on non-halting histories")
        times[v.t] = d[y]
    if below is not None:
        total = sum((abs(times.get(t, 0) - Fraction(1, 2 ** (t + 1))) for t in range(below)), Fraction(0))
        return total / 2
    top = max(times) if times else -1
    total = sum((abs(times.get(t, 0) - Fraction(1, 2 ** (t + 1))) for t in range(top + 1)), Fraction(0))
    total += Fraction(1, 2 ** (top + 1))
    return total / 2


@dataclass
class HaltDecision:
    verdict: Verdict
    witness: Optional[StringDist]
    halt_step: Optional[int] = None
    horizon: int = 0
    residual_bound: Optional[Fraction] = None
    report: Optional[ChainReport] = field(default=None, repr=False)


def decide_halt_via_ctc(spec: MachineSpec, state_cap: int, depth: int) -> HaltDecision:
    """Search the halting kernel's chain for its fixed point.

    HALT comes with the point mass on the halting history. Without a
    closed class, LOOP_TRUNCATED is issued only if the explored horizon
    covers ``depth`` (so that the geometric witness is certified by the
    exploration itself); otherwise the outcome is EXHAUSTED.
    """
    if state_cap < 1 or depth < 1:
        raise ContractError("state_cap and depth must be positive")
    m = halting_kernel(spec)
    report = explore_chain(m.kernel, [m.histories.raw(0)], state_cap)
    horizon = max(m.histories.classify(y).t for y in report.states)
    if report.stationary:
        witness = report.stationary[0]
        (y,) = witness.support()
        v = m.histories.classify(y)
        if len(report.stationary) != 1 or v is None or not v.halting or witness[y] != 1:
            raise StructuralError("halting kernel produced an unexpected closed class")
        return HaltDecision(Verdict.HALT, witness, v.t, horizon, Fraction(0), report)
    if depth > horizon:
        return HaltDecision(Verdict.EXHAUSTED, None, None, horizon, None, report)
    witness = geometric_fixpoint(spec, depth)
    return HaltDecision(Verdict.LOOP_TRUNCATED, witness, None, horizon, Fraction(1, 2 ** depth), report)


# -- oracle programs -------------------------------------------------------


@dataclass(frozen=True)
class Query:
    machine: str


@dataclass(frozen=True)
class Final:
    outcome: Outcome


Node = Union[Query, Final]
Prefix = tuple[int, ...]


@dataclass
class OracleProgram:
    """Decision tree over HALT answers: each prefix of answer bits maps to
    the next query or to a final outcome."""

    nodes: dict[Prefix, Node]
    description: str = ""

    def __post_init__(self):
        self.nodes = {tuple(p): n for p, n in self.nodes.items()}
        if () not in self.nodes:
            raise StructuralError("oracle program has no root node")
        reachable = set()
        frontier = [()]
        while frontier:
            p = frontier.pop()
            reachable.add(p)
            node = self.nodes.get(p)
            if node is None:
                raise StructuralError(f"oracle program undefined at prefix {_fmt_prefix(p)}")
            if isinstance(node, Query):
                frontier.extend([p + (0,), p + (1,)])
        extra = set(self.nodes) - reachable
        if extra:
            raise StructuralError(f"unreachable prefixes {sorted(map(_fmt_prefix, extra))}")

    def next(self, prefix: Iterable[int]) -> Node:
        return self.nodes[tuple(prefix)]

    @property
    def max_queries(self) -> int:
        return max((len(p) + 1 for p, n in self.nodes.items() if isinstance(n, Query)), default=0)

    def machines(self) -> list[str]:
        seen = []
        for p in sorted(self.nodes, key=lambda p: (len(p), p)):
            n = self.nodes[p]
            if isinstance(n, Query) and n.machine not in seen:
                seen.append(n.machine)
        return seen

    def walk(self, answers: Mapping[str, bool]) -> tuple[list[tuple[str, int]], Final]:
        """Follow the tree with true answers; return the query path and the final node."""
        prefix: Prefix = ()
        path = []
        node = self.nodes[prefix]
        while isinstance(node, Query):
            bit = 1 if answers[node.machine] else 0
            path.append((node.machine, bit))
            prefix += (bit,)
            node = self.nodes[prefix]
        return path, node

    def is_nonadaptive(self) -> bool:
        k = self.max_queries
        by_depth: dict[int, set[str]] = {}
        for p, n in self.nodes.items():
            if isinstance(n, Query):
                by_depth.setdefault(len(p), set()).add(n.machine)
            elif len(p) != k:
                return False
        return all(len(v) == 1 for v in by_depth.values()) and len(by_depth) == k

    def query_list(self) -> list[str]:
        if not self.is_nonadaptive():
            raise ContractError("oracle program is adaptive")
        return [next(iter({n.machine for p, n in self.nodes.items() if isinstance(n, Query) and len(p) == i}))
                for i in range(self.max_queries)]

    def f(self, bits: Iterable[int]) -> Outcome:
        node = self.nodes[tuple(bits)]
        if not isinstance(node, Final):
            raise ContractError("prefix does not end in a final node")
        return node.outcome

    @classmethod
    def nonadaptive(cls, machines: list[str], f: Callable[[Prefix], Outcome], description="") -> "OracleProgram":
        nodes: dict[Prefix, Node] = {}
        for i, name in enumerate(machines):
            for p in itertools.product((0, 1), repeat=i):
                nodes[p] = Query(name)
        for p in itertools.product((0, 1), repeat=len(machines)):
            nodes[p] = Final(Outcome(f(p)))
        return cls(nodes, description)

    @classmethod
    def parse(cls, text: str, source: Optional[str] = None) -> "OracleProgram":
        """Parse lines ``<prefix> query <machine>`` / ``<prefix> final <outcome>``.

        The empty prefix is written ``-``; ``#`` starts a comment line.
        """
        nodes: dict[Prefix, Node] = {}
        where = f"{source}:" if source else ""
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3 or parts[1] not in ("query", "final"):
                raise StructuralError(f"{where}{lineno}: expected '<prefix> query|final <arg>'")
            pre = "" if parts[0] == "-" else parts[0]
            if not is_binary(pre):
                raise StructuralError(f"{where}{lineno}: bad prefix {parts[0]!r}")
            prefix = tuple(int(b) for b in pre)
            if prefix in nodes:
                raise StructuralError(f"{where}{lineno}: duplicate prefix {parts[0]!r}")
            if parts[1] == "query":
                nodes[prefix] = Query(parts[2])
            else:
                try:
                    nodes[prefix] = Final(Outcome(parts[2].lower()))
                except ValueError:
                    raise StructuralError(f"{where}{lineno}: unknown outcome {parts[2]!r}") from None
        return cls(nodes, source or "")

    def to_text(self) -> str:
        lines = []
        for p in sorted(self.nodes, key=lambda p: (len(p), p)):
            n = self.nodes[p]
            key = "".join(map(str, p)) or "-"
            if isinstance(n, Query):
                lines.append(f"{key} query {n.machine}")
            else:
                lines.append(f"{key} final {n.outcome.value}")
        return "\n".join(lines) + "\n"


def _fmt_prefix(p: Prefix) -> str:
    return "".join(map(str, p)) or "-"


# -- k-tuples of histories -------------------------------------------------


def encode_tuple(entries: Iterable[tuple[str, str]]) -> str:
    """Serialize ``[(machine name, history bits), ...]`` self-delimitingly."""
    entries = list(entries)
    out = [gamma(len(entries))]
    for name, hist in entries:
        nb = name.encode("utf-8")
        out += [gamma(len(nb)), bytes_to_bits(nb), gamma(len(hist)), hist]
    return "".join(out)


def decode_tuple(s: str) -> Optional[list[tuple[str, str]]]:
    """Inverse of :func:`encode_tuple`; None on anything malformed."""
    try:
        k, pos = read_gamma(s, 0)
        entries = []
        for _ in range(k):
            n, pos = read_gamma(s, pos)
            if pos + 8 * n > len(s):
                return None
            name = bits_to_bytes(s[pos:pos + 8 * n]).decode("utf-8")
            pos += 8 * n
            h, pos = read_gamma(s, pos)
            if pos + h > len(s):
                return None
            entries.append((name, s[pos:pos + h]))
            pos += h
    except (ValueError, UnicodeDecodeError):
        return None
    if pos != len(s):
        return None
    return entries


EMPTY_TUPLE = encode_tuple([])


def _product(factors: list[StringDist], names: list[str]) -> StringDist:
    acc: dict[str, Fraction] = {}
    for combo in itertools.product(*(f.items() for f in factors)):
        w = Fraction(1)
        for _, p in combo:
            w *= p
        key = encode_tuple(zip(names, (y for y, _ in combo)))
        acc[key] = acc.get(key, 0) + w
    return StringDist(acc)


def compose_oracle_program(prog: OracleProgram, sub_kernels: Mapping[str, CtcMachine]) -> CtcMachine:
    """The composed kernel S' acting on serialized k-tuples of histories.

    Invalid tuples reset to the empty tuple. Valid tuples have every
    component advanced by its own kernel; a non-halting tuple additionally
    gets sigma_{B_{k+1},0} of the next queried machine appended.
    """
    missing = [n for n in prog.machines() if n not in sub_kernels]
    if missing:
        raise ContractError(f"no sub-kernel for {missing}")
    for name in prog.machines():
        if sub_kernels[name].histories is None:
            raise ContractError(f"sub-kernel {name!r} carries no history book")
    reset = StringDist.point(EMPTY_TUPLE)

    def analyze(sigma: str):
        entries = decode_tuple(sigma)
        if entries is None:
            return None
        prefix: Prefix = ()
        for name, hist in entries:
            node = prog.nodes.get(prefix)
            if not isinstance(node, Query) or node.machine != name:
                return None
            v = sub_kernels[name].histories.classify(hist)
            if v is None:
                return None
            prefix += (1 if v.halting else 0,)
        return entries, prog.nodes[prefix]

    def fn(sigma: str) -> StringDist:
        a = analyze(sigma)
        if a is None:
            return reset
        entries, node = a
        names = [n for n, _ in entries]
        factors = [sub_kernels[n].kernel.apply(h) for n, h in entries]
        if isinstance(node, Query):
            names.append(node.machine)
            factors.append(StringDist.point(sub_kernels[node.machine].histories.raw(0)))
        return _product(factors, names)

    def label(sigma: str) -> Outcome:
        a = analyze(sigma)
        if a is None or isinstance(a[1], Query):
            return Outcome.REJECT
        return a[1].outcome

    desc = f"composed kernel of {prog.description or 'oracle program'}"
    return CtcMachine(Kernel(fn, desc), label, desc)


def compose_fixed_point(
    prog: OracleProgram,
    fixed_points: Mapping[str, StringDist],
    answers: Mapping[str, bool],
) -> StringDist:
    """Product of per-machine fixed points along the true query path."""
    path, _ = prog.walk(answers)
    names = [name for name, _ in path]
    return _product([fixed_points[n] for n in names], names)


@dataclass
class CompositionResult:
    verdict: Verdict
    machine: Optional[CtcMachine] = field(default=None, repr=False)
    fixed_point: Optional[StringDist] = None
    components: dict = field(default_factory=dict)
    path: list = field(default_factory=list)
    product_is_fixed: Optional[bool] = None
    final: Optional[Outcome] = None


def decide_oracle_program(
    prog: OracleProgram,
    specs: Mapping[str, MachineSpec],
    state_cap: int,
    depth: int,
) -> CompositionResult:
    """Resolve every queried machine through its own CTC, then compose.

    Halting machines contribute their exact point-mass fixed point and
    the full halting kernel; looping ones the depth-truncated kernel and
    its geometric law. The product is checked against S' exactly.
    """
    decisions = {}
    for name in prog.machines():
        decisions[name] = decide_halt_via_ctc(specs[name], state_cap, depth)
    if any(d.verdict == Verdict.EXHAUSTED for d in decisions.values()):
        return CompositionResult(Verdict.EXHAUSTED, components=decisions)
    subs = {}
    fps = {}
    answers = {}
    for name, d in decisions.items():
        answers[name] = d.verdict == Verdict.HALT
        subs[name] = halting_kernel(specs[name]) if answers[name] else truncated_halting_kernel(specs[name], depth)
        fps[name] = d.witness
    m = compose_oracle_program(prog, subs)
    fp = compose_fixed_point(prog, fps, answers)
    path, final = prog.walk(answers)
    ok = is_fixed_point(m.kernel, fp)
    verdict = m.decision(fp) or Verdict.EXHAUSTED
    return CompositionResult(verdict, m, fp, decisions, path, ok, final.outcome)
