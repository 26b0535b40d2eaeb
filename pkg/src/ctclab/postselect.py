"""Postselected probabilistic programs and the decision procedures over them.

A :class:`CoinProgram` is a lazy tree of biased coin flips, machine steps
(``Continue``) and leaves. Divergence is just an endless chain of
``Continue`` nodes, so enumeration to a finite depth is always safe.
Each ``Flip`` and each ``Continue`` costs one unit of depth; reaching a
leaf is free.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence, Union

from ctclab.deutsch import OracleProgram
from ctclab.errors import ContractError, OracleInconsistency, ResourceError
from ctclab.machine import Configuration, MachineSpec, step
from ctclab.outcomes import Outcome, Verdict

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class Leaf:
    outcome: Outcome

    def __post_init__(self):
        if self.outcome not in (Outcome.ACCEPT, Outcome.REJECT, Outcome.NO_RESPONSE):
            raise ContractError(f"leaf outcome must be accept, reject or no_response, not {self.outcome}")


@dataclass(frozen=True, eq=False)
class Flip:
    """Heads with probability ``bias``. Children may be nodes or zero-argument thunks."""

    bias: Fraction
    heads: object
    tails: object

    def __post_init__(self):
        b = Fraction(self.bias)
        if not 0 < b < 1:
            raise ContractError(f"flip bias {b} not in (0, 1)")
        object.__setattr__(self, "bias", b)


@dataclass(frozen=True, eq=False)
class Continue:
    next: Callable[[], "Node"]


Node = Union[Leaf, Flip, Continue]


def force(x) -> Node:
    return x() if callable(x) and not isinstance(x, (Leaf, Flip, Continue)) else x


@dataclass
class CoinProgram:
    root: object
    description: str = ""


def diverge() -> Continue:
    """A node that never resolves."""
    node = Continue(lambda: node)
    return node


# -- enumeration ------------------------------------------------------------


@dataclass(frozen=True)
class PathStats:
    depth: int
    p_lo: Fraction
    q_lo: Fraction
    star_lo: Fraction
    live: Fraction

    def __post_init__(self):
        if self.p_lo + self.q_lo + self.star_lo + self.live != 1:
            raise ContractError("path statistics do not sum to 1")

    @property
    def halted(self) -> Fraction:
        return self.p_lo + self.q_lo


@dataclass(frozen=True)
class LeafEvent:
    depth: int
    position: int
    outcome: Outcome
    weight: Fraction


class PathEnumerator:
    """Incremental breadth-first expansion of a coin program.

    The frontier is kept in left-to-right order (heads before tails), so
    leaf events are reported in a deterministic order.
    """

    def __init__(self, prog: CoinProgram, node_cap: int = 1 << 20):
        self.prog = prog
        self.node_cap = node_cap
        self.depth = 0
        self.totals = {Outcome.ACCEPT: ZERO, Outcome.REJECT: ZERO, Outcome.NO_RESPONSE: ZERO}
        self.events: list[LeafEvent] = []
        self.frontier: list[tuple[Node, Fraction]] = []
        self._absorb([(force(prog.root), ONE)])

    def _absorb(self, items):
        out = []
        for node, w in items:
            if isinstance(node, Leaf):
                self.totals[node.outcome] += w
                self.events.append(LeafEvent(self.depth, len(self.events), node.outcome, w))
            else:
                out.append((node, w))
        self.frontier = out

    @property
    def live(self) -> Fraction:
        return ONE - sum(self.totals.values(), ZERO)

    @property
    def stats(self) -> PathStats:
        t = self.totals
        return PathStats(self.depth, t[Outcome.ACCEPT], t[Outcome.REJECT], t[Outcome.NO_RESPONSE], self.live)

    def step(self) -> PathStats:
        nxt = []
        for node, w in self.frontier:
            if isinstance(node, Flip):
                nxt.append((force(node.heads), w * node.bias))
                nxt.append((force(node.tails), w * (1 - node.bias)))
            else:
                nxt.append((force(node.next()), w))
        if len(nxt) > self.node_cap:
            raise ResourceError(f"frontier of {len(nxt)} nodes exceeds cap {self.node_cap}", self.stats)
        self.depth += 1
        self._absorb(nxt)
        return self.stats

    def run_to(self, depth: int) -> PathStats:
        while self.depth < depth and self.frontier:
            self.step()
        self.depth = max(self.depth, depth)
        return self.stats


def enumerate_paths(prog: CoinProgram, depth: int, node_cap: int = 1 << 20) -> PathStats:
    if depth < 0:
        raise ContractError("depth must be nonnegative")
    return PathEnumerator(prog, node_cap).run_to(depth)


def find_epsilon(en: PathEnumerator, budget: int) -> Optional[LeafEvent]:
    """Deepen until the first accept-or-reject leaf; it is the leftmost at the shallowest depth."""
    while True:
        for ev in en.events:
            if ev.outcome in (Outcome.ACCEPT, Outcome.REJECT):
                return ev
        if en.depth >= budget or not en.frontier:
            return None
        en.step()


@dataclass
class FinitePostResult:
    verdict: Verdict
    epsilon: Optional[Fraction] = None
    epsilon_depth: Optional[int] = None
    final: Optional[PathStats] = None
    table: list[PathStats] = field(default_factory=list)


def decide_finite_post(prog: CoinProgram, budget: int, node_cap: int = 1 << 20) -> FinitePostResult:
    """Deepen until some leaf decides (its weight is eps), then until live <= eps/10,
    and compare the accept and reject mass found so far."""
    en = PathEnumerator(prog, node_cap)
    table = [en.stats]

    def deeper():
        table.append(en.step())

    ev = None
    while ev is None:
        ev = next((e for e in en.events if e.outcome in (Outcome.ACCEPT, Outcome.REJECT)), None)
        if ev is None:
            if en.depth >= budget or not en.frontier:
                return FinitePostResult(Verdict.EXHAUSTED, final=en.stats, table=table)
            deeper()
    eps = ev.weight
    while en.live > eps / 10:
        if en.depth >= budget:
            return FinitePostResult(Verdict.EXHAUSTED, eps, ev.depth, en.stats, table)
        deeper()
    s = en.stats
    if s.p_lo > s.q_lo:
        v = Verdict.ACCEPT
    elif s.q_lo > s.p_lo:
        v = Verdict.REJECT
    else:
        v = Verdict.EXHAUSTED
    return FinitePostResult(v, eps, ev.depth, s, table)


# -- gadgets ----------------------------------------------------------------

HALT_GADGET_REJECT = Fraction(1, 100)


def _simulation(spec: MachineSpec, c: Configuration, done: Node) -> Node:
    if spec.is_halt(c.state):
        return done
    return Continue(lambda: _simulation(spec, step(spec, c), done))


def build_halt_gadget(spec: MachineSpec) -> CoinProgram:
    """Reject with probability 1/100; otherwise simulate and accept on halting."""
    return CoinProgram(
        Flip(HALT_GADGET_REJECT, Leaf(Outcome.REJECT),
             lambda: _simulation(spec, Configuration.initial(spec), Leaf(Outcome.ACCEPT))),
        f"halt gadget for {spec.name or 'P'}",
    )


def halt_gadget_probabilities(halts: bool) -> tuple[Fraction, Fraction]:
    """Exact (accept, reject) probabilities of the halt gadget given the ground truth."""
    return (ONE - HALT_GADGET_REJECT if halts else ZERO), HALT_GADGET_REJECT


def wtt_bias(k: int) -> Fraction:
    """Probability that b_i = 1; b_i = 0 happens with probability 0.01/k."""
    return 1 - Fraction(1, 100 * k)


def _dovetail(specs: Sequence[MachineSpec], configs: tuple, outcome: Outcome) -> Node:
    if all(s.is_halt(c.state) for s, c in zip(specs, configs)):
        if outcome == Outcome.DIVERGE:
            return diverge()
        return Leaf(outcome)
    nxt = tuple(c if s.is_halt(c.state) else step(s, c) for s, c in zip(specs, configs))
    return Continue(lambda: _dovetail(specs, nxt, outcome))


def build_wtt_gadget(prog: OracleProgram, machines: Sequence[MachineSpec]) -> CoinProgram:
    """Sample b_i, simulate every B_i with b_i = 1 in lockstep, then output f(b)."""
    queries = prog.query_list()
    k = len(queries)
    if k < 1 or len(machines) != k:
        raise ContractError("wtt gadget needs k >= 1 machines, one per query")
    bias = wtt_bias(k)

    def sample(bits: tuple) -> Node:
        if len(bits) == k:
            chosen = [m for m, b in zip(machines, bits) if b]
            return _dovetail(chosen, tuple(Configuration.initial(m) for m in chosen), prog.f(bits))
        return Flip(bias, lambda: sample(bits + (1,)), lambda: sample(bits + (0,)))

    return CoinProgram(sample(()), f"wtt gadget over {', '.join(queries)}")


@dataclass
class WttBranch:
    bits: tuple
    weight: Fraction
    halts: bool
    outcome: Outcome


def wtt_branches(prog: OracleProgram, halts: Sequence[bool]) -> list[WttBranch]:
    """All 2^k b-branches, with halting decided from ground truth."""
    k = len(halts)
    bias = wtt_bias(k)
    out = []
    for bits in itertools.product((1, 0), repeat=k):
        w = ONE
        for b in bits:
            w *= bias if b else 1 - bias
        f = prog.f(bits)
        ok = all(h for h, b in zip(halts, bits) if b) and f != Outcome.DIVERGE
        out.append(WttBranch(bits, w, ok, f))
    return out


def wtt_conditional_correctness(prog: OracleProgram, halts: Sequence[bool]) -> Fraction:
    """Pr[output = f(true answers) | halted], exactly."""
    truth = prog.f(tuple(int(h) for h in halts))
    branches = wtt_branches(prog, halts)
    halted = sum((b.weight for b in branches if b.halts), ZERO)
    good = sum((b.weight for b in branches if b.halts and b.outcome == truth), ZERO)
    return good / halted


def conditional(p: Fraction, q: Fraction) -> tuple[Fraction, Fraction]:
    s = p + q
    if s == 0:
        raise ContractError("program never halts with an answer")
    return p / s, q / s


# -- threshold oracles and the query ladder --------------------------------


class Reply:
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class OracleReply:
    answer: str
    budget_used: int = 0


class ThresholdOracle:
    """Answers "is p > beta?" (which='p') or "is q > beta?" (which='q')."""

    def query(self, which: str, beta: Fraction) -> OracleReply:
        raise NotImplementedError


class TableOracle(ThresholdOracle):
    """Backed by exactly known (p, q)."""

    def __init__(self, p, q):
        self.values = {"p": Fraction(p), "q": Fraction(q)}

    def query(self, which, beta):
        return OracleReply(Reply.YES if self.values[which] > beta else Reply.NO)


class DeepeningOracle(ThresholdOracle):
    """Backed by enumeration up to ``budget``. Yes needs a frontier already
    above beta; No needs the undecided mass to be unable to cross beta."""

    def __init__(self, prog: CoinProgram, budget: int, node_cap: int = 1 << 20):
        self.en = PathEnumerator(prog, node_cap)
        self.budget = budget

    def query(self, which, beta):
        beta = Fraction(beta)
        while True:
            s = self.en.stats
            lo = s.p_lo if which == "p" else s.q_lo
            if lo > beta:
                return OracleReply(Reply.YES, s.depth)
            if lo + s.live <= beta:
                return OracleReply(Reply.NO, s.depth)
            if s.depth >= self.budget or not self.en.frontier:
                return OracleReply(Reply.UNKNOWN, s.depth)
            self.en.step()


LADDER_RATIO = Fraction(11, 10)


def ladder_top(eps: Fraction) -> int:
    """Smallest K with 1.1^K >= 2/eps."""
    target = 2 / Fraction(eps)
    k, v = 0, ONE
    while v < target:
        k += 1
        v *= LADDER_RATIO
    return k


def ladder(eps: Fraction) -> list[tuple[int, Fraction]]:
    """Thresholds beta_k = 1.1^k eps/2 for k = -1..K."""
    eps = Fraction(eps)
    return [(k, LADDER_RATIO ** k * eps / 2) for k in range(-1, ladder_top(eps) + 1)]


@dataclass
class Bracket:
    lower: Fraction  # value > lower (or lower == 0 with no Yes)
    upper: Optional[Fraction]  # value <= upper, None if never certified

    def to_dict(self):
        return {"lower": self.lower, "upper": self.upper}


def _bracket(which: str, rungs, replies) -> Bracket:
    lower = ZERO
    upper = None
    for (k, beta), r in zip(rungs, replies):
        if r.answer == Reply.YES:
            lower = max(lower, beta)
        elif r.answer == Reply.NO:
            upper = beta if upper is None else min(upper, beta)
    if upper is not None and lower >= upper and lower > 0:
        raise OracleInconsistency(f"{which} > {lower} certified but {which} <= {upper} also certified")
    return Bracket(lower, upper)


@dataclass
class InftyPostResult:
    verdict: Verdict
    epsilon: Optional[Fraction]
    queries: list = field(default_factory=list)  # (which, k, beta, reply)
    p: Optional[Bracket] = None
    q: Optional[Bracket] = None


def decide_infty_post(
    prog: CoinProgram,
    oracle: ThresholdOracle,
    eps: Optional[Fraction] = None,
    eps_budget: int = 10_000,
) -> InftyPostResult:
    """Bracket p and q on a geometric ladder of thresholds, all queries fixed up front.

    ``eps`` (a lower bound on p + q) is found by deepening to the first
    decisive leaf unless given.
    """
    if eps is None:
        ev = find_epsilon(PathEnumerator(prog), eps_budget)
        if ev is None:
            return InftyPostResult(Verdict.EXHAUSTED, None)
        eps = ev.weight
    eps = Fraction(eps)
    if not 0 < eps <= 1:
        raise ContractError("eps must lie in (0, 1]")
    rungs = ladder(eps)
    plan = [(w, k, beta) for w in ("p", "q") for k, beta in rungs]
    replies = [oracle.query(w, beta) for w, _, beta in plan]
    n = len(rungs)
    pb = _bracket("p", rungs, replies[:n])
    qb = _bracket("q", rungs, replies[n:])
    log = [(w, k, beta, r) for (w, k, beta), r in zip(plan, replies)]
    if qb.upper is not None and pb.lower > 0 and pb.lower >= LADDER_RATIO * qb.upper:
        v = Verdict.ACCEPT
    elif pb.upper is not None and qb.lower > 0 and qb.lower >= LADDER_RATIO * pb.upper:
        v = Verdict.REJECT
    else:
        v = Verdict.EXHAUSTED
    return InftyPostResult(v, eps, log, pb, qb)


# -- postselected-CTC convention --------------------------------------------

PCTC_SELECTED = ""


def pctc_output(outcome: Outcome) -> tuple[int, str]:
    """(output bit, final CTC register) for a run ending in ``outcome``; the register starts at the empty string."""
    if outcome == Outcome.ACCEPT:
        return 1, PCTC_SELECTED
    if outcome == Outcome.REJECT:
        return 0, PCTC_SELECTED
    return 0, "1"


def pctc_conditional(stats: PathStats) -> tuple[Fraction, Fraction]:
    """Conditional (accept, reject) over runs whose register was restored."""
    mass = {}
    for outcome, w in ((Outcome.ACCEPT, stats.p_lo), (Outcome.REJECT, stats.q_lo), (Outcome.NO_RESPONSE, stats.star_lo)):
        mass[pctc_output(outcome)] = mass.get(pctc_output(outcome), ZERO) + w
    restored = mass.get((1, PCTC_SELECTED), ZERO) + mass.get((0, PCTC_SELECTED), ZERO)
    if restored == 0:
        raise ContractError("no run restores the register")
    return mass.get((1, PCTC_SELECTED), ZERO) / restored, mass.get((0, PCTC_SELECTED), ZERO) / restored


# -- small programs -----------------------------------------------------------


def distribution_program(outcomes: Iterable[tuple[Fraction, Outcome]], description: str = "") -> CoinProgram:
    """A chain of flips realizing the given finite outcome distribution.

    ``Outcome.DIVERGE`` entries become branches that never resolve.
    """
    items = [(Fraction(p), o) for p, o in outcomes if p]
    if sum(p for p, _ in items) != 1:
        raise ContractError("outcome probabilities must sum to 1")

    def leaf(o):
        return diverge() if o == Outcome.DIVERGE else Leaf(o)

    def build(rest, mass):
        (p, o), tail = rest[0], rest[1:]
        if not tail:
            return leaf(o)
        return Flip(p / mass, leaf(o), build(tail, mass - p))

    return CoinProgram(build(items, ONE), description)


def delayed(node: Node, steps: int) -> Node:
    for _ in range(steps):
        node = (lambda n: Continue(lambda: n))(node)
    return node


# -- path sums for a measured two-qubit circuit ------------------------------


Gate = tuple


def path_sum_amplitudes(gates: Sequence[Gate], n_qubits: int) -> tuple[dict[int, int], int]:
    """Integer path sums: amplitude(y) = a[y] / sqrt(2)^h for h Hadamards.

    Each Hadamard splits every path in two; the other gates permute basis
    states or flip signs. Qubit 0 is the most significant bit.
    """
    amps = {0: 1}
    h = 0

    def bit(x, q):
        return (x >> (n_qubits - 1 - q)) & 1

    def flip(x, q):
        return x ^ (1 << (n_qubits - 1 - q))

    for g in gates:
        out: dict[int, int] = {}
        name = g[0]
        for x, a in amps.items():
            if name == "H":
                q = g[1]
                x0 = x & ~(1 << (n_qubits - 1 - q))
                for y, s in ((x0, 1), (flip(x0, q), -1 if bit(x, q) else 1)):
                    out[y] = out.get(y, 0) + s * a
            elif name == "X":
                out[flip(x, g[1])] = out.get(flip(x, g[1]), 0) + a
            elif name == "Z":
                out[x] = out.get(x, 0) + (-a if bit(x, g[1]) else a)
            elif name == "CNOT":
                y = flip(x, g[2]) if bit(x, g[1]) else x
                out[y] = out.get(y, 0) + a
            else:
                raise ContractError(f"unknown gate {name!r}")
        if name == "H":
            h += 1
        amps = {x: a for x, a in out.items() if a}
    return amps, h


def path_sum_program(
    gates: Sequence[Gate],
    n_qubits: int,
    accept: Callable[[int], bool],
    selected: Callable[[int], bool],
) -> tuple[CoinProgram, dict[int, Fraction]]:
    """CoinProgram whose outcomes follow the circuit's measurement statistics.

    Outcomes failing ``selected`` give NoResponse; the rest are classified
    by ``accept``. Returns the program and the exact outcome probabilities.
    """
    amps, h = path_sum_amplitudes(gates, n_qubits)
    probs = {y: Fraction(a * a, 2 ** h) for y, a in sorted(amps.items())}
    if sum(probs.values()) != 1:
        raise ContractError("path sum is not normalized")

    def label(y):
        if not selected(y):
            return Outcome.NO_RESPONSE
        return Outcome.ACCEPT if accept(y) else Outcome.REJECT

    return distribution_program([(p, label(y)) for y, p in probs.items()], "path-sum circuit"), probs


def statevector_probabilities(gates: Sequence[Gate], n_qubits: int):
    """Floating-point reference via a dense statevector."""
    import numpy as np

    dim = 2 ** n_qubits
    psi = np.zeros(dim, dtype=complex)
    psi[0] = 1
    hmat = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    xmat = np.array([[0, 1], [1, 0]])
    zmat = np.diag([1, -1])

    def one(u, q):
        ops = [np.eye(2)] * n_qubits
        ops[q] = u
        m = ops[0]
        for o in ops[1:]:
            m = np.kron(m, o)
        return m

    for g in gates:
        if g[0] in ("H", "X", "Z"):
            psi = one({"H": hmat, "X": xmat, "Z": zmat}[g[0]], g[1]) @ psi
        elif g[0] == "CNOT":
            m = np.zeros((dim, dim))
            for x in range(dim):
                c = (x >> (n_qubits - 1 - g[1])) & 1
                y = x ^ (1 << (n_qubits - 1 - g[2])) if c else x
                m[y, x] = 1
            psi = m @ psi
        else:
            raise ContractError(f"unknown gate {g[0]!r}")
    return np.abs(psi) ** 2
