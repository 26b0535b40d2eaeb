"""Deterministic Turing machines over {0,1,#} and their execution histories.

A history string sigma_t encodes the first ``t`` steps of a machine run on
a blank tape. The encoding is a header for the initial configuration
followed by one fixed-width record per step::

    sigma_t = "1" + start(w) + rec_1 + ... + rec_t
    rec_i   = new_state(w) + written_symbol(2) + move(1)

where ``w`` is the bit width of a state index. Every configuration c_i is
recovered by replaying the records against the transition table, so the
encoding is injective, checkable in one pass, and sigma_{t+1} is sigma_t
with one record appended.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator, Mapping, Optional

from ctclab.bits import fixed
from ctclab.errors import MachineParseError, StructuralError

SYMBOLS = ("0", "1", "#")
BLANK = "#"
MOVES = ("L", "R")

_SYMBOL_BITS = {"0": "00", "1": "01", "#": "10"}
_MOVE_BITS = {"L": "0", "R": "1"}


class HaltTag(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    HALT = "halt"


class AlreadyHalted(Exception):
    """Raised by :func:`step` on a configuration whose state is a halt state."""


@dataclass(frozen=True)
class MachineSpec:
    states: tuple[str, ...]
    start: str
    transitions: Mapping[tuple[str, str], tuple[str, str, str]]
    halt_states: Mapping[str, HaltTag] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        states = tuple(self.states)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "transitions", dict(self.transitions))
        object.__setattr__(
            self, "halt_states", {s: HaltTag(tag) for s, tag in dict(self.halt_states).items()}
        )
        if len(set(states)) != len(states):
            raise StructuralError("duplicate state ids")
        if self.start not in states:
            raise StructuralError(f"start state {self.start!r} is not declared")
        for s in self.halt_states:
            if s not in states:
                raise StructuralError(f"halt state {s!r} is not declared")
        for (s, sym), (ns, wsym, mv) in self.transitions.items():
            if s not in states or ns not in states:
                raise StructuralError(f"transition {s} {sym} -> {ns} uses an undeclared state")
            if sym not in SYMBOLS or wsym not in SYMBOLS or mv not in MOVES:
                raise StructuralError(f"bad symbol or move in transition from ({s}, {sym})")
            if s in self.halt_states:
                raise StructuralError(f"halt state {s!r} must not have outgoing transitions")
        missing = self.missing_transitions()
        if missing:
            raise StructuralError(f"transition table is not total; missing {missing}")

        index = {s: i for i, s in enumerate(states)}
        width = max(1, (len(states) - 1).bit_length())
        compiled = {}
        for (s, sym), (ns, wsym, mv) in self.transitions.items():
            rec = fixed(index[ns], width) + _SYMBOL_BITS[wsym] + _MOVE_BITS[mv]
            compiled[(s, sym)] = (ns, wsym, mv == "R", rec)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_width", width)
        object.__setattr__(self, "_compiled", compiled)

    def missing_transitions(self) -> list[tuple[str, str]]:
        return [
            (s, sym)
            for s in self.states
            if s not in self.halt_states
            for sym in SYMBOLS
            if (s, sym) not in self.transitions
        ]

    def is_halt(self, state: str) -> bool:
        return state in self.halt_states

    @property
    def state_width(self) -> int:
        return self._width

    @property
    def record_width(self) -> int:
        return self._width + 3

    @property
    def header(self) -> str:
        return "1" + fixed(self._index[self.start], self._width)

    def _key(self):
        return (
            self.name,
            self.states,
            self.start,
            tuple(sorted(self.transitions.items())),
            tuple(sorted((s, t.value) for s, t in self.halt_states.items())),
        )

    def __eq__(self, other):
        if not isinstance(other, MachineSpec):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


@dataclass(frozen=True)
class Configuration:
    state: str
    tape: tuple[str, ...] = ()
    head: int = 0
    step_index: int = 0

    @classmethod
    def initial(cls, spec: MachineSpec) -> "Configuration":
        return cls(spec.start)

    def read(self) -> str:
        return self.tape[self.head] if self.head < len(self.tape) else BLANK


def _check_configuration(spec: MachineSpec, c: Configuration):
    if c.state not in spec._index:
        raise StructuralError(f"unknown state {c.state!r}")
    if not 0 <= c.head <= len(c.tape):
        raise StructuralError(f"head {c.head} out of range for tape of length {len(c.tape)}")
    if any(sym not in SYMBOLS for sym in c.tape):
        raise StructuralError("tape contains a symbol outside {0,1,#}")


def step(spec: MachineSpec, c: Configuration) -> Configuration:
    """Apply one transition. Raises :class:`AlreadyHalted` on halt states."""
    _check_configuration(spec, c)
    if spec.is_halt(c.state):
        raise AlreadyHalted(c.state)
    ns, wsym, right, _ = spec._compiled[(c.state, c.read())]
    tape = list(c.tape)
    if c.head == len(tape):
        tape.append(wsym)
    else:
        tape[c.head] = wsym
    head = c.head + 1 if right else max(0, c.head - 1)
    return Configuration(ns, tuple(tape), head, c.step_index + 1)


class _Simulator:
    """Mutable fast-path stepping used by run() and the history code."""

    __slots__ = ("spec", "state", "tape", "head", "steps")

    def __init__(self, spec: MachineSpec):
        self.spec = spec
        self.state = spec.start
        self.tape: list[str] = []
        self.head = 0
        self.steps = 0

    @property
    def halted(self) -> bool:
        return self.state in self.spec.halt_states

    def advance(self) -> Optional[str]:
        """Take one step and return its history record, or None if halted."""
        if self.state in self.spec.halt_states:
            return None
        tape = self.tape
        head = self.head
        sym = tape[head] if head < len(tape) else BLANK
        ns, wsym, right, rec = self.spec._compiled[(self.state, sym)]
        if head == len(tape):
            tape.append(wsym)
        else:
            tape[head] = wsym
        self.head = head + 1 if right else (head - 1 if head else 0)
        self.state = ns
        self.steps += 1
        return rec

    def configuration(self) -> Configuration:
        return Configuration(self.state, tuple(self.tape), self.head, self.steps)


@dataclass(frozen=True)
class HaltedAt:
    t: int


@dataclass(frozen=True)
class StillRunningAfter:
    budget: int


def run(spec: MachineSpec, budget: int) -> HaltedAt | StillRunningAfter:
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    sim = _Simulator(spec)
    while not sim.halted:
        if sim.steps >= budget:
            return StillRunningAfter(budget)
        sim.advance()
    return HaltedAt(sim.steps)


@dataclass(frozen=True)
class Valid:
    t: int
    halting: bool


@dataclass(frozen=True)
class HistoryString:
    spec: MachineSpec = field(repr=False)
    raw: str
    t: int
    halting: bool

    @property
    def parsed(self) -> list[Configuration]:
        """Configurations c_0..c_t, recovered by replay."""
        return list(_replay_configurations(self.spec, self.t))


def _replay_configurations(spec: MachineSpec, t: int) -> Iterator[Configuration]:
    c = Configuration.initial(spec)
    yield c
    for _ in range(t):
        c = step(spec, c)
        yield c


def _steps_for_length(spec: MachineSpec, n: int) -> Optional[int]:
    rest = n - 1 - spec.state_width
    if rest < 0 or rest % spec.record_width:
        return None
    return rest // spec.record_width


def encode_history(spec: MachineSpec, t: int) -> Optional[HistoryString]:
    """sigma_t, or None when the machine halts before step ``t``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    sim = _Simulator(spec)
    parts = [spec.header]
    for _ in range(t):
        rec = sim.advance()
        if rec is None:
            return None
        parts.append(rec)
    return HistoryString(spec, "".join(parts), t, sim.halted)


def _replay(spec: MachineSpec, y: str) -> Optional[_Simulator]:
    t = _steps_for_length(spec, len(y))
    if t is None or not y.startswith(spec.header):
        return None
    sim = _Simulator(spec)
    pos = len(spec.header)
    width = spec.record_width
    for _ in range(t):
        rec = sim.advance()
        if rec is None or y[pos:pos + width] != rec:
            return None
        pos += width
    return sim


def classify_history(spec: MachineSpec, y: str) -> Optional[Valid]:
    """Valid(t, halting) iff ``y == encode_history(spec, t).raw``; else None."""
    sim = _replay(spec, y)
    if sim is None:
        return None
    return Valid(sim.steps, sim.halted)


class HistoryBook:
    """Memoized sigma_0, sigma_1, ... for one machine.

    Kernels built on histories query the same few strings over and over;
    the book extends the run lazily and answers membership by string
    comparison instead of replay. Strings far beyond the computed horizon
    are classified by streaming replay so that a single long input cannot
    force the book to materialize every intermediate history.
    """

    LOOKAHEAD = 64

    def __init__(self, spec: MachineSpec):
        self.spec = spec
        self._raws = [spec.header]
        self._sim = _Simulator(spec)

    @property
    def horizon(self) -> int:
        return len(self._raws) - 1

    @property
    def halt_step(self) -> Optional[int]:
        return self.horizon if self._sim.halted else None

    def raw(self, t: int) -> Optional[str]:
        while self.horizon < t:
            rec = self._sim.advance()
            if rec is None:
                return None
            self._raws.append(self._raws[-1] + rec)
        return self._raws[t]

    def is_halting(self, t: int) -> bool:
        return self.halt_step == t

    def classify(self, y: str) -> Optional[Valid]:
        t = _steps_for_length(self.spec, len(y))
        if t is None:
            return None
        if t <= self.horizon + self.LOOKAHEAD:
            r = self.raw(t)
            if r is None or r != y:
                return None
            return Valid(t, self.is_halting(t))
        return classify_history(self.spec, y)

    def successor(self, y: str, t: int) -> str:
        """sigma_{t+1} given a valid non-halting ``y == sigma_t``."""
        r = self.raw(t + 1)
        if r is not None:
            return r
        sim = _replay(self.spec, y)
        rec = sim.advance() if sim is not None else None
        if rec is None:
            raise StructuralError("successor requested for a halting or invalid history")
        return y + rec


_TRANSITION = re.compile(r"^(\S+)\s+([01#])\s*->\s*(\S+)\s+([01#])\s+([LR])$")


def parse_machine(text: str, source: Optional[str] = None) -> MachineSpec:
    """Parse the line-oriented machine description format.

    ::

        # comment lines start with '#'
        name: HALT3
        states: q0 q1 q2 h
        start: q0
        halt: h accept
        q0 # -> q1 1 R
    """
    name = ""
    states: Optional[list[str]] = None
    states_line = None
    start = None
    halts: dict[str, HaltTag] = {}
    transitions: dict[tuple[str, str], tuple[str, str, str]] = {}
    trans_lines: dict[tuple[str, str], int] = {}

    def fail(msg, line):
        raise MachineParseError(msg, line, source)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, rest = line.partition(":")
        key = key.strip().lower()
        if sep and key in ("name", "states", "start", "halt"):
            rest = rest.strip()
            if key == "name":
                name = rest
            elif key == "states":
                if states is not None:
                    fail("duplicate 'states:' line", lineno)
                states = rest.split()
                states_line = lineno
                if not states:
                    fail("empty state list", lineno)
                for s in states:
                    if s.startswith("#"):
                        fail(f"state id {s!r} may not start with '#'", lineno)
            elif key == "start":
                start = rest
            else:
                parts = rest.split()
                if len(parts) not in (1, 2):
                    fail("expected 'halt: <state> [accept|reject|halt]'", lineno)
                tag = parts[1].lower() if len(parts) == 2 else "halt"
                try:
                    halts[parts[0]] = HaltTag(tag)
                except ValueError:
                    fail(f"unknown halt tag {tag!r}", lineno)
            continue
        m = _TRANSITION.match(line)
        if not m:
            fail(f"cannot parse line {raw!r}", lineno)
        s, sym, ns, wsym, mv = m.groups()
        if (s, sym) in transitions:
            fail(f"duplicate transition for ({s}, {sym}); first on line {trans_lines[(s, sym)]}", lineno)
        transitions[(s, sym)] = (ns, wsym, mv)
        trans_lines[(s, sym)] = lineno

    if states is None:
        fail("missing 'states:' line", None)
    if start is None:
        fail("missing 'start:' line", None)
    declared = set(states)
    if start not in declared:
        fail(f"start state {start!r} is not declared", states_line)
    for s in halts:
        if s not in declared:
            fail(f"halt state {s!r} is not declared", states_line)
    for (s, sym), (ns, _, _) in transitions.items():
        for ref in (s, ns):
            if ref not in declared:
                fail(f"undeclared state {ref!r}", trans_lines[(s, sym)])
        if s in halts:
            fail(f"halt state {s!r} has an outgoing transition", trans_lines[(s, sym)])
    missing = [
        f"({s}, {sym})"
        for s in states
        if s not in halts
        for sym in SYMBOLS
        if (s, sym) not in transitions
    ]
    if missing:
        fail("transition table is not total; missing " + ", ".join(missing), states_line)
    return MachineSpec(tuple(states), start, transitions, halts, name)


def load_machine(path) -> MachineSpec:
    path = Path(path)
    spec = parse_machine(path.read_text(), source=str(path))
    if not spec.name:
        spec = MachineSpec(spec.states, spec.start, spec.transitions, spec.halt_states, path.stem)
    return spec


def format_machine(spec: MachineSpec) -> str:
    lines = []
    if spec.name:
        lines.append(f"name: {spec.name}")
    lines.append("states: " + " ".join(spec.states))
    lines.append(f"start: {spec.start}")
    for s, tag in spec.halt_states.items():
        lines.append(f"halt: {s} {tag.value}")
    for s in spec.states:
        for sym in SYMBOLS:
            if (s, sym) in spec.transitions:
                ns, wsym, mv = spec.transitions[(s, sym)]
                lines.append(f"{s} {sym} -> {ns} {wsym} {mv}")
    return "\n".join(lines) + "\n"
