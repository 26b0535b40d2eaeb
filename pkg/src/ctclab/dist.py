"""Exact finite-support distributions over binary strings and stochastic kernels.

All weights are :class:`fractions.Fraction`; every equality here is exact.
Strings are ordered by ``(length, lexicographic)`` wherever an order is
observable.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Optional, Sequence

from ctclab import rational
from ctclab.errors import ContractError, StructuralError
from ctclab.graph import strongly_connected_components

ONE = Fraction(1)
ZERO = Fraction(0)


def canon(s: str):
    return (len(s), s)


class StringDist(Mapping[str, Fraction]):
    """A finite-support (sub)probability distribution over strings."""

    __slots__ = ("_w", "_mass")

    def __init__(self, weights: Optional[Mapping[str, object]] = None):
        w = {}
        mass = ZERO
        for s, p in (weights or {}).items():
            if not isinstance(s, str):
                raise StructuralError(f"support point {s!r} is not a string")
            p = Fraction(p)
            if p < 0 or p > 1:
                raise StructuralError(f"weight {p} of {s!r} outside [0, 1]")
            if p:
                w[s] = p
                mass += p
        if mass > 1:
            raise StructuralError(f"total mass {mass} exceeds 1")
        self._w = w
        self._mass = mass

    @classmethod
    def point(cls, s: str) -> "StringDist":
        return cls({s: ONE})

    @classmethod
    def from_records(cls, records: Iterable[Sequence]) -> "StringDist":
        return cls({s: Fraction(int(n), int(d)) for s, n, d in records})

    def __getitem__(self, s):
        return self._w[s]

    def get(self, s, default=ZERO):
        return self._w.get(s, default)

    def __iter__(self):
        return iter(sorted(self._w, key=canon))

    def __len__(self):
        return len(self._w)

    def __eq__(self, other):
        if isinstance(other, StringDist):
            return self._w == other._w
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self._w.items()))

    def __repr__(self):
        body = ", ".join(f"{s!r}: {p}" for s, p in self.items())
        return f"StringDist({{{body}}})"

    @property
    def mass(self) -> Fraction:
        return self._mass

    @property
    def is_normalized(self) -> bool:
        return self._mass == 1

    def support(self) -> list[str]:
        return sorted(self._w, key=canon)

    def items(self):
        return [(s, self._w[s]) for s in self.support()]

    def mass_where(self, pred: Callable[[str], bool]) -> Fraction:
        return sum((p for s, p in self._w.items() if pred(s)), ZERO)

    def to_records(self) -> list[tuple[str, int, int]]:
        return [(s, p.numerator, p.denominator) for s, p in self.items()]


def _require_normalized(*dists: StringDist):
    for d in dists:
        if not d.is_normalized:
            raise ContractError(f"distribution has mass {d.mass}, expected 1")


def mixture(terms: Iterable[tuple[Fraction, StringDist]]) -> StringDist:
    acc: dict[str, Fraction] = {}
    for c, d in terms:
        if not c:
            continue
        for s, p in d._w.items():
            acc[s] = acc.get(s, ZERO) + c * p
    return StringDist(acc)


class Kernel:
    """A row-finite stochastic map from strings to :class:`StringDist`.

    ``fn`` must be pure. Outputs are checked for normalization. ``domain``
    optionally declares a finite state space that the kernel maps into
    itself; searches that need to enumerate candidate supports use it.
    """

    def __init__(
        self,
        fn: Callable[[str], StringDist],
        description: str = "",
        domain: Optional[Iterable[str]] = None,
        cache_size: Optional[int] = 1 << 14,
    ):
        self.description = description
        self.domain = tuple(sorted(set(domain), key=canon)) if domain is not None else None
        self._fn = fn
        self._apply = lru_cache(maxsize=cache_size)(self._checked) if cache_size else self._checked

    def _checked(self, y: str) -> StringDist:
        out = self._fn(y)
        if not isinstance(out, StringDist):
            out = StringDist(out)
        if not out.is_normalized:
            raise StructuralError(f"kernel {self.description!r} output for {y!r} has mass {out.mass}")
        return out

    def apply(self, y: str) -> StringDist:
        return self._apply(y)

    __call__ = apply

    def __repr__(self):
        return f"Kernel({self.description!r})"


def identity_kernel(domain=None) -> Kernel:
    return Kernel(StringDist.point, "identity", domain)


def successor_kernel() -> Kernel:
    """y -> y + 1 on binary numerals (the empty string reads as 0)."""

    def fn(y: str) -> StringDist:
        return StringDist.point(format(int(y or "0", 2) + 1, "b"))

    return Kernel(fn, "successor")


def table_kernel(rows: Mapping[str, Mapping[str, object]], description="table") -> Kernel:
    """Finite kernel from explicit rows; inputs outside the table are fixed."""
    table = {y: StringDist(r) for y, r in rows.items()}
    domain = set(table)
    for d in table.values():
        domain.update(d)

    def fn(y):
        return table.get(y) or StringDist.point(y)

    return Kernel(fn, description, domain)


def cycle_kernel(order: Sequence[str], description="cycle") -> Kernel:
    """Deterministic cycle order[0] -> order[1] -> ... -> order[0]."""
    rows = {a: {b: 1} for a, b in zip(order, list(order[1:]) + [order[0]])}
    return table_kernel(rows, description)


def metropolis_kernel(pi: StringDist, domain: Sequence[str], description="metropolis") -> Kernel:
    """Lazy Metropolis chain on ``domain`` with stationary law ``pi``.

    Proposals are uniform over the other states and accepted with
    probability min(1, pi(j)/pi(i)), then halved. The chain is reversible
    with respect to ``pi``; states outside the support of ``pi`` are
    transient, so ``pi`` is its unique stationary law.
    """
    _require_normalized(pi)
    domain = sorted(set(domain), key=canon)
    if not set(pi) <= set(domain) or len(domain) < 2:
        raise ContractError("pi must be supported inside a domain of at least two states")
    n = len(domain)
    rows = {}
    for i in domain:
        row = {}
        for j in domain:
            if j == i:
                continue
            a = ONE if pi.get(i) == 0 else min(ONE, pi.get(j) / pi.get(i))
            if a:
                row[j] = a / (2 * (n - 1))
        row[i] = ONE - sum(row.values(), ZERO)
        rows[i] = row
    return table_kernel(rows, description)


def tv_distance(d1: StringDist, d2: StringDist) -> Fraction:
    _require_normalized(d1, d2)
    keys = set(d1._w) | set(d2._w)
    return sum((abs(d1.get(s) - d2.get(s)) for s in keys), ZERO) / 2


def push_forward(k: Kernel, d: StringDist) -> StringDist:
    _require_normalized(d)
    return mixture((p, k.apply(y)) for y, p in d.items())


def expected_length(d: StringDist) -> Fraction:
    _require_normalized(d)
    return sum((p * len(s) for s, p in d._w.items()), ZERO)


def is_fixed_point(k: Kernel, d: StringDist) -> bool:
    return push_forward(k, d) == d


@dataclass
class ChainReport:
    states: list[str]
    closed_classes: list[tuple[int, ...]]
    stationary: list[StringDist]
    leaked: bool
    rows: list[dict[int, Fraction]] = field(repr=False, default_factory=list)
    open_states: frozenset = field(repr=False, default=frozenset())


def closed_classes(n: int, rows: Sequence[Mapping[int, Fraction]], open_states=frozenset()) -> list[tuple[int, ...]]:
    """SCCs with no transition leaving them, sorted by smallest member."""
    comps = strongly_connected_components(n, [list(r) for r in rows])
    out = []
    for comp in comps:
        members = set(comp)
        if any(i in open_states for i in comp):
            continue
        if all(j in members for i in comp for j in rows[i]):
            out.append(tuple(sorted(comp)))
    out.sort()
    return out


def class_stationary(states: Sequence[str], rows: Sequence[Mapping[int, Fraction]], cls: Sequence[int]) -> StringDist:
    local = {g: i for i, g in enumerate(cls)}
    sub = [{local[j]: p for j, p in rows[g].items()} for g in cls]
    pi = rational.stationary(sub)
    return StringDist({states[g]: p for g, p in zip(cls, pi)})


def explore_chain(k: Kernel, seeds: Iterable[str], state_cap: int) -> ChainReport:
    """Breadth-first closure of ``seeds`` under ``k``, then exact stationary solves.

    Discovery stops at ``state_cap`` states; any transition to an
    undiscovered state marks its source as open and the report as leaked.
    Open states never belong to a closed class.
    """
    seeds = sorted(set(seeds), key=canon)
    if state_cap < len(seeds) or state_cap < 1:
        raise ContractError("state_cap must be at least the number of seeds")
    states: list[str] = []
    index: dict[str, int] = {}
    for s in seeds:
        index[s] = len(states)
        states.append(s)
    queue = deque(range(len(states)))
    raw_rows: dict[int, dict[int, Fraction]] = {}
    open_idx = set()
    while queue:
        i = queue.popleft()
        row = {}
        for y, p in k.apply(states[i]).items():
            j = index.get(y)
            if j is None:
                if len(states) >= state_cap:
                    open_idx.add(i)
                    continue
                j = index[y] = len(states)
                states.append(y)
                queue.append(j)
            row[j] = p
        raw_rows[i] = row

    order = sorted(range(len(states)), key=lambda i: canon(states[i]))
    remap = {old: new for new, old in enumerate(order)}
    states = [states[i] for i in order]
    rows = [{remap[j]: p for j, p in raw_rows[i].items()} for i in order]
    open_states = frozenset(remap[i] for i in open_idx)
    classes = closed_classes(len(states), rows, open_states)
    stationary = [class_stationary(states, rows, c) for c in classes]
    return ChainReport(states, classes, stationary, bool(open_idx), rows, open_states)
