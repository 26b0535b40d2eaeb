"""Fixed-point searches for CTC machines whose fixed points are promised nice.

``finite_support_search`` looks for a closed strongly connected class
among strings of bounded length. ``bounded_length_search`` enumerates a
rational grid over short strings and discards candidates that some
iterate moves visibly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from ctclab.deutsch import CtcMachine
from ctclab.dist import StringDist, canon, class_stationary, closed_classes, push_forward, tv_distance
from ctclab.errors import ContractError, ResourceError
from ctclab.outcomes import Verdict

EPSILON = Fraction(1, 100)


def strings_of_length(k: int):
    for bits in itertools.product("01", repeat=k):
        yield "".join(bits)


@dataclass
class FiniteSearchResult:
    verdict: Verdict
    level: Optional[int] = None
    fixed_point: Optional[StringDist] = None
    classes_seen: int = 0


def _closure(kernel, s: str, k: int, leaky: set, resolved: set) -> Optional[list[str]]:
    """New strings reachable from ``s`` without leaving length <= k.

    Returns None (and marks the DFS stack leaky) on a leak. Strings in
    ``resolved`` are known to stay inside and are not re-entered.
    """
    order = [s]
    seen = {s}
    stack = [(s, iter(kernel.apply(s).support()))]
    while stack:
        y, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            stack.pop()
            continue
        if nxt in resolved or nxt in seen:
            continue
        if len(nxt) > k or nxt in leaky:
            leaky.update(node for node, _ in stack)
            return None
        seen.add(nxt)
        order.append(nxt)
        stack.append((nxt, iter(kernel.apply(nxt).support())))
    return order


def finite_support_search(m: CtcMachine, k_max: int) -> FiniteSearchResult:
    """Search levels k = 0..k_max for a closed class inside {0,1}^{<=k}.

    Classes found at a level are solved exactly and tried in canonical
    order of their least member; the first one meeting a 2/3 threshold
    decides. Classes meeting neither threshold are skipped.
    """
    if k_max < 0:
        raise ContractError("k_max must be nonnegative")
    seen_classes: set[frozenset] = set()
    resolved: set[str] = set()
    for k in range(k_max + 1):
        leaky: set[str] = set()
        found: list[StringDist] = []
        for s in strings_of_length(k):
            if s in resolved or s in leaky:
                continue
            nodes = _closure(m.kernel, s, k, leaky, resolved)
            if nodes is None:
                continue
            if len(nodes) == 1 and s not in m.kernel.apply(s):
                resolved.add(s)
                continue
            nodes.sort(key=canon)
            index = {y: i for i, y in enumerate(nodes)}
            rows = []
            escaping = set()
            for i, y in enumerate(nodes):
                row = {}
                for z, p in m.kernel.apply(y).items():
                    if z in index:
                        row[index[z]] = p
                    else:
                        escaping.add(i)
                rows.append(row)
            for cls in closed_classes(len(nodes), rows, frozenset(escaping)):
                key = frozenset(nodes[i] for i in cls)
                if key not in seen_classes:
                    seen_classes.add(key)
                    found.append(class_stationary(nodes, rows, cls))
            resolved.update(nodes)
        found.sort(key=lambda d: canon(d.support()[0]))
        for d in found:
            v = m.decision(d)
            if v is not None:
                return FiniteSearchResult(v, k, d, len(seen_classes))
    return FiniteSearchResult(Verdict.NOT_FOUND, None, None, len(seen_classes))


# -- bounded expected length ----------------------------------------------


@dataclass
class BoundedSearchResult:
    verdict: Verdict
    support: list[str]
    survivors: list[StringDist]
    eliminated: dict = field(default_factory=dict)  # candidate -> step t
    n_candidates: int = 0
    steps_run: int = 0


def grid_candidates(support: list[str], r: int):
    """All distributions on ``support`` with weights in (1/r)Z, lexicographic in weights (descending)."""
    n = len(support)

    def comps(total, parts):
        if parts == 1:
            yield (total,)
            return
        for first in range(total, -1, -1):
            for rest in comps(total - first, parts - 1):
                yield (first,) + rest

    for w in comps(r, n):
        yield StringDist({s: Fraction(c, r) for s, c in zip(support, w) if c})


def bounded_length_search(
    m: CtcMachine,
    ell,
    t_budget: int,
    net_resolution: int,
    candidate_cap: int = 200_000,
) -> BoundedSearchResult:
    """Grid elimination over distributions supported on {0,1}^{<=ell/eps}, eps = 1/100.

    A candidate E is discarded at the first t <= t_budget with
    tv(S^t(E), E) > 2 eps. Iteration is round-robin over candidates; a
    candidate whose orbit returns to a previously seen distribution has
    been checked on every future iterate and stops early.
    """
    ell = Fraction(ell)
    if ell <= 0:
        raise ContractError("ell must be positive")
    if t_budget < 0 or net_resolution < 1:
        raise ContractError("t_budget must be >= 0 and net_resolution >= 1")
    max_len = math.floor(ell / EPSILON)
    if m.kernel.domain is not None:
        support = [s for s in m.kernel.domain if len(s) <= max_len]
    else:
        count = 2 ** (max_len + 1) - 1
        if count > candidate_cap:
            raise ResourceError(f"admissible support has {count} strings; kernel declares no finite domain", None)
        support = sorted((s for k in range(max_len + 1) for s in strings_of_length(k)), key=canon)
    if not support:
        return BoundedSearchResult(Verdict.EXHAUSTED, support, [])
    n_candidates = math.comb(net_resolution + len(support) - 1, len(support) - 1)
    if n_candidates > candidate_cap:
        raise ResourceError(f"grid has {n_candidates} candidates, cap is {candidate_cap}", None)

    threshold = 2 * EPSILON
    cands = list(grid_candidates(support, net_resolution))
    current = list(cands)
    orbit = [{c} for c in cands]
    live = set(range(len(cands)))
    eliminated = {}
    steps = 0
    for t in range(1, t_budget + 1):
        if not live:
            break
        steps = t
        for i in sorted(live):
            nxt = push_forward(m.kernel, current[i])
            if tv_distance(nxt, cands[i]) > threshold:
                eliminated[cands[i]] = t
                live.discard(i)
                continue
            if nxt in orbit[i]:
                live.discard(i)  # periodic from here on: all later iterates already checked
                continue
            orbit[i].add(nxt)
            current[i] = nxt
    survivors = [c for c in cands if c not in eliminated]
    decisions = {m.decision(c) for c in survivors}
    if survivors and decisions == {Verdict.ACCEPT}:
        verdict = Verdict.ACCEPT
    elif survivors and decisions == {Verdict.REJECT}:
        verdict = Verdict.REJECT
    else:
        verdict = Verdict.EXHAUSTED
    return BoundedSearchResult(verdict, support, survivors, eliminated, len(cands), steps)
