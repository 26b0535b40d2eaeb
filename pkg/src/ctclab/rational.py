"""Exact Gaussian elimination over the rationals.

Rows are sparse ``{column: Fraction}`` dicts; chains explored by the
kernels here are very sparse, so the pivot is chosen to minimize fill.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from ctclab.errors import ContractError

SparseRow = dict[int, Fraction]


def solve(rows: Sequence[SparseRow], rhs: Sequence[Fraction], n: int) -> list[Fraction]:
    """Solve ``A x = b`` for square nonsingular ``A`` given as sparse rows."""
    if len(rows) != n or len(rhs) != n:
        raise ContractError("system must be square")
    work = [({c: Fraction(v) for c, v in r.items() if v}, Fraction(b)) for r, b in zip(rows, rhs)]
    pending = set(range(n))
    pivots: list[tuple[int, int]] = []  # (row index, column)
    by_col: dict[int, set[int]] = {}
    for i, (r, _) in enumerate(work):
        for c in r:
            by_col.setdefault(c, set()).add(i)

    for _ in range(n):
        best = None
        for i in pending:
            r = work[i][0]
            if r and (best is None or len(r) < len(work[best][0])):
                best = i
                if len(r) == 1:
                    break
        if best is None:
            raise ContractError("singular system")
        prow, pb = work[best]
        col = min(prow, key=lambda c: len(by_col.get(c, ())))
        pending.discard(best)
        pivots.append((best, col))
        pv = prow[col]
        for i in list(by_col.get(col, ())):
            if i == best or i not in pending:
                continue
            r, b = work[i]
            f = r[col] / pv
            for c, v in prow.items():
                nv = r.get(c, 0) - f * v
                if nv:
                    if c not in r:
                        by_col.setdefault(c, set()).add(i)
                    r[c] = nv
                elif c in r:
                    del r[c]
                    by_col[c].discard(i)
            work[i] = (r, b - f * pb)

    x: list[Fraction] = [Fraction(0)] * n
    for i, col in reversed(pivots):
        r, b = work[i]
        acc = b
        for c, v in r.items():
            if c != col:
                acc -= v * x[c]
        x[col] = acc / r[col]
    return x


def stationary(rows: Sequence[SparseRow]) -> list[Fraction]:
    """Stationary vector of an irreducible stochastic matrix.

    ``rows[i][j]`` is the probability of moving from i to j. Solves
    ``pi (P - I) = 0`` with the last balance equation replaced by
    ``sum(pi) = 1``.
    """
    n = len(rows)
    cols: list[SparseRow] = [dict() for _ in range(n)]
    for i, r in enumerate(rows):
        for j, p in r.items():
            cols[j][i] = cols[j].get(i, 0) + p
    eqs: list[SparseRow] = []
    for j in range(n - 1):
        eq = dict(cols[j])
        eq[j] = eq.get(j, 0) - 1
        eqs.append(eq)
    eqs.append({i: Fraction(1) for i in range(n)})
    rhs = [Fraction(0)] * (n - 1) + [Fraction(1)]
    return solve(eqs, rhs, n)
