"""Exact primal simplex over Fractions.

Only the origin-feasible form is needed here: maximize c.x subject to A.x <= b,
x >= 0 with b >= 0. Bland's rule keeps it cycle-free.
"""
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import PreconditionViolated
from .rationals import ZERO


@dataclass(frozen=True)
class LPSolution:
    x: tuple[Fraction, ...]
    value: Fraction
    pivots: int


def maximize(c: Sequence[Fraction], rows: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> LPSolution:
    n = len(c)
    k = len(rows)
    if any(b < 0 for b in rhs):
        raise PreconditionViolated("simplex needs a nonnegative right-hand side")

    width = n + k + 1
    tableau = []
    for r, (row, b) in enumerate(zip(rows, rhs)):
        line = [Fraction(a) for a in row] + [ZERO] * k + [Fraction(b)]
        line[n + r] = Fraction(1)
        tableau.append(line)
    objective = [-Fraction(a) for a in c] + [ZERO] * k + [ZERO]
    basis = [n + r for r in range(k)]

    pivots = 0
    while True:
        entering = next((j for j in range(width - 1) if objective[j] < 0), None)
        if entering is None:
            break
        leave, best = None, None
        for r in range(k):
            a = tableau[r][entering]
            if a > 0:
                ratio = tableau[r][-1] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[leave]):
                    leave, best = r, ratio
        if leave is None:
            raise PreconditionViolated("linear program is unbounded")

        pivot_row = tableau[leave]
        p = pivot_row[entering]
        if p != 1:
            pivot_row = [a / p for a in pivot_row]
            tableau[leave] = pivot_row
        for r in range(k):
            if r != leave:
                f = tableau[r][entering]
                if f:
                    tableau[r] = [a - f * b for a, b in zip(tableau[r], pivot_row)]
        f = objective[entering]
        objective = [a - f * b for a, b in zip(objective, pivot_row)]
        basis[leave] = entering
        pivots += 1

    x = [ZERO] * n
    for r, var in enumerate(basis):
        if var < n:
            x[var] = tableau[r][-1]
    return LPSolution(x=tuple(x), value=objective[-1], pivots=pivots)
